#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sptucker/engine.hpp"
#include "sptucker/errors.hpp"
#include "sptucker/metrics.hpp"
#include "sptucker/oracle.hpp"
#include "sptucker/reports.hpp"
#include "sptucker/schemes.hpp"
#include "sptucker/tensor.hpp"

namespace py = pybind11;
using namespace sptucker;

namespace {

SparseTensor from_coords(std::vector<Index> dims, const std::vector<std::vector<Index>>& coords,
                         const std::vector<double>& values) {
  if (coords.size() != values.size()) throw ShapeError("coords and values differ in length");
  std::vector<Element> el;
  el.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) el.push_back({coords[i], values[i]});
  return SparseTensor(std::move(dims), el);
}

DistributionScheme make_scheme(const SparseTensor& t, const std::string& kind, int ranks, std::uint64_t seed,
                               const std::string& policy) {
  const SchemeKind k = parse_scheme_kind(kind);
  if (k == SchemeKind::kExternal) {
    std::istringstream in(policy);
    return load_external_policy(in, t, ranks);
  }
  return build_scheme(k, t, ranks, seed);
}

std::string metrics_json(const SparseTensor& t, const DistributionScheme& s, const std::vector<Index>& core) {
  return to_json(compute_metrics(t, s, core)).dump();
}

py::dict decompose(const SparseTensor& t, const DistributionScheme& s, const std::vector<Index>& core,
                   int invocations, std::uint64_t seed, const std::string& lanczos, int threads) {
  HooiOptions opt;
  opt.core = core;
  opt.invocations = invocations;
  opt.seed = seed;
  if (lanczos == "converge") {
    opt.lanczos.mode = LanczosMode::kConverge;
  } else if (lanczos != "fixed") {
    throw ConfigError("unknown Lanczos mode '" + lanczos + "'");
  }
  opt.threads = threads;
  DistributedHooi h(t, s, opt, random_orthonormal_factors(t.dims(), core, seed));
  const TuckerModel* model = nullptr;
  {
    py::gil_scoped_release release;
    model = &h.run();
  }
  std::vector<double> fits;
  std::vector<std::string> ledgers;
  for (const auto& r : h.records()) {
    fits.push_back(r.fit);
    ledgers.push_back(to_json(r.ledger).dump());
  }
  py::dict out;
  out["factors"] = model->factors;
  out["core_dims"] = model->core_dims;
  out["core"] = model->core;
  out["fit_history"] = fits;
  out["final_fit"] = h.final_fit();
  out["ledgers"] = ledgers;
  out["numerical_flags"] = h.any_numerical_flags();
  return out;
}

std::vector<double> oracle_fit(const SparseTensor& t, const std::vector<Index>& core, int invocations,
                               std::uint64_t seed) {
  const auto init = random_orthonormal_factors(t.dims(), core, seed);
  std::vector<oracle::DenseMatrix> dense;
  for (const auto& f : init) {
    oracle::DenseMatrix d(f.rows(), f.cols());
    for (Index r = 0; r < f.rows(); ++r) {
      for (Index c = 0; c < f.cols(); ++c) d(r, c) = f(r, c);
    }
    dense.push_back(std::move(d));
  }
  const std::vector<std::int64_t> k(core.begin(), core.end());
  return oracle::dense_hooi(oracle::densify(t), k, std::move(dense), invocations).fit_history;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sparse Tucker decomposition over simulated ranks";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<SparseTensor>(m, "SparseTensor")
      .def(py::init(&from_coords), py::arg("dims"), py::arg("coords"), py::arg("values"))
      .def_property_readonly("order", &SparseTensor::order)
      .def_property_readonly("nnz", &SparseTensor::nnz)
      .def_property_readonly("dims", [](const SparseTensor& t) { return std::vector<Index>(t.dims().begin(), t.dims().end()); })
      .def("norm_squared", &SparseTensor::norm_squared);

  m.def("read_tns", &ingest_tns_file, py::arg("path"));
  m.def("parse_tns", &ingest_tns_string, py::arg("text"));

  py::class_<DistributionScheme>(m, "Scheme")
      .def_property_readonly("kind", [](const DistributionScheme& s) { return std::string(to_string(s.kind)); })
      .def_property_readonly("ranks", [](const DistributionScheme& s) { return s.ranks; })
      .def_property_readonly("uni_policy", &DistributionScheme::uni_policy)
      .def_property_readonly("grid", [](const DistributionScheme& s) -> py::object {
        if (!s.grid) return py::none();
        return py::cast(s.grid->q);
      })
      .def("assignment", [](const DistributionScheme& s, std::size_t mode) { return s.policy_for_mode(mode).assignment; },
           py::arg("mode"));

  m.def("build_scheme", &make_scheme, py::arg("tensor"), py::arg("kind"), py::arg("ranks"), py::arg("seed") = 42,
        py::arg("policy") = "");
  m.def("grid_factorize", [](int ranks, const std::vector<Index>& dims) { return grid_factorize(ranks, dims).q; },
        py::arg("ranks"), py::arg("dims"));
  m.def("metrics_json", &metrics_json, py::arg("tensor"), py::arg("scheme"), py::arg("core"));
  m.def("decompose", &decompose, py::arg("tensor"), py::arg("scheme"), py::arg("core"), py::arg("invocations") = 5,
        py::arg("seed") = 42, py::arg("lanczos") = "fixed", py::arg("threads") = 1);
  m.def("oracle_fit", &oracle_fit, py::arg("tensor"), py::arg("core"), py::arg("invocations") = 5,
        py::arg("seed") = 42);
}
