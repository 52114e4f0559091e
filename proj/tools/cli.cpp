#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "sptucker/engine.hpp"
#include "sptucker/errors.hpp"
#include "sptucker/metrics.hpp"
#include "sptucker/oracle.hpp"
#include "sptucker/reports.hpp"
#include "sptucker/schemes.hpp"
#include "sptucker/tensor.hpp"

namespace sptucker::cli {
namespace {

namespace fs = std::filesystem;

struct Config {
  std::string input;
  std::string ranks = "1";
  std::string core = "10";
  std::string scheme = "lite";
  std::string schemes = "lite,coarse,medium";
  std::string policy_file;
  std::string policy_out;
  std::string coarse_variant = "blocks";
  std::uint64_t seed = 42;
  int invocations = 5;
  std::string report;
  std::string csv;
  std::string model_dir;
  std::string lanczos = "fixed";
  std::optional<double> fit_tolerance;
  bool oracle_check = false;
  bool strict = false;
  bool use_old_factors = false;
  int threads = 1;
};

std::vector<long long> parse_list(const std::string& text, const char* what) {
  std::vector<long long> out;
  std::stringstream ss(text);
  for (std::string tok; std::getline(ss, tok, ',');) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (tok.empty() || used != tok.size()) throw ConfigError(std::string("bad ") + what + " '" + text + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError(std::string("empty ") + what);
  return out;
}

std::vector<int> parse_ranks(const std::string& text) {
  std::vector<int> out;
  for (long long v : parse_list(text, "rank count")) {
    if (v < 1 || v > 1'000'000) throw ConfigError("rank count must be at least 1, got " + std::to_string(v));
    out.push_back(static_cast<int>(v));
  }
  return out;
}

int single_rank_count(const std::string& text) {
  const auto r = parse_ranks(text);
  if (r.size() != 1) throw ConfigError("expected one rank count, got '" + text + "'");
  return r.front();
}

std::vector<Index> resolve_core(const std::string& text, const SparseTensor& t) {
  const auto vals = parse_list(text, "core length list");
  if (vals.size() != 1 && vals.size() != t.order()) {
    throw ConfigError("--core needs 1 or " + std::to_string(t.order()) + " values, got " + std::to_string(vals.size()));
  }
  std::vector<Index> core;
  for (std::size_t n = 0; n < t.order(); ++n) {
    const long long k = vals.size() == 1 ? vals.front() : vals[n];
    if (k < 1) throw ConfigError("core lengths must be at least 1");
    core.push_back(k);
  }
  return core;
}

CoarseVariant parse_variant(const std::string& s) {
  if (s == "blocks") return CoarseVariant::kContiguousBlocks;
  if (s == "best-fit") return CoarseVariant::kBestFit;
  throw ConfigError("unknown coarse variant '" + s + "'");
}

DistributionScheme make_scheme(const Config& cfg, const std::string& name, const SparseTensor& t, int ranks) {
  SchemeKind kind;
  try {
    kind = parse_scheme_kind(name);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (kind == SchemeKind::kExternal) {
    if (cfg.policy_file.empty()) throw ConfigError("--scheme external needs --policy-file");
    return load_external_policy_file(cfg.policy_file, t, ranks);
  }
  if (!cfg.policy_file.empty()) throw ConfigError("--policy-file is only read with --scheme external");
  if (kind == SchemeKind::kCoarse) return coarse_scheme(t, ranks, cfg.seed, parse_variant(cfg.coarse_variant));
  return build_scheme(kind, t, ranks, cfg.seed);
}

std::string tensor_name(const std::string& path) { return fs::path(path).stem().string(); }

void print_metrics(std::ostream& out, const MetricsReport& r) {
  out << "scheme: " << r.scheme << "  ranks: " << r.ranks << "  nnz: " << r.nnz << '\n';
  if (r.grid) out << "grid: " << r.grid->to_string() << '\n';
  for (const auto& m : r.modes) {
    out << "mode " << m.mode + 1 << ": L " << m.length << "  nonempty " << m.nonempty << "  e_max " << m.e_max
        << "  r_sum " << m.r_sum << "  r_max " << m.r_max << "  e_imbalance " << std::setprecision(4)
        << m.e_imbalance << "  predicted svd volume " << m.svd_volume << '\n';
    if (m.verdicts) {
      const auto& v = *m.verdicts;
      auto mark = [](bool ok) { return ok ? "ok" : "VIOLATED"; };
      out << "  lite bounds: e_max " << m.e_max << " <= " << v.e_max_bound << ' ' << mark(v.e_max_ok) << ", r_sum "
          << m.r_sum << " <= " << v.r_sum_bound << ' ' << mark(v.r_sum_ok) << ", r_max " << m.r_max
          << " <= " << v.r_max_bound << ' ' << mark(v.r_max_ok) << '\n';
    }
  }
}

void write_csv_file(const std::string& path, const std::vector<std::pair<std::string, MetricsReport>>& reports) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  write_csv_header(out);
  for (const auto& [name, r] : reports) write_metrics_csv(out, name, r);
  if (!out) throw IoError("write failed for " + path);
}

void write_matrix(const std::string& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << std::setprecision(17);
  out << m.rows() << ' ' << m.cols() << '\n';
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) out << (c ? " " : "") << m(r, c);
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

void export_model(const std::string& dir, const Config& cfg, const SparseTensor& t, const DistributedHooi& h) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  const auto& model = h.model();
  Json manifest;
  manifest["schema_version"] = kReportSchemaVersion;
  manifest["dims"] = std::vector<Index>(t.dims().begin(), t.dims().end());
  manifest["core_dims"] = model.core_dims;
  manifest["seed"] = cfg.seed;
  manifest["invocations"] = h.records().size();
  Json history = Json::array();
  for (const auto& rec : h.records()) history.push_back(rec.fit);
  manifest["fit_history"] = std::move(history);
  manifest["final_fit"] = h.final_fit();
  Json files = Json::array();
  for (std::size_t n = 0; n < model.factors.size(); ++n) {
    const std::string name = "factor_" + std::to_string(n + 1) + ".txt";
    write_matrix((fs::path(dir) / name).string(), model.factors[n]);
    files.push_back(name);
  }
  manifest["factors"] = std::move(files);
  {
    const auto path = (fs::path(dir) / "core.txt").string();
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << std::setprecision(17);
    for (std::size_t i = 0; i < model.core_dims.size(); ++i) out << (i ? " " : "") << model.core_dims[i];
    out << '\n';
    for (double v : model.core) out << v << '\n';
    if (!out) throw IoError("write failed for " + path);
  }
  manifest["core"] = "core.txt";
  manifest["core_layout"] = "first mode fastest";
  write_json_file((fs::path(dir) / "manifest.json").string(), manifest);
}

oracle::DenseMatrix to_dense(const Eigen::MatrixXd& m) {
  oracle::DenseMatrix d(m.rows(), m.cols());
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) d(r, c) = m(r, c);
  }
  return d;
}

std::vector<oracle::DenseMatrix> to_dense(const std::vector<Eigen::MatrixXd>& ms) {
  std::vector<oracle::DenseMatrix> out;
  for (const auto& m : ms) out.push_back(to_dense(m));
  return out;
}

int cmd_distribute(const Config& cfg, std::ostream& out) {
  const SparseTensor t = ingest_tns_file(cfg.input);
  const int P = single_rank_count(cfg.ranks);
  const auto core = resolve_core(cfg.core, t);
  const auto start = std::chrono::steady_clock::now();
  const DistributionScheme scheme = make_scheme(cfg, cfg.scheme, t, P);
  const auto elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

  const MetricsReport report = compute_metrics(t, scheme, core);
  print_metrics(out, report);
  out << "distribution time: " << std::fixed << std::setprecision(3) << elapsed << " ms\n";
  out.unsetf(std::ios::floatfield);
  if (!cfg.policy_out.empty()) write_policy_file(cfg.policy_out, scheme);
  if (!cfg.report.empty()) write_json_file(cfg.report, to_json(report));
  if (!cfg.csv.empty()) write_csv_file(cfg.csv, {{tensor_name(cfg.input), report}});
  return kOk;
}

int cmd_compare(const Config& cfg, std::ostream& out) {
  const SparseTensor t = ingest_tns_file(cfg.input);
  const auto core = resolve_core(cfg.core, t);
  std::vector<std::string> names;
  {
    std::stringstream ss(cfg.schemes);
    for (std::string s; std::getline(ss, s, ',');) {
      if (!s.empty()) names.push_back(s);
    }
  }
  if (names.empty()) throw ConfigError("empty scheme list");
  std::vector<std::pair<std::string, MetricsReport>> reports;
  for (int P : parse_ranks(cfg.ranks)) {
    for (const auto& name : names) {
      const auto scheme = make_scheme(cfg, name, t, P);
      reports.emplace_back(tensor_name(cfg.input), compute_metrics(t, scheme, core));
      const auto& r = reports.back().second;
      double worst = 0.0;
      for (const auto& m : r.modes) worst = std::max(worst, m.e_imbalance);
      out << std::left << std::setw(8) << r.scheme << " P=" << std::setw(5) << P << " max e_imbalance "
          << std::setprecision(4) << worst << '\n';
    }
  }
  if (!cfg.csv.empty()) {
    write_csv_file(cfg.csv, reports);
  } else {
    write_csv_header(out);
    for (const auto& [name, r] : reports) write_metrics_csv(out, name, r);
  }
  if (!cfg.report.empty()) {
    Json doc = Json::array();
    for (const auto& [name, r] : reports) doc.push_back(to_json(r));
    write_json_file(cfg.report, doc);
  }
  return kOk;
}

LanczosMode parse_lanczos(const std::string& s) {
  if (s == "fixed") return LanczosMode::kFixed;
  if (s == "converge") return LanczosMode::kConverge;
  throw ConfigError("unknown Lanczos mode '" + s + "'");
}

int cmd_decompose(const Config& cfg, std::ostream& out) {
  if (cfg.invocations < 1) throw ConfigError("--invocations must be at least 1");
  const SparseTensor t = ingest_tns_file(cfg.input);
  const int P = single_rank_count(cfg.ranks);
  const auto core = resolve_core(cfg.core, t);
  for (std::size_t n = 0; n < t.order(); ++n) {
    if (core[n] > t.dim(n)) {
      throw ConfigError("core length " + std::to_string(core[n]) + " exceeds mode " + std::to_string(n + 1) +
                        " length " + std::to_string(t.dim(n)));
    }
  }
  const DistributionScheme scheme = make_scheme(cfg, cfg.scheme, t, P);

  HooiOptions opts;
  opts.core = core;
  opts.invocations = cfg.invocations;
  opts.seed = cfg.seed;
  opts.lanczos.mode = parse_lanczos(cfg.lanczos);
  opts.use_old_factors = cfg.use_old_factors;
  opts.fit_tolerance = cfg.fit_tolerance;
  opts.threads = cfg.threads;
  const auto init = random_orthonormal_factors(t.dims(), core, cfg.seed);
  DistributedHooi hooi(t, scheme, opts, init);
  hooi.run();

  const MetricsReport metrics = compute_metrics(t, scheme, core);
  print_metrics(out, metrics);

  Json invocations = Json::array();
  bool reconciled = true;
  for (std::size_t i = 0; i < hooi.records().size(); ++i) {
    const auto& rec = hooi.records()[i];
    const auto rows = predict_vs_measured(metrics, rec.ledger);
    const bool exact = all_exact(rows);
    reconciled = reconciled && exact;
    Json modes = Json::array();
    for (std::size_t n = 0; n < t.order(); ++n) {
      const auto& sv = rec.singular_values[n];
      modes.push_back({{"mode", n + 1},
                       {"singular_values", std::vector<double>(sv.data(), sv.data() + sv.size())},
                       {"lanczos_steps", rec.lanczos_steps[n]},
                       {"flags", to_json(rec.flags[n])}});
    }
    invocations.push_back({{"invocation", i + 1},
                           {"fit", rec.fit},
                           {"modes", std::move(modes)},
                           {"ledger", to_json(rec.ledger)},
                           {"reconciliation", to_json(rows)},
                           {"all_exact", exact}});
    out << "invocation " << i + 1 << ": fit " << std::setprecision(12) << rec.fit << "  reconciliation "
        << (exact ? "exact" : "MISMATCH") << '\n';
  }
  out << "final fit: " << std::setprecision(12) << hooi.final_fit() << '\n';
  const bool flagged = hooi.any_numerical_flags();
  if (flagged) out << "numerical flags raised (rank deficiency or Lanczos restarts)\n";

  Json doc;
  doc["schema_version"] = kReportSchemaVersion;
  doc["command"] = "decompose";
  doc["tensor"] = tensor_name(cfg.input);
  doc["options"] = {{"ranks", P},
                    {"core", core},
                    {"scheme", cfg.scheme},
                    {"seed", cfg.seed},
                    {"invocations", cfg.invocations},
                    {"lanczos", cfg.lanczos},
                    {"use_old_factors", cfg.use_old_factors}};
  doc["metrics"] = to_json(metrics);
  doc["invocations"] = std::move(invocations);
  doc["core_transfer"] = hooi.core_ledger().total(Component::kCoreTransfer);
  doc["final_fit"] = hooi.final_fit();
  doc["numerical_flags"] = flagged;
  doc["reconciliation_exact"] = reconciled;

  bool oracle_ok = true;
  if (cfg.oracle_check) {
    const auto dense = oracle::densify(t);
    const auto ref = oracle::dense_hooi(dense, core, to_dense(init), static_cast<int>(hooi.records().size()));
    const double delta = std::abs(ref.fit_history.back() - hooi.final_fit());
    oracle_ok = delta <= 1e-8;
    out << "oracle fit: " << std::setprecision(12) << ref.fit_history.back() << "  delta " << std::setprecision(3)
        << delta << (oracle_ok ? "  ok" : "  MISMATCH") << '\n';
    doc["oracle"] = {{"fit", ref.fit_history.back()}, {"fit_delta", delta}, {"agrees", oracle_ok}};
  }

  if (!cfg.report.empty()) write_json_file(cfg.report, doc);
  if (!cfg.csv.empty()) write_csv_file(cfg.csv, {{tensor_name(cfg.input), metrics}});
  if (!cfg.model_dir.empty()) export_model(cfg.model_dir, cfg, t, hooi);

  if (!oracle_ok) return kNumerical;
  if (cfg.strict && flagged) return kNumerical;
  return kOk;
}

int cmd_oracle(const Config& cfg, std::ostream& out) {
  if (cfg.invocations < 1) throw ConfigError("--invocations must be at least 1");
  const SparseTensor t = ingest_tns_file(cfg.input);
  const auto core = resolve_core(cfg.core, t);
  const auto init = random_orthonormal_factors(t.dims(), core, cfg.seed);
  const auto ref = oracle::dense_hooi(oracle::densify(t), core, to_dense(init), cfg.invocations);
  out << std::setprecision(12);
  for (std::size_t i = 0; i < ref.fit_history.size(); ++i) {
    out << "invocation " << i + 1 << ": fit " << ref.fit_history[i] << '\n';
  }
  Json doc;
  doc["schema_version"] = kReportSchemaVersion;
  doc["command"] = "oracle";
  doc["fit_history"] = ref.fit_history;
  doc["singular_values"] = ref.singular_values;
  if (!cfg.report.empty()) write_json_file(cfg.report, doc);
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Config cfg;
  CLI::App app{"Sparse Tucker decomposition over simulated ranks"};
  app.require_subcommand(1);

  auto add_input = [&](CLI::App* sub) {
    sub->add_option("--input,-i", cfg.input, "tensor in .tns format")->required();
    sub->add_option("--core", cfg.core, "core length K, or k1,k2,... per mode")->capture_default_str();
    sub->add_option("--seed", cfg.seed, "seed for schemes, initialization and Lanczos")->capture_default_str();
    sub->add_option("--report", cfg.report, "JSON report path");
  };
  auto add_scheme = [&](CLI::App* sub) {
    sub->add_option("--scheme", cfg.scheme, "lite | coarse | medium | external")->capture_default_str();
    sub->add_option("--policy-file", cfg.policy_file, "element-to-rank policy for --scheme external");
    sub->add_option("--coarse-variant", cfg.coarse_variant, "blocks | best-fit")->capture_default_str();
  };

  auto* distribute = app.add_subcommand("distribute", "build a scheme and report its metrics");
  add_input(distribute);
  add_scheme(distribute);
  distribute->add_option("-P,--ranks", cfg.ranks, "rank count")->capture_default_str();
  distribute->add_option("--csv", cfg.csv, "flat CSV metrics path");
  distribute->add_option("--policy-out", cfg.policy_out, "write the policy here");

  auto* decompose = app.add_subcommand("decompose", "run HOOI over simulated ranks");
  add_input(decompose);
  add_scheme(decompose);
  decompose->add_option("-P,--ranks", cfg.ranks, "rank count")->capture_default_str();
  decompose->add_option("--csv", cfg.csv, "flat CSV metrics path");
  decompose->add_option("--invocations", cfg.invocations, "HOOI invocations")->capture_default_str();
  decompose->add_option("--threads", cfg.threads, "worker threads for the simulated ranks")->capture_default_str();
  decompose->add_option("--lanczos", cfg.lanczos, "fixed (2K steps) | converge")->capture_default_str();
  decompose->add_option("--fit-tolerance", cfg.fit_tolerance, "stop once the fit changes by less than this");
  decompose->add_flag("--use-old-factors", cfg.use_old_factors, "every mode sees the factors from the pass start");
  decompose->add_flag("--oracle-check", cfg.oracle_check, "compare the final fit with the dense reference");
  decompose->add_flag("--strict", cfg.strict, "exit nonzero on numerical flags");
  decompose->add_option("--model-dir", cfg.model_dir, "export factors, core and manifest here");

  auto* compare = app.add_subcommand("compare", "metrics of several schemes as one CSV");
  add_input(compare);
  compare->add_option("-P,--ranks", cfg.ranks, "rank count or comma list")->capture_default_str();
  compare->add_option("--schemes", cfg.schemes, "comma list of schemes")->capture_default_str();
  compare->add_option("--policy-file", cfg.policy_file, "policy for an external entry");
  compare->add_option("--coarse-variant", cfg.coarse_variant, "blocks | best-fit")->capture_default_str();
  compare->add_option("--csv", cfg.csv, "CSV path (stdout when absent)");

  auto* oracle_cmd = app.add_subcommand("oracle", "dense reference HOOI");
  oracle_cmd->group("");
  add_input(oracle_cmd);
  oracle_cmd->add_option("--invocations", cfg.invocations, "HOOI invocations")->capture_default_str();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (distribute->parsed()) return cmd_distribute(cfg, out);
    if (decompose->parsed()) return cmd_decompose(cfg, out);
    if (compare->parsed()) return cmd_compare(cfg, out);
    if (oracle_cmd->parsed()) return cmd_oracle(cfg, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const ShapeError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kParse;
  } catch (const DomainError& e) {
    err << "input error: " << e.what() << '\n';
    return kParse;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kInternal;
}

}  // namespace sptucker::cli
