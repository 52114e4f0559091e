#include "sptucker/reports.hpp"

#include <fstream>
#include <ostream>

#include "sptucker/errors.hpp"

namespace sptucker {

namespace {

Json optional_int(const std::optional<std::int64_t>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

Json to_json(const MetricsReport& report) {
  Json modes = Json::array();
  for (const auto& m : report.modes) {
    Json j;
    j["mode"] = m.mode + 1;
    j["length"] = m.length;
    j["nonempty"] = m.nonempty;
    j["e_max"] = m.e_max;
    j["r_sum"] = m.r_sum;
    j["r_max"] = m.r_max;
    j["e_imbalance"] = m.e_imbalance;
    j["r_imbalance"] = m.r_imbalance;
    j["core"] = m.core;
    j["khat"] = m.khat;
    j["queries"] = m.queries;
    j["predicted"] = {
        {"svd_volume", m.svd_volume},
        {"svd_volume_length_basis", m.svd_volume_length_basis},
        {"factor_transfer", optional_int(m.factor_transfer)},
        {"factor_transfer_length_basis", optional_int(m.factor_transfer_length_basis)},
    };
    j["flops"] = {{"ttm", m.ttm_flops}, {"svd_oracle", m.svd_oracle_flops}};
    if (m.verdicts) {
      const auto& v = *m.verdicts;
      j["verdicts"] = {
          {"e_max", {{"bound", v.e_max_bound}, {"holds", v.e_max_ok}}},
          {"r_sum", {{"bound", v.r_sum_bound}, {"holds", v.r_sum_ok}}},
          {"r_max", {{"bound", v.r_max_bound}, {"holds", v.r_max_ok}}},
      };
    } else {
      j["verdicts"] = nullptr;
    }
    modes.push_back(std::move(j));
  }
  Json doc;
  doc["schema_version"] = kReportSchemaVersion;
  doc["scheme"] = report.scheme;
  doc["ranks"] = report.ranks;
  doc["seed"] = report.seed;
  doc["uni_policy"] = report.uni_policy;
  doc["grid"] = report.grid ? Json(report.grid->to_string()) : Json(nullptr);
  doc["nnz"] = report.nnz;
  doc["dims"] = report.dims;
  doc["core"] = report.core;
  doc["modes"] = std::move(modes);
  doc["verdicts_hold"] = report.verdicts_hold();
  return doc;
}

Json to_json(const MessageLedger& ledger) {
  Json modes = Json::array();
  for (std::size_t n = 0; n < ledger.modes(); ++n) {
    const auto& m = ledger.mode(n);
    Json units;
    for (std::size_t c = 0; c < kComponentCount; ++c) {
      units[std::string(to_string(static_cast<Component>(c)))] = m.units[c];
    }
    Json per_rank = Json::array();
    for (const auto& r : m.sent_by_rank) {
      Json row;
      for (std::size_t c = 0; c < kComponentCount; ++c) {
        row[std::string(to_string(static_cast<Component>(c)))] = r[c];
      }
      per_rank.push_back(std::move(row));
    }
    modes.push_back({{"mode", n + 1},
                     {"x_queries", m.x_queries},
                     {"y_queries", m.y_queries},
                     {"queries", m.queries()},
                     {"units", std::move(units)},
                     {"sent_by_rank", std::move(per_rank)}});
  }
  return Json{{"ranks", ledger.ranks()}, {"modes", std::move(modes)}};
}

Json to_json(std::span<const ReconciliationRow> rows) {
  Json out = Json::array();
  for (const auto& r : rows) {
    const auto exact = r.exact();
    out.push_back({{"mode", r.mode + 1},
                   {"component", std::string(to_string(r.component))},
                   {"predicted", optional_int(r.predicted)},
                   {"measured", r.measured},
                   {"exact", exact ? Json(*exact) : Json(nullptr)}});
  }
  return out;
}

Json to_json(const LanczosFlags& flags) {
  return Json{{"rank_deficient", flags.rank_deficient},
              {"padded_columns", flags.padded_columns},
              {"restarts", flags.restarts},
              {"exhausted", flags.exhausted}};
}

void write_csv_header(std::ostream& out) { out << "tensor,scheme,P,mode,metric,value\n"; }

void write_metrics_csv(std::ostream& out, const std::string& tensor, const MetricsReport& report) {
  for (const auto& m : report.modes) {
    auto row = [&](const char* metric, const Json& value) {
      out << tensor << ',' << report.scheme << ',' << report.ranks << ',' << m.mode + 1 << ',' << metric << ','
          << value.dump() << '\n';
    };
    row("length", m.length);
    row("nonempty", m.nonempty);
    row("e_max", m.e_max);
    row("r_sum", m.r_sum);
    row("r_max", m.r_max);
    row("e_imbalance", m.e_imbalance);
    row("r_imbalance", m.r_imbalance);
    row("queries", m.queries);
    row("svd_volume", m.svd_volume);
    row("svd_volume_length_basis", m.svd_volume_length_basis);
    if (m.factor_transfer) row("factor_transfer", *m.factor_transfer);
    if (m.factor_transfer_length_basis) row("factor_transfer_length_basis", *m.factor_transfer_length_basis);
    row("ttm_flops", m.ttm_flops);
    row("svd_oracle_flops", m.svd_oracle_flops);
    if (m.verdicts) {
      row("verdict_e_max", m.verdicts->e_max_ok ? 1 : 0);
      row("verdict_r_sum", m.verdicts->r_sum_ok ? 1 : 0);
      row("verdict_r_max", m.verdicts->r_max_ok ? 1 : 0);
    }
  }
}

void write_json_file(const std::string& path, const Json& doc) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace sptucker
