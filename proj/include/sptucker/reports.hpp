#pragma once

#include <iosfwd>
#include <span>
#include <string>

#include <json.hpp>

#include "sptucker/engine.hpp"
#include "sptucker/metrics.hpp"

namespace sptucker {

using Json = nlohmann::ordered_json;

inline constexpr int kReportSchemaVersion = 1;

/// Modes are written one-based.
Json to_json(const MetricsReport& report);
Json to_json(const MessageLedger& ledger);
Json to_json(std::span<const ReconciliationRow> rows);
Json to_json(const LanczosFlags& flags);

/// Flat rows: tensor,scheme,P,mode,metric,value.
void write_csv_header(std::ostream& out);
void write_metrics_csv(std::ostream& out, const std::string& tensor, const MetricsReport& report);

/// Pretty-printed with a trailing newline. Throws IoError.
void write_json_file(const std::string& path, const Json& doc);

}  // namespace sptucker
