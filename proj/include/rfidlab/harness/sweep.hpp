#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rfidlab/attacks/attacks.hpp"
#include "rfidlab/metrics/scores.hpp"

namespace rfidlab::harness {

// One row of a sweep: the swept parameters and the metric they produced.
struct SweepRow {
  std::string study;
  std::string param_a;
  std::string param_b;
  MetricReport report;
  std::optional<double> before;  // attacks: metric on the unmodified input
  std::optional<PerturbationSummary> magnitude;
};

inline const std::vector<std::string>& sweep_columns() {
  static const std::vector<std::string> cols{
      "study", "param_a", "param_b", "metric", "before", "value", "std", "splits", "n_a", "n_b", "clamped",
      "linf", "l2_mean", "wasserstein", "embedder", "kappa", "config_digest", "seed"};
  return cols;
}

// Shortest round-trip decimal, locale independent.
inline std::string format_number(double v) {
  return std::isfinite(v) ? nlohmann::json(v).dump() : std::string{};
}

struct SweepReport {
  std::string study;
  std::string config_digest;
  std::uint64_t seed = 0;
  std::vector<SweepRow> rows;

  std::vector<std::string> cells(const SweepRow& r) const {
    const auto& m = r.report;
    auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string{}; };
    return {r.study,
            r.param_a,
            r.param_b,
            m.metric,
            opt(r.before),
            format_number(m.value),
            format_number(m.std),
            std::to_string(m.splits),
            std::to_string(m.n_a),
            std::to_string(m.n_b),
            m.clamped ? "true" : "false",
            r.magnitude ? format_number(r.magnitude->linf) : "",
            r.magnitude ? format_number(r.magnitude->l2_mean) : "",
            r.magnitude ? format_number(r.magnitude->wasserstein) : "",
            to_string(m.embedder_training),
            format_number(m.embedder_kappa),
            config_digest,
            std::to_string(seed)};
  }

  std::string csv() const {
    std::ostringstream out;
    const auto& cols = sweep_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << "\n";
    for (const auto& r : rows) {
      const auto c = cells(r);
      for (std::size_t i = 0; i < c.size(); ++i) out << (i ? "," : "") << c[i];
      out << "\n";
    }
    return out.str();
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["study"] = study;
    j["config_digest"] = config_digest;
    j["seed"] = seed;
    j["columns"] = sweep_columns();
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
      nlohmann::ordered_json row;
      const auto c = cells(r);
      for (std::size_t i = 0; i < c.size(); ++i) row[sweep_columns()[i]] = c[i];
      j["rows"].push_back(row);
    }
    return j;
  }
};

// A parsed sweep CSV as plain cells; used by the report command.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline CsvTable parse_csv(const std::string& text, const std::string& source) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    require(cells.size() == t.header.size(), ErrorKind::payload_mismatch,
            source + ":" + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                " cells, got " + std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
  }
  require(!t.header.empty(), ErrorKind::payload_mismatch, source + ": empty CSV");
  return t;
}

}  // namespace rfidlab::harness
