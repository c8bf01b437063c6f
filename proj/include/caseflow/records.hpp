#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "caseflow/csv.hpp"
#include "caseflow/error.hpp"
#include "caseflow/intervention.hpp"
#include "caseflow/schema.hpp"

namespace caseflow {

/// A feature value: nullopt is the missing marker. Binary values are 0/1,
/// categorical values hold the level index, continuous values are raw.
using FeatureValue = std::optional<double>;

struct HouseholdRecord {
  std::string id;
  std::vector<FeatureValue> values;  // schema order
  Intervention actual = Intervention::ES;
  std::optional<double> p_reentry_es;
  std::optional<double> p_reentry_th;

  bool operator==(const HouseholdRecord&) const = default;
};

inline constexpr std::string_view kIdColumn = "id";
inline constexpr std::string_view kLabelColumn = "Intervention";
inline constexpr std::string_view kReentryEsColumn = "p_reentry_es";
inline constexpr std::string_view kReentryThColumn = "p_reentry_th";

struct LoadStats {
  std::size_t rows_read = 0;
  std::size_t excluded_psh = 0;
};

namespace detail {

inline FeatureValue parse_value(const FeatureSpec& f, const std::string& raw, std::size_t row,
                                std::size_t col) {
  if (raw.empty()) {
    if (f.allow_missing) return std::nullopt;
    throw Error(ErrorKind::MalformedRow, "missing value for '" + f.name + "'", row, col);
  }
  switch (f.kind) {
    case FeatureKind::Categorical: {
      if (auto idx = f.level_index(raw)) return static_cast<double>(*idx);
      throw Error(ErrorKind::UnknownCategoryLevel,
                  "'" + raw + "' is not a level of '" + f.name + "'", row, col);
    }
    case FeatureKind::Binary: {
      if (raw == "1" || raw == "true" || (f.levels.size() == 2 && raw == f.levels[1])) return 1.0;
      if (raw == "0" || raw == "false" || (f.levels.size() == 2 && raw == f.levels[0])) return 0.0;
      break;
    }
    case FeatureKind::Continuous: {
      if (auto v = csv::parse_double(raw); v && std::isfinite(*v)) return *v;
      break;
    }
  }
  if (f.allow_missing) return std::nullopt;
  throw Error(ErrorKind::MalformedRow, "cannot parse '" + raw + "' for '" + f.name + "'", row,
              col);
}

inline std::optional<double> parse_probability(const std::string& raw, std::size_t row,
                                               std::size_t col) {
  if (raw.empty()) return std::nullopt;
  auto v = csv::parse_double(raw);
  if (!v || !(*v >= 0.0 && *v <= 1.0))
    throw Error(ErrorKind::MalformedRow, "probability out of [0,1]: '" + raw + "'", row, col);
  return v;
}

}  // namespace detail

/// Parses household rows. The header must name every schema feature plus the
/// id and Intervention columns; p_reentry_es / p_reentry_th are optional.
/// Rows labelled PSH are dropped and counted in stats.
inline std::vector<HouseholdRecord> read_records(std::istream& in, const Schema& schema,
                                                 LoadStats* stats = nullptr) {
  std::vector<std::string> header;
  if (!csv::read_row(in, header)) throw Error(ErrorKind::MalformedRow, "missing header", 0, 1);

  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::vector<std::size_t> feature_col(schema.size(), npos);
  std::size_t id_col = npos, label_col = npos, es_col = npos, th_col = npos;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto& name = header[c];
    std::size_t* slot = nullptr;
    if (name == kIdColumn) slot = &id_col;
    else if (name == kLabelColumn) slot = &label_col;
    else if (name == kReentryEsColumn) slot = &es_col;
    else if (name == kReentryThColumn) slot = &th_col;
    else if (auto fi = schema.find(name)) slot = &feature_col[*fi];
    else throw Error(ErrorKind::UnknownColumn, "unknown column '" + name + "'", 0, c + 1);
    if (*slot != npos)
      throw Error(ErrorKind::MalformedRow, "duplicate column '" + name + "'", 0, c + 1);
    *slot = c;
  }
  if (id_col == npos) throw Error(ErrorKind::MalformedRow, "header lacks 'id'", 0, 1);
  if (label_col == npos) throw Error(ErrorKind::MalformedRow, "header lacks 'Intervention'", 0, 1);
  for (std::size_t i = 0; i < schema.size(); ++i)
    if (feature_col[i] == npos)
      throw Error(ErrorKind::MalformedRow, "header lacks feature '" + schema[i].name + "'", 0, 1);

  std::vector<HouseholdRecord> out;
  LoadStats local;
  std::vector<std::string> fields;
  std::size_t row = 0;
  while (csv::read_row(in, fields)) {
    ++row;
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    if (fields.size() != header.size())
      throw Error(ErrorKind::MalformedRow,
                  "expected " + std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()),
                  row, fields.size());
    ++local.rows_read;
    const auto& label = fields[label_col];
    if (is_excluded_label(label)) {
      ++local.excluded_psh;
      continue;
    }
    auto actual = parse_intervention(label);
    if (!actual)
      throw Error(ErrorKind::MalformedRow, "unknown intervention '" + label + "'", row,
                  label_col + 1);
    HouseholdRecord r;
    r.id = fields[id_col];
    r.actual = *actual;
    r.values.reserve(schema.size());
    for (std::size_t i = 0; i < schema.size(); ++i)
      r.values.push_back(detail::parse_value(schema[i], fields[feature_col[i]], row,
                                             feature_col[i] + 1));
    if (es_col != npos) r.p_reentry_es = detail::parse_probability(fields[es_col], row, es_col + 1);
    if (th_col != npos) r.p_reentry_th = detail::parse_probability(fields[th_col], row, th_col + 1);
    out.push_back(std::move(r));
  }
  if (stats) *stats = local;
  return out;
}

inline std::vector<HouseholdRecord> load_csv(const std::string& path, const Schema& schema,
                                             LoadStats* stats = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::MalformedRow, "cannot open data file '" + path + "'");
  return read_records(in, schema, stats);
}

inline std::string format_value(const FeatureSpec& f, const FeatureValue& v) {
  if (!v) return "";
  switch (f.kind) {
    case FeatureKind::Categorical: return f.levels.at(static_cast<std::size_t>(*v));
    case FeatureKind::Binary: return *v != 0.0 ? "1" : "0";
    case FeatureKind::Continuous: return csv::format_double(*v);
  }
  return "";
}

/// Writes records in the format read_records accepts. Extra columns, when
/// given, are appended after the reentry probabilities.
inline void write_records(std::ostream& out, const Schema& schema,
                          const std::vector<HouseholdRecord>& records,
                          const std::vector<std::string>& extra_header = {},
                          const std::vector<std::vector<std::string>>& extra_values = {}) {
  std::vector<std::string> row{std::string(kIdColumn)};
  for (const auto& f : schema) row.push_back(f.name);
  row.emplace_back(kLabelColumn);
  row.emplace_back(kReentryEsColumn);
  row.emplace_back(kReentryThColumn);
  for (const auto& h : extra_header) row.push_back(h);
  csv::write_row(out, row);
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    row.clear();
    row.push_back(rec.id);
    for (std::size_t i = 0; i < schema.size(); ++i) row.push_back(format_value(schema[i], rec.values[i]));
    row.emplace_back(to_string(rec.actual));
    row.push_back(rec.p_reentry_es ? csv::format_double(*rec.p_reentry_es) : "");
    row.push_back(rec.p_reentry_th ? csv::format_double(*rec.p_reentry_th) : "");
    if (!extra_header.empty())
      for (const auto& v : extra_values.at(r)) row.push_back(v);
    csv::write_row(out, row);
  }
}

}  // namespace caseflow
