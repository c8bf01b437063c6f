#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "caseflow/csv.hpp"
#include "caseflow/error.hpp"
#include "caseflow/intervention.hpp"
#include "caseflow/random.hpp"
#include "caseflow/records.hpp"
#include "caseflow/schema.hpp"

namespace caseflow {

/// Where an encoded column comes from.
struct ColumnInfo {
  std::string name;     // feature, or "<feature>=<level>" for one-hot columns
  std::size_t feature;  // schema index
  std::optional<std::size_t> level;
  FeatureKind kind;
  std::string units;

  bool operator==(const ColumnInfo&) const = default;
};

/// Dense row-major design matrix with per-row labels and ids.
struct EncodedDataset {
  std::vector<ColumnInfo> columns;
  std::vector<double> matrix;  // n_rows * n_cols
  std::vector<Intervention> labels;
  std::vector<std::string> row_ids;

  std::size_t n_rows() const noexcept { return row_ids.size(); }
  std::size_t n_cols() const noexcept { return columns.size(); }
  double at(std::size_t r, std::size_t c) const { return matrix[r * n_cols() + c]; }
  std::span<const double> row(std::size_t r) const {
    return {matrix.data() + r * n_cols(), n_cols()};
  }
  std::vector<std::string> column_names() const {
    std::vector<std::string> names;
    for (const auto& c : columns) names.push_back(c.name);
    return names;
  }
  std::optional<std::size_t> column_index(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i].name == name) return i;
    return std::nullopt;
  }

  /// Rows in the given order.
  EncodedDataset subset(std::span<const std::size_t> rows) const {
    EncodedDataset out;
    out.columns = columns;
    out.matrix.reserve(rows.size() * n_cols());
    for (auto r : rows) {
      auto src = row(r);
      out.matrix.insert(out.matrix.end(), src.begin(), src.end());
      out.labels.push_back(labels[r]);
      out.row_ids.push_back(row_ids[r]);
    }
    return out;
  }

  bool operator==(const EncodedDataset&) const = default;
};

inline std::vector<ColumnInfo> encoded_columns(const Schema& schema) {
  std::vector<ColumnInfo> cols;
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto& f = schema[i];
    if (f.kind == FeatureKind::Categorical) {
      for (std::size_t l = 0; l < f.levels.size(); ++l)
        cols.push_back({f.name + "=" + f.levels[l], i, l, f.kind, f.units});
    } else {
      cols.push_back({f.name, i, std::nullopt, f.kind, f.units});
    }
  }
  return cols;
}

/// Schema order, levels in declared order. Missing categorical values give an
/// all-zero group; missing binary/continuous values take the column mean over
/// the given records (0 if the column is entirely missing).
inline EncodedDataset one_hot_encode(const std::vector<HouseholdRecord>& records,
                                     const Schema& schema) {
  if (records.empty()) fail(ErrorKind::EmptyInput, "no records to encode");
  std::vector<double> mean(schema.size(), 0.0);
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (schema[i].kind == FeatureKind::Categorical) continue;
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : records)
      if (r.values.at(i)) {
        sum += *r.values[i];
        ++n;
      }
    mean[i] = n ? sum / static_cast<double>(n) : 0.0;
  }

  EncodedDataset out;
  out.columns = encoded_columns(schema);
  const std::size_t width = out.columns.size();
  out.matrix.assign(records.size() * width, 0.0);
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.values.size() != schema.size())
      fail(ErrorKind::SchemaMismatch, "record '" + rec.id + "' has wrong value count");
    double* dst = out.matrix.data() + r * width;
    std::size_t c = 0;
    for (std::size_t i = 0; i < schema.size(); ++i) {
      const auto& f = schema[i];
      const auto& v = rec.values[i];
      if (f.kind == FeatureKind::Categorical) {
        if (v) dst[c + static_cast<std::size_t>(*v)] = 1.0;
        c += f.levels.size();
      } else {
        dst[c++] = v ? *v : mean[i];
      }
    }
    out.labels.push_back(rec.actual);
    out.row_ids.push_back(rec.id);
  }
  return out;
}

struct SplitPair {
  EncodedDataset train;
  EncodedDataset test;
  std::uint64_t seed = 0;
  double ratio = 0.7;
  std::vector<std::size_t> train_rows;  // indices into the input
  std::vector<std::size_t> test_rows;
};

/// Seeded Fisher-Yates order of 0..n-1.
inline std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto rng = make_rng(seed, {0x5ec7});
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[uniform_index(rng, i)]);
  return idx;
}

/// Shuffle, then the first floor(ratio * n) rows train and the rest test.
inline SplitPair split(const EncodedDataset& data, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio <= 1.0))
    fail(ErrorKind::InvalidArgument, "split ratio must lie in (0, 1]");
  const auto n = data.n_rows();
  auto perm = seeded_permutation(n, seed);
  const auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n)));
  SplitPair out;
  out.seed = seed;
  out.ratio = ratio;
  out.train_rows.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test_rows.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  out.train = data.subset(out.train_rows);
  out.test = data.subset(out.test_rows);
  return out;
}

/// One-vs-all target vector.
inline std::vector<int> binarize(std::span<const Intervention> labels, Intervention target) {
  std::vector<int> y(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) y[i] = labels[i] == target ? 1 : 0;
  return y;
}

/// CSV with an id column, one column per encoded feature and the label.
inline void write_encoded_csv(std::ostream& out, const EncodedDataset& data) {
  std::vector<std::string> row{std::string(kIdColumn)};
  for (const auto& c : data.columns) row.push_back(c.name);
  row.emplace_back(kLabelColumn);
  csv::write_row(out, row);
  for (std::size_t r = 0; r < data.n_rows(); ++r) {
    row.clear();
    row.push_back(data.row_ids[r]);
    for (double v : data.row(r)) row.push_back(csv::format_double(v));
    row.emplace_back(to_string(data.labels[r]));
    csv::write_row(out, row);
  }
}

}  // namespace caseflow
