#pragma once

// Gradient boosting with logistic loss. Each stage fits a depth-limited
// regression tree to the loss gradient with Newton leaf values
// -sum(g) / max(sum(h), hessian_floor), grown level by level over histogram
// bins. Columns with at most max_bins distinct values are binned exactly; the
// rest get quantile cut points.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include <json.hpp>

#include "caseflow/encoding.hpp"
#include "caseflow/error.hpp"
#include "caseflow/metrics.hpp"
#include "caseflow/tree.hpp"
#include "caseflow/tree_io.hpp"

namespace caseflow {

struct BoostingParams {
  int n_estimators = 100;
  int max_depth = 3;
  double learning_rate = 0.1;
  double hessian_floor = 1e-6;
  std::size_t max_bins = 256;
};

struct BoostedModel {
  double base_score = 0.0;  // log-odds
  double learning_rate = 0.1;
  int n_estimators = 0;
  int max_depth = 0;
  std::vector<Tree> trees;
  // Training log-loss before the first stage and after each stage.
  std::vector<double> train_loss;

  bool operator==(const BoostedModel& o) const {
    return base_score == o.base_score && learning_rate == o.learning_rate &&
           n_estimators == o.n_estimators && max_depth == o.max_depth && trees == o.trees;
  }

  /// First n stages as a model of their own.
  BoostedModel truncated(std::size_t n) const {
    BoostedModel m = *this;
    m.trees.resize(std::min(n, trees.size()));
    m.n_estimators = static_cast<int>(m.trees.size());
    if (m.train_loss.size() > m.trees.size() + 1) m.train_loss.resize(m.trees.size() + 1);
    return m;
  }
};

inline double sigmoid(double m) {
  if (m >= 0) return 1.0 / (1.0 + std::exp(-m));
  const double e = std::exp(m);
  return e / (1.0 + e);
}

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double log_loss(std::span<const double> margins, std::span<const int> labels) {
  double s = 0.0;
  for (std::size_t i = 0; i < margins.size(); ++i)
    s += labels[i] != 0 ? softplus(-margins[i]) : softplus(margins[i]);
  return s / static_cast<double>(margins.size());
}

/// Column-wise histogram bins with a sparse row layout: each row lists only
/// the columns whose bin differs from that column's most common bin.
class HistogramBins {
 public:
  HistogramBins(const EncodedDataset& data, std::size_t max_bins) : n_rows_(data.n_rows()) {
    const std::size_t n_cols = data.n_cols();
    cuts_.resize(n_cols);
    offset_.resize(n_cols + 1, 0);
    default_bin_.resize(n_cols, 0);
    std::vector<std::vector<std::uint16_t>> bins(n_cols, std::vector<std::uint16_t>(n_rows_));
    std::vector<double> col(n_rows_);
    for (std::size_t c = 0; c < n_cols; ++c) {
      for (std::size_t r = 0; r < n_rows_; ++r) col[r] = data.at(r, c);
      std::vector<double> sorted = col;
      std::sort(sorted.begin(), sorted.end());
      std::vector<double> distinct;
      std::vector<std::size_t> first_pos;
      for (std::size_t i = 0; i < sorted.size(); ++i)
        if (distinct.empty() || sorted[i] != distinct.back()) {
          distinct.push_back(sorted[i]);
          first_pos.push_back(i);
        }
      auto& cuts = cuts_[c];
      if (distinct.size() <= max_bins) {
        for (std::size_t i = 0; i + 1 < distinct.size(); ++i)
          cuts.push_back(0.5 * (distinct[i] + distinct[i + 1]));
      } else {
        // Cut between distinct values nearest to evenly spaced ranks.
        std::size_t next = 1;
        for (std::size_t b = 1; b < max_bins; ++b) {
          const std::size_t target = b * n_rows_ / max_bins;
          while (next < distinct.size() && first_pos[next] < target) ++next;
          if (next >= distinct.size()) break;
          const double cut = 0.5 * (distinct[next - 1] + distinct[next]);
          if (cuts.empty() || cut > cuts.back()) cuts.push_back(cut);
        }
      }
      offset_[c + 1] = offset_[c] + cuts.size() + 1;
      std::vector<std::size_t> freq(cuts.size() + 1, 0);
      for (std::size_t r = 0; r < n_rows_; ++r) {
        const auto b = static_cast<std::uint16_t>(
            std::lower_bound(cuts.begin(), cuts.end(), col[r]) - cuts.begin());
        bins[c][r] = b;
        ++freq[b];
      }
      default_bin_[c] = static_cast<std::uint16_t>(
          std::max_element(freq.begin(), freq.end()) - freq.begin());
    }
    row_ptr_.assign(n_rows_ + 1, 0);
    for (std::size_t r = 0; r < n_rows_; ++r) {
      for (std::size_t c = 0; c < n_cols; ++c)
        if (bins[c][r] != default_bin_[c]) {
          entry_col_.push_back(static_cast<std::uint32_t>(c));
          entry_bin_.push_back(bins[c][r]);
        }
      row_ptr_[r + 1] = entry_col_.size();
    }
  }

  std::size_t n_rows() const noexcept { return n_rows_; }
  std::size_t n_cols() const noexcept { return cuts_.size(); }
  std::size_t total_bins() const noexcept { return offset_.back(); }
  std::size_t offset(std::size_t c) const { return offset_[c]; }
  std::size_t n_bins(std::size_t c) const { return cuts_[c].size() + 1; }
  std::uint16_t default_bin(std::size_t c) const { return default_bin_[c]; }
  double cut(std::size_t c, std::size_t b) const { return cuts_[c][b]; }

  template <typename F>
  void for_each_entry(std::size_t r, F&& f) const {
    for (std::size_t e = row_ptr_[r]; e < row_ptr_[r + 1]; ++e) f(entry_col_[e], entry_bin_[e]);
  }

 private:
  std::size_t n_rows_;
  std::vector<std::vector<double>> cuts_;
  std::vector<std::size_t> offset_;
  std::vector<std::uint16_t> default_bin_;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::uint32_t> entry_col_;
  std::vector<std::uint16_t> entry_bin_;
};

namespace detail {

struct GradStats {
  double g = 0.0, h = 0.0, n = 0.0;
  GradStats& operator+=(const GradStats& o) {
    g += o.g;
    h += o.h;
    n += o.n;
    return *this;
  }
};

inline double split_term(const GradStats& s, double floor) { return s.g * s.g / std::max(s.h, floor); }

/// One regression tree on the current gradients. row_leaf receives each
/// row's leaf node id.
inline Tree grow_regression_tree(const HistogramBins& bins, std::span<const double> grad,
                                 std::span<const double> hess, int max_depth, double floor,
                                 std::vector<int>& row_leaf) {
  const std::size_t n = bins.n_rows();
  const std::size_t total_bins = bins.total_bins();
  Tree tree;
  tree.regression = true;
  tree.n_features = bins.n_cols();
  tree.nodes.emplace_back();
  row_leaf.assign(n, 0);

  std::vector<int> frontier{0};  // node ids being split at this level
  std::vector<int> slot_of_node{0};
  std::vector<GradStats> hist;
  std::vector<GradStats> totals;
  std::vector<std::size_t> split_bin(1, 0);

  auto finalize_leaf = [&](TreeNode& node, const GradStats& s) {
    node.n_samples = static_cast<std::uint64_t>(s.n);
    node.value = -s.g / std::max(s.h, floor);
  };

  for (int depth = 0; !frontier.empty(); ++depth) {
    const std::size_t n_slots = frontier.size();
    totals.assign(n_slots, {});
    slot_of_node.assign(tree.nodes.size(), -1);
    for (std::size_t s = 0; s < n_slots; ++s) slot_of_node[frontier[s]] = static_cast<int>(s);

    const bool last = depth >= max_depth;
    if (!last) hist.assign(n_slots * total_bins, {});
    for (std::size_t r = 0; r < n; ++r) {
      const int slot = slot_of_node[row_leaf[r]];
      if (slot < 0) continue;
      const GradStats st{grad[r], hess[r], 1.0};
      totals[slot] += st;
      if (last) continue;
      GradStats* h = hist.data() + static_cast<std::size_t>(slot) * total_bins;
      bins.for_each_entry(r, [&](std::uint32_t c, std::uint16_t b) { h[bins.offset(c) + b] += st; });
    }
    if (last) {
      for (std::size_t s = 0; s < n_slots; ++s) finalize_leaf(tree.nodes[frontier[s]], totals[s]);
      break;
    }

    std::vector<int> next;
    for (std::size_t s = 0; s < n_slots; ++s) {
      GradStats* h = hist.data() + s * total_bins;
      const GradStats& tot = totals[s];
      const double parent_term = split_term(tot, floor);
      double best_gain = 1e-12;
      std::size_t best_col = 0, best_bin = 0;
      bool found = false;
      for (std::size_t c = 0; c < bins.n_cols(); ++c) {
        const std::size_t off = bins.offset(c);
        const std::size_t nb = bins.n_bins(c);
        GradStats rest = tot;
        for (std::size_t b = 0; b < nb; ++b)
          if (b != bins.default_bin(c)) {
            rest.g -= h[off + b].g;
            rest.h -= h[off + b].h;
            rest.n -= h[off + b].n;
          }
        h[off + bins.default_bin(c)] = rest;
        GradStats left;
        for (std::size_t b = 0; b + 1 < nb; ++b) {
          left += h[off + b];
          const GradStats right{tot.g - left.g, tot.h - left.h, tot.n - left.n};
          if (left.n < 0.5 || right.n < 0.5) continue;
          const double gain = split_term(left, floor) + split_term(right, floor) - parent_term;
          if (gain > best_gain) {
            best_gain = gain;
            best_col = c;
            best_bin = b;
            found = true;
          }
        }
      }
      const int id = frontier[s];
      if (!found) {
        finalize_leaf(tree.nodes[id], tot);
        continue;
      }
      const int l = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      auto& node = tree.nodes[id];
      node.feature = static_cast<int>(best_col);
      node.threshold = bins.cut(best_col, best_bin);
      node.left = l;
      node.right = l + 1;
      node.n_samples = static_cast<std::uint64_t>(tot.n);
      split_bin.resize(tree.nodes.size(), 0);
      split_bin[id] = best_bin;
      next.push_back(l);
      next.push_back(l + 1);
    }
    if (next.empty()) break;
    // Route rows of split nodes to their children: bin <= split bin goes left.
    for (std::size_t r = 0; r < n; ++r) {
      const int id = row_leaf[r];
      const auto& node = tree.nodes[id];
      if (node.is_leaf()) continue;
      const auto c = static_cast<std::uint32_t>(node.feature);
      std::uint16_t b = bins.default_bin(c);
      bins.for_each_entry(r, [&](std::uint32_t col, std::uint16_t bin) {
        if (col == c) b = bin;
      });
      row_leaf[r] = b <= split_bin[id] ? node.left : node.right;
    }
    frontier = std::move(next);
  }
  return tree;
}

}  // namespace detail

/// Fits n_estimators stages. A stage whose tree would raise the training loss
/// has its leaf values halved until it does not (zeroed after 40 halvings), so
/// train_loss is non-increasing.
inline BoostedModel fit_gbt(const EncodedDataset& train, std::span<const int> labels,
                            const BoostingParams& p, const HistogramBins* prebinned = nullptr) {
  if (p.n_estimators < 0) fail(ErrorKind::InvalidConfig, "n_estimators must be >= 0");
  if (p.max_depth < 1) fail(ErrorKind::InvalidConfig, "max_depth must be positive");
  if (!(p.learning_rate > 0.0)) fail(ErrorKind::InvalidConfig, "learning_rate must be positive");
  if (labels.size() != train.n_rows()) fail(ErrorKind::LengthMismatch, "labels vs rows");
  const std::size_t n = train.n_rows();
  const auto n_pos = static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](int y) { return y != 0; }));
  if (n_pos == 0 || n_pos == n) fail(ErrorKind::SingleClass, "boosting needs both classes");

  std::optional<HistogramBins> own;
  if (!prebinned) own.emplace(train, p.max_bins);
  const HistogramBins& bins = prebinned ? *prebinned : *own;

  BoostedModel model;
  model.learning_rate = p.learning_rate;
  model.max_depth = p.max_depth;
  const double rate = static_cast<double>(n_pos) / static_cast<double>(n);
  model.base_score = std::log(rate / (1.0 - rate));

  std::vector<double> margin(n, model.base_score), trial(n), grad(n), hess(n);
  std::vector<int> row_leaf;
  double loss = log_loss(margin, labels);
  model.train_loss.push_back(loss);
  const auto names = train.column_names();
  for (int t = 0; t < p.n_estimators; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double prob = sigmoid(margin[i]);
      grad[i] = prob - (labels[i] != 0 ? 1.0 : 0.0);
      hess[i] = prob * (1.0 - prob);
    }
    Tree tree = detail::grow_regression_tree(bins, grad, hess, p.max_depth, p.hessian_floor, row_leaf);
    double scale = 1.0;
    double new_loss = loss;
    for (int attempt = 0;; ++attempt) {
      for (std::size_t i = 0; i < n; ++i)
        trial[i] = margin[i] + p.learning_rate * (scale * tree.nodes[row_leaf[i]].value);
      new_loss = log_loss(trial, labels);
      if (new_loss <= loss) break;
      if (attempt == 40) {
        scale = 0.0;
        trial = margin;
        new_loss = loss;
        break;
      }
      scale *= 0.5;
    }
    if (scale != 1.0)
      for (auto& node : tree.nodes)
        if (node.is_leaf()) node.value *= scale;
    // Recompute so training margins match what prediction will produce.
    for (std::size_t i = 0; i < n; ++i) margin[i] += p.learning_rate * tree.nodes[row_leaf[i]].value;
    loss = log_loss(margin, labels);
    tree.feature_names = names;
    model.trees.push_back(std::move(tree));
    model.train_loss.push_back(loss);
  }
  model.n_estimators = static_cast<int>(model.trees.size());
  return model;
}

inline double predict_margin(const BoostedModel& m, std::span<const double> row) {
  double margin = m.base_score;
  for (const auto& t : m.trees) {
    check_width(t, row.size());
    margin += m.learning_rate * t.leaf_for(row).value;
  }
  return margin;
}

/// sigmoid(base_score + learning_rate * sum of tree outputs).
inline double predict_score(const BoostedModel& m, std::span<const double> row) {
  return sigmoid(predict_margin(m, row));
}

inline std::vector<double> predict_score(const BoostedModel& m, const EncodedDataset& data) {
  std::vector<double> out(data.n_rows());
  for (std::size_t r = 0; r < data.n_rows(); ++r) out[r] = predict_score(m, data.row(r));
  return out;
}

enum class SelectionMetric { Auc, Accuracy };

struct GridSpec {
  std::vector<int> estimator_values{50, 100, 150, 200};
  std::vector<int> depth_values{2, 4, 6, 8};
  SelectionMetric selection_metric = SelectionMetric::Auc;
  double validation_fraction = 0.2;
};

struct GridCell {
  int n_estimators = 0;
  int max_depth = 0;
  double metric = 0.0;
};

struct GridResult {
  int best_n_estimators = 0;
  int best_max_depth = 0;
  std::vector<GridCell> table;  // estimators ascending, then depth ascending
};

inline double accuracy(std::span<const double> scores, std::span<const int> labels) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if ((scores[i] >= 0.5) == (labels[i] != 0)) ++hit;
  return static_cast<double>(hit) / static_cast<double>(scores.size());
}

/// Scores every (estimators, depth) cell on a seeded internal validation
/// split of train. A model with E stages is the E-stage prefix of any longer
/// model with the same depth, so each depth is trained once at the largest
/// estimator count and evaluated at every prefix. Ties go to fewer
/// estimators, then smaller depth.
inline GridResult grid_search(const EncodedDataset& train, std::span<const int> labels,
                              const GridSpec& grid, std::uint64_t seed,
                              BoostingParams base = {}) {
  if (grid.estimator_values.empty() || grid.depth_values.empty())
    fail(ErrorKind::InvalidConfig, "grid must be nonempty");
  if (labels.size() != train.n_rows()) fail(ErrorKind::LengthMismatch, "labels vs rows");
  const auto perm = seeded_permutation(train.n_rows(), derive_seed(seed, {0x6e1d}));
  const auto n_fit = static_cast<std::size_t>(
      std::floor((1.0 - grid.validation_fraction) * static_cast<double>(train.n_rows())));
  std::vector<std::size_t> fit_rows(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_fit));
  std::vector<std::size_t> val_rows(perm.begin() + static_cast<std::ptrdiff_t>(n_fit), perm.end());
  const auto fit_data = train.subset(fit_rows);
  const auto val_data = train.subset(val_rows);
  std::vector<int> fit_y, val_y;
  for (auto r : fit_rows) fit_y.push_back(labels[r]);
  for (auto r : val_rows) val_y.push_back(labels[r]);
  const auto val_pos = std::count(val_y.begin(), val_y.end(), 1);
  if (val_pos == 0 || static_cast<std::size_t>(val_pos) == val_y.size())
    fail(ErrorKind::SingleClass, "validation split has a single class");

  std::vector<int> estimators = grid.estimator_values;
  std::sort(estimators.begin(), estimators.end());
  std::vector<int> depths = grid.depth_values;
  std::sort(depths.begin(), depths.end());

  const HistogramBins bins(fit_data, base.max_bins);
  std::vector<std::vector<double>> metric(estimators.size(), std::vector<double>(depths.size()));
  for (std::size_t d = 0; d < depths.size(); ++d) {
    BoostingParams p = base;
    p.max_depth = depths[d];
    p.n_estimators = estimators.back();
    const auto model = fit_gbt(fit_data, fit_y, p, &bins);
    std::vector<double> margin(val_data.n_rows(), model.base_score);
    std::size_t e = 0;
    for (std::size_t t = 0; t <= model.trees.size() && e < estimators.size(); ++t) {
      while (e < estimators.size() && static_cast<std::size_t>(estimators[e]) == t) {
        std::vector<double> prob(margin.size());
        for (std::size_t i = 0; i < margin.size(); ++i) prob[i] = sigmoid(margin[i]);
        metric[e][d] = grid.selection_metric == SelectionMetric::Auc ? auc(prob, val_y)
                                                                     : accuracy(prob, val_y);
        ++e;
      }
      if (t == model.trees.size()) break;
      for (std::size_t i = 0; i < margin.size(); ++i)
        margin[i] += model.learning_rate * model.trees[t].leaf_for(val_data.row(i)).value;
    }
  }

  GridResult res;
  double best = -1.0;
  for (std::size_t e = 0; e < estimators.size(); ++e)
    for (std::size_t d = 0; d < depths.size(); ++d) {
      res.table.push_back({estimators[e], depths[d], metric[e][d]});
      if (metric[e][d] > best) {
        best = metric[e][d];
        res.best_n_estimators = estimators[e];
        res.best_max_depth = depths[d];
      }
    }
  return res;
}

inline nlohmann::json to_json(const BoostedModel& m) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : m.trees) trees.push_back(to_json(t));
  return {{"base_score", m.base_score},
          {"learning_rate", m.learning_rate},
          {"n_estimators", m.n_estimators},
          {"max_depth", m.max_depth},
          {"trees", std::move(trees)}};
}

inline BoostedModel boosted_from_json(const nlohmann::json& j) {
  try {
    BoostedModel m;
    m.base_score = j.at("base_score").get<double>();
    m.learning_rate = j.at("learning_rate").get<double>();
    m.n_estimators = j.at("n_estimators").get<int>();
    m.max_depth = j.at("max_depth").get<int>();
    for (const auto& t : j.at("trees")) m.trees.push_back(tree_from_json(t));
    if (static_cast<int>(m.trees.size()) != m.n_estimators)
      fail(ErrorKind::InvalidConfig, "tree count does not match n_estimators");
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidConfig, std::string("boosted model json: ") + e.what());
  }
}

}  // namespace caseflow
