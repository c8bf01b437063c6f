#pragma once

// Axis-aligned binary decision trees for one-vs-all targets.
//
// Split scoring mixes two terms:
//
//   score = factor_expl * decrease_fraction + (1 - factor_expl) * reuse_bonus
//
// decrease_fraction is the weighted impurity decrease divided by the parent
// impurity, and reuse_bonus is 1 when the split feature already appears on the
// root-to-node path. Reusing a feature adds no new variable to a row's
// explanation, so the bonus pulls trees toward short explanations. Every
// admissible (feature, threshold) pair is a candidate; one of the top_k is
// picked by the seeded stream. factor_expl = 1 and top_k = 1 reduce this to
// greedy CART.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "caseflow/encoding.hpp"
#include "caseflow/error.hpp"
#include "caseflow/random.hpp"

namespace caseflow {

enum class Criterion { Gini, Entropy };

struct TreeConfig {
  Criterion criterion = Criterion::Gini;
  int max_depth = 4;
  std::size_t min_samples_split = 2;
  std::size_t min_samples_leaf = 1;
  double factor_expl = 0.97;
  std::size_t top_k = 1;
  // Only candidates scoring at least this fraction of the best score join the
  // top_k draw. 0 admits all of them.
  double near_best = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (max_depth < 1) fail(ErrorKind::InvalidConfig, "max_depth must be positive");
    if (min_samples_split < 2) fail(ErrorKind::InvalidConfig, "min_samples_split must be >= 2");
    if (min_samples_leaf < 1) fail(ErrorKind::InvalidConfig, "min_samples_leaf must be >= 1");
    if (!(factor_expl >= 0.0 && factor_expl <= 1.0))
      fail(ErrorKind::InvalidConfig, "factor_expl must lie in [0, 1]");
    if (top_k < 1) fail(ErrorKind::InvalidConfig, "top_k must be positive");
    if (!(near_best >= 0.0 && near_best <= 1.0))
      fail(ErrorKind::InvalidConfig, "near_best must lie in [0, 1]");
  }

  /// Plain greedy CART with the given limits.
  static TreeConfig cart(Criterion c, int depth, std::size_t split, std::size_t leaf) {
    TreeConfig cfg;
    cfg.criterion = c;
    cfg.max_depth = depth;
    cfg.min_samples_split = split;
    cfg.min_samples_leaf = leaf;
    cfg.factor_expl = 1.0;
    cfg.top_k = 1;
    return cfg;
  }
};

/// Splits whose impurity decrease does not exceed this are not splits.
inline constexpr double kMinImpurityDecrease = 1e-12;

inline double gini(std::span<const std::uint64_t> counts) {
  std::uint64_t n = 0;
  for (auto c : counts) n += c;
  if (n == 0) fail(ErrorKind::EmptyNode, "gini of an empty node");
  double sum = 0.0;
  for (auto c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(n);
    sum += p * p;
  }
  return 1.0 - sum;
}

inline double entropy(std::span<const std::uint64_t> counts) {
  std::uint64_t n = 0;
  for (auto c : counts) n += c;
  if (n == 0) fail(ErrorKind::EmptyNode, "entropy of an empty node");
  double h = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(n);
    h -= p * std::log2(p);
  }
  return h;
}

inline double impurity(Criterion c, std::span<const std::uint64_t> counts) {
  return c == Criterion::Gini ? gini(counts) : entropy(counts);
}

// ---------------------------------------------------------------------------

/// Flat node. Internal nodes route value <= threshold to left.
struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::array<std::uint64_t, 2> class_counts{0, 0};  // {negative, positive}; classification only
  std::uint64_t n_samples = 0;
  double value = 0.0;  // leaf probability, or leaf output for regression trees

  bool is_leaf() const noexcept { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // root at 0
  std::size_t n_features = 0;
  std::vector<std::string> feature_names;
  bool regression = false;

  const TreeNode& root() const { return nodes.front(); }

  const TreeNode& leaf_for(std::span<const double> row) const {
    const TreeNode* n = &nodes.front();
    while (!n->is_leaf()) n = &nodes[row[n->feature] <= n->threshold ? n->left : n->right];
    return *n;
  }

  /// Number of internal nodes on the longest root-to-leaf path.
  int depth() const { return depth_from(0); }

  std::size_t n_leaves() const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const auto& n) { return n.is_leaf(); }));
  }

  /// Distinct features used by internal nodes, ascending.
  std::vector<std::size_t> split_features() const {
    std::set<std::size_t> s;
    for (const auto& n : nodes)
      if (!n.is_leaf()) s.insert(static_cast<std::size_t>(n.feature));
    return {s.begin(), s.end()};
  }

  bool operator==(const Tree&) const = default;

 private:
  int depth_from(int i) const {
    const auto& n = nodes[i];
    if (n.is_leaf()) return 0;
    return 1 + std::max(depth_from(n.left), depth_from(n.right));
  }
};

struct SplitCandidate {
  std::size_t feature = 0;
  double threshold = 0.0;
  double score = 0.0;
  double decrease = 0.0;           // raw weighted impurity decrease
  double decrease_fraction = 0.0;  // decrease / parent impurity
  std::size_t n_left = 0;
  std::size_t n_right = 0;
};

/// Per-column sorted distinct values and each row's position among them.
/// Lets node split search run as a counting pass instead of a sort.
class BinnedColumns {
 public:
  explicit BinnedColumns(const EncodedDataset& data)
      : n_rows_(data.n_rows()), n_cols_(data.n_cols()), values_(n_cols_), bins_(n_cols_) {
    std::vector<std::pair<double, std::uint32_t>> tmp(n_rows_);
    for (std::size_t c = 0; c < n_cols_; ++c) {
      for (std::size_t r = 0; r < n_rows_; ++r) tmp[r] = {data.at(r, c), static_cast<std::uint32_t>(r)};
      std::sort(tmp.begin(), tmp.end());
      auto& vals = values_[c];
      auto& bins = bins_[c];
      bins.resize(n_rows_);
      for (std::size_t i = 0; i < n_rows_; ++i) {
        if (vals.empty() || tmp[i].first != vals.back()) vals.push_back(tmp[i].first);
        bins[tmp[i].second] = static_cast<std::uint32_t>(vals.size() - 1);
      }
    }
  }

  std::size_t n_rows() const noexcept { return n_rows_; }
  std::size_t n_cols() const noexcept { return n_cols_; }
  std::span<const double> values(std::size_t c) const { return values_[c]; }
  std::uint32_t bin(std::size_t r, std::size_t c) const { return bins_[c][r]; }

 private:
  std::size_t n_rows_, n_cols_;
  std::vector<std::vector<double>> values_;
  std::vector<std::vector<std::uint32_t>> bins_;
};

namespace detail {

struct SplitScratch {
  std::vector<std::array<std::uint64_t, 2>> hist;
  std::vector<std::uint32_t> touched;
  std::vector<SplitCandidate> candidates;
};

/// Appends the column's top_k admissible thresholds (largest decrease first,
/// lowest threshold on ties) to out.
inline void column_candidates(const BinnedColumns& binned, std::size_t col,
                              std::span<const std::size_t> rows, std::span<const int> labels,
                              const TreeConfig& cfg, std::array<std::uint64_t, 2> parent,
                              double parent_impurity, SplitScratch& s,
                              std::vector<SplitCandidate>& out) {
  const auto values = binned.values(col);
  if (values.size() < 2) return;
  auto& hist = s.hist;
  if (hist.size() < values.size()) hist.assign(values.size(), {0, 0});
  s.touched.clear();
  for (auto r : rows) {
    const auto b = binned.bin(r, col);
    auto& h = hist[b];
    if (h[0] == 0 && h[1] == 0) s.touched.push_back(b);
    ++h[labels[r] != 0 ? 1 : 0];
  }
  if (s.touched.size() < 2) {
    for (auto b : s.touched) hist[b] = {0, 0};
    return;
  }
  std::sort(s.touched.begin(), s.touched.end());

  const std::size_t n = rows.size();
  const double nd = static_cast<double>(n);
  const std::size_t first = out.size();
  auto worse = [](const SplitCandidate& a, const SplitCandidate& b) {
    return a.decrease != b.decrease ? a.decrease < b.decrease : a.threshold > b.threshold;
  };
  std::array<std::uint64_t, 2> left{0, 0};
  for (std::size_t i = 0; i + 1 < s.touched.size(); ++i) {
    const auto& h = hist[s.touched[i]];
    left[0] += h[0];
    left[1] += h[1];
    const std::array<std::uint64_t, 2> right{parent[0] - left[0], parent[1] - left[1]};
    const std::size_t nl = left[0] + left[1];
    const std::size_t nr = n - nl;
    if (nl < cfg.min_samples_leaf || nr < cfg.min_samples_leaf) continue;
    const double child = (static_cast<double>(nl) / nd) * impurity(cfg.criterion, left) +
                         (static_cast<double>(nr) / nd) * impurity(cfg.criterion, right);
    const double decrease = parent_impurity - child;
    if (decrease <= kMinImpurityDecrease) continue;
    SplitCandidate c;
    c.feature = col;
    c.threshold = 0.5 * (values[s.touched[i]] + values[s.touched[i + 1]]);
    c.decrease = decrease;
    c.n_left = nl;
    c.n_right = nr;
    // Bounded min-heap on [first, end): the weakest kept candidate sits on top.
    auto begin = out.begin() + static_cast<std::ptrdiff_t>(first);
    if (out.size() - first < cfg.top_k) {
      out.push_back(c);
      std::push_heap(out.begin() + static_cast<std::ptrdiff_t>(first), out.end(),
                     [&](const auto& a, const auto& b) { return worse(b, a); });
    } else if (worse(*begin, c)) {
      std::pop_heap(begin, out.end(), [&](const auto& a, const auto& b) { return worse(b, a); });
      out.back() = c;
      std::push_heap(out.begin() + static_cast<std::ptrdiff_t>(first), out.end(),
                     [&](const auto& a, const auto& b) { return worse(b, a); });
    }
  }
  for (auto b : s.touched) hist[b] = {0, 0};
}

/// Orders candidates best-first: score, raw decrease, feature, threshold.
inline bool better(const SplitCandidate& a, const SplitCandidate& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.decrease != b.decrease) return a.decrease > b.decrease;
  if (a.feature != b.feature) return a.feature < b.feature;
  return a.threshold < b.threshold;
}

inline std::optional<SplitCandidate> search_split(const BinnedColumns& binned,
                                                  std::span<const std::size_t> rows,
                                                  std::span<const int> labels,
                                                  const TreeConfig& cfg,
                                                  const std::set<std::size_t>& path_features,
                                                  Rng& rng, SplitScratch& scratch) {
  std::array<std::uint64_t, 2> parent{0, 0};
  for (auto r : rows) ++parent[labels[r] != 0 ? 1 : 0];
  if (rows.size() < cfg.min_samples_split || parent[0] == 0 || parent[1] == 0) return std::nullopt;
  const double parent_impurity = impurity(cfg.criterion, parent);

  auto& candidates = scratch.candidates;
  candidates.clear();
  for (std::size_t c = 0; c < binned.n_cols(); ++c)
    column_candidates(binned, c, rows, labels, cfg, parent, parent_impurity, scratch, candidates);
  for (auto& cand : candidates) {
    cand.decrease_fraction = cand.decrease / parent_impurity;
    const double bonus = path_features.count(cand.feature) ? 1.0 : 0.0;
    cand.score = cfg.factor_expl * cand.decrease_fraction + (1.0 - cfg.factor_expl) * bonus;
  }
  if (candidates.empty()) return std::nullopt;
  std::size_t k = std::min(cfg.top_k, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                    candidates.end(), better);
  while (k > 1 && candidates[k - 1].score < cfg.near_best * candidates[0].score) --k;
  const std::size_t pick = k > 1 ? uniform_index(rng, k) : 0;
  return candidates[pick];
}

}  // namespace detail

/// Split search on a subset of rows. labels is indexed by dataset row.
inline std::optional<SplitCandidate> best_split(const EncodedDataset& data,
                                                std::span<const std::size_t> rows,
                                                std::span<const int> labels,
                                                const TreeConfig& cfg,
                                                const std::set<std::size_t>& path_features,
                                                Rng& rng) {
  if (labels.size() != data.n_rows()) fail(ErrorKind::LengthMismatch, "labels vs rows");
  BinnedColumns binned(data);
  detail::SplitScratch scratch;
  return detail::search_split(binned, rows, labels, cfg, path_features, rng, scratch);
}

namespace detail {

class TreeGrower {
 public:
  TreeGrower(const BinnedColumns& binned, std::span<const int> labels, const TreeConfig& cfg)
      : binned_(binned), labels_(labels), cfg_(cfg), rng_(make_rng(cfg.seed, {0x7ee})) {}

  int grow(std::vector<std::size_t> rows, int depth, std::set<std::size_t>& path) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    {
      auto& node = tree_.nodes.back();
      for (auto r : rows) ++node.class_counts[labels_[r] != 0 ? 1 : 0];
      node.n_samples = rows.size();
      node.value = static_cast<double>(node.class_counts[1]) / static_cast<double>(rows.size());
    }
    if (depth >= cfg_.max_depth) return id;
    auto split = search_split(binned_, rows, labels_, cfg_, path, rng_, scratch_);
    if (!split) return id;

    std::vector<std::size_t> left, right;
    left.reserve(split->n_left);
    right.reserve(split->n_right);
    const auto& vals = binned_.values(split->feature);
    for (auto r : rows)
      (vals[binned_.bin(r, split->feature)] <= split->threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    const bool inserted = path.insert(split->feature).second;
    const int l = grow(std::move(left), depth + 1, path);
    const int r = grow(std::move(right), depth + 1, path);
    if (inserted) path.erase(split->feature);

    auto& node = tree_.nodes[id];
    node.feature = static_cast<int>(split->feature);
    node.threshold = split->threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  Tree take() { return std::move(tree_); }

 private:
  const BinnedColumns& binned_;
  std::span<const int> labels_;
  const TreeConfig& cfg_;
  Rng rng_;
  SplitScratch scratch_;
  Tree tree_;
};

}  // namespace detail

/// Grows a classification tree on all rows of train. labels are 0/1.
inline Tree fit_tree(const EncodedDataset& train, std::span<const int> labels,
                     const TreeConfig& cfg, const BinnedColumns* prebinned = nullptr) {
  cfg.validate();
  if (train.n_rows() == 0) fail(ErrorKind::EmptyInput, "cannot fit a tree on zero rows");
  if (labels.size() != train.n_rows()) fail(ErrorKind::LengthMismatch, "labels vs rows");
  std::optional<BinnedColumns> own;
  if (!prebinned) own.emplace(train);
  const BinnedColumns& binned = prebinned ? *prebinned : *own;

  std::vector<std::size_t> rows(train.n_rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  detail::TreeGrower grower(binned, labels, cfg);
  std::set<std::size_t> path;
  grower.grow(std::move(rows), 0, path);
  Tree t = grower.take();
  t.n_features = train.n_cols();
  t.feature_names = train.column_names();
  return t;
}

inline void check_width(const Tree& tree, std::size_t width) {
  if (width != tree.n_features)
    fail(ErrorKind::WidthMismatch, "row has " + std::to_string(width) + " values, tree expects " +
                                       std::to_string(tree.n_features));
}

inline double predict_proba(const Tree& tree, std::span<const double> row) {
  check_width(tree, row.size());
  return tree.leaf_for(row).value;
}

inline std::vector<double> predict_proba(const Tree& tree, const EncodedDataset& data) {
  check_width(tree, data.n_cols());
  std::vector<double> out(data.n_rows());
  for (std::size_t r = 0; r < data.n_rows(); ++r) out[r] = tree.leaf_for(data.row(r)).value;
  return out;
}

/// Mean over rows of the number of distinct (feature, threshold) conditions on
/// the row's root-to-leaf path.
inline double explanation_size(const Tree& tree, const EncodedDataset& data) {
  if (data.n_rows() == 0) fail(ErrorKind::EmptyInput, "explanation size of an empty dataset");
  check_width(tree, data.n_cols());
  std::vector<std::pair<int, double>> seen;
  double total = 0.0;
  for (std::size_t r = 0; r < data.n_rows(); ++r) {
    seen.clear();
    const auto row = data.row(r);
    const TreeNode* n = &tree.nodes.front();
    while (!n->is_leaf()) {
      std::pair<int, double> cond{n->feature, n->threshold};
      if (std::find(seen.begin(), seen.end(), cond) == seen.end()) seen.push_back(cond);
      n = &tree.nodes[row[n->feature] <= n->threshold ? n->left : n->right];
    }
    total += static_cast<double>(seen.size());
  }
  return total / static_cast<double>(data.n_rows());
}

}  // namespace caseflow
