#pragma once

// End-to-end runs over one dataset: shared train/test split, short-tree seed
// replicates, CART, boosted ensembles, replicate consistency and discretion
// analysis. All randomness is derived from RunConfig::seed.

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdio>
#include <cstdint>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "caseflow/boosting.hpp"
#include "caseflow/csv.hpp"
#include "caseflow/discretion.hpp"
#include "caseflow/encoding.hpp"
#include "caseflow/error.hpp"
#include "caseflow/intervention.hpp"
#include "caseflow/metrics.hpp"
#include "caseflow/random.hpp"
#include "caseflow/records.hpp"
#include "caseflow/schema.hpp"
#include "caseflow/scoring.hpp"
#include "caseflow/tree.hpp"

namespace caseflow {

/// Runs task(i) for i in [0, n) on up to `threads` workers. Tasks write to
/// their own slots, so the result does not depend on scheduling. The first
/// exception (lowest index) is rethrown after all workers stop.
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& task) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
          try {
            task(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Configuration

struct RunConfig {
  std::string data;
  std::string ground_truth;  // optional sidecar with true probabilities
  std::string schema;        // empty: built-in schema
  std::string rules;         // empty: built-in vulnerability rules
  std::uint64_t seed = 20130601;
  double train_ratio = 0.7;
  std::size_t replicates = 10;
  TreeConfig short_tree = [] {
    TreeConfig c;
    c.max_depth = 4;
    c.factor_expl = 0.97;
    c.top_k = 2;
    c.near_best = 0.8;
    return c;
  }();
  std::array<TreeConfig, kNumInterventions> cart{
      TreeConfig::cart(Criterion::Gini, 8, 9, 1),   // Prev
      TreeConfig::cart(Criterion::Gini, 9, 8, 4),   // ES
      TreeConfig::cart(Criterion::Gini, 4, 2, 3),   // RRH
      TreeConfig::cart(Criterion::Gini, 7, 8, 4)};  // TH
  GridSpec grid;
  BoostingParams boosting;
  std::size_t n_resamples = 1000;
  bool discretion_full_data = true;
  bool exclude_observed = false;
  std::uint64_t min_support = 1;
  std::size_t threads = 1;

  std::uint64_t split_seed() const { return derive_seed(seed, {0x5917}); }
  std::uint64_t replicate_seed(Intervention t, std::size_t k) const {
    return derive_seed(seed, {0x7ee, index_of(t), k});
  }
  std::uint64_t grid_seed(Intervention t) const { return derive_seed(seed, {0xb005, index_of(t)}); }
  std::uint64_t discretion_seed() const { return derive_seed(seed, {0xd15c}); }

  void validate() const {
    if (!(train_ratio > 0.0 && train_ratio < 1.0))
      fail(ErrorKind::InvalidConfig, "train_ratio must lie in (0, 1)");
    if (replicates < 1) fail(ErrorKind::InvalidConfig, "replicates must be positive");
    if (n_resamples < 1) fail(ErrorKind::InvalidConfig, "n_resamples must be positive");
    if (threads < 1) fail(ErrorKind::InvalidConfig, "threads must be positive");
    if (!(boosting.learning_rate > 0.0)) fail(ErrorKind::InvalidConfig, "learning_rate must be positive");
    short_tree.validate();
    for (const auto& c : cart) c.validate();
    if (grid.estimator_values.empty() || grid.depth_values.empty())
      fail(ErrorKind::InvalidConfig, "boosting grid must be nonempty");
    for (int e : grid.estimator_values)
      if (e < 1) fail(ErrorKind::InvalidConfig, "grid estimator values must be positive");
    for (int d : grid.depth_values)
      if (d < 1) fail(ErrorKind::InvalidConfig, "grid depth values must be positive");
  }
};

namespace detail {

inline Criterion parse_criterion(const std::string& s) {
  if (s == "gini") return Criterion::Gini;
  if (s == "entropy") return Criterion::Entropy;
  fail(ErrorKind::InvalidConfig, "unknown criterion '" + s + "'");
}

inline std::string_view criterion_name(Criterion c) { return c == Criterion::Gini ? "gini" : "entropy"; }

inline TreeConfig tree_config_from_json(const nlohmann::json& j, TreeConfig c) {
  if (j.contains("criterion")) c.criterion = parse_criterion(j["criterion"].get<std::string>());
  c.max_depth = j.value("max_depth", c.max_depth);
  c.min_samples_split = j.value("min_samples_split", c.min_samples_split);
  c.min_samples_leaf = j.value("min_samples_leaf", c.min_samples_leaf);
  c.factor_expl = j.value("factor_expl", c.factor_expl);
  c.top_k = j.value("top_k", c.top_k);
  c.near_best = j.value("near_best", c.near_best);
  return c;
}

inline nlohmann::json tree_config_to_json(const TreeConfig& c) {
  return {{"criterion", criterion_name(c.criterion)}, {"max_depth", c.max_depth},
          {"min_samples_split", c.min_samples_split}, {"min_samples_leaf", c.min_samples_leaf},
          {"factor_expl", c.factor_expl},             {"top_k", c.top_k},
          {"near_best", c.near_best}};
}

}  // namespace detail

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  try {
    if (!j.is_object()) fail(ErrorKind::InvalidConfig, "run config must be a JSON object");
    if (!j.contains("data")) fail(ErrorKind::InvalidConfig, "run config needs a 'data' path");
    c.data = j.at("data").get<std::string>();
    c.ground_truth = j.value("ground_truth", std::string{});
    c.schema = j.value("schema", std::string{});
    c.rules = j.value("rules", std::string{});
    c.seed = j.value("seed", c.seed);
    c.train_ratio = j.value("train_ratio", c.train_ratio);
    c.replicates = j.value("replicates", c.replicates);
    if (j.contains("short_tree")) c.short_tree = detail::tree_config_from_json(j["short_tree"], c.short_tree);
    if (j.contains("cart"))
      for (auto& [name, cj] : j["cart"].items()) {
        auto t = parse_intervention(name);
        if (!t) fail(ErrorKind::InvalidConfig, "unknown intervention '" + name + "' in cart");
        c.cart[index_of(*t)] = detail::tree_config_from_json(cj, c.cart[index_of(*t)]);
      }
    if (j.contains("boosting")) {
      const auto& b = j["boosting"];
      c.boosting.learning_rate = b.value("learning_rate", c.boosting.learning_rate);
      c.boosting.max_bins = b.value("max_bins", c.boosting.max_bins);
      if (b.contains("estimators")) c.grid.estimator_values = b["estimators"].get<std::vector<int>>();
      if (b.contains("depths")) c.grid.depth_values = b["depths"].get<std::vector<int>>();
      c.grid.validation_fraction = b.value("validation_fraction", c.grid.validation_fraction);
      const auto metric = b.value("selection_metric", std::string("auc"));
      if (metric == "auc")
        c.grid.selection_metric = SelectionMetric::Auc;
      else if (metric == "accuracy")
        c.grid.selection_metric = SelectionMetric::Accuracy;
      else
        fail(ErrorKind::InvalidConfig, "unknown selection_metric '" + metric + "'");
    }
    if (j.contains("discretion")) {
      const auto& d = j["discretion"];
      c.n_resamples = d.value("n_resamples", c.n_resamples);
      const auto pop = d.value("population", std::string("full"));
      if (pop == "full")
        c.discretion_full_data = true;
      else if (pop == "test")
        c.discretion_full_data = false;
      else
        fail(ErrorKind::InvalidConfig, "discretion population must be 'full' or 'test'");
      c.exclude_observed = d.value("exclude_observed", c.exclude_observed);
    }
    c.min_support = j.value("min_support", c.min_support);
    c.threads = j.value("threads", c.threads);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidConfig, std::string("run config: ") + e.what());
  }
  c.validate();
  return c;
}

/// threads is left out: it never changes results.
inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json cart = nlohmann::json::object();
  for (auto t : kReportOrder) cart[std::string(to_string(t))] = detail::tree_config_to_json(c.cart[index_of(t)]);
  return {{"data", c.data},
          {"ground_truth", c.ground_truth},
          {"schema", c.schema},
          {"rules", c.rules},
          {"seed", c.seed},
          {"train_ratio", c.train_ratio},
          {"replicates", c.replicates},
          {"short_tree", detail::tree_config_to_json(c.short_tree)},
          {"cart", cart},
          {"boosting",
           {{"learning_rate", c.boosting.learning_rate},
            {"max_bins", c.boosting.max_bins},
            {"estimators", c.grid.estimator_values},
            {"depths", c.grid.depth_values},
            {"validation_fraction", c.grid.validation_fraction},
            {"selection_metric", c.grid.selection_metric == SelectionMetric::Auc ? "auc" : "accuracy"}}},
          {"discretion",
           {{"n_resamples", c.n_resamples},
            {"population", c.discretion_full_data ? "full" : "test"},
            {"exclude_observed", c.exclude_observed}}},
          {"min_support", c.min_support}};
}

// ---------------------------------------------------------------------------
// Data preparation

/// True P(actual = k) per record id, read from a ground-truth sidecar.
using TruthProbs = std::map<std::string, std::array<double, kNumInterventions>>;

inline TruthProbs read_truth_probs(std::istream& in, const std::string& source = "ground truth") {
  std::vector<std::string> row;
  if (!csv::read_row(in, row)) fail(ErrorKind::EmptyInput, source + ": empty file");
  std::size_t id_col = row.size();
  std::array<std::size_t, kNumInterventions> cols;
  cols.fill(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (row[i] == "id") id_col = i;
    for (auto t : kReportOrder)
      if (row[i] == "prob_" + std::string(to_string(t))) cols[index_of(t)] = i;
  }
  if (id_col == row.size()) fail(ErrorKind::UnknownColumn, source + ": no id column");
  for (auto c : cols)
    if (c == row.size()) fail(ErrorKind::UnknownColumn, source + ": missing prob_* column");
  TruthProbs out;
  std::size_t line = 0;  // data rows
  while (csv::read_row(in, row)) {
    ++line;
    std::array<double, kNumInterventions> p{};
    for (std::size_t k = 0; k < kNumInterventions; ++k) {
      auto v = cols[k] < row.size() ? csv::parse_double(row[cols[k]]) : std::nullopt;
      if (!v) throw Error(ErrorKind::MalformedRow, source + ": bad probability", line, cols[k] + 1);
      p[k] = *v;
    }
    if (id_col >= row.size()) throw Error(ErrorKind::MalformedRow, source + ": short row", line, id_col + 1);
    out[row[id_col]] = p;
  }
  return out;
}

inline TruthProbs load_truth_probs(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::MalformedRow, "cannot open ground truth file '" + path + "'");
  return read_truth_probs(in, "'" + path + "'");
}

struct Prepared {
  Schema schema;
  std::vector<HouseholdRecord> records;
  EncodedDataset encoded;
  SplitPair split;
};

inline Prepared prepare(std::vector<HouseholdRecord> records, Schema schema, const RunConfig& cfg) {
  Prepared p{std::move(schema), std::move(records), {}, {}};
  p.encoded = one_hot_encode(p.records, p.schema);
  p.split = split(p.encoded, cfg.train_ratio, cfg.split_seed());
  if (p.split.train.n_rows() == 0 || p.split.test.n_rows() == 0)
    fail(ErrorKind::EmptyInput, "train/test split leaves an empty side");
  return p;
}

// ---------------------------------------------------------------------------
// Training

struct ShortReplicates {
  std::vector<Tree> trees;
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<double>> test_scores;
  std::vector<double> test_auc;
  std::vector<double> test_accuracy;
  std::size_t best = 0;  // highest test accuracy, first on ties

  const Tree& best_tree() const { return trees.at(best); }
  double mean_auc() const {
    double s = 0.0;
    for (double a : test_auc) s += a;
    return s / static_cast<double>(test_auc.size());
  }
};

/// Names of schema features the tree splits on.
inline std::set<std::string> split_feature_names(const Tree& tree, const EncodedDataset& data,
                                                 const Schema& schema) {
  std::set<std::string> out;
  for (auto c : tree.split_features()) out.insert(schema[data.columns.at(c).feature].name);
  return out;
}

struct FamilyRow {
  std::string model;  // short, cart, boosted
  double mean_auc = 0.0;
  AucEstimate best;   // DeLong on the selected model's test scores
  RocCurve roc;
};

struct InterventionResult {
  Intervention target = Intervention::ES;
  ShortReplicates short_trees;
  Tree cart;
  GridResult grid;
  BoostedModel boosted;
  std::array<FamilyRow, 3> rows;  // short, cart, boosted
  std::optional<double> bayes_auc;  // on the test split
};

struct TrainResult {
  std::vector<InterventionResult> interventions;  // kReportOrder
};

namespace detail {

inline FamilyRow family_row(std::string model, double mean_auc, std::span<const double> scores,
                            std::span<const int> y) {
  FamilyRow r;
  r.model = std::move(model);
  r.mean_auc = mean_auc;
  r.best = delong_ci(scores, y);
  r.roc = roc_curve(scores, y);
  return r;
}

}  // namespace detail

/// Short-tree replicates for every intervention (no CART or boosting).
inline std::vector<ShortReplicates> fit_all_short(const Prepared& p, const RunConfig& cfg) {
  const BinnedColumns binned(p.split.train);
  const std::size_t k = cfg.replicates;
  std::vector<ShortReplicates> parts(kNumInterventions);
  for (auto& s : parts) {
    s.trees.resize(k);
    s.seeds.resize(k);
    s.test_scores.resize(k);
    s.test_auc.resize(k);
    s.test_accuracy.resize(k);
  }
  std::array<std::vector<int>, kNumInterventions> ytr, yte;
  for (std::size_t t = 0; t < kNumInterventions; ++t) {
    ytr[t] = binarize(p.split.train.labels, kReportOrder[t]);
    yte[t] = binarize(p.split.test.labels, kReportOrder[t]);
  }
  parallel_for(kNumInterventions * k, cfg.threads, [&](std::size_t job) {
    const std::size_t t = job / k, i = job % k;
    auto& s = parts[t];
    TreeConfig tc = cfg.short_tree;
    tc.seed = cfg.replicate_seed(kReportOrder[t], i);
    s.seeds[i] = tc.seed;
    s.trees[i] = fit_tree(p.split.train, ytr[t], tc, &binned);
    s.test_scores[i] = predict_proba(s.trees[i], p.split.test);
    s.test_auc[i] = auc(s.test_scores[i], yte[t]);
    s.test_accuracy[i] = accuracy(s.test_scores[i], yte[t]);
  });
  for (auto& s : parts)
    for (std::size_t i = 1; i < k; ++i)
      if (s.test_accuracy[i] > s.test_accuracy[s.best]) s.best = i;
  return parts;
}

/// Short replicates, CART and the grid-searched boosted model for every
/// intervention, all scored on the shared test split.
inline TrainResult train_all(const Prepared& p, const RunConfig& cfg, const TruthProbs* truth = nullptr) {
  cfg.validate();
  auto shorts = fit_all_short(p, cfg);
  TrainResult res;
  res.interventions.resize(kNumInterventions);
  const BinnedColumns binned(p.split.train);
  const HistogramBins hist(p.split.train, cfg.boosting.max_bins);

  // 4 CART fits + 4 grid searches, then the boosted refits.
  parallel_for(2 * kNumInterventions, cfg.threads, [&](std::size_t job) {
    const std::size_t t = job % kNumInterventions;
    auto& r = res.interventions[t];
    const auto target = kReportOrder[t];
    const auto ytr = binarize(p.split.train.labels, target);
    if (job < kNumInterventions) {
      r.cart = fit_tree(p.split.train, ytr, cfg.cart[index_of(target)], &binned);
    } else {
      r.grid = grid_search(p.split.train, ytr, cfg.grid, cfg.grid_seed(target), cfg.boosting);
      BoostingParams bp = cfg.boosting;
      bp.n_estimators = r.grid.best_n_estimators;
      bp.max_depth = r.grid.best_max_depth;
      r.boosted = fit_gbt(p.split.train, ytr, bp, &hist);
    }
  });

  for (std::size_t t = 0; t < kNumInterventions; ++t) {
    auto& r = res.interventions[t];
    r.target = kReportOrder[t];
    r.short_trees = std::move(shorts[t]);
    const auto yte = binarize(p.split.test.labels, r.target);
    const auto& st = r.short_trees;
    r.rows[0] = detail::family_row("short", st.mean_auc(), st.test_scores[st.best], yte);
    const auto cart_scores = predict_proba(r.cart, p.split.test);
    r.rows[1] = detail::family_row("cart", auc(cart_scores, yte), cart_scores, yte);
    const auto gbt_scores = predict_score(r.boosted, p.split.test);
    r.rows[2] = detail::family_row("boosted", auc(gbt_scores, yte), gbt_scores, yte);
    if (truth) {
      std::vector<double> s;
      s.reserve(p.split.test.n_rows());
      for (const auto& id : p.split.test.row_ids) {
        auto it = truth->find(id);
        if (it == truth->end()) fail(ErrorKind::MalformedRow, "ground truth has no row for id '" + id + "'");
        s.push_back(it->second[index_of(r.target)]);
      }
      r.bayes_auc = auc(s, yte);
    }
  }
  return res;
}

/// intervention, model, mean AUC, best AUC, CI bounds; one row per family.
inline void write_auc_table_csv(std::ostream& out, const TrainResult& r) {
  csv::write_row(out, {"intervention", "model", "mean_auc", "best_auc", "ci_low", "ci_high", "bayes_auc"});
  for (const auto& i : r.interventions)
    for (const auto& row : i.rows)
      csv::write_row(out, {std::string(to_string(i.target)), row.model, csv::format_double(row.mean_auc),
                           csv::format_double(row.best.auc), csv::format_double(row.best.ci_low),
                           csv::format_double(row.best.ci_high),
                           i.bayes_auc ? csv::format_double(*i.bayes_auc) : ""});
}

inline void write_auc_table_text(std::ostream& out, const TrainResult& r) {
  auto f = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return std::string(buf);
  };
  out << "Intervention\tModel\tMean AUC\tBest AUC\t95% CI\n";
  for (const auto& i : r.interventions)
    for (const auto& row : i.rows)
      out << long_name(i.target) << '\t' << row.model << '\t' << f(row.mean_auc) << '\t' << f(row.best.auc)
          << "\t[" << f(row.best.ci_low) << ", " << f(row.best.ci_high) << "]\n";
}

inline nlohmann::json to_json(const GridResult& g) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : g.table)
    cells.push_back({{"n_estimators", c.n_estimators}, {"max_depth", c.max_depth}, {"metric", c.metric}});
  return {{"best_n_estimators", g.best_n_estimators}, {"best_max_depth", g.best_max_depth}, {"cells", cells}};
}

inline nlohmann::json summary_json(const TrainResult& r, const Prepared& p) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& i : r.interventions) {
    nlohmann::json reps = nlohmann::json::array();
    const auto& st = i.short_trees;
    for (std::size_t k = 0; k < st.trees.size(); ++k) {
      const auto feats = split_feature_names(st.trees[k], p.split.train, p.schema);
      reps.push_back({{"seed", st.seeds[k]},
                      {"test_auc", st.test_auc[k]},
                      {"test_accuracy", st.test_accuracy[k]},
                      {"depth", st.trees[k].depth()},
                      {"split_features", std::vector<std::string>(feats.begin(), feats.end())}});
    }
    nlohmann::json families = nlohmann::json::array();
    for (const auto& row : i.rows)
      families.push_back({{"model", row.model},
                          {"mean_auc", row.mean_auc},
                          {"best_auc", row.best.auc},
                          {"variance", row.best.variance},
                          {"ci_low", row.best.ci_low},
                          {"ci_high", row.best.ci_high}});
    nlohmann::json j{{"intervention", to_string(i.target)},
                     {"families", families},
                     {"short_replicates", reps},
                     {"best_replicate", st.best},
                     {"grid", to_json(i.grid)}};
    if (i.bayes_auc) j["bayes_auc"] = *i.bayes_auc;
    out.push_back(std::move(j));
  }
  return {{"n_train", p.split.train.n_rows()}, {"n_test", p.split.test.n_rows()}, {"interventions", out}};
}

// ---------------------------------------------------------------------------
// Consistency

struct ConsistencyResult {
  std::vector<std::vector<std::vector<double>>> matrices;  // per intervention
  std::vector<double> mean_rho;
};

/// Spearman matrix of test-split scores across replicates. Needs at least two
/// distinct score values per replicate.
inline ConsistencyResult consistency(const std::vector<ShortReplicates>& shorts) {
  ConsistencyResult c;
  for (const auto& s : shorts) {
    c.matrices.push_back(correlation_matrix(s.test_scores));
    c.mean_rho.push_back(mean_off_diagonal(c.matrices.back()));
  }
  return c;
}

inline void write_matrix_csv(std::ostream& out, const std::vector<std::vector<double>>& m) {
  std::vector<std::string> row{""};
  for (std::size_t i = 0; i < m.size(); ++i) row.push_back("r" + std::to_string(i + 1));
  csv::write_row(out, row);
  for (std::size_t i = 0; i < m.size(); ++i) {
    row.assign(1, "r" + std::to_string(i + 1));
    for (double v : m[i]) row.push_back(csv::format_double(v));
    csv::write_row(out, row);
  }
}

// ---------------------------------------------------------------------------
// Discretion

/// One-vs-all resolution of the given trees (kReportOrder) on every row.
inline std::vector<Intervention> predict_interventions(const std::array<const Tree*, kNumInterventions>& trees,
                                                       const EncodedDataset& data) {
  std::vector<Intervention> out;
  out.reserve(data.n_rows());
  for (std::size_t r = 0; r < data.n_rows(); ++r) {
    InterventionScores s;
    for (std::size_t t = 0; t < kNumInterventions; ++t) s[kReportOrder[t]] = predict_proba(*trees[t], data.row(r));
    out.push_back(resolve_one_vs_all(s));
  }
  return out;
}

/// Predictions from each intervention's best short replicate, then the four
/// resampling tests on the chosen scoring population.
inline DiscretionReport run_discretion(const Prepared& p, const std::vector<ShortReplicates>& shorts,
                                       const VulnerabilityScorer& scorer, const RunConfig& cfg) {
  std::array<const Tree*, kNumInterventions> best{};
  for (std::size_t t = 0; t < kNumInterventions; ++t) best[t] = &shorts.at(t).best_tree();
  std::vector<HouseholdRecord> records;
  const EncodedDataset* data = &p.encoded;
  if (cfg.discretion_full_data) {
    records = p.records;
  } else {
    for (auto i : p.split.test_rows) records.push_back(p.records[i]);
    data = &p.split.test;
  }
  const auto predicted = predict_interventions(best, *data);
  AnalyzeOptions ao;
  ao.n_resamples = cfg.n_resamples;
  ao.seed = cfg.discretion_seed();
  ao.exclude_observed = cfg.exclude_observed;
  ao.run_mb = std::all_of(records.begin(), records.end(),
                          [](const HouseholdRecord& r) { return r.p_reentry_es && r.p_reentry_th; });
  return analyze(records, predicted, scorer, ao);
}

}  // namespace caseflow
