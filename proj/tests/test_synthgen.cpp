#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "caseflow/synthgen.hpp"

using namespace caseflow;

namespace {

using I = Intervention;

const Schema& schema() {
  static const Schema s = default_schema();
  return s;
}

const SyntheticData& benchmark() {
  static const SyntheticData d = generate(default_generator_config(), schema());
  return d;
}

GeneratorConfig with(std::size_t n, std::uint64_t seed, double rate, std::set<Targeting> targeting) {
  auto c = default_generator_config();
  c.n = n;
  c.seed = seed;
  c.discretion.rate = rate;
  c.discretion.targeting = std::move(targeting);
  return c;
}

std::string csv_bytes(const SyntheticData& d) {
  std::ostringstream out;
  write_records(out, schema(), d.records);
  write_ground_truth_csv(out, d.truth);
  return out.str();
}

}  // namespace

TEST(Generate, DefaultLabelSharesMatchTargets) {
  const auto& d = benchmark();
  ASSERT_EQ(d.records.size(), 12715u);
  std::array<double, kNumInterventions> count{};
  for (const auto& r : d.records) count[index_of(r.actual)] += 1;
  const std::pair<I, double> target[] = {{I::ES, 0.349}, {I::TH, 0.193}, {I::RRH, 0.067}, {I::Prev, 0.391}};
  for (const auto& [label, share] : target) {
    const double n = 12715;
    EXPECT_NEAR(count[index_of(label)] / n, share, 0.03) << to_string(label);
    EXPECT_NEAR(d.expected_shares[index_of(label)], share, 1e-8);
    // Count against the calibrated expectation: a sum of independent draws.
    double var = 0;
    for (const auto& t : d.truth) var += t.probs[index_of(label)] * (1 - t.probs[index_of(label)]);
    EXPECT_NEAR(count[index_of(label)], share * n, 3 * std::sqrt(var)) << to_string(label);
  }
}

TEST(Generate, TruthIsConsistent) {
  const auto& d = benchmark();
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    const auto& r = d.records[i];
    const auto& t = d.truth[i];
    EXPECT_EQ(r.id, t.id);
    if (t.flipped) {
      EXPECT_TRUE(t.eligible);
      EXPECT_NE(r.actual, t.pre_discretion);
    } else {
      EXPECT_EQ(r.actual, t.pre_discretion);
    }
    EXPECT_TRUE(t.pre_discretion == I::ES || t.pre_discretion == I::TH || !t.eligible);
    double s = 0;
    for (double p : t.probs) {
      EXPECT_GE(p, 0.0);
      s += p;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_LE(t.p_reentry_th, t.p_reentry_es);
    ASSERT_TRUE(r.p_reentry_es && r.p_reentry_th);
    EXPECT_LE(std::abs(*r.p_reentry_es - t.p_reentry_es), 0.02 + 1e-12);
    EXPECT_LE(std::abs(*r.p_reentry_th - t.p_reentry_th), 0.02 + 1e-12);
  }
}

TEST(Generate, FlipCountMatchesRate) {
  for (std::set<Targeting> tg : {std::set{Targeting::Uniform}, std::set{Targeting::LowVulnerability},
                                 default_generator_config().discretion.targeting}) {
    const auto c = with(12715, 77, 0.04, tg);
    const auto d = generate(c, schema());
    double flips = 0;
    for (const auto& t : d.truth) flips += t.flipped;
    const double n = static_cast<double>(c.n);
    EXPECT_NEAR(flips, 0.04 * n, 3 * std::sqrt(n * 0.04 * 0.96));
  }
}

TEST(Generate, ZeroRateFlipsNothing) {
  const auto d = generate(with(3000, 5, 0.0, {Targeting::Uniform}), schema());
  EXPECT_EQ(d.flip_probability, 0.0);
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    EXPECT_FALSE(d.truth[i].flipped);
    EXPECT_EQ(d.records[i].actual, d.truth[i].pre_discretion);
  }
}

TEST(Generate, LowVulnerabilityFlipsAreLessVulnerable) {
  const auto& d = benchmark();
  double all = 0, flipped = 0, k = 0;
  for (const auto& t : d.truth) {
    all += t.vulnerability;
    if (t.flipped) {
      flipped += t.vulnerability;
      ++k;
    }
  }
  ASSERT_GT(k, 0);
  EXPECT_LT(flipped / k, all / static_cast<double>(d.truth.size()));
}

TEST(Generate, VulnerabilityMatchesScorer) {
  const VulnerabilityScorer scorer(schema());
  const auto& d = benchmark();
  for (std::size_t i = 0; i < 2000; ++i) EXPECT_EQ(d.truth[i].vulnerability, scorer.score(d.records[i]).total);
}

TEST(Generate, PlantedRulesFireInPriorityOrder) {
  const auto c = default_generator_config();
  std::vector<Predicate> preds;
  for (const auto& r : c.planted_rules) preds.push_back(compile_predicate(r.predicate, schema()));
  const auto& d = benchmark();
  std::map<std::string, int> fired;
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    std::optional<std::size_t> first;
    for (std::size_t k = 0; k < preds.size() && !first; ++k)
      if (preds[k].eval(d.records[i]) == Tri::True) first = k;
    const auto& t = d.truth[i];
    ASSERT_EQ(t.rule.has_value(), first.has_value()) << i;
    if (!first) continue;
    EXPECT_EQ(*t.rule, c.planted_rules[*first].id);
    EXPECT_EQ(t.pre_discretion, c.planted_rules[*first].intervention);
    EXPECT_GE(t.probs[index_of(c.planted_rules[*first].intervention)], 1.0 - d.flip_probability - 1e-12);
    ++fired[*t.rule];
  }
  EXPECT_EQ(fired.size(), c.planted_rules.size());
}

TEST(Generate, DeterministicAndRecordwise) {
  const auto c = with(1500, 42, 0.05, {Targeting::Uniform});
  const auto a = generate(c, schema()), b = generate(c, schema());
  EXPECT_EQ(csv_bytes(a), csv_bytes(b));
  auto c2 = c;
  c2.seed = 43;
  EXPECT_NE(csv_bytes(generate(c2, schema())), csv_bytes(a));
  // Features of a record depend only on (seed, index), not on n.
  auto big = c;
  big.n = 4000;
  const auto g = generate(big, schema());
  for (std::size_t i = 0; i < c.n; ++i) EXPECT_EQ(g.records[i].values, a.records[i].values);
}

TEST(GeneratorConfig, JsonRoundTrip) {
  const auto c = default_generator_config();
  const auto j = to_json(c, schema());
  const auto back = generator_config_from_json(nlohmann::json::parse(j.dump()), schema());
  EXPECT_EQ(to_json(back, schema()).dump(), j.dump());
  EXPECT_EQ(csv_bytes(generate(with(300, 1, 0.05, {Targeting::Uniform}), schema())),
            csv_bytes(generate([&] {
                        auto x = generator_config_from_json(to_json(with(300, 1, 0.05, {Targeting::Uniform}), schema()),
                                                            schema());
                        return x;
                      }(),
                      schema())));
}

TEST(GeneratorConfig, ShippedBenchmarkConfigLoads) {
  const auto c = load_generator_config(std::string(CASEFLOW_SOURCE_DIR) + "/configs/bench_gen.json", schema());
  EXPECT_GT(c.n, 0u);
  EXPECT_FALSE(c.planted_rules.empty());
}

TEST(GeneratorConfig, InvalidConfigs) {
  auto kind = [](const GeneratorConfig& c) {
    try {
      generate(c, schema());
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::InvalidArgument;
  };
  EXPECT_EQ(kind(with(2000, 1, 0.6, {Targeting::Uniform})), ErrorKind::InvalidConfig);
  EXPECT_EQ(kind(with(2000, 1, 0.1, default_generator_config().discretion.targeting)), ErrorKind::InvalidConfig);
  EXPECT_EQ(kind(with(2000, 1, -0.1, {Targeting::Uniform})), ErrorKind::InvalidConfig);
  EXPECT_EQ(kind(with(0, 1, 0.0, {Targeting::Uniform})), ErrorKind::InvalidConfig);
  auto c = with(100, 1, 0.0, {Targeting::Uniform});
  c.planted_rules.push_back({"bad", I::ES, {{"feature", "Nope"}, {"op", "eq"}, {"value", 1}}});
  EXPECT_NE(kind(c), ErrorKind::InvalidArgument);
  auto j = to_json(with(100, 1, 0.0, {Targeting::Uniform}), schema());
  j["marginals"]["Nope"] = {{"kind", "bernoulli"}, {"p", 0.5}};
  EXPECT_THROW(generator_config_from_json(j, schema()), Error);
  EXPECT_THROW(load_generator_config("/nonexistent/gen.json", schema()), Error);
}

TEST(BayesAuc, RuleOnlyGeneratorIsPerfect) {
  auto c = with(2000, 3, 0.0, {Targeting::Uniform});
  for (auto& [name, m] : c.marginals)
    if (name == "Gender") m.missing_rate = 0.0;
  c.calibrate = false;
  c.planted_rules = {{"male", I::TH, {{"feature", "Gender"}, {"op", "eq"}, {"value", "Male"}}},
                     {"rest", I::ES, {{"feature", "Gender"}, {"op", "ne"}, {"value", "Male"}}}};
  const auto d = generate(c, schema());
  EXPECT_DOUBLE_EQ(bayes_auc(d, I::TH), 1.0);
  EXPECT_DOUBLE_EQ(bayes_auc(d, I::ES), 1.0);
}

TEST(BayesAuc, NoSignalIsOneHalf) {
  auto c = with(3000, 4, 0.0, {Targeting::Uniform});
  c.calibrate = false;
  c.planted_rules.clear();
  for (auto& t : c.coefficients) t.clear();
  c.intercepts = {};
  const auto d = generate(c, schema());
  for (auto l : kByIntensity) EXPECT_NEAR(bayes_auc(d, l), 0.5, 0.03);
  std::size_t es = 0;
  for (const auto& r : d.records) es += r.actual == I::ES;
  EXPECT_NEAR(es / 3000.0, 0.25, 0.03);
}

TEST(BayesAuc, BenchmarkCeilingIsInformativeAndRowSubsetsWork) {
  const auto& d = benchmark();
  for (auto l : kByIntensity) {
    const double a = bayes_auc(d, l);
    EXPECT_GT(a, 0.6) << to_string(l);
    EXPECT_LT(a, 1.0) << to_string(l);
  }
  std::vector<std::size_t> rows(d.records.size());
  std::iota(rows.begin(), rows.end(), 0);
  EXPECT_DOUBLE_EQ(bayes_auc(d, I::TH, rows), bayes_auc(d, I::TH));
}
