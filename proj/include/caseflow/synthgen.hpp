#pragma once

// Seeded synthetic household generator with a known assignment mechanism.
//
// Per record: features from declared marginals, then a pre-discretion label
// (first matching planted rule, else a softmax over linear scores), then an
// optional ES<->TH flip. Flip eligibility is the conjunction of the active
// targeting filters; eligible records flip with one shared probability q chosen
// so the expected number of flips is rate * n. Because everything above is a
// function of the features, the generator also reports each record's exact
// probability of every actual label.

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "caseflow/csv.hpp"
#include "caseflow/encoding.hpp"
#include "caseflow/error.hpp"
#include "caseflow/intervention.hpp"
#include "caseflow/metrics.hpp"
#include "caseflow/random.hpp"
#include "caseflow/records.hpp"
#include "caseflow/schema.hpp"
#include "caseflow/scoring.hpp"

namespace caseflow {

struct Marginal {
  enum class Kind { Bernoulli, Categorical, Normal, LogNormal, Geometric, Derived };
  Kind kind = Kind::Derived;
  double p = 0.5;  // Bernoulli: P(1). Geometric: success probability.
  std::vector<double> weights;  // Categorical, per level
  double mean = 0.0, sd = 1.0;  // Normal
  double mu = 0.0, sigma = 1.0, zero_prob = 0.0;  // LogNormal
  double lo = -HUGE_VAL, hi = HUGE_VAL;  // clip
  bool round = false;
  double missing_rate = 0.0;
};

/// A linear term: coef * value, or coef * [value == level] when level is set.
struct Term {
  std::string name;  // "Feature" or "Feature=level"
  std::size_t feature = 0;
  std::optional<double> level;
  double coef = 0.0;

  double eval(const HouseholdRecord& r) const {
    const auto& v = r.values[feature];
    if (!v) return 0.0;
    if (level) return *v == *level ? coef : 0.0;
    return coef * *v;
  }
};

/// One row of an odds-ratio table. Rows whose lower CI is not above zero get
/// coefficient 0.
struct OddsRatio {
  std::string term;
  double odds_ratio = 1.0;
  double lower_ci = 1.0;

  double coefficient() const { return lower_ci <= 0.0 ? 0.0 : std::log(odds_ratio); }
};

struct PlantedRule {
  std::string id;
  Intervention intervention = Intervention::ES;
  nlohmann::json predicate;
};

enum class Targeting { Uniform, LowVulnerability, HighMbEsToTh };

struct DiscretionConfig {
  double rate = 0.0;  // expected flips / n
  std::set<Targeting> targeting{Targeting::Uniform};
  int vs_cutoff = 1;            // low_vulnerability: VS <= cutoff
  double mb_threshold = 0.15;   // high_mb_es_to_th: true benefit >= threshold
};

struct OutcomeConfig {
  double base_reentry_es = 0.35;
  double vs_slope = 0.02;          // reentry under ES rises with VS
  double benefit_spread = 0.3;     // benefit = spread * clamp(baseline + terms, 0, 1)
  double benefit_baseline = 0.1;
  std::vector<std::pair<std::string, double>> benefit_terms;
  double noise = 0.02;             // observed = true + U(-noise, noise), clamped
};

struct GeneratorConfig {
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  std::array<double, kNumInterventions> target_shares{0.391, 0.349, 0.067, 0.193};  // by index_of
  bool calibrate = true;
  std::array<double, kNumInterventions> intercepts{};  // starting point (or fixed when !calibrate)
  std::vector<std::pair<std::string, Marginal>> marginals;  // by feature name
  std::array<std::vector<OddsRatio>, kNumInterventions> coefficients;
  std::vector<PlantedRule> planted_rules;  // priority order
  DiscretionConfig discretion;
  OutcomeConfig outcome;
};

struct TruthRow {
  std::string id;
  std::optional<std::string> rule;  // planted rule that fired
  Intervention pre_discretion = Intervention::ES;
  bool eligible = false;            // eligible to flip given its pre-discretion label
  bool flipped = false;
  std::array<double, kNumInterventions> probs{};  // exact P(actual = k | features)
  double p_reentry_es = 0.0;
  double p_reentry_th = 0.0;
  int vulnerability = 0;
};

struct SyntheticData {
  std::vector<HouseholdRecord> records;
  std::vector<TruthRow> truth;
  std::array<double, kNumInterventions> intercepts{};
  std::array<double, kNumInterventions> expected_shares{};
  double flip_probability = 0.0;
};

// ---------------------------------------------------------------------------
// Config parsing

namespace detail {

inline std::string_view targeting_name(Targeting t) {
  switch (t) {
    case Targeting::Uniform: return "uniform";
    case Targeting::LowVulnerability: return "low_vulnerability";
    case Targeting::HighMbEsToTh: return "high_mb_es_to_th";
  }
  return "?";
}

inline Targeting parse_targeting(const std::string& s) {
  if (s == "uniform") return Targeting::Uniform;
  if (s == "low_vulnerability") return Targeting::LowVulnerability;
  if (s == "high_mb_es_to_th") return Targeting::HighMbEsToTh;
  fail(ErrorKind::InvalidConfig, "unknown targeting mode '" + s + "'");
}

inline Intervention parse_label(const std::string& s) {
  if (auto i = parse_intervention(s)) return *i;
  fail(ErrorKind::InvalidConfig, "unknown intervention '" + s + "'");
}

inline Marginal marginal_from_json(const nlohmann::json& j, const FeatureSpec& f) {
  Marginal m;
  const auto kind = j.at("kind").get<std::string>();
  m.missing_rate = j.value("missing_rate", 0.0);
  m.round = j.value("round", false);
  m.lo = j.value("min", -HUGE_VAL);
  m.hi = j.value("max", HUGE_VAL);
  if (kind == "bernoulli") {
    m.kind = Marginal::Kind::Bernoulli;
    m.p = j.at("p").get<double>();
  } else if (kind == "categorical") {
    m.kind = Marginal::Kind::Categorical;
    const auto& w = j.at("weights");
    m.weights.assign(f.levels.size(), -1.0);
    double listed = 0.0;
    std::size_t unlisted = f.levels.size();
    for (auto it = w.begin(); it != w.end(); ++it) {
      const auto idx = f.level_index(it.key());
      if (!idx) fail(ErrorKind::InvalidConfig, "feature '" + f.name + "' has no level '" + it.key() + "'");
      m.weights[*idx] = it.value().get<double>();
      listed += m.weights[*idx];
      --unlisted;
    }
    // Unlisted levels share whatever mass is left.
    const double rest = unlisted ? std::max(0.0, 1.0 - listed) / static_cast<double>(unlisted) : 0.0;
    for (auto& x : m.weights)
      if (x < 0.0) x = rest;
  } else if (kind == "normal") {
    m.kind = Marginal::Kind::Normal;
    m.mean = j.at("mean").get<double>();
    m.sd = j.at("sd").get<double>();
  } else if (kind == "lognormal") {
    m.kind = Marginal::Kind::LogNormal;
    m.mu = j.at("mu").get<double>();
    m.sigma = j.at("sigma").get<double>();
    m.zero_prob = j.value("zero_prob", 0.0);
  } else if (kind == "geometric") {
    m.kind = Marginal::Kind::Geometric;
    m.p = j.at("p").get<double>();
  } else if (kind == "derived") {
    m.kind = Marginal::Kind::Derived;
  } else {
    fail(ErrorKind::InvalidConfig, "unknown marginal kind '" + kind + "' for '" + f.name + "'");
  }
  return m;
}

inline nlohmann::json marginal_to_json(const Marginal& m, const FeatureSpec& f) {
  nlohmann::json j;
  switch (m.kind) {
    case Marginal::Kind::Bernoulli: j = {{"kind", "bernoulli"}, {"p", m.p}}; break;
    case Marginal::Kind::Categorical: {
      nlohmann::json w = nlohmann::json::object();
      for (std::size_t i = 0; i < m.weights.size(); ++i) w[f.levels[i]] = m.weights[i];
      j = {{"kind", "categorical"}, {"weights", w}};
      break;
    }
    case Marginal::Kind::Normal: j = {{"kind", "normal"}, {"mean", m.mean}, {"sd", m.sd}}; break;
    case Marginal::Kind::LogNormal:
      j = {{"kind", "lognormal"}, {"mu", m.mu}, {"sigma", m.sigma}, {"zero_prob", m.zero_prob}};
      break;
    case Marginal::Kind::Geometric: j = {{"kind", "geometric"}, {"p", m.p}}; break;
    case Marginal::Kind::Derived: j = {{"kind", "derived"}}; break;
  }
  if (std::isfinite(m.lo)) j["min"] = m.lo;
  if (std::isfinite(m.hi)) j["max"] = m.hi;
  if (m.round) j["round"] = true;
  if (m.missing_rate > 0.0) j["missing_rate"] = m.missing_rate;
  return j;
}

/// "Feature" or "Feature=level" resolved against the schema.
inline Term resolve_term(const Schema& schema, const std::string& name, double coef) {
  Term t;
  t.name = name;
  t.coef = coef;
  const auto eq = name.find('=');
  const std::string feature = eq == std::string::npos ? name : name.substr(0, eq);
  const auto idx = schema.find(feature);
  if (!idx) fail(ErrorKind::InvalidConfig, "term '" + name + "' names an unknown feature");
  t.feature = *idx;
  const auto& f = schema[*idx];
  if (eq != std::string::npos) {
    const auto lvl = f.level_index(name.substr(eq + 1));
    if (!lvl || f.kind == FeatureKind::Continuous)
      fail(ErrorKind::InvalidConfig, "term '" + name + "' names an unknown level");
    t.level = static_cast<double>(*lvl);
  } else if (f.kind == FeatureKind::Categorical) {
    fail(ErrorKind::InvalidConfig, "categorical term '" + name + "' needs a level");
  }
  return t;
}

inline bool is_derived_feature(const std::string& name) {
  return name == "Children" || name == "numMembers" || name == "RatioOfNumCallstoWaitTime";
}

}  // namespace detail

inline GeneratorConfig generator_config_from_json(const nlohmann::json& j, const Schema& schema) {
  GeneratorConfig c;
  try {
    c.n = j.at("n").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("target_shares"))
      for (auto it = j["target_shares"].begin(); it != j["target_shares"].end(); ++it)
        c.target_shares[index_of(detail::parse_label(it.key()))] = it.value().get<double>();
    c.calibrate = j.value("calibrate", true);
    if (j.contains("intercepts"))
      for (auto it = j["intercepts"].begin(); it != j["intercepts"].end(); ++it)
        c.intercepts[index_of(detail::parse_label(it.key()))] = it.value().get<double>();
    for (auto it = j.at("marginals").begin(); it != j.at("marginals").end(); ++it) {
      const auto idx = schema.find(it.key());
      if (!idx) fail(ErrorKind::InvalidConfig, "marginal for unknown feature '" + it.key() + "'");
      c.marginals.emplace_back(it.key(), detail::marginal_from_json(it.value(), schema[*idx]));
    }
    if (j.contains("coefficients"))
      for (auto it = j["coefficients"].begin(); it != j["coefficients"].end(); ++it) {
        auto& table = c.coefficients[index_of(detail::parse_label(it.key()))];
        for (const auto& row : it.value()) {
          const double orr = row.at("odds_ratio").get<double>();
          table.push_back({row.at("term").get<std::string>(), orr, row.value("lower_ci", orr)});
        }
      }
    for (const auto& r : j.value("planted_rules", nlohmann::json::array()))
      c.planted_rules.push_back({r.at("id").get<std::string>(),
                                 detail::parse_label(r.at("intervention").get<std::string>()),
                                 r.at("predicate")});
    if (j.contains("discretion")) {
      const auto& d = j["discretion"];
      c.discretion.rate = d.value("rate", 0.0);
      c.discretion.targeting.clear();
      for (const auto& t : d.value("targeting", nlohmann::json::array({"uniform"})))
        c.discretion.targeting.insert(detail::parse_targeting(t.get<std::string>()));
      c.discretion.vs_cutoff = d.value("vs_cutoff", 1);
      c.discretion.mb_threshold = d.value("mb_threshold", 0.15);
    }
    if (j.contains("outcome")) {
      const auto& o = j["outcome"];
      c.outcome.base_reentry_es = o.value("base_reentry_es", c.outcome.base_reentry_es);
      c.outcome.vs_slope = o.value("vs_slope", c.outcome.vs_slope);
      c.outcome.benefit_spread = o.value("benefit_spread", c.outcome.benefit_spread);
      c.outcome.benefit_baseline = o.value("benefit_baseline", c.outcome.benefit_baseline);
      c.outcome.noise = o.value("noise", c.outcome.noise);
      if (o.contains("benefit_terms"))
        for (auto it = o["benefit_terms"].begin(); it != o["benefit_terms"].end(); ++it)
          c.outcome.benefit_terms.emplace_back(it.key(), it.value().get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidConfig, std::string("generator config: ") + e.what());
  }
  return c;
}

inline nlohmann::json to_json(const GeneratorConfig& c, const Schema& schema) {
  using nlohmann::json;
  json shares = json::object(), icpt = json::object(), coefs = json::object();
  for (auto i : kReportOrder) {
    shares[std::string(to_string(i))] = c.target_shares[index_of(i)];
    icpt[std::string(to_string(i))] = c.intercepts[index_of(i)];
    if (c.coefficients[index_of(i)].empty()) continue;
    json rows = json::array();
    for (const auto& r : c.coefficients[index_of(i)])
      rows.push_back({{"term", r.term}, {"odds_ratio", r.odds_ratio}, {"lower_ci", r.lower_ci}});
    coefs[std::string(to_string(i))] = rows;
  }
  json marg = json::object();
  for (const auto& [name, m] : c.marginals) marg[name] = detail::marginal_to_json(m, schema[schema.index(name)]);
  json rules = json::array();
  for (const auto& r : c.planted_rules)
    rules.push_back({{"id", r.id}, {"intervention", to_string(r.intervention)}, {"predicate", r.predicate}});
  json targeting = json::array();
  for (auto t : c.discretion.targeting) targeting.push_back(detail::targeting_name(t));
  json benefit = json::object();
  for (const auto& [k, v] : c.outcome.benefit_terms) benefit[k] = v;
  return {{"n", c.n},
          {"seed", c.seed},
          {"target_shares", shares},
          {"calibrate", c.calibrate},
          {"intercepts", icpt},
          {"marginals", marg},
          {"coefficients", coefs},
          {"planted_rules", rules},
          {"discretion",
           {{"rate", c.discretion.rate},
            {"targeting", targeting},
            {"vs_cutoff", c.discretion.vs_cutoff},
            {"mb_threshold", c.discretion.mb_threshold}}},
          {"outcome",
           {{"base_reentry_es", c.outcome.base_reentry_es},
            {"vs_slope", c.outcome.vs_slope},
            {"benefit_spread", c.outcome.benefit_spread},
            {"benefit_baseline", c.outcome.benefit_baseline},
            {"benefit_terms", benefit},
            {"noise", c.outcome.noise}}}};
}

inline GeneratorConfig load_generator_config(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::InvalidConfig, "cannot open generator config '" + path + "'");
  try {
    return generator_config_from_json(nlohmann::json::parse(in), schema);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::InvalidConfig, "generator config '" + path + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Defaults over the built-in schema

/// Marginals, odds-ratio table, planted rules and outcome model used by the
/// shipped benchmark. Shares for binary and categorical features follow the
/// published "ratio satisfying" column where one exists.
inline GeneratorConfig default_generator_config() {
  GeneratorConfig c;
  c.n = 12715;
  c.seed = 20130601;
  using K = Marginal::Kind;
  auto bern = [](double p) { Marginal m; m.kind = K::Bernoulli; m.p = p; return m; };
  auto cat = [](std::vector<double> w) { Marginal m; m.kind = K::Categorical; m.weights = std::move(w); return m; };
  auto geo = [](double p, double hi) { Marginal m; m.kind = K::Geometric; m.p = p; m.hi = hi; return m; };
  auto derived = [] { return Marginal{}; };
  // Yes / No / doesn't know / refused / not collected
  auto yes5 = [&](double yes) { return cat({yes, 0.97 - yes, 0.01, 0.01, 0.01}); };

  auto& m = c.marginals;
  m.emplace_back("HUDChronicHomeless", bern(0.002));
  m.emplace_back("Gender", bern(0.35));  // 1 = Male
  m.emplace_back("SpousePresent", bern(0.04));
  m.emplace_back("PrimaryRace", cat({0.151, 0.833, 0.004, 0.003, 0.002, 0.004, 0.003}));
  m.emplace_back("Ethnicity", cat({0.90, 0.08, 0.01, 0.005, 0.005}));
  {
    // Listed shares; the remaining levels split what is left.
    Marginal pr;
    pr.kind = K::Categorical;
    const auto& lv = levels::kPriorResidence;
    const std::vector<std::pair<std::string, double>> listed = {
        {"Emergency shelter", 0.133},
        {"Transitional housing for homeless persons", 0.068},
        {"Place not meant for habitation", 0.053},
        {"Staying or living in a family members room", 0.125},
        {"Staying or living in a friends room", 0.035},
        {"Rental by client no ongoing housing subsidy", 0.197},
        {"Rental by client with other ongoing housing subsidy", 0.016},
        {"Owned by client no ongoing housing subsidy", 0.121},
        {"Hotel or motel paid for without emergency shelter voucher", 0.007},
        {"Substance abuse treatment facility or detox center", 0.084},
        {"Jail prison or juvenile detention facility", 0.02},
        {"Other", 0.031},
        {"Client doesnt know", 0.023},
        {"Client refused", 0.063},
    };
    pr.weights.assign(lv.size(), -1.0);
    double used = 0.0;
    for (const auto& [name, w] : listed) {
      pr.weights[static_cast<std::size_t>(std::find(lv.begin(), lv.end(), name) - lv.begin())] = w;
      used += w;
    }
    const double rest = (1.0 - used) / static_cast<double>(lv.size() - listed.size());
    for (auto& w : pr.weights)
      if (w < 0.0) w = rest;
    m.emplace_back("PriorResidence", pr);
  }
  m.emplace_back("VeteranStatus", yes5(0.10));
  m.emplace_back("DisablingCondition", cat({0.126, 0.834, 0.04}));
  m.emplace_back("ReceivePhysicalDisabilityServices", yes5(0.042));
  m.emplace_back("HasDevelopmentalDisability", yes5(0.03));
  m.emplace_back("ReceiveDevelopmentalDisabilityServices", yes5(0.02));
  m.emplace_back("HasChronicHealthCondition", yes5(0.188));
  m.emplace_back("ReceiveChronicHealthServices", yes5(0.086));
  m.emplace_back("HasHIVAIDS", yes5(0.01));
  m.emplace_back("ReceiveHIVAIDSServices", yes5(0.008));
  m.emplace_back("HasMentalHealthProblem", yes5(0.185));
  m.emplace_back("ReceiveMentalHealthServices", yes5(0.09));
  m.emplace_back("HasSubstanceAbuseProblem", yes5(0.065));
  m.emplace_back("ReceiveSubstanceAbuseServices", yes5(0.072));
  m.emplace_back("DomesticViolenceSurvivor", yes5(0.12));
  {
    Marginal age;
    age.kind = K::Normal;
    age.mean = 37.0;
    age.sd = 12.0;
    age.lo = 18.0;
    age.hi = 80.0;
    age.round = true;
    m.emplace_back("Age", age);
  }
  m.emplace_back("Calls", geo(0.3, 40));
  m.emplace_back("Wait", geo(0.12, 180));
  m.emplace_back("RatioOfNumCallstoWaitTime", derived());
  {
    Marginal amt;
    amt.kind = K::LogNormal;
    amt.mu = 6.6;
    amt.sigma = 0.7;
    amt.zero_prob = 0.3;
    amt.round = true;
    m.emplace_back("MonthlyAmount", amt);
  }
  m.emplace_back("numMembers", derived());
  m.emplace_back("Children", derived());
  for (const char* band : {"Children0_2", "Children3_5", "Children6_10", "Children11_14", "Children15_17"})
    m.emplace_back(band, geo(0.85, 6));
  m.emplace_back("UnrelatedChildren", geo(0.95, 4));
  m.emplace_back("UnrelatedAdults", geo(0.9, 4));

  auto& es = c.coefficients[index_of(Intervention::ES)];
  es = {{"Gender=Female", 8.91, 8.88},
        {"PriorResidence=Substance abuse treatment facility or detox center", 1.85, 1.84},
        {"PriorResidence=Transitional housing for homeless persons", 1.74, 1.73},
        {"PriorResidence=Client refused", 1.69, 1.68},
        {"PrimaryRace=White", 1.22, 1.22},
        {"Calls", 1.05, 1.05},
        {"Children6_10", 1.05, 1.05},
        {"HasSubstanceAbuseProblem=Yes", 1.03, 1.03},
        {"ReceivePhysicalDisabilityServices=Yes", 1.02, 1.02},
        {"Age", 1.01, 1.01},
        {"RatioOfNumCallstoWaitTime", 1.0, 1.0},
        {"MonthlyAmount", 1.0, 1.0},
        {"Wait", 1.0, 1.0},
        {"Children", 0.96, 0.96},
        {"ReceiveChronicHealthServices=Yes", 0.932, 0.931},
        {"DisablingCondition=Yes", 0.903, 0.902},
        {"HasChronicHealthCondition=Yes", 0.868, 0.865},
        {"PriorResidence=Staying or living in a family members room", 0.67, 0.663},
        {"Children15_17", 0.551, 0.541},
        {"ReceiveSubstanceAbuseServices=Yes", 0.459, 0.446},
        {"PriorResidence=Staying or living in a friends room", 0.101, 0.0649},
        {"PriorResidence=Place not meant for habitation", 0.0768, 0.0361},
        {"PriorResidence=Client doesnt know", 0.0349, -0.0183},
        {"HUDChronicHomeless", 0.0334, -0.0204},
        {"PriorResidence=Rental by client with other ongoing housing subsidy", 0.0269, -0.0304},
        {"PriorResidence=Rental by client no ongoing housing subsidy", 0.00304, -0.0887},
        {"PriorResidence=Owned by client no ongoing housing subsidy", 0.00257, -0.0918}};
  auto& th = c.coefficients[index_of(Intervention::TH)];
  th = {{"Gender=Male", 11.4, 11.3},
        {"PriorResidence=Client doesnt know", 7.21, 7.07},
        {"PriorResidence=Place not meant for habitation", 3.13, 3.05},
        {"ReceiveSubstanceAbuseServices=Yes", 2.29, 2.24},
        {"HUDChronicHomeless", 2.2, 2.14},
        {"Children0_2", 2.18, 2.12},
        {"PriorResidence=Other", 2.1, 2.05},
        {"PriorResidence=Staying or living in a friends room", 1.81, 1.77},
        {"Children", 1.42, 1.39},
        {"DisablingCondition=No", 1.37, 1.35},
        {"PriorResidence=Client refused", 1.36, 1.34},
        {"PriorResidence=Hotel or motel paid for without emergency shelter voucher", 1.36, 1.34},
        {"PriorResidence=Emergency shelter", 1.35, 1.33},
        {"PriorResidence=Staying or living in a family members room", 1.26, 1.25},
        {"PriorResidence=Substance abuse treatment facility or detox center", 1.25, 1.24},
        {"PriorResidence=Transitional housing for homeless persons", 1.1, 1.09},
        {"PrimaryRace=Black", 1.04, 1.04},
        {"Calls", 1.02, 1.01},
        {"RatioOfNumCallstoWaitTime", 1.01, 1.01},
        {"Wait", 1.0, 1.0},
        {"MonthlyAmount", 0.999, 0.999},
        {"Age", 0.969, 0.967},
        {"PrimaryRace=White", 0.853, 0.842},
        {"HasMentalHealthProblem=Yes", 0.611, 0.576},
        {"numMembers", 0.485, 0.434},
        {"SpousePresent", 0.344, 0.269},
        {"PriorResidence=Owned by client no ongoing housing subsidy", 0.105, -0.053},
        {"PriorResidence=Rental by client no ongoing housing subsidy", 0.0811, -0.0955}};

  using nlohmann::json;
  c.planted_rules = {
      {"prev_housed_no_subsidy", Intervention::Prev,
       {{"feature", "PriorResidence"},
        {"op", "in"},
        {"values", {"Rental by client no ongoing housing subsidy", "Owned by client no ongoing housing subsidy"}}}},
      {"rrh_older_with_income", Intervention::RRH,
       {{"all",
         {{{"feature", "Age"}, {"op", "ge"}, {"value", 45}},
          {{"feature", "MonthlyAmount"}, {"op", "gt"}, {"value", 1200}}}}}},
      {"th_low_income_male", Intervention::TH,
       {{"all",
         {{{"feature", "Gender"}, {"op", "eq"}, {"value", "Male"}},
          {{"feature", "MonthlyAmount"}, {"op", "le"}, {"value", 666.5}}}}}},
      {"es_urgent_female", Intervention::ES,
       {{"all",
         {{{"feature", "Gender"}, {"op", "eq"}, {"value", "Female"}},
          {{"feature", "RatioOfNumCallstoWaitTime"}, {"op", "gt"}, {"value", 0.5}}}}}},
  };
  c.discretion.rate = 0.05;
  c.discretion.targeting = {Targeting::LowVulnerability, Targeting::HighMbEsToTh};
  c.discretion.vs_cutoff = 1;
  c.discretion.mb_threshold = 0.1;
  c.outcome.benefit_terms = {{"VeteranStatus=Yes", 0.6}, {"Ethnicity=Hispanic", 0.3}};
  return c;
}

// ---------------------------------------------------------------------------
// Generation

namespace detail {

inline double draw(Rng& rng, const Marginal& m, const FeatureSpec& f) {
  double v = 0.0;
  switch (m.kind) {
    case Marginal::Kind::Bernoulli: v = bernoulli(rng, m.p) ? 1.0 : 0.0; break;
    case Marginal::Kind::Categorical: {
      if (m.weights.size() != f.levels.size())
        fail(ErrorKind::InvalidConfig, "weights for '" + f.name + "' do not match its levels");
      v = static_cast<double>(categorical(rng, m.weights));
      break;
    }
    case Marginal::Kind::Normal: v = normal(rng, m.mean, m.sd); break;
    case Marginal::Kind::LogNormal:
      v = bernoulli(rng, m.zero_prob) ? 0.0 : std::exp(normal(rng, m.mu, m.sigma));
      break;
    case Marginal::Kind::Geometric: v = static_cast<double>(geometric(rng, m.p)); break;
    case Marginal::Kind::Derived: break;
  }
  if (m.round) v = std::round(v);
  return std::clamp(v, m.lo, m.hi);
}

struct Compiled {
  std::vector<const Marginal*> marginal;  // by schema index
  std::array<std::vector<Term>, kNumInterventions> terms;
  std::vector<std::pair<Predicate, Intervention>> rules;
  std::vector<Term> benefit;
  std::size_t children = 0, members = 0, ratio = 0, calls = 0, wait = 0, spouse = 0;
  std::vector<std::size_t> bands;
};

inline Compiled compile(const GeneratorConfig& c, const Schema& schema) {
  Compiled k;
  k.marginal.assign(schema.size(), nullptr);
  for (const auto& [name, m] : c.marginals) {
    const auto idx = schema.find(name);
    if (!idx) fail(ErrorKind::InvalidConfig, "marginal for unknown feature '" + name + "'");
    if (m.kind == Marginal::Kind::Derived && !is_derived_feature(name))
      fail(ErrorKind::InvalidConfig, "feature '" + name + "' cannot be derived");
    if (m.kind == Marginal::Kind::Categorical && schema[*idx].kind != FeatureKind::Categorical)
      fail(ErrorKind::InvalidConfig, "categorical marginal on non-categorical '" + name + "'");
    k.marginal[*idx] = &m;
  }
  for (std::size_t i = 0; i < schema.size(); ++i)
    if (!k.marginal[i]) fail(ErrorKind::InvalidConfig, "no marginal for feature '" + schema[i].name + "'");
  for (std::size_t l = 0; l < kNumInterventions; ++l)
    for (const auto& row : c.coefficients[l]) k.terms[l].push_back(resolve_term(schema, row.term, row.coefficient()));
  for (const auto& r : c.planted_rules) {
    try {
      k.rules.emplace_back(compile_predicate(r.predicate, schema), r.intervention);
    } catch (const Error& e) {
      fail(ErrorKind::InvalidConfig, "planted rule '" + r.id + "': " + e.what());
    }
  }
  for (const auto& [name, w] : c.outcome.benefit_terms) k.benefit.push_back(resolve_term(schema, name, w));
  auto need = [&](const char* name) {
    const auto idx = schema.find(name);
    if (!idx) fail(ErrorKind::InvalidConfig, std::string("generator needs feature '") + name + "'");
    return *idx;
  };
  k.children = need("Children");
  k.members = need("numMembers");
  k.ratio = need("RatioOfNumCallstoWaitTime");
  k.calls = need("Calls");
  k.wait = need("Wait");
  k.spouse = need("SpousePresent");
  for (const char* b : {"Children0_2", "Children3_5", "Children6_10", "Children11_14", "Children15_17"})
    k.bands.push_back(need(b));
  return k;
}

inline void validate(const GeneratorConfig& c) {
  if (c.n == 0) fail(ErrorKind::InvalidConfig, "n must be positive");
  double total = 0.0;
  for (double s : c.target_shares) {
    if (!(s > 0.0 && s < 1.0)) fail(ErrorKind::InvalidConfig, "target shares must lie in (0, 1)");
    total += s;
  }
  if (std::abs(total - 1.0) > 1e-6) fail(ErrorKind::InvalidConfig, "target shares must sum to 1");
  const auto& d = c.discretion;
  if (!(d.rate >= 0.0 && d.rate <= 1.0)) fail(ErrorKind::InvalidConfig, "discretion rate must lie in [0, 1]");
  if (d.targeting.empty()) fail(ErrorKind::InvalidConfig, "discretion targeting must be nonempty");
  if (d.targeting.count(Targeting::Uniform) && d.targeting.size() > 1)
    fail(ErrorKind::InvalidConfig, "uniform targeting cannot be combined with other modes");
  const auto& o = c.outcome;
  for (double p : {o.base_reentry_es, o.benefit_spread, o.benefit_baseline, o.noise})
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorKind::InvalidConfig, "outcome parameters must lie in [0, 1]");
  for (const auto& [name, m] : c.marginals) {
    if ((m.kind == Marginal::Kind::Bernoulli || m.kind == Marginal::Kind::Geometric) &&
        !(m.p >= 0.0 && m.p <= 1.0))
      fail(ErrorKind::InvalidConfig, "probability out of range for '" + name + "'");
    if (m.kind == Marginal::Kind::Geometric && m.p <= 0.0)
      fail(ErrorKind::InvalidConfig, "geometric p must be positive for '" + name + "'");
    if (!(m.missing_rate >= 0.0 && m.missing_rate < 1.0))
      fail(ErrorKind::InvalidConfig, "missing_rate out of range for '" + name + "'");
  }
}

/// Per-record quantities that do not depend on the intercepts.
struct RecordState {
  int rule = -1;
  std::array<double, kNumInterventions> linear{};  // sum of terms per label
  bool eligible_es = false;  // pre ES may flip to TH
  bool eligible_th = false;  // pre TH may flip to ES
};

inline std::array<double, kNumInterventions> pre_probs(const RecordState& s, const Compiled& k,
                                                         const std::array<double, kNumInterventions>& icpt) {
  std::array<double, kNumInterventions> p{};
  if (s.rule >= 0) {
    p[index_of(k.rules[static_cast<std::size_t>(s.rule)].second)] = 1.0;
    return p;
  }
  double mx = -HUGE_VAL;
  for (std::size_t l = 0; l < kNumInterventions; ++l) mx = std::max(mx, icpt[l] + s.linear[l]);
  double z = 0.0;
  for (std::size_t l = 0; l < kNumInterventions; ++l) z += p[l] = std::exp(icpt[l] + s.linear[l] - mx);
  for (auto& x : p) x /= z;
  return p;
}

inline std::array<double, kNumInterventions> actual_probs(std::array<double, kNumInterventions> p,
                                                            const RecordState& s, double q) {
  const auto es = index_of(Intervention::ES), th = index_of(Intervention::TH);
  const double to_th = s.eligible_es ? q * p[es] : 0.0;
  const double to_es = s.eligible_th ? q * p[th] : 0.0;
  p[es] += to_es - to_th;
  p[th] += to_th - to_es;
  return p;
}

/// Flip probability giving rate * n expected flips.
inline double flip_probability(const std::vector<RecordState>& states, const Compiled& k,
                               const std::array<double, kNumInterventions>& icpt, double rate) {
  if (rate == 0.0) return 0.0;
  double expected = 0.0;
  for (const auto& s : states) {
    const auto p = pre_probs(s, k, icpt);
    if (s.eligible_es) expected += p[index_of(Intervention::ES)];
    if (s.eligible_th) expected += p[index_of(Intervention::TH)];
  }
  const double q = rate * static_cast<double>(states.size()) / expected;
  if (!(q <= 1.0))
    fail(ErrorKind::InvalidConfig, "discretion rate is unattainable: only " +
                                       std::to_string(expected / static_cast<double>(states.size())) +
                                       " of records are expected to be eligible");
  return q;
}

}  // namespace detail

/// Deterministic in (cfg, schema). Record i draws from streams derived from
/// (seed, i), so records do not depend on each other except through the
/// calibrated intercepts and the shared flip probability.
inline SyntheticData generate(const GeneratorConfig& cfg, const Schema& schema = default_schema()) {
  detail::validate(cfg);
  const auto k = detail::compile(cfg, schema);
  const VulnerabilityScorer scorer(schema);
  const auto& d = cfg.discretion;
  const bool uniform = d.targeting.count(Targeting::Uniform) > 0;
  const bool low_vs = d.targeting.count(Targeting::LowVulnerability) > 0;
  const bool high_mb = d.targeting.count(Targeting::HighMbEsToTh) > 0;
  const auto& o = cfg.outcome;

  SyntheticData out;
  out.records.resize(cfg.n);
  out.truth.resize(cfg.n);
  std::vector<detail::RecordState> states(cfg.n);
  const int width = static_cast<int>(std::to_string(cfg.n).size());

  for (std::size_t i = 0; i < cfg.n; ++i) {
    auto rng = make_rng(cfg.seed, {0xfea7, i});
    auto& rec = out.records[i];
    std::string id = std::to_string(i + 1);
    rec.id = "H" + std::string(static_cast<std::size_t>(width) - id.size(), '0') + id;
    rec.values.assign(schema.size(), std::nullopt);
    for (std::size_t f = 0; f < schema.size(); ++f) {
      const auto& m = *k.marginal[f];
      if (m.kind == Marginal::Kind::Derived) continue;
      const double v = detail::draw(rng, m, schema[f]);
      // The missingness draw always happens so streams stay aligned.
      if (!bernoulli(rng, m.missing_rate)) rec.values[f] = v;
    }
    auto val = [&](std::size_t f) { return rec.values[f].value_or(0.0); };
    double children = 0.0;
    for (auto b : k.bands) children += val(b);
    if (k.marginal[k.children]->kind == Marginal::Kind::Derived) rec.values[k.children] = children;
    if (k.marginal[k.members]->kind == Marginal::Kind::Derived)
      rec.values[k.members] = 1.0 + val(k.spouse) + val(k.children);
    if (k.marginal[k.ratio]->kind == Marginal::Kind::Derived)
      rec.values[k.ratio] = calls_to_wait_ratio(val(k.calls), val(k.wait));

    auto& t = out.truth[i];
    t.id = rec.id;
    t.vulnerability = scorer.score(rec).total;
    double b = o.benefit_baseline;
    for (const auto& term : k.benefit) b += term.eval(rec);
    const double benefit = o.benefit_spread * std::clamp(b, 0.0, 1.0);
    t.p_reentry_es = std::clamp(o.base_reentry_es + o.vs_slope * t.vulnerability, 0.0, 1.0);
    t.p_reentry_th = std::clamp(t.p_reentry_es - benefit, 0.0, 1.0);

    auto& s = states[i];
    for (std::size_t r = 0; r < k.rules.size(); ++r)
      if (k.rules[r].first.eval(rec) == Tri::True) {
        s.rule = static_cast<int>(r);
        break;
      }
    for (std::size_t l = 0; l < kNumInterventions; ++l)
      for (const auto& term : k.terms[l]) s.linear[l] += term.eval(rec);
    if (d.rate > 0.0) {
      const bool vs_ok = !low_vs || t.vulnerability <= d.vs_cutoff;
      const bool mb_ok = !high_mb || t.p_reentry_es - t.p_reentry_th >= d.mb_threshold;
      s.eligible_es = uniform || (vs_ok && mb_ok);
      s.eligible_th = uniform || vs_ok;
    }
    if (s.rule >= 0) t.rule = cfg.planted_rules[static_cast<std::size_t>(s.rule)].id;
  }

  // Fit the intercepts so expected actual-label shares hit the targets.
  auto icpt = cfg.intercepts;
  double q = 0.0;
  auto expected_shares = [&] {
    std::array<double, kNumInterventions> sh{};
    for (const auto& s : states) {
      const auto p = detail::actual_probs(detail::pre_probs(s, k, icpt), s, q);
      for (std::size_t l = 0; l < kNumInterventions; ++l) sh[l] += p[l];
    }
    for (auto& x : sh) x /= static_cast<double>(states.size());
    return sh;
  };
  if (cfg.calibrate) {
    for (int it = 0; it < 500; ++it) {
      q = detail::flip_probability(states, k, icpt, d.rate);
      const auto sh = expected_shares();
      double worst = 0.0;
      for (std::size_t l = 0; l < kNumInterventions; ++l) {
        if (sh[l] <= 0.0) fail(ErrorKind::InvalidConfig, "a label can never occur; cannot calibrate");
        const double step = std::log(cfg.target_shares[l] / sh[l]);
        worst = std::max(worst, std::abs(step));
        icpt[l] += step;
      }
      const double ref = icpt[index_of(Intervention::Prev)];
      for (auto& a : icpt) a -= ref;
      if (worst < 1e-10) break;
    }
  }
  q = detail::flip_probability(states, k, icpt, d.rate);
  out.intercepts = icpt;
  out.flip_probability = q;
  out.expected_shares = expected_shares();

  for (std::size_t i = 0; i < cfg.n; ++i) {
    const auto& s = states[i];
    auto& t = out.truth[i];
    auto& rec = out.records[i];
    const auto pre = detail::pre_probs(s, k, icpt);
    t.probs = detail::actual_probs(pre, s, q);

    auto rng = make_rng(cfg.seed, {0x1abe, i});
    t.pre_discretion = static_cast<Intervention>(categorical(rng, pre));
    t.eligible = (t.pre_discretion == Intervention::ES && s.eligible_es) ||
                 (t.pre_discretion == Intervention::TH && s.eligible_th);
    const double u = uniform01(rng);
    t.flipped = t.eligible && u < q;
    rec.actual = t.pre_discretion;
    if (t.flipped) rec.actual = t.pre_discretion == Intervention::ES ? Intervention::TH : Intervention::ES;

    auto noise = make_rng(cfg.seed, {0x2015e, i});
    const double e1 = (2.0 * uniform01(noise) - 1.0) * o.noise;
    const double e2 = (2.0 * uniform01(noise) - 1.0) * o.noise;
    rec.p_reentry_es = std::clamp(t.p_reentry_es + e1, 0.0, 1.0);
    rec.p_reentry_th = std::clamp(t.p_reentry_th + e2, 0.0, 1.0);
  }
  return out;
}

/// AUC of the true probabilities of target against the one-vs-all actual
/// labels, optionally restricted to some rows.
inline double bayes_auc(const SyntheticData& data, Intervention target,
                        std::span<const std::size_t> rows = {}) {
  std::vector<double> s;
  std::vector<int> y;
  auto add = [&](std::size_t i) {
    s.push_back(data.truth[i].probs[index_of(target)]);
    y.push_back(data.records[i].actual == target ? 1 : 0);
  };
  if (rows.empty())
    for (std::size_t i = 0; i < data.records.size(); ++i) add(i);
  else
    for (auto i : rows) add(i);
  return auc(s, y);
}

inline void write_ground_truth_csv(std::ostream& out, const std::vector<TruthRow>& truth) {
  csv::write_row(out, {"id", "rule", "pre_discretion", "eligible", "flipped", "prob_ES", "prob_TH",
                       "prob_RRH", "prob_Prev", "true_p_reentry_es", "true_p_reentry_th", "vulnerability"});
  for (const auto& t : truth) {
    csv::write_row(out, {t.id, t.rule.value_or(""), std::string(to_string(t.pre_discretion)),
                         t.eligible ? "1" : "0", t.flipped ? "1" : "0",
                         csv::format_double(t.probs[index_of(Intervention::ES)]),
                         csv::format_double(t.probs[index_of(Intervention::TH)]),
                         csv::format_double(t.probs[index_of(Intervention::RRH)]),
                         csv::format_double(t.probs[index_of(Intervention::Prev)]),
                         csv::format_double(t.p_reentry_es), csv::format_double(t.p_reentry_th),
                         std::to_string(t.vulnerability)});
  }
}

}  // namespace caseflow
