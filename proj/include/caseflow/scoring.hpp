#pragma once

// Rule-based vulnerability score (0..7) and marginal benefit of TH over ES.
//
// Rules are JSON predicates evaluated with three-valued logic: a comparison
// on a missing field is unknown, and a rule fires only when its predicate is
// definitely true. Predicate forms:
//
//   {"feature": F, "op": "eq"|"ne"|"lt"|"le"|"gt"|"ge", "value": v}
//   {"feature": F, "op": "in"|"not_in", "values": [...]}
//   {"feature": F, "op": "affirmative"}
//   {"sum": [F, ...], "op": <comparison>, "value": x}
//   {"diff": [F, G], "op": <comparison>, "value": x}
//   {"all": [...]}, {"any": [...]}, {"not": p}
//
// Categorical values are level names, binary values are labels or 0/1.

#include <algorithm>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "caseflow/error.hpp"
#include "caseflow/records.hpp"
#include "caseflow/schema.hpp"

namespace caseflow {

enum class Tri { False, True, Unknown };

inline Tri tri_not(Tri t) {
  return t == Tri::Unknown ? Tri::Unknown : (t == Tri::True ? Tri::False : Tri::True);
}

enum class CompareOp { Eq, Ne, Lt, Le, Gt, Ge };

inline std::optional<CompareOp> parse_compare_op(const std::string& s) {
  if (s == "eq") return CompareOp::Eq;
  if (s == "ne") return CompareOp::Ne;
  if (s == "lt") return CompareOp::Lt;
  if (s == "le") return CompareOp::Le;
  if (s == "gt") return CompareOp::Gt;
  if (s == "ge") return CompareOp::Ge;
  return std::nullopt;
}

inline bool compare(double a, CompareOp op, double b) {
  switch (op) {
    case CompareOp::Eq: return a == b;
    case CompareOp::Ne: return a != b;
    case CompareOp::Lt: return a < b;
    case CompareOp::Le: return a <= b;
    case CompareOp::Gt: return a > b;
    case CompareOp::Ge: return a >= b;
  }
  return false;
}

/// A predicate resolved against a schema.
struct Predicate {
  enum class Kind { Compare, Member, Sum, Diff, All, Any, Not } kind = Kind::All;
  std::vector<std::size_t> features;
  CompareOp op = CompareOp::Eq;
  double value = 0.0;
  std::vector<double> members;  // Member: accepted encoded values
  bool negate = false;          // Member: not_in
  std::vector<Predicate> children;

  Tri eval(const HouseholdRecord& r) const {
    switch (kind) {
      case Kind::Compare: {
        const auto& v = r.values[features[0]];
        if (!v) return Tri::Unknown;
        return compare(*v, op, value) ? Tri::True : Tri::False;
      }
      case Kind::Member: {
        const auto& v = r.values[features[0]];
        if (!v) return Tri::Unknown;
        const bool hit = std::find(members.begin(), members.end(), *v) != members.end();
        return hit != negate ? Tri::True : Tri::False;
      }
      case Kind::Sum:
      case Kind::Diff: {
        double acc = 0.0;
        for (std::size_t i = 0; i < features.size(); ++i) {
          const auto& v = r.values[features[i]];
          if (!v) return Tri::Unknown;
          acc += (kind == Kind::Diff && i > 0) ? -*v : *v;
        }
        return compare(acc, op, value) ? Tri::True : Tri::False;
      }
      case Kind::All: {
        Tri out = Tri::True;
        for (const auto& c : children) {
          const Tri t = c.eval(r);
          if (t == Tri::False) return Tri::False;
          if (t == Tri::Unknown) out = Tri::Unknown;
        }
        return out;
      }
      case Kind::Any: {
        Tri out = Tri::False;
        for (const auto& c : children) {
          const Tri t = c.eval(r);
          if (t == Tri::True) return Tri::True;
          if (t == Tri::Unknown) out = Tri::Unknown;
        }
        return out;
      }
      case Kind::Not: return tri_not(children[0].eval(r));
    }
    return Tri::Unknown;
  }
};

namespace detail {

inline std::size_t predicate_feature(const Schema& schema, const nlohmann::json& name) {
  const auto s = name.get<std::string>();
  const auto idx = schema.find(s);
  if (!idx) fail(ErrorKind::SchemaMismatch, "rule references unknown feature '" + s + "'");
  return *idx;
}

/// Encoded value of a literal for feature f: level index, binary 0/1, or number.
inline double predicate_literal(const FeatureSpec& f, const nlohmann::json& v) {
  if (f.kind == FeatureKind::Continuous) {
    if (!v.is_number()) fail(ErrorKind::SchemaMismatch, "rule value for '" + f.name + "' must be numeric");
    return v.get<double>();
  }
  if (v.is_number()) {
    if (f.kind == FeatureKind::Binary) return v.get<double>();
    fail(ErrorKind::SchemaMismatch, "rule value for '" + f.name + "' must be a level name");
  }
  const auto s = v.get<std::string>();
  if (auto i = f.level_index(s)) return static_cast<double>(*i);
  fail(ErrorKind::SchemaMismatch, "feature '" + f.name + "' has no level '" + s + "'");
}

inline CompareOp predicate_op(const nlohmann::json& j) {
  const auto s = j.at("op").get<std::string>();
  if (auto op = parse_compare_op(s)) return *op;
  fail(ErrorKind::InvalidConfig, "unknown comparison '" + s + "'");
}

}  // namespace detail

inline Predicate compile_predicate(const nlohmann::json& j, const Schema& schema) {
  Predicate p;
  try {
    if (j.contains("all") || j.contains("any")) {
      const bool all = j.contains("all");
      p.kind = all ? Predicate::Kind::All : Predicate::Kind::Any;
      for (const auto& c : j.at(all ? "all" : "any")) p.children.push_back(compile_predicate(c, schema));
      if (p.children.empty()) fail(ErrorKind::InvalidConfig, "empty all/any");
    } else if (j.contains("not")) {
      p.kind = Predicate::Kind::Not;
      p.children.push_back(compile_predicate(j.at("not"), schema));
    } else if (j.contains("sum") || j.contains("diff")) {
      const bool sum = j.contains("sum");
      p.kind = sum ? Predicate::Kind::Sum : Predicate::Kind::Diff;
      for (const auto& f : j.at(sum ? "sum" : "diff")) {
        const auto idx = detail::predicate_feature(schema, f);
        if (schema[idx].kind == FeatureKind::Categorical)
          fail(ErrorKind::SchemaMismatch, "cannot add categorical feature '" + schema[idx].name + "'");
        p.features.push_back(idx);
      }
      if (p.features.empty() || (!sum && p.features.size() != 2))
        fail(ErrorKind::InvalidConfig, "diff takes two features, sum at least one");
      p.op = detail::predicate_op(j);
      p.value = j.at("value").get<double>();
    } else if (j.contains("feature")) {
      const auto idx = detail::predicate_feature(schema, j.at("feature"));
      const auto& f = schema[idx];
      p.features = {idx};
      const auto op = j.at("op").get<std::string>();
      if (op == "affirmative") {
        p.kind = Predicate::Kind::Member;
        if (f.kind == FeatureKind::Binary) p.members = {1.0};
        for (const auto& a : f.affirmative) p.members.push_back(detail::predicate_literal(f, a));
        if (p.members.empty())
          fail(ErrorKind::SchemaMismatch, "feature '" + f.name + "' declares no affirmative levels");
      } else if (op == "in" || op == "not_in") {
        p.kind = Predicate::Kind::Member;
        p.negate = op == "not_in";
        for (const auto& v : j.at("values")) p.members.push_back(detail::predicate_literal(f, v));
      } else {
        p.kind = Predicate::Kind::Compare;
        p.op = detail::predicate_op(j);
        p.value = detail::predicate_literal(f, j.at("value"));
      }
    } else {
      fail(ErrorKind::InvalidConfig, "unrecognized predicate: " + j.dump());
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidConfig, std::string("predicate json: ") + e.what());
  }
  return p;
}

struct VulnerabilityRule {
  std::string id;
  std::string group;  // family, history, risks, wellness
  std::string description;
  nlohmann::json predicate;
};

struct ScoreBreakdown {
  int total = 0;
  std::vector<std::string> fired_rule_ids;
};

inline std::vector<VulnerabilityRule> rules_from_json(const nlohmann::json& j) {
  std::vector<VulnerabilityRule> out;
  try {
    for (const auto& r : j.at("rules"))
      out.push_back({r.at("id").get<std::string>(), r.at("group").get<std::string>(),
                     r.value("description", ""), r.at("predicate")});
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidConfig, std::string("rule set json: ") + e.what());
  }
  return out;
}

inline nlohmann::json to_json(const std::vector<VulnerabilityRule>& rules) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rules)
    arr.push_back({{"id", r.id}, {"group", r.group}, {"description", r.description},
                   {"predicate", r.predicate}});
  return {{"rules", arr}};
}

inline std::vector<VulnerabilityRule> load_rules(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::InvalidConfig, "cannot open rule file '" + path + "'");
  try {
    return rules_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::InvalidConfig, "rule file '" + path + "': " + e.what());
  }
}

/// The eight-criterion table over the default schema.
inline std::vector<VulnerabilityRule> default_vulnerability_rules() {
  using nlohmann::json;
  auto yes = [](const char* f) { return json{{"feature", f}, {"op", "affirmative"}}; };
  const json single_parent = {
      {"all",
       {{{"diff", {"numMembers", "Children"}}, {"op", "eq"}, {"value", 1}},
        {{"feature", "SpousePresent"}, {"op", "eq"}, {"value", "No"}}}}};
  const json child_11_or_younger = {
      {"sum", {"Children0_2", "Children3_5", "Children6_10"}}, {"op", "ge"}, {"value", 1}};
  const json child_6_or_younger = {{"sum", {"Children0_2", "Children3_5"}}, {"op", "ge"}, {"value", 1}};
  auto children_ge = [](int k) { return json{{"feature", "Children"}, {"op", "ge"}, {"value", k}}; };

  return {
      {"family_single_parent", "family",
       "Single parent with 2 or more children or a child aged 11 or younger",
       {{"all", {single_parent, {{"any", {children_ge(2), child_11_or_younger}}}}}}},
      {"family_not_single_parent", "family",
       "Not a single parent, with 3 or more children or a child aged 6 or younger",
       {{"all", {{{"not", single_parent}}, {{"any", {children_ge(3), child_6_or_younger}}}}}}},
      {"history_prior_residence", "history",
       "Prior residence other than emergency shelter, transitional housing or safe haven",
       {{"feature", "PriorResidence"},
        {"op", "not_in"},
        {"values", {"Emergency shelter", "Transitional housing for homeless persons", "Safe haven"}}}},
      {"history_chronic", "history", "Chronically homeless",
       {{"feature", "HUDChronicHomeless"}, {"op", "eq"}, {"value", "Yes"}}},
      {"risks_crisis_service", "risks", "Received any of the six listed services",
       {{"any",
         {yes("ReceivePhysicalDisabilityServices"), yes("ReceiveDevelopmentalDisabilityServices"),
          yes("ReceiveChronicHealthServices"), yes("ReceiveHIVAIDSServices"),
          yes("ReceiveMentalHealthServices"), yes("ReceiveSubstanceAbuseServices")}}}},
      {"risks_prison", "risks", "Prior residence is prison",
       {{"feature", "PriorResidence"}, {"op", "eq"}, {"value", "Jail prison or juvenile detention facility"}}},
      {"wellness_physical", "wellness",
       "Chronic health condition, HIV/AIDS with services, physical or developmental disability, "
       "or substance abuse problem",
       {{"any",
         {yes("HasChronicHealthCondition"),
          {{"all", {yes("HasHIVAIDS"), yes("ReceiveHIVAIDSServices")}}},
          yes("DisablingCondition"), yes("HasDevelopmentalDisability"),
          yes("HasSubstanceAbuseProblem")}}}},
      {"wellness_mental", "wellness", "Mental health problem or domestic violence survivor",
       {{"any", {yes("HasMentalHealthProblem"), yes("DomesticViolenceSurvivor")}}}},
  };
}

class VulnerabilityScorer {
 public:
  VulnerabilityScorer(const Schema& schema, std::vector<VulnerabilityRule> rules)
      : width_(schema.size()), rules_(std::move(rules)) {
    for (const auto& r : rules_) compiled_.push_back(compile_predicate(r.predicate, schema));
  }

  explicit VulnerabilityScorer(const Schema& schema)
      : VulnerabilityScorer(schema, default_vulnerability_rules()) {}

  ScoreBreakdown score(const HouseholdRecord& record) const {
    if (record.values.size() != width_)
      fail(ErrorKind::SchemaMismatch, "record has " + std::to_string(record.values.size()) +
                                          " values, schema has " + std::to_string(width_));
    ScoreBreakdown out;
    for (std::size_t i = 0; i < rules_.size(); ++i)
      if (compiled_[i].eval(record) == Tri::True) out.fired_rule_ids.push_back(rules_[i].id);
    out.total = static_cast<int>(out.fired_rule_ids.size());
    return out;
  }

  std::vector<double> totals(const std::vector<HouseholdRecord>& records) const {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(score(r).total);
    return out;
  }

  const std::vector<VulnerabilityRule>& rules() const { return rules_; }

 private:
  std::size_t width_;
  std::vector<VulnerabilityRule> rules_;
  std::vector<Predicate> compiled_;
};

/// Pr(reentry | ES) - Pr(reentry | TH).
inline double marginal_benefit(const HouseholdRecord& r) {
  if (!r.p_reentry_es || !r.p_reentry_th)
    fail(ErrorKind::MissingCounterfactuals, "record '" + r.id + "' lacks reentry probabilities");
  return *r.p_reentry_es - *r.p_reentry_th;
}

}  // namespace caseflow
