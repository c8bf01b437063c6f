#pragma once

#include <cstdint>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "caseflow/csv.hpp"
#include "caseflow/encoding.hpp"
#include "caseflow/tree.hpp"

namespace caseflow {

struct Condition {
  std::size_t column = 0;
  bool goes_left = true;  // value <= threshold
  double threshold = 0.0;
  std::string text;
};

struct Rule {
  std::vector<Condition> conditions;  // root first
  bool positive = false;              // predicted class of the leaf
  std::string outcome;                // e.g. "TH" or "not TH"
  std::uint64_t support = 0;          // training rows reaching the leaf
  double confidence = 0.0;            // share of the predicted class in the leaf
};

namespace detail {

inline std::string format_threshold(double v, const std::string& units) {
  std::ostringstream os;
  os.precision(10);
  if (units == "dollars") {
    os << '$' << v;
  } else {
    os << v;
    if (units != "none" && units != "count" && !units.empty()) os << ' ' << units;
  }
  return os.str();
}

/// One-hot columns read "feature = level" / "feature ≠ level"; binary columns
/// use their declared labels when present.
inline std::string render_condition(const ColumnInfo& col, const Schema& schema, bool goes_left,
                                    double threshold) {
  const auto& f = schema[col.feature];
  if (col.level) {
    const auto& level = f.levels[*col.level];
    const bool member_left = threshold >= 1.0;  // one-hot values are 0/1
    const bool member = goes_left ? member_left : !member_left;
    return f.name + (member ? " = " : " ≠ ") + level;
  }
  if (f.kind == FeatureKind::Binary && threshold > 0.0 && threshold < 1.0) {
    const bool value = !goes_left;
    if (f.levels.size() == 2) return f.name + " = " + f.levels[value ? 1 : 0];
    return f.name + " = " + (value ? "1" : "0");
  }
  return f.name + (goes_left ? " ≤ " : " > ") + format_threshold(threshold, f.units);
}

}  // namespace detail

/// One rule per leaf with at least min_support training rows, in left-first
/// depth-first order. columns describes the tree's input columns.
inline std::vector<Rule> extract_rules(const Tree& tree, const std::vector<ColumnInfo>& columns,
                                       const Schema& schema, std::uint64_t min_support,
                                       const std::string& target = "positive") {
  std::vector<Rule> out;
  std::vector<Condition> path;
  auto walk = [&](auto&& self, int id) -> void {
    const auto& n = tree.nodes[static_cast<std::size_t>(id)];
    if (n.is_leaf()) {
      if (n.n_samples < min_support) return;
      Rule r;
      r.conditions = path;
      r.support = n.n_samples;
      r.positive = n.value >= 0.5;
      r.outcome = r.positive ? target : "not " + target;
      r.confidence = r.positive ? n.value : 1.0 - n.value;
      out.push_back(std::move(r));
      return;
    }
    const auto col = static_cast<std::size_t>(n.feature);
    for (bool left : {true, false}) {
      path.push_back({col, left, n.threshold,
                      detail::render_condition(columns.at(col), schema, left, n.threshold)});
      self(self, left ? n.left : n.right);
      path.pop_back();
    }
  };
  walk(walk, 0);
  return out;
}

inline std::string render_rule(const Rule& r) {
  std::string s;
  if (r.conditions.empty()) s = "(always)";
  for (std::size_t i = 0; i < r.conditions.size(); ++i) {
    if (i) s += " AND ";
    s += r.conditions[i].text;
  }
  return s + " → " + r.outcome;
}

inline void write_rules_text(std::ostream& out, const std::vector<Rule>& rules) {
  for (const auto& r : rules) {
    std::ostringstream conf;
    conf.precision(4);
    conf << r.confidence;
    out << render_rule(r) << "  [support " << r.support << ", confidence " << conf.str() << "]\n";
  }
}

inline void write_rules_csv(std::ostream& out, const std::vector<Rule>& rules) {
  csv::write_row(out, {"rule", "conditions", "outcome", "support", "confidence"});
  for (std::size_t i = 0; i < rules.size(); ++i) {
    std::string cond;
    for (std::size_t c = 0; c < rules[i].conditions.size(); ++c) {
      if (c) cond += " AND ";
      cond += rules[i].conditions[c].text;
    }
    csv::write_row(out, {std::to_string(i + 1), cond, rules[i].outcome,
                         std::to_string(rules[i].support), csv::format_double(rules[i].confidence)});
  }
}

}  // namespace caseflow
