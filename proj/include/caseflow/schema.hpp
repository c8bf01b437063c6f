#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "caseflow/error.hpp"

namespace caseflow {

enum class FeatureKind { Binary, Categorical, Continuous };

inline std::string_view to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::Binary: return "binary";
    case FeatureKind::Categorical: return "categorical";
    case FeatureKind::Continuous: return "continuous";
  }
  return "?";
}

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::Continuous;
  // Categorical: the level list. Binary: optional {false label, true label}.
  std::vector<std::string> levels;
  std::string units = "none";
  // Empty or unparseable fields become missing when true; otherwise MalformedRow.
  bool allow_missing = true;
  // Categorical levels that count as "yes" for rule evaluation.
  std::vector<std::string> affirmative;

  bool operator==(const FeatureSpec&) const = default;

  std::optional<std::size_t> level_index(std::string_view level) const {
    for (std::size_t i = 0; i < levels.size(); ++i)
      if (levels[i] == level) return i;
    return std::nullopt;
  }
};

/// Ordered feature list with name lookup. Validated on construction.
class Schema {
 public:
  Schema() = default;

  explicit Schema(std::vector<FeatureSpec> features) : features_(std::move(features)) {
    for (std::size_t i = 0; i < features_.size(); ++i) {
      const auto& f = features_[i];
      if (f.name.empty()) fail(ErrorKind::InvalidConfig, "feature with empty name");
      if (!index_.emplace(f.name, i).second)
        fail(ErrorKind::InvalidConfig, "duplicate feature name '" + f.name + "'");
      std::set<std::string> seen(f.levels.begin(), f.levels.end());
      if (seen.size() != f.levels.size())
        fail(ErrorKind::InvalidConfig, "duplicate level in feature '" + f.name + "'");
      if (f.kind == FeatureKind::Categorical && f.levels.size() < 2)
        fail(ErrorKind::InvalidConfig, "categorical feature '" + f.name + "' needs >= 2 levels");
      if (f.kind == FeatureKind::Binary && !f.levels.empty() && f.levels.size() != 2)
        fail(ErrorKind::InvalidConfig, "binary feature '" + f.name + "' labels must be a pair");
      if (f.kind == FeatureKind::Continuous && !f.levels.empty())
        fail(ErrorKind::InvalidConfig, "continuous feature '" + f.name + "' cannot have levels");
      for (const auto& a : f.affirmative)
        if (!f.level_index(a))
          fail(ErrorKind::InvalidConfig,
               "affirmative level '" + a + "' not declared for '" + f.name + "'");
    }
  }

  std::size_t size() const noexcept { return features_.size(); }
  const FeatureSpec& operator[](std::size_t i) const { return features_[i]; }
  const std::vector<FeatureSpec>& features() const noexcept { return features_; }
  auto begin() const { return features_.begin(); }
  auto end() const { return features_.end(); }

  std::optional<std::size_t> find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t index(std::string_view name) const {
    auto i = find(name);
    if (!i) fail(ErrorKind::SchemaMismatch, "feature '" + std::string(name) + "' not in schema");
    return *i;
  }

  /// (#binary) + (#continuous) + sum of categorical level counts.
  std::size_t encoded_width() const {
    std::size_t w = 0;
    for (const auto& f : features_) w += f.kind == FeatureKind::Categorical ? f.levels.size() : 1;
    return w;
  }

  bool operator==(const Schema& o) const { return features_ == o.features_; }

 private:
  std::vector<FeatureSpec> features_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const FeatureSpec& f) {
  nlohmann::json j;
  j["name"] = f.name;
  j["kind"] = std::string(to_string(f.kind));
  if (!f.levels.empty()) j["levels"] = f.levels;
  j["units"] = f.units;
  j["allow_missing"] = f.allow_missing;
  if (!f.affirmative.empty()) j["affirmative"] = f.affirmative;
  return j;
}

inline FeatureSpec feature_from_json(const nlohmann::json& j) {
  try {
    FeatureSpec f;
    f.name = j.at("name").get<std::string>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "binary") f.kind = FeatureKind::Binary;
    else if (kind == "categorical") f.kind = FeatureKind::Categorical;
    else if (kind == "continuous") f.kind = FeatureKind::Continuous;
    else fail(ErrorKind::InvalidConfig, "unknown feature kind '" + kind + "'");
    f.levels = j.value("levels", std::vector<std::string>{});
    f.units = j.value("units", std::string("none"));
    f.allow_missing = j.value("allow_missing", true);
    f.affirmative = j.value("affirmative", std::vector<std::string>{});
    return f;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidConfig, std::string("schema entry: ") + e.what());
  }
}

inline nlohmann::json to_json(const Schema& s) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& f : s) arr.push_back(to_json(f));
  return nlohmann::json{{"features", arr}};
}

inline Schema schema_from_json(const nlohmann::json& j) {
  const auto& arr = j.is_array() ? j : j.at("features");
  std::vector<FeatureSpec> features;
  for (const auto& e : arr) features.push_back(feature_from_json(e));
  return Schema(std::move(features));
}

inline Schema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::InvalidConfig, "cannot open schema file '" + path + "'");
  try {
    return schema_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::InvalidConfig, "schema file '" + path + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// The 34-feature household schema: 3 binary, 17 categorical, 14 continuous.

namespace levels {

inline const std::vector<std::string> kYesNo5 = {"Yes", "No", "Client doesnt know",
                                                 "Client refused", "Data not collected"};

inline const std::vector<std::string> kPriorResidence = {
    "Emergency shelter",
    "Transitional housing for homeless persons",
    "Safe haven",
    "Place not meant for habitation",
    "Staying or living in a family members room",
    "Staying or living in a friends room",
    "Rental by client no ongoing housing subsidy",
    "Rental by client with other ongoing housing subsidy",
    "Rental by client with VASH subsidy",
    "Owned by client no ongoing housing subsidy",
    "Owned by client with ongoing housing subsidy",
    "Hotel or motel paid for without emergency shelter voucher",
    "Substance abuse treatment facility or detox center",
    "Psychiatric hospital or other psychiatric facility",
    "Hospital or other residential non-psychiatric medical facility",
    "Jail prison or juvenile detention facility",
    "Foster care home or foster care group home",
    "Long-term care facility or nursing home",
    "Permanent housing for formerly homeless persons",
    "Residential project or halfway house with no homeless criteria",
    "Interim housing",
    "Other",
    "Client doesnt know",
    "Client refused",
    "Data not collected",
};

inline const std::vector<std::string> kPrimaryRace = {
    "White",          "Black",          "Asian", "American Indian or Alaska Native",
    "Native Hawaiian or Pacific Islander", "Multiple races", "Unknown"};

inline const std::vector<std::string> kEthnicity = {
    "Non-Hispanic", "Hispanic", "Client doesnt know", "Client refused", "Data not collected"};

}  // namespace levels

inline Schema default_schema() {
  std::vector<FeatureSpec> f;
  auto binary = [&](std::string name, std::string no, std::string yes) {
    f.push_back({std::move(name), FeatureKind::Binary, {std::move(no), std::move(yes)}, "none", true, {}});
  };
  auto cat = [&](std::string name, std::vector<std::string> lv, std::vector<std::string> aff) {
    f.push_back({std::move(name), FeatureKind::Categorical, std::move(lv), "none", true,
                 std::move(aff)});
  };
  auto cont = [&](std::string name, std::string units) {
    f.push_back({std::move(name), FeatureKind::Continuous, {}, std::move(units), true, {}});
  };

  binary("HUDChronicHomeless", "No", "Yes");
  binary("Gender", "Female", "Male");
  binary("SpousePresent", "No", "Yes");

  cat("PrimaryRace", levels::kPrimaryRace, {});
  cat("Ethnicity", levels::kEthnicity, {});
  cat("PriorResidence", levels::kPriorResidence, {});
  cat("VeteranStatus", levels::kYesNo5, {"Yes"});
  cat("DisablingCondition", {"Yes", "No", "Unknown"}, {"Yes"});
  for (const char* name :
       {"ReceivePhysicalDisabilityServices", "HasDevelopmentalDisability",
        "ReceiveDevelopmentalDisabilityServices", "HasChronicHealthCondition",
        "ReceiveChronicHealthServices", "HasHIVAIDS", "ReceiveHIVAIDSServices",
        "HasMentalHealthProblem", "ReceiveMentalHealthServices", "HasSubstanceAbuseProblem",
        "ReceiveSubstanceAbuseServices", "DomesticViolenceSurvivor"})
    cat(name, levels::kYesNo5, {"Yes"});

  cont("Age", "years");
  cont("Calls", "count");
  cont("Wait", "days");
  cont("RatioOfNumCallstoWaitTime", "calls per day");
  cont("MonthlyAmount", "dollars");
  cont("numMembers", "count");
  cont("Children", "count");
  cont("Children0_2", "count");
  cont("Children3_5", "count");
  cont("Children6_10", "count");
  cont("Children11_14", "count");
  cont("Children15_17", "count");
  cont("UnrelatedChildren", "count");
  cont("UnrelatedAdults", "count");
  return Schema(std::move(f));
}

/// Calls over wait with the wait clamped to at least one day.
inline double calls_to_wait_ratio(double calls, double wait_days) {
  return calls / std::max(wait_days, 1.0);
}

}  // namespace caseflow
