#pragma once

#include <string>

#include <json.hpp>

#include "caseflow/error.hpp"
#include "caseflow/tree.hpp"

namespace caseflow {

// Doubles are written in shortest round-trip form, so to_json/tree_from_json
// reproduce a tree bit for bit.

inline nlohmann::json to_json(const Tree& t) {
  nlohmann::json nodes = nlohmann::json::array();
  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    const auto& n = t.nodes[i];
    nlohmann::json j{{"id", i}, {"n_samples", n.n_samples}, {"value", n.value}};
    if (!t.regression) j["class_counts"] = n.class_counts;
    if (!n.is_leaf()) {
      j["feature"] = n.feature;
      if (static_cast<std::size_t>(n.feature) < t.feature_names.size())
        j["feature_name"] = t.feature_names[static_cast<std::size_t>(n.feature)];
      j["threshold"] = n.threshold;
      j["left"] = n.left;
      j["right"] = n.right;
    }
    nodes.push_back(std::move(j));
  }
  return {{"kind", t.regression ? "regression" : "classification"},
          {"n_features", t.n_features},
          {"feature_names", t.feature_names},
          {"nodes", std::move(nodes)}};
}

inline Tree tree_from_json(const nlohmann::json& j) {
  try {
    Tree t;
    t.regression = j.at("kind").get<std::string>() == "regression";
    t.n_features = j.at("n_features").get<std::size_t>();
    t.feature_names = j.value("feature_names", std::vector<std::string>{});
    const auto& nodes = j.at("nodes");
    t.nodes.resize(nodes.size());
    for (const auto& jn : nodes) {
      const auto id = jn.at("id").get<std::size_t>();
      if (id >= t.nodes.size()) fail(ErrorKind::InvalidConfig, "node id out of range");
      auto& n = t.nodes[id];
      n.n_samples = jn.at("n_samples").get<std::uint64_t>();
      n.value = jn.at("value").get<double>();
      if (jn.contains("class_counts")) n.class_counts = jn.at("class_counts").get<std::array<std::uint64_t, 2>>();
      if (jn.contains("feature")) {
        n.feature = jn.at("feature").get<int>();
        n.threshold = jn.at("threshold").get<double>();
        n.left = jn.at("left").get<int>();
        n.right = jn.at("right").get<int>();
        const auto size = static_cast<int>(t.nodes.size());
        if (n.left <= 0 || n.right <= 0 || n.left >= size || n.right >= size)
          fail(ErrorKind::InvalidConfig, "child id out of range");
        if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= t.n_features)
          fail(ErrorKind::InvalidConfig, "feature index out of range");
      }
    }
    if (t.nodes.empty()) fail(ErrorKind::InvalidConfig, "tree has no nodes");
    return t;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidConfig, std::string("tree json: ") + e.what());
  }
}

}  // namespace caseflow
