#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "caseflow/error.hpp"
#include "caseflow/intervention.hpp"
#include "caseflow/records.hpp"
#include "caseflow/resampling.hpp"
#include "caseflow/scoring.hpp"

namespace caseflow {

using InterventionScores = std::map<Intervention, double>;

/// Most confident one-vs-all prediction; exact ties go to the less intensive
/// intervention.
inline Intervention resolve_one_vs_all(const InterventionScores& scores) {
  std::optional<Intervention> best;
  double best_score = 0.0;
  for (auto i : kByIntensity) {
    auto it = scores.find(i);
    if (it == scores.end())
      fail(ErrorKind::MissingScore, "no score for " + std::string(to_string(i)));
    if (!best || it->second > best_score) {
      best = i;
      best_score = it->second;
    }
  }
  return *best;
}

/// counts[predicted][actual], indexed by index_of.
struct CrossTab {
  std::array<std::array<std::uint64_t, kNumInterventions>, kNumInterventions> counts{};

  std::uint64_t operator()(Intervention predicted, Intervention actual) const {
    return counts[index_of(predicted)][index_of(actual)];
  }
  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (const auto& row : counts)
      for (auto c : row) s += c;
    return s;
  }
  std::uint64_t trace() const {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < kNumInterventions; ++i) s += counts[i][i];
    return s;
  }
};

inline CrossTab cross_tab(std::span<const Intervention> predicted, std::span<const Intervention> actual) {
  if (predicted.size() != actual.size())
    fail(ErrorKind::LengthMismatch, "predicted and actual differ in length");
  CrossTab t;
  for (std::size_t i = 0; i < predicted.size(); ++i) ++t.counts[index_of(predicted[i])][index_of(actual[i])];
  return t;
}

struct Subgroups {
  std::vector<std::string> es_to_th;  // predicted ES, assigned TH
  std::vector<std::string> th_to_es;  // predicted TH, assigned ES
};

inline Subgroups extract_subgroups(std::span<const Intervention> predicted,
                                   std::span<const Intervention> actual,
                                   std::span<const std::string> ids) {
  if (predicted.size() != actual.size() || predicted.size() != ids.size())
    fail(ErrorKind::LengthMismatch, "predicted, actual and ids differ in length");
  Subgroups g;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (predicted[i] == Intervention::ES && actual[i] == Intervention::TH) g.es_to_th.push_back(ids[i]);
    if (predicted[i] == Intervention::TH && actual[i] == Intervention::ES) g.th_to_es.push_back(ids[i]);
  }
  return g;
}

struct DiscretionTest {
  std::string subgroup;  // EStoTH or THtoES
  std::string measure;   // VS or MB
  Intervention population = Intervention::ES;
  std::size_t population_size = 0;
  std::optional<PermutationTestResult> result;
  std::string note;
};

struct DiscretionReport {
  CrossTab crosstab;
  Subgroups subgroups;
  std::vector<DiscretionTest> tests;  // EStoTH VS, THtoES VS, EStoTH MB, THtoES MB
  std::size_t n_resamples = 0;
  std::uint64_t seed = 0;
};

struct AnalyzeOptions {
  std::size_t n_resamples = 1000;
  std::uint64_t seed = 0;
  bool exclude_observed = false;
  bool run_mb = true;  // requires reentry probabilities
};

/// Four resampling tests: each discretionary subgroup's mean VS and MB against
/// random same-size groups drawn from everyone predicted the source
/// intervention.
inline DiscretionReport analyze(const std::vector<HouseholdRecord>& records,
                                std::span<const Intervention> predicted,
                                const VulnerabilityScorer& scorer, const AnalyzeOptions& opt = {}) {
  if (predicted.size() != records.size())
    fail(ErrorKind::LengthMismatch, "predictions and records differ in length");
  DiscretionReport rep;
  rep.n_resamples = opt.n_resamples;
  rep.seed = opt.seed;
  std::vector<Intervention> actual;
  std::vector<std::string> ids;
  for (const auto& r : records) {
    actual.push_back(r.actual);
    ids.push_back(r.id);
  }
  rep.crosstab = cross_tab(predicted, actual);
  rep.subgroups = extract_subgroups(predicted, actual, ids);

  const auto vs = scorer.totals(records);
  std::vector<double> mb;
  if (opt.run_mb) {
    mb.reserve(records.size());
    for (const auto& r : records) mb.push_back(marginal_benefit(r));
  }

  struct Spec {
    const char* subgroup;
    const char* measure;
    Intervention from, to;
  };
  const Spec specs[] = {{"EStoTH", "VS", Intervention::ES, Intervention::TH},
                        {"THtoES", "VS", Intervention::TH, Intervention::ES},
                        {"EStoTH", "MB", Intervention::ES, Intervention::TH},
                        {"THtoES", "MB", Intervention::TH, Intervention::ES}};
  for (std::size_t t = 0; t < 4; ++t) {
    const auto& s = specs[t];
    DiscretionTest test{s.subgroup, s.measure, s.from, 0, std::nullopt, ""};
    const bool is_mb = std::string(s.measure) == "MB";
    if (is_mb && !opt.run_mb) {
      test.note = "skipped";
      rep.tests.push_back(std::move(test));
      continue;
    }
    const auto& values = is_mb ? mb : vs;
    std::vector<double> population;
    std::vector<std::size_t> observed;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (predicted[i] != s.from) continue;
      if (actual[i] == s.to) observed.push_back(population.size());
      population.push_back(values[i]);
    }
    test.population_size = population.size();
    if (observed.empty()) {
      test.note = "no discretionary records";
    } else {
      ResampleOptions ro{opt.n_resamples, derive_seed(opt.seed, {0xd15c, t}), opt.exclude_observed};
      test.result = resample_test(population, observed, ro);
    }
    rep.tests.push_back(std::move(test));
  }
  return rep;
}

inline nlohmann::json to_json(const CrossTab& t) {
  nlohmann::json rows = nlohmann::json::object();
  for (auto p : kReportOrder) {
    nlohmann::json row = nlohmann::json::object();
    for (auto a : kReportOrder) row[std::string(to_string(a))] = t(p, a);
    rows[std::string(to_string(p))] = row;
  }
  return {{"predicted_by_actual", rows},
          {"total", t.total()},
          {"matched", t.trace()},
          {"mismatched", t.total() - t.trace()}};
}

inline nlohmann::json to_json(const DiscretionReport& r) {
  nlohmann::json tests = nlohmann::json::array();
  for (const auto& t : r.tests) {
    nlohmann::json j{{"subgroup", t.subgroup},
                     {"measure", t.measure},
                     {"population", to_string(t.population)},
                     {"population_size", t.population_size}};
    if (t.result) j["result"] = to_json(*t.result);
    if (!t.note.empty()) j["note"] = t.note;
    tests.push_back(std::move(j));
  }
  return {{"crosstab", to_json(r.crosstab)},
          {"es_to_th", r.subgroups.es_to_th},
          {"th_to_es", r.subgroups.th_to_es},
          {"n_resamples", r.n_resamples},
          {"seed", r.seed},
          {"tests", tests}};
}

inline void write_text_report(std::ostream& out, const DiscretionReport& r) {
  auto fmt = [](double v, int prec = 4) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(prec);
    os << v;
    return os.str();
  };
  out << "Predicted (rows) versus actual (columns) intervention\n";
  out << "pred\\act";
  for (auto a : kReportOrder) out << '\t' << to_string(a);
  out << '\n';
  for (auto p : kReportOrder) {
    out << to_string(p);
    for (auto a : kReportOrder) out << '\t' << r.crosstab(p, a);
    out << '\n';
  }
  out << "total " << r.crosstab.total() << ", matched " << r.crosstab.trace() << ", mismatched "
      << r.crosstab.total() - r.crosstab.trace() << "\n\n";
  out << "EStoTH (predicted ES, assigned TH): " << r.subgroups.es_to_th.size() << '\n';
  out << "THtoES (predicted TH, assigned ES): " << r.subgroups.th_to_es.size() << "\n\n";
  out << "subgroup\tmeasure\tgroup\tpopulation\tobserved\tnull_q025\tnull_q500\tnull_q975\tpercentile\tp_two_sided\n";
  for (const auto& t : r.tests) {
    out << t.subgroup << '\t' << t.measure << '\t';
    if (!t.result) {
      out << "0\t" << t.population_size << '\t' << t.note << '\n';
      continue;
    }
    const auto& x = *t.result;
    out << x.group_size << '\t' << x.population_size << '\t' << fmt(x.observed_mean) << '\t'
        << fmt(x.null_quantile(0.025)) << '\t' << fmt(x.null_quantile(0.5)) << '\t'
        << fmt(x.null_quantile(0.975)) << '\t' << fmt(x.percentile, 1) << '\t' << fmt(x.p_two_sided)
        << '\n';
  }
}

}  // namespace caseflow
