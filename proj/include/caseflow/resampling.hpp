#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include <json.hpp>

#include "caseflow/error.hpp"
#include "caseflow/random.hpp"

namespace caseflow {

/// Observed group mean against the means of random same-size groups.
struct PermutationTestResult {
  double observed_mean = 0.0;
  std::vector<double> null_means;
  double percentile = 50.0;  // 100 * (#null < observed + #equal / 2) / R
  double p_two_sided = 1.0;
  std::size_t group_size = 0;
  std::size_t population_size = 0;
  std::uint64_t seed = 0;
  bool exclude_observed = false;

  double null_mean_of_means() const {
    return std::accumulate(null_means.begin(), null_means.end(), 0.0) /
           static_cast<double>(null_means.size());
  }

  /// Linear-interpolated quantile of the null means, q in [0, 1].
  double null_quantile(double q) const {
    std::vector<double> s = null_means;
    std::sort(s.begin(), s.end());
    const double pos = q * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const auto hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
  }
};

struct ResampleOptions {
  std::size_t n_resamples = 1000;
  std::uint64_t seed = 0;
  // Draw control groups from the population minus the observed members.
  bool exclude_observed = false;
};

/// Percentile by the midpoint tie rule and a two-sided Monte Carlo p-value
/// 2 min(q, 1 - q) + 1 / (R + 1), clipped to (0, 1].
inline void summarize(PermutationTestResult& r) {
  std::size_t below = 0, equal = 0;
  for (double m : r.null_means) {
    if (m < r.observed_mean) ++below;
    else if (m == r.observed_mean) ++equal;
  }
  const double R = static_cast<double>(r.null_means.size());
  const double q = (static_cast<double>(below) + 0.5 * static_cast<double>(equal)) / R;
  r.percentile = 100.0 * q;
  r.p_two_sided = std::min(1.0, 2.0 * std::min(q, 1.0 - q) + 1.0 / (R + 1.0));
}

/// Each resample draws |observed| members without replacement from the
/// population (observed members stay in the pool unless excluded). Resample i
/// uses the stream derived from (seed, i), so the result does not depend on
/// evaluation order.
inline PermutationTestResult resample_test(std::span<const double> population,
                                           std::span<const std::size_t> observed,
                                           const ResampleOptions& opt = {}) {
  if (observed.empty()) fail(ErrorKind::EmptyGroup, "observed group is empty");
  if (opt.n_resamples == 0) fail(ErrorKind::InvalidArgument, "need at least one resample");
  std::vector<char> in_group(population.size(), 0);
  double sum = 0.0;
  for (auto i : observed) {
    if (i >= population.size()) fail(ErrorKind::InvalidArgument, "observed index out of range");
    if (in_group[i]) fail(ErrorKind::InvalidArgument, "observed index repeated");
    in_group[i] = 1;
    sum += population[i];
  }
  const std::size_t k = observed.size();

  std::vector<std::size_t> pool;
  pool.reserve(population.size());
  for (std::size_t i = 0; i < population.size(); ++i)
    if (!opt.exclude_observed || !in_group[i]) pool.push_back(i);
  if (population.size() <= k)
    fail(ErrorKind::GroupTooLarge, "population must be larger than the observed group");
  if (pool.size() < k) fail(ErrorKind::GroupTooLarge, "sampling pool smaller than the group");

  PermutationTestResult res;
  res.observed_mean = sum / static_cast<double>(k);
  res.group_size = k;
  res.population_size = population.size();
  res.seed = opt.seed;
  res.exclude_observed = opt.exclude_observed;
  res.null_means.resize(opt.n_resamples);

  // Partial Fisher-Yates on the shared pool, undone after each draw so every
  // resample starts from the same pool order.
  std::vector<std::size_t> swaps(k);
  for (std::size_t b = 0; b < opt.n_resamples; ++b) {
    auto rng = make_rng(opt.seed, {0x2e5a, b});
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + uniform_index(rng, pool.size() - i);
      swaps[i] = j;
      std::swap(pool[i], pool[j]);
      s += population[pool[i]];
    }
    for (std::size_t i = k; i-- > 0;) std::swap(pool[i], pool[swaps[i]]);
    res.null_means[b] = s / static_cast<double>(k);
  }
  summarize(res);
  return res;
}

inline nlohmann::json to_json(const PermutationTestResult& r) {
  return {{"observed_mean", r.observed_mean},
          {"null_mean_of_means", r.null_mean_of_means()},
          {"null_q025", r.null_quantile(0.025)},
          {"null_q500", r.null_quantile(0.5)},
          {"null_q975", r.null_quantile(0.975)},
          {"percentile", r.percentile},
          {"p_two_sided", r.p_two_sided},
          {"group_size", r.group_size},
          {"population_size", r.population_size},
          {"n_resamples", r.null_means.size()},
          {"seed", r.seed},
          {"exclude_observed", r.exclude_observed},
          {"null_means", r.null_means}};
}

}  // namespace caseflow
