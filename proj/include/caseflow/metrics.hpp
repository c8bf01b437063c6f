#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <vector>

#include "caseflow/csv.hpp"
#include "caseflow/error.hpp"

namespace caseflow {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // scores >= threshold are called positive
};

struct RocCurve {
  std::vector<RocPoint> points;
};

struct AucEstimate {
  double auc = 0.5;
  double variance = 0.0;
  double ci_low = 0.0;
  double ci_high = 1.0;
  double level = 0.95;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

namespace detail {

inline void check_binary(std::span<const double> scores, std::span<const int> labels,
                         std::size_t& n_pos, std::size_t& n_neg) {
  if (scores.size() != labels.size())
    fail(ErrorKind::LengthMismatch, "scores and labels differ in length");
  n_pos = static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](int y) { return y != 0; }));
  n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) fail(ErrorKind::SingleClass, "both classes must be present");
}

}  // namespace detail

/// 1-based ranks with ties sharing their average rank.
inline std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

/// One point per distinct score, swept from the highest score down.
inline RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels) {
  std::size_t n_pos = 0, n_neg = 0;
  detail::check_binary(scores, labels, n_pos, n_neg);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  RocCurve roc;
  roc.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      if (labels[order[i]] != 0) ++tp;
      else ++fp;
      ++i;
    }
    roc.points.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                          static_cast<double>(tp) / static_cast<double>(n_pos), s});
  }
  return roc;
}

inline double trapezoid_area(const RocCurve& roc) {
  double area = 0.0;
  for (std::size_t i = 1; i < roc.points.size(); ++i) {
    const auto& a = roc.points[i - 1];
    const auto& b = roc.points[i];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
  }
  return area;
}

/// Mann-Whitney form: (concordant pairs + ties / 2) / (n_pos * n_neg).
inline double auc(std::span<const double> scores, std::span<const int> labels) {
  std::size_t n_pos = 0, n_neg = 0;
  detail::check_binary(scores, labels, n_pos, n_neg);
  const auto ranks = average_ranks(scores);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < ranks.size(); ++i)
    if (labels[i] != 0) rank_sum += ranks[i];
  const double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

/// Standard normal quantile. Acklam's rational approximation followed by one
/// Halley step against erfc; error well below 1e-12 on (1e-300, 1 - 1e-16).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    fail(ErrorKind::InvalidArgument, "quantile probability must lie in [0, 1]");
  }
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * 3.14159265358979323846) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

/// DeLong structural components. V10 is each positive's placement among the
/// negatives, V01 each negative's among the positives.
inline AucEstimate delong_ci(std::span<const double> scores, std::span<const int> labels,
                             double level = 0.95) {
  if (scores.size() != labels.size())
    fail(ErrorKind::LengthMismatch, "scores and labels differ in length");
  if (!(level > 0.0 && level < 1.0)) fail(ErrorKind::InvalidArgument, "level must lie in (0, 1)");
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] != 0 ? pos : neg).push_back(scores[i]);
  if (pos.size() < 2 || neg.size() < 2)
    fail(ErrorKind::InsufficientClassCount, "DeLong needs at least two of each class");
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());

  auto placement = [](double x, const std::vector<double>& sorted, bool count_below) {
    const auto lo = std::lower_bound(sorted.begin(), sorted.end(), x);
    const auto hi = std::upper_bound(sorted.begin(), sorted.end(), x);
    const double ties = static_cast<double>(hi - lo);
    const double strict = count_below ? static_cast<double>(lo - sorted.begin())
                                      : static_cast<double>(sorted.end() - hi);
    return (strict + 0.5 * ties) / static_cast<double>(sorted.size());
  };

  std::vector<double> v10(pos.size()), v01(neg.size());
  for (std::size_t i = 0; i < pos.size(); ++i) v10[i] = placement(pos[i], neg, true);
  for (std::size_t j = 0; j < neg.size(); ++j) v01[j] = placement(neg[j], pos, false);

  auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  auto sample_var = [](const std::vector<double>& v, double m) {
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
  };

  AucEstimate est;
  est.auc = mean(v10);
  est.n_pos = pos.size();
  est.n_neg = neg.size();
  est.level = level;
  est.variance = sample_var(v10, est.auc) / static_cast<double>(pos.size()) +
                 sample_var(v01, mean(v01)) / static_cast<double>(neg.size());
  const double z = normal_quantile(0.5 + level / 2.0);
  const double half = z * std::sqrt(est.variance);
  est.ci_low = std::clamp(est.auc - half, 0.0, 1.0);
  est.ci_high = std::clamp(est.auc + half, 0.0, 1.0);
  return est;
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

/// Pearson correlation of average ranks.
inline double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorKind::LengthMismatch, "spearman inputs differ in length");
  if (a.size() < 2) fail(ErrorKind::LengthMismatch, "spearman needs at least two values");
  auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
  };
  if (constant(a) || constant(b)) fail(ErrorKind::ConstantInput, "spearman of a constant vector");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  return pearson(ra, rb);
}

/// Symmetric Spearman matrix with unit diagonal.
inline std::vector<std::vector<double>> correlation_matrix(
    const std::vector<std::vector<double>>& vectors) {
  const std::size_t k = vectors.size();
  for (const auto& v : vectors)
    if (v.size() != vectors.front().size())
      fail(ErrorKind::LengthMismatch, "score vectors differ in length");
  std::vector<std::vector<double>> m(k, std::vector<double>(k, 1.0));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) m[i][j] = m[j][i] = spearman(vectors[i], vectors[j]);
  return m;
}

inline double mean_off_diagonal(const std::vector<std::vector<double>>& m) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m.size(); ++j)
      if (i != j) {
        s += m[i][j];
        ++n;
      }
  return n ? s / static_cast<double>(n) : 1.0;
}

inline void write_roc_csv(std::ostream& out, const RocCurve& roc) {
  out << "fpr,tpr,threshold\n";
  for (const auto& p : roc.points)
    out << csv::format_double(p.fpr) << ',' << csv::format_double(p.tpr) << ','
        << (std::isinf(p.threshold) ? std::string("inf") : csv::format_double(p.threshold)) << '\n';
}

}  // namespace caseflow
