#pragma once

// Slow, independent reference implementations used to check the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

// ---------------------------------------------------------------------------
// AUC by explicit pair counting.
inline double pair_count_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        ++pairs;
        if (s[i] > s[j]) num += 1.0;
        else if (s[i] == s[j]) num += 0.5;
      }
  return num / static_cast<double>(pairs);
}

// Trapezoid over thresholds taken from the sorted distinct scores, written
// without the library's sweep.
inline double threshold_trapezoid_auc(const std::vector<double>& s, const std::vector<int>& y) {
  std::vector<double> t = s;
  std::sort(t.begin(), t.end(), std::greater<>());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  const double P = static_cast<double>(std::count(y.begin(), y.end(), 1));
  const double N = static_cast<double>(y.size()) - P;
  double px = 0.0, py = 0.0, area = 0.0;
  for (double th : t) {
    double tp = 0, fp = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] >= th) (y[i] ? tp : fp) += 1;
    const double x = fp / N, yy = tp / P;
    area += (x - px) * (yy + py) / 2.0;
    px = x;
    py = yy;
  }
  return area;
}

// ---------------------------------------------------------------------------
// Exhaustive greedy CART with exact rational Gini comparison.

struct RefNode {
  bool leaf = true;
  int feature = -1;
  double threshold = 0.0;
  std::uint64_t neg = 0, pos = 0;
  int left = -1, right = -1;
};

struct RefParams {
  int max_depth = 3;
  std::size_t min_split = 2;
  std::size_t min_leaf = 1;
};

class RefCart {
 public:
  RefCart(const std::vector<std::vector<double>>& X, const std::vector<int>& y, RefParams p)
      : X_(X), y_(y), p_(p) {}

  std::vector<RefNode> fit() {
    std::vector<std::size_t> rows(X_.size());
    std::iota(rows.begin(), rows.end(), 0);
    grow(rows, 0);
    return nodes_;
  }

 private:
  // Sum over children of (count^2 / child size) summed over classes; larger is
  // a purer split. Kept as a fraction num/den.
  struct Frac {
    std::int64_t num, den;
  };
  static Frac purity(std::int64_t ln, std::int64_t lp, std::int64_t rn, std::int64_t rp) {
    const std::int64_t nl = ln + lp, nr = rn + rp;
    return {(ln * ln + lp * lp) * nr + (rn * rn + rp * rp) * nl, nl * nr};
  }
  static int cmp(Frac a, Frac b) {
    const auto l = static_cast<__int128>(a.num) * b.den, r = static_cast<__int128>(b.num) * a.den;
    return l < r ? -1 : l > r ? 1 : 0;
  }

  int grow(const std::vector<std::size_t>& rows, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    RefNode n;
    for (auto r : rows) (y_[r] ? n.pos : n.neg)++;
    nodes_[id] = n;
    if (depth >= p_.max_depth || rows.size() < p_.min_split || n.pos == 0 || n.neg == 0) return id;

    // Parent purity as a fraction, for the strict-improvement check.
    const Frac parent{static_cast<std::int64_t>(n.neg * n.neg + n.pos * n.pos),
                      static_cast<std::int64_t>(rows.size())};
    bool found = false;
    Frac best{0, 1};
    int bf = -1;
    double bt = 0.0;
    for (std::size_t f = 0; f < X_[0].size(); ++f) {
      std::vector<double> vals;
      for (auto r : rows) vals.push_back(X_[r][f]);
      std::sort(vals.begin(), vals.end());
      vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
      for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
        const double t = 0.5 * (vals[i] + vals[i + 1]);
        std::int64_t ln = 0, lp = 0, rn = 0, rp = 0;
        for (auto r : rows) {
          if (X_[r][f] <= t) (y_[r] ? lp : ln)++;
          else (y_[r] ? rp : rn)++;
        }
        if (static_cast<std::size_t>(ln + lp) < p_.min_leaf || static_cast<std::size_t>(rn + rp) < p_.min_leaf)
          continue;
        const Frac q = purity(ln, lp, rn, rp);
        if (cmp(q, parent) <= 0) continue;  // no decrease
        if (!found || cmp(q, best) > 0) {
          found = true;
          best = q;
          bf = static_cast<int>(f);
          bt = t;
        }
      }
    }
    if (!found) return id;
    std::vector<std::size_t> L, R;
    for (auto r : rows) (X_[r][bf] <= bt ? L : R).push_back(r);
    const int l = grow(L, depth + 1);
    const int r = grow(R, depth + 1);
    auto& node = nodes_[id];
    node.leaf = false;
    node.feature = bf;
    node.threshold = bt;
    node.left = l;
    node.right = r;
    return id;
  }

  const std::vector<std::vector<double>>& X_;
  const std::vector<int>& y_;
  RefParams p_;
  std::vector<RefNode> nodes_;
};

// ---------------------------------------------------------------------------
// One-sample Kolmogorov-Smirnov statistic against U(0, 1).
inline double ks_uniform(std::vector<double> u) {
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    d = std::max(d, static_cast<double>(i + 1) / n - u[i]);
    d = std::max(d, u[i] - static_cast<double>(i) / n);
  }
  return d;
}

// Asymptotic 1% critical value of the KS statistic.
inline double ks_critical_1pct(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

// ---------------------------------------------------------------------------
// Binormal score model: negatives N(0,1), positives N(mu,1); true AUC is
// Phi(mu / sqrt 2).
inline double binormal_auc(double mu) { return 0.5 * std::erfc(-mu / 2.0); }

inline void binormal_sample(std::mt19937_64& g, std::size_t n_pos, std::size_t n_neg, double mu,
                            std::vector<double>& s, std::vector<int>& y) {
  std::normal_distribution<double> z(0.0, 1.0);
  s.clear();
  y.clear();
  for (std::size_t i = 0; i < n_pos; ++i) {
    s.push_back(mu + z(g));
    y.push_back(1);
  }
  for (std::size_t i = 0; i < n_neg; ++i) {
    s.push_back(z(g));
    y.push_back(0);
  }
}

}  // namespace oracle
