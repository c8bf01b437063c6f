#pragma once

// Static SVG figures: null-distribution histograms with the observed mean
// marked, and ROC curves.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "caseflow/metrics.hpp"
#include "caseflow/resampling.hpp"

namespace caseflow::svg {

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double width = 640, height = 420;
  double left = 60, right = 20, top = 40, bottom = 50;
  double x0, x1, y0, y1;  // data ranges

  double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
  double py(double y) const { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); }
};

inline void open(std::ostream& out, const Frame& f, const std::string& title) {
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(f.width) << "\" height=\""
      << num(f.height) << "\" viewBox=\"0 0 " << num(f.width) << ' ' << num(f.height) << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << num(f.width / 2) << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"15\">" << escape(title) << "</text>\n";
}

inline void axes(std::ostream& out, const Frame& f, const std::string& xlabel, const std::string& ylabel,
                 int ticks = 5) {
  const double xb = f.height - f.bottom, yl = f.left;
  out << "<g id=\"axes\" stroke=\"black\" stroke-width=\"1\">\n"
      << "<line x1=\"" << num(yl) << "\" y1=\"" << num(xb) << "\" x2=\"" << num(f.width - f.right) << "\" y2=\""
      << num(xb) << "\"/>\n"
      << "<line x1=\"" << num(yl) << "\" y1=\"" << num(xb) << "\" x2=\"" << num(yl) << "\" y2=\"" << num(f.top)
      << "\"/>\n</g>\n";
  out << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int i = 0; i <= ticks; ++i) {
    const double xv = f.x0 + (f.x1 - f.x0) * i / ticks, yv = f.y0 + (f.y1 - f.y0) * i / ticks;
    char xl[32], ylab[32];
    std::snprintf(xl, sizeof xl, "%.4g", xv);
    std::snprintf(ylab, sizeof ylab, "%.4g", yv);
    out << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << num(xb + 16) << "\" text-anchor=\"middle\">" << xl
        << "</text>\n"
        << "<text x=\"" << num(yl - 6) << "\" y=\"" << num(f.py(yv) + 4) << "\" text-anchor=\"end\">" << ylab
        << "</text>\n";
  }
  out << "<text x=\"" << num((f.left + f.width - f.right) / 2) << "\" y=\"" << num(f.height - 12)
      << "\" text-anchor=\"middle\">" << escape(xlabel) << "</text>\n"
      << "<text transform=\"translate(16," << num((f.top + f.height - f.bottom) / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">" << escape(ylabel) << "</text>\n</g>\n";
}

}  // namespace detail

/// Histogram of the resampled group means with a vertical line at the
/// observed mean. Bars carry class "null-bar", the line id "observed-mean".
inline void null_histogram(std::ostream& out, const PermutationTestResult& r, const std::string& title,
                           std::size_t n_bins = 30) {
  const auto& v = r.null_means;
  double lo = r.observed_mean, hi = r.observed_mean;
  for (double x : v) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  n_bins = std::max<std::size_t>(1, n_bins);
  std::vector<std::size_t> counts(n_bins, 0);
  const double w = (hi - lo) / static_cast<double>(n_bins);
  for (double x : v) {
    auto b = static_cast<std::size_t>((x - lo) / w);
    ++counts[std::min(b, n_bins - 1)];
  }
  const double top = std::max<double>(1.0, static_cast<double>(*std::max_element(counts.begin(), counts.end())));
  detail::Frame f;
  f.x0 = lo;
  f.x1 = hi;
  f.y0 = 0;
  f.y1 = top * 1.1;
  detail::open(out, f, title);
  out << "<g id=\"null-histogram\" fill=\"#8fa8c8\" stroke=\"#3b5b82\" stroke-width=\"0.5\">\n";
  for (std::size_t b = 0; b < n_bins; ++b) {
    const double x = f.px(lo + w * static_cast<double>(b)), x2 = f.px(lo + w * static_cast<double>(b + 1));
    const double y = f.py(static_cast<double>(counts[b])), y0 = f.py(0);
    out << "<rect class=\"null-bar\" x=\"" << detail::num(x) << "\" y=\"" << detail::num(y) << "\" width=\""
        << detail::num(x2 - x) << "\" height=\"" << detail::num(y0 - y) << "\" data-count=\"" << counts[b]
        << "\"/>\n";
  }
  out << "</g>\n";
  const double ox = f.px(r.observed_mean);
  out << "<line id=\"observed-mean\" x1=\"" << detail::num(ox) << "\" y1=\"" << detail::num(f.py(0)) << "\" x2=\""
      << detail::num(ox) << "\" y2=\"" << detail::num(f.py(f.y1)) << "\" stroke=\"#c0392b\" stroke-width=\"2\" "
      << "data-value=\"" << r.observed_mean << "\"/>\n";
  char label[96];
  std::snprintf(label, sizeof label, "observed %.4g (percentile %.1f)", r.observed_mean, r.percentile);
  out << "<text x=\"" << detail::num(ox + 4) << "\" y=\"" << detail::num(f.py(f.y1) + 12)
      << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#c0392b\">" << label << "</text>\n";
  detail::axes(out, f, "group mean", "resamples");
  out << "</svg>\n";
}

struct RocSeries {
  std::string label;
  RocCurve curve;
  double auc = 0.0;
};

/// Several ROC curves on one unit square with the chance diagonal.
inline void roc_plot(std::ostream& out, const std::vector<RocSeries>& series, const std::string& title) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  detail::Frame f;
  f.width = f.height = 480;
  f.x0 = f.y0 = 0;
  f.x1 = f.y1 = 1;
  detail::open(out, f, title);
  out << "<line x1=\"" << detail::num(f.px(0)) << "\" y1=\"" << detail::num(f.py(0)) << "\" x2=\""
      << detail::num(f.px(1)) << "\" y2=\"" << detail::num(f.py(1))
      << "\" stroke=\"#999\" stroke-dasharray=\"4 4\"/>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = palette[s % std::size(palette)];
    out << "<polyline class=\"roc\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < series[s].curve.points.size(); ++i) {
      const auto& p = series[s].curve.points[i];
      out << (i ? " " : "") << detail::num(f.px(p.fpr)) << ',' << detail::num(f.py(p.tpr));
    }
    out << "\"/>\n";
    char label[128];
    std::snprintf(label, sizeof label, "%s (AUC %.3f)", series[s].label.c_str(), series[s].auc);
    const double ly = f.py(0) - 14.0 * static_cast<double>(series.size() - s);
    out << "<text x=\"" << detail::num(f.px(0.55)) << "\" y=\"" << detail::num(ly)
        << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" << color << "\">" << detail::escape(label)
        << "</text>\n";
  }
  detail::axes(out, f, "false positive rate", "true positive rate");
  out << "</svg>\n";
}

}  // namespace caseflow::svg
