#include "emag/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace emag::svg {

namespace {

constexpr double kLeft = 56, kRight = 16, kTop = 32, kBottom = 44;

std::string num(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.2f", v);
  return b;
}

std::string tick(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3g", v);
  return b;
}

std::string escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else if (c == '"') o += "&quot;";
    else o += c;
  }
  return o;
}

struct Frame {
  double x0, x1, y0, y1;
  const Axes& a;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (a.width - kLeft - kRight); }
  double py(double y) const { return a.height - kBottom - (y - y0) / (y1 - y0) * (a.height - kTop - kBottom); }
};

void widen(double& lo, double& hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) lo = 0, hi = 1;
  if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
  const double pad = 0.04 * (hi - lo);
  lo -= pad;
  hi += pad;
}

Frame frame_for(const std::vector<Series>& series, const Axes& a) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]), x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]), y1 = std::max(y1, s.y[i]);
    }
  widen(x0, x1);
  widen(y0, y1);
  return {x0, x1, y0, y1, a};
}

std::string open(const Axes& a) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(a.width) + "\" height=\"" +
                  std::to_string(a.height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!a.title.empty())
    s += "<text x=\"" + num(a.width / 2.0) + "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" + escape(a.title) +
         "</text>\n";
  return s;
}

std::string axes(const Frame& f) {
  const Axes& a = f.a;
  std::string s;
  const double bx = a.height - kBottom;
  s += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(bx) + "\" x2=\"" + num(a.width - kRight) + "\" y2=\"" + num(bx) +
       "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(kLeft) + "\" y2=\"" + num(bx) +
       "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = f.x0 + (f.x1 - f.x0) * k / 4.0, yv = f.y0 + (f.y1 - f.y0) * k / 4.0;
    s += "<text x=\"" + num(f.px(xv)) + "\" y=\"" + num(bx + 14) + "\" text-anchor=\"middle\">" + tick(xv) + "</text>\n";
    s += "<text x=\"" + num(kLeft - 4) + "\" y=\"" + num(f.py(yv) + 4) + "\" text-anchor=\"end\">" + tick(yv) +
         "</text>\n";
  }
  if (!a.xlabel.empty())
    s += "<text x=\"" + num((kLeft + a.width - kRight) / 2) + "\" y=\"" + num(a.height - 8.0) +
         "\" text-anchor=\"middle\">" + escape(a.xlabel) + "</text>\n";
  if (!a.ylabel.empty())
    s += "<text transform=\"translate(14," + num((kTop + bx) / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
         escape(a.ylabel) + "</text>\n";
  return s;
}

std::string legend(const std::vector<Series>& series, const Axes& a) {
  std::string s;
  double y = kTop + 4;
  for (const auto& sr : series) {
    if (sr.name.empty()) continue;
    s += "<rect x=\"" + num(a.width - kRight - 110) + "\" y=\"" + num(y) + "\" width=\"10\" height=\"10\" fill=\"" +
         sr.color + "\"/>\n";
    s += "<text x=\"" + num(a.width - kRight - 96) + "\" y=\"" + num(y + 9) + "\">" + escape(sr.name) + "</text>\n";
    y += 14;
  }
  return s;
}

}  // namespace

std::string scatter(const std::vector<Series>& series, const Axes& a) {
  const Frame f = frame_for(series, a);
  std::string s = open(a) + axes(f);
  for (const auto& sr : series)
    for (std::size_t i = 0; i < std::min(sr.x.size(), sr.y.size()); ++i) {
      if (!std::isfinite(sr.x[i]) || !std::isfinite(sr.y[i])) continue;
      s += "<circle cx=\"" + num(f.px(sr.x[i])) + "\" cy=\"" + num(f.py(sr.y[i])) + "\" r=\"" + num(sr.radius) +
           "\" fill=\"" + sr.color + "\" fill-opacity=\"0.7\"/>\n";
    }
  return s + legend(series, a) + "</svg>\n";
}

std::string line(const std::vector<Series>& series, const Axes& a) {
  const Frame f = frame_for(series, a);
  std::string s = open(a) + axes(f);
  for (const auto& sr : series) {
    std::string pts;
    for (std::size_t i = 0; i < std::min(sr.x.size(), sr.y.size()); ++i)
      if (std::isfinite(sr.x[i]) && std::isfinite(sr.y[i])) pts += num(f.px(sr.x[i])) + "," + num(f.py(sr.y[i])) + " ";
    s += "<polyline fill=\"none\" stroke=\"" + sr.color + "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
  }
  return s + legend(series, a) + "</svg>\n";
}

std::string histogram(const std::vector<double>& values, int bins, const Axes& a) {
  require(bins >= 1, "histogram: bins must be >= 1");
  std::vector<double> v;
  for (double x : values)
    if (std::isfinite(x)) v.push_back(x);
  double lo = v.empty() ? 0.0 : *std::min_element(v.begin(), v.end());
  double hi = v.empty() ? 1.0 : *std::max_element(v.begin(), v.end());
  if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
  std::vector<int> count(static_cast<std::size_t>(bins), 0);
  for (double x : v) {
    const int b = std::min(bins - 1, static_cast<int>((x - lo) / (hi - lo) * bins));
    ++count[static_cast<std::size_t>(b)];
  }
  const int peak = std::max(1, *std::max_element(count.begin(), count.end()));
  const Frame f{lo, hi, 0.0, peak * 1.05, a};
  std::string s = open(a) + axes(f);
  const double w = (hi - lo) / bins;
  for (int b = 0; b < bins; ++b) {
    const double x0 = f.px(lo + b * w), x1 = f.px(lo + (b + 1) * w), y = f.py(count[static_cast<std::size_t>(b)]);
    s += "<rect x=\"" + num(x0) + "\" y=\"" + num(y) + "\" width=\"" + num(std::max(0.0, x1 - x0 - 1)) +
         "\" height=\"" + num(f.py(0) - y) + "\" fill=\"#1f77b4\"/>\n";
  }
  return s + "</svg>\n";
}

std::string heatmap(const Mat& values, const std::vector<std::string>& rl, const std::vector<std::string>& cl,
                    const Axes& a) {
  std::string s = open(a);
  const auto R = values.rows(), C = values.cols();
  if (R == 0 || C == 0) return s + "</svg>\n";
  const double lo = values.minCoeff(), hi = values.maxCoeff();
  const double cw = (a.width - kLeft - kRight) / static_cast<double>(C);
  const double ch = (a.height - kTop - kBottom) / static_cast<double>(R);
  for (Eigen::Index i = 0; i < R; ++i) {
    for (Eigen::Index j = 0; j < C; ++j) {
      const double t = hi > lo ? (values(i, j) - lo) / (hi - lo) : 0.5;
      char col[16];
      std::snprintf(col, sizeof col, "#%02x%02xff", static_cast<int>(255 * (1 - t)), static_cast<int>(255 * (1 - 0.6 * t)));
      const double x = kLeft + j * cw, y = kTop + i * ch;
      s += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(cw) + "\" height=\"" + num(ch) +
           "\" fill=\"" + col + "\" stroke=\"white\"/>\n";
      s += "<text x=\"" + num(x + cw / 2) + "\" y=\"" + num(y + ch / 2 + 4) + "\" text-anchor=\"middle\">" +
           tick(values(i, j)) + "</text>\n";
    }
    if (static_cast<std::size_t>(i) < rl.size())
      s += "<text x=\"" + num(kLeft - 4) + "\" y=\"" + num(kTop + (i + 0.5) * ch + 4) + "\" text-anchor=\"end\">" +
           escape(rl[static_cast<std::size_t>(i)]) + "</text>\n";
  }
  for (Eigen::Index j = 0; j < C && static_cast<std::size_t>(j) < cl.size(); ++j)
    s += "<text x=\"" + num(kLeft + (j + 0.5) * cw) + "\" y=\"" + num(a.height - kBottom + 14) +
         "\" text-anchor=\"middle\">" + escape(cl[static_cast<std::size_t>(j)]) + "</text>\n";
  if (!a.xlabel.empty())
    s += "<text x=\"" + num((kLeft + a.width - kRight) / 2) + "\" y=\"" + num(a.height - 8.0) +
         "\" text-anchor=\"middle\">" + escape(a.xlabel) + "</text>\n";
  if (!a.ylabel.empty())
    s += "<text transform=\"translate(14," + num((kTop + a.height - kBottom) / 2) +
         ") rotate(-90)\" text-anchor=\"middle\">" + escape(a.ylabel) + "</text>\n";
  return s + "</svg>\n";
}

}  // namespace emag::svg
