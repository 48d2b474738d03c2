#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace lanesafe::svg {

using Series = std::vector<std::pair<double, double>>;

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
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

/// Minimal 2-D chart: one data frame with axes, ticks, lines, circles and text.
class Figure {
 public:
  Figure(double width, double height, std::string title)
      : width_(width), height_(height), title_(std::move(title)) {}

  void set_limits(double x0, double x1, double y0, double y1) {
    if (x1 <= x0) x1 = x0 + 1.0;
    if (y1 <= y0) y1 = y0 + 1.0;
    x0_ = x0; x1_ = x1; y0_ = y0; y1_ = y1;
  }

  /// Limits that enclose every series with a small margin.
  void fit(const std::vector<Series>& all, double margin = 0.05) {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const Series& s : all) {
      for (const auto& [x, y] : s) {
        if (!std::isfinite(x) || !std::isfinite(y)) continue;
        x0 = std::min(x0, x); x1 = std::max(x1, x);
        y0 = std::min(y0, y); y1 = std::max(y1, y);
      }
    }
    if (!std::isfinite(x0)) { x0 = 0.0; x1 = 1.0; y0 = 0.0; y1 = 1.0; }
    const double dx = std::max(x1 - x0, 1e-9) * margin;
    const double dy = std::max(y1 - y0, 1e-9) * margin;
    set_limits(x0 - dx, x1 + dx, y0 - dy, y1 + dy);
  }

  void labels(std::string x, std::string y) { xlabel_ = std::move(x); ylabel_ = std::move(y); }

  void line(const Series& s, const std::string& color, double width = 1.5,
            const std::string& dash = "", const std::string& name = "") {
    std::ostringstream os;
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << num(width) << "\"";
    if (!dash.empty()) os << " stroke-dasharray=\"" << dash << "\"";
    os << " points=\"";
    bool first = true;
    for (const auto& [x, y] : s) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      if (!first) os << ' ';
      os << num(px(x)) << ',' << num(py(y));
      first = false;
    }
    os << "\"/>";
    body_.push_back(os.str());
    if (!name.empty()) legend_.emplace_back(name, color);
  }

  /// Circle in data coordinates (radius measured along x).
  void circle(double x, double y, double r, const std::string& color, const std::string& fill) {
    std::ostringstream os;
    const double rx = std::abs(px(x + r) - px(x));
    const double ry = std::abs(py(y + r) - py(y));
    os << "<ellipse cx=\"" << num(px(x)) << "\" cy=\"" << num(py(y)) << "\" rx=\"" << num(rx)
       << "\" ry=\"" << num(ry) << "\" stroke=\"" << color << "\" fill=\"" << fill << "\"/>";
    body_.push_back(os.str());
  }

  void marker(double x, double y, const std::string& color, const std::string& attributes = "") {
    std::ostringstream os;
    os << "<circle cx=\"" << num(px(x)) << "\" cy=\"" << num(py(y)) << "\" r=\"4\" fill=\"" << color
       << "\"" << (attributes.empty() ? "" : " " + attributes) << "/>";
    body_.push_back(os.str());
  }

  void text(double x, double y, const std::string& s, const std::string& color = "#000") {
    std::ostringstream os;
    os << "<text x=\"" << num(px(x) + 6) << "\" y=\"" << num(py(y) - 6) << "\" font-size=\"11\" fill=\""
       << color << "\">" << escape(s) << "</text>";
    body_.push_back(os.str());
  }

  std::string str() const {
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width_) << "\" height=\""
       << num(height_) << "\" viewBox=\"0 0 " << num(width_) << ' ' << num(height_) << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << num(width_ / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
       << escape(title_) << "</text>\n";
    os << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(plot_w())
       << "\" height=\"" << num(plot_h()) << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int i = 0; i <= 5; ++i) {
      const double fx = x0_ + (x1_ - x0_) * i / 5.0;
      const double fy = y0_ + (y1_ - y0_) * i / 5.0;
      os << "<text x=\"" << num(px(fx)) << "\" y=\"" << num(kTop + plot_h() + 15)
         << "\" text-anchor=\"middle\" font-size=\"10\">" << num(fx) << "</text>\n";
      os << "<text x=\"" << num(kLeft - 5) << "\" y=\"" << num(py(fy) + 3)
         << "\" text-anchor=\"end\" font-size=\"10\">" << num(fy) << "</text>\n";
      os << "<line x1=\"" << num(kLeft) << "\" x2=\"" << num(kLeft + plot_w()) << "\" y1=\""
         << num(py(fy)) << "\" y2=\"" << num(py(fy)) << "\" stroke=\"#eee\"/>\n";
    }
    os << "<text x=\"" << num(kLeft + plot_w() / 2) << "\" y=\"" << num(height_ - 8)
       << "\" text-anchor=\"middle\" font-size=\"12\">" << escape(xlabel_) << "</text>\n";
    os << "<text x=\"14\" y=\"" << num(kTop + plot_h() / 2) << "\" font-size=\"12\" transform=\"rotate(-90 14 "
       << num(kTop + plot_h() / 2) << ")\" text-anchor=\"middle\">" << escape(ylabel_) << "</text>\n";
    os << "<clipPath id=\"frame\"><rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\""
       << num(plot_w()) << "\" height=\"" << num(plot_h()) << "\"/></clipPath>\n";
    os << "<g clip-path=\"url(#frame)\">\n";
    for (const std::string& b : body_) os << b << '\n';
    os << "</g>\n";
    for (std::size_t i = 0; i < legend_.size(); ++i) {
      const double y = kTop + 14 + 14.0 * static_cast<double>(i);
      os << "<line x1=\"" << num(kLeft + 10) << "\" x2=\"" << num(kLeft + 30) << "\" y1=\"" << num(y)
         << "\" y2=\"" << num(y) << "\" stroke=\"" << legend_[i].second << "\" stroke-width=\"2\"/>"
         << "<text x=\"" << num(kLeft + 35) << "\" y=\"" << num(y + 4) << "\" font-size=\"11\">"
         << escape(legend_[i].first) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
  }

  void save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    os << str();
    if (!os) throw std::runtime_error("cannot write " + path);
  }

 private:
  static constexpr double kLeft = 70.0;
  static constexpr double kTop = 35.0;
  static constexpr double kRight = 20.0;
  static constexpr double kBottom = 45.0;

  double plot_w() const { return width_ - kLeft - kRight; }
  double plot_h() const { return height_ - kTop - kBottom; }
  double px(double x) const { return kLeft + (x - x0_) / (x1_ - x0_) * plot_w(); }
  double py(double y) const { return kTop + (1.0 - (y - y0_) / (y1_ - y0_)) * plot_h(); }

  double width_;
  double height_;
  std::string title_;
  std::string xlabel_;
  std::string ylabel_;
  double x0_ = 0.0, x1_ = 1.0, y0_ = 0.0, y1_ = 1.0;
  std::vector<std::string> body_;
  std::vector<std::pair<std::string, std::string>> legend_;
};

}  // namespace lanesafe::svg
