#include "emrld/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace emrld {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 170.0;
constexpr double kTop = 30.0;
constexpr double kBottom = 50.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10.0 * mag;
}

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

void pad_range(double& lo, double& hi) {
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
}

void draw_axes(std::ostringstream& out, const Frame& f, const std::string& x_label, const std::string& y_label) {
  out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kWidth - kLeft - kRight << "\" height=\""
      << kHeight - kTop - kBottom << "\" fill=\"none\" stroke=\"#333\"/>\n";
  const double xs = nice_step(f.x1 - f.x0, 6);
  for (double x = std::ceil(f.x0 / xs) * xs; x <= f.x1 + 1e-9; x += xs) {
    out << "<line x1=\"" << num(f.px(x)) << "\" y1=\"" << kHeight - kBottom << "\" x2=\"" << num(f.px(x)) << "\" y2=\""
        << kHeight - kBottom + 5 << "\" stroke=\"#333\"/>"
        << "<text x=\"" << num(f.px(x)) << "\" y=\"" << kHeight - kBottom + 18
        << "\" font-size=\"11\" text-anchor=\"middle\">" << tick_label(x) << "</text>\n";
  }
  const double ys = nice_step(f.y1 - f.y0, 6);
  for (double y = std::ceil(f.y0 / ys) * ys; y <= f.y1 + 1e-9; y += ys) {
    out << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << num(f.py(y)) << "\" x2=\"" << kLeft << "\" y2=\"" << num(f.py(y))
        << "\" stroke=\"#333\"/>"
        << "<text x=\"" << kLeft - 8 << "\" y=\"" << num(f.py(y) + 4) << "\" font-size=\"11\" text-anchor=\"end\">"
        << tick_label(y) << "</text>\n";
  }
  out << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << kHeight - 12
      << "\" font-size=\"13\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
  out << "<text x=\"16\" y=\"" << (kTop + kHeight - kBottom) / 2 << "\" font-size=\"13\" text-anchor=\"middle\" "
      << "transform=\"rotate(-90 16 " << (kTop + kHeight - kBottom) / 2 << ")\">" << escape(y_label) << "</text>\n";
}

std::string header() {
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\" font-family=\"sans-serif\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  return out.str();
}

std::string star_points(double cx, double cy, double r) {
  std::ostringstream out;
  for (int k = 0; k < 10; ++k) {
    const double rad = (k % 2 == 0) ? r : 0.45 * r;
    const double ang = -M_PI / 2 + k * M_PI / 5;
    out << (k ? " " : "") << num(cx + rad * std::cos(ang)) << "," << num(cy + rad * std::sin(ang));
  }
  return out.str();
}

}  // namespace

std::string render_curves_svg(const std::vector<CurveSeries>& series, const std::string& x_label,
                              const std::string& y_label) {
  if (series.empty()) throw std::invalid_argument("plot: no series");
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    if (s.x.empty() || s.x.size() != s.y.size()) throw std::invalid_argument("plot: series '" + s.label + "' is empty");
    if (!s.band.empty() && s.band.size() != s.y.size()) throw std::invalid_argument("plot: band length mismatch");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double b = s.band.empty() ? 0.0 : s.band[i];
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i] - b);
      y1 = std::max(y1, s.y[i] + b);
    }
  }
  if (!(x1 > x0)) {
    x0 -= 0.5;
    x1 += 0.5;
  }
  pad_range(y0, y1);
  const Frame f{x0, x1, y0, y1};
  std::ostringstream out;
  out << header();
  draw_axes(out, f, x_label, y_label);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    if (!s.band.empty()) {
      out << "<polygon fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) out << num(f.px(s.x[i])) << "," << num(f.py(s.y[i] + s.band[i])) << " ";
      for (std::size_t i = s.x.size(); i-- > 0;) out << num(f.px(s.x[i])) << "," << num(f.py(s.y[i] - s.band[i])) << " ";
      out << "\"/>\n";
    }
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) out << num(f.px(s.x[i])) << "," << num(f.py(s.y[i])) << " ";
    out << "\"><title>" << escape(s.label) << "</title></polyline>\n";
    const double ly = kTop + 14 + 20.0 * static_cast<double>(k);
    out << "<line x1=\"" << kWidth - kRight + 12 << "\" y1=\"" << ly << "\" x2=\"" << kWidth - kRight + 36 << "\" y2=\""
        << ly << "\" stroke=\"" << color << "\" stroke-width=\"3\"/>"
        << "<text class=\"legend\" x=\"" << kWidth - kRight + 42 << "\" y=\"" << ly + 4 << "\" font-size=\"12\">"
        << escape(s.label) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string render_trajectories_svg(EnvKind kind, const std::vector<TrajectoryPlotItem>& items) {
  if (items.empty()) throw std::invalid_argument("plot: no trajectories");
  const EnvSpec& spec = env_spec(kind);
  double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;
  for (const auto& it : items) {
    const auto [gx, gy] = task_goal(kind, it.task);
    x0 = std::min(x0, gx - spec.reward_radius);
    x1 = std::max(x1, gx + spec.reward_radius);
    y0 = std::min(y0, gy - spec.reward_radius);
    y1 = std::max(y1, gy + spec.reward_radius);
    for (const auto& p : it.path) {
      x0 = std::min(x0, p(0));
      x1 = std::max(x1, p(0));
      y0 = std::min(y0, p(1));
      y1 = std::max(y1, p(1));
    }
  }
  pad_range(x0, x1);
  pad_range(y0, y1);
  // Equal scale on both axes so discs stay round.
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  const double scale = std::min(pw / (x1 - x0), ph / (y1 - y0));
  const double cx = 0.5 * (x0 + x1), cy = 0.5 * (y0 + y1);
  const Frame f{cx - 0.5 * pw / scale, cx + 0.5 * pw / scale, cy - 0.5 * ph / scale, cy + 0.5 * ph / scale};

  std::ostringstream out;
  out << header();
  draw_axes(out, f, "x", "y");
  for (std::size_t k = 0; k < items.size(); ++k) {
    const auto [gx, gy] = task_goal(kind, items[k].task);
    const char* color = kPalette[k % std::size(kPalette)];
    out << "<circle class=\"reward-band\" cx=\"" << num(f.px(gx)) << "\" cy=\"" << num(f.py(gy)) << "\" r=\""
        << num(spec.reward_radius * scale) << "\" fill=\"" << color << "\" fill-opacity=\"0.12\" stroke=\"" << color
        << "\" stroke-opacity=\"0.4\"/>\n";
    if (spec.bonus_is_box) {
      const double h = spec.bonus_radius;
      out << "<rect class=\"goal-region\" x=\"" << num(f.px(gx - h)) << "\" y=\"" << num(f.py(gy + h)) << "\" width=\""
          << num(2 * h * scale) << "\" height=\"" << num(2 * h * scale) << "\" fill=\"none\" stroke=\"" << color
          << "\" stroke-dasharray=\"3,2\"/>\n";
    }
  }
  for (std::size_t k = 0; k < items.size(); ++k) {
    const char* color = kPalette[k % std::size(kPalette)];
    out << "<polyline class=\"trajectory\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& p : items[k].path) out << num(f.px(p(0))) << "," << num(f.py(p(1))) << " ";
    out << "\"/>\n";
  }
  for (std::size_t k = 0; k < items.size(); ++k) {
    const auto [gx, gy] = task_goal(kind, items[k].task);
    out << "<polygon class=\"goal\" points=\"" << star_points(f.px(gx), f.py(gy), 8.0)
        << "\" fill=\"gold\" stroke=\"#333\" stroke-width=\"0.8\"/>\n";
  }
  out << "<circle cx=\"" << num(f.px(0.0)) << "\" cy=\"" << num(f.py(0.0)) << "\" r=\"3\" fill=\"#333\"/>\n";
  out << "</svg>\n";
  return out.str();
}

}  // namespace emrld
