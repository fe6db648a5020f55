#include "si3/cli/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "si3/csv.hpp"
#include "si3/error.hpp"

namespace si3::cli {
namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 500.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 170.0;  // room for the legend
constexpr double kTop = 50.0;
constexpr double kBottom = 70.0;

constexpr std::array<const char*, 8> kPalette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                                 "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

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

std::string num(double v) { return csv::format_double(v, 2); }

void check(const Chart& chart) {
  if (chart.categories.empty() || chart.series.empty()) {
    throw ValidationError("chart needs at least one category and one series");
  }
  for (const auto& s : chart.series) {
    if (s.values.size() != chart.categories.size()) {
      throw ValidationError("series '" + s.name + "' does not match the category count");
    }
  }
}

// Value range rounded out to tenths, always including 0..1 metric space when
// values fall inside it.
std::pair<double, double> y_range(const Chart& chart) {
  double lo = 0.0;
  double hi = 1.0;
  for (const auto& s : chart.series) {
    for (double v : s.values) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  return {std::floor(lo * 10.0) / 10.0, std::ceil(hi * 10.0) / 10.0};
}

struct Frame {
  double lo, hi;
  double plot_w = kWidth - kLeft - kRight;
  double plot_h = kHeight - kTop - kBottom;
  double y(double v) const { return kTop + plot_h * (1.0 - (v - lo) / (hi - lo)); }
};

void open(std::ostringstream& os, const Chart& chart, const Frame& f) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 500\" width=\"800\" "
        "height=\"500\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"800\" height=\"500\" fill=\"white\"/>\n";
  os << "<text x=\"" << num(kWidth / 2) << "\" y=\"28\" text-anchor=\"middle\" font-size=\"16\">"
     << escape(chart.title) << "</text>\n";
  // axes
  os << "<g class=\"axes\" stroke=\"black\">\n";
  os << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(kLeft)
     << "\" y2=\"" << num(kTop + f.plot_h) << "\"/>\n";
  os << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop + f.plot_h) << "\" x2=\""
     << num(kLeft + f.plot_w) << "\" y2=\"" << num(kTop + f.plot_h) << "\"/>\n";
  os << "</g>\n";
  const int ticks = static_cast<int>(std::lround((f.hi - f.lo) / 0.1));
  const int step = ticks > 10 ? (ticks + 9) / 10 : 1;
  for (int t = 0; t <= ticks; t += step) {
    const double v = f.lo + 0.1 * t;
    const double y = f.y(v);
    os << "<line x1=\"" << num(kLeft - 4) << "\" y1=\"" << num(y) << "\" x2=\""
       << num(kLeft + f.plot_w) << "\" y2=\"" << num(y) << "\" stroke=\"#dddddd\"/>\n";
    os << "<text class=\"tick\" x=\"" << num(kLeft - 8) << "\" y=\"" << num(y + 4)
       << "\" text-anchor=\"end\">" << csv::format_double(v, 1) << "</text>\n";
  }
  os << "<text x=\"" << num(kLeft + f.plot_w / 2) << "\" y=\"" << num(kHeight - 20)
     << "\" text-anchor=\"middle\">" << escape(chart.x_label) << "</text>\n";
  os << "<text x=\"20\" y=\"" << num(kTop + f.plot_h / 2) << "\" text-anchor=\"middle\" "
     << "transform=\"rotate(-90 20 " << num(kTop + f.plot_h / 2) << ")\">"
     << escape(chart.y_label) << "</text>\n";
}

void legend(std::ostringstream& os, const Chart& chart) {
  os << "<g class=\"legend\">\n";
  for (std::size_t s = 0; s < chart.series.size(); ++s) {
    const double y = kTop + 10 + 20.0 * static_cast<double>(s);
    const double x = kWidth - kRight + 20;
    os << "<rect x=\"" << num(x) << "\" y=\"" << num(y - 9) << "\" width=\"12\" height=\"12\" fill=\""
       << kPalette[s % kPalette.size()] << "\"/>\n";
    os << "<text x=\"" << num(x + 18) << "\" y=\"" << num(y + 1) << "\">"
       << escape(chart.series[s].name) << "</text>\n";
  }
  os << "</g>\n";
}

void value_label(std::ostringstream& os, double x, double y, double v) {
  os << "<text class=\"value\" x=\"" << num(x) << "\" y=\"" << num(y)
     << "\" text-anchor=\"middle\" font-size=\"10\">"
     << (std::isfinite(v) ? csv::format_double(v, 3) : "nan") << "</text>\n";
}

}  // namespace

std::string bar_chart_svg(const Chart& chart) {
  check(chart);
  const auto [lo, hi] = y_range(chart);
  Frame f{lo, hi};
  std::ostringstream os;
  open(os, chart, f);
  const double group_w = f.plot_w / static_cast<double>(chart.categories.size());
  const double bar_w = group_w * 0.8 / static_cast<double>(chart.series.size());
  const double base = f.y(std::max(lo, 0.0));
  for (std::size_t c = 0; c < chart.categories.size(); ++c) {
    const double gx = kLeft + group_w * static_cast<double>(c);
    os << "<text class=\"category\" x=\"" << num(gx + group_w / 2) << "\" y=\""
       << num(kTop + f.plot_h + 18) << "\" text-anchor=\"middle\">" << escape(chart.categories[c])
       << "</text>\n";
    for (std::size_t s = 0; s < chart.series.size(); ++s) {
      const double v = chart.series[s].values[c];
      const double x = gx + group_w * 0.1 + bar_w * static_cast<double>(s);
      const double top = std::isfinite(v) ? f.y(v) : base;
      os << "<rect class=\"bar\" x=\"" << num(x) << "\" y=\"" << num(std::min(top, base))
         << "\" width=\"" << num(bar_w) << "\" height=\"" << num(std::abs(base - top))
         << "\" fill=\"" << kPalette[s % kPalette.size()] << "\"/>\n";
      value_label(os, x + bar_w / 2, std::min(top, base) - 4, v);
    }
  }
  legend(os, chart);
  os << "</svg>\n";
  return os.str();
}

std::string line_chart_svg(const Chart& chart) {
  check(chart);
  const auto [lo, hi] = y_range(chart);
  Frame f{lo, hi};
  std::ostringstream os;
  open(os, chart, f);
  const std::size_t n = chart.categories.size();
  auto x_at = [&](std::size_t c) {
    return n == 1 ? kLeft + f.plot_w / 2
                  : kLeft + 20 + (f.plot_w - 40) * static_cast<double>(c) / static_cast<double>(n - 1);
  };
  for (std::size_t c = 0; c < n; ++c) {
    os << "<text class=\"category\" x=\"" << num(x_at(c)) << "\" y=\"" << num(kTop + f.plot_h + 18)
       << "\" text-anchor=\"middle\">" << escape(chart.categories[c]) << "</text>\n";
  }
  for (std::size_t s = 0; s < chart.series.size(); ++s) {
    const char* colour = kPalette[s % kPalette.size()];
    std::string points;
    for (std::size_t c = 0; c < n; ++c) {
      const double v = chart.series[s].values[c];
      if (!std::isfinite(v)) continue;
      if (!points.empty()) points += ' ';
      points += num(x_at(c)) + "," + num(f.y(v));
    }
    os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\""
       << points << "\"/>\n";
    for (std::size_t c = 0; c < n; ++c) {
      const double v = chart.series[s].values[c];
      if (!std::isfinite(v)) continue;
      os << "<circle class=\"point\" cx=\"" << num(x_at(c)) << "\" cy=\"" << num(f.y(v))
         << "\" r=\"4\" fill=\"" << colour << "\"/>\n";
      value_label(os, x_at(c), f.y(v) - 8, v);
    }
  }
  legend(os, chart);
  os << "</svg>\n";
  return os.str();
}

}  // namespace si3::cli
