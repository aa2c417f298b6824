#include "bevguard/harness/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "bevguard/core/error.hpp"

namespace bevguard::harness {

namespace {

constexpr double kWidth = 640, kHeight = 400, kLeft = 60, kRight = 20, kTop = 40, kBottom = 50;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '&':
        out += "&amp;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

void open_svg(std::ofstream& out, const std::string& path, const std::string& title, const Frame& f,
              const std::string& x_label, const std::string& y_label) {
  out.open(path);
  if (!out) throw InputError("cannot write plot " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
      << "</text>\n";
  out << "<line x1=\"" << kLeft << "\" y1=\"" << f.py(f.y0) << "\" x2=\"" << kWidth - kRight << "\" y2=\"" << f.py(f.y0)
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kLeft << "\" y1=\"" << f.py(f.y0) << "\" x2=\"" << kLeft << "\" y2=\"" << kTop
      << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = f.x0 + (f.x1 - f.x0) * k / 4.0;
    const double yv = f.y0 + (f.y1 - f.y0) * k / 4.0;
    out << "<text x=\"" << f.px(xv) << "\" y=\"" << kHeight - kBottom + 16 << "\" text-anchor=\"middle\">" << num(xv)
        << "</text>\n";
    out << "<text x=\"" << kLeft - 6 << "\" y=\"" << f.py(yv) + 4 << "\" text-anchor=\"end\">" << num(yv)
        << "</text>\n";
  }
  out << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 10 << "\" text-anchor=\"middle\">" << escape(x_label)
      << "</text>\n";
  out << "<text x=\"14\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " << kHeight / 2
      << ")\">" << escape(y_label) << "</text>\n";
}

void legend(std::ofstream& out, std::size_t i, const std::string& label) {
  const double y = kTop + 14.0 * static_cast<double>(i);
  out << "<rect x=\"" << kWidth - kRight - 130 << "\" y=\"" << y - 9 << "\" width=\"10\" height=\"10\" fill=\""
      << kColors[i % 7] << "\"/>\n";
  out << "<text x=\"" << kWidth - kRight - 115 << "\" y=\"" << y << "\">" << escape(label) << "</text>\n";
}

Frame pad(double x0, double x1, double y0, double y1) {
  if (!(x1 > x0)) x1 = x0 + 1.0;
  if (!(y1 > y0)) y1 = y0 + 1.0;
  return {x0, x1, y0, y1};
}

}  // namespace

void write_line_svg(const std::string& path, const std::string& title, const std::string& x_label,
                    const std::string& y_label, const std::vector<Series>& series) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
    for (double v : s.y) y0 = std::min(y0, v), y1 = std::max(y1, v);
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  const double margin = 0.05 * (y1 - y0);
  const Frame f = pad(x0, x1, y0 - margin, y1 + margin);
  std::ofstream out;
  open_svg(out, path, title, f, x_label, y_label);
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    out << "<polyline fill=\"none\" stroke=\"" << kColors[i % 7] << "\" stroke-width=\"2\" points=\"";
    for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k) out << f.px(s.x[k]) << ',' << f.py(s.y[k]) << ' ';
    out << "\"/>\n";
    legend(out, i, s.label);
  }
  out << "</svg>\n";
}

void write_histogram_svg(const std::string& path, const std::string& title,
                         const std::vector<std::pair<std::string, std::vector<double>>>& samples, int bins) {
  bins = std::max(bins, 1);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& [_, v] : samples) {
    for (double x : v) lo = std::min(lo, x), hi = std::max(hi, x);
  }
  if (!std::isfinite(lo)) lo = 0, hi = 1;
  if (!(hi > lo)) hi = lo + 1.0;
  std::vector<std::vector<double>> density(samples.size(), std::vector<double>(static_cast<std::size_t>(bins), 0.0));
  double top = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& v = samples[i].second;
    for (double x : v) {
      auto b = static_cast<std::size_t>((x - lo) / (hi - lo) * bins);
      density[i][std::min(b, static_cast<std::size_t>(bins - 1))] += 1.0 / static_cast<double>(v.size());
    }
    for (double d : density[i]) top = std::max(top, d);
  }
  const Frame f = pad(lo, hi, 0.0, top * 1.05);
  std::ofstream out;
  open_svg(out, path, title, f, "score", "fraction");
  const double bw = (hi - lo) / bins;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (int b = 0; b < bins; ++b) {
      const double d = density[i][static_cast<std::size_t>(b)];
      if (d <= 0.0) continue;
      out << "<rect x=\"" << f.px(lo + b * bw) << "\" y=\"" << f.py(d) << "\" width=\"" << f.px(lo + (b + 1) * bw) - f.px(lo + b * bw)
          << "\" height=\"" << f.py(0.0) - f.py(d) << "\" fill=\"" << kColors[i % 7] << "\" fill-opacity=\"0.45\"/>\n";
    }
    legend(out, i, samples[i].first);
  }
  out << "</svg>\n";
}

}  // namespace bevguard::harness
