#include "confusion_export.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace fewshot::cli {

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string xml_escape(const std::string& s) {
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

std::string fmt(const char* spec, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

// White to dark blue.
std::string cell_color(double percent) {
  const double t = std::clamp(percent / 100.0, 0.0, 1.0);
  auto channel = [&](int from, int to) {
    return static_cast<int>(from + (to - from) * t + 0.5);
  };
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", channel(255, 8), channel(255, 48), channel(255, 107));
  return buf;
}

}  // namespace

std::string confusion_csv(const EvaluationReport& report) {
  const auto& m = report.confusion;
  const auto pct = m.row_percent();
  std::ostringstream out;
  out << "true,predicted,count,row_percent\n";
  for (std::size_t t = 0; t < m.size(); ++t) {
    for (std::size_t p = 0; p < m.size(); ++p) {
      out << csv_field(report.labels[t]) << ',' << csv_field(report.labels[p]) << ',' << m.count(t, p)
          << ',' << fmt("%.6g", round_sig6(pct[t * m.size() + p])) << '\n';
    }
  }
  return out.str();
}

std::string confusion_svg(const EvaluationReport& report) {
  const auto& m = report.confusion;
  const std::size_t n = m.size();
  const auto pct = m.row_percent();
  std::size_t longest = 4;
  for (const auto& l : report.labels) longest = std::max(longest, l.size());
  const int cell = 48;
  const int margin = static_cast<int>(std::min<std::size_t>(longest, 40) * 7 + 20);
  const int top = 40;
  const int width = margin + cell * static_cast<int>(n) + 20;
  const int height = top + margin + cell * static_cast<int>(n);

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<title>" << xml_escape(report.protocol) << " confusion (row %)</title>\n";
  out << "<text x=\"" << margin << "\" y=\"20\" font-size=\"13\">" << xml_escape(report.protocol)
      << ": accuracy per true class (%)</text>\n";
  for (std::size_t t = 0; t < n; ++t) {
    const int y = top + static_cast<int>(t) * cell;
    out << "<text x=\"" << margin - 6 << "\" y=\"" << y + cell / 2 + 4
        << "\" text-anchor=\"end\">" << xml_escape(report.labels[t]) << "</text>\n";
    for (std::size_t p = 0; p < n; ++p) {
      const int x = margin + static_cast<int>(p) * cell;
      const double v = pct[t * n + p];
      out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell
          << "\" fill=\"" << cell_color(v) << "\" stroke=\"#cccccc\"/>\n";
      out << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4
          << "\" text-anchor=\"middle\" fill=\"" << (v > 50.0 ? "#ffffff" : "#000000") << "\">"
          << fmt("%.1f", v) << "</text>\n";
    }
  }
  const int label_y = top + static_cast<int>(n) * cell + 8;
  for (std::size_t p = 0; p < n; ++p) {
    const int x = margin + static_cast<int>(p) * cell + cell / 2;
    out << "<text x=\"" << x << "\" y=\"" << label_y << "\" text-anchor=\"end\" transform=\"rotate(-60 "
        << x << ' ' << label_y << ")\">" << xml_escape(report.labels[p]) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace fewshot::cli
