#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "cli.hpp"

namespace functorium::cli {

namespace {

constexpr double kWidth = 480.0;
constexpr double kHeight = 480.0;
constexpr double kMargin = 40.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
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

}  // namespace

std::string scatter_svg(const std::string& title, const std::vector<ScatterLayer>& layers) {
  double lo_x = std::numeric_limits<double>::infinity(), hi_x = -lo_x;
  double lo_y = lo_x, hi_y = -lo_x;
  for (const auto& l : layers) {
    if (l.points.rank() != 2 || l.points.cols() != 2) {
      throw ShapeError("scatter layer '" + l.label + "' is not [n, 2]");
    }
    for (std::size_t r = 0; r < l.points.rows(); ++r) {
      lo_x = std::min(lo_x, l.points.at(r, 0));
      hi_x = std::max(hi_x, l.points.at(r, 0));
      lo_y = std::min(lo_y, l.points.at(r, 1));
      hi_y = std::max(hi_y, l.points.at(r, 1));
    }
  }
  if (!std::isfinite(lo_x)) lo_x = lo_y = -1.0, hi_x = hi_y = 1.0;
  // Equal scale on both axes, padded.
  const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-9}) * 1.1;
  const double cx = 0.5 * (lo_x + hi_x), cy = 0.5 * (lo_y + hi_y);
  const double scale = (kWidth - 2 * kMargin) / span;
  auto px = [&](double x) { return kWidth / 2 + (x - cx) * scale; };
  auto py = [&](double y) { return kHeight / 2 - (y - cy) * scale; };

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) +
                  "\" height=\"" + num(kHeight) + "\" viewBox=\"0 0 " + num(kWidth) + " " +
                  num(kHeight) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(kMargin) + "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" +
       escape(title) + "</text>\n";
  s += "<rect x=\"" + num(kMargin) + "\" y=\"" + num(kMargin) + "\" width=\"" +
       num(kWidth - 2 * kMargin) + "\" height=\"" + num(kHeight - 2 * kMargin) +
       "\" fill=\"none\" stroke=\"#999\"/>\n";
  for (const auto& l : layers) {
    s += "<g fill=\"" + escape(l.color) + "\" fill-opacity=\"0.5\">\n";
    for (std::size_t r = 0; r < l.points.rows(); ++r) {
      s += "<circle cx=\"" + num(px(l.points.at(r, 0))) + "\" cy=\"" +
           num(py(l.points.at(r, 1))) + "\" r=\"2\"/>\n";
    }
    s += "</g>\n";
  }
  double ly = kHeight - kMargin + 16;
  double lx = kMargin;
  for (const auto& l : layers) {
    s += "<circle cx=\"" + num(lx + 4) + "\" cy=\"" + num(ly - 4) + "\" r=\"4\" fill=\"" +
         escape(l.color) + "\"/>\n";
    s += "<text x=\"" + num(lx + 12) + "\" y=\"" + num(ly) +
         "\" font-family=\"sans-serif\" font-size=\"11\">" + escape(l.label) + "</text>\n";
    lx += 16 + 7.0 * static_cast<double>(l.label.size());
  }
  s += "</svg>\n";
  return s;
}

}  // namespace functorium::cli
