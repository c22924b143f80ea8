#include "evbs/svg.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "evbs/error.hpp"

namespace evbs {

namespace {

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
};

// 1-2-5 tick spacing giving roughly `target` intervals.
double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0})
    if (raw <= m * mag) return m * mag;
  return 10.0 * mag;
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << (std::abs(v) < 1e-12 ? 0.0 : v);
  return os.str();
}

std::string coord(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v;
  return os.str();
}

}  // namespace

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

SvgPlot::SvgPlot(std::string title, std::string x_label, std::string y_label)
    : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

void SvgPlot::points(std::vector<double> x, std::vector<double> y, std::string color) {
  if (x.size() != y.size()) throw Error(Errc::invalid_argument, "svg: x and y lengths differ");
  layers_.push_back({Layer::Points, std::move(x), std::move(y), {}, std::move(color)});
}

void SvgPlot::line(std::vector<double> x, std::vector<double> y, std::string color, bool dashed) {
  if (x.size() != y.size()) throw Error(Errc::invalid_argument, "svg: x and y lengths differ");
  layers_.push_back({Layer::Line, std::move(x), std::move(y), {}, std::move(color), dashed});
}

void SvgPlot::band(std::vector<double> x, std::vector<double> lower, std::vector<double> upper, std::string color) {
  if (x.size() != lower.size() || x.size() != upper.size())
    throw Error(Errc::invalid_argument, "svg: band lengths differ");
  layers_.push_back({Layer::Band, std::move(x), std::move(lower), std::move(upper), std::move(color)});
}

void SvgPlot::stems(std::vector<double> x, std::vector<double> y, std::string color) {
  if (x.size() != y.size()) throw Error(Errc::invalid_argument, "svg: x and y lengths differ");
  layers_.push_back({Layer::Stems, std::move(x), std::move(y), {}, std::move(color)});
}

void SvgPlot::hline(double y, std::string color, bool dashed) {
  layers_.push_back({Layer::HLine, {}, {y}, {}, std::move(color), dashed});
}

void SvgPlot::annotate(double x, double y, std::string text) { notes_.push_back({x, y, std::move(text)}); }

void SvgPlot::stamp(std::string text) { stamp_ = std::move(text); }

std::string SvgPlot::render(int width, int height) const {
  const double left = 70, right = 20, top = 40, bottom = 55;
  const double pw = width - left - right, ph = height - top - bottom;

  Range xr, yr;
  for (const auto& l : layers_) {
    for (double v : l.x) xr.add(v);
    for (double v : l.y) yr.add(v);
    for (double v : l.y2) yr.add(v);
    if (l.kind == Layer::Stems) yr.add(0.0);
  }
  if (!(xr.lo <= xr.hi)) xr = {0.0, 1.0};
  if (!(yr.lo <= yr.hi)) yr = {0.0, 1.0};
  auto pad = [](Range& r) {
    const double span = r.hi - r.lo;
    const double p = span > 0 ? 0.04 * span : std::max(0.5, std::abs(r.lo) * 0.1);
    r.lo -= p;
    r.hi += p;
  };
  pad(xr);
  pad(yr);
  auto sx = [&](double v) { return left + (v - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto sy = [&](double v) { return top + (yr.hi - v) / (yr.hi - yr.lo) * ph; };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  if (stamp_) os << "<!-- " << xml_escape(*stamp_) << " -->\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << xml_escape(title_)
     << "</text>\n";

  // Axes and ticks.
  os << "<g stroke=\"#333\" fill=\"none\">\n";
  os << "<path d=\"M" << coord(left) << ',' << coord(top) << " V" << coord(top + ph) << " H" << coord(left + pw)
     << "\"/>\n</g>\n";
  auto ticks = [&](const Range& r, bool horizontal) {
    const double step = nice_step(r.hi - r.lo, 6);
    for (double t = std::ceil(r.lo / step) * step; t <= r.hi + 1e-9 * step; t += step) {
      if (horizontal) {
        const double px = sx(t);
        os << "<path d=\"M" << coord(px) << ',' << coord(top + ph) << " v5\" stroke=\"#333\"/>";
        os << "<text x=\"" << coord(px) << "\" y=\"" << coord(top + ph + 18) << "\" text-anchor=\"middle\">"
           << num(t) << "</text>\n";
      } else {
        const double py = sy(t);
        os << "<path d=\"M" << coord(left - 5) << ',' << coord(py) << " h5\" stroke=\"#333\"/>";
        os << "<text x=\"" << coord(left - 8) << "\" y=\"" << coord(py + 4) << "\" text-anchor=\"end\">" << num(t)
           << "</text>\n";
      }
    }
  };
  ticks(xr, true);
  ticks(yr, false);
  os << "<text x=\"" << coord(left + pw / 2) << "\" y=\"" << height - 12 << "\" text-anchor=\"middle\">"
     << xml_escape(x_label_) << "</text>\n";
  os << "<text transform=\"translate(16," << coord(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
     << xml_escape(y_label_) << "</text>\n";

  auto polyline = [&](const std::vector<double>& x, const std::vector<double>& y) {
    std::string d;
    bool pen = false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
        pen = false;
        continue;
      }
      d += (pen ? " L" : " M") + coord(sx(x[i])) + ',' + coord(sy(y[i]));
      pen = true;
    }
    return d.empty() ? d : d.substr(1);
  };

  std::vector<const Layer*> order;
  for (const auto& l : layers_)
    if (l.kind == Layer::Band) order.push_back(&l);
  for (const auto& l : layers_)
    if (l.kind != Layer::Band) order.push_back(&l);
  for (const Layer* l : order) {
    const std::string dash = l->dashed ? " stroke-dasharray=\"6 4\"" : "";
    switch (l->kind) {
      case Layer::Band: {
        std::string d = polyline(l->x, l->y2);
        for (std::size_t i = l->x.size(); i-- > 0;)
          if (std::isfinite(l->x[i]) && std::isfinite(l->y[i])) d += " L" + coord(sx(l->x[i])) + ',' + coord(sy(l->y[i]));
        if (!d.empty()) os << "<path d=\"" << d << " Z\" fill=\"" << l->color << "\" fill-opacity=\"0.45\" stroke=\"none\"/>\n";
        break;
      }
      case Layer::Line: {
        const std::string d = polyline(l->x, l->y);
        if (!d.empty())
          os << "<path d=\"" << d << "\" fill=\"none\" stroke=\"" << l->color << "\" stroke-width=\"1.6\"" << dash
             << "/>\n";
        break;
      }
      case Layer::Points:
        os << "<g fill=\"" << l->color << "\">\n";
        for (std::size_t i = 0; i < l->x.size(); ++i)
          if (std::isfinite(l->x[i]) && std::isfinite(l->y[i]))
            os << "<circle cx=\"" << coord(sx(l->x[i])) << "\" cy=\"" << coord(sy(l->y[i])) << "\" r=\"2.6\"/>\n";
        os << "</g>\n";
        break;
      case Layer::Stems: {
        std::string d;
        for (std::size_t i = 0; i < l->x.size(); ++i)
          if (std::isfinite(l->x[i]) && std::isfinite(l->y[i]))
            d += (d.empty() ? "M" : " M") + coord(sx(l->x[i])) + ',' + coord(sy(0.0)) + " V" + coord(sy(l->y[i]));
        if (!d.empty()) os << "<path d=\"" << d << "\" stroke=\"" << l->color << "\" stroke-width=\"1.4\"/>\n";
        break;
      }
      case Layer::HLine:
        os << "<path d=\"M" << coord(left) << ',' << coord(sy(l->y[0])) << " H" << coord(left + pw) << "\" stroke=\""
           << l->color << "\" stroke-width=\"1.2\"" << dash << "/>\n";
        break;
    }
  }
  for (const auto& nt : notes_)
    os << "<text x=\"" << coord(sx(nt.x) + 4) << "\" y=\"" << coord(sy(nt.y) - 4) << "\" font-size=\"11\">"
       << xml_escape(nt.text) << "</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace evbs
