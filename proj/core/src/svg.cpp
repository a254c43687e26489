#include "sardino/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "sardino/errors.hpp"

namespace sardino {

namespace {
const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                         "#9467bd", "#8c564b"};
}

SvgChart::SvgChart(std::string title, std::string x_label, std::string y_label)
    : title_(std::move(title)),
      x_label_(std::move(x_label)),
      y_label_(std::move(y_label)) {}

void SvgChart::add_series(std::string name, std::vector<double> xs,
                          std::vector<double> ys) {
  if (xs.size() != ys.size()) throw BadArgument("SvgChart: xs/ys size mismatch");
  series_.push_back({std::move(name), std::move(xs), std::move(ys)});
}

void SvgChart::add_hline(double y, std::string label) {
  hlines_.push_back({y, std::move(label)});
}

void SvgChart::write(const std::string& path) const {
  const double width = 860, height = 480;
  const double ml = 70, mr = 160, mt = 40, mb = 55;
  const double pw = width - ml - mr, ph = height - mt - mb;

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series_) {
    for (double x : s.xs) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
    }
    for (double y : s.ys) {
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  for (const auto& h : hlines_) {
    ymin = std::min(ymin, h.y);
    ymax = std::max(ymax, h.y);
  }
  if (!(xmax > xmin)) xmax = xmin + 1.0;
  if (!(ymax > ymin)) ymax = ymin + 1.0;
  const double ypad = (ymax - ymin) * 0.05;
  ymin -= ypad;
  ymax += ypad;

  auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

  std::ofstream out(path);
  if (!out) throw FormatError("cannot write SVG: " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" font-family=\"sans-serif\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" "
      << "font-size=\"15\">" << title_ << "</text>\n";

  // axes with a few ticks
  out << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw
      << "\" y2=\"" << mt + ph << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
      << "\" y2=\"" << mt + ph << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double fx = xmin + (xmax - xmin) * t / 5.0;
    const double fy = ymin + (ymax - ymin) * t / 5.0;
    out << "<text x=\"" << sx(fx) << "\" y=\"" << mt + ph + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">" << fx << "</text>\n";
    out << "<text x=\"" << ml - 8 << "\" y=\"" << sy(fy) + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << fy << "</text>\n";
  }
  out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\" font-size=\"13\">" << x_label_ << "</text>\n";
  out << "<text x=\"18\" y=\"" << mt + ph / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
      << mt + ph / 2 << ")\">" << y_label_ << "</text>\n";

  for (const auto& h : hlines_) {
    out << "<line x1=\"" << ml << "\" y1=\"" << sy(h.y) << "\" x2=\"" << ml + pw
        << "\" y2=\"" << sy(h.y)
        << "\" stroke=\"#888\" stroke-dasharray=\"6,4\"/>\n";
    out << "<text x=\"" << ml + pw + 6 << "\" y=\"" << sy(h.y) + 4
        << "\" font-size=\"11\" fill=\"#555\">" << h.label << "</text>\n";
  }

  for (std::size_t si = 0; si < series_.size(); ++si) {
    const auto& s = series_[si];
    const char* color = kColors[si % 6];
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      out << sx(s.xs[i]) << ',' << sy(s.ys[i]) << ' ';
    }
    out << "\"/>\n";
    const double ly = mt + 16 + 18.0 * static_cast<double>(si);
    out << "<line x1=\"" << ml + pw + 6 << "\" y1=\"" << ly << "\" x2=\""
        << ml + pw + 26 << "\" y2=\"" << ly << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << ml + pw + 32 << "\" y=\"" << ly + 4
        << "\" font-size=\"12\">" << s.name << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace sardino
