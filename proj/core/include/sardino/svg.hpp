#pragma once

#include <string>
#include <vector>

namespace sardino {

/// Minimal line-chart SVG writer for trace and curve plots.
class SvgChart {
 public:
  SvgChart(std::string title, std::string x_label, std::string y_label);

  void add_series(std::string name, std::vector<double> xs,
                  std::vector<double> ys);
  /// Horizontal reference line (e.g. a deadline).
  void add_hline(double y, std::string label);

  void write(const std::string& path) const;

 private:
  std::string title_, x_label_, y_label_;
  struct Series {
    std::string name;
    std::vector<double> xs, ys;
  };
  std::vector<Series> series_;
  struct HLine {
    double y;
    std::string label;
  };
  std::vector<HLine> hlines_;
};

}  // namespace sardino
