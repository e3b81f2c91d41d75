#pragma once

#include <string>
#include <vector>

#include "emag/common.hpp"

namespace emag::svg {

struct Series {
  std::string name;
  std::vector<double> x, y;
  std::string color = "#1f77b4";
  double radius = 3.0;
};

struct Axes {
  std::string title, xlabel, ylabel;
  int width = 480, height = 360;
};

std::string scatter(const std::vector<Series>& series, const Axes& axes);
std::string line(const std::vector<Series>& series, const Axes& axes);
/// Equal-width bins over [min, max] of the finite values.
std::string histogram(const std::vector<double>& values, int bins, const Axes& axes);
/// Row/column labels index the matrix; colour runs from white (min) to blue (max).
std::string heatmap(const Mat& values, const std::vector<std::string>& row_labels,
                    const std::vector<std::string>& col_labels, const Axes& axes);

}  // namespace emag::svg
