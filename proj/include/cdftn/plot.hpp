#pragma once

#include <array>
#include <string>
#include <vector>

#include "cdftn/tensor.hpp"

namespace cdftn::plot {

// Multi-series line chart (one value per step), written as a PNG.
void line_chart(const std::string& path, const std::string& title,
                const std::vector<std::string>& series_names,
                const std::vector<std::vector<double>>& series);

// 2-d scatter. color_group selects the palette entry, marker_group 0 draws a
// circle and 1 a cross.
void scatter_2d(const std::string& path, const std::string& title,
                const std::vector<std::array<double, 2>>& points,
                const std::vector<int>& color_group, const std::vector<int>& marker_group);

// Grid of [3,H,W] images in [0,1], row-major.
void image_grid(const std::string& path, const std::vector<Tensor>& images, int cols);

}  // namespace cdftn::plot
