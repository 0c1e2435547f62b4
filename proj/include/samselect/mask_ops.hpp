#pragma once

#include <vector>

#include "samselect/grid.hpp"

namespace samselect {

// 8-connected components of the true pixels, in raster-scan order of their
// first pixel. Each component lists its pixels in raster-scan order.
std::vector<std::vector<PixelCoord>> connected_components(const Mask& mask);

// Mean row/col of a pixel set.
struct Centroid {
  double row = 0.0;
  double col = 0.0;
};
Centroid centroid_of(const std::vector<PixelCoord>& pixels);

// Rounds half up, so 2.5 -> 3 and -0.5 -> 0.
int round_half_up(double v);

Mask complement(const Mask& mask);

}  // namespace samselect
