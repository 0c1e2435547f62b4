#include "samselect/mask_ops.hpp"

#include <algorithm>
#include <cmath>

namespace samselect {

std::vector<std::vector<PixelCoord>> connected_components(const Mask& mask) {
  std::vector<std::vector<PixelCoord>> components;
  Grid<std::uint8_t> seen(mask.height(), mask.width(), 0);
  std::vector<PixelCoord> stack;
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      if (!mask(r, c) || seen(r, c)) continue;
      std::vector<PixelCoord> members;
      stack.push_back({r, c});
      seen(r, c) = 1;
      while (!stack.empty()) {
        const PixelCoord p = stack.back();
        stack.pop_back();
        members.push_back(p);
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const int nr = p.row + dr;
            const int nc = p.col + dc;
            if ((dr || dc) && mask.contains(nr, nc) && mask(nr, nc) && !seen(nr, nc)) {
              seen(nr, nc) = 1;
              stack.push_back({nr, nc});
            }
          }
        }
      }
      std::sort(members.begin(), members.end());
      components.push_back(std::move(members));
    }
  }
  return components;
}

Centroid centroid_of(const std::vector<PixelCoord>& pixels) {
  Centroid c;
  if (pixels.empty()) return c;
  for (const auto& p : pixels) {
    c.row += p.row;
    c.col += p.col;
  }
  c.row /= static_cast<double>(pixels.size());
  c.col /= static_cast<double>(pixels.size());
  return c;
}

int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

Mask complement(const Mask& mask) {
  Mask out(mask.height(), mask.width());
  auto src = mask.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] ? 0 : 1;
  return out;
}

}  // namespace samselect
