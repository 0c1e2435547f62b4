#pragma once

#include <array>
#include <string>
#include <vector>

#include "samselect/grid.hpp"
#include "samselect/raster_io.hpp"
#include "samselect/viz.hpp"

namespace samselect {

// Percentile with linear interpolation between closest ranks (the numpy
// default). Non-finite values are ignored. `p` in [0, 100].
double percentile(std::span<const double> values, double p);

// clamp((x - lo) / (hi - lo), 0, 1) with lo, hi the p_low / p_high
// percentiles. Constant channels map to 0.5, non-finite pixels to 0.
Raster normalize_percentile(const Raster& channel, double p_low = 1.0, double p_high = 99.0);

// Same stretch with externally supplied bounds.
Raster normalize_with_bounds(const Raster& channel, double lo, double hi);

struct IndexImage {
  Raster values;
  IndexSpec spec;
};

// (b1 - b2) / (b1 + b2); pixels with b1 + b2 == 0 map to 0.
IndexImage compute_ndi(const MultibandImage& image, std::string_view b1, std::string_view b2);

// (lambda_c - lambda_minus) / (lambda_plus - lambda_minus). Requires
// lambda_minus <= lambda_c <= lambda_plus and lambda_minus < lambda_plus.
double interpolation_factor(double lambda_minus, double lambda_c, double lambda_plus);

// b_minus + (b_plus - b_minus) * f.
Raster virtual_band(const MultibandImage& image, std::string_view b_minus,
                    std::string_view b_plus, double lambda_c);

// b_c - virtual_band(b_minus, b_plus, lambda(b_c)); strict wavelength order.
IndexImage compute_ssi(const MultibandImage& image, std::string_view b_minus,
                       std::string_view b_c, std::string_view b_plus);

IndexImage compute_index(const MultibandImage& image, const IndexSpec& spec);

struct RenderedVisualization {
  std::array<Raster, 3> rgb;  // red, green, blue; values in [0, 1]
  VizSpec spec;
  std::string patch_id;

  int height() const noexcept { return rgb[0].height(); }
  int width() const noexcept { return rgb[0].width(); }
};

struct RenderOptions {
  double p_low = 1.0;
  double p_high = 99.0;
  // When set, percentile bounds come from the same channel computed over
  // this image (typically the whole scene) instead of the patch.
  const MultibandImage* statistics_source = nullptr;
};

// Unnormalized channel images of a spec: raw bands for BC, the index image
// replicated for NDI/SSI, three index images for SIC, PC scores for PCA.
std::array<Raster, 3> channel_images(const MultibandImage& image, const VizSpec& spec,
                                     std::vector<std::string>* diagnostics = nullptr);

RenderedVisualization render(const MultibandImage& image, const VizSpec& spec,
                             std::string patch_id = {}, const RenderOptions& options = {});

}  // namespace samselect
