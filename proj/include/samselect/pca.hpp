#pragma once

#include <array>
#include <string>
#include <vector>

#include "samselect/grid.hpp"
#include "samselect/raster_io.hpp"

namespace samselect {

// Principal axes of the band covariance over all pixels of an image.
struct PcaModel {
  std::vector<double> band_means;
  // Eigenvalues in descending order, one per band.
  std::vector<double> eigenvalues;
  // loadings[k] is the unit eigenvector of component k (band-indexed), with
  // its largest-magnitude entry positive.
  std::vector<std::vector<double>> loadings;
  // Components whose eigenvalue exceeds the rank tolerance.
  std::size_t rank = 0;
};

// Covariance normalized by (pixels - 1). Components with eigenvalue below
// 1e-12 * max(1, largest eigenvalue) count as degenerate.
PcaModel fit_pca(const MultibandImage& image);

// Score image (x - mean) . loading for component `component` (0-based).
Raster project_component(const MultibandImage& image, const PcaModel& model,
                         std::size_t component);

struct PcaProjection {
  PcaModel model;
  // Unnormalized score images; degenerate channels are constant zero.
  std::array<Raster, 3> scores;
  std::array<bool, 3> degenerate{false, false, false};
  std::vector<std::string> diagnostics;
};

// Scores for the 1-based components (default PC1..PC3), fit on `fit_source`
// (defaults to `image` itself).
PcaProjection pca_project(const MultibandImage& image, std::array<int, 3> components = {1, 2, 3},
                          const MultibandImage* fit_source = nullptr);

}  // namespace samselect
