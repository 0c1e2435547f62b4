#include "samselect/pca.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "samselect/error.hpp"

namespace samselect {

PcaModel fit_pca(const MultibandImage& image) {
  const std::size_t bands = image.band_count();
  if (bands == 0) throw DataError("PCA needs at least one band");
  const std::size_t pixels = image.bands.front().size();

  PcaModel model;
  model.band_means.assign(bands, 0.0);
  for (std::size_t b = 0; b < bands; ++b) {
    const auto v = image.bands[b].values();
    model.band_means[b] = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(pixels);
  }

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(bands),
                                              static_cast<Eigen::Index>(bands));
  if (pixels > 1) {
    Eigen::MatrixXd centered(static_cast<Eigen::Index>(pixels), static_cast<Eigen::Index>(bands));
    for (std::size_t b = 0; b < bands; ++b) {
      const auto v = image.bands[b].values();
      for (std::size_t i = 0; i < pixels; ++i)
        centered(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)) =
            v[i] - model.band_means[b];
    }
    cov = (centered.transpose() * centered) / static_cast<double>(pixels - 1);
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw DataError("covariance eigendecomposition failed");
  // Eigen returns ascending eigenvalues.
  const auto& values = solver.eigenvalues();
  const auto& vectors = solver.eigenvectors();
  const double largest = std::max(0.0, values(values.size() - 1));
  const double tol = 1e-12 * std::max(1.0, largest);
  for (Eigen::Index k = values.size() - 1; k >= 0; --k) {
    std::vector<double> loading(bands);
    std::size_t argmax = 0;
    for (std::size_t b = 0; b < bands; ++b) {
      loading[b] = vectors(static_cast<Eigen::Index>(b), k);
      if (std::abs(loading[b]) > std::abs(loading[argmax])) argmax = b;
    }
    if (loading[argmax] < 0.0)
      for (auto& x : loading) x = -x;
    model.eigenvalues.push_back(std::max(0.0, values(k)));
    model.loadings.push_back(std::move(loading));
    if (values(k) > tol) ++model.rank;
  }
  return model;
}

Raster project_component(const MultibandImage& image, const PcaModel& model,
                         std::size_t component) {
  if (component >= model.loadings.size())
    throw DataError("principal component " + std::to_string(component + 1) + " does not exist");
  if (image.band_count() != model.band_means.size())
    throw DataError("PCA model and image differ in band count");
  Raster out(image.height(), image.width(), 0.0);
  auto dst = out.values();
  const auto& loading = model.loadings[component];
  for (std::size_t b = 0; b < image.band_count(); ++b) {
    const auto src = image.bands[b].values();
    const double mean = model.band_means[b];
    const double w = loading[b];
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += (src[i] - mean) * w;
  }
  return out;
}

PcaProjection pca_project(const MultibandImage& image, std::array<int, 3> components,
                          const MultibandImage* fit_source) {
  if (image.band_count() < 3) throw DataError("PCA baseline needs at least 3 bands");
  PcaProjection out;
  out.model = fit_pca(fit_source ? *fit_source : image);
  for (int ch = 0; ch < 3; ++ch) {
    const int comp = components[ch];
    if (comp < 1 || static_cast<std::size_t>(comp) > out.model.loadings.size())
      throw ConfigError("principal component " + std::to_string(comp) + " out of range");
    const auto idx = static_cast<std::size_t>(comp - 1);
    if (idx >= out.model.rank) {
      out.degenerate[ch] = true;
      out.scores[ch] = Raster(image.height(), image.width(), 0.0);
      out.diagnostics.push_back("PC" + std::to_string(comp) +
                                " is degenerate (covariance rank " +
                                std::to_string(out.model.rank) + "); channel set to constant");
    } else {
      out.scores[ch] = project_component(image, out.model, idx);
    }
  }
  return out;
}

}  // namespace samselect
