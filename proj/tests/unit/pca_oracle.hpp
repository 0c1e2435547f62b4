#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "samselect/raster_io.hpp"

namespace samselect::testing {

struct OraclePca {
  std::vector<double> means;
  std::vector<double> eigenvalues;                 // descending
  std::vector<std::vector<double>> eigenvectors;   // eigenvectors[k][band]
};

// Sample covariance by direct double loops, eigen-decomposed with cyclic
// Jacobi rotations until the off-diagonal mass vanishes.
inline OraclePca oracle_pca(const MultibandImage& img) {
  const std::size_t nb = img.band_count();
  const std::size_t np = img.bands.front().size();
  OraclePca out;
  out.means.assign(nb, 0.0);
  for (std::size_t b = 0; b < nb; ++b) {
    for (double v : img.bands[b].values()) out.means[b] += v;
    out.means[b] /= static_cast<double>(np);
  }
  std::vector<std::vector<double>> a(nb, std::vector<double>(nb, 0.0));
  for (std::size_t i = 0; i < nb; ++i)
    for (std::size_t j = i; j < nb; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < np; ++p)
        s += (img.bands[i].values()[p] - out.means[i]) * (img.bands[j].values()[p] - out.means[j]);
      a[i][j] = a[j][i] = s / static_cast<double>(np - 1);
    }
  std::vector<std::vector<double>> v(nb, std::vector<double>(nb, 0.0));
  for (std::size_t i = 0; i < nb; ++i) v[i][i] = 1.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < nb; ++i)
      for (std::size_t j = i + 1; j < nb; ++j) off += a[i][j] * a[i][j];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < nb; ++p)
      for (std::size_t q = p + 1; q < nb; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < nb; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < nb; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < nb; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
  }
  std::vector<std::size_t> order(nb);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return a[x][x] > a[y][y]; });
  for (auto k : order) {
    out.eigenvalues.push_back(a[k][k]);
    std::vector<double> vec(nb);
    for (std::size_t b = 0; b < nb; ++b) vec[b] = v[b][k];
    out.eigenvectors.push_back(vec);
  }
  return out;
}

// Largest per-pixel score difference between `scores` and the oracle's
// component `k`, after matching the sign.
inline double score_deviation(const MultibandImage& img, const OraclePca& o, std::size_t k,
                              const Raster& scores) {
  const std::size_t np = img.bands.front().size();
  std::vector<double> ref(np, 0.0);
  for (std::size_t p = 0; p < np; ++p)
    for (std::size_t b = 0; b < img.band_count(); ++b)
      ref[p] += (img.bands[b].values()[p] - o.means[b]) * o.eigenvectors[k][b];
  double dot = 0.0;
  for (std::size_t p = 0; p < np; ++p) dot += ref[p] * scores.values()[p];
  const double sign = dot < 0 ? -1.0 : 1.0;
  double worst = 0.0;
  for (std::size_t p = 0; p < np; ++p)
    worst = std::max(worst, std::abs(sign * ref[p] - scores.values()[p]));
  return worst;
}

}  // namespace samselect::testing
