#include "samselect/render.hpp"

#include <algorithm>
#include <functional>
#include <cmath>
#include <limits>

#include "samselect/error.hpp"
#include "samselect/pca.hpp"

namespace samselect {
namespace {

struct Bounds {
  double lo = 0.0;
  double hi = 0.0;
};

// The sorted-order values at positions k and k+1 (k+1 clamped to the end).
// Extreme ranks keep a bounded heap of the k+2 smallest (or largest) values,
// which rejects most inputs with one comparison; central ranks partition.
std::pair<double, double> order_statistics(std::vector<double>& v, std::size_t k) {
  const std::size_t n = v.size();
  const std::size_t next = std::min(k + 1, n - 1);
  const std::size_t from_top = n - 1 - k;
  if (k + 2 <= n / 16) {
    std::vector<double> heap(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k + 2));
    std::make_heap(heap.begin(), heap.end());  // max-heap of the smallest
    for (std::size_t i = k + 2; i < n; ++i)
      if (v[i] < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = v[i];
        std::push_heap(heap.begin(), heap.end());
      }
    std::sort(heap.begin(), heap.end());
    return {heap[k], heap[next]};
  }
  if (from_top + 2 <= n / 16) {
    // Positions k and k+1 are the (from_top+1)-th and from_top-th largest.
    const std::size_t m = from_top + 1;
    std::vector<double> heap(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m + 1));
    std::make_heap(heap.begin(), heap.end(), std::greater<>{});  // min-heap of the largest
    for (std::size_t i = m + 1; i < n; ++i)
      if (v[i] > heap.front()) {
        std::pop_heap(heap.begin(), heap.end(), std::greater<>{});
        heap.back() = v[i];
        std::push_heap(heap.begin(), heap.end(), std::greater<>{});
      }
    std::sort(heap.begin(), heap.end(), std::greater<>{});
    const double at_k = heap[m - 1];
    const double at_next = next == k ? at_k : heap[m - 2];
    return {at_k, at_next};
  }
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  const double a = v[k];
  if (next == k) return {a, a};
  return {a, *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(k) + 1, v.end())};
}

// Linear-interpolated percentiles over the finite values.
Bounds percentile_bounds(std::span<const double> values, double p_low, double p_high) {
  std::vector<double> v;
  v.reserve(values.size());
  for (double x : values)
    if (std::isfinite(x)) v.push_back(x);
  if (v.empty()) return {0.0, 0.0};
  auto at_rank = [&](double p) {
    const double rank = p / 100.0 * static_cast<double>(v.size() - 1);
    const auto k = static_cast<std::size_t>(std::floor(rank));
    const double frac = rank - static_cast<double>(k);
    const auto [a, b] = order_statistics(v, k);
    return frac == 0.0 ? a : a + frac * (b - a);
  };
  const double lo = at_rank(p_low);
  const double hi = at_rank(p_high);
  return {lo, hi};
}

void check_percentiles(double p_low, double p_high) {
  if (!(p_low >= 0.0 && p_high <= 100.0 && p_low < p_high))
    throw ConfigError("percentiles must satisfy 0 <= p_low < p_high <= 100");
}

}  // namespace

double percentile(std::span<const double> values, double p) {
  if (!(p >= 0.0 && p <= 100.0)) throw ConfigError("percentile must lie in [0, 100]");
  const auto b = percentile_bounds(values, p, p);
  return b.lo;
}

Raster normalize_with_bounds(const Raster& channel, double lo, double hi) {
  Raster out(channel.height(), channel.width());
  auto src = channel.values();
  auto dst = out.values();
  if (!(hi > lo)) {
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = std::isfinite(src[i]) ? 0.5 : 0.0;
    return out;
  }
  const double range = hi - lo;
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (!std::isfinite(src[i])) {
      dst[i] = 0.0;
      continue;
    }
    dst[i] = std::clamp((src[i] - lo) / range, 0.0, 1.0);
  }
  return out;
}

Raster normalize_percentile(const Raster& channel, double p_low, double p_high) {
  check_percentiles(p_low, p_high);
  const auto b = percentile_bounds(channel.values(), p_low, p_high);
  return normalize_with_bounds(channel, b.lo, b.hi);
}

IndexImage compute_ndi(const MultibandImage& image, std::string_view b1, std::string_view b2) {
  const Raster& x = image.band(b1);
  const Raster& y = image.band(b2);
  Raster out(x.height(), x.width());
  auto xs = x.values();
  auto ys = y.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const double sum = xs[i] + ys[i];
    dst[i] = sum == 0.0 ? 0.0 : (xs[i] - ys[i]) / sum;
  }
  return {std::move(out), NormalizedDifference{to_upper(b1), to_upper(b2)}};
}

double interpolation_factor(double lambda_minus, double lambda_c, double lambda_plus) {
  if (!(lambda_minus < lambda_plus) || lambda_c < lambda_minus || lambda_c > lambda_plus)
    throw DataError("wavelength ordering violated: need " + std::to_string(lambda_minus) +
                    " <= " + std::to_string(lambda_c) + " <= " + std::to_string(lambda_plus) +
                    " nm");
  return (lambda_c - lambda_minus) / (lambda_plus - lambda_minus);
}

Raster virtual_band(const MultibandImage& image, std::string_view b_minus,
                    std::string_view b_plus, double lambda_c) {
  const double f =
      interpolation_factor(image.wavelength(b_minus), lambda_c, image.wavelength(b_plus));
  const Raster& lo = image.band(b_minus);
  const Raster& hi = image.band(b_plus);
  Raster out(lo.height(), lo.width());
  auto a = lo.values();
  auto b = hi.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = a[i] + (b[i] - a[i]) * f;
  return out;
}

IndexImage compute_ssi(const MultibandImage& image, std::string_view b_minus,
                       std::string_view b_c, std::string_view b_plus) {
  const double lm = image.wavelength(b_minus);
  const double lc = image.wavelength(b_c);
  const double lp = image.wavelength(b_plus);
  if (!(lm < lc && lc < lp))
    throw DataError("wavelength ordering violated for SSI(" + to_upper(b_minus) + "," +
                    to_upper(b_c) + "," + to_upper(b_plus) + ")");
  Raster out = virtual_band(image, b_minus, b_plus, lc);
  auto center = image.band(b_c).values();
  auto dst = out.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = center[i] - dst[i];
  return {std::move(out), SpectralShape{to_upper(b_minus), to_upper(b_c), to_upper(b_plus)}};
}

IndexImage compute_index(const MultibandImage& image, const IndexSpec& spec) {
  if (const auto* n = std::get_if<NormalizedDifference>(&spec))
    return compute_ndi(image, n->b1, n->b2);
  const auto& s = std::get<SpectralShape>(spec);
  return compute_ssi(image, s.minus, s.center, s.plus);
}

std::array<Raster, 3> channel_images(const MultibandImage& image, const VizSpec& spec,
                                     std::vector<std::string>* diagnostics) {
  validate_viz(spec, SpectralCatalog::from(image));
  switch (kind_of(spec)) {
    case VizKind::bc: {
      const auto& bc = std::get<BandComposite>(spec);
      return {image.band(bc.bands[0]), image.band(bc.bands[1]), image.band(bc.bands[2])};
    }
    case VizKind::ndi:
    case VizKind::ssi: {
      const IndexSpec idx = kind_of(spec) == VizKind::ndi
                                ? IndexSpec{std::get<NormalizedDifference>(spec)}
                                : IndexSpec{std::get<SpectralShape>(spec)};
      Raster values = compute_index(image, idx).values;
      return {values, values, values};
    }
    case VizKind::sic: {
      const auto& sic = std::get<IndexComposite>(spec);
      return {compute_index(image, sic.channels[0]).values,
              compute_index(image, sic.channels[1]).values,
              compute_index(image, sic.channels[2]).values};
    }
    case VizKind::pca: {
      auto projection = pca_project(image, std::get<PrincipalComponents>(spec).components);
      if (diagnostics)
        diagnostics->insert(diagnostics->end(), projection.diagnostics.begin(),
                            projection.diagnostics.end());
      return std::move(projection.scores);
    }
  }
  throw ConfigError("unsupported visualization");
}

RenderedVisualization render(const MultibandImage& image, const VizSpec& spec,
                             std::string patch_id, const RenderOptions& options) {
  check_percentiles(options.p_low, options.p_high);
  RenderedVisualization out;
  out.spec = spec;
  out.patch_id = std::move(patch_id);

  const auto kind = kind_of(spec);
  if (kind == VizKind::pca) {
    const auto& pc = std::get<PrincipalComponents>(spec);
    const auto projection = pca_project(image, pc.components, options.statistics_source);
    std::optional<PcaProjection> reference;
    if (options.statistics_source)
      reference = pca_project(*options.statistics_source, pc.components,
                              options.statistics_source);
    for (int ch = 0; ch < 3; ++ch) {
      if (reference) {
        const auto b = percentile_bounds(reference->scores[ch].values(), options.p_low,
                                         options.p_high);
        out.rgb[ch] = normalize_with_bounds(projection.scores[ch], b.lo, b.hi);
      } else {
        out.rgb[ch] = normalize_percentile(projection.scores[ch], options.p_low, options.p_high);
      }
    }
    return out;
  }

  auto channels = channel_images(image, spec);
  std::optional<std::array<Raster, 3>> reference;
  if (options.statistics_source) reference = channel_images(*options.statistics_source, spec);
  const bool replicated = kind == VizKind::ndi || kind == VizKind::ssi;
  for (int ch = 0; ch < 3; ++ch) {
    if (replicated && ch > 0) {
      out.rgb[ch] = out.rgb[0];
      continue;
    }
    const auto& stats = reference ? (*reference)[ch] : channels[ch];
    const auto b = percentile_bounds(stats.values(), options.p_low, options.p_high);
    out.rgb[ch] = normalize_with_bounds(channels[ch], b.lo, b.hi);
  }
  return out;
}

}  // namespace samselect
