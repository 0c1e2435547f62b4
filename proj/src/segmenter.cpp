#include "samselect/segmenter.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "samselect/error.hpp"

namespace samselect {

SegmentationResult predict(SegmenterBackend& backend, const ImageEmbedding& embedding,
                           const PromptSet& prompts, const PredictOptions& options) {
  std::vector<Prompt> foreground;
  std::vector<Prompt> background;
  for (const auto& p : prompts.points) {
    if (p.row < 0 || p.col < 0 || p.row >= embedding.image_height ||
        p.col >= embedding.image_width)
      throw DataError("prompt (" + std::to_string(p.row) + ", " + std::to_string(p.col) +
                      ") outside the " + std::to_string(embedding.image_height) + "x" +
                      std::to_string(embedding.image_width) + " image");
    (p.label == PromptLabel::foreground ? foreground : background).push_back(p);
  }
  if (foreground.empty()) throw DataError("prediction needs at least one foreground prompt");
  if (!backend.capabilities().supports_negative_prompts) background.clear();

  SegmentationResult result;
  result.mask = Mask(embedding.image_height, embedding.image_width, 0);

  auto run = [&](std::span<const Prompt> points) {
    CandidateMasks cand = backend.decode(embedding, points);
    if (cand.masks.empty() || cand.masks.size() != cand.quality.size())
      throw BackendError("backend " + backend.id() + " returned no usable candidate masks");
    std::size_t best = 0;
    for (std::size_t i = 1; i < cand.quality.size(); ++i)
      if (cand.quality[i] > cand.quality[best]) best = i;
    const Mask& chosen = cand.masks[best];
    if (!chosen.same_shape(result.mask))
      throw BackendError("backend " + backend.id() + " returned a mask of the wrong shape");
    auto src = chosen.values();
    auto dst = result.mask.values();
    // Masks hold 0/1, so OR is the union.
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] |= src[i];
    result.decodes.push_back({std::move(cand.quality), best});
  };

  if (options.joint_decode) {
    std::vector<Prompt> all = foreground;
    all.insert(all.end(), background.begin(), background.end());
    run(all);
  } else {
    std::vector<Prompt> points;
    for (const auto& fg : foreground) {
      points.clear();
      points.push_back(fg);
      points.insert(points.end(), background.begin(), background.end());
      run(points);
    }
  }
  return result;
}

Raster luminance(const RenderedVisualization& rendered) {
  Raster out(rendered.height(), rendered.width());
  auto r = rendered.rgb[0].values();
  auto g = rendered.rgb[1].values();
  auto b = rendered.rgb[2].values();
  auto dst = out.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = (r[i] + g[i] + b[i]) / 3.0;
  return out;
}

namespace detail {

// Luminance on a one-pixel NaN frame so neighbor walks need no bounds checks:
// |NaN - x| <= tau is false and the frame is never entered.
struct PaddedPlane {
  int height = 0;
  int width = 0;
  int stride = 0;
  std::vector<double> values;

  PaddedPlane(int h, int w)
      : height(h), width(w), stride(w + 2),
        values(static_cast<std::size_t>(h + 2) * static_cast<std::size_t>(w + 2),
               std::numeric_limits<double>::quiet_NaN()) {}

  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row + 1) * static_cast<std::size_t>(stride) +
           static_cast<std::size_t>(col + 1);
  }
  static PaddedPlane from(const Raster& r) {
    PaddedPlane p(r.height(), r.width());
    for (int row = 0; row < r.height(); ++row)
      for (int col = 0; col < r.width(); ++col) p.values[p.index(row, col)] = r(row, col);
    return p;
  }
  std::array<std::ptrdiff_t, 8> neighbor_offsets() const {
    const auto s = static_cast<std::ptrdiff_t>(stride);
    return {-s - 1, -s, -s + 1, -1, 1, s - 1, s, s + 1};
  }
};

}  // namespace detail

namespace {

using detail::PaddedPlane;

// Flood from `seed`; `state` is 0 for free, 1 for region, 2 for barrier.
// Appends the region's padded indices to `pixels`.
void flood(const PaddedPlane& lum, PixelCoord seed, double tau, std::vector<std::uint8_t>& state,
           std::vector<std::size_t>& pixels) {
  const auto offsets = lum.neighbor_offsets();
  const std::size_t start = lum.index(seed.row, seed.col);
  const double ref = lum.values[start];
  const std::size_t first = pixels.size();
  state[start] = 1;
  pixels.push_back(start);
  for (std::size_t k = first; k < pixels.size(); ++k) {
    const std::size_t p = pixels[k];
    for (auto off : offsets) {
      const std::size_t q = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(p) + off);
      if (state[q] == 0 && std::abs(lum.values[q] - ref) <= tau) {
        state[q] = 1;
        pixels.push_back(q);
      }
    }
  }
}

// Mean |L_in - L_out| over 8-neighbor pairs crossing the region boundary,
// scaled by tau and capped at 1; 1 when nothing borders the region.
double region_quality(const PaddedPlane& lum, const std::vector<std::uint8_t>& state,
                      const std::vector<std::size_t>& pixels, double tau) {
  const auto offsets = lum.neighbor_offsets();
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t p : pixels) {
    for (auto off : offsets) {
      const std::size_t q = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(p) + off);
      if (state[q] == 1 || std::isnan(lum.values[q])) continue;
      sum += std::abs(lum.values[p] - lum.values[q]);
      ++pairs;
    }
  }
  if (pairs == 0) return 1.0;
  return std::min(1.0, sum / static_cast<double>(pairs) / tau);
}

Mask unpad(const PaddedPlane& lum, const std::vector<std::size_t>& pixels) {
  Mask out(lum.height, lum.width, 0);
  auto dst = out.values();
  const auto stride = static_cast<std::size_t>(lum.stride);
  const auto w = static_cast<std::size_t>(lum.width);
  for (std::size_t p : pixels) dst[(p / stride - 1) * w + (p % stride - 1)] = 1;
  return out;
}

}  // namespace

RegionGrowResult mock_region_grow(const Raster& lum, PixelCoord seed, double tau,
                                  std::span<const PixelCoord> blocked) {
  if (!(tau > 0.0)) throw ConfigError("region-grow tolerance tau must be positive");
  if (!lum.contains(seed.row, seed.col))
    throw DataError("region-grow seed outside the image");
  const auto padded = PaddedPlane::from(lum);
  std::vector<std::uint8_t> state(padded.values.size(), 0);
  for (const auto& b : blocked)
    if (lum.contains(b.row, b.col) && !(b == seed)) state[padded.index(b.row, b.col)] = 2;
  std::vector<std::size_t> pixels;
  flood(padded, seed, tau, state, pixels);
  // Barriers count as outside for the quality score.
  for (auto& v : state)
    if (v == 2) v = 0;
  RegionGrowResult out;
  out.quality = region_quality(padded, state, pixels, tau);
  out.mask = unpad(padded, pixels);
  return out;
}

MockSegmenter::MockSegmenter(double tau, std::shared_ptr<Counters> counters)
    : tau_(tau), counters_(std::move(counters)) {
  if (!(tau_ > 0.0)) throw ConfigError("mock backend tau must be positive");
}

std::string MockSegmenter::id() const {
  std::ostringstream s;
  s << "mock(tau=" << tau_ << ")";
  return s.str();
}

BackendCapabilities MockSegmenter::capabilities() const { return {true, true}; }

ImageEmbedding MockSegmenter::embed(const RenderedVisualization& rendered) {
  if (counters_) ++counters_->embed_calls;
  ImageEmbedding e;
  e.backend_id = id();
  e.patch_id = rendered.patch_id;
  e.viz_expr = format_viz_expr(rendered.spec);
  e.image_height = rendered.height();
  e.image_width = rendered.width();
  e.shape = {3, rendered.height(), rendered.width()};
  e.payload.reserve(3 * rendered.rgb[0].size());
  for (const auto& ch : rendered.rgb)
    for (double v : ch.values()) e.payload.push_back(static_cast<float>(v));
  return e;
}

CandidateMasks MockSegmenter::decode(const ImageEmbedding& embedding,
                                     std::span<const Prompt> points) {
  if (counters_) ++counters_->decode_calls;
  const int h = embedding.image_height;
  const int w = embedding.image_width;
  const std::size_t plane = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  if (embedding.payload.size() != 3 * plane)
    throw BackendError("mock embedding payload has the wrong size");

  // Per-prompt decoding hits the same embedding repeatedly; embeddings are a
  // pure function of (patch, visualization), so that pair identifies the plane.
  if (!lum_ || lum_key_.first != embedding.patch_id || lum_key_.second != embedding.viz_expr ||
      lum_->height != h || lum_->width != w) {
    lum_ = std::make_shared<PaddedPlane>(h, w);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        const std::size_t i = static_cast<std::size_t>(r) * static_cast<std::size_t>(w) +
                              static_cast<std::size_t>(c);
        lum_->values[lum_->index(r, c)] =
            (static_cast<double>(embedding.payload[i]) + embedding.payload[plane + i] +
             embedding.payload[2 * plane + i]) /
            3.0;
      }
    lum_key_ = {embedding.patch_id, embedding.viz_expr};
  }
  const PaddedPlane& lum = *lum_;

  std::vector<std::uint8_t> state(lum.values.size(), 0);
  std::vector<std::uint8_t> region(lum.values.size(), 0);
  std::vector<std::size_t> union_pixels, grown;
  for (const auto& p : points) {
    if (p.label != PromptLabel::foreground) continue;
    if (p.row < 0 || p.col < 0 || p.row >= h || p.col >= w)
      throw DataError("region-grow seed outside the image");
    std::fill(state.begin(), state.end(), std::uint8_t{0});
    for (const auto& b : points)
      if (b.label == PromptLabel::background && b.row >= 0 && b.col >= 0 && b.row < h &&
          b.col < w && !(b.row == p.row && b.col == p.col))
        state[lum.index(b.row, b.col)] = 2;
    grown.clear();
    flood(lum, {p.row, p.col}, tau_, state, grown);
    for (std::size_t q : grown)
      if (!region[q]) {
        region[q] = 1;
        union_pixels.push_back(q);
      }
  }
  CandidateMasks cand;
  cand.quality.push_back(region_quality(lum, region, union_pixels, tau_));
  cand.masks.push_back(unpad(lum, union_pixels));
  return cand;
}

}  // namespace samselect
