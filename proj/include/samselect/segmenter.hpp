#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "samselect/grid.hpp"
#include "samselect/prompting.hpp"
#include "samselect/render.hpp"

namespace samselect {

namespace detail {
struct PaddedPlane;
}

struct BackendCapabilities {
  bool supports_negative_prompts = false;
  bool embedding_cacheable = true;
};

struct ImageEmbedding {
  std::string backend_id;
  std::string patch_id;
  std::string viz_expr;
  std::vector<float> payload;
  std::vector<std::int64_t> shape;
  // Rendered image size the embedding was computed from.
  int image_height = 0;
  int image_width = 0;
};

// Candidate masks from one decode, each with a quality score in [0, 1].
struct CandidateMasks {
  std::vector<Mask> masks;
  std::vector<double> quality;
};

// A promptable segmenter. embed() must be a pure function of the rendered
// image and decode() of (embedding, points). Implementations are not required
// to be thread-safe; the search creates one instance per worker.
class SegmenterBackend {
 public:
  virtual ~SegmenterBackend() = default;
  virtual std::string id() const = 0;
  virtual BackendCapabilities capabilities() const = 0;
  virtual ImageEmbedding embed(const RenderedVisualization& rendered) = 0;
  // Points are in patch pixel coordinates. Masks are patch-sized.
  virtual CandidateMasks decode(const ImageEmbedding& embedding,
                                std::span<const Prompt> points) = 0;
};

using BackendFactory = std::function<std::unique_ptr<SegmenterBackend>()>;

struct DecodeOutcome {
  std::vector<double> quality;
  std::size_t chosen_candidate = 0;
};

struct SegmentationResult {
  Mask mask;
  // One entry per decode: a single one for joint decoding, else one per
  // foreground prompt.
  std::vector<DecodeOutcome> decodes;
};

struct PredictOptions {
  // Decode all prompts at once instead of one decode per foreground prompt.
  bool joint_decode = false;
};

// Per foreground prompt: decode that point together with every background
// point (when supported), keep the highest-quality candidate (ties: lowest
// index) and return the union. Throws DataError without foreground prompts or
// with prompts outside the image.
SegmentationResult predict(SegmenterBackend& backend, const ImageEmbedding& embedding,
                           const PromptSet& prompts, const PredictOptions& options = {});

// Mean of the three channels.
Raster luminance(const RenderedVisualization& rendered);

struct RegionGrowResult {
  Mask mask;
  double quality = 1.0;
};

// 8-connected flood fill from `seed` over pixels whose luminance lies within
// `tau` of the seed's. `blocked` pixels (background prompts) are never
// entered. Quality = min(1, mean |L_in - L_out| over region-boundary
// neighbor pairs / tau); 1 when the region has no outside neighbor.
RegionGrowResult mock_region_grow(const Raster& luminance, PixelCoord seed, double tau = 0.1,
                                  std::span<const PixelCoord> blocked = {});

// Deterministic stand-in for a promptable segmenter: the embedding is the
// rendered image itself and decode grows a region from the first foreground
// point. Optional shared counters record embed/decode calls.
class MockSegmenter final : public SegmenterBackend {
 public:
  struct Counters {
    std::atomic<std::uint64_t> embed_calls{0};
    std::atomic<std::uint64_t> decode_calls{0};
  };

  explicit MockSegmenter(double tau = 0.1, std::shared_ptr<Counters> counters = nullptr);

  std::string id() const override;
  BackendCapabilities capabilities() const override;
  ImageEmbedding embed(const RenderedVisualization& rendered) override;
  CandidateMasks decode(const ImageEmbedding& embedding, std::span<const Prompt> points) override;

  double tau() const noexcept { return tau_; }

 private:
  double tau_;
  std::shared_ptr<Counters> counters_;
  // Luminance of the most recently decoded embedding.
  std::shared_ptr<detail::PaddedPlane> lum_;
  std::pair<std::string, std::string> lum_key_;
};

}  // namespace samselect
