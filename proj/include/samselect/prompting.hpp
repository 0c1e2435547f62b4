#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "samselect/grid.hpp"
#include "samselect/raster_io.hpp"
#include "samselect/render.hpp"

namespace samselect {

enum class PromptLabel { foreground, background };

struct Prompt {
  int row = 0;
  int col = 0;
  PromptLabel label = PromptLabel::foreground;
  friend bool operator==(const Prompt&, const Prompt&) = default;
};

enum class PromptSelector { manual, centroid, skeleton, kmeans };

std::string_view selector_name(PromptSelector s);
PromptSelector parse_selector(std::string_view text);  // throws ConfigError

struct PromptSet {
  std::vector<Prompt> points;
  PromptSelector selector = PromptSelector::manual;
  std::uint64_t seed = 0;
  std::vector<std::string> diagnostics;

  std::size_t foreground_count() const;
  std::size_t background_count() const;
};

struct KMeansConfig {
  int k = 10;
  int max_iter = 100;
  std::uint64_t seed = 0;
};

// Prompts as given; out-of-bounds points throw DataError, label/mask
// disagreements are kept and reported in `diagnostics`.
PromptSet prompts_manual(const std::vector<Prompt>& points, const Patch& patch);

// One prompt per 8-connected component with more than `min_size` pixels: its
// centroid rounded half up, snapped to the nearest component pixel (ties:
// smallest row, then col) when the rounded centroid is off the component.
// Throws DataError when no component qualifies.
PromptSet prompts_centroid(const Patch& patch, int min_size = 10);

// Zhang-Suen thinning iterated to a fixpoint.
Mask skeletonize(const Mask& mask);

// Per component: larger than `min_size` pixels samples one skeleton pixel
// uniformly from the stream (seed, patch id, "skeleton"); smaller ones (or
// ones whose skeleton vanishes) use the centroid rule.
PromptSet prompts_skeleton(const Patch& patch, int min_size = 10, std::uint64_t seed = 0);

// k-means over the rendered RGB values of the true pixels of `mask`
// (k-means++ seeding, Lloyd iterations). Returns, per non-empty cluster, the
// member pixel nearest the centroid (ties: smallest row, then col), sorted by
// (row, col). At most `k` points; all pixels when there are no more than k.
std::vector<PixelCoord> kmeans_representatives(const Mask& mask,
                                               const RenderedVisualization& rendered,
                                               const KMeansConfig& cfg,
                                               std::string_view stream_key);

PromptSet prompts_kmeans(const Patch& patch, const RenderedVisualization& rendered,
                         const KMeansConfig& cfg);

// Appends min(#foreground, 10) background prompts chosen by k-means over the
// complement of the patch mask, topped up with seeded draws of unused
// background pixels when clusters collapse. No-op with a diagnostic when the
// patch has no background.
PromptSet add_background_prompts(const Patch& patch, const PromptSet& fg,
                                 const RenderedVisualization& rendered, const KMeansConfig& cfg);

// Manual prompts file: JSON list of {patch_id, row, col, label} with label
// "foreground"/"background" (also "+"/"-", 1/0). Grouped by patch id.
std::map<std::string, std::vector<Prompt>> load_manual_prompts(const std::filesystem::path& path);

}  // namespace samselect
