#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "samselect/embedding_cache.hpp"
#include "samselect/prompting.hpp"
#include "samselect/raster_io.hpp"
#include "samselect/segmenter.hpp"
#include "samselect/viz.hpp"

namespace samselect {

// |pred & gt| / |pred | gt|; 1 when both are empty. Throws DataError on a
// shape mismatch.
double iou(const Mask& pred, const Mask& gt);

struct Dataset {
  std::vector<Patch> patches;
  std::string site_name;
  // Source scene, needed only for scene-level normalization statistics.
  std::shared_ptr<const MultibandImage> scene_image;

  // Non-empty, unique patch ids, identical band layout. Throws DataError.
  void validate() const;
  SpectralCatalog catalog() const;
};

enum class Aggregation { per_patch_mean, global_pixel };

std::string_view aggregation_name(Aggregation a);
Aggregation parse_aggregation(std::string_view text);

struct PromptConfig {
  PromptSelector selector = PromptSelector::kmeans;
  int min_size = 10;
  int k = 10;
  int max_iter = 100;
  std::uint64_t seed = 0;
  bool negatives = false;
  bool joint_decode = false;
  // Manual prompts by patch id (selector == manual).
  std::map<std::string, std::vector<Prompt>> manual;
};

bool prompts_depend_on_rendering(const PromptConfig& cfg);

// Foreground prompts from the mask alone (manual, centroid, skeleton).
PromptSet mask_prompts(const Patch& patch, const PromptConfig& cfg);

// Full prompt set for one patch under one rendering. `fixed` replaces the
// mask-only foreground prompts when given.
PromptSet make_prompts(const Patch& patch, const RenderedVisualization& rendered,
                       const PromptConfig& cfg, const PromptSet* fixed = nullptr);

struct PatchScore {
  std::string patch_id;
  double iou = 0.0;
  std::size_t intersection = 0;
  std::size_t union_ = 0;
};

struct ScoreRecord {
  std::string viz_expr;
  VizKind kind = VizKind::bc;
  std::vector<PatchScore> per_patch;
  double mean_iou = 0.0;
  double wall_time_ms = 0.0;
};

struct EvaluationContext {
  SegmenterBackend& backend;
  EmbeddingCache& cache;
  const PromptConfig& prompts;
  Aggregation aggregation = Aggregation::per_patch_mean;
  RenderOptions render;
  // Mask-only prompts computed once per patch; recomputed when absent.
  const std::map<std::string, PromptSet>* fixed_prompts = nullptr;
};

// Render, prompt, segment and score `spec` on every patch. Errors are
// rethrown with the failing patch and visualization in the message.
ScoreRecord evaluate_viz(const VizSpec& spec, const Dataset& dataset,
                         const EvaluationContext& ctx);

struct SearchConfig {
  std::set<VizKind> modes{VizKind::bc, VizKind::ndi, VizKind::ssi, VizKind::sic};
  PromptConfig prompts;
  Aggregation aggregation = Aggregation::per_patch_mean;
  int workers = 1;
  std::size_t cache_capacity = 64;
  double p_low = 1.0;
  double p_high = 99.0;
  // Percentile bounds from the whole scene instead of each patch.
  bool scene_statistics = false;
  // Index pool for SIC when stage 1 does not run NDI and SSI itself, ranked
  // best first.
  std::vector<IndexSpec> stage1_pool;
  // Number of NDI and of SSI indices fed to stage 2.
  std::size_t stage1_per_kind = 10;
};

struct ModeProfile {
  VizKind kind = VizKind::bc;
  std::size_t n_visualizations = 0;
  double total_ms = 0.0;
  double sec_per_combination = 0.0;
  double total_minutes = 0.0;
};

struct SearchTotals {
  std::size_t n_visualizations = 0;
  std::size_t embed_calls = 0;
  double total_runtime_ms = 0.0;
};

struct SearchReport {
  SearchConfig config;
  std::string site;
  std::string backend_id;
  std::vector<std::string> patch_ids;
  // All evaluated BC/NDI/SSI/SIC records, mean_iou desc, ties by viz_expr.
  std::vector<ScoreRecord> ranked;
  std::vector<std::string> stage1_top;
  // Reference visualizations outside the search space (PCA).
  std::vector<ScoreRecord> baselines;
  SearchTotals totals;

  const ScoreRecord& best() const;  // throws DataError when empty
};

// Sorts by mean_iou descending, ties by viz_expr ascending.
void rank_records(std::vector<ScoreRecord>& records);

// Top `per_kind` NDI and top `per_kind` SSI records merged by rank.
std::vector<IndexSpec> stage1_pool(const std::vector<ScoreRecord>& ranked,
                                   const SpectralCatalog& catalog, std::size_t per_kind = 10);

// Evaluates `specs` with `workers` threads, one backend per thread, sharing
// `cache`. Results are returned in input order.
std::vector<ScoreRecord> evaluate_all(const std::vector<VizSpec>& specs, const Dataset& dataset,
                                      const BackendFactory& factory, EmbeddingCache& cache,
                                      const SearchConfig& cfg);

// Stage 1 over BC/NDI/SSI, stage 2 over SIC of the stage-1 pool, PCA as a
// baseline when requested. Throws ConfigError when SIC lacks stage-1 inputs.
SearchReport run_search(const Dataset& dataset, const BackendFactory& factory,
                        const SearchConfig& cfg);

// Per mode with records: summed evaluation wall time over the count.
std::vector<ModeProfile> runtime_profile(const SearchReport& report);

}  // namespace samselect
