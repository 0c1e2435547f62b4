#include "samselect/search.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <thread>

#include "samselect/error.hpp"

namespace samselect {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::pair<std::size_t, std::size_t> overlap(const Mask& pred, const Mask& gt) {
  if (!pred.same_shape(gt))
    throw DataError("iou: mask shapes differ (" + std::to_string(pred.height()) + "x" +
                    std::to_string(pred.width()) + " vs " + std::to_string(gt.height()) + "x" +
                    std::to_string(gt.width()) + ")");
  std::size_t inter = 0, uni = 0;
  const auto a = pred.values();
  const auto b = gt.values();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0, y = b[i] != 0;
    inter += x && y;
    uni += x || y;
  }
  return {inter, uni};
}

[[noreturn]] void rethrow_tagged(const std::string& where) {
  try {
    throw;
  } catch (const ParseError& e) {
    throw ConfigError(where + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(where + ": " + e.what());
  } catch (const BackendError& e) {
    throw BackendError(where + ": " + e.what());
  } catch (const std::exception& e) {
    throw BackendError(where + ": " + e.what());
  }
}

KMeansConfig kmeans_config(const PromptConfig& cfg) {
  return KMeansConfig{cfg.k, cfg.max_iter, cfg.seed};
}

}  // namespace

double iou(const Mask& pred, const Mask& gt) {
  const auto [inter, uni] = overlap(pred, gt);
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

void Dataset::validate() const {
  if (patches.empty()) throw DataError("dataset has no patches");
  std::set<std::string> ids;
  const auto& ref = patches.front().image;
  for (const auto& p : patches) {
    if (!ids.insert(p.id).second) throw DataError("duplicate patch id '" + p.id + "'");
    if (p.image.band_ids != ref.band_ids)
      throw DataError("patch '" + p.id + "' has a different band layout");
    if (p.mask.height() != p.image.height() || p.mask.width() != p.image.width())
      throw DataError("patch '" + p.id + "' mask does not match its image");
  }
}

SpectralCatalog Dataset::catalog() const {
  if (patches.empty()) throw DataError("dataset has no patches");
  return SpectralCatalog::from(patches.front().image);
}

std::string_view aggregation_name(Aggregation a) {
  return a == Aggregation::global_pixel ? "global_pixel" : "per_patch_mean";
}

Aggregation parse_aggregation(std::string_view text) {
  if (text == "per_patch_mean") return Aggregation::per_patch_mean;
  if (text == "global_pixel") return Aggregation::global_pixel;
  throw ConfigError("unknown aggregation '" + std::string(text) +
                    "' (expected per_patch_mean or global_pixel)");
}

bool prompts_depend_on_rendering(const PromptConfig& cfg) {
  return cfg.selector == PromptSelector::kmeans || cfg.negatives;
}

PromptSet mask_prompts(const Patch& patch, const PromptConfig& cfg) {
  switch (cfg.selector) {
    case PromptSelector::manual: {
      auto it = cfg.manual.find(patch.id);
      if (it == cfg.manual.end()) throw DataError("no manual prompts for patch '" + patch.id + "'");
      return prompts_manual(it->second, patch);
    }
    case PromptSelector::centroid:
      return prompts_centroid(patch, cfg.min_size);
    case PromptSelector::skeleton:
      return prompts_skeleton(patch, cfg.min_size, cfg.seed);
    case PromptSelector::kmeans:
      break;
  }
  throw ConfigError("k-means prompts depend on the rendering");
}

PromptSet make_prompts(const Patch& patch, const RenderedVisualization& rendered,
                       const PromptConfig& cfg, const PromptSet* fixed) {
  PromptSet fg;
  if (cfg.selector == PromptSelector::kmeans)
    fg = prompts_kmeans(patch, rendered, kmeans_config(cfg));
  else
    fg = fixed ? *fixed : mask_prompts(patch, cfg);
  if (!cfg.negatives) return fg;
  // Manual files may already carry background points.
  if (fg.background_count() > 0) return fg;
  return add_background_prompts(patch, fg, rendered, kmeans_config(cfg));
}

ScoreRecord evaluate_viz(const VizSpec& spec, const Dataset& dataset,
                         const EvaluationContext& ctx) {
  const auto start = Clock::now();
  ScoreRecord rec;
  rec.viz_expr = format_viz_expr(spec);
  rec.kind = kind_of(spec);
  const RenderOptions& ropt = ctx.render;
  for (const auto& patch : dataset.patches) {
    try {
      const auto rendered = render(patch.image, spec, patch.id, ropt);
      const PromptSet* fixed = nullptr;
      if (ctx.fixed_prompts) {
        auto it = ctx.fixed_prompts->find(patch.id);
        if (it != ctx.fixed_prompts->end()) fixed = &it->second;
      }
      const auto prompts = make_prompts(patch, rendered, ctx.prompts, fixed);
      const auto embedding = ctx.cache.get_or_compute(ctx.backend, rendered);
      const auto result =
          predict(ctx.backend, embedding, prompts, PredictOptions{ctx.prompts.joint_decode});
      const auto [inter, uni] = overlap(result.mask, patch.mask);
      rec.per_patch.push_back(
          {patch.id, uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni),
           inter, uni});
    } catch (...) {
      rethrow_tagged("patch '" + patch.id + "', " + rec.viz_expr);
    }
  }
  if (ctx.aggregation == Aggregation::global_pixel) {
    std::size_t inter = 0, uni = 0;
    for (const auto& p : rec.per_patch) {
      inter += p.intersection;
      uni += p.union_;
    }
    rec.mean_iou = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  } else {
    double sum = 0.0;
    for (const auto& p : rec.per_patch) sum += p.iou;
    rec.mean_iou = rec.per_patch.empty() ? 0.0 : sum / static_cast<double>(rec.per_patch.size());
  }
  rec.wall_time_ms = elapsed_ms(start);
  return rec;
}

const ScoreRecord& SearchReport::best() const {
  if (ranked.empty()) throw DataError("search report has no records");
  return ranked.front();
}

void rank_records(std::vector<ScoreRecord>& records) {
  std::stable_sort(records.begin(), records.end(), [](const ScoreRecord& a, const ScoreRecord& b) {
    if (a.mean_iou != b.mean_iou) return a.mean_iou > b.mean_iou;
    return a.viz_expr < b.viz_expr;
  });
}

std::vector<IndexSpec> stage1_pool(const std::vector<ScoreRecord>& ranked,
                                   const SpectralCatalog& catalog, std::size_t per_kind) {
  std::vector<ScoreRecord> ndi, ssi;
  for (const auto& r : ranked) {
    if (r.kind == VizKind::ndi && ndi.size() < per_kind) ndi.push_back(r);
    if (r.kind == VizKind::ssi && ssi.size() < per_kind) ssi.push_back(r);
  }
  std::vector<ScoreRecord> pool = ndi;
  pool.insert(pool.end(), ssi.begin(), ssi.end());
  rank_records(pool);
  std::vector<IndexSpec> out;
  for (const auto& r : pool) out.push_back(parse_index_expr(r.viz_expr, catalog));
  return out;
}

std::vector<ScoreRecord> evaluate_all(const std::vector<VizSpec>& specs, const Dataset& dataset,
                                      const BackendFactory& factory, EmbeddingCache& cache,
                                      const SearchConfig& cfg) {
  if (cfg.workers < 1) throw ConfigError("workers must be >= 1");
  std::map<std::string, PromptSet> fixed;
  if (cfg.prompts.selector != PromptSelector::kmeans)
    for (const auto& p : dataset.patches) fixed.emplace(p.id, mask_prompts(p, cfg.prompts));

  const MultibandImage* stats_source = nullptr;
  if (cfg.scene_statistics) {
    if (!dataset.scene_image) throw ConfigError("scene statistics need the source scene");
    stats_source = dataset.scene_image.get();
  }

  std::vector<ScoreRecord> out(specs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  std::size_t first_error_index = specs.size();

  auto work = [&]() {
    try {
      auto backend = factory();
      if (!backend) throw BackendError("backend factory returned no backend");
      EvaluationContext ctx{*backend, cache, cfg.prompts, cfg.aggregation,
                            RenderOptions{cfg.p_low, cfg.p_high, stats_source},
                            fixed.empty() ? nullptr : &fixed};
      for (std::size_t i = next++; i < specs.size() && !failed; i = next++) {
        try {
          out[i] = evaluate_viz(specs[i], dataset, ctx);
        } catch (...) {
          std::lock_guard lock(err_mutex);
          // Report the error of the lowest failing index.
          if (i < first_error_index) {
            first_error_index = i;
            first_error = std::current_exception();
          }
          failed = true;
        }
      }
    } catch (...) {
      std::lock_guard lock(err_mutex);
      if (!first_error) first_error = std::current_exception();
      failed = true;
    }
  };

  const auto n_threads =
      static_cast<std::size_t>(std::min<std::size_t>(cfg.workers, std::max<std::size_t>(specs.size(), 1)));
  if (n_threads <= 1) {
    work();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(work);
    for (auto& t : threads) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

SearchReport run_search(const Dataset& dataset, const BackendFactory& factory,
                        const SearchConfig& cfg) {
  const auto start = Clock::now();
  dataset.validate();
  const auto catalog = dataset.catalog();
  if (catalog.size() < 3) throw DataError("the search needs at least 3 bands");
  for (auto m : cfg.modes)
    if (m == VizKind::sic && cfg.stage1_pool.empty() &&
        !(cfg.modes.count(VizKind::ndi) && cfg.modes.count(VizKind::ssi)))
      throw ConfigError("modes: SIC needs NDI and SSI in the same run (or a stage-1 report)");
  if (cfg.modes.empty()) throw ConfigError("modes: nothing to search");

  SearchReport report;
  report.config = cfg;
  report.site = dataset.site_name;
  for (const auto& p : dataset.patches) report.patch_ids.push_back(p.id);
  {
    auto probe = factory();
    if (!probe) throw BackendError("backend factory returned no backend");
    report.backend_id = probe->id();
  }

  EmbeddingCache cache(cfg.cache_capacity);

  std::vector<VizSpec> stage1;
  for (auto kind : {VizKind::bc, VizKind::ndi, VizKind::ssi})
    if (cfg.modes.count(kind)) {
      auto specs = enumerate_search_space(catalog, kind);
      stage1.insert(stage1.end(), specs.begin(), specs.end());
    }
  std::vector<ScoreRecord> records = evaluate_all(stage1, dataset, factory, cache, cfg);
  rank_records(records);

  if (cfg.modes.count(VizKind::sic)) {
    std::vector<IndexSpec> pool = cfg.stage1_pool;
    if (cfg.modes.count(VizKind::ndi) && cfg.modes.count(VizKind::ssi))
      pool = stage1_pool(records, catalog, cfg.stage1_per_kind);
    if (pool.size() < 3) throw DataError("stage 2 needs at least 3 indices in the stage-1 pool");
    for (const auto& idx : pool) report.stage1_top.push_back(format_index_expr(idx));
    const auto sic = enumerate_search_space(catalog, VizKind::sic, pool);
    auto stage2 = evaluate_all(sic, dataset, factory, cache, cfg);
    records.insert(records.end(), std::make_move_iterator(stage2.begin()),
                   std::make_move_iterator(stage2.end()));
    rank_records(records);
  }

  if (cfg.modes.count(VizKind::pca)) {
    const std::vector<VizSpec> pca{PrincipalComponents{}};
    report.baselines = evaluate_all(pca, dataset, factory, cache, cfg);
  }

  report.ranked = std::move(records);
  report.totals.n_visualizations = report.ranked.size();
  report.totals.embed_calls = cache.capacity() == 0 ? 0 : cache.misses();
  report.totals.total_runtime_ms = elapsed_ms(start);
  return report;
}

std::vector<ModeProfile> runtime_profile(const SearchReport& report) {
  std::vector<ModeProfile> out;
  for (auto kind : {VizKind::bc, VizKind::ndi, VizKind::ssi, VizKind::sic, VizKind::pca}) {
    ModeProfile m;
    m.kind = kind;
    const auto& src = kind == VizKind::pca ? report.baselines : report.ranked;
    for (const auto& r : src)
      if (r.kind == kind) {
        ++m.n_visualizations;
        m.total_ms += r.wall_time_ms;
      }
    if (m.n_visualizations == 0) continue;
    m.sec_per_combination = m.total_ms / 1000.0 / static_cast<double>(m.n_visualizations);
    m.total_minutes = m.total_ms / 60000.0;
    out.push_back(m);
  }
  return out;
}

}  // namespace samselect
