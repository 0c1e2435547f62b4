#include <gtest/gtest.h>

#include <random>

#include "samselect/error.hpp"
#include "samselect/report.hpp"
#include "samselect/search.hpp"
#include "samselect/synth.hpp"
#include "test_support.hpp"

using namespace samselect;
using namespace samselect::testing;

namespace {

Mask mask_from(int h, int w, std::initializer_list<std::pair<int, int>> px) {
  Mask m(h, w);
  for (auto [r, c] : px) m(r, c) = 1;
  return m;
}

// Two 32x32 patches cut from a 12-band planted scene.
Dataset small_dataset(std::uint64_t seed = 4) {
  SynthSpec spec;
  spec.seed = seed;
  spec.wavelengths = s2_table();
  spec.height = 32;
  spec.width = 64;
  spec.targets = {{10, 8, 10, 10}, {14, 44, 8, 12}};
  spec.bi = "B8";
  spec.bj = "B4";
  spec.noise_sigma = 0.01;
  return make_dataset(generate_scene(spec), 32, "tiny");
}

BackendFactory mock_factory(std::shared_ptr<MockSegmenter::Counters> counters = nullptr) {
  return [counters] { return std::make_unique<MockSegmenter>(0.1, counters); };
}

SearchConfig modes(std::set<VizKind> m) {
  SearchConfig cfg;
  cfg.modes = std::move(m);
  return cfg;
}

}  // namespace

TEST(Iou, Examples) {
  const auto a = mask_from(4, 4, {{0, 0}, {0, 1}, {1, 0}, {1, 1}});
  const auto b = mask_from(4, 4, {{0, 1}, {1, 1}, {0, 2}, {1, 2}});
  EXPECT_DOUBLE_EQ(iou(a, b), 2.0 / 6.0);
  EXPECT_EQ(iou(a, a), 1.0);
  EXPECT_EQ(iou(Mask(4, 4), Mask(4, 4)), 1.0);
  EXPECT_EQ(iou(a, Mask(4, 4)), 0.0);
  EXPECT_EQ(iou(a, mask_from(4, 4, {{3, 3}})), 0.0);
  EXPECT_THROW(iou(a, Mask(4, 5)), DataError);
}

TEST(Iou, AxiomsProperty) {
  std::mt19937_64 gen(5);
  for (int t = 0; t < 500; ++t) {
    Mask a(8, 8), b(8, 8);
    for (auto& v : a.values()) v = gen() % 3 == 0;
    for (auto& v : b.values()) v = gen() % 2 == 0;
    const double x = iou(a, b);
    ASSERT_GE(x, 0.0);
    ASSERT_LE(x, 1.0);
    ASSERT_EQ(x, iou(b, a));
    ASSERT_EQ(iou(a, a), 1.0);
    std::size_t i = 0, u = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      i += a.values()[k] && b.values()[k];
      u += a.values()[k] || b.values()[k];
    }
    ASSERT_EQ(x, u ? static_cast<double>(i) / u : 1.0);
  }
}

TEST(Evaluate, SinglePatchMeanEqualsPatchIou) {
  auto ds = small_dataset();
  ds.patches.resize(1);
  MockSegmenter mock;
  EmbeddingCache cache(8);
  PromptConfig prompts;
  const EvaluationContext ctx{mock, cache, prompts};
  const auto rec = evaluate_viz(NormalizedDifference{"B4", "B8"}, ds, ctx);
  ASSERT_EQ(rec.per_patch.size(), 1u);
  EXPECT_EQ(rec.mean_iou, rec.per_patch[0].iou);
  EXPECT_EQ(rec.viz_expr, "NDI(B4,B8)");
  EXPECT_EQ(rec.kind, VizKind::ndi);
}

TEST(Evaluate, AggregationModes) {
  const auto ds = small_dataset();
  MockSegmenter mock;
  EmbeddingCache cache(8);
  PromptConfig prompts;
  EvaluationContext ctx{mock, cache, prompts};
  const VizSpec spec = BandComposite{{"B4", "B3", "B2"}};
  const auto mean = evaluate_viz(spec, ds, ctx);
  ctx.aggregation = Aggregation::global_pixel;
  const auto global = evaluate_viz(spec, ds, ctx);
  double s = 0;
  std::size_t i = 0, u = 0;
  for (const auto& p : mean.per_patch) s += p.iou, i += p.intersection, u += p.union_;
  EXPECT_DOUBLE_EQ(mean.mean_iou, s / 2);
  EXPECT_DOUBLE_EQ(global.mean_iou, static_cast<double>(i) / u);
  EXPECT_THROW(parse_aggregation("median"), ConfigError);
}

TEST(Evaluate, ErrorsNamePatchAndVisualization) {
  auto ds = small_dataset();
  ds.patches[1].mask = Mask(32, 32);  // no objects
  MockSegmenter mock;
  EmbeddingCache cache(8);
  PromptConfig prompts;
  prompts.selector = PromptSelector::centroid;
  const EvaluationContext ctx{mock, cache, prompts};
  try {
    evaluate_viz(NormalizedDifference{"B4", "B8"}, ds, ctx);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(ds.patches[1].id), std::string::npos) << msg;
    EXPECT_NE(msg.find("NDI(B4,B8)"), std::string::npos) << msg;
  }
}

TEST(Search, ModeCountsMatchEnumeration) {
  const auto ds = small_dataset();
  const auto r = run_search(ds, mock_factory(), modes({VizKind::ndi}));
  EXPECT_EQ(r.ranked.size(), 66u);
  EXPECT_EQ(r.totals.n_visualizations, 66u);
  EXPECT_EQ(r.patch_ids.size(), 2u);
  EXPECT_EQ(r.site, "tiny");

  // Four bands: C(4,3) = 4 composites.
  Dataset four = ds;
  for (auto& p : four.patches) {
    MultibandImage img;
    for (const auto* id : {"B2", "B3", "B4", "B8"}) {
      img.band_ids.push_back(id);
      img.wavelengths_nm.push_back(p.image.wavelength(id));
      img.bands.push_back(p.image.band(id));
    }
    p.image = img;
  }
  EXPECT_EQ(run_search(four, mock_factory(), modes({VizKind::bc})).ranked.size(), 4u);
}

TEST(Search, RankedDescendingWithLexicographicTies) {
  const auto r = run_search(small_dataset(), mock_factory(), modes({VizKind::ndi, VizKind::ssi}));
  for (std::size_t i = 1; i < r.ranked.size(); ++i) {
    const auto& a = r.ranked[i - 1];
    const auto& b = r.ranked[i];
    ASSERT_TRUE(a.mean_iou > b.mean_iou || (a.mean_iou == b.mean_iou && a.viz_expr < b.viz_expr));
  }
  EXPECT_EQ(&r.best(), &r.ranked.front());
  for (const auto& rec : r.ranked) {
    ASSERT_GE(rec.mean_iou, 0.0);
    ASSERT_LE(rec.mean_iou, 1.0);
  }
}

TEST(Search, SicNeedsStageOneInputs) {
  const auto ds = small_dataset();
  EXPECT_THROW(run_search(ds, mock_factory(), modes({VizKind::sic})), ConfigError);
  EXPECT_THROW(run_search(ds, mock_factory(), modes({VizKind::ndi, VizKind::sic})), ConfigError);

  auto cfg = modes({VizKind::sic});
  const auto cat = ds.catalog();
  for (const auto& s : enumerate_search_space(cat, VizKind::ndi))
    if (cfg.stage1_pool.size() < 5) cfg.stage1_pool.push_back(std::get<NormalizedDifference>(s));
  const auto r = run_search(ds, mock_factory(), cfg);
  EXPECT_EQ(r.ranked.size(), 10u);  // C(5, 3)
}

TEST(Search, StageTwoUsesTopStageOneIndices) {
  auto cfg = modes({VizKind::ndi, VizKind::ssi, VizKind::sic});
  cfg.stage1_per_kind = 3;
  const auto r = run_search(small_dataset(), mock_factory(), cfg);
  std::size_t sic = 0;
  for (const auto& rec : r.ranked) sic += rec.kind == VizKind::sic;
  EXPECT_EQ(sic, 20u);  // C(6, 3)
  ASSERT_EQ(r.stage1_top.size(), 6u);
  std::vector<std::string> want;
  std::size_t n = 0, s = 0;
  for (const auto& rec : r.ranked) {
    if (rec.kind == VizKind::ndi && n < 3) ++n, want.push_back(rec.viz_expr);
    if (rec.kind == VizKind::ssi && s < 3) ++s, want.push_back(rec.viz_expr);
  }
  EXPECT_EQ(r.stage1_top, want);
}

TEST(Search, PcaIsBaselineOnly) {
  const auto r = run_search(small_dataset(), mock_factory(), modes({VizKind::ndi, VizKind::pca}));
  EXPECT_EQ(r.ranked.size(), 66u);
  ASSERT_EQ(r.baselines.size(), 1u);
  EXPECT_EQ(r.baselines[0].viz_expr, "PCA(1,2,3)");
}

TEST(Search, DeterministicAcrossWorkerCounts) {
  const auto ds = small_dataset(9);
  std::string first;
  for (int workers : {1, 4, 8}) {
    auto cfg = modes({VizKind::ndi, VizKind::ssi, VizKind::sic});
    cfg.workers = workers;
    auto doc = strip_timing(report_to_json(run_search(ds, mock_factory(), cfg)));
    // The config echo records the worker count itself.
    doc.erase("config");
    const auto text = doc.dump();
    if (first.empty())
      first = text;
    else
      EXPECT_EQ(text, first) << "workers " << workers;
  }
}

TEST(Search, OneEmbedPerPatchAndVisualization) {
  const auto ds = small_dataset();
  for (int workers : {1, 4, 8}) {
    auto counters = std::make_shared<MockSegmenter::Counters>();
    auto cfg = modes({VizKind::ndi, VizKind::ssi});
    cfg.workers = workers;
    const auto r = run_search(ds, mock_factory(counters), cfg);
    EXPECT_EQ(counters->embed_calls.load(), 2u * 286u) << workers;
    EXPECT_EQ(r.totals.embed_calls, 2u * 286u);
  }
}

TEST(Search, BackendErrorsPropagate) {
  const auto ds = small_dataset();
  const BackendFactory broken = []() -> std::unique_ptr<SegmenterBackend> {
    throw BackendError("model missing");
  };
  EXPECT_THROW(run_search(ds, broken, modes({VizKind::ndi})), BackendError);
  Dataset empty;
  EXPECT_THROW(run_search(empty, mock_factory(), modes({VizKind::ndi})), DataError);
}

TEST(RuntimeProfile, SecondsPerCombination) {
  SearchReport r;
  for (int i = 0; i < 66; ++i) {
    ScoreRecord rec;
    rec.kind = VizKind::ndi;
    rec.viz_expr = "NDI" + std::to_string(i);
    rec.wall_time_ms = 10000.0;
    r.ranked.push_back(rec);
  }
  const auto prof = runtime_profile(r);
  ASSERT_EQ(prof.size(), 1u);
  EXPECT_EQ(prof[0].kind, VizKind::ndi);
  EXPECT_EQ(prof[0].n_visualizations, 66u);
  EXPECT_DOUBLE_EQ(prof[0].sec_per_combination, 10.0);
  EXPECT_DOUBLE_EQ(prof[0].total_minutes, 11.0);
}

TEST(Prompts, MaskOnlySelectorsIgnoreRendering) {
  const auto ds = small_dataset();
  PromptConfig cfg;
  cfg.selector = PromptSelector::centroid;
  EXPECT_FALSE(prompts_depend_on_rendering(cfg));
  cfg.negatives = true;
  EXPECT_TRUE(prompts_depend_on_rendering(cfg));
  cfg = {};
  EXPECT_TRUE(prompts_depend_on_rendering(cfg));

  PromptConfig manual;
  manual.selector = PromptSelector::manual;
  manual.manual[ds.patches[0].id] = {{15, 13, PromptLabel::foreground}};
  EXPECT_EQ(mask_prompts(ds.patches[0], manual).points.size(), 1u);
  EXPECT_THROW(mask_prompts(ds.patches[1], manual), DataError);
}
