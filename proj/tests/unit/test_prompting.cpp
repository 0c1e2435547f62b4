#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <set>

#include "samselect/error.hpp"
#include "samselect/mask_ops.hpp"
#include "samselect/prompting.hpp"
#include "test_support.hpp"

using namespace samselect;
using namespace samselect::testing;

namespace {

Patch patch_with_mask(const Mask& mask, const std::string& id = "p") {
  const auto img = random_image({"A", "B", "C"}, {450.0, 550.0, 650.0}, mask.height(),
                                mask.width(), 5);
  Patch p = make_patch_from(img, mask, id);
  p.window.size = mask.height();
  return p;
}

Mask rect_mask(int h, int w, int r0, int c0, int rh, int cw) {
  Mask m(h, w);
  for (int r = r0; r < r0 + rh; ++r)
    for (int c = c0; c < c0 + cw; ++c) m(r, c) = 1;
  return m;
}

RenderedVisualization flat_render(int h, int w, double v = 0.5) {
  RenderedVisualization r;
  r.rgb = {Raster(h, w, v), Raster(h, w, v), Raster(h, w, v)};
  r.spec = NormalizedDifference{"A", "B"};
  return r;
}

// Straight transcription of the two-subiteration thinning rule, kept separate
// from the library implementation.
Mask oracle_zhang_suen(Mask m) {
  auto at = [&](int r, int c) -> int { return m.contains(r, c) && m(r, c) ? 1 : 0; };
  bool changed = true;
  while (changed) {
    changed = false;
    for (int step = 0; step < 2; ++step) {
      std::vector<PixelCoord> del;
      for (int r = 0; r < m.height(); ++r)
        for (int c = 0; c < m.width(); ++c) {
          if (!m(r, c)) continue;
          const int p2 = at(r - 1, c), p3 = at(r - 1, c + 1), p4 = at(r, c + 1),
                    p5 = at(r + 1, c + 1), p6 = at(r + 1, c), p7 = at(r + 1, c - 1),
                    p8 = at(r, c - 1), p9 = at(r - 1, c - 1);
          const int b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
          const int seq[9] = {p2, p3, p4, p5, p6, p7, p8, p9, p2};
          int a = 0;
          for (int i = 0; i < 8; ++i) a += (seq[i] == 0 && seq[i + 1] == 1);
          if (b < 2 || b > 6 || a != 1) continue;
          if (step == 0 && (p2 * p4 * p6 != 0 || p4 * p6 * p8 != 0)) continue;
          if (step == 1 && (p2 * p4 * p8 != 0 || p2 * p6 * p8 != 0)) continue;
          del.push_back({r, c});
        }
      for (auto p : del) m(p.row, p.col) = 0;
      changed = changed || !del.empty();
    }
  }
  return m;
}

Mask random_blobs(int h, int w, std::mt19937_64& gen) {
  Mask m(h, w);
  const int n = 1 + static_cast<int>(gen() % 4);
  for (int i = 0; i < n; ++i) {
    const int rh = 2 + static_cast<int>(gen() % 10), cw = 2 + static_cast<int>(gen() % 10);
    const int r0 = static_cast<int>(gen() % static_cast<unsigned>(h - rh));
    const int c0 = static_cast<int>(gen() % static_cast<unsigned>(w - cw));
    for (int r = r0; r < r0 + rh; ++r)
      for (int c = c0; c < c0 + cw; ++c) m(r, c) = 1;
  }
  return m;
}

bool subset(const Mask& a, const Mask& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.values()[i] && !b.values()[i]) return false;
  return true;
}

}  // namespace

TEST(Manual, PassThroughAndBounds) {
  auto patch = patch_with_mask(rect_mask(16, 16, 4, 4, 4, 4));
  std::vector<Prompt> pts{{5, 5, PromptLabel::foreground}, {0, 0, PromptLabel::background}};
  const auto set = prompts_manual(pts, patch);
  EXPECT_EQ(set.points, pts);
  EXPECT_EQ(set.selector, PromptSelector::manual);
  EXPECT_TRUE(set.diagnostics.empty());

  // A foreground point outside the mask is kept with a note.
  const auto off = prompts_manual({{0, 1, PromptLabel::foreground}}, patch);
  EXPECT_EQ(off.points.size(), 1u);
  EXPECT_FALSE(off.diagnostics.empty());

  EXPECT_THROW(prompts_manual({{16, 0, PromptLabel::foreground}}, patch), DataError);
  EXPECT_THROW(prompts_manual({{0, -1, PromptLabel::foreground}}, patch), DataError);
}

TEST(Centroid, SquareGivesCenter) {
  const auto set = prompts_centroid(patch_with_mask(rect_mask(32, 32, 10, 10, 5, 5)));
  ASSERT_EQ(set.points.size(), 1u);
  EXPECT_EQ(set.points[0], (Prompt{12, 12, PromptLabel::foreground}));
}

TEST(Centroid, EvenSideRoundsHalfUp) {
  // Rows 10..13 average 11.5.
  const auto set = prompts_centroid(patch_with_mask(rect_mask(32, 32, 10, 10, 4, 4)));
  ASSERT_EQ(set.points.size(), 1u);
  EXPECT_EQ(set.points[0].row, 12);
  EXPECT_EQ(set.points[0].col, 12);
}

TEST(Centroid, CShapeSnapsOntoComponent) {
  Mask m(20, 20);
  for (int r = 2; r <= 12; ++r) m(r, 2) = m(r, 3) = 1;
  for (int c = 2; c <= 12; ++c) m(2, c) = m(3, c) = m(11, c) = m(12, c) = 1;
  const auto set = prompts_centroid(patch_with_mask(m));
  ASSERT_EQ(set.points.size(), 1u);
  const auto pt = set.points[0];
  ASSERT_TRUE(m(pt.row, pt.col));
  // Brute force: nearest component pixel to the rounded centroid.
  double sr = 0, sc = 0, n = 0;
  for (int r = 0; r < 20; ++r)
    for (int c = 0; c < 20; ++c)
      if (m(r, c)) sr += r, sc += c, n += 1;
  const int cr = round_half_up(sr / n), cc = round_half_up(sc / n);
  ASSERT_FALSE(m(cr, cc));
  int best = 1 << 30;
  PixelCoord want{};
  for (int r = 0; r < 20; ++r)
    for (int c = 0; c < 20; ++c) {
      if (!m(r, c)) continue;
      const int d = (r - cr) * (r - cr) + (c - cc) * (c - cc);
      if (d < best) best = d, want = {r, c};
    }
  EXPECT_EQ(pt.row, want.row);
  EXPECT_EQ(pt.col, want.col);
}

TEST(Centroid, SmallComponentsSkipped) {
  Mask m = rect_mask(32, 32, 2, 2, 3, 3);  // 9 px
  for (int r = 20; r < 24; ++r)
    for (int c = 20; c < 24; ++c) m(r, c) = 1;  // 16 px
  const auto set = prompts_centroid(patch_with_mask(m), 10);
  ASSERT_EQ(set.points.size(), 1u);
  EXPECT_GE(set.points[0].row, 20);
  EXPECT_THROW(prompts_centroid(patch_with_mask(rect_mask(32, 32, 2, 2, 3, 3)), 10), DataError);
  EXPECT_THROW(prompts_centroid(patch_with_mask(Mask(8, 8))), DataError);
}

TEST(Skeleton, FilledSquareThinsNearCenter) {
  const Mask m = rect_mask(15, 15, 4, 4, 7, 7);
  const Mask s = skeletonize(m);
  EXPECT_EQ(s, oracle_zhang_suen(m));
  EXPECT_GE(count_true(s), 1u);
  EXPECT_LE(count_true(s), 7u);
  EXPECT_TRUE(s(7, 7));
  EXPECT_TRUE(subset(s, m));
}

TEST(Skeleton, ThinLineUnchanged) {
  Mask m(9, 9);
  for (int c = 1; c < 8; ++c) m(4, c) = 1;
  EXPECT_EQ(skeletonize(m), m);
  Mask diag(9, 9);
  for (int i = 1; i < 8; ++i) diag(i, i) = 1;
  EXPECT_EQ(skeletonize(diag), diag);
}

TEST(Skeleton, MatchesOracleSubsetAndIdempotentProperty) {
  std::mt19937_64 gen(17);
  for (int t = 0; t < 200; ++t) {
    const Mask m = random_blobs(24, 24, gen);
    const Mask s = skeletonize(m);
    ASSERT_EQ(s, oracle_zhang_suen(m)) << "case " << t;
    ASSERT_TRUE(subset(s, m));
    ASSERT_EQ(skeletonize(s), s);
  }
}

TEST(Skeleton, PromptsLieOnSkeletonAndAreSeeded) {
  Mask m = rect_mask(40, 40, 5, 5, 10, 20);
  for (int r = 25; r < 35; ++r)
    for (int c = 25; c < 33; ++c) m(r, c) = 1;
  const auto patch = patch_with_mask(m);
  const auto a = prompts_skeleton(patch, 10, 3);
  const auto b = prompts_skeleton(patch, 10, 3);
  EXPECT_EQ(a.points, b.points);
  ASSERT_EQ(a.points.size(), 2u);
  const auto s = skeletonize(m);
  for (const auto& p : a.points) EXPECT_TRUE(s(p.row, p.col));
}

TEST(KMeans, FourPixelsAllReturned) {
  Mask m(8, 8);
  m(1, 1) = m(1, 6) = m(6, 1) = m(6, 6) = 1;
  const auto r = kmeans_representatives(m, flat_render(8, 8), {10, 100, 0}, "p");
  const std::vector<PixelCoord> want{{1, 1}, {1, 6}, {6, 1}, {6, 6}};
  EXPECT_EQ(r, want);
}

TEST(KMeans, TwoSpectralBlobsGiveOnePromptEach) {
  Mask m = rect_mask(32, 32, 2, 2, 8, 8);
  for (int r = 20; r < 28; ++r)
    for (int c = 20; c < 28; ++c) m(r, c) = 1;
  auto rendered = flat_render(32, 32, 0.1);
  for (int r = 20; r < 28; ++r)
    for (int c = 20; c < 28; ++c) rendered.rgb[0](r, c) = 0.9;
  const auto reps = kmeans_representatives(m, rendered, {2, 100, 0}, "p");
  ASSERT_EQ(reps.size(), 2u);
  EXPECT_LT(reps[0].row, 10);
  EXPECT_GE(reps[1].row, 20);
}

TEST(KMeans, BoundsMembershipAndDeterminismProperty) {
  std::mt19937_64 gen(23);
  for (int t = 0; t < 50; ++t) {
    const Mask m = random_blobs(32, 32, gen);
    RenderedVisualization rendered = flat_render(32, 32);
    for (auto& ch : rendered.rgb)
      for (auto& v : ch.values()) v = std::uniform_real_distribution<double>(0, 1)(gen);
    const int k = 1 + t % 12;
    auto patch = patch_with_mask(m, "patch_" + std::to_string(t));
    const auto a = prompts_kmeans(patch, rendered, {k, 100, 99});
    const auto b = prompts_kmeans(patch, rendered, {k, 100, 99});
    ASSERT_EQ(a.points, b.points);
    ASSERT_GE(a.points.size(), 1u);
    ASSERT_LE(a.points.size(), static_cast<std::size_t>(k));
    std::set<std::pair<int, int>> uniq;
    for (const auto& p : a.points) {
      ASSERT_TRUE(m(p.row, p.col));
      ASSERT_EQ(p.label, PromptLabel::foreground);
      uniq.insert({p.row, p.col});
    }
    ASSERT_EQ(uniq.size(), a.points.size());
    ASSERT_TRUE(std::is_sorted(a.points.begin(), a.points.end(), [](auto& x, auto& y) {
      return std::pair(x.row, x.col) < std::pair(y.row, y.col);
    }));
  }
}

TEST(Background, PairsWithForegroundCountOffMask) {
  const Mask m = rect_mask(32, 32, 8, 8, 12, 12);
  const auto patch = patch_with_mask(m);
  auto rendered = flat_render(32, 32);
  std::mt19937_64 gen(2);
  for (auto& ch : rendered.rgb)
    for (auto& v : ch.values()) v = std::uniform_real_distribution<double>(0, 1)(gen);
  const auto fg = prompts_kmeans(patch, rendered, {3, 100, 0});
  ASSERT_EQ(fg.foreground_count(), 3u);
  const auto both = add_background_prompts(patch, fg, rendered, {3, 100, 0});
  EXPECT_EQ(both.foreground_count(), 3u);
  EXPECT_EQ(both.background_count(), 3u);
  for (const auto& p : both.points)
    if (p.label == PromptLabel::background) EXPECT_FALSE(m(p.row, p.col));

  const auto big = prompts_kmeans(patch, rendered, {25, 100, 0});
  EXPECT_EQ(add_background_prompts(patch, big, rendered, {25, 100, 0}).background_count(), 10u);
}

TEST(Background, FullMaskHasNoBackground) {
  const Mask m(8, 8, 1);
  const auto patch = patch_with_mask(m);
  const auto rendered = flat_render(8, 8);
  const auto fg = prompts_kmeans(patch, rendered, {2, 100, 0});
  const auto both = add_background_prompts(patch, fg, rendered, {2, 100, 0});
  EXPECT_EQ(both.background_count(), 0u);
  EXPECT_FALSE(both.diagnostics.empty());
}

TEST(ManualFile, GroupsByPatchAndParsesLabels) {
  TempDir dir("prompts");
  const auto path = dir / "prompts.json";
  std::ofstream(path) << R"([{"patch_id":"a","row":1,"col":2,"label":"foreground"},
                              {"patch_id":"a","row":3,"col":4,"label":"-"},
                              {"patch_id":"b","row":5,"col":6,"label":1}])";
  const auto m = load_manual_prompts(path);
  ASSERT_EQ(m.size(), 2u);
  ASSERT_EQ(m.at("a").size(), 2u);
  EXPECT_EQ(m.at("a")[1], (Prompt{3, 4, PromptLabel::background}));
  EXPECT_EQ(m.at("b")[0], (Prompt{5, 6, PromptLabel::foreground}));
  std::ofstream(dir / "bad.json") << R"([{"patch_id":"a","row":1,"col":2,"label":"maybe"}])";
  EXPECT_THROW(load_manual_prompts(dir / "bad.json"), Error);
}

TEST(Selector, NamesRoundTrip) {
  for (auto s : {PromptSelector::manual, PromptSelector::centroid, PromptSelector::skeleton,
                 PromptSelector::kmeans})
    EXPECT_EQ(parse_selector(selector_name(s)), s);
  EXPECT_THROW(parse_selector("random"), ConfigError);
}
