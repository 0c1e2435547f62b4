#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "samselect/error.hpp"
#include "samselect/synth.hpp"
#include "test_support.hpp"

using namespace samselect;
using namespace samselect::testing;

namespace {

SynthSpec planted(std::uint64_t seed = 1) {
  SynthSpec s;
  s.seed = seed;
  s.wavelengths = s2_table();
  s.bi = "B8";
  s.bj = "B4";
  return s;
}

}  // namespace

TEST(Synth, NoiselessBandsAreTwoValued) {
  const auto synth = generate_scene(planted());
  const auto& img = synth.scene.image;
  ASSERT_EQ(img.band_count(), 12u);
  EXPECT_EQ(img.height(), 128);
  const auto& mask = synth.annotations.mask;
  EXPECT_EQ(count_true(mask), 400u);
  for (const auto& id : img.band_ids) {
    std::set<double> vals(img.band(id).values().begin(), img.band(id).values().end());
    if (id == "B8" || id == "B4")
      EXPECT_EQ(vals.size(), 2u) << id;
    else
      EXPECT_EQ(vals.size(), 1u) << id;
  }
  EXPECT_NEAR(img.band("B8")(60, 60) - img.band("B8")(0, 0), 0.2, 1e-12);
  EXPECT_NEAR(img.band("B4")(60, 60) - img.band("B4")(0, 0), -0.2, 1e-12);
  ASSERT_EQ(synth.annotations.patch_centers.size(), 1u);
  EXPECT_EQ(synth.annotations.patch_centers[0], (PixelCoord{64, 64}));
}

TEST(Synth, SeededAndReproducible) {
  auto a = planted(7), b = planted(7), c = planted(8);
  a.noise_sigma = b.noise_sigma = c.noise_sigma = 0.02;
  const auto x = generate_scene(a), y = generate_scene(b), z = generate_scene(c);
  EXPECT_EQ(x.scene.image.bands, y.scene.image.bands);
  EXPECT_NE(x.scene.image.bands, z.scene.image.bands);
}

TEST(Synth, NoiseHasRequestedSpread) {
  auto s = planted(3);
  s.noise_sigma = 0.02;
  s.targets = {{0, 0, 1, 1}};
  const auto synth = generate_scene(s);
  const auto& b = synth.scene.image.band("B2");
  double sum = 0, sq = 0;
  for (double v : b.values()) sum += v, sq += v * v;
  const double n = static_cast<double>(b.size());
  const double mean = sum / n, sd = std::sqrt(sq / n - mean * mean);
  EXPECT_NEAR(mean, 0.25, 4 * 0.02 / std::sqrt(n));
  EXPECT_NEAR(sd, 0.02, 0.001);
}

TEST(Synth, InvalidRecipes) {
  auto s = planted();
  s.contrast = 0.0;
  EXPECT_THROW(generate_scene(s), ConfigError);
  s = planted();
  s.noise_sigma = 0.05;  // 4 * sigma == contrast
  EXPECT_THROW(generate_scene(s), ConfigError);
  s = planted();
  s.bi = "B10";
  EXPECT_THROW(generate_scene(s), ConfigError);
  s = planted();
  s.bj = "B8";
  EXPECT_THROW(generate_scene(s), ConfigError);
  s = planted();
  s.targets = {{120, 120, 20, 20}};
  EXPECT_THROW(generate_scene(s), ConfigError);
}

TEST(Synth, DefaultBandsWithoutTable) {
  SynthSpec s;
  s.n_bands = 5;
  s.bi = "S2";
  s.bj = "S4";
  const auto synth = generate_scene(s);
  EXPECT_EQ(synth.scene.image.band_ids, (std::vector<std::string>{"S1", "S2", "S3", "S4", "S5"}));
  EXPECT_EQ(synth.scene.image.wavelengths_nm.front(), 500.0);
}

TEST(Synth, WrittenSceneLoadsBack) {
  TempDir dir("synth");
  auto s = planted(5);
  s.noise_sigma = 0.01;
  s.targets = {{10, 10, 12, 12}, {80, 90, 16, 10}};
  const auto synth = generate_scene(s);
  const auto [raster, ann] = write_synth_scene(synth, dir.path(), "site");
  const auto scene = load_scene(raster, {}, s2_table());
  EXPECT_EQ(scene.image.band_ids, synth.scene.image.band_ids);
  const auto loaded = load_annotations(ann, scene);
  EXPECT_EQ(loaded.mask, synth.annotations.mask);
  EXPECT_EQ(loaded.patch_centers, synth.annotations.patch_centers);
  const auto ds = make_dataset(synth, 32, "site");
  EXPECT_EQ(ds.patches.size(), 2u);
  EXPECT_EQ(ds.site_name, "site");
}

TEST(Synth, NonPlantedPairsCarryNoSignal) {
  // Bands other than bi/bj are identically distributed inside and outside
  // the target, so their NDI differs only by noise.
  auto s = planted(11);
  s.noise_sigma = 0.025;
  s.targets = {{20, 20, 40, 40}};
  const auto synth = generate_scene(s);
  const auto& m = synth.annotations.mask;
  for (const auto& [a, b] : std::vector<std::pair<std::string, std::string>>{
           {"B2", "B3"}, {"B5", "B11"}, {"B1", "B12"}}) {
    const auto ndi = compute_ndi(synth.scene.image, a, b).values;
    double si = 0, so = 0, qi = 0, qo = 0, ni = 0, no = 0;
    for (int r = 0; r < m.height(); ++r)
      for (int c = 0; c < m.width(); ++c) {
        const double v = ndi(r, c);
        if (m(r, c))
          si += v, qi += v * v, ni += 1;
        else
          so += v, qo += v * v, no += 1;
      }
    const double mi = si / ni, mo = so / no;
    const double se = std::sqrt((qi / ni - mi * mi) / ni + (qo / no - mo * mo) / no);
    EXPECT_LT(std::abs(mi - mo), 3 * se) << a << "," << b;
  }
}

TEST(Synth, StandardNormalMoments) {
  Rng rng(stream_seed(1, "p", "test"));
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = standard_normal(rng);
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.01);
}
