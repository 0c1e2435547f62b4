#include <gtest/gtest.h>

#include <png.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "samselect/error.hpp"
#include "samselect/report.hpp"
#include "test_support.hpp"

using namespace samselect;
using namespace samselect::testing;

namespace {

ScoreRecord rec(const std::string& expr, VizKind kind, double mean, double ms = 12.5) {
  ScoreRecord r;
  r.viz_expr = expr;
  r.kind = kind;
  r.mean_iou = mean;
  r.wall_time_ms = ms;
  r.per_patch = {{"patch_000", mean, 3, 4}};
  return r;
}

SearchReport sample_report() {
  SearchReport r;
  r.site = "accra";
  r.backend_id = "mock(tau=0.1)";
  r.patch_ids = {"patch_000"};
  r.ranked = {rec("NDI(B2,B8)", VizKind::ndi, 0.75), rec("SSI(B4,B8,B11)", VizKind::ssi, 0.5),
              rec("BC(B4,B3,B2)", VizKind::bc, 0.25)};
  r.stage1_top = {"NDI(B2,B8)", "SSI(B4,B8,B11)"};
  r.baselines = {rec("PCA(1,2,3)", VizKind::pca, 0.125)};
  r.totals = {4, 4, 50.0};
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(ReportJson, Schema) {
  const auto doc = report_to_json(sample_report(), Json{{"scene", "s.tif"}});
  for (const char* key : {"config", "site", "patches", "records", "stage1_top", "argmax",
                          "baselines", "runtime", "totals"})
    EXPECT_TRUE(doc.contains(key)) << key;
  EXPECT_EQ(doc["config"]["scene"], "s.tif");
  EXPECT_EQ(doc["config"]["backend"], "mock(tau=0.1)");
  EXPECT_EQ(doc["config"]["prompts"], "kmeans");
  EXPECT_EQ(doc["site"], "accra");
  ASSERT_EQ(doc["records"].size(), 3u);
  EXPECT_EQ(doc["records"][0]["viz"], "NDI(B2,B8)");
  EXPECT_EQ(doc["records"][0]["mean_iou"], 0.75);
  EXPECT_EQ(doc["records"][0]["per_patch"][0]["patch"], "patch_000");
  EXPECT_EQ(doc["argmax"]["viz"], "NDI(B2,B8)");
  EXPECT_EQ(doc["baselines"][0]["viz"], "PCA(1,2,3)");
  EXPECT_EQ(doc["totals"]["n_visualizations"], 4);
  // One runtime row per evaluated mode, PCA included.
  EXPECT_EQ(doc["runtime"].size(), 4u);
}

TEST(ReportJson, StripTimingRemovesOnlyTimingKeys) {
  const auto doc = report_to_json(sample_report());
  const auto s = strip_timing(doc);
  EXPECT_FALSE(s.contains("runtime"));
  EXPECT_FALSE(s["totals"].contains("total_runtime_ms"));
  EXPECT_FALSE(s["records"][0].contains("wall_ms"));
  EXPECT_EQ(s["records"][0]["mean_iou"], 0.75);
  EXPECT_EQ(s["totals"]["embed_calls"], 4);

  // Reports that differ only in timing compare equal after stripping.
  auto other = sample_report();
  for (auto& r : other.ranked) r.wall_time_ms *= 3;
  other.totals.total_runtime_ms = 1e6;
  EXPECT_NE(report_to_json(other).dump(), doc.dump());
  EXPECT_EQ(strip_timing(report_to_json(other)).dump(), s.dump());
}

TEST(ReportCsv, QuotedExpressionsAndRanks) {
  TempDir dir("csv");
  write_report_csv(sample_report(), dir / "out" / "r.csv");
  const auto text = slurp(dir / "out" / "r.csv");
  EXPECT_EQ(text,
            "viz,mean_iou,rank\n"
            "\"NDI(B2,B8)\",0.75,1\n"
            "\"SSI(B4,B8,B11)\",0.5,2\n"
            "\"BC(B4,B3,B2)\",0.25,3\n");
}

TEST(ReportTable, TopRowsAndBaselines) {
  std::ostringstream out;
  print_top_table(sample_report(), 2, out);
  const auto text = out.str();
  EXPECT_NE(text.find("NDI(B2,B8)"), std::string::npos);
  EXPECT_NE(text.find("75.0"), std::string::npos);
  EXPECT_NE(text.find("SSI(B4,B8,B11)"), std::string::npos);
  EXPECT_EQ(text.find("BC(B4,B3,B2)"), std::string::npos);
  EXPECT_NE(text.find("PCA(1,2,3)"), std::string::npos);
}

TEST(StageOnePool, ReadBackFromReport) {
  TempDir dir("pool");
  const auto cat = SpectralCatalog::from(s2_table());
  write_report_json(sample_report(), dir / "r.json");
  const auto pool = load_stage1_pool(dir / "r.json", cat);
  ASSERT_EQ(pool.size(), 2u);
  EXPECT_EQ(format_index_expr(pool[0]), "NDI(B2,B8)");
  EXPECT_EQ(format_index_expr(pool[1]), "SSI(B4,B8,B11)");

  // Without stage1_top the NDI and SSI records are ranked instead.
  auto doc = report_to_json(sample_report());
  doc["stage1_top"] = Json::array();
  std::ofstream(dir / "r2.json") << doc.dump();
  const auto ranked = load_stage1_pool(dir / "r2.json", cat, 1);
  ASSERT_EQ(ranked.size(), 2u);
  EXPECT_EQ(format_index_expr(ranked[0]), "NDI(B2,B8)");

  EXPECT_THROW(load_stage1_pool(dir / "missing.json", cat), ConfigError);
}

TEST(Png, QuantizeRoundsHalfUp) {
  EXPECT_EQ(quantize_unit(0.0), 0);
  EXPECT_EQ(quantize_unit(1.0), 255);
  EXPECT_EQ(quantize_unit(-3.0), 0);
  EXPECT_EQ(quantize_unit(7.0), 255);
  EXPECT_EQ(quantize_unit(0.5), 128);  // 127.5 rounds up
  EXPECT_EQ(quantize_unit(1.0 / 255.0), 1);
  for (int i = 0; i <= 255; ++i) EXPECT_EQ(quantize_unit(i / 255.0), i);
}

TEST(Png, DecodesBackToQuantizedPixels) {
  TempDir dir("png");
  RenderedVisualization r;
  r.rgb = {Raster(3, 5), Raster(3, 5), Raster(3, 5)};
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 5; ++x) {
      r.rgb[0](y, x) = x / 4.0;
      r.rgb[1](y, x) = y / 2.0;
      r.rgb[2](y, x) = 0.5;
    }
  r.spec = BandComposite{{"B4", "B3", "B2"}};
  const auto path = dir / "img.png";
  write_png(r, path);

  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  ASSERT_TRUE(png_image_begin_read_from_file(&img, path.c_str()));
  EXPECT_EQ(img.width, 5u);
  EXPECT_EQ(img.height, 3u);
  img.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(img));
  ASSERT_TRUE(png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr));
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 5; ++x)
      for (int c = 0; c < 3; ++c)
        EXPECT_EQ(buf[static_cast<std::size_t>((y * 5 + x) * 3 + c)], quantize_unit(r.rgb[c](y, x)));
}
