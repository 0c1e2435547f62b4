#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include <algorithm>

#include "samselect/report.hpp"
#include "test_support.hpp"

using namespace samselect;
using namespace samselect::testing;

namespace {

struct Result {
  int code = -1;
  std::string out, err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Result run(const std::string& exe, const std::string& args, const TempDir& dir) {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = "'" + exe + "' " + args + " >'" + out.string() + "' 2>'" +
                          err.string() + "'";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::size_t line_count(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

const std::string cli = SAMSELECT_CLI;
const std::string synth = SAMSELECT_SYNTH_CLI;
const std::string table = (config_dir() / "sentinel2a_l2a.json").string();

}  // namespace

TEST(Cli, MissingSceneIsConfigError) {
  TempDir dir("cli");
  const auto r = run(cli, "search --annotations x.geojson", dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--scene"), std::string::npos);
}

TEST(Cli, SicWithoutStageOneIsConfigError) {
  TempDir dir("cli");
  { std::ofstream(dir / "s.tif") << "x"; }
  { std::ofstream(dir / "a.geojson") << "x"; }
  const auto r = run(cli,
                     "search --scene '" + (dir / "s.tif").string() + "' --annotations '" +
                         (dir / "a.geojson").string() + "' --modes sic",
                     dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("sic"), std::string::npos);
}

TEST(Cli, UnknownFlagExitsTwo) {
  TempDir dir("cli");
  EXPECT_EQ(run(cli, "search --bogus 1", dir).code, 2);
  EXPECT_EQ(run(cli, "", dir).code, 2);
}

TEST(Cli, EnumerateCounts) {
  TempDir dir("cli");
  auto r = run(cli, "enumerate --wavelengths '" + table + "' --modes bc", dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(line_count(r.out), 220u + 2u);  // specs, "BC 220", "total 220"
  EXPECT_NE(r.out.find("BC(B3,B2,B1)\n"), std::string::npos);
  EXPECT_NE(r.out.find("total 220\n"), std::string::npos);

  r = run(cli, "enumerate --wavelengths '" + table + "' --modes bc,ndi,ssi,sic", dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("NDI 66\n"), std::string::npos);
  EXPECT_NE(r.out.find("SSI 220\n"), std::string::npos);
  EXPECT_NE(r.out.find("SIC 1140"), std::string::npos);
  EXPECT_NE(r.out.find("total 1646\n"), std::string::npos);

  // A three-band subset through a config file.
  std::ofstream(dir / "sub.json") << Json{{"wavelengths", table}, {"bands", {"B2", "B4", "B8"}}}.dump();
  r = run(cli, "enumerate --config '" + (dir / "sub.json").string() + "' --modes ndi", dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("NDI 3\n"), std::string::npos);
}

TEST(Cli, SyntheticSearchRenderRoundTrip) {
  TempDir dir("cli");
  auto g = run(synth,
               "--out '" + dir.path().string() + "' --stem site --wavelengths '" + table +
                   "' --bi B8 --bj B4 --target 40 40 30 30 --seed 4 --noise 0.01",
               dir);
  ASSERT_EQ(g.code, 0) << g.err;
  std::istringstream paths(g.out);
  std::string raster, ann;
  std::getline(paths, raster);
  std::getline(paths, ann);

  const auto json = dir / "out" / "report.json", csv = dir / "out" / "report.csv";
  auto r = run(cli,
               "search --scene '" + raster + "' --annotations '" + ann + "' --wavelengths '" +
                   table + "' --modes ndi --patch-size 64 --top-k 10 --out '" + json.string() +
                   "' --csv '" + csv.string() + "'",
               dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = Json::parse(slurp(json));
  EXPECT_EQ(doc["records"].size(), 66u);
  EXPECT_EQ(doc["patches"].size(), 1u);
  // Any index touching the planted pair may tie at the top; the pair itself must be among them.
  double planted = -1;
  for (const auto& rec : doc["records"])
    if (rec["viz"] == "NDI(B4,B8)") planted = rec["mean_iou"].get<double>();
  EXPECT_EQ(planted, doc["argmax"]["mean_iou"].get<double>());
  EXPECT_EQ(line_count(slurp(csv)), 67u);
  EXPECT_NE(r.out.find("NDI(B4,B8)"), std::string::npos);

  // Render: a good expression writes one PNG per patch, a bad one points at the error.
  r = run(cli,
          "render --scene '" + raster + "' --annotations '" + ann + "' --wavelengths '" + table +
              "' --patch-size 64 --viz 'NDI(B8,B4)' --out '" + (dir / "png").string() + "'",
          dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "png" / "patch_000.png"));

  r = run(cli, "render --scene '" + raster + "' --wavelengths '" + table + "' --viz 'NDI(B2)'",
          dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("NDI(B2)"), std::string::npos);
  EXPECT_NE(r.err.find('^'), std::string::npos);

  r = run(cli, "search --scene '" + raster + "' --annotations '" + ann +
                   "' --modes ndi --wavelengths '" + (dir / "missing.json").string() + "'",
          dir);
  EXPECT_EQ(r.code, 2);
}
