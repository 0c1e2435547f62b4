#include "samselect/synth.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>

#include <json.hpp>

#include "samselect/error.hpp"
#include "samselect/rng.hpp"

namespace samselect {

double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

SynthScene generate_scene(const SynthSpec& spec) {
  WavelengthTable table = spec.wavelengths;
  if (table.empty()) {
    if (spec.n_bands < 3) throw ConfigError("n_bands must be >= 3");
    std::map<std::string, double> entries;
    for (int i = 1; i <= spec.n_bands; ++i)
      entries["S" + std::to_string(i)] = 400.0 + 100.0 * i;
    table = WavelengthTable(entries);
  }
  if (table.size() < 3) throw ConfigError("synthetic scenes need at least 3 bands");
  const std::string bi = to_upper(spec.bi);
  const std::string bj = to_upper(spec.bj);
  if (!table.find(bi) || !table.find(bj))
    throw ConfigError("separable pair (" + spec.bi + ", " + spec.bj + ") not among the bands");
  if (bi == bj) throw ConfigError("separable pair needs two different bands");
  if (!(spec.contrast > 0.0)) throw ConfigError("contrast must be positive");
  if (spec.noise_sigma < 0.0) throw ConfigError("noise_sigma must be >= 0");
  if (spec.noise_sigma > 0.0 && spec.contrast <= 4.0 * spec.noise_sigma)
    throw ConfigError("contrast " + std::to_string(spec.contrast) +
                      " too small for noise_sigma " + std::to_string(spec.noise_sigma) +
                      "; it must exceed 4 * noise_sigma = " +
                      std::to_string(4.0 * spec.noise_sigma));
  if (spec.height <= 0 || spec.width <= 0) throw ConfigError("scene size must be positive");
  if (spec.targets.empty()) throw ConfigError("at least one target is required");

  SynthScene out;
  Mask mask(spec.height, spec.width, 0);
  for (const auto& t : spec.targets) {
    if (t.height <= 0 || t.width <= 0 || t.row < 0 || t.col < 0 ||
        t.row + t.height > spec.height || t.col + t.width > spec.width)
      throw ConfigError("target rectangle outside the scene");
    for (int r = t.row; r < t.row + t.height; ++r)
      for (int c = t.col; c < t.col + t.width; ++c) mask(r, c) = 1;
    Polygon poly;
    const double x0 = t.col, y0 = t.row, x1 = t.col + t.width, y1 = t.row + t.height;
    poly.outer = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}};
    out.annotations.polygons.push_back(std::move(poly));
    out.annotations.patch_centers.push_back({t.row + t.height / 2, t.col + t.width / 2});
  }
  out.annotations.mask = mask;

  // Lowered band stays positive: the shared mean sits `contrast` above water.
  const double mean = spec.water_mean + spec.contrast;
  auto& img = out.scene.image;
  img.band_ids = table.ids_by_wavelength();
  for (const auto& id : img.band_ids) {
    img.wavelengths_nm.push_back(table.at(id));
    Raster band(spec.height, spec.width, 0.0);
    Rng rng(stream_seed(spec.seed, id, "synth-noise"));
    const double shift = id == bi ? spec.contrast : id == bj ? -spec.contrast : 0.0;
    for (int r = 0; r < spec.height; ++r)
      for (int c = 0; c < spec.width; ++c) {
        double v = mean;
        if (spec.noise_sigma > 0.0) v += spec.noise_sigma * standard_normal(rng);
        if (mask(r, c)) v += shift;
        if (spec.haze != 0.0 && spec.width > 1)
          v += spec.haze * static_cast<double>(c) / static_cast<double>(spec.width - 1);
        band(r, c) = v;
      }
    img.bands.push_back(std::move(band));
  }
  img.validate(3);
  return out;
}

std::pair<std::filesystem::path, std::filesystem::path> write_synth_scene(
    const SynthScene& synth, const std::filesystem::path& dir, const std::string& stem) {
  std::filesystem::create_directories(dir);
  const auto raster = dir / (stem + ".bin");
  write_flat_binary(synth.scene, raster);

  nlohmann::ordered_json features = nlohmann::ordered_json::array();
  for (const auto& poly : synth.annotations.polygons) {
    nlohmann::ordered_json ring = nlohmann::ordered_json::array();
    for (const auto& [x, y] : poly.outer) ring.push_back({x, y});
    features.push_back({{"type", "Feature"},
                        {"properties", {{"kind", "target"}}},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", {ring}}}}});
  }
  for (const auto& p : synth.annotations.patch_centers)
    features.push_back(
        {{"type", "Feature"},
         {"properties", {{"kind", "center"}}},
         {"geometry", {{"type", "Point"}, {"coordinates", {p.col + 0.5, p.row + 0.5}}}}});
  const auto ann = dir / (stem + ".geojson");
  std::ofstream out(ann);
  if (!out) throw DataError("cannot write '" + ann.string() + "'");
  out << nlohmann::ordered_json{{"type", "FeatureCollection"}, {"features", features}}.dump(1)
      << '\n';
  return {raster, ann};
}

Dataset make_dataset(const SynthScene& synth, int patch_size, const std::string& site) {
  Dataset ds;
  ds.site_name = site;
  ds.patches = extract_patches(synth.scene, synth.annotations, patch_size);
  return ds;
}

}  // namespace samselect
