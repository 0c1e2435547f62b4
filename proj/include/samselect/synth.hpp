#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "samselect/raster_io.hpp"
#include "samselect/rng.hpp"
#include "samselect/search.hpp"

namespace samselect {

struct SynthRect {
  int row = 0;
  int col = 0;
  int height = 0;
  int width = 0;
};

// Planted-target scene recipe. Every band is drawn around the same
// water-like mean; target pixels raise band `bi` and lower band `bj` by
// `contrast`, so the target only stands out through the (bi, bj) pair.
struct SynthSpec {
  std::uint64_t seed = 0;
  // Empty: n_bands synthetic bands "S1".."Sn", band Si at 400 + 100 * i nm.
  WavelengthTable wavelengths;
  int n_bands = 12;
  int height = 128;
  int width = 128;
  std::vector<SynthRect> targets{{54, 54, 20, 20}};
  std::string bi;
  std::string bj;
  double contrast = 0.2;
  double noise_sigma = 0.0;
  double water_mean = 0.05;
  // Additive brightness ramp across columns, same for all bands.
  double haze = 0.0;
};

struct SynthScene {
  Scene scene;
  AnnotationSet annotations;
};

// Throws ConfigError for unknown planted bands, non-positive contrast,
// targets outside the scene, or contrast <= 4 * noise_sigma.
SynthScene generate_scene(const SynthSpec& spec);

// Flat-binary raster plus a pixel-coordinate GeoJSON of target rectangles
// and centers. Returns (raster path, annotation path).
std::pair<std::filesystem::path, std::filesystem::path> write_synth_scene(
    const SynthScene& synth, const std::filesystem::path& dir, const std::string& stem = "synth");

Dataset make_dataset(const SynthScene& synth, int patch_size = 128,
                     const std::string& site = "synthetic");

// Standard normal draw (Box-Muller on the 53-bit uniform stream), identical
// across standard libraries.
double standard_normal(Rng& rng);

}  // namespace samselect
