#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "samselect/raster_io.hpp"

namespace samselect::testing {

inline std::filesystem::path config_dir() { return SAMSELECT_CONFIG_DIR; }

inline WavelengthTable s2_table() {
  return WavelengthTable::load(config_dir() / "sentinel2a_l2a.json");
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 gen{std::random_device{}()};
    path_ = std::filesystem::temp_directory_path() /
            ("samselect_" + tag + "_" + std::to_string(gen()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Image with the given bands and wavelengths, every band filled by `fill`.
inline MultibandImage make_image(const std::vector<std::string>& ids,
                                 const std::vector<double>& wavelengths, int h, int w,
                                 double fill = 0.0) {
  MultibandImage img;
  img.band_ids = ids;
  img.wavelengths_nm = wavelengths;
  for (std::size_t i = 0; i < ids.size(); ++i) img.bands.emplace_back(h, w, fill);
  return img;
}

inline MultibandImage random_image(const std::vector<std::string>& ids,
                                   const std::vector<double>& wavelengths, int h, int w,
                                   std::uint64_t seed, double lo = 0.01, double hi = 0.5) {
  auto img = make_image(ids, wavelengths, h, w);
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& b : img.bands)
    for (auto& v : b.values()) v = dist(gen);
  return img;
}

inline Patch make_patch_from(const MultibandImage& img, const Mask& mask, std::string id = "p") {
  Patch p;
  p.id = std::move(id);
  p.window = {0, 0, img.height()};
  p.image = img;
  p.mask = mask;
  return p;
}

inline std::vector<std::string> s2_ids() {
  return {"B1", "B2", "B3", "B4", "B5", "B6", "B7", "B8", "B8A", "B9", "B11", "B12"};
}

inline std::vector<double> s2_wavelengths() {
  return {442.7, 492.4, 559.8, 664.6, 704.1, 740.5, 782.8, 832.8, 864.7, 945.1, 1613.7, 2202.4};
}

}  // namespace samselect::testing
