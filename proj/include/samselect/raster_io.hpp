#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "samselect/grid.hpp"

namespace samselect {

// Affine georeference in GDAL coefficient order:
//   x = c[0] + col * c[1] + row * c[2]
//   y = c[3] + col * c[4] + row * c[5]
struct GeoTransform {
  std::array<double, 6> c{0.0, 1.0, 0.0, 0.0, 0.0, 1.0};

  std::pair<double, double> pixel_to_geo(double col, double row) const;
  // Returns (col, row). Throws DataError for a singular transform.
  std::pair<double, double> geo_to_pixel(double x, double y) const;

  friend bool operator==(const GeoTransform&, const GeoTransform&) = default;
};

// Central wavelength in nanometers per band id. Ids are stored uppercase.
class WavelengthTable {
 public:
  WavelengthTable() = default;
  // Throws DataError on non-positive or duplicated wavelengths.
  explicit WavelengthTable(const std::map<std::string, double>& entries);

  // JSON object {"B1": 442.7, ...}.
  static WavelengthTable load(const std::filesystem::path& path);

  std::optional<double> find(std::string_view band_id) const;
  double at(std::string_view band_id) const;
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::map<std::string, double>& entries() const noexcept { return entries_; }

  // Band ids sorted by ascending wavelength.
  std::vector<std::string> ids_by_wavelength() const;

 private:
  std::map<std::string, double> entries_;
};

std::string to_upper(std::string_view text);

// Co-registered bands with their ids and central wavelengths. Shared by whole
// scenes and by patches cut from them.
struct MultibandImage {
  std::vector<std::string> band_ids;
  std::vector<double> wavelengths_nm;
  std::vector<Raster> bands;

  int height() const noexcept { return bands.empty() ? 0 : bands.front().height(); }
  int width() const noexcept { return bands.empty() ? 0 : bands.front().width(); }
  std::size_t band_count() const noexcept { return bands.size(); }

  std::optional<std::size_t> find_band(std::string_view band_id) const;
  // Throws DataError for unknown ids.
  const Raster& band(std::string_view band_id) const;
  double wavelength(std::string_view band_id) const;

  // Checks equal band shapes, unique ids, strictly positive distinct
  // wavelengths and matching list lengths. Throws DataError.
  void validate(std::size_t min_bands = 1) const;
};

struct Scene {
  MultibandImage image;
  std::optional<GeoTransform> geo_transform;
  std::optional<std::string> crs_id;

  int height() const noexcept { return image.height(); }
  int width() const noexcept { return image.width(); }
};

// Outer ring plus optional holes, in pixel coordinates (x = column,
// y = row, pixel (r, c) covering [c, c+1) x [r, r+1)).
struct Polygon {
  using Ring = std::vector<std::pair<double, double>>;
  Ring outer;
  std::vector<Ring> holes;
};

struct AnnotationSet {
  std::vector<Polygon> polygons;
  // Scene-sized union of all annotated objects.
  Mask mask;
  std::vector<PixelCoord> patch_centers;
  std::vector<std::string> diagnostics;
};

struct PatchWindow {
  int row = 0;
  int col = 0;
  int size = 0;
  friend bool operator==(const PatchWindow&, const PatchWindow&) = default;
};

struct Patch {
  std::string id;
  PatchWindow window;
  MultibandImage image;
  Mask mask;
};

// Loads a multiband GeoTIFF (.tif/.tiff) or a flat-binary raster with JSON
// sidecar (any other extension; see write_flat_binary). `band_order` names the
// bands of the file in file order, or selects and reorders them by id when the
// file carries its own ids; when empty it falls back to the sidecar
// ids, then GDAL band descriptions, then the wavelength table sorted by
// wavelength when its size matches the band count. Wavelengths come from
// `wavelengths`, falling back to the sidecar's wavelength_nm.
Scene load_scene(const std::filesystem::path& path, std::span<const std::string> band_order,
                 const WavelengthTable& wavelengths);

// Writes `<stem>.bin` (little-endian float32, band-sequential) and the
// `<stem>.json` sidecar. `path` may name either file.
void write_flat_binary(const Scene& scene, const std::filesystem::path& path);

// Resolves the (data, sidecar) file pair for a flat-binary path.
std::pair<std::filesystem::path, std::filesystem::path> flat_binary_paths(
    const std::filesystem::path& path);

// Center-of-pixel inclusion, even-odd rule over all rings; union over
// polygons.
Mask rasterize_polygons(std::span<const Polygon> polygons, int height, int width);

// Rounded centroid of each 8-connected component, in component order.
std::vector<PixelCoord> component_centers(const Mask& mask);

// GeoJSON FeatureCollection of Polygon/MultiPolygon (plus optional Point
// features used as patch centers), or a single-band 0/1 mask GeoTIFF.
// Without Point features, centers are the rounded centroids of the mask's
// 8-connected components.
AnnotationSet load_annotations(const std::filesystem::path& path, const Scene& scene);

// Top-left window corner for a patch centered at `center`, shifted inward so
// the window lies inside a height x width raster.
PixelCoord clamp_window(PixelCoord center, int size, int height, int width);

Patch make_patch(const Scene& scene, const Mask& scene_mask, PixelCoord center, int size,
                 std::string id);

std::vector<Patch> extract_patches(const Scene& scene, const AnnotationSet& annotations,
                                   int size = 128);

}  // namespace samselect
