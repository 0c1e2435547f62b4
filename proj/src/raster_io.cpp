#include "samselect/raster_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include <json.hpp>

#include "samselect/error.hpp"
#include "samselect/geotiff.hpp"
#include "samselect/mask_ops.hpp"

namespace samselect {

using nlohmann::json;

std::string to_upper(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
  return out;
}

namespace {

bool has_tiff_extension(const std::filesystem::path& path) {
  const auto ext = to_upper(path.extension().string());
  return ext == ".TIF" || ext == ".TIFF";
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing file '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
  return v;
}

std::string normalize_crs(std::string crs) {
  crs = to_upper(crs);
  if (crs == "OGC:CRS84" || crs == "URN:OGC:DEF:CRS:OGC:1.3:CRS84" ||
      crs == "URN:OGC:DEF:CRS:OGC::CRS84")
    return "EPSG:4326";
  if (const auto pos = crs.find("EPSG"); pos != std::string::npos) {
    std::string digits;
    for (std::size_t i = pos + 4; i < crs.size(); ++i)
      if (std::isdigit(static_cast<unsigned char>(crs[i]))) digits += crs[i];
    if (!digits.empty()) return "EPSG:" + digits;
  }
  return crs;
}

}  // namespace

std::pair<double, double> GeoTransform::pixel_to_geo(double col, double row) const {
  return {c[0] + col * c[1] + row * c[2], c[3] + col * c[4] + row * c[5]};
}

std::pair<double, double> GeoTransform::geo_to_pixel(double x, double y) const {
  const double det = c[1] * c[5] - c[2] * c[4];
  if (det == 0.0) throw DataError("geo transform is singular");
  const double dx = x - c[0];
  const double dy = y - c[3];
  return {(c[5] * dx - c[2] * dy) / det, (-c[4] * dx + c[1] * dy) / det};
}

WavelengthTable::WavelengthTable(const std::map<std::string, double>& entries) {
  std::set<double> seen;
  for (const auto& [id, nm] : entries) {
    if (!(nm > 0.0) || !std::isfinite(nm))
      throw DataError("wavelength of band " + id + " must be strictly positive");
    if (!seen.insert(nm).second)
      throw DataError("two bands share the wavelength " + std::to_string(nm) + " nm");
    if (!entries_.emplace(to_upper(id), nm).second)
      throw DataError("band " + id + " listed twice");
  }
}

WavelengthTable WavelengthTable::load(const std::filesystem::path& path) {
  const json doc = read_json_file(path);
  if (!doc.is_object()) throw DataError("wavelength config must be a JSON object");
  std::map<std::string, double> entries;
  for (const auto& [key, value] : doc.items()) {
    if (!value.is_number())
      throw DataError("wavelength of band " + key + " is not a number in '" + path.string() + "'");
    entries[key] = value.get<double>();
  }
  return WavelengthTable(entries);
}

std::optional<double> WavelengthTable::find(std::string_view band_id) const {
  const auto it = entries_.find(to_upper(band_id));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

double WavelengthTable::at(std::string_view band_id) const {
  if (auto v = find(band_id)) return *v;
  throw DataError("band " + std::string(band_id) + " has no wavelength entry");
}

std::vector<std::string> WavelengthTable::ids_by_wavelength() const {
  std::vector<std::string> ids;
  for (const auto& [id, nm] : entries_) ids.push_back(id);
  std::sort(ids.begin(), ids.end(),
            [&](const auto& a, const auto& b) { return entries_.at(a) < entries_.at(b); });
  return ids;
}

std::optional<std::size_t> MultibandImage::find_band(std::string_view band_id) const {
  const std::string key = to_upper(band_id);
  for (std::size_t i = 0; i < band_ids.size(); ++i)
    if (band_ids[i] == key) return i;
  return std::nullopt;
}

const Raster& MultibandImage::band(std::string_view band_id) const {
  if (auto i = find_band(band_id)) return bands[*i];
  throw DataError("unknown band " + std::string(band_id));
}

double MultibandImage::wavelength(std::string_view band_id) const {
  if (auto i = find_band(band_id)) return wavelengths_nm[*i];
  throw DataError("unknown band " + std::string(band_id));
}

void MultibandImage::validate(std::size_t min_bands) const {
  if (bands.size() < min_bands)
    throw DataError("need at least " + std::to_string(min_bands) + " bands, got " +
                    std::to_string(bands.size()));
  if (band_ids.size() != bands.size() || wavelengths_nm.size() != bands.size())
    throw DataError("band ids, wavelengths and band grids differ in length");
  std::set<std::string> ids;
  std::set<double> wls;
  for (std::size_t i = 0; i < bands.size(); ++i) {
    if (!bands[i].same_shape(bands.front()))
      throw DataError("band " + band_ids[i] + " differs in shape from band " + band_ids.front());
    if (!ids.insert(band_ids[i]).second) throw DataError("duplicate band id " + band_ids[i]);
    if (!(wavelengths_nm[i] > 0.0))
      throw DataError("wavelength of band " + band_ids[i] + " must be strictly positive");
    if (!wls.insert(wavelengths_nm[i]).second)
      throw DataError("band " + band_ids[i] + " shares its wavelength with another band");
  }
}

std::pair<std::filesystem::path, std::filesystem::path> flat_binary_paths(
    const std::filesystem::path& path) {
  auto data = path;
  auto sidecar = path;
  if (to_upper(path.extension().string()) == ".JSON") {
    data.replace_extension(".bin");
  } else {
    sidecar.replace_extension(".json");
  }
  return {data, sidecar};
}

namespace {

struct LoadedBands {
  std::vector<Raster> bands;
  std::vector<std::string> file_ids;
  std::vector<std::optional<double>> file_wavelengths;
  std::optional<GeoTransform> geo_transform;
  std::optional<std::string> crs_id;
};

LoadedBands read_flat_binary(const std::filesystem::path& path) {
  const auto [data_path, sidecar_path] = flat_binary_paths(path);
  if (!std::filesystem::exists(sidecar_path))
    throw DataError("missing file '" + sidecar_path.string() + "'");
  if (!std::filesystem::exists(data_path))
    throw DataError("missing file '" + data_path.string() + "'");
  const json header = read_json_file(sidecar_path);

  LoadedBands out;
  int width = 0, height = 0;
  try {
    width = header.at("width").get<int>();
    height = header.at("height").get<int>();
    for (const auto& b : header.at("bands")) {
      out.file_ids.push_back(to_upper(b.at("id").get<std::string>()));
      if (b.contains("wavelength_nm") && b["wavelength_nm"].is_number())
        out.file_wavelengths.emplace_back(b["wavelength_nm"].get<double>());
      else
        out.file_wavelengths.emplace_back(std::nullopt);
    }
    if (header.contains("geo_transform")) {
      GeoTransform gt;
      const auto arr = header["geo_transform"].get<std::vector<double>>();
      if (arr.size() != 6) throw DataError("geo_transform needs 6 coefficients");
      std::copy(arr.begin(), arr.end(), gt.c.begin());
      out.geo_transform = gt;
    }
    if (header.contains("crs")) out.crs_id = normalize_crs(header["crs"].get<std::string>());
  } catch (const json::exception& e) {
    throw DataError("malformed sidecar '" + sidecar_path.string() + "': " + e.what());
  }
  if (width <= 0 || height <= 0) throw DataError("sidecar declares an empty raster");

  const std::size_t plane = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  const std::size_t expected = plane * out.file_ids.size() * sizeof(float);
  if (std::filesystem::file_size(data_path) != expected)
    throw DataError("flat-binary file '" + data_path.string() + "' has " +
                    std::to_string(std::filesystem::file_size(data_path)) +
                    " bytes, sidecar implies " + std::to_string(expected));

  std::ifstream in(data_path, std::ios::binary);
  std::vector<std::uint32_t> raw(plane);
  for (std::size_t b = 0; b < out.file_ids.size(); ++b) {
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(plane * 4));
    if (!in) throw DataError("short read from '" + data_path.string() + "'");
    Raster band(height, width);
    auto dst = band.values();
    for (std::size_t i = 0; i < plane; ++i) {
      const std::uint32_t bits = to_little_endian(raw[i]);
      float v;
      std::memcpy(&v, &bits, 4);
      dst[i] = v;
    }
    out.bands.push_back(std::move(band));
  }
  return out;
}

}  // namespace

Scene load_scene(const std::filesystem::path& path, std::span<const std::string> band_order,
                 const WavelengthTable& wavelengths) {
  LoadedBands loaded;
  if (has_tiff_extension(path)) {
    auto tiff = read_geotiff(path);
    loaded.bands = std::move(tiff.bands);
    loaded.geo_transform = tiff.geo_transform;
    loaded.crs_id = tiff.crs_id;
    const bool described =
        tiff.band_descriptions.size() == loaded.bands.size() &&
        std::none_of(tiff.band_descriptions.begin(), tiff.band_descriptions.end(),
                     [](const auto& d) { return d.empty(); });
    if (described)
      for (const auto& d : tiff.band_descriptions) loaded.file_ids.push_back(to_upper(d));
    loaded.file_wavelengths.assign(loaded.bands.size(), std::nullopt);
  } else {
    loaded = read_flat_binary(path);
  }
  const std::size_t n = loaded.bands.size();

  // Ids of the bands in file order.
  std::vector<std::string> ids;
  if (!band_order.empty()) {
    if (band_order.size() != n)
      throw DataError("band-count mismatch: file '" + path.string() + "' has " +
                      std::to_string(n) + " bands, band order lists " +
                      std::to_string(band_order.size()));
    for (const auto& id : band_order) ids.push_back(to_upper(id));
  } else if (!loaded.file_ids.empty()) {
    ids = loaded.file_ids;
  } else if (wavelengths.size() == n) {
    ids = wavelengths.ids_by_wavelength();
  } else {
    throw DataError("cannot infer band ids for '" + path.string() + "' (" + std::to_string(n) +
                    " bands): supply a band order");
  }

  Scene scene;
  scene.geo_transform = loaded.geo_transform;
  scene.crs_id = loaded.crs_id;
  for (std::size_t i = 0; i < n; ++i) {
    // When the file carries its own ids, band_order reorders by id.
    std::size_t src = i;
    if (!band_order.empty() && !loaded.file_ids.empty()) {
      const auto it = std::find(loaded.file_ids.begin(), loaded.file_ids.end(), ids[i]);
      if (it == loaded.file_ids.end())
        throw DataError("band " + ids[i] + " not present in '" + path.string() + "'");
      src = static_cast<std::size_t>(it - loaded.file_ids.begin());
    }
    std::optional<double> nm = wavelengths.find(ids[i]);
    if (!nm) nm = loaded.file_wavelengths[src];
    if (!nm) throw DataError("band " + ids[i] + " has no wavelength entry");
    scene.image.band_ids.push_back(ids[i]);
    scene.image.wavelengths_nm.push_back(*nm);
    scene.image.bands.push_back(loaded.bands[src]);
  }
  scene.image.validate(3);
  return scene;
}

void write_flat_binary(const Scene& scene, const std::filesystem::path& path) {
  scene.image.validate();
  const auto [data_path, sidecar_path] = flat_binary_paths(path);
  std::ofstream out(data_path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + data_path.string() + "'");
  for (const auto& band : scene.image.bands) {
    std::vector<std::uint32_t> raw(band.size());
    auto src = band.values();
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const float v = static_cast<float>(src[i]);
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      raw[i] = to_little_endian(bits);
    }
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size() * 4));
  }
  if (!out) throw DataError("failed writing '" + data_path.string() + "'");

  json header;
  header["width"] = scene.width();
  header["height"] = scene.height();
  header["bands"] = json::array();
  for (std::size_t i = 0; i < scene.image.band_count(); ++i)
    header["bands"].push_back(
        {{"id", scene.image.band_ids[i]}, {"wavelength_nm", scene.image.wavelengths_nm[i]}});
  if (scene.geo_transform) header["geo_transform"] = scene.geo_transform->c;
  if (scene.crs_id) header["crs"] = *scene.crs_id;
  std::ofstream side(sidecar_path);
  if (!side) throw DataError("cannot write '" + sidecar_path.string() + "'");
  side << header.dump(2) << '\n';
}

Mask rasterize_polygons(std::span<const Polygon> polygons, int height, int width) {
  Mask mask(height, width, 0);
  std::vector<double> crossings;
  for (const auto& poly : polygons) {
    for (int r = 0; r < height; ++r) {
      const double y = r + 0.5;
      crossings.clear();
      auto add_ring = [&](const Polygon::Ring& ring) {
        const std::size_t n = ring.size();
        for (std::size_t i = 0; i < n; ++i) {
          const auto [x1, y1] = ring[i];
          const auto [x2, y2] = ring[(i + 1) % n];
          // Half-open rule so shared vertices are counted once.
          if ((y1 <= y && y < y2) || (y2 <= y && y < y1))
            crossings.push_back(x1 + (y - y1) * (x2 - x1) / (y2 - y1));
        }
      };
      add_ring(poly.outer);
      for (const auto& hole : poly.holes) add_ring(hole);
      std::sort(crossings.begin(), crossings.end());
      for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
        // Pixel centers c + 0.5 in [x_start, x_end).
        const int c0 = std::max(0, static_cast<int>(std::ceil(crossings[k] - 0.5)));
        const int c1 = std::min(width - 1, static_cast<int>(std::ceil(crossings[k + 1] - 0.5)) - 1);
        for (int c = c0; c <= c1; ++c) mask(r, c) = 1;
      }
    }
  }
  return mask;
}

std::vector<PixelCoord> component_centers(const Mask& mask) {
  std::vector<PixelCoord> centers;
  for (const auto& comp : connected_components(mask)) {
    const auto c = centroid_of(comp);
    centers.push_back({round_half_up(c.row), round_half_up(c.col)});
  }
  return centers;
}

namespace {

AnnotationSet load_geojson(const std::filesystem::path& path, const Scene& scene) {
  const json doc = read_json_file(path);
  if (doc.contains("crs") && scene.crs_id) {
    std::string name;
    try {
      name = doc["crs"].at("properties").at("name").get<std::string>();
    } catch (const json::exception&) {
      throw DataError("unreadable crs member in '" + path.string() + "'");
    }
    if (normalize_crs(name) != normalize_crs(*scene.crs_id))
      throw DataError("CRS mismatch: annotations in " + name + ", scene in " + *scene.crs_id);
  }

  auto to_pixel = [&](const json& xy) -> std::pair<double, double> {
    const double x = xy.at(0).get<double>();
    const double y = xy.at(1).get<double>();
    if (scene.geo_transform) return scene.geo_transform->geo_to_pixel(x, y);
    return {x, y};
  };
  auto to_ring = [&](const json& coords) {
    Polygon::Ring ring;
    for (const auto& xy : coords) ring.push_back(to_pixel(xy));
    return ring;
  };
  auto to_polygon = [&](const json& rings) {
    Polygon poly;
    if (rings.empty()) return poly;
    poly.outer = to_ring(rings[0]);
    for (std::size_t i = 1; i < rings.size(); ++i) poly.holes.push_back(to_ring(rings[i]));
    return poly;
  };

  AnnotationSet set;
  std::vector<json> features;
  if (doc.value("type", "") == "FeatureCollection") {
    for (const auto& f : doc.at("features")) features.push_back(f);
  } else if (doc.value("type", "") == "Feature") {
    features.push_back(doc);
  } else {
    throw DataError("'" + path.string() + "' is not a GeoJSON FeatureCollection");
  }

  try {
    for (const auto& f : features) {
      if (!f.contains("geometry") || f["geometry"].is_null()) continue;
      const auto& geom = f["geometry"];
      const std::string type = geom.at("type").get<std::string>();
      const auto& coords = geom.at("coordinates");
      if (type == "Polygon") {
        set.polygons.push_back(to_polygon(coords));
      } else if (type == "MultiPolygon") {
        for (const auto& p : coords) set.polygons.push_back(to_polygon(p));
      } else if (type == "Point") {
        const auto [col, row] = to_pixel(coords);
        set.patch_centers.push_back(
            {static_cast<int>(std::floor(row)), static_cast<int>(std::floor(col))});
      } else {
        set.diagnostics.push_back("ignored geometry of type " + type);
      }
    }
  } catch (const json::exception& e) {
    throw DataError("malformed GeoJSON in '" + path.string() + "': " + e.what());
  }

  if (set.polygons.empty()) throw DataError("empty annotation set in '" + path.string() + "'");
  set.mask = rasterize_polygons(set.polygons, scene.height(), scene.width());
  for (std::size_t i = 0; i < set.polygons.size(); ++i) {
    const Mask single = rasterize_polygons(std::span(&set.polygons[i], 1), scene.height(),
                                           scene.width());
    if (count_true(single) == 0)
      set.diagnostics.push_back("polygon " + std::to_string(i) + " covers no pixel center");
  }
  if (count_true(set.mask) == 0)
    throw DataError("annotations in '" + path.string() + "' have no overlap with the scene");
  if (set.patch_centers.empty()) set.patch_centers = component_centers(set.mask);
  return set;
}

AnnotationSet load_mask_raster(const std::filesystem::path& path, const Scene& scene) {
  auto tiff = read_geotiff(path);
  if (tiff.bands.size() != 1)
    throw DataError("mask raster '" + path.string() + "' must have exactly one band");
  const Raster& band = tiff.bands.front();
  if (band.height() != scene.height() || band.width() != scene.width())
    throw DataError("mask raster is " + std::to_string(band.height()) + "x" +
                    std::to_string(band.width()) + ", scene is " +
                    std::to_string(scene.height()) + "x" + std::to_string(scene.width()));
  if (tiff.crs_id && scene.crs_id && *tiff.crs_id != *scene.crs_id)
    throw DataError("CRS mismatch: mask in " + *tiff.crs_id + ", scene in " + *scene.crs_id);
  AnnotationSet set;
  set.mask = Mask(band.height(), band.width());
  auto src = band.values();
  auto dst = set.mask.values();
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i] != 0.0 && src[i] != 1.0)
      throw DataError("non-binary mask raster '" + path.string() + "': found value " +
                      std::to_string(src[i]));
    dst[i] = src[i] == 1.0 ? 1 : 0;
  }
  if (count_true(set.mask) == 0) throw DataError("empty annotation set in '" + path.string() + "'");
  set.patch_centers = component_centers(set.mask);
  return set;
}

}  // namespace

AnnotationSet load_annotations(const std::filesystem::path& path, const Scene& scene) {
  if (!std::filesystem::exists(path)) throw DataError("missing file '" + path.string() + "'");
  if (has_tiff_extension(path)) return load_mask_raster(path, scene);
  return load_geojson(path, scene);
}

PixelCoord clamp_window(PixelCoord center, int size, int height, int width) {
  if (size > height || size > width)
    throw DataError("scene " + std::to_string(height) + "x" + std::to_string(width) +
                    " is smaller than patch size " + std::to_string(size));
  return {std::clamp(center.row - size / 2, 0, height - size),
          std::clamp(center.col - size / 2, 0, width - size)};
}

Patch make_patch(const Scene& scene, const Mask& scene_mask, PixelCoord center, int size,
                 std::string id) {
  const PixelCoord origin = clamp_window(center, size, scene.height(), scene.width());
  Patch patch;
  patch.id = std::move(id);
  patch.window = {origin.row, origin.col, size};
  patch.image.band_ids = scene.image.band_ids;
  patch.image.wavelengths_nm = scene.image.wavelengths_nm;
  for (const auto& band : scene.image.bands)
    patch.image.bands.push_back(band.window(origin.row, origin.col, size, size));
  patch.mask = scene_mask.empty() ? Mask(size, size, 0)
                                  : scene_mask.window(origin.row, origin.col, size, size);
  return patch;
}

std::vector<Patch> extract_patches(const Scene& scene, const AnnotationSet& annotations, int size) {
  if (size <= 0) throw DataError("patch size must be positive");
  if (annotations.mask.height() != scene.height() || annotations.mask.width() != scene.width())
    throw DataError("annotation mask does not match the scene dimensions");
  std::vector<Patch> patches;
  char id[32];
  for (std::size_t i = 0; i < annotations.patch_centers.size(); ++i) {
    std::snprintf(id, sizeof id, "patch_%03zu", i);
    patches.push_back(make_patch(scene, annotations.mask, annotations.patch_centers[i], size, id));
  }
  return patches;
}

}  // namespace samselect
