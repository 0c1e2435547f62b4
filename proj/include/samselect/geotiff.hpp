#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "samselect/grid.hpp"
#include "samselect/raster_io.hpp"

namespace samselect {

struct TiffRaster {
  std::vector<Raster> bands;
  std::optional<GeoTransform> geo_transform;
  std::optional<std::string> crs_id;
  // Per-band DESCRIPTION items from the GDAL metadata tag, if present.
  std::vector<std::string> band_descriptions;
};

// Reads every sample of the first image directory as double. Handles strips
// and tiles, contiguous and separate planes, 8/16/32/64-bit integer and
// floating-point samples, plus the GeoTIFF tie point, pixel scale,
// transformation and EPSG geo keys.
TiffRaster read_geotiff(const std::filesystem::path& path);

enum class TiffSampleType { float32, uint8 };

void write_geotiff(const std::filesystem::path& path, std::span<const Raster> bands,
                   TiffSampleType type, const std::optional<GeoTransform>& geo_transform,
                   const std::optional<std::string>& crs_id,
                   std::span<const std::string> band_descriptions = {});

}  // namespace samselect
