#include "samselect/geotiff.hpp"

#include <tiffio.h>

#include <cstdint>
#include <cstring>
#include <memory>
#include <mutex>
#include <regex>
#include <sstream>

#include "samselect/error.hpp"

namespace samselect {
namespace {

constexpr ttag_t kModelPixelScaleTag = 33550;
constexpr ttag_t kModelTiepointTag = 33922;
constexpr ttag_t kModelTransformationTag = 34264;
constexpr ttag_t kGeoKeyDirectoryTag = 34735;
constexpr ttag_t kGeoDoubleParamsTag = 34736;
constexpr ttag_t kGeoAsciiParamsTag = 34737;
constexpr ttag_t kGdalMetadataTag = 42112;

constexpr std::uint16_t kGTModelTypeGeoKey = 1024;
constexpr std::uint16_t kGTRasterTypeGeoKey = 1025;
constexpr std::uint16_t kGeographicTypeGeoKey = 2048;
constexpr std::uint16_t kProjectedCSTypeGeoKey = 3072;

const TIFFFieldInfo kGeoFieldInfo[] = {
    {kModelPixelScaleTag, TIFF_VARIABLE2, TIFF_VARIABLE2, TIFF_DOUBLE, FIELD_CUSTOM, 1, 1,
     const_cast<char*>("ModelPixelScaleTag")},
    {kModelTiepointTag, TIFF_VARIABLE2, TIFF_VARIABLE2, TIFF_DOUBLE, FIELD_CUSTOM, 1, 1,
     const_cast<char*>("ModelTiepointTag")},
    {kModelTransformationTag, TIFF_VARIABLE2, TIFF_VARIABLE2, TIFF_DOUBLE, FIELD_CUSTOM, 1, 1,
     const_cast<char*>("ModelTransformationTag")},
    {kGeoKeyDirectoryTag, TIFF_VARIABLE2, TIFF_VARIABLE2, TIFF_SHORT, FIELD_CUSTOM, 1, 1,
     const_cast<char*>("GeoKeyDirectoryTag")},
    {kGeoDoubleParamsTag, TIFF_VARIABLE2, TIFF_VARIABLE2, TIFF_DOUBLE, FIELD_CUSTOM, 1, 1,
     const_cast<char*>("GeoDoubleParamsTag")},
    {kGeoAsciiParamsTag, -1, -1, TIFF_ASCII, FIELD_CUSTOM, 1, 0,
     const_cast<char*>("GeoASCIIParamsTag")},
    {kGdalMetadataTag, -1, -1, TIFF_ASCII, FIELD_CUSTOM, 1, 0,
     const_cast<char*>("GDALMetadata")},
};

TIFFExtendProc g_parent_extender = nullptr;

void geo_tag_extender(TIFF* tif) {
  TIFFMergeFieldInfo(tif, kGeoFieldInfo, sizeof(kGeoFieldInfo) / sizeof(kGeoFieldInfo[0]));
  if (g_parent_extender) g_parent_extender(tif);
}

void register_geo_tags() {
  static std::once_flag once;
  std::call_once(once, [] {
    g_parent_extender = TIFFSetTagExtender(geo_tag_extender);
    TIFFSetWarningHandler(nullptr);
  });
}

struct TiffCloser {
  void operator()(TIFF* t) const { TIFFClose(t); }
};
using TiffHandle = std::unique_ptr<TIFF, TiffCloser>;

TiffHandle open_tiff(const std::filesystem::path& path, const char* mode) {
  register_geo_tags();
  TiffHandle tif(TIFFOpen(path.string().c_str(), mode));
  if (!tif) throw DataError("cannot open TIFF file '" + path.string() + "'");
  return tif;
}

double read_sample(const unsigned char* p, std::uint16_t bits, std::uint16_t format) {
  switch (format) {
    case SAMPLEFORMAT_IEEEFP:
      if (bits == 32) {
        float v;
        std::memcpy(&v, p, 4);
        return v;
      }
      if (bits == 64) {
        double v;
        std::memcpy(&v, p, 8);
        return v;
      }
      break;
    case SAMPLEFORMAT_INT:
      if (bits == 8) return static_cast<double>(*reinterpret_cast<const std::int8_t*>(p));
      if (bits == 16) {
        std::int16_t v;
        std::memcpy(&v, p, 2);
        return v;
      }
      if (bits == 32) {
        std::int32_t v;
        std::memcpy(&v, p, 4);
        return v;
      }
      break;
    default:
      if (bits == 8) return *p;
      if (bits == 16) {
        std::uint16_t v;
        std::memcpy(&v, p, 2);
        return v;
      }
      if (bits == 32) {
        std::uint32_t v;
        std::memcpy(&v, p, 4);
        return v;
      }
      break;
  }
  throw DataError("unsupported TIFF sample layout: " + std::to_string(bits) + "-bit format " +
                  std::to_string(format));
}

template <typename T>
std::vector<T> get_array(TIFF* tif, ttag_t tag) {
  std::uint32_t count = 0;
  T* data = nullptr;
  if (TIFFGetField(tif, tag, &count, &data) != 1 || data == nullptr) return {};
  return std::vector<T>(data, data + count);
}

void read_geo_metadata(TIFF* tif, TiffRaster& out) {
  const auto scale = get_array<double>(tif, kModelPixelScaleTag);
  const auto tie = get_array<double>(tif, kModelTiepointTag);
  const auto transform = get_array<double>(tif, kModelTransformationTag);
  if (transform.size() >= 16) {
    out.geo_transform = GeoTransform{
        {transform[3], transform[0], transform[1], transform[7], transform[4], transform[5]}};
  } else if (scale.size() >= 2 && tie.size() >= 6) {
    const double x0 = tie[3] - tie[0] * scale[0];
    const double y0 = tie[4] + tie[1] * scale[1];
    out.geo_transform = GeoTransform{{x0, scale[0], 0.0, y0, 0.0, -scale[1]}};
  }

  const auto keys = get_array<std::uint16_t>(tif, kGeoKeyDirectoryTag);
  if (keys.size() >= 4) {
    const std::size_t n = keys[3];
    for (std::size_t i = 0; i < n && 4 + 4 * i + 3 < keys.size(); ++i) {
      const auto* e = &keys[4 + 4 * i];
      if ((e[0] == kProjectedCSTypeGeoKey || e[0] == kGeographicTypeGeoKey) && e[1] == 0 &&
          e[3] != 0 && e[3] != 32767) {
        out.crs_id = "EPSG:" + std::to_string(e[3]);
        if (e[0] == kProjectedCSTypeGeoKey) break;
      }
    }
  }

  char* xml = nullptr;
  if (TIFFGetField(tif, kGdalMetadataTag, &xml) == 1 && xml != nullptr) {
    static const std::regex item(
        R"re(<Item\s+name="DESCRIPTION"\s+sample="(\d+)"[^>]*>([^<]*)</Item>)re");
    const std::string text(xml);
    for (auto it = std::sregex_iterator(text.begin(), text.end(), item);
         it != std::sregex_iterator(); ++it) {
      const std::size_t sample = std::stoul((*it)[1].str());
      if (out.band_descriptions.size() <= sample) out.band_descriptions.resize(sample + 1);
      out.band_descriptions[sample] = (*it)[2].str();
    }
  }
}

}  // namespace

TiffRaster read_geotiff(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("missing file '" + path.string() + "'");
  auto handle = open_tiff(path, "r");
  TIFF* tif = handle.get();

  std::uint32_t width = 0, height = 0;
  std::uint16_t spp = 1, bits = 8, format = SAMPLEFORMAT_UINT, planar = PLANARCONFIG_CONTIG;
  TIFFGetField(tif, TIFFTAG_IMAGEWIDTH, &width);
  TIFFGetField(tif, TIFFTAG_IMAGELENGTH, &height);
  TIFFGetFieldDefaulted(tif, TIFFTAG_SAMPLESPERPIXEL, &spp);
  TIFFGetFieldDefaulted(tif, TIFFTAG_BITSPERSAMPLE, &bits);
  TIFFGetFieldDefaulted(tif, TIFFTAG_SAMPLEFORMAT, &format);
  TIFFGetFieldDefaulted(tif, TIFFTAG_PLANARCONFIG, &planar);
  if (width == 0 || height == 0) throw DataError("TIFF '" + path.string() + "' has no pixels");
  if (bits % 8 != 0) throw DataError("TIFF bit depth " + std::to_string(bits) + " unsupported");

  const int w = static_cast<int>(width);
  const int h = static_cast<int>(height);
  const std::size_t bytes = bits / 8;
  const bool separate = planar == PLANARCONFIG_SEPARATE;

  TiffRaster out;
  out.bands.assign(spp, Raster(h, w));

  // One decoded block covers rows [y0, y0+bh) and cols [x0, x0+bw) of either
  // a single plane (separate) or all samples interleaved (contig).
  auto scatter = [&](const std::vector<unsigned char>& buf, int x0, int y0, int bw, int bh,
                     int plane) {
    const int samples_in_block = separate ? 1 : spp;
    for (int r = 0; r < bh && y0 + r < h; ++r) {
      for (int c = 0; c < bw && x0 + c < w; ++c) {
        const std::size_t base =
            (static_cast<std::size_t>(r) * bw + c) * samples_in_block * bytes;
        for (int s = 0; s < samples_in_block; ++s) {
          const int band = separate ? plane : s;
          out.bands[band](y0 + r, x0 + c) = read_sample(&buf[base + s * bytes], bits, format);
        }
      }
    }
  };

  const int planes = separate ? spp : 1;
  if (TIFFIsTiled(tif)) {
    std::uint32_t tw = 0, th = 0;
    TIFFGetField(tif, TIFFTAG_TILEWIDTH, &tw);
    TIFFGetField(tif, TIFFTAG_TILELENGTH, &th);
    std::vector<unsigned char> buf(TIFFTileSize(tif));
    for (int plane = 0; plane < planes; ++plane) {
      for (std::uint32_t y = 0; y < height; y += th) {
        for (std::uint32_t x = 0; x < width; x += tw) {
          const ttile_t tile = TIFFComputeTile(tif, x, y, 0, static_cast<tsample_t>(plane));
          if (TIFFReadEncodedTile(tif, tile, buf.data(), static_cast<tmsize_t>(buf.size())) < 0)
            throw DataError("failed to decode tile of '" + path.string() + "'");
          scatter(buf, static_cast<int>(x), static_cast<int>(y), static_cast<int>(tw),
                  static_cast<int>(th), plane);
        }
      }
    }
  } else {
    std::uint32_t rows_per_strip = height;
    TIFFGetFieldDefaulted(tif, TIFFTAG_ROWSPERSTRIP, &rows_per_strip);
    rows_per_strip = std::min(rows_per_strip, height);
    const tstrip_t strips_per_plane = (height + rows_per_strip - 1) / rows_per_strip;
    std::vector<unsigned char> buf(TIFFStripSize(tif));
    for (int plane = 0; plane < planes; ++plane) {
      for (tstrip_t s = 0; s < strips_per_plane; ++s) {
        const tstrip_t strip = static_cast<tstrip_t>(plane) * strips_per_plane + s;
        std::fill(buf.begin(), buf.end(), 0);
        if (TIFFReadEncodedStrip(tif, strip, buf.data(), static_cast<tmsize_t>(buf.size())) < 0)
          throw DataError("failed to decode strip of '" + path.string() + "'");
        scatter(buf, 0, static_cast<int>(s * rows_per_strip), w,
                static_cast<int>(rows_per_strip), plane);
      }
    }
  }

  read_geo_metadata(tif, out);
  return out;
}

void write_geotiff(const std::filesystem::path& path, std::span<const Raster> bands,
                   TiffSampleType type, const std::optional<GeoTransform>& geo_transform,
                   const std::optional<std::string>& crs_id,
                   std::span<const std::string> band_descriptions) {
  if (bands.empty()) throw DataError("cannot write a TIFF without bands");
  const int h = bands.front().height();
  const int w = bands.front().width();
  for (const auto& b : bands)
    if (b.height() != h || b.width() != w) throw DataError("bands differ in shape");

  auto handle = open_tiff(path, "w");
  TIFF* tif = handle.get();
  const bool is_float = type == TiffSampleType::float32;
  TIFFSetField(tif, TIFFTAG_IMAGEWIDTH, static_cast<std::uint32_t>(w));
  TIFFSetField(tif, TIFFTAG_IMAGELENGTH, static_cast<std::uint32_t>(h));
  TIFFSetField(tif, TIFFTAG_SAMPLESPERPIXEL, static_cast<std::uint16_t>(bands.size()));
  TIFFSetField(tif, TIFFTAG_BITSPERSAMPLE, static_cast<std::uint16_t>(is_float ? 32 : 8));
  TIFFSetField(tif, TIFFTAG_SAMPLEFORMAT,
               static_cast<std::uint16_t>(is_float ? SAMPLEFORMAT_IEEEFP : SAMPLEFORMAT_UINT));
  TIFFSetField(tif, TIFFTAG_PLANARCONFIG, static_cast<std::uint16_t>(PLANARCONFIG_SEPARATE));
  TIFFSetField(tif, TIFFTAG_PHOTOMETRIC, static_cast<std::uint16_t>(PHOTOMETRIC_MINISBLACK));
  TIFFSetField(tif, TIFFTAG_COMPRESSION, static_cast<std::uint16_t>(COMPRESSION_NONE));
  TIFFSetField(tif, TIFFTAG_ROWSPERSTRIP, TIFFDefaultStripSize(tif, 0));

  if (geo_transform) {
    const auto& c = geo_transform->c;
    if (c[2] == 0.0 && c[4] == 0.0) {
      const double scale[3] = {c[1], -c[5], 0.0};
      const double tie[6] = {0.0, 0.0, 0.0, c[0], c[3], 0.0};
      TIFFSetField(tif, kModelPixelScaleTag, 3u, scale);
      TIFFSetField(tif, kModelTiepointTag, 6u, tie);
    } else {
      const double m[16] = {c[1], c[2], 0, c[0], c[4], c[5], 0, c[3], 0, 0, 0, 0, 0, 0, 0, 1};
      TIFFSetField(tif, kModelTransformationTag, 16u, m);
    }
  }
  if (crs_id && crs_id->rfind("EPSG:", 0) == 0) {
    const auto code = static_cast<std::uint16_t>(std::stoul(crs_id->substr(5)));
    const bool geographic = code == 4326;
    const std::uint16_t keys[] = {1,
                                  1,
                                  0,
                                  3,
                                  kGTModelTypeGeoKey,
                                  0,
                                  1,
                                  static_cast<std::uint16_t>(geographic ? 2 : 1),
                                  kGTRasterTypeGeoKey,
                                  0,
                                  1,
                                  1,
                                  geographic ? kGeographicTypeGeoKey : kProjectedCSTypeGeoKey,
                                  0,
                                  1,
                                  code};
    TIFFSetField(tif, kGeoKeyDirectoryTag, 16u, keys);
  }
  if (!band_descriptions.empty()) {
    std::ostringstream xml;
    xml << "<GDALMetadata>\n";
    for (std::size_t i = 0; i < band_descriptions.size(); ++i)
      xml << "  <Item name=\"DESCRIPTION\" sample=\"" << i << "\" role=\"description\">"
          << band_descriptions[i] << "</Item>\n";
    xml << "</GDALMetadata>\n";
    TIFFSetField(tif, kGdalMetadataTag, xml.str().c_str());
  }

  std::vector<unsigned char> row(static_cast<std::size_t>(w) * (is_float ? 4 : 1));
  for (std::size_t b = 0; b < bands.size(); ++b) {
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        if (is_float) {
          const float v = static_cast<float>(bands[b](r, c));
          std::memcpy(&row[static_cast<std::size_t>(c) * 4], &v, 4);
        } else {
          row[c] = static_cast<unsigned char>(bands[b](r, c));
        }
      }
      if (TIFFWriteScanline(tif, row.data(), static_cast<std::uint32_t>(r),
                            static_cast<tsample_t>(b)) < 0)
        throw DataError("failed to write TIFF '" + path.string() + "'");
    }
  }
}

}  // namespace samselect
