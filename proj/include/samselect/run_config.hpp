#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "samselect/report.hpp"
#include "samselect/sam_backend.hpp"
#include "samselect/search.hpp"

namespace samselect {

// Everything a CLI run needs. Keys of the JSON config file mirror the flag
// names ("patch-size" and "patch_size" both work); flags override the file.
struct RunConfig {
  std::filesystem::path scene;
  std::filesystem::path annotations;
  std::filesystem::path wavelengths;
  std::vector<std::string> bands;  // file band order, config file only
  int patch_size = 128;
  std::vector<std::string> modes{"bc", "ndi", "ssi", "sic"};
  std::string prompts = "kmeans";
  std::filesystem::path prompt_file;
  bool negatives = false;
  std::uint64_t seed = 0;
  std::string backend = "mock";
  std::string encoder = "vit-b";
  std::filesystem::path encoder_onnx;
  std::filesystem::path decoder_onnx;
  std::filesystem::path model_metadata;
  double tau = 0.1;
  int k = 10;
  int workers = 1;
  int top_k = 10;
  std::filesystem::path out;
  std::filesystem::path csv;

  // Config-file-only settings.
  std::string aggregation = "per_patch_mean";
  bool joint_decode = false;
  std::size_t cache_capacity = 64;
  std::filesystem::path stage1_report;
  std::string site;
  int min_size = 10;
  bool scene_statistics = false;

  // Overlays the keys present in a flat JSON object. Relative paths resolve
  // against `base_dir`. Throws ConfigError naming the offending key.
  void apply_json(const Json& doc, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);

  // Range checks and file existence. Throws ConfigError.
  void validate_search() const;

  std::set<VizKind> parsed_modes() const;
  SearchConfig search_config() const;
  Json snapshot() const;
};

WavelengthTable load_wavelengths(const RunConfig& cfg);
Scene load_run_scene(const RunConfig& cfg);
Dataset load_run_dataset(const RunConfig& cfg);

// Mock or ONNX backend. ONNX paths fall back to SAMSELECT_ENCODER and
// SAMSELECT_DECODER.
BackendFactory make_backend_factory(const RunConfig& cfg);

}  // namespace samselect
