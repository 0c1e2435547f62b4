#include "samselect/run_config.hpp"

#include <cstdlib>
#include <fstream>

#include "samselect/error.hpp"

namespace samselect {

namespace {

std::string normalize_key(std::string key) {
  for (auto& ch : key)
    if (ch == '_') ch = '-';
  return key;
}

template <typename T>
T get_as(const Json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

std::vector<std::string> string_list(const Json& v, const std::string& key) {
  if (v.is_string()) {
    std::vector<std::string> out;
    std::string item;
    for (char ch : v.get<std::string>() + ",") {
      if (ch == ',') {
        if (!item.empty()) out.push_back(item);
        item.clear();
      } else if (ch != ' ') {
        item += ch;
      }
    }
    return out;
  }
  return get_as<std::vector<std::string>>(v, key);
}

void require_file(const std::filesystem::path& p, const std::string& field) {
  if (p.empty()) throw ConfigError(field + " is required");
  if (!std::filesystem::exists(p))
    throw ConfigError(field + ": file '" + p.string() + "' does not exist");
}

}  // namespace

void RunConfig::apply_json(const Json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("config file must hold a JSON object");
  for (const auto& [raw_key, v] : doc.items()) {
    const auto key = normalize_key(raw_key);
    if (key == "scene") scene = resolve(get_as<std::string>(v, key), base_dir);
    else if (key == "annotations") annotations = resolve(get_as<std::string>(v, key), base_dir);
    else if (key == "wavelengths") wavelengths = resolve(get_as<std::string>(v, key), base_dir);
    else if (key == "bands") bands = string_list(v, key);
    else if (key == "patch-size") patch_size = get_as<int>(v, key);
    else if (key == "modes") modes = string_list(v, key);
    else if (key == "prompts") prompts = get_as<std::string>(v, key);
    else if (key == "prompt-file") prompt_file = resolve(get_as<std::string>(v, key), base_dir);
    else if (key == "negatives") negatives = get_as<bool>(v, key);
    else if (key == "seed") seed = get_as<std::uint64_t>(v, key);
    else if (key == "backend") backend = get_as<std::string>(v, key);
    else if (key == "encoder") encoder = get_as<std::string>(v, key);
    else if (key == "encoder-onnx") encoder_onnx = resolve(get_as<std::string>(v, key), base_dir);
    else if (key == "decoder-onnx") decoder_onnx = resolve(get_as<std::string>(v, key), base_dir);
    else if (key == "model-metadata")
      model_metadata = resolve(get_as<std::string>(v, key), base_dir);
    else if (key == "tau") tau = get_as<double>(v, key);
    else if (key == "k") k = get_as<int>(v, key);
    else if (key == "workers") workers = get_as<int>(v, key);
    else if (key == "top-k") top_k = get_as<int>(v, key);
    else if (key == "out") out = resolve(get_as<std::string>(v, key), base_dir);
    else if (key == "csv") csv = resolve(get_as<std::string>(v, key), base_dir);
    else if (key == "aggregation") aggregation = get_as<std::string>(v, key);
    else if (key == "joint-decode") joint_decode = get_as<bool>(v, key);
    else if (key == "cache-capacity") cache_capacity = get_as<std::size_t>(v, key);
    else if (key == "stage1-report") stage1_report = resolve(get_as<std::string>(v, key), base_dir);
    else if (key == "site") site = get_as<std::string>(v, key);
    else if (key == "min-size") min_size = get_as<int>(v, key);
    else if (key == "scene-statistics") scene_statistics = get_as<bool>(v, key);
    else throw ConfigError("unknown config key '" + raw_key + "'");
  }
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: file '" + path.string() + "' does not exist");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
  RunConfig cfg;
  cfg.apply_json(doc, path.parent_path());
  return cfg;
}

std::set<VizKind> RunConfig::parsed_modes() const {
  std::set<VizKind> out;
  for (const auto& m : modes) out.insert(parse_kind(m));
  if (out.empty()) throw ConfigError("--modes: at least one mode is required");
  return out;
}

void RunConfig::validate_search() const {
  require_file(scene, "--scene");
  require_file(annotations, "--annotations");
  if (!wavelengths.empty()) require_file(wavelengths, "--wavelengths");
  if (patch_size < 1) throw ConfigError("--patch-size must be >= 1");
  if (workers < 1) throw ConfigError("--workers must be >= 1");
  if (top_k < 1) throw ConfigError("--top-k must be >= 1");
  if (k < 1) throw ConfigError("--k must be >= 1");
  if (!(tau > 0.0)) throw ConfigError("--tau must be > 0");
  if (min_size < 0) throw ConfigError("min-size must be >= 0");
  const auto selector = parse_selector(prompts);
  if (selector == PromptSelector::manual) require_file(prompt_file, "--prompt-file");
  parse_aggregation(aggregation);
  parse_variant(encoder);
  if (backend != "mock" && backend != "onnx")
    throw ConfigError("--backend must be mock or onnx, got '" + backend + "'");
  const auto m = parsed_modes();
  if (m.count(VizKind::sic) && !(m.count(VizKind::ndi) && m.count(VizKind::ssi)) &&
      stage1_report.empty())
    throw ConfigError("--modes: sic ranks the top NDI and SSI indices, so it needs ndi and ssi "
                      "in the same run (or a stage1_report in the config file)");
  if (!stage1_report.empty()) require_file(stage1_report, "stage1_report");
}

SearchConfig RunConfig::search_config() const {
  SearchConfig s;
  s.modes = parsed_modes();
  s.prompts.selector = parse_selector(prompts);
  s.prompts.min_size = min_size;
  s.prompts.k = k;
  s.prompts.seed = seed;
  s.prompts.negatives = negatives;
  s.prompts.joint_decode = joint_decode;
  if (s.prompts.selector == PromptSelector::manual) s.prompts.manual = load_manual_prompts(prompt_file);
  s.aggregation = parse_aggregation(aggregation);
  s.workers = workers;
  s.cache_capacity = cache_capacity;
  s.scene_statistics = scene_statistics;
  return s;
}

Json RunConfig::snapshot() const {
  Json j;
  j["scene"] = scene.string();
  j["annotations"] = annotations.string();
  j["wavelengths"] = wavelengths.string();
  j["patch_size"] = patch_size;
  j["prompt_file"] = prompt_file.string();
  j["tau"] = tau;
  j["encoder"] = encoder;
  if (backend == "onnx") {
    j["encoder_onnx"] = encoder_onnx.string();
    j["decoder_onnx"] = decoder_onnx.string();
  }
  j["top_k"] = top_k;
  if (!stage1_report.empty()) j["stage1_report"] = stage1_report.string();
  return j;
}

WavelengthTable load_wavelengths(const RunConfig& cfg) {
  if (cfg.wavelengths.empty()) return {};
  return WavelengthTable::load(cfg.wavelengths);
}

Scene load_run_scene(const RunConfig& cfg) {
  std::vector<std::string> order;
  for (const auto& b : cfg.bands) order.push_back(to_upper(b));
  return load_scene(cfg.scene, order, load_wavelengths(cfg));
}

Dataset load_run_dataset(const RunConfig& cfg) {
  auto scene = load_run_scene(cfg);
  const auto ann = load_annotations(cfg.annotations, scene);
  Dataset ds;
  ds.site_name = cfg.site.empty() ? cfg.scene.stem().string() : cfg.site;
  ds.patches = extract_patches(scene, ann, cfg.patch_size);
  if (cfg.scene_statistics)
    ds.scene_image = std::make_shared<const MultibandImage>(std::move(scene.image));
  return ds;
}

BackendFactory make_backend_factory(const RunConfig& cfg) {
  if (cfg.backend == "mock") {
    const double tau = cfg.tau;
    return [tau]() -> std::unique_ptr<SegmenterBackend> {
      return std::make_unique<MockSegmenter>(tau);
    };
  }
  if (cfg.backend != "onnx")
    throw ConfigError("--backend must be mock or onnx, got '" + cfg.backend + "'");
  SamModelPaths paths{cfg.encoder_onnx, cfg.decoder_onnx, cfg.model_metadata};
  if (paths.encoder.empty())
    if (const char* env = std::getenv("SAMSELECT_ENCODER")) paths.encoder = env;
  if (paths.decoder.empty())
    if (const char* env = std::getenv("SAMSELECT_DECODER")) paths.decoder = env;
  if (paths.encoder.empty())
    throw ConfigError("--encoder-onnx (or SAMSELECT_ENCODER) is required for the onnx backend");
  if (paths.decoder.empty())
    throw ConfigError("--decoder-onnx (or SAMSELECT_DECODER) is required for the onnx backend");
  return make_onnx_sam_factory(paths, parse_variant(cfg.encoder));
}

}  // namespace samselect
