// samselect: search, render and enumerate multiband visualizations.

#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "samselect/error.hpp"
#include "samselect/report.hpp"
#include "samselect/run_config.hpp"

using namespace samselect;

namespace {

struct Flags {
  std::optional<std::string> config, scene, annotations, wavelengths, modes, prompts, prompt_file,
      backend, encoder, encoder_onnx, decoder_onnx, out, csv, viz;
  std::optional<int> patch_size, k, workers, top_k;
  std::optional<std::uint64_t> seed;
  std::optional<double> tau;
  bool negatives = false;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "flat JSON config; flags override it");
  cmd->add_option("--scene", f.scene, "multiband GeoTIFF or flat-binary raster");
  cmd->add_option("--annotations", f.annotations, "GeoJSON polygons or 0/1 mask GeoTIFF");
  cmd->add_option("--wavelengths", f.wavelengths, "JSON map band id -> nm");
  cmd->add_option("--patch-size", f.patch_size, "patch edge in pixels (128)");
}

RunConfig merge(const Flags& f) {
  RunConfig cfg = f.config ? RunConfig::load(*f.config) : RunConfig{};
  if (f.scene) cfg.scene = *f.scene;
  if (f.annotations) cfg.annotations = *f.annotations;
  if (f.wavelengths) cfg.wavelengths = *f.wavelengths;
  if (f.patch_size) cfg.patch_size = *f.patch_size;
  if (f.modes) {
    Json m = *f.modes;
    RunConfig tmp;
    tmp.apply_json(Json{{"modes", m}});
    cfg.modes = tmp.modes;
  }
  if (f.prompts) cfg.prompts = *f.prompts;
  if (f.prompt_file) cfg.prompt_file = *f.prompt_file;
  if (f.negatives) cfg.negatives = true;
  if (f.seed) cfg.seed = *f.seed;
  if (f.backend) cfg.backend = *f.backend;
  if (f.encoder) cfg.encoder = *f.encoder;
  if (f.encoder_onnx) cfg.encoder_onnx = *f.encoder_onnx;
  if (f.decoder_onnx) cfg.decoder_onnx = *f.decoder_onnx;
  if (f.tau) cfg.tau = *f.tau;
  if (f.k) cfg.k = *f.k;
  if (f.workers) cfg.workers = *f.workers;
  if (f.top_k) cfg.top_k = *f.top_k;
  if (f.out) cfg.out = *f.out;
  if (f.csv) cfg.csv = *f.csv;
  return cfg;
}

int cmd_search(const Flags& f) {
  RunConfig cfg = merge(f);
  cfg.validate_search();
  auto scfg = cfg.search_config();
  auto factory = make_backend_factory(cfg);
  auto dataset = load_run_dataset(cfg);
  if (!cfg.stage1_report.empty() &&
      !(scfg.modes.count(VizKind::ndi) && scfg.modes.count(VizKind::ssi)))
    scfg.stage1_pool = load_stage1_pool(cfg.stage1_report, dataset.catalog());
  const auto report = run_search(dataset, factory, scfg);

  const auto out = cfg.out.empty() ? std::filesystem::path("samselect_report.json") : cfg.out;
  write_report_json(report, out, cfg.snapshot());
  if (!cfg.csv.empty()) write_report_csv(report, cfg.csv);
  print_top_table(report, static_cast<std::size_t>(cfg.top_k), std::cout);
  std::cout << "\n" << report.totals.n_visualizations << " visualizations on "
            << report.patch_ids.size() << (report.patch_ids.size() == 1 ? " patch" : " patches")
            << "; report written to " << out.string() << '\n';
  return 0;
}

int cmd_render(const Flags& f) {
  RunConfig cfg = merge(f);
  if (!f.viz) throw ConfigError("--viz is required");
  if (cfg.scene.empty()) throw ConfigError("--scene is required");
  if (!std::filesystem::exists(cfg.scene))
    throw ConfigError("--scene: file '" + cfg.scene.string() + "' does not exist");
  if (cfg.patch_size < 1) throw ConfigError("--patch-size must be >= 1");
  auto scene = load_run_scene(cfg);
  const auto catalog = SpectralCatalog::from(scene.image);

  VizSpec spec;
  try {
    spec = parse_viz_expr(*f.viz, catalog);
  } catch (const ParseError& e) {
    std::cerr << "error: --viz: " << e.what() << "\n  " << *f.viz << "\n  "
              << std::string(e.position(), ' ') << "^\n";
    return 2;
  }

  const auto out = cfg.out.empty() ? std::filesystem::path("render") : cfg.out;
  if (cfg.annotations.empty()) {
    const auto rendered = render(scene.image, spec, "scene");
    const auto path = out.extension() == ".png" ? out : out / "scene.png";
    write_png(rendered, path);
    std::cout << path.string() << '\n';
    return 0;
  }
  if (!std::filesystem::exists(cfg.annotations))
    throw ConfigError("--annotations: file '" + cfg.annotations.string() + "' does not exist");
  const auto ann = load_annotations(cfg.annotations, scene);
  const auto patches = extract_patches(scene, ann, cfg.patch_size);
  for (const auto& p : patches) {
    const auto rendered = render(p.image, spec, p.id);
    const auto path =
        out.extension() == ".png" && patches.size() == 1 ? out : out / (p.id + ".png");
    write_png(rendered, path);
    std::cout << path.string() << '\n';
  }
  return 0;
}

int cmd_enumerate(const Flags& f) {
  RunConfig cfg = merge(f);
  SpectralCatalog catalog;
  if (!cfg.scene.empty()) {
    if (!std::filesystem::exists(cfg.scene))
      throw ConfigError("--scene: file '" + cfg.scene.string() + "' does not exist");
    catalog = SpectralCatalog::from(load_run_scene(cfg).image);
  } else if (!cfg.wavelengths.empty()) {
    auto table = load_wavelengths(cfg);
    if (!cfg.bands.empty()) {
      std::map<std::string, double> subset;
      for (const auto& b : cfg.bands) subset[to_upper(b)] = table.at(b);
      table = WavelengthTable(subset);
    }
    catalog = SpectralCatalog::from(table);
  } else {
    throw ConfigError("enumerate needs --scene or --wavelengths");
  }
  if (catalog.size() < 3) throw ConfigError("enumeration needs at least 3 bands");

  std::size_t total = 0;
  std::vector<std::string> summary;
  const auto modes = cfg.parsed_modes();
  for (auto kind : {VizKind::bc, VizKind::ndi, VizKind::ssi}) {
    if (!modes.count(kind)) continue;
    const auto specs = enumerate_search_space(catalog, kind);
    for (const auto& s : specs) std::cout << format_viz_expr(s) << '\n';
    summary.push_back(std::string(kind_name(kind)) + " " + std::to_string(specs.size()));
    total += specs.size();
  }
  if (modes.count(VizKind::sic)) {
    const std::size_t n = catalog.size();
    const std::size_t pool = std::min<std::size_t>(10, binomial(n, 2)) +
                             std::min<std::size_t>(10, binomial(n, 3));
    const std::size_t count = binomial(pool, 3);
    summary.push_back("SIC " + std::to_string(count) + " (C(" + std::to_string(pool) +
                      ",3) over the stage-1 index pool)");
    total += count;
  }
  for (const auto& line : summary) std::cout << line << '\n';
  std::cout << "total " << total << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Band/index visualization search scored by promptable segmentation IoU"};
  app.require_subcommand(1);
  Flags f;

  auto* search = app.add_subcommand("search", "run the visualization search");
  add_common(search, f);
  search->add_option("--modes", f.modes, "comma list of bc,ndi,ssi,sic,pca");
  search->add_option("--prompts", f.prompts, "manual|centroid|skeleton|kmeans");
  search->add_option("--prompt-file", f.prompt_file, "JSON list of {patch_id,row,col,label}");
  search->add_flag("--negatives", f.negatives, "add background prompts");
  search->add_option("--seed", f.seed, "random seed");
  search->add_option("--backend", f.backend, "mock|onnx");
  search->add_option("--encoder", f.encoder, "vit-b|vit-l|vit-h");
  search->add_option("--encoder-onnx", f.encoder_onnx, "encoder graph (env SAMSELECT_ENCODER)");
  search->add_option("--decoder-onnx", f.decoder_onnx, "decoder graph (env SAMSELECT_DECODER)");
  search->add_option("--tau", f.tau, "mock region-grow tolerance");
  search->add_option("--k", f.k, "k-means clusters");
  search->add_option("--workers", f.workers, "worker threads");
  search->add_option("--top-k", f.top_k, "rows in the printed table");
  search->add_option("--out", f.out, "report JSON path");
  search->add_option("--csv", f.csv, "CSV export path");

  auto* render_cmd = app.add_subcommand("render", "write PNGs of one visualization per patch");
  add_common(render_cmd, f);
  render_cmd->add_option("--viz", f.viz, "expression, e.g. NDI(B2,B8)");
  render_cmd->add_option("--out", f.out, "output directory (or .png for a single image)");

  auto* enumerate = app.add_subcommand("enumerate", "list the search space");
  enumerate->add_option("--config", f.config, "flat JSON config");
  enumerate->add_option("--scene", f.scene, "raster whose bands to enumerate");
  enumerate->add_option("--wavelengths", f.wavelengths, "wavelength table instead of a scene");
  enumerate->add_option("--modes", f.modes, "comma list of bc,ndi,ssi,sic");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (search->parsed()) return cmd_search(f);
    if (render_cmd->parsed()) return cmd_render(f);
    return cmd_enumerate(f);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const BackendError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
