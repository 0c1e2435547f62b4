#include "samselect/report.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "samselect/error.hpp"

namespace samselect {

namespace {

Json record_json(const ScoreRecord& r) {
  Json per_patch = Json::array();
  for (const auto& p : r.per_patch) per_patch.push_back({{"patch", p.patch_id}, {"iou", p.iou}});
  return Json{{"viz", r.viz_expr},
              {"mean_iou", r.mean_iou},
              {"per_patch", std::move(per_patch)},
              {"wall_ms", r.wall_time_ms}};
}

Json config_json(const SearchConfig& cfg) {
  Json modes = Json::array();
  for (auto m : cfg.modes) modes.push_back(std::string(kind_name(m)));
  Json pool = Json::array();
  for (const auto& i : cfg.stage1_pool) pool.push_back(format_index_expr(i));
  const auto& p = cfg.prompts;
  return Json{{"modes", std::move(modes)},
              {"prompts", std::string(selector_name(p.selector))},
              {"min_size", p.min_size},
              {"k", p.k},
              {"max_iter", p.max_iter},
              {"seed", p.seed},
              {"negatives", p.negatives},
              {"joint_decode", p.joint_decode},
              {"aggregation", std::string(aggregation_name(cfg.aggregation))},
              {"workers", cfg.workers},
              {"cache_capacity", cfg.cache_capacity},
              {"p_low", cfg.p_low},
              {"p_high", cfg.p_high},
              {"scene_statistics", cfg.scene_statistics},
              {"stage1_per_kind", cfg.stage1_per_kind},
              {"stage1_pool", std::move(pool)}};
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

Json report_to_json(const SearchReport& report, const Json& run_info) {
  Json config = config_json(report.config);
  config["backend"] = report.backend_id;
  for (const auto& [k, v] : run_info.items()) config[k] = v;

  Json records = Json::array();
  for (const auto& r : report.ranked) records.push_back(record_json(r));
  Json baselines = Json::array();
  for (const auto& r : report.baselines) baselines.push_back(record_json(r));
  Json runtime = Json::array();
  for (const auto& m : runtime_profile(report))
    runtime.push_back({{"mode", std::string(kind_name(m.kind))},
                       {"n", m.n_visualizations},
                       {"sec_per_combination", m.sec_per_combination},
                       {"total_minutes", m.total_minutes}});

  Json doc;
  doc["config"] = std::move(config);
  doc["site"] = report.site;
  doc["patches"] = report.patch_ids;
  doc["records"] = std::move(records);
  doc["stage1_top"] = report.stage1_top;
  if (report.ranked.empty())
    doc["argmax"] = nullptr;
  else
    doc["argmax"] = {{"viz", report.best().viz_expr}, {"mean_iou", report.best().mean_iou}};
  doc["baselines"] = std::move(baselines);
  doc["runtime"] = std::move(runtime);
  doc["totals"] = {{"n_visualizations", report.totals.n_visualizations},
                   {"embed_calls", report.totals.embed_calls},
                   {"total_runtime_ms", report.totals.total_runtime_ms}};
  return doc;
}

bool is_timing_key(std::string_view key) {
  return key == "wall_ms" || key == "total_runtime_ms" || key == "runtime";
}

Json strip_timing(const Json& doc) {
  if (doc.is_object()) {
    Json out = Json::object();
    for (const auto& [k, v] : doc.items())
      if (!is_timing_key(k)) out[k] = strip_timing(v);
    return out;
  }
  if (doc.is_array()) {
    Json out = Json::array();
    for (const auto& v : doc) out.push_back(strip_timing(v));
    return out;
  }
  return doc;
}

void write_report_json(const SearchReport& report, const std::filesystem::path& path,
                       const Json& run_info) {
  auto out = open_out(path);
  out << report_to_json(report, run_info).dump(2) << '\n';
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

void write_report_csv(const SearchReport& report, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "viz,mean_iou,rank\n";
  std::size_t rank = 1;
  char buf[64];
  for (const auto& r : report.ranked) {
    std::snprintf(buf, sizeof buf, "%.17g", r.mean_iou);
    // Expressions contain commas.
    out << '"' << r.viz_expr << "\"," << buf << ',' << rank++ << '\n';
  }
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

void print_top_table(const SearchReport& report, std::size_t top_k, std::ostream& out) {
  const std::size_t n = std::min(top_k, report.ranked.size());
  std::size_t width = std::string("visualization").size();
  for (std::size_t i = 0; i < n; ++i) width = std::max(width, report.ranked[i].viz_expr.size());
  for (const auto& b : report.baselines) width = std::max(width, b.viz_expr.size());

  out << std::left << std::setw(6) << "rank" << std::setw(static_cast<int>(width) + 2)
      << "visualization" << "mean IoU\n";
  out << std::string(width + 16, '-') << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = report.ranked[i];
    out << std::left << std::setw(6) << (i + 1) << std::setw(static_cast<int>(width) + 2)
        << r.viz_expr << std::fixed << std::setprecision(1) << 100.0 * r.mean_iou << '\n';
  }
  for (const auto& b : report.baselines)
    out << std::left << std::setw(6) << "-" << std::setw(static_cast<int>(width) + 2) << b.viz_expr
        << std::fixed << std::setprecision(1) << 100.0 * b.mean_iou << '\n';
  out.unsetf(std::ios::floatfield);
}

std::vector<IndexSpec> load_stage1_pool(const std::filesystem::path& path,
                                        const SpectralCatalog& catalog, std::size_t per_kind) {
  std::ifstream in(path);
  if (!in) throw ConfigError("stage-1 report '" + path.string() + "' not found");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("stage-1 report '" + path.string() + "': " + e.what());
  }
  std::vector<IndexSpec> pool;
  if (doc.contains("stage1_top") && !doc["stage1_top"].empty()) {
    for (const auto& v : doc["stage1_top"])
      pool.push_back(parse_index_expr(v.get<std::string>(), catalog));
    return pool;
  }
  std::vector<ScoreRecord> records;
  for (const auto& r : doc.value("records", Json::array())) {
    const auto expr = r.at("viz").get<std::string>();
    const auto spec = parse_viz_expr(expr, catalog);
    const auto kind = kind_of(spec);
    if (kind != VizKind::ndi && kind != VizKind::ssi) continue;
    ScoreRecord rec;
    rec.viz_expr = format_viz_expr(spec);
    rec.kind = kind;
    rec.mean_iou = r.at("mean_iou").get<double>();
    records.push_back(std::move(rec));
  }
  rank_records(records);
  pool = stage1_pool(records, catalog, per_kind);
  if (pool.empty())
    throw ConfigError("stage-1 report '" + path.string() + "' has no NDI or SSI records");
  return pool;
}

std::uint8_t quantize_unit(double v) {
  if (!(v > 0.0)) return 0;
  if (v >= 1.0) return 255;
  return static_cast<std::uint8_t>(std::floor(255.0 * v + 0.5));
}

void write_png(const RenderedVisualization& rendered, const std::filesystem::path& path) {
  const int h = rendered.height();
  const int w = rendered.width();
  if (h <= 0 || w <= 0) throw DataError("cannot write an empty image");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());

  std::FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw DataError("cannot write '" + path.string() + "'");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    std::fclose(fp);
    throw DataError("libpng initialization failed");
  }
  std::vector<png_byte> row(static_cast<std::size_t>(w) * 3);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw DataError("failed writing PNG '" + path.string() + "'");
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c)
      for (int ch = 0; ch < 3; ++ch)
        row[static_cast<std::size_t>(c) * 3 + ch] = quantize_unit(rendered.rgb[ch](r, c));
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace samselect
