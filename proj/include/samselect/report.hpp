#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "samselect/render.hpp"
#include "samselect/search.hpp"

namespace samselect {

using Json = nlohmann::ordered_json;

// {config, site, records:[{viz, mean_iou, per_patch:[{patch, iou}], wall_ms}],
//  stage1_top, argmax:{viz, mean_iou}, baselines, runtime, totals}.
// `run_info` entries (paths, backend choice) are merged into "config".
Json report_to_json(const SearchReport& report, const Json& run_info = Json::object());

// Keys whose values depend on timing: wall_ms, total_runtime_ms and the
// runtime profile.
bool is_timing_key(std::string_view key);

// Copy of a report document with all timing values removed.
Json strip_timing(const Json& doc);

void write_report_json(const SearchReport& report, const std::filesystem::path& path,
                       const Json& run_info = Json::object());

// Columns viz,mean_iou,rank (1-based).
void write_report_csv(const SearchReport& report, const std::filesystem::path& path);

// Aligned plain-text table of the best `top_k` records.
void print_top_table(const SearchReport& report, std::size_t top_k, std::ostream& out);

// Stage-2 pool from an earlier report: its stage1_top list, or else the best
// NDI and SSI records.
std::vector<IndexSpec> load_stage1_pool(const std::filesystem::path& path,
                                        const SpectralCatalog& catalog,
                                        std::size_t per_kind = 10);

// round-half-up(255 * v) per channel.
std::uint8_t quantize_unit(double v);

// 8-bit RGB PNG.
void write_png(const RenderedVisualization& rendered, const std::filesystem::path& path);

}  // namespace samselect
