#include "samselect/prompting.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "samselect/error.hpp"
#include "samselect/mask_ops.hpp"
#include "samselect/rng.hpp"

namespace samselect {

std::string_view selector_name(PromptSelector s) {
  switch (s) {
    case PromptSelector::manual:
      return "manual";
    case PromptSelector::centroid:
      return "centroid";
    case PromptSelector::skeleton:
      return "skeleton";
    case PromptSelector::kmeans:
      return "kmeans";
  }
  return "?";
}

PromptSelector parse_selector(std::string_view text) {
  for (auto s : {PromptSelector::manual, PromptSelector::centroid, PromptSelector::skeleton,
                 PromptSelector::kmeans})
    if (selector_name(s) == text) return s;
  throw ConfigError("unknown prompt selector '" + std::string(text) +
                    "' (expected manual, centroid, skeleton or kmeans)");
}

std::size_t PromptSet::foreground_count() const {
  return static_cast<std::size_t>(std::count_if(points.begin(), points.end(), [](const Prompt& p) {
    return p.label == PromptLabel::foreground;
  }));
}

std::size_t PromptSet::background_count() const { return points.size() - foreground_count(); }

PromptSet prompts_manual(const std::vector<Prompt>& points, const Patch& patch) {
  PromptSet set;
  set.selector = PromptSelector::manual;
  for (const auto& p : points) {
    if (!patch.mask.contains(p.row, p.col))
      throw DataError("prompt (" + std::to_string(p.row) + ", " + std::to_string(p.col) +
                      ") lies outside patch " + patch.id + " (" +
                      std::to_string(patch.mask.height()) + "x" +
                      std::to_string(patch.mask.width()) + ")");
    const bool on_mask = patch.mask(p.row, p.col) != 0;
    if (p.label == PromptLabel::foreground && !on_mask)
      set.diagnostics.push_back("foreground prompt (" + std::to_string(p.row) + ", " +
                                std::to_string(p.col) + ") in " + patch.id +
                                " is off the annotation mask");
    if (p.label == PromptLabel::background && on_mask)
      set.diagnostics.push_back("background prompt (" + std::to_string(p.row) + ", " +
                                std::to_string(p.col) + ") in " + patch.id +
                                " is on the annotation mask");
    set.points.push_back(p);
  }
  if (set.foreground_count() == 0)
    throw DataError("patch " + patch.id + " has no foreground prompt");
  return set;
}

namespace {

PixelCoord snapped_centroid(const std::vector<PixelCoord>& component) {
  const Centroid c = centroid_of(component);
  const PixelCoord rounded{round_half_up(c.row), round_half_up(c.col)};
  if (std::binary_search(component.begin(), component.end(), rounded)) return rounded;
  // Components are sorted in raster order, so strict < keeps the smallest
  // (row, col) among equidistant pixels.
  PixelCoord best = component.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& p : component) {
    const double d = (p.row - c.row) * (p.row - c.row) + (p.col - c.col) * (p.col - c.col);
    if (d < best_d) {
      best_d = d;
      best = p;
    }
  }
  return best;
}

}  // namespace

PromptSet prompts_centroid(const Patch& patch, int min_size) {
  PromptSet set;
  set.selector = PromptSelector::centroid;
  const auto components = connected_components(patch.mask);
  if (components.empty()) throw DataError("patch " + patch.id + " has an empty mask");
  for (const auto& comp : components) {
    if (static_cast<int>(comp.size()) <= min_size) continue;
    const auto p = snapped_centroid(comp);
    set.points.push_back({p.row, p.col, PromptLabel::foreground});
  }
  if (set.points.empty())
    throw DataError("patch " + patch.id + ": no component exceeds " + std::to_string(min_size) +
                    " pixels");
  return set;
}

Mask skeletonize(const Mask& input) {
  Mask img(input.height(), input.width());
  {
    auto src = input.values();
    auto dst = img.values();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] ? 1 : 0;
  }
  auto px = [&](int r, int c) -> int { return img.contains(r, c) ? img(r, c) : 0; };

  std::vector<PixelCoord> removals;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int step = 0; step < 2; ++step) {
      removals.clear();
      for (int r = 0; r < img.height(); ++r) {
        for (int c = 0; c < img.width(); ++c) {
          if (!img(r, c)) continue;
          // P2..P9 clockwise from north.
          const std::array<int, 8> n = {px(r - 1, c),     px(r - 1, c + 1), px(r, c + 1),
                                        px(r + 1, c + 1), px(r + 1, c),     px(r + 1, c - 1),
                                        px(r, c - 1),     px(r - 1, c - 1)};
          int b = 0;
          int a = 0;
          for (int i = 0; i < 8; ++i) {
            b += n[i];
            if (n[i] == 0 && n[(i + 1) % 8] == 1) ++a;
          }
          if (b < 2 || b > 6 || a != 1) continue;
          const int p2 = n[0], p4 = n[2], p6 = n[4], p8 = n[6];
          const bool ok = step == 0 ? (p2 * p4 * p6 == 0 && p4 * p6 * p8 == 0)
                                    : (p2 * p4 * p8 == 0 && p2 * p6 * p8 == 0);
          if (ok) removals.push_back({r, c});
        }
      }
      for (const auto& p : removals) img(p.row, p.col) = 0;
      if (!removals.empty()) changed = true;
    }
  }
  return img;
}

PromptSet prompts_skeleton(const Patch& patch, int min_size, std::uint64_t seed) {
  PromptSet set;
  set.selector = PromptSelector::skeleton;
  set.seed = seed;
  const auto components = connected_components(patch.mask);
  if (components.empty()) throw DataError("patch " + patch.id + " has an empty mask");
  const Mask skeleton = skeletonize(patch.mask);
  Rng rng(stream_seed(seed, patch.id, "skeleton"));
  for (const auto& comp : components) {
    std::vector<PixelCoord> core;
    if (static_cast<int>(comp.size()) > min_size)
      for (const auto& p : comp)
        if (skeleton(p.row, p.col)) core.push_back(p);
    PixelCoord chosen;
    if (core.empty()) {
      chosen = snapped_centroid(comp);
    } else {
      chosen = core[uniform_index(rng, core.size())];
    }
    set.points.push_back({chosen.row, chosen.col, PromptLabel::foreground});
  }
  return set;
}

namespace {

using Feature = std::array<double, 3>;

double dist2(const Feature& a, const Feature& b) {
  const double d0 = a[0] - b[0], d1 = a[1] - b[1], d2 = a[2] - b[2];
  return d0 * d0 + d1 * d1 + d2 * d2;
}

}  // namespace

std::vector<PixelCoord> kmeans_representatives(const Mask& mask,
                                               const RenderedVisualization& rendered,
                                               const KMeansConfig& cfg,
                                               std::string_view stream_key) {
  if (cfg.k < 1) throw ConfigError("k-means needs k >= 1");
  if (rendered.height() != mask.height() || rendered.width() != mask.width())
    throw DataError("rendered visualization and mask differ in shape");

  std::vector<PixelCoord> pixels;
  std::vector<Feature> features;
  for (int r = 0; r < mask.height(); ++r)
    for (int c = 0; c < mask.width(); ++c)
      if (mask(r, c)) {
        pixels.push_back({r, c});
        features.push_back({rendered.rgb[0](r, c), rendered.rgb[1](r, c), rendered.rgb[2](r, c)});
      }
  const std::size_t n = pixels.size();
  const auto k = static_cast<std::size_t>(cfg.k);
  if (n <= k) return pixels;

  Rng rng(stream_seed(cfg.seed, stream_key, "kmeans"));

  // k-means++ seeding.
  std::vector<Feature> centers;
  centers.push_back(features[uniform_index(rng, n)]);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], dist2(features[i], centers.back()));
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total <= 0.0) {
      pick = uniform_index(rng, n);
    } else {
      const double target = uniform01(rng) * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    }
    centers.push_back(features[pick]);
  }

  // Lloyd iterations.
  std::vector<std::size_t> assign(n, k);
  for (int iter = 0; iter < std::max(1, cfg.max_iter); ++iter) {
    bool moved = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = dist2(features[i], centers[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = dist2(features[i], centers[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        moved = true;
      }
    }
    if (!moved) break;
    std::vector<Feature> sums(k, Feature{0.0, 0.0, 0.0});
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      for (int d = 0; d < 3; ++d) sums[assign[i]][d] += features[i][d];
      ++counts[assign[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // Reseed an empty cluster at the point farthest from its center.
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = dist2(features[i], centers[assign[i]]);
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        centers[c] = features[far];
        continue;
      }
      for (int d = 0; d < 3; ++d) centers[c][d] = sums[c][d] / static_cast<double>(counts[c]);
    }
  }

  // Representatives: member nearest its cluster mean.
  std::vector<Feature> means(k, Feature{0.0, 0.0, 0.0});
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (int d = 0; d < 3; ++d) means[assign[i]][d] += features[i][d];
    ++counts[assign[i]];
  }
  std::vector<PixelCoord> reps;
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) continue;
    for (int d = 0; d < 3; ++d) means[c][d] /= static_cast<double>(counts[c]);
    std::size_t best = n;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (assign[i] != c) continue;
      const double d = dist2(features[i], means[c]);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    reps.push_back(pixels[best]);
  }
  std::sort(reps.begin(), reps.end());
  return reps;
}

PromptSet prompts_kmeans(const Patch& patch, const RenderedVisualization& rendered,
                         const KMeansConfig& cfg) {
  if (count_true(patch.mask) == 0) throw DataError("patch " + patch.id + " has an empty mask");
  PromptSet set;
  set.selector = PromptSelector::kmeans;
  set.seed = cfg.seed;
  for (const auto& p : kmeans_representatives(patch.mask, rendered, cfg, patch.id))
    set.points.push_back({p.row, p.col, PromptLabel::foreground});
  return set;
}

PromptSet add_background_prompts(const Patch& patch, const PromptSet& fg,
                                 const RenderedVisualization& rendered, const KMeansConfig& cfg) {
  PromptSet out = fg;
  const Mask background = complement(patch.mask);
  const std::size_t available = count_true(background);
  if (available == 0) {
    out.diagnostics.push_back("patch " + patch.id + " has no background pixels; no background prompts added");
    return out;
  }
  const std::size_t want = std::min<std::size_t>(fg.foreground_count(), 10);
  if (want == 0) return out;

  KMeansConfig bg_cfg = cfg;
  bg_cfg.k = static_cast<int>(want);
  auto reps = kmeans_representatives(background, rendered, bg_cfg, patch.id + "#background");

  if (reps.size() < want && available > reps.size()) {
    std::vector<PixelCoord> unused;
    for (int r = 0; r < background.height(); ++r)
      for (int c = 0; c < background.width(); ++c)
        if (background(r, c) && !std::binary_search(reps.begin(), reps.end(), PixelCoord{r, c}))
          unused.push_back({r, c});
    Rng rng(stream_seed(cfg.seed, patch.id, "background-topup"));
    while (reps.size() < want && !unused.empty()) {
      const auto i = uniform_index(rng, unused.size());
      reps.push_back(unused[i]);
      unused.erase(unused.begin() + static_cast<std::ptrdiff_t>(i));
    }
    std::sort(reps.begin(), reps.end());
  }
  for (const auto& p : reps) out.points.push_back({p.row, p.col, PromptLabel::background});
  return out;
}

std::map<std::string, std::vector<Prompt>> load_manual_prompts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing file '" + path.string() + "'");
  std::map<std::string, std::vector<Prompt>> out;
  try {
    const auto doc = nlohmann::json::parse(in);
    if (!doc.is_array()) throw DataError("prompt file '" + path.string() + "' must be a JSON list");
    for (const auto& item : doc) {
      Prompt p;
      p.row = item.at("row").get<int>();
      p.col = item.at("col").get<int>();
      p.label = PromptLabel::foreground;
      if (item.contains("label")) {
        const auto& l = item["label"];
        if (l.is_string()) {
          const auto s = l.get<std::string>();
          if (s == "background" || s == "-" || s == "negative")
            p.label = PromptLabel::background;
          else if (s != "foreground" && s != "+" && s != "positive")
            throw DataError("unknown prompt label '" + s + "'");
        } else if (l.is_number()) {
          p.label = l.get<int>() == 0 ? PromptLabel::background : PromptLabel::foreground;
        }
      }
      out[item.at("patch_id").get<std::string>()].push_back(p);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed prompt file '" + path.string() + "': " + e.what());
  }
  return out;
}

}  // namespace samselect
