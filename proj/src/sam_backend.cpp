#include "samselect/sam_backend.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "samselect/error.hpp"

namespace samselect {

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (auto d : shape) n *= static_cast<std::size_t>(std::max<std::int64_t>(d, 0));
  return n;
}

std::string_view variant_name(EncoderVariant v) {
  switch (v) {
    case EncoderVariant::vit_b:
      return "vit-b";
    case EncoderVariant::vit_l:
      return "vit-l";
    case EncoderVariant::vit_h:
      return "vit-h";
  }
  return "?";
}

EncoderVariant parse_variant(std::string_view text) {
  for (auto v : {EncoderVariant::vit_b, EncoderVariant::vit_l, EncoderVariant::vit_h})
    if (variant_name(v) == text) return v;
  throw ConfigError("unknown encoder '" + std::string(text) + "' (expected vit-b, vit-l or vit-h)");
}

SamModelMetadata SamModelMetadata::from_json_text(const std::string& text) {
  SamModelMetadata m;
  try {
    const auto doc = nlohmann::json::parse(text);
    m.input_size = doc.at("input_size").get<int>();
    const auto mean = doc.at("pixel_mean").get<std::vector<double>>();
    const auto std_ = doc.at("pixel_std").get<std::vector<double>>();
    if (mean.size() != 3 || std_.size() != 3)
      throw BackendError("pixel_mean and pixel_std need three entries");
    std::copy(mean.begin(), mean.end(), m.pixel_mean.begin());
    std::copy(std_.begin(), std_.end(), m.pixel_std.begin());
    m.embedding_shape = doc.at("embedding_shape").get<std::vector<std::int64_t>>();
    m.variant = doc.value("variant", "");
    m.pixel_scale = doc.value("pixel_scale", 255.0);
    m.pad_point = doc.value("pad_point", true);
    if (doc.contains("io")) {
      const auto& io = doc["io"];
      m.encoder_input = io.value("encoder_input", m.encoder_input);
      m.encoder_output = io.value("encoder_output", m.encoder_output);
      m.decoder_embedding_input = io.value("decoder_embedding_input", m.decoder_embedding_input);
      m.decoder_coords_input = io.value("decoder_coords_input", m.decoder_coords_input);
      m.decoder_labels_input = io.value("decoder_labels_input", m.decoder_labels_input);
      m.decoder_masks_output = io.value("decoder_masks_output", m.decoder_masks_output);
      m.decoder_scores_output = io.value("decoder_scores_output", m.decoder_scores_output);
    }
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(std::string("malformed model metadata: ") + e.what());
  }
  if (m.input_size <= 0) throw BackendError("model metadata input_size must be positive");
  for (double s : m.pixel_std)
    if (!(s > 0.0)) throw BackendError("model metadata pixel_std must be positive");
  return m;
}

SamModelMetadata SamModelMetadata::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw BackendError("model metadata '" + path.string() + "' not found");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return from_json_text(buf.str());
  } catch (const BackendError& e) {
    throw BackendError(path.string() + ": " + e.what());
  }
}

LetterboxGeometry letterbox_geometry(int height, int width, int input_size) {
  if (height <= 0 || width <= 0) throw DataError("cannot letterbox an empty image");
  LetterboxGeometry g;
  g.input_size = input_size;
  g.scale = static_cast<double>(input_size) / std::max(height, width);
  g.resized_height = static_cast<int>(std::floor(height * g.scale + 0.5));
  g.resized_width = static_cast<int>(std::floor(width * g.scale + 0.5));
  return g;
}

std::vector<float> resize_bilinear(std::span<const float> src, int src_h, int src_w, int dst_h,
                                   int dst_w) {
  std::vector<float> out(static_cast<std::size_t>(dst_h) * static_cast<std::size_t>(dst_w));
  const double sy = static_cast<double>(src_h) / dst_h;
  const double sx = static_cast<double>(src_w) / dst_w;
  std::vector<int> x0(dst_w), x1(dst_w);
  std::vector<double> fx(dst_w);
  for (int x = 0; x < dst_w; ++x) {
    const double s = std::max(0.0, (x + 0.5) * sx - 0.5);
    x0[x] = std::min(static_cast<int>(s), src_w - 1);
    x1[x] = std::min(x0[x] + 1, src_w - 1);
    fx[x] = s - x0[x];
  }
  for (int y = 0; y < dst_h; ++y) {
    const double s = std::max(0.0, (y + 0.5) * sy - 0.5);
    const int y0 = std::min(static_cast<int>(s), src_h - 1);
    const int y1 = std::min(y0 + 1, src_h - 1);
    const double fy = s - y0;
    const float* r0 = &src[static_cast<std::size_t>(y0) * src_w];
    const float* r1 = &src[static_cast<std::size_t>(y1) * src_w];
    float* dst = &out[static_cast<std::size_t>(y) * dst_w];
    for (int x = 0; x < dst_w; ++x) {
      const double top = r0[x0[x]] + (r0[x1[x]] - r0[x0[x]]) * fx[x];
      const double bottom = r1[x0[x]] + (r1[x1[x]] - r1[x0[x]]) * fx[x];
      dst[x] = static_cast<float>(top + (bottom - top) * fy);
    }
  }
  return out;
}

Tensor preprocess_image(const RenderedVisualization& rendered, const SamModelMetadata& meta) {
  const int h = rendered.height();
  const int w = rendered.width();
  const auto g = letterbox_geometry(h, w, meta.input_size);
  const int s = meta.input_size;
  Tensor t;
  t.shape = {1, 3, s, s};
  t.data.assign(static_cast<std::size_t>(3) * s * s, 0.0f);
  std::vector<float> plane(static_cast<std::size_t>(h) * w);
  for (int ch = 0; ch < 3; ++ch) {
    const auto src = rendered.rgb[ch].values();
    for (std::size_t i = 0; i < plane.size(); ++i)
      plane[i] = static_cast<float>(src[i] * meta.pixel_scale);
    const auto resized = resize_bilinear(plane, h, w, g.resized_height, g.resized_width);
    float* dst = &t.data[static_cast<std::size_t>(ch) * s * s];
    for (int y = 0; y < g.resized_height; ++y)
      for (int x = 0; x < g.resized_width; ++x)
        dst[static_cast<std::size_t>(y) * s + x] = static_cast<float>(
            (resized[static_cast<std::size_t>(y) * g.resized_width + x] - meta.pixel_mean[ch]) /
            meta.pixel_std[ch]);
  }
  return t;
}

Mask postprocess_mask(std::span<const float> low_res, int low_h, int low_w,
                      const LetterboxGeometry& g, int height, int width) {
  const int s = g.input_size;
  const auto full = resize_bilinear(low_res, low_h, low_w, s, s);
  std::vector<float> cropped(static_cast<std::size_t>(g.resized_height) * g.resized_width);
  for (int y = 0; y < g.resized_height; ++y)
    std::copy_n(&full[static_cast<std::size_t>(y) * s], g.resized_width,
                &cropped[static_cast<std::size_t>(y) * g.resized_width]);
  const auto logits = resize_bilinear(cropped, g.resized_height, g.resized_width, height, width);
  Mask mask(height, width, 0);
  auto dst = mask.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = logits[i] > 0.0f ? 1 : 0;
  return mask;
}

SamSegmenter::SamSegmenter(std::shared_ptr<InferenceSession> encoder,
                           std::shared_ptr<InferenceSession> decoder, SamModelMetadata meta,
                           std::string model_id)
    : encoder_(std::move(encoder)),
      decoder_(std::move(decoder)),
      meta_(std::move(meta)),
      model_id_(std::move(model_id)) {
  if (!encoder_ || !decoder_) throw BackendError("SAM backend needs both encoder and decoder");
}

ImageEmbedding SamSegmenter::embed(const RenderedVisualization& rendered) {
  Tensor input = preprocess_image(rendered, meta_);
  std::vector<Tensor> out;
  try {
    out = encoder_->run({{meta_.encoder_input, std::move(input)}}, {meta_.encoder_output});
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw BackendError(std::string("encoder inference failed: ") + e.what());
  }
  if (out.size() != 1) throw BackendError("encoder returned no embedding");
  if (!meta_.embedding_shape.empty() && out[0].shape != meta_.embedding_shape) {
    std::ostringstream msg;
    msg << "encoder output shape [";
    for (auto d : out[0].shape) msg << d << ' ';
    msg << "] differs from metadata embedding_shape";
    throw BackendError(msg.str());
  }
  if (out[0].data.size() != out[0].element_count())
    throw BackendError("encoder output size does not match its shape");
  ImageEmbedding e;
  e.backend_id = id();
  e.patch_id = rendered.patch_id;
  e.viz_expr = format_viz_expr(rendered.spec);
  e.image_height = rendered.height();
  e.image_width = rendered.width();
  e.shape = std::move(out[0].shape);
  e.payload = std::move(out[0].data);
  return e;
}

CandidateMasks SamSegmenter::decode(const ImageEmbedding& embedding,
                                    std::span<const Prompt> points) {
  const int h = embedding.image_height;
  const int w = embedding.image_width;
  const auto g = letterbox_geometry(h, w, meta_.input_size);
  const double fx = static_cast<double>(g.resized_width) / w;
  const double fy = static_cast<double>(g.resized_height) / h;

  const auto n = static_cast<std::int64_t>(points.size() + (meta_.pad_point ? 1 : 0));
  Tensor coords{{1, n, 2}, {}};
  Tensor labels{{1, n}, {}};
  for (const auto& p : points) {
    coords.data.push_back(static_cast<float>(p.col * fx));
    coords.data.push_back(static_cast<float>(p.row * fy));
    labels.data.push_back(p.label == PromptLabel::foreground ? 1.0f : 0.0f);
  }
  if (meta_.pad_point) {
    coords.data.push_back(0.0f);
    coords.data.push_back(0.0f);
    labels.data.push_back(-1.0f);
  }
  Tensor emb{embedding.shape, embedding.payload};

  std::vector<Tensor> out;
  try {
    out = decoder_->run({{meta_.decoder_embedding_input, std::move(emb)},
                         {meta_.decoder_coords_input, std::move(coords)},
                         {meta_.decoder_labels_input, std::move(labels)}},
                        {meta_.decoder_masks_output, meta_.decoder_scores_output});
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw BackendError(std::string("decoder inference failed: ") + e.what());
  }
  if (out.size() != 2) throw BackendError("decoder must return masks and quality scores");
  const Tensor& masks = out[0];
  const Tensor& scores = out[1];
  if (masks.shape.size() != 4 || masks.data.size() != masks.element_count())
    throw BackendError("decoder masks must have shape [1, C, H, W]");
  const auto candidates = static_cast<std::size_t>(masks.shape[1]);
  const int lh = static_cast<int>(masks.shape[2]);
  const int lw = static_cast<int>(masks.shape[3]);
  if (scores.data.size() != candidates)
    throw BackendError("decoder returned " + std::to_string(scores.data.size()) +
                       " quality scores for " + std::to_string(candidates) + " masks");

  CandidateMasks cand;
  const std::size_t plane = static_cast<std::size_t>(lh) * lw;
  for (std::size_t c = 0; c < candidates; ++c) {
    cand.masks.push_back(postprocess_mask(
        std::span<const float>(masks.data).subspan(c * plane, plane), lh, lw, g, h, w));
    cand.quality.push_back(std::clamp(static_cast<double>(scores.data[c]), 0.0, 1.0));
  }
  return cand;
}

BackendFactory make_onnx_sam_factory(const SamModelPaths& paths, EncoderVariant variant) {
  for (const auto& p : {paths.encoder, paths.decoder})
    if (p.empty() || !std::filesystem::exists(p))
      throw BackendError("model file '" + p.string() + "' not found");
  auto meta_path = paths.metadata;
  if (meta_path.empty()) {
    meta_path = paths.encoder.parent_path() / "metadata.json";
    if (!std::filesystem::exists(meta_path)) {
      auto alt = paths.encoder;
      alt.replace_extension(".json");
      meta_path = alt;
    }
  }
  auto meta = SamModelMetadata::load(meta_path);
  if (!meta.variant.empty() && meta.variant != variant_name(variant))
    throw BackendError("encoder variant mismatch: requested " + std::string(variant_name(variant)) +
                       ", model metadata says " + meta.variant);
  if (!onnx_runtime_available())
    throw BackendError("this build has no ONNX Runtime support; rebuild with "
                       "SAMSELECT_WITH_ONNXRUNTIME=ON or use the Python package");
  const std::string model_id = "sam-" + std::string(variant_name(variant)) + ":" +
                               std::filesystem::absolute(paths.encoder).string();
  return [paths, meta, model_id]() -> std::unique_ptr<SegmenterBackend> {
    return std::make_unique<SamSegmenter>(open_onnx_session(paths.encoder),
                                          open_onnx_session(paths.decoder), meta, model_id);
  };
}

}  // namespace samselect
