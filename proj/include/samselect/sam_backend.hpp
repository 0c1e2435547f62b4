#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "samselect/segmenter.hpp"

namespace samselect {

struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<float> data;

  std::size_t element_count() const;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// One loaded inference graph. run() returns the requested outputs in order.
class InferenceSession {
 public:
  virtual ~InferenceSession() = default;
  virtual std::vector<Tensor> run(const std::vector<NamedTensor>& inputs,
                                  const std::vector<std::string>& output_names) = 0;
};

enum class EncoderVariant { vit_b, vit_l, vit_h };

std::string_view variant_name(EncoderVariant v);  // "vit-b", ...
EncoderVariant parse_variant(std::string_view text);  // throws ConfigError

// Metadata sidecar written next to the exported graphs:
// {input_size, pixel_mean, pixel_std, embedding_shape} plus optional
// variant, pixel_scale and tensor names.
struct SamModelMetadata {
  int input_size = 1024;
  std::array<double, 3> pixel_mean{0.0, 0.0, 0.0};
  std::array<double, 3> pixel_std{1.0, 1.0, 1.0};
  std::vector<std::int64_t> embedding_shape;
  std::string variant;
  // Rendered values in [0, 1] are multiplied by this before standardization.
  double pixel_scale = 255.0;
  // Append SAM's (0, 0, label -1) padding point to every decode.
  bool pad_point = true;

  std::string encoder_input = "image";
  std::string encoder_output = "image_embeddings";
  std::string decoder_embedding_input = "image_embeddings";
  std::string decoder_coords_input = "point_coords";
  std::string decoder_labels_input = "point_labels";
  std::string decoder_masks_output = "low_res_masks";
  std::string decoder_scores_output = "iou_predictions";

  // Throws BackendError when required keys are missing or malformed.
  static SamModelMetadata load(const std::filesystem::path& path);
  static SamModelMetadata from_json_text(const std::string& text);
};

// Longest side scaled to input_size, rounded half up.
struct LetterboxGeometry {
  int input_size = 1024;
  int resized_height = 0;
  int resized_width = 0;
  double scale = 1.0;
};
LetterboxGeometry letterbox_geometry(int height, int width, int input_size);

// Bilinear resize with half-pixel centers and edge clamping (align_corners
// false), planar single channel.
std::vector<float> resize_bilinear(std::span<const float> src, int src_h, int src_w, int dst_h,
                                   int dst_w);

// [1, 3, S, S] tensor: scaled, resized, standardized, zero-padded bottom/right.
Tensor preprocess_image(const RenderedVisualization& rendered, const SamModelMetadata& meta);

// Low-res logits -> input_size square -> crop to the resized region ->
// original size, thresholded at logit 0.
Mask postprocess_mask(std::span<const float> low_res, int low_h, int low_w,
                      const LetterboxGeometry& geometry, int height, int width);

// Segment-Anything encoder/decoder pair behind the SegmenterBackend
// interface. Sessions may be shared between instances when the underlying
// runtime allows concurrent runs.
class SamSegmenter final : public SegmenterBackend {
 public:
  SamSegmenter(std::shared_ptr<InferenceSession> encoder,
               std::shared_ptr<InferenceSession> decoder, SamModelMetadata meta,
               std::string model_id);

  std::string id() const override { return model_id_; }
  BackendCapabilities capabilities() const override { return {true, true}; }
  ImageEmbedding embed(const RenderedVisualization& rendered) override;
  CandidateMasks decode(const ImageEmbedding& embedding, std::span<const Prompt> points) override;

  const SamModelMetadata& metadata() const noexcept { return meta_; }

 private:
  std::shared_ptr<InferenceSession> encoder_;
  std::shared_ptr<InferenceSession> decoder_;
  SamModelMetadata meta_;
  std::string model_id_;
};

// True when the library was built against the ONNX Runtime C++ API.
bool onnx_runtime_available();

// Single-threaded ONNX Runtime session. Throws BackendError for missing or
// corrupt model files, or when built without ONNX Runtime.
std::unique_ptr<InferenceSession> open_onnx_session(const std::filesystem::path& model);

struct SamModelPaths {
  std::filesystem::path encoder;
  std::filesystem::path decoder;
  std::filesystem::path metadata;  // empty: <encoder dir>/metadata.json
};

// Resolves metadata, checks the variant and returns a factory that opens one
// encoder/decoder session pair per backend instance.
BackendFactory make_onnx_sam_factory(const SamModelPaths& paths, EncoderVariant variant);

}  // namespace samselect
