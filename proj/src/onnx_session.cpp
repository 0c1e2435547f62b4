#include "samselect/error.hpp"
#include "samselect/sam_backend.hpp"

#ifdef SAMSELECT_HAVE_ONNXRUNTIME
#include <onnxruntime_cxx_api.h>
#endif

namespace samselect {

#ifdef SAMSELECT_HAVE_ONNXRUNTIME

namespace {

Ort::Env& ort_env() {
  static Ort::Env env(ORT_LOGGING_LEVEL_WARNING, "samselect");
  return env;
}

class OrtInferenceSession final : public InferenceSession {
 public:
  explicit OrtInferenceSession(const std::filesystem::path& model)
      : session_(ort_env(), model.c_str(), options()) {}

  std::vector<Tensor> run(const std::vector<NamedTensor>& inputs,
                          const std::vector<std::string>& output_names) override {
    auto memory = Ort::MemoryInfo::CreateCpu(OrtArenaAllocator, OrtMemTypeDefault);
    // ONNX Runtime wants mutable buffers.
    std::vector<Tensor> owned;
    owned.reserve(inputs.size());
    std::vector<Ort::Value> values;
    std::vector<const char*> in_names;
    for (const auto& in : inputs) {
      owned.push_back(in.tensor);
      auto& t = owned.back();
      values.push_back(Ort::Value::CreateTensor<float>(memory, t.data.data(), t.data.size(),
                                                       t.shape.data(), t.shape.size()));
      in_names.push_back(in.name.c_str());
    }
    std::vector<const char*> out_names;
    for (const auto& n : output_names) out_names.push_back(n.c_str());

    auto outputs = session_.Run(Ort::RunOptions{nullptr}, in_names.data(), values.data(),
                                values.size(), out_names.data(), out_names.size());
    std::vector<Tensor> result;
    for (auto& v : outputs) {
      auto info = v.GetTensorTypeAndShapeInfo();
      Tensor t;
      t.shape = info.GetShape();
      const float* p = v.GetTensorData<float>();
      t.data.assign(p, p + info.GetElementCount());
      result.push_back(std::move(t));
    }
    return result;
  }

 private:
  static Ort::SessionOptions options() {
    Ort::SessionOptions opts;
    opts.SetIntraOpNumThreads(1);
    opts.SetGraphOptimizationLevel(GraphOptimizationLevel::ORT_ENABLE_ALL);
    return opts;
  }

  Ort::Session session_;
};

}  // namespace

bool onnx_runtime_available() { return true; }

std::unique_ptr<InferenceSession> open_onnx_session(const std::filesystem::path& model) {
  if (!std::filesystem::exists(model))
    throw BackendError("model file '" + model.string() + "' not found");
  try {
    return std::make_unique<OrtInferenceSession>(model);
  } catch (const Ort::Exception& e) {
    throw BackendError("cannot load model '" + model.string() + "': " + e.what());
  }
}

#else

bool onnx_runtime_available() { return false; }

std::unique_ptr<InferenceSession> open_onnx_session(const std::filesystem::path& model) {
  throw BackendError("cannot load '" + model.string() +
                     "': built without ONNX Runtime (SAMSELECT_WITH_ONNXRUNTIME=OFF)");
}

#endif

}  // namespace samselect
