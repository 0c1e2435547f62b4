#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>
#include <sstream>

#include "samselect/error.hpp"
#include "samselect/mask_ops.hpp"
#include "samselect/pca.hpp"
#include "samselect/render.hpp"
#include "samselect/report.hpp"
#include "samselect/sam_backend.hpp"
#include "samselect/search.hpp"
#include "samselect/synth.hpp"

namespace py = pybind11;
using namespace samselect;

namespace {

using ImageArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using MaskArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

// (bands, height, width) array plus ids and wavelengths.
MultibandImage to_image(const ImageArray& arr, const std::vector<std::string>& band_ids,
                        const std::vector<double>& wavelengths) {
  if (arr.ndim() != 3) throw DataError("image must have shape (bands, height, width)");
  const auto nb = static_cast<std::size_t>(arr.shape(0));
  const int h = static_cast<int>(arr.shape(1)), w = static_cast<int>(arr.shape(2));
  if (band_ids.size() != nb || wavelengths.size() != nb)
    throw DataError("need one band id and one wavelength per image band");
  MultibandImage img;
  for (const auto& id : band_ids) img.band_ids.push_back(to_upper(id));
  img.wavelengths_nm = wavelengths;
  const double* p = arr.data();
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t b = 0; b < nb; ++b)
    img.bands.emplace_back(h, w, std::vector<double>(p + b * plane, p + (b + 1) * plane));
  img.validate();
  return img;
}

py::array_t<double> image_array(const MultibandImage& img) {
  py::array_t<double> out({static_cast<py::ssize_t>(img.band_count()),
                           static_cast<py::ssize_t>(img.height()),
                           static_cast<py::ssize_t>(img.width())});
  double* dst = out.mutable_data();
  for (const auto& b : img.bands) dst = std::copy(b.values().begin(), b.values().end(), dst);
  return out;
}

Mask to_mask(const MaskArray& arr) {
  if (arr.ndim() != 2) throw DataError("mask must be 2-D");
  const int h = static_cast<int>(arr.shape(0)), w = static_cast<int>(arr.shape(1));
  Mask m(h, w);
  const auto* p = arr.data();
  for (std::size_t i = 0; i < m.size(); ++i) m.values()[i] = p[i] ? 1 : 0;
  return m;
}

py::array_t<bool> mask_array(const Mask& m) {
  py::array_t<bool> out({m.height(), m.width()});
  bool* dst = out.mutable_data();
  for (std::size_t i = 0; i < m.size(); ++i) dst[i] = m.values()[i] != 0;
  return out;
}

WavelengthTable to_table(const std::map<std::string, double>& wavelengths) {
  return WavelengthTable(wavelengths);
}

py::object json_to_py(const Json& doc) {
  return py::module_::import("json").attr("loads")(doc.dump());
}

// Wraps any Python object with onnxruntime.InferenceSession's
// run(output_names, input_feed) signature.
class PyInferenceSession final : public InferenceSession {
 public:
  explicit PyInferenceSession(py::object session) : session_(std::move(session)) {}

  ~PyInferenceSession() override {
    py::gil_scoped_acquire gil;
    session_ = py::object();
  }

  std::vector<Tensor> run(const std::vector<NamedTensor>& inputs,
                          const std::vector<std::string>& output_names) override {
    py::gil_scoped_acquire gil;
    py::dict feed;
    for (const auto& in : inputs) {
      std::vector<py::ssize_t> shape(in.tensor.shape.begin(), in.tensor.shape.end());
      py::array_t<float> a(shape);
      std::copy(in.tensor.data.begin(), in.tensor.data.end(), a.mutable_data());
      feed[py::str(in.name)] = a;
    }
    py::list names;
    for (const auto& n : output_names) names.append(n);
    py::object result;
    try {
      result = session_.attr("run")(names, feed);
    } catch (const py::error_already_set& e) {
      throw BackendError(std::string("python session failed: ") + e.what());
    }
    std::vector<Tensor> out;
    for (auto item : result) {
      FloatArray a = FloatArray::ensure(item);
      if (!a) throw BackendError("session output is not convertible to float32");
      Tensor t;
      for (py::ssize_t d = 0; d < a.ndim(); ++d) t.shape.push_back(a.shape(d));
      t.data.assign(a.data(), a.data() + a.size());
      out.push_back(std::move(t));
    }
    return out;
  }

 private:
  py::object session_;
};

// A backend recipe: one fresh backend per search worker.
struct PyBackend {
  BackendFactory factory;
  std::string description;
};

Dataset make_py_dataset(const ImageArray& image, const std::vector<std::string>& band_ids,
                        const std::vector<double>& wavelengths, const MaskArray& mask,
                        int patch_size, const std::string& site) {
  Scene scene;
  scene.image = to_image(image, band_ids, wavelengths);
  AnnotationSet ann;
  ann.mask = to_mask(mask);
  if (ann.mask.height() != scene.height() || ann.mask.width() != scene.width())
    throw DataError("mask shape differs from the image");
  ann.patch_centers = component_centers(ann.mask);
  Dataset ds;
  ds.site_name = site;
  ds.patches = extract_patches(scene, ann, patch_size);
  return ds;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multiband visualization search scored by promptable segmentation";

  auto base = py::register_exception<Error>(m, "SamselectError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<BackendError>(m, "BackendError", base.ptr());

  py::class_<PyBackend>(m, "Backend")
      .def_readonly("description", &PyBackend::description)
      .def("__repr__", [](const PyBackend& b) { return "<Backend " + b.description + ">"; });

  m.def(
      "mock_backend",
      [](double tau) {
        if (!(tau > 0)) throw ConfigError("tau must be > 0");
        return PyBackend{[tau] { return std::make_unique<MockSegmenter>(tau); },
                         MockSegmenter(tau).id()};
      },
      py::arg("tau") = 0.1);

  m.def(
      "sam_backend",
      [](py::object encoder, py::object decoder, const std::string& metadata_json,
         const std::string& model_id) {
        auto meta = SamModelMetadata::from_json_text(metadata_json);
        auto enc = std::make_shared<PyInferenceSession>(std::move(encoder));
        auto dec = std::make_shared<PyInferenceSession>(std::move(decoder));
        return PyBackend{[enc, dec, meta, model_id]() -> std::unique_ptr<SegmenterBackend> {
                           return std::make_unique<SamSegmenter>(enc, dec, meta, model_id);
                         },
                         model_id};
      },
      py::arg("encoder"), py::arg("decoder"), py::arg("metadata_json"),
      py::arg("model_id") = "sam",
      "Encoder/decoder objects expose run(output_names, input_feed) like "
      "onnxruntime.InferenceSession; calls are serialized on the GIL.");

  m.def("onnx_runtime_available", &onnx_runtime_available);

  m.def(
      "search",
      [](const ImageArray& image, const std::vector<std::string>& band_ids,
         const std::vector<double>& wavelengths, const MaskArray& mask, const PyBackend* backend,
         int patch_size, const std::vector<std::string>& modes, const std::string& prompts,
         int k, std::uint64_t seed, bool negatives, bool joint_decode, int workers,
         std::size_t cache_capacity, const std::string& site) {
        const auto ds = make_py_dataset(image, band_ids, wavelengths, mask, patch_size, site);
        SearchConfig cfg;
        cfg.modes.clear();
        for (const auto& mode : modes) cfg.modes.insert(parse_kind(mode));
        cfg.prompts.selector = parse_selector(prompts);
        if (cfg.prompts.selector == PromptSelector::manual)
          throw ConfigError("manual prompts are not supported from Python");
        cfg.prompts.k = k;
        cfg.prompts.seed = seed;
        cfg.prompts.negatives = negatives;
        cfg.prompts.joint_decode = joint_decode;
        if (workers < 1) throw ConfigError("workers must be >= 1");
        cfg.workers = workers;
        cfg.cache_capacity = cache_capacity;
        const BackendFactory factory =
            backend ? backend->factory
                    : BackendFactory([] { return std::make_unique<MockSegmenter>(0.1); });
        SearchReport report;
        {
          py::gil_scoped_release release;
          report = run_search(ds, factory, cfg);
        }
        return json_to_py(report_to_json(report));
      },
      py::arg("image"), py::arg("band_ids"), py::arg("wavelengths"), py::arg("mask"),
      py::arg("backend") = nullptr, py::arg("patch_size") = 128,
      py::arg("modes") = std::vector<std::string>{"bc", "ndi", "ssi", "sic"},
      py::arg("prompts") = "kmeans", py::arg("k") = 10, py::arg("seed") = 0,
      py::arg("negatives") = false, py::arg("joint_decode") = false, py::arg("workers") = 1,
      py::arg("cache_capacity") = 64, py::arg("site") = "python");

  m.def(
      "render",
      [](const ImageArray& image, const std::vector<std::string>& band_ids,
         const std::vector<double>& wavelengths, const std::string& expr) {
        const auto img = to_image(image, band_ids, wavelengths);
        const auto r = render(img, parse_viz_expr(expr, SpectralCatalog::from(img)));
        py::array_t<double> out({r.height(), r.width(), 3});
        auto v = out.mutable_unchecked<3>();
        for (int y = 0; y < r.height(); ++y)
          for (int x = 0; x < r.width(); ++x)
            for (int c = 0; c < 3; ++c) v(y, x, c) = r.rgb[c](y, x);
        return out;
      },
      py::arg("image"), py::arg("band_ids"), py::arg("wavelengths"), py::arg("expr"));

  m.def(
      "enumerate_space",
      [](const std::map<std::string, double>& wavelengths, const std::string& mode) {
        const auto cat = SpectralCatalog::from(to_table(wavelengths));
        std::vector<std::string> out;
        for (const auto& s : enumerate_search_space(cat, parse_kind(mode)))
          out.push_back(format_viz_expr(s));
        return out;
      },
      py::arg("wavelengths"), py::arg("mode"));

  m.def(
      "canonical",
      [](const std::string& expr, const std::map<std::string, double>& wavelengths) {
        return format_viz_expr(parse_viz_expr(expr, SpectralCatalog::from(to_table(wavelengths))));
      },
      py::arg("expr"), py::arg("wavelengths"));

  m.def("interpolation_factor", &interpolation_factor, py::arg("lambda_minus"),
        py::arg("lambda_c"), py::arg("lambda_plus"));

  m.def(
      "iou", [](const MaskArray& a, const MaskArray& b) { return iou(to_mask(a), to_mask(b)); },
      py::arg("pred"), py::arg("gt"));

  m.def(
      "pca_scores",
      [](const ImageArray& image, const std::vector<std::string>& band_ids,
         const std::vector<double>& wavelengths) {
        const auto img = to_image(image, band_ids, wavelengths);
        const auto model = fit_pca(img);
        MultibandImage scores;
        for (std::size_t k = 0; k < img.band_count(); ++k)
          scores.bands.push_back(project_component(img, model, k));
        return py::make_tuple(image_array(scores), model.eigenvalues);
      },
      py::arg("image"), py::arg("band_ids"), py::arg("wavelengths"));

  m.def(
      "synth_scene",
      [](const std::string& bi, const std::string& bj, std::uint64_t seed, double noise_sigma,
         double contrast, const std::map<std::string, double>& wavelengths, int height, int width,
         const std::vector<std::array<int, 4>>& targets) {
        SynthSpec s;
        s.bi = bi;
        s.bj = bj;
        s.seed = seed;
        s.noise_sigma = noise_sigma;
        s.contrast = contrast;
        if (!wavelengths.empty()) s.wavelengths = to_table(wavelengths);
        s.height = height;
        s.width = width;
        if (!targets.empty()) {
          s.targets.clear();
          for (const auto& t : targets) s.targets.push_back({t[0], t[1], t[2], t[3]});
        }
        const auto synth = generate_scene(s);
        const auto& img = synth.scene.image;
        return py::make_tuple(image_array(img), img.band_ids, img.wavelengths_nm,
                              mask_array(synth.annotations.mask));
      },
      py::arg("bi"), py::arg("bj"), py::arg("seed") = 0, py::arg("noise_sigma") = 0.0,
      py::arg("contrast") = 0.2, py::arg("wavelengths") = std::map<std::string, double>{},
      py::arg("height") = 128, py::arg("width") = 128,
      py::arg("targets") = std::vector<std::array<int, 4>>{});
}
