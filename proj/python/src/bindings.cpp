#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "semprobe/coco_eval.hpp"
#include "semprobe/error.hpp"
#include "semprobe/linear_probe.hpp"
#include "semprobe/mask.hpp"
#include "semprobe/matcher.hpp"
#include "semprobe/parallel.hpp"
#include "semprobe/storage.hpp"
#include "semprobe/synthetic.hpp"
#include "semprobe/tsne.hpp"
#include "semprobe/version.hpp"

namespace py = pybind11;
using namespace semprobe;

namespace {

using F32Array = py::array_t<float, py::array::c_style | py::array::forcecast>;
using I64Array = py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>;
using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

template <typename T>
py::array_t<T> to_numpy(const std::vector<T>& values, std::vector<py::ssize_t> shape) {
  py::array_t<T> out(shape);
  std::copy(values.begin(), values.end(), out.mutable_data());
  return out;
}

std::vector<float> flat(const F32Array& a) { return {a.data(), a.data() + a.size()}; }
std::vector<std::int64_t> flat(const I64Array& a) { return {a.data(), a.data() + a.size()}; }

FeatureMatrix matrix_from(const F32Array& x) {
  if (x.ndim() != 2) throw Error(ErrorKind::Shape, "features must be a 2-D array");
  return FeatureMatrix::from_rows(static_cast<std::size_t>(x.shape(0)), static_cast<std::size_t>(x.shape(1)), flat(x));
}

LabelVector labels_from(const I64Array& y, std::int64_t num_classes = 0) {
  const std::vector<std::int64_t> v = flat(y);
  return LabelVector::from_tensor(Tensor::i64({v.size()}, v), num_classes);
}

py::dict rle_dict(const RleMask& rle) {
  py::dict d;
  d["size"] = py::make_tuple(rle.height, rle.width);
  d["counts"] = rle.counts;
  return d;
}

RleMask rle_from(const py::dict& d) {
  const auto size = d["size"].cast<std::vector<std::uint32_t>>();
  if (size.size() != 2) throw Error(ErrorKind::Format, "RLE size must be [height, width]");
  RleMask rle{size[0], size[1], d["counts"].cast<std::vector<std::uint32_t>>()};
  rle.validate();
  return rle;
}

Box box_from(const std::vector<double>& v) {
  if (v.size() != 4) throw Error(ErrorKind::Shape, "box must be [x, y, w, h]");
  return Box{v[0], v[1], v[2], v[3]};
}

ProbeModel model_from(const F32Array& weights, const F32Array& bias) {
  if (weights.ndim() != 2 || bias.ndim() != 1 || bias.shape(0) != weights.shape(0)) {
    throw Error(ErrorKind::Shape, "expected weights [C, D] and bias [C]");
  }
  return ProbeModel{static_cast<std::size_t>(weights.shape(0)), static_cast<std::size_t>(weights.shape(1)),
                    flat(weights), flat(bias)};
}

py::array tensor_to_numpy(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  if (t.dtype() == DType::F32) {
    const auto s = t.f32();
    return to_numpy(std::vector<float>(s.begin(), s.end()), shape);
  }
  const auto s = t.i64();
  return to_numpy(std::vector<std::int64_t>(s.begin(), s.end()), shape);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the semprobe toolkit";
  m.attr("__version__") = kVersion;

  static py::exception<Error> error_type(m, "SemprobeError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const std::string text = std::string(to_string(e.kind())) + ": " + e.what();
      PyErr_SetString(error_type.ptr(), text.c_str());
    }
  });

  m.def("set_num_threads", &set_num_threads, py::arg("n"), "0 restores the hardware default.");

  // Masks
  m.def(
      "rle_encode",
      [](const U8Array& mask) {
        if (mask.ndim() != 2) throw Error(ErrorKind::Shape, "mask must be a 2-D array");
        Bitmask b(static_cast<std::uint32_t>(mask.shape(0)), static_cast<std::uint32_t>(mask.shape(1)));
        for (py::ssize_t i = 0; i < mask.size(); ++i) b.data[static_cast<std::size_t>(i)] = mask.data()[i] != 0;
        return rle_dict(rle_encode(b));
      },
      py::arg("mask"));
  m.def(
      "rle_decode",
      [](const py::dict& rle) {
        const Bitmask b = rle_decode(rle_from(rle));
        return to_numpy(b.data, {b.height, b.width});
      },
      py::arg("rle"));
  m.def(
      "mask_iou", [](const py::dict& a, const py::dict& b, bool crowd) { return mask_iou(rle_from(a), rle_from(b), crowd); },
      py::arg("det"), py::arg("gt"), py::arg("crowd") = false);
  m.def(
      "box_iou",
      [](const std::vector<double>& a, const std::vector<double>& b, bool crowd) {
        return box_iou(box_from(a), box_from(b), crowd);
      },
      py::arg("det"), py::arg("gt"), py::arg("crowd") = false);

  // Matcher primitives
  m.def(
      "grid_points",
      [](std::uint32_t width, std::uint32_t height, std::uint32_t n) {
        const auto pts = match::grid_points(width, height, n);
        std::vector<float> xy;
        for (const auto& p : pts) {
          xy.push_back(p.x);
          xy.push_back(p.y);
        }
        return to_numpy(xy, {static_cast<py::ssize_t>(pts.size()), 2});
      },
      py::arg("width"), py::arg("height"), py::arg("points_per_side") = 32);
  m.def(
      "cosine_similarity", [](const F32Array& a, const F32Array& b) { return match::cosine_similarity(flat(a), flat(b)); },
      py::arg("a"), py::arg("b"));

  // Linear probe
  m.def(
      "softmax",
      [](const F32Array& logits) {
        if (logits.ndim() != 1) throw Error(ErrorKind::Shape, "logits must be 1-D");
        return to_numpy(probe::softmax(flat(logits)), {logits.shape(0)});
      },
      py::arg("logits"));
  m.def(
      "train_probe",
      [](const F32Array& x, const I64Array& y, std::size_t epochs, std::size_t batch_size, double learning_rate,
         double weight_decay, std::uint64_t seed, std::optional<F32Array> val_x, std::optional<I64Array> val_y) {
        const FeatureMatrix features = matrix_from(x);
        const LabelVector labels = labels_from(y);
        std::optional<FeatureMatrix> vf;
        std::optional<LabelVector> vl;
        if (val_x.has_value() != val_y.has_value()) {
          throw Error(ErrorKind::Input, "val_x and val_y must be given together");
        }
        if (val_x) {
          vf = matrix_from(*val_x);
          vl = labels_from(*val_y, labels.num_classes);
        }
        probe::TrainConfig cfg;
        cfg.epochs = epochs;
        cfg.batch_size = batch_size;
        cfg.learning_rate = learning_rate;
        cfg.weight_decay = weight_decay;
        cfg.seed = seed;
        probe::TrainResult result;
        {
          py::gil_scoped_release release;
          std::optional<probe::LabeledFeatures> val;
          if (vf) val.emplace(probe::LabeledFeatures{*vf, *vl});
          result = probe::train(features, labels, val, cfg);
        }
        py::list history;
        for (const auto& e : result.history) {
          py::dict row;
          row["epoch"] = e.epoch;
          row["train_loss"] = e.train_loss;
          row["val_top1"] = e.val_top1;
          history.append(row);
        }
        const auto& model = result.model;
        return py::make_tuple(
            to_numpy(model.weights, {static_cast<py::ssize_t>(model.num_classes), static_cast<py::ssize_t>(model.dim)}),
            to_numpy(model.bias, {static_cast<py::ssize_t>(model.num_classes)}), history);
      },
      py::arg("x"), py::arg("y"), py::arg("epochs") = 10, py::arg("batch_size") = 128, py::arg("learning_rate") = 1e-3,
      py::arg("weight_decay") = 0.0, py::arg("seed") = 0, py::arg("val_x") = py::none(), py::arg("val_y") = py::none(),
      "Returns (weights [C, D], bias [C], history).");
  m.def(
      "topk_accuracy",
      [](const F32Array& weights, const F32Array& bias, const F32Array& x, const I64Array& y, std::size_t k) {
        const ProbeModel model = model_from(weights, bias);
        return probe::topk_accuracy(model, matrix_from(x), labels_from(y, static_cast<std::int64_t>(model.num_classes)), k);
      },
      py::arg("weights"), py::arg("bias"), py::arg("x"), py::arg("y"), py::arg("k") = 1);

  // Evaluation; JSON crosses the boundary as text.
  m.def(
      "evaluate_json",
      [](const std::string& dets_json, const std::string& gt_json, const std::string& iou_type,
         std::size_t max_detections) {
        const auto dets = detections_from_json(nlohmann::json::parse(dets_json));
        const auto gt = annotations_from_json(nlohmann::json::parse(gt_json));
        eval::EvalConfig cfg;
        cfg.iou_type = eval::iou_type_from_string(iou_type);
        cfg.max_detections = max_detections;
        eval::EvalResult r;
        {
          py::gil_scoped_release release;
          r = eval::evaluate(dets, gt, cfg);
        }
        return eval::to_json(r).dump();
      },
      py::arg("dets_json"), py::arg("gt_json"), py::arg("iou_type") = "mask", py::arg("max_detections") = 100);

  // Embedding
  m.def(
      "tsne",
      [](const F32Array& x, double perplexity, std::size_t iterations, std::uint64_t seed) {
        const FeatureMatrix features = matrix_from(x);
        tsne::TsneConfig cfg;
        cfg.perplexity = perplexity;
        cfg.iterations = iterations;
        cfg.seed = seed;
        tsne::Embedding2D emb;
        {
          py::gil_scoped_release release;
          emb = tsne::run(features, cfg);
        }
        return py::make_tuple(to_numpy(emb.points, {static_cast<py::ssize_t>(emb.n), 2}), emb.final_kl,
                              emb.kl_after_exaggeration);
      },
      py::arg("x"), py::arg("perplexity") = 30.0, py::arg("iterations") = 1000, py::arg("seed") = 0,
      "Returns (points [N, 2], final_kl, kl_after_exaggeration).");
  m.def(
      "silhouette",
      [](const F32Array& points, const I64Array& labels) {
        if (points.ndim() != 2) throw Error(ErrorKind::Shape, "points must be a 2-D array");
        return tsne::silhouette(flat(points), static_cast<std::size_t>(points.shape(1)), flat(labels));
      },
      py::arg("points"), py::arg("labels"));

  // Storage and fixtures
  m.def(
      "read_tensor", [](const std::filesystem::path& path) { return tensor_to_numpy(read_tensor(path)); },
      py::arg("path"));
  m.def(
      "write_tensor",
      [](const std::filesystem::path& path, const py::array& array) {
        std::vector<std::uint64_t> shape(array.shape(), array.shape() + array.ndim());
        if (py::isinstance<py::array_t<std::int64_t>>(array)) {
          write_tensor(path, Tensor::i64(shape, flat(array.cast<I64Array>())));
        } else {
          write_tensor(path, Tensor::f32(shape, flat(array.cast<F32Array>())));
        }
      },
      py::arg("path"), py::arg("array"), "int64 arrays are stored as i64, everything else as f32.");
  m.def(
      "gen_blobs",
      [](std::size_t num_classes, std::size_t dim, std::size_t per_class, double separation, std::uint64_t seed) {
        const auto [features, labels] = synth::gen_blobs({num_classes, dim, per_class, separation, seed});
        const auto s = features.features.f32();
        return py::make_tuple(
            to_numpy(std::vector<float>(s.begin(), s.end()),
                     {static_cast<py::ssize_t>(features.rows()), static_cast<py::ssize_t>(features.cols())}),
            to_numpy(labels.labels, {static_cast<py::ssize_t>(labels.labels.size())}));
      },
      py::arg("num_classes") = 10, py::arg("dim") = 64, py::arg("per_class") = 500, py::arg("separation") = 6.0,
      py::arg("seed") = 0);
}
