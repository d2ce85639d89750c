// Python bindings. Structured values cross the boundary as JSON text; the
// package __init__ turns them into dicts and lists.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "zoomnet/error.hpp"
#include "zoomnet/eval.hpp"
#include "zoomnet/ihtree.hpp"
#include "zoomnet/model.hpp"
#include "zoomnet/pipeline.hpp"
#include "zoomnet/roi.hpp"
#include "zoomnet/synth.hpp"
#include "zoomnet/verify.hpp"

namespace py = pybind11;
using namespace zoomnet;
using json = nlohmann::json;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor<double> to_tensor(const Array& a) {
  if (a.ndim() != 4) throw py::value_error("expected an N x C x H x W array");
  Shape shape;
  for (py::ssize_t i = 0; i < 4; ++i) shape.push_back(static_cast<std::size_t>(a.shape(i)));
  return Tensor<double>(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor<double>& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

const Lexicon& default_lexicon() {
  static const Lexicon lex = Lexicon::load(resource_dir() / "lexicon.tsv", resource_dir() / "exceptions.tsv");
  return lex;
}

const Taxonomy& default_taxonomy() {
  static const Taxonomy tax = Taxonomy::load(resource_dir() / "taxonomy.tsv");
  return tax;
}

std::vector<RelationshipInstance> instances_from(const std::string& text) {
  std::vector<RelationshipInstance> out;
  for (const auto& j : json::parse(text)) out.push_back(instance_from_json(j));
  return out;
}

std::vector<RankedPrediction> predictions_from(const std::string& text) {
  std::vector<RankedPrediction> out;
  for (const auto& j : json::parse(text)) out.push_back(prediction_from_json(j));
  return out;
}

std::string predictions_to(const std::vector<RankedPrediction>& preds) {
  json out = json::array();
  for (const auto& p : preds) out.push_back(to_json(p));
  return out.dump();
}

struct Checkpoint {
  LoadedModel loaded;

  std::string predict(const py::array_t<float, py::array::c_style | py::array::forcecast>& image,
                      const std::vector<std::pair<RoiBox, RoiBox>>& pairs, std::size_t k,
                      const std::string& image_id) const {
    if (image.ndim() != 3 || image.shape(0) != 3) throw py::value_error("expected a 3 x H x W image");
    Shape shape{1, 3, static_cast<std::size_t>(image.shape(1)), static_cast<std::size_t>(image.shape(2))};
    Tensor<float> t(shape, std::vector<float>(image.data(), image.data() + image.size()));
    return predictions_to(zoomnet::predict(loaded.model, image_id, t, pairs, k, loaded.object_tree,
                                           loaded.predicate_tree));
  }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "zoomnet native core";
  m.attr("__version__") = ZOOMNET_VERSION;

  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<LookupError>(m, "LookupError", PyExc_KeyError);

  py::class_<RoiBox>(m, "RoiBox")
      .def(py::init<>())
      .def(py::init([](double x0, double y0, double x1, double y1) { return RoiBox{x0, y0, x1, y1}; }),
           py::arg("x0"), py::arg("y0"), py::arg("x1"), py::arg("y1"))
      .def_readwrite("x0", &RoiBox::x0)
      .def_readwrite("y0", &RoiBox::y0)
      .def_readwrite("x1", &RoiBox::x1)
      .def_readwrite("y1", &RoiBox::y1)
      .def("area", &RoiBox::area)
      .def("valid", &RoiBox::valid)
      .def("__eq__", [](const RoiBox& a, const RoiBox& b) { return a == b; })
      .def("__repr__", [](const RoiBox& b) { return "RoiBox" + to_string(b); });

  m.def("iou", &iou, py::arg("a"), py::arg("b"));
  m.def("union_box", &union_box, py::arg("a"), py::arg("b"));
  m.def("resource_dir", &resource_dir);

  m.def(
      "roi_pool", [](const Array& x, const RoiBox& roi, std::size_t h, std::size_t w) {
        return to_array(roi_pool(to_tensor(x), roi, h, w));
      },
      py::arg("feature"), py::arg("roi"), py::arg("out_h"), py::arg("out_w"));
  m.def(
      "deroi_pool", [](const Array& x, const RoiBox& roi, std::size_t h, std::size_t w) {
        return to_array(deroi_pool(to_tensor(x), roi, h, w));
      },
      py::arg("local"), py::arg("roi"), py::arg("palette_h"), py::arg("palette_w"));

  m.def(
      "normalize_object_label", [](const std::string& label) { return normalize_object_label(label, default_lexicon()); },
      py::arg("label"));
  m.def(
      "normalize_predicate_label",
      [](const std::string& label) {
        auto k = normalize_predicate_label(label, default_lexicon());
        py::dict d;
        d["verb"] = k.verb;
        d["prep"] = k.prep;
        d["adj"] = k.adj;
        d["keyword"] = k.render();
        return d;
      },
      py::arg("label"));
  m.def(
      "lch_similarity",
      [](const std::string& a, const std::string& b, bool normalized) -> std::optional<double> {
        const auto& tax = default_taxonomy();
        auto na = tax.find_lemma(a), nb = tax.find_lemma(b);
        if (!na || !nb) return std::nullopt;
        return lch_similarity(*na, *nb, tax, normalized);
      },
      py::arg("a"), py::arg("b"), py::arg("normalized") = true);
  m.def(
      "_build_trees",
      [](const std::vector<std::string>& objects, const std::vector<std::string>& predicates, double threshold) {
        auto o = build_object_tree(objects, default_lexicon(), default_taxonomy(), threshold);
        auto p = build_predicate_tree(predicates, default_lexicon());
        return std::make_pair(o.to_json().dump(), p.to_json().dump());
      },
      py::arg("objects"), py::arg("predicates"), py::arg("threshold") = kDefaultClusterThreshold);

  m.def(
      "_generate_scene",
      [](std::uint64_t seed, double noise) {
        auto s = generate_scene(seed, SceneCatalog::load(resource_dir() / "catalog.json"), noise, "scene");
        py::array_t<std::uint8_t> img({s.image.height, s.image.width, 3});
        std::copy(s.image.rgb.begin(), s.image.rgb.end(), img.mutable_data());
        json inst = json::array();
        for (const auto& r : s.instances) inst.push_back(to_json(r));
        return std::make_pair(img, inst.dump());
      },
      py::arg("seed"), py::arg("noise") = 0.0);

  m.def(
      "_rec_at_n",
      [](const std::string& preds, const std::string& gold, std::size_t n, const std::string& task, double iou_thresh) {
        auto c = rec_at_n(predictions_from(preds), instances_from(gold), n, parse_recall_task(task), iou_thresh);
        return std::make_pair(c.covered, c.total);
      },
      py::arg("predictions"), py::arg("gold"), py::arg("n"), py::arg("task"), py::arg("iou_thresh") = 0.5);
  m.def(
      "_triplet_nms",
      [](const std::string& preds, double t) { return predictions_to(triplet_nms(predictions_from(preds), t)); },
      py::arg("predictions"), py::arg("iou_thresh") = 0.5);

  m.def(
      "_gradcheck",
      [](const std::vector<std::string>& ops, std::size_t seeds, int bits) {
        GradcheckOptions o;
        o.ops = ops;
        o.seeds = seeds;
        o.bits = bits;
        o.eps = bits == 64 ? 1e-5 : 1e-4;
        json out = json::array();
        for (const auto& r : run_gradcheck(o)) out.push_back(to_json(r));
        return out.dump();
      },
      py::arg("ops") = std::vector<std::string>{}, py::arg("seeds") = 20, py::arg("bits") = 64);

  py::class_<Checkpoint>(m, "Checkpoint")
      .def(py::init([](const std::filesystem::path& p) { return Checkpoint{load_model(p)}; }), py::arg("path"))
      .def_property_readonly("parameter_count", [](const Checkpoint& c) { return c.loaded.model.parameter_count(); })
      .def_property_readonly("config", [](const Checkpoint& c) { return c.loaded.model.config.to_json().dump(); })
      .def("_predict", &Checkpoint::predict, py::arg("image"), py::arg("pairs"), py::arg("k") = 1,
           py::arg("image_id") = "image");
}
