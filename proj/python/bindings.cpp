/*
 * Copyright (C) 2026 The segtext Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "segtext/error.hpp"
#include "segtext/harness.hpp"
#include "segtext/infer.hpp"
#include "segtext/io.hpp"

namespace py = pybind11;
using namespace segtext;

namespace {

// JSON crosses the boundary as text; the Python side parses it with `json`.
py::object to_py(const Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

Json from_py(const py::object& o) {
  return Json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

template <typename T>
py::array_t<T> to_array(const Grid<T>& g) {
  py::array_t<T> out({g.rows(), g.cols()});
  std::copy(g.data().begin(), g.data().end(), out.mutable_data());
  return out;
}

template <typename T>
Grid<T> from_array(const py::handle& h) {
  const auto a = py::array_t<T, py::array::c_style | py::array::forcecast>::ensure(h);
  if (!a) throw Error(ErrorCode::kShapeMismatch, "expected a numeric array");
  if (a.ndim() != 2) throw Error(ErrorCode::kShapeMismatch, "expected a 2-D array");
  Grid<T> g(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), g.data().begin());
  return g;
}

Polygon to_polygon(const std::vector<std::pair<double, double>>& pts) {
  Polygon p;
  for (const auto& [x, y] : pts) p.vertices.push_back({x, y});
  return p;
}

std::vector<std::pair<double, double>> from_polygon(const Polygon& p) {
  std::vector<std::pair<double, double>> out;
  for (const auto& v : p.vertices) out.emplace_back(v.x, v.y);
  return out;
}

RotRect to_rect(const std::tuple<double, double, double, double, double>& t) {
  const auto [cx, cy, h, w, theta] = t;
  return RotRect::make(cx, cy, h, w, theta);
}

CorpusConfig corpus_of(const std::string& kind, std::uint64_t seed, int count) {
  if (kind == "train") return training_corpus(seed, count);
  if (kind == "ablation") return ablation_corpus(seed, count);
  throw Error(ErrorCode::kParse, "corpus must be 'train' or 'ablation'");
}

py::dict scene_dict(const SceneRecord& r) {
  py::dict d;
  d["spec"] = to_py(to_json(r.spec));
  d["tcl"] = to_array(r.faulted.maps.tcl);
  d["h"] = to_array(r.faulted.maps.h);
  d["w"] = to_array(r.faulted.maps.w);
  d["theta"] = to_array(r.faulted.maps.theta);
  d["tr"] = to_array(r.faulted.maps.tr);
  d["ggtr"] = to_array(r.faulted.ggtr);
  py::list truth;
  for (const auto& inst : r.truth.instances) truth.append(from_polygon(inst.polygon));
  d["truth"] = truth;
  return d;
}

TextMaps maps_of(const py::dict& d) {
  TextMaps m;
  m.tcl = from_array<double>(d["tcl"]);
  m.h = from_array<double>(d["h"]);
  m.w = from_array<double>(d["w"]);
  m.theta = from_array<double>(d["theta"]);
  m.tr = from_array<std::uint8_t>(d["tr"]);
  return m;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bottom-up arbitrary-shape text detection on synthetic text maps";

  py::register_exception<Error>(m, "SegtextError");

  m.def("rect_iou",
        [](const std::tuple<double, double, double, double, double>& a,
           const std::tuple<double, double, double, double, double>& b) {
          return rect_iou(to_rect(a), to_rect(b));
        },
        py::arg("a"), py::arg("b"), "IoU of two rotated rectangles (cx, cy, h, w, theta).");
  m.def("polygon_iou",
        [](const std::vector<std::pair<double, double>>& a,
           const std::vector<std::pair<double, double>>& b) {
          return polygon_iou(to_polygon(a), to_polygon(b));
        },
        py::arg("a"), py::arg("b"));
  m.def("is_simple",
        [](const std::vector<std::pair<double, double>>& p) { return is_simple(to_polygon(p)); },
        py::arg("polygon"));

  m.def("scene_spec",
        [](const std::string& kind, std::uint64_t seed, int count, int index) {
          return to_py(to_json(corpus_scene_spec(corpus_of(kind, seed, count), index)));
        },
        py::arg("corpus"), py::arg("seed"), py::arg("count"), py::arg("index"),
        "Scene spec dict for one scene of the training or ablation corpus.");
  m.def("realize",
        [](const py::object& spec) { return scene_dict(realize(scene_spec_from_json(from_py(spec)))); },
        py::arg("spec"), "Render a scene spec into faulted maps, GGTR and truth polygons.");

  py::class_<GcnParams>(m, "Params")
      .def_static("init", [](std::uint64_t seed) { return init_params(GcnConfig{}, seed); },
                  py::arg("seed") = 0)
      .def_static("load", [](const std::string& path) { return read_params(path); })
      .def_static("from_text", &params_from_text)
      .def("save", [](const GcnParams& p, const std::string& path) { write_params(path, p); })
      .def("to_text", [](const GcnParams& p) { return params_to_text(p); });

  m.def("train",
        [](std::uint64_t corpus_seed, int count, int iterations, double lr, std::uint64_t seed) {
          const CorpusConfig corpus = training_corpus(corpus_seed, count);
          std::vector<SceneRecord> records;
          for (int i = 0; i < corpus.count; ++i)
            records.push_back(realize(corpus_scene_spec(corpus, i)));
          TrainingRun run;
          {
            py::gil_scoped_release release;
            run = train_on_records(records, TrainConfig{iterations, lr, seed}, GcnConfig{});
          }
          py::list trace;
          for (const auto& l : run.result.trace) trace.append(py::make_tuple(l.link, l.node));
          return py::make_tuple(run.result.params, trace);
        },
        py::arg("corpus_seed") = 0, py::arg("count") = 50, py::arg("iterations") = 500,
        py::arg("lr") = 0.05, py::arg("seed") = 0,
        "Train on the synthetic corpus; returns (params, [(link, node) loss per step]).");

  m.def("detect",
        [](const py::dict& scene, const GcnParams& params, bool fpns_node, bool fpns_ggtr,
           bool shape_approx, bool use_gcn) {
          InferConfig cfg;
          cfg.fpns_node = fpns_node;
          cfg.fpns_ggtr = fpns_ggtr;
          cfg.shape_approx = shape_approx;
          cfg.use_gcn = use_gcn;
          const TextMaps maps = maps_of(scene);
          const ScalarGrid ggtr = from_array<double>(scene["ggtr"]);
          return to_py(detection_to_json(detect(maps, ggtr, params, cfg)));
        },
        py::arg("scene"), py::arg("params"), py::arg("fpns_node") = true,
        py::arg("fpns_ggtr") = true, py::arg("shape_approx") = true, py::arg("use_gcn") = true,
        "Detect text instances; returns the detection as a dict.");

  m.def("evaluate",
        [](const std::vector<std::vector<std::vector<std::pair<double, double>>>>& preds,
           const std::vector<std::vector<std::vector<std::pair<double, double>>>>& truths,
           double iou) {
          auto convert = [](const auto& images) {
            std::vector<std::vector<Polygon>> out;
            for (const auto& img : images) {
              out.emplace_back();
              for (const auto& p : img) out.back().push_back(to_polygon(p));
            }
            return out;
          };
          const EvalReport r = evaluate(convert(preds), convert(truths), iou);
          py::dict d;
          d["precision"] = r.precision;
          d["recall"] = r.recall;
          d["f"] = r.f;
          d["tp"] = r.tp;
          d["preds"] = r.preds;
          d["truths"] = r.truths;
          return d;
        },
        py::arg("preds"), py::arg("truths"), py::arg("iou") = 0.5,
        "Precision, recall and F over images of predicted and truth polygons.");
}
