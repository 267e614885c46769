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

// segtext command-line interface: synth, train, detect, eval, ablate, render.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "segtext/error.hpp"
#include "segtext/harness.hpp"
#include "segtext/io.hpp"

using namespace segtext;

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out;
}

int fail(std::string_view code, const std::string& msg) {
  std::fprintf(stderr, "error: code=%.*s msg=\"%s\"\n", static_cast<int>(code.size()), code.data(),
               escape(msg).c_str());
  return 2;
}

void make_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + p.string());
}

struct SynthArgs {
  std::string spec;
  std::string out;
  std::string corpus;
  std::uint64_t corpus_seed = 0;
  int count = -1;
};

void run_synth(const SynthArgs& a) {
  if (!a.spec.empty()) {
    const SceneSpec spec = scene_spec_from_json(read_json(a.spec));
    const SceneRecord r = realize(spec);
    write_scene(a.out, spec, r.truth, r.faulted);
    return;
  }
  CorpusConfig c;
  if (a.corpus == "train")
    c = training_corpus(a.corpus_seed);
  else if (a.corpus == "ablation")
    c = ablation_corpus(a.corpus_seed);
  else
    throw Error(ErrorCode::kInvalidSpec, "synth needs --spec or --corpus train|ablation");
  if (a.count >= 0) c.count = a.count;
  make_dir(a.out);
  for (int i = 0; i < c.count; ++i) {
    const SceneSpec spec = corpus_scene_spec(c, i);
    const SceneRecord r = realize(spec);
    write_scene(fs::path(a.out) / scene_name(i), spec, r.truth, r.faulted);
  }
}

struct TrainArgs {
  std::string scenes;
  int iters = 500;
  std::uint64_t seed = 0;
  double lr = 0.05;
  int weak_rounds = 0;
  std::string out;
  std::string loss_csv;
};

void run_train(const TrainArgs& a) {
  std::vector<SceneRecord> records;
  for (const auto& dir : list_scenes(a.scenes)) {
    SceneFiles f = read_scene(dir);
    SceneRecord r;
    r.name = dir.filename().string();
    r.spec = f.spec;
    r.truth = generate_scene(f.spec);
    r.faulted.maps = std::move(f.maps);
    r.faulted.ggtr = std::move(f.ggtr);
    records.push_back(std::move(r));
  }
  if (records.empty()) throw Error(ErrorCode::kIo, "no scenes under " + a.scenes);
  TrainConfig tc;
  tc.iterations = a.iters;
  tc.learning_rate = a.lr;
  tc.seed = a.seed;
  const TrainingRun run = train_on_records(records, tc, GcnConfig{}, a.weak_rounds);
  write_params(a.out, run.result.params);
  write_text(a.loss_csv.empty() ? a.out + ".loss.csv" : a.loss_csv,
             loss_csv(run.result.trace));
  const ModelQuality q = assess(run.result.params, run.samples);
  std::printf("scenes=%zu iters=%d final_loss=%.6f link_acc=%.4f nontext_recall=%.4f\n",
              records.size(), a.iters,
              run.result.trace.empty() ? 0.0 : run.result.trace.back().total(), q.link_accuracy,
              q.nontext_recall);
}

struct DetectArgs {
  std::string scenes;
  std::string params;
  std::string out;
  bool no_node = false;
  bool no_ggtr = false;
  bool routefind = false;
  std::string tcl_op = "union";
};

void run_detect(const DetectArgs& a) {
  const GcnParams params = read_params(a.params);
  InferConfig cfg;
  cfg.fpns_node = !a.no_node;
  cfg.fpns_ggtr = !a.no_ggtr;
  cfg.shape_approx = !a.routefind;
  cfg.tcl_op = parse_tcl_op(a.tcl_op);
  make_dir(a.out);
  for (const auto& dir : list_scenes(a.scenes)) {
    const SceneFiles f = read_scene(dir);
    const DetectionResult det = detect(f.maps, f.ggtr, params, cfg);
    write_json(fs::path(a.out) / (dir.filename().string() + ".det.json"), detection_to_json(det));
  }
}

struct EvalArgs {
  std::string preds;
  std::string truth;
  double iou = 0.5;
  std::string report;
};

void run_eval(const EvalArgs& a) {
  std::vector<ImageEval> images;
  for (const auto& dir : list_scenes(a.truth)) {
    const std::string name = dir.filename().string();
    const auto truths = truth_polygons(read_json(dir / "truth.json"));
    const fs::path det = fs::path(a.preds) / (name + ".det.json");
    std::vector<Polygon> preds;
    if (fs::exists(det)) preds = detection_polygons(read_json(det));
    ImageEval ev = match_image(preds, truths, a.iou);
    ev.name = name;
    images.push_back(std::move(ev));
  }
  const EvalReport r = summarize(std::move(images), a.iou);
  Json imgs = Json::array();
  for (const auto& im : r.images) {
    Json m = Json::array();
    for (const auto& x : im.matches) m.push_back({x.pred, x.truth, x.iou});
    imgs.push_back(Json{{"scene", im.name}, {"preds", im.preds}, {"truths", im.truths},
                        {"matches", m}});
  }
  const Json doc{{"iou", r.iou_threshold}, {"precision", r.precision}, {"recall", r.recall},
                 {"f", r.f},                {"tp", r.tp},                {"preds", r.preds},
                 {"truths", r.truths},      {"images", imgs}};
  write_json(a.report.empty() ? fs::path(a.preds) / "eval_report.json" : fs::path(a.report), doc);
  std::printf("%-10s %8s %8s %8s %6s %6s %6s\n", "iou", "P", "R", "F", "tp", "preds", "truths");
  std::printf("%-10.2f %8.4f %8.4f %8.4f %6zu %6zu %6zu\n", r.iou_threshold, r.precision,
              r.recall, r.f, r.tp, r.preds, r.truths);
}

struct AblateArgs {
  std::uint64_t corpus_seed = 42;
  int count = 200;
  std::string out;
  std::string params;
  int train_iters = 500;
  bool quiet = false;
};

void run_ablate(const AblateArgs& a) {
  GcnParams params;
  if (!a.params.empty()) {
    params = read_params(a.params);
  } else {
    std::vector<SceneRecord> records;
    const CorpusConfig tc = training_corpus();
    for (int i = 0; i < tc.count; ++i) records.push_back(realize(corpus_scene_spec(tc, i)));
    TrainConfig t;
    t.iterations = a.train_iters;
    params = train_on_records(records, t, GcnConfig{}).result.params;
  }
  const auto specs = corpus_specs(ablation_corpus(a.corpus_seed, a.count));
  const AblationOutcome o = run_ablation(specs, params, table_rows(), width_rows(),
                                         [&](int done, int total) {
                                           if (!a.quiet && done % 20 == 0)
                                             std::fprintf(stderr, "ablate: %d/%d\n", done, total);
                                         });
  write_text(a.out, ablation_csv(o));
  std::printf("%-24s %7s %7s %7s %7s\n", "row", "P", "R", "F", "dF");
  for (const auto* rows : {&o.toggles, &o.widths})
    for (const auto& r : *rows)
      std::printf("%-24s %7.2f %7.2f %7.2f %+7.2f\n", r.name.c_str(), 100 * r.report.precision,
                  100 * r.report.recall, 100 * r.report.f, r.df);
  std::printf("spiral_scenes=%zu routefind_nonsimple=%zu sap_nonsimple=%zu/%zu\n",
              o.spiral_scenes, o.routefind_nonsimple_spiral_scenes, o.sap_nonsimple_polygons,
              o.sap_polygons);
}

struct RenderArgs {
  std::string scene;
  std::string det;
  std::string out;
};

void run_render(const RenderArgs& a) {
  const SceneFiles f = read_scene(a.scene);
  const DetectionResult det = detection_from_json(read_json(a.det));
  write_text(a.out, render_svg(f.maps, truth_polygons(f.truth), det));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"segtext: bottom-up arbitrary-shape text detection on synthetic scenes"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "generate a scene (or a corpus of scenes)");
  synth->add_option("--spec", sa.spec, "scene spec JSON");
  synth->add_option("--corpus", sa.corpus, "built-in corpus: train | ablation");
  synth->add_option("--corpus-seed", sa.corpus_seed, "corpus master seed");
  synth->add_option("--count", sa.count, "number of corpus scenes");
  synth->add_option("--out", sa.out, "output directory")->required();

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "train the GCN on a scene directory");
  train->add_option("--scenes", ta.scenes, "scene directory")->required();
  train->add_option("--iters", ta.iters, "gradient-descent iterations");
  train->add_option("--seed", ta.seed, "initialisation seed");
  train->add_option("--lr", ta.lr, "learning rate");
  train->add_option("--weak-rounds", ta.weak_rounds, "weak-supervision rounds");
  train->add_option("--loss-csv", ta.loss_csv, "loss trace path (default <out>.loss.csv)");
  train->add_option("--out", ta.out, "params file")->required();

  DetectArgs da;
  auto* det = app.add_subcommand("detect", "run detection on scenes");
  det->add_option("--scenes", da.scenes, "scene directory")->required();
  det->add_option("--params", da.params, "params file")->required();
  det->add_flag("--no-fpns-node", da.no_node, "disable node-type suppression");
  det->add_flag("--no-fpns-ggtr", da.no_ggtr, "disable GGTR rectification and filtering");
  det->add_flag("--baseline-routefind", da.routefind, "route-finding contours instead of SAp");
  det->add_option("--tcl-op", da.tcl_op, "union | intersect");
  det->add_option("--out", da.out, "output directory")->required();

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "evaluate detections against truth");
  ev->add_option("--preds", ea.preds, "detection directory")->required();
  ev->add_option("--truth", ea.truth, "scene directory")->required();
  ev->add_option("--iou", ea.iou, "IoU threshold");
  ev->add_option("--report", ea.report, "report path (default <preds>/eval_report.json)");

  AblateArgs aa;
  auto* ab = app.add_subcommand("ablate", "toggle and width ablations on the fault corpus");
  ab->add_option("--corpus-seed", aa.corpus_seed, "corpus master seed");
  ab->add_option("--count", aa.count, "number of scenes");
  ab->add_option("--params", aa.params, "reuse a params file instead of training");
  ab->add_option("--train-iters", aa.train_iters, "iterations when training");
  ab->add_flag("--quiet", aa.quiet, "no progress output");
  ab->add_option("--out", aa.out, "CSV table")->required();

  RenderArgs ra;
  auto* rd = app.add_subcommand("render", "SVG overlay of a detection");
  rd->add_option("--scene", ra.scene, "scene directory")->required();
  rd->add_option("--det", ra.det, "detection JSON")->required();
  rd->add_option("--out", ra.out, "SVG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("Usage", e.what());
  }

  try {
    if (*synth) run_synth(sa);
    if (*train) run_train(ta);
    if (*det) run_detect(da);
    if (*ev) run_eval(ea);
    if (*ab) run_ablate(aa);
    if (*rd) run_render(ra);
  } catch (const Error& e) {
    return fail(error_code_name(e.code()), e.what());
  } catch (const std::exception& e) {
    return fail("Internal", e.what());
  }
  return 0;
}
