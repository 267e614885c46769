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

#pragma once

// Synthetic corpora, polygon-level evaluation, the ablation runner and SVG
// rendering.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "segtext/graph.hpp"
#include "segtext/infer.hpp"
#include "segtext/proposal.hpp"
#include "segtext/scene.hpp"

namespace segtext {

struct CorpusConfig {
  int count = 50;
  std::uint64_t seed = 0;
  int rows = 256;
  int cols = 256;
  int min_instances = 2;
  int max_instances = 3;
  double char_h_lo = 10.0;
  double char_h_hi = 16.0;
  double fault_fraction = 0.0;  // share of scenes with splits and distractors, exact by index
  int min_distractors = 0;      // painted into every scene (training corpora)
  int max_distractors = 0;
  bool ggtr_noise = true;
};

// 50 clean 256x256 scenes with distractor marks, char height 10-22, seed 0.
CorpusConfig training_corpus(std::uint64_t seed = 0, int count = 50);
// 200 512x512 scenes, 40% with injected faults, seed 42.
CorpusConfig ablation_corpus(std::uint64_t seed = 42, int count = 200);

// Scene `index` of a corpus; independent of the other scenes.
SceneSpec corpus_scene_spec(const CorpusConfig& corpus, int index);
std::vector<SceneSpec> corpus_specs(const CorpusConfig& corpus);

struct SceneRecord {
  std::string name;
  SceneSpec spec;
  SceneTruth truth;
  FaultedMaps faulted;
};

SceneRecord realize(const SceneSpec& spec, std::string name = {});
std::string scene_name(int index);

struct SampleConfig {
  ProposalConfig proposal;
  GraphConfig graph;
  AnnotationConfig annotation;
  bool include_self = true;
};

// Proposal on the scene's maps, annotation against its truth, graph sample.
GraphSample training_sample(const SceneTruth& truth, const TextMaps& maps, std::uint64_t seed,
                            const SampleConfig& config = {});

// Predicts types for unlabeled nodes and adopts those the text-region rule
// accepts. Returns the number of labels added.
std::size_t weak_supervision_round(const GcnParams& params, std::span<GraphSample> batch,
                                   std::span<const BitMask> text_regions);

// ---- evaluation -----------------------------------------------------------

struct Match {
  int pred = 0;
  int truth = 0;
  double iou = 0.0;
};

struct ImageEval {
  std::string name;
  std::size_t preds = 0;
  std::size_t truths = 0;
  std::vector<Match> matches;
};

// Greedy one-to-one matching by descending IoU (ties: lower pred, lower truth).
ImageEval match_image(std::span<const Polygon> preds, std::span<const Polygon> truths,
                      double iou_threshold = 0.5);

struct EvalReport {
  double iou_threshold = 0.5;
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
  std::size_t tp = 0;
  std::size_t preds = 0;
  std::size_t truths = 0;
  std::vector<ImageEval> images;
};

EvalReport summarize(std::vector<ImageEval> images, double iou_threshold);
EvalReport evaluate(const std::vector<std::vector<Polygon>>& preds,
                    const std::vector<std::vector<Polygon>>& truths, double iou_threshold = 0.5);

// ---- ablation -------------------------------------------------------------

struct AblationRow {
  std::string name;
  InferConfig config;
  EvalReport report;
  double dp = 0.0;  // deltas vs the baseline row, in points
  double dr = 0.0;
  double df = 0.0;
};

std::vector<AblationRow> table_rows();      // toggle study, baseline first
std::vector<AblationRow> width_rows();      // width sweep, full pipeline

struct AblationOutcome {
  std::vector<AblationRow> toggles;
  std::vector<AblationRow> widths;
  std::size_t spiral_scenes = 0;
  std::size_t routefind_nonsimple_spiral_scenes = 0;
  std::size_t sap_nonsimple_polygons = 0;
  std::size_t sap_polygons = 0;
};

using ProgressFn = std::function<void(int done, int total)>;

AblationOutcome run_ablation(std::span<const SceneSpec> corpus, const GcnParams& params,
                             std::vector<AblationRow> toggles, std::vector<AblationRow> widths,
                             const ProgressFn& progress = {});

std::string ablation_csv(const AblationOutcome& outcome);

// ---- training helpers -----------------------------------------------------

struct TrainingRun {
  TrainResult result;
  std::vector<GraphSample> samples;
  std::size_t weak_labels_added = 0;
};

// Samples from every scene (annotation seeded by the scene seed), training, and
// optional weak-supervision rounds that retrain from the current parameters.
TrainingRun train_on_records(std::span<const SceneRecord> records, const TrainConfig& train,
                             const GcnConfig& config, int weak_rounds = 0,
                             const SampleConfig& sample = {});

// ---- rendering ------------------------------------------------------------

std::string render_svg(const TextMaps& maps, std::span<const Polygon> truth,
                       const DetectionResult& det);

}  // namespace segtext
