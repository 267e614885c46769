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

// File formats: TMAP grids, scene/truth/detection JSON, GCNP parameters and
// loss traces.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "segtext/graph.hpp"
#include "segtext/infer.hpp"
#include "segtext/scene.hpp"

namespace segtext {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

// "TMAP <name> <rows> <cols>" followed by one line of values per row.
void write_tmap(const fs::path& path, const std::string& name, const ScalarGrid& g);
void write_tmap(const fs::path& path, const std::string& name, const BitMask& m);
ScalarGrid read_tmap(const fs::path& path, std::string* name = nullptr);
BitMask read_tmap_mask(const fs::path& path);

Json to_json(const SceneSpec& spec);
SceneSpec scene_spec_from_json(const Json& j);

Json truth_to_json(const SceneTruth& truth);
// Instance polygons from a truth document.
std::vector<Polygon> truth_polygons(const Json& j);

Json segments_to_json(std::span<const TextSegment> segs);
std::vector<TextSegment> segments_from_json(const Json& j);

Json detection_to_json(const DetectionResult& det);
DetectionResult detection_from_json(const Json& j);
// Kept polygons of a detection document.
std::vector<Polygon> detection_polygons(const Json& j);

Json read_json(const fs::path& path);
void write_json(const fs::path& path, const Json& j);
void write_text(const fs::path& path, const std::string& text);

// A scene directory: the maps the detector sees (tcl, h, w, theta, tr, ggtr),
// truth.json and spec.json.
struct SceneFiles {
  SceneSpec spec;
  TextMaps maps;
  ScalarGrid ggtr;
  Json truth;
};

void write_scene(const fs::path& dir, const SceneSpec& spec, const SceneTruth& truth,
                 const FaultedMaps& faulted);
SceneFiles read_scene(const fs::path& dir);
// Scene directories under `root` in name order; `root` itself if it is one.
std::vector<fs::path> list_scenes(const fs::path& root);

std::string params_to_text(const GcnParams& p);
GcnParams params_from_text(const std::string& text);
void write_params(const fs::path& path, const GcnParams& p);
GcnParams read_params(const fs::path& path);

std::string loss_csv(std::span<const LossBreakdown> trace);

}  // namespace segtext
