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

// Synthetic curved-text scenes: ground-truth text maps, instance polygons,
// character boxes and controlled fault injection.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "segtext/grid.hpp"

namespace segtext {

enum class SpineFamily { kLine, kArc, kSine, kSpiral };

std::string_view family_name(SpineFamily f);
SpineFamily parse_family(std::string_view name);

// One text instance laid out along a spine curve. Family parameters:
//   line:   x0 y0 angle
//   arc:    cx cy radius start [dir=+1]
//   sine:   x0 y0 angle amplitude wavelength [phase=0]
//   spiral: cx cy r0 growth start [dir=+1]     (growth: px per radian)
struct SpineSpec {
  SpineFamily family = SpineFamily::kLine;
  std::map<std::string, double> params;
  int chars = 5;
  double char_h = 16.0;
  double char_w = 12.0;
  double char_gap = 2.0;
  double word_gap = 8.0;
  int word_len = 0;  // characters per word, 0 = a single word
};

enum class DistractorShape { kPlus, kTee, kEll, kVee };

// A short two-stroke mark. `height` is the text height the maps report for it.
struct DistractorSpec {
  double cx = 0.0;
  double cy = 0.0;
  double size = 20.0;
  double angle = 0.0;
  DistractorShape shape = DistractorShape::kPlus;
  double height = 0.0;  // 0 = use size
};

struct SplitFault {
  int instance = 0;
  double gap = 8.0;       // px along the spine
  double position = 0.5;  // fraction of spine length at the gap centre
};

struct FaultSpec {
  std::vector<SplitFault> splits;
  int distractors = 0;
  bool ggtr_noise = true;
  double ggtr_noise_sigma = 0.05;
  std::uint64_t seed = 0;

  bool empty() const { return splits.empty() && distractors == 0; }
};

struct SceneSpec {
  int rows = 256;
  int cols = 256;
  std::uint64_t seed = 0;
  std::vector<SpineSpec> instances;
  std::vector<DistractorSpec> distractors;
  FaultSpec faults;
  double shrink = 0.3;
};

// Arc-length parametrised polyline.
class Spine {
 public:
  static constexpr double kStep = 0.25;

  Spine() = default;
  explicit Spine(std::vector<Point> samples);

  double length() const { return samples_.size() < 2 ? 0.0 : kStep * (samples_.size() - 1); }
  const std::vector<Point>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }

  Point point(double s) const;
  // Unit tangent direction angle (not normalised to a half-turn).
  double direction(double s) const;
  double direction_at(std::size_t i) const { return directions_[i]; }

 private:
  std::vector<Point> samples_;
  std::vector<double> directions_;
};

// Samples a spine of the given arc length from a family description.
Spine build_spine(const SpineSpec& spec, double length);

struct TextMaps {
  ScalarGrid tcl;
  ScalarGrid h;
  ScalarGrid w;
  ScalarGrid theta;
  BitMask tr;

  int rows() const { return tcl.rows(); }
  int cols() const { return tcl.cols(); }
  friend bool operator==(const TextMaps&, const TextMaps&) = default;
};

TextMaps empty_maps(int rows, int cols);

struct InstanceTruth {
  int id = 0;
  Polygon polygon;
  Spine spine;           // empty when loaded from disk
  double height = 0.0;   // full instance height, the value written to the H map
};

struct CharBox {
  int id = 0;
  int instance = 0;
  RotRect box;
};

struct SceneTruth {
  TextMaps maps;
  std::vector<InstanceTruth> instances;
  std::vector<CharBox> chars;
  BitMask char_union;
  std::vector<DistractorSpec> distractors;
};

struct FaultedMaps {
  TextMaps maps;
  ScalarGrid ggtr;  // graph-guided text region stand-in: clean TR, optionally noised
};

// Padding added around the character band on both sides and at both ends of
// every instance.
inline constexpr double kInstancePad = 1.0;

SceneTruth generate_scene(const SceneSpec& spec);

// Pixels within factor * (half instance height) of the spine, restricted to the
// instance polygon. Requires a spine.
BitMask shrink_region(const InstanceTruth& inst, double factor, int rows, int cols);

FaultedMaps inject_faults(const SceneTruth& truth, const FaultSpec& faults);

// Rasterized instance masks, one per instance, in instance order.
std::vector<BitMask> instance_masks(const SceneTruth& truth);

// Text-band distance of every pixel to a spine: per pixel the nearest spine
// sample index, or -1 beyond `radius`.
struct SpineProximity {
  Grid<int> nearest;
  ScalarGrid distance;
};
SpineProximity spine_proximity(const Spine& spine, double radius, int rows, int cols);

}  // namespace segtext
