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

// Dense overlapping segment proposal and three-way segment annotation.

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "segtext/grid.hpp"
#include "segtext/random.hpp"
#include "segtext/scene.hpp"

namespace segtext {

enum class SegmentType { kChar = 0, kInterval = 1, kNonText = 2, kUnlabeled = 3 };

std::string_view segment_type_name(SegmentType t);
SegmentType parse_segment_type(std::string_view name);

struct TextSegment {
  RotRect rect;
  double score = 0.0;
  SegmentType type = SegmentType::kUnlabeled;
  int instance = -1;

  Point center() const { return Point{rect.cx, rect.cy}; }
};

struct WidthBand {
  double lo = 2.0;
  double hi = 6.0;
};

// clamp(round(h / 4), lo, hi)
double clip_width(double h, WidthBand band = {});

struct ProposalConfig {
  double tcl_threshold = 0.5;
  double nms_iou = 0.5;
  WidthBand width;
  // Pixels above threshold but without geometry (rectified pixels) borrow it
  // from the nearest pixel that has some, up to this radius.
  int geometry_search_radius = 16;
};

// One candidate per TCL pixel above threshold (optionally restricted to
// `region`), scored by mean TCL over the rect, then NMS.
std::vector<TextSegment> propose_segments(const TextMaps& maps, const ProposalConfig& config,
                                          const BitMask* region = nullptr);

// Gives every set pixel of `pixels` that has no height the H, W and theta of
// the nearest pixel that has one, searching up to `radius` rings.
void borrow_geometry(TextMaps& maps, const BitMask& pixels, int radius);

// Mean of a scalar grid over the pixels covered by a rect; 0 if none.
double mean_over(const ScalarGrid& grid, const RotRect& rect);

struct SegmentLabels {
  std::vector<SegmentType> types;
  std::vector<bool> accepted;
};

struct AnnotationConfig {
  double nontext_fraction = 0.3;
  int min_nontext = 8;
};

struct Annotation {
  // Input segments (with instance ids and types filled in) followed by the
  // synthesised non-text samples.
  std::vector<TextSegment> segments;
  SegmentLabels labels;
  std::size_t proposed = 0;
};

// Pixel containing a point, or nullopt outside the grid.
std::optional<std::pair<int, int>> pixel_of(Point p, int rows, int cols);

// Char: centre inside the char union. Interval: for each char segment, the
// nearest non-char segment (ties to the lower index). Non-char segments whose
// centre lies outside the text region are non-text; extra non-text samples are
// drawn from the text-region complement with geometry borrowed from the char
// and interval segments. Everything else stays unlabeled.
Annotation annotate_segments(std::span<const TextSegment> segments, const SceneTruth& truth,
                             Rng& rng, const AnnotationConfig& config = {});

// The interval pairing rule on its own: for every char segment index, the
// index of its interval partner (lowest index on ties). Exposed for oracle tests.
std::vector<std::size_t> nearest_non_char(std::span<const TextSegment> segments,
                                          const std::vector<bool>& is_char);

// Keeps predicted char/interval labels whose centre lies inside TR and
// predicted non-text labels whose centre lies outside; everything else reverts
// to unlabeled.
SegmentLabels weak_label_filter(std::span<const TextSegment> segments,
                                std::span<const SegmentType> predicted, const BitMask& tr);

}  // namespace segtext
