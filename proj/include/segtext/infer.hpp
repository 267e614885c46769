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

// End-to-end inference: GGTR rectification, per-component segment proposal,
// node-type suppression, link grouping, shape approximation and instance
// filtering, plus the route-finding contour baseline.

#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "segtext/graph.hpp"
#include "segtext/grid.hpp"
#include "segtext/proposal.hpp"
#include "segtext/scene.hpp"

namespace segtext {

// Zhang-Suen thinning to a one-pixel-wide skeleton.
BitMask shrink_ggtr(const BitMask& ggtr);

BitMask binarize(const ScalarGrid& g, double threshold = 0.5);  // g >= threshold

enum class TclOp { kUnion, kIntersect };

std::string_view tcl_op_name(TclOp op);
TclOp parse_tcl_op(std::string_view name);

// TCL' = TCL op shrink(GGTR >= threshold).
BitMask rectify_tcl(const BitMask& tcl, const ScalarGrid& ggtr, TclOp op = TclOp::kUnion,
                    double threshold = 0.5);

struct InstanceGroup {
  std::vector<int> members;                 // ascending segment indices
  std::vector<std::pair<int, int>> links;   // accepted edges inside the group
};

// Connected components over pairs with prob >= threshold; groups are ordered by
// their smallest member.
std::vector<InstanceGroup> group_segments(int count, std::span<const LinkPair> pairs,
                                          std::span<const double> prob, double threshold = 0.5);

// Member rects rasterised, closed, split into components (largest first) and
// traced. Error(kEmptyGroup) on an empty span.
std::vector<Polygon> shape_approximate_all(std::span<const TextSegment> members, int rows,
                                           int cols);
Polygon shape_approximate(std::span<const TextSegment> members, int rows, int cols);

// Greedy nearest-neighbour visiting order from the segment farthest from the
// centroid; top-side points forward, bottom-side points back.
Polygon route_find_baseline(std::span<const TextSegment> members);
std::vector<int> route_order(std::span<const TextSegment> members);

// Fraction of the polygon's pixels that GGTR (binarised) also covers.
double ggtr_coverage(const Polygon& p, const BitMask& ggtr);

struct InferConfig {
  bool fpns_node = true;
  bool fpns_ggtr = true;
  bool shape_approx = true;  // false: route-finding baseline
  bool use_gcn = true;       // false: group by TCL' component
  TclOp tcl_op = TclOp::kUnion;
  double ggtr_threshold = 0.5;
  double link_threshold = 0.5;
  double keep_coverage = 0.5;
  double min_area = 16.0;
  // Half-width of the TCL profile restored around rectified pixels, as a
  // fraction of the local half-height (the band the TCL maps are drawn with).
  double restored_band = 0.3;
  ProposalConfig proposal;
  GraphConfig graph;
};

// Output of the steps that do not depend on the GCN, reusable across runs
// that share the GGTR toggle, TCL op and proposal config.
struct ProposalStage {
  BitMask tcl_rectified;
  TextMaps maps;  // rectified pixels carry TCL 1 and borrowed geometry
  std::vector<TextSegment> segments;
  std::vector<int> component;  // TCL' component per segment
};

ProposalStage propose_stage(const TextMaps& maps, const ScalarGrid& ggtr,
                            const InferConfig& config);

struct DetectedPolygon {
  int id = 0;
  Polygon polygon;
  bool kept = true;
  double coverage = 1.0;
  int group = 0;
};

struct StageCounts {
  std::size_t proposed = 0;
  std::size_t node_removed = 0;
  std::size_t groups = 0;
  std::size_t ggtr_dropped = 0;
};

struct DetectionResult {
  std::vector<DetectedPolygon> polygons;  // includes GGTR-dropped ones, kept = false
  StageCounts stages;
  std::vector<TextSegment> segments;      // grouped segments, types from the node head
  std::vector<InstanceGroup> groups;
  std::vector<TextSegment> removed;       // suppressed as non-text

  std::vector<Polygon> kept() const;
};

DetectionResult finish_detection(const ProposalStage& stage, const TextMaps& maps,
                                 const ScalarGrid& ggtr, const GcnParams& params,
                                 const InferConfig& config);

DetectionResult detect(const TextMaps& maps, const ScalarGrid& ggtr, const GcnParams& params,
                       const InferConfig& config = {});

}  // namespace segtext
