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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "segtext/error.hpp"
#include "segtext/harness.hpp"
#include "segtext/infer.hpp"
#include "support.hpp"

using namespace segtext;
using segtext::testing::single_instance;
using segtext::testing::union_find_oracle;

namespace {

BitMask bar(int rows, int cols, int r0, int c0, int h, int w) {
  BitMask m(rows, cols);
  for (int r = r0; r < r0 + h; ++r)
    for (int c = c0; c < c0 + w; ++c) m(r, c) = 1;
  return m;
}

ScalarGrid as_grid(const BitMask& m) {
  ScalarGrid g(m.rows(), m.cols());
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) g(r, c) = m(r, c);
  return g;
}

BitMask tcl_mask(const TextMaps& maps) {
  BitMask m(maps.rows(), maps.cols());
  for (int r = 0; r < maps.rows(); ++r)
    for (int c = 0; c < maps.cols(); ++c) m(r, c) = maps.tcl(r, c) > 0.5;
  return m;
}

std::vector<TextSegment> proposals(const SceneTruth& t) {
  return propose_segments(t.maps, ProposalConfig{});
}

const GcnParams& trained() { return segtext::testing::small_trained_params(); }

double best_iou(const Polygon& p, const std::vector<Polygon>& truths) {
  double best = 0.0;
  for (const auto& t : truths) best = std::max(best, polygon_iou(p, t));
  return best;
}

std::vector<Polygon> truth_polygons(const SceneTruth& t) {
  std::vector<Polygon> out;
  for (const auto& i : t.instances) out.push_back(i.polygon);
  return out;
}

SceneRecord fault_scene() {
  SceneSpec s = single_instance(SpineFamily::kLine, 192, 256, 16, 8);
  s.instances[0].params["y0"] = 60.0;
  SpineSpec second = s.instances[0];
  second.params["y0"] = 130.0;
  s.instances.push_back(second);
  s.faults.splits.push_back(SplitFault{0, 8.0, 0.5});
  s.faults.distractors = 2;
  s.faults.ggtr_noise = false;
  s.faults.seed = 3;
  return realize(s);
}

}  // namespace

TEST_CASE("thinning") {
  const BitMask thin = shrink_ggtr(bar(12, 30, 4, 5, 5, 20));
  const Labeling lab = label_components(thin);
  CHECK(lab.count == 1);
  int rows_hit = 0, cols_hit = 0;
  for (int r = 0; r < 12; ++r) {
    int n = 0;
    for (int c = 0; c < 30; ++c) n += thin(r, c);
    rows_hit += n > 0;
  }
  for (int c = 0; c < 30; ++c) {
    int n = 0;
    for (int r = 0; r < 12; ++r) n += thin(r, c);
    CHECK(n <= 1);
    cols_hit += n > 0;
  }
  CHECK(rows_hit <= 2);
  CHECK(cols_hit >= 14);
  CHECK(cols_hit <= 20);
  CHECK(count_set(shrink_ggtr(BitMask(8, 8))) == 0);

  // S-curve band: the skeleton follows the spine.
  SceneSpec s = single_instance(SpineFamily::kSine, 192, 320, 16, 14);
  const SceneTruth t = generate_scene(s);
  const BitMask skel = shrink_ggtr(t.maps.tr);
  CHECK(mask_subset(skel, t.maps.tr));
  CHECK(label_components(skel).count == 1);
  const auto& pts = t.instances[0].spine.samples();
  int near = 0;
  for (const Point& p : pts) {
    const int r = static_cast<int>(std::floor(p.y)), c = static_cast<int>(std::floor(p.x));
    bool hit = false;
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) hit = hit || (skel.in_bounds(r + dr, c + dc) && skel(r + dr, c + dc));
    near += hit;
  }
  CHECK(near >= 0.9 * static_cast<double>(pts.size()));
}

TEST_CASE("binarize and rectify") {
  ScalarGrid g(2, 2);
  g(0, 0) = 0.5;
  g(0, 1) = 0.49;
  g(1, 0) = 1.0;
  const BitMask b = binarize(g);
  CHECK(b(0, 0) == 1);
  CHECK(b(0, 1) == 0);
  CHECK(b(1, 0) == 1);
  CHECK(b(1, 1) == 0);

  const BitMask tcl = bar(20, 40, 9, 3, 2, 10);
  CHECK(rectify_tcl(tcl, ScalarGrid(20, 40)) == tcl);
  const BitMask band = bar(20, 40, 6, 2, 7, 36);
  CHECK(rectify_tcl(BitMask(20, 40), as_grid(band)) == shrink_ggtr(band));
  CHECK(rectify_tcl(tcl, as_grid(band), TclOp::kIntersect) == mask_and(tcl, shrink_ggtr(band)));
  CHECK_THROWS_AS(rectify_tcl(tcl, ScalarGrid(10, 10)), Error);
  CHECK(parse_tcl_op(tcl_op_name(TclOp::kIntersect)) == TclOp::kIntersect);
  CHECK_THROWS_AS(parse_tcl_op("xor"), Error);
}

TEST_CASE("rectification repairs a split centre line") {
  const SceneTruth t = generate_scene(single_instance(SpineFamily::kArc));
  FaultSpec f;
  f.splits.push_back(SplitFault{0, 8.0, 0.5});
  f.ggtr_noise = false;
  const FaultedMaps cut = inject_faults(t, f);
  const BitMask before = tcl_mask(cut.maps);
  CHECK(label_components(before).count == 2);
  CHECK(label_components(rectify_tcl(before, cut.ggtr)).count == 1);
}

TEST_CASE("grouping matches union-find") {
  CHECK(group_segments(3, {}, {}).size() == 3);
  std::vector<LinkPair> chain{{0, 1, 0}, {1, 2, 0}, {2, 3, 0}};
  std::vector<double> sure{0.9, 0.7, 0.5};
  const auto one = group_segments(4, chain, sure);
  REQUIRE(one.size() == 1);
  CHECK(one[0].members == std::vector<int>{0, 1, 2, 3});
  CHECK(one[0].links.size() == 3);
  CHECK_THROWS_AS(group_segments(4, chain, std::vector<double>{0.1}), Error);

  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform() * 30);
    std::vector<LinkPair> pairs;
    std::vector<double> prob;
    std::vector<std::pair<int, int>> edges;
    for (int k = 0; k < 2 * n; ++k) {
      LinkPair p{static_cast<int>(rng.uniform() * n), static_cast<int>(rng.uniform() * n), 0};
      pairs.push_back(p);
      prob.push_back(rng.uniform());
      if (prob.back() >= 0.5) edges.emplace_back(p.pivot, p.neighbor);
    }
    const auto groups = group_segments(n, pairs, prob);
    const std::vector<int> root = union_find_oracle(n, edges);
    std::set<std::vector<int>> want, got;
    for (int v = 0; v < n; ++v) {
      std::vector<int> g;
      for (int u = 0; u < n; ++u)
        if (root[u] == root[v]) g.push_back(u);
      want.insert(g);
    }
    int prev_first = -1;
    for (const auto& g : groups) {
      got.insert(g.members);
      CHECK(g.members.front() > prev_first);
      prev_first = g.members.front();
      for (auto [a, b] : g.links) {
        CHECK(std::binary_search(g.members.begin(), g.members.end(), a));
        CHECK(std::binary_search(g.members.begin(), g.members.end(), b));
      }
    }
    CHECK(got == want);
  }
}

TEST_CASE("shape approximation") {
  CHECK_THROWS_AS(shape_approximate(std::span<const TextSegment>{}, 10, 10), Error);

  // One segment: the contour encloses exactly the rect's pixels.
  Rng rng(4);
  for (int k = 0; k < 20; ++k) {
    TextSegment s;
    const double h = rng.uniform(8, 24);
    s.rect = RotRect::make(rng.uniform(28, 36), rng.uniform(28, 36), h, clip_width(h),
                           rng.uniform(-M_PI / 2, M_PI / 2));
    const Polygon p = shape_approximate(std::span<const TextSegment>(&s, 1), 64, 64);
    CHECK(rasterize(p, 64, 64) == rasterize(std::vector<RotRect>{s.rect}, 64, 64));
  }
  TextSegment one;
  one.rect = RotRect::make(30, 30, 16, 4, 0.0);
  const Polygon p = shape_approximate(std::span<const TextSegment>(&one, 1), 64, 64);
  CHECK(polygon_iou(p, to_polygon(one.rect)) >= 0.9);

  SceneSpec s = single_instance(SpineFamily::kLine, 128, 256, 16, 8);
  const SceneTruth line = generate_scene(s);
  const auto segs = proposals(line);
  CHECK(polygon_iou(shape_approximate(segs, 128, 256), line.instances[0].polygon) >= 0.85);
  const Polygon routed = route_find_baseline(segs);
  CHECK(is_simple(routed));
  CHECK(std::abs(polygon_iou(routed, line.instances[0].polygon) -
                 polygon_iou(shape_approximate(segs, 128, 256), line.instances[0].polygon)) <= 0.05);
  CHECK(polygon_iou(route_find_baseline(std::span<const TextSegment>(&one, 1)), to_polygon(one.rect)) ==
        doctest::Approx(1.0));
  CHECK_THROWS_AS(route_find_baseline(std::span<const TextSegment>{}), Error);
}

TEST_CASE("shape approximation covers its members and stays simple") {
  for (auto family : {SpineFamily::kArc, SpineFamily::kSine, SpineFamily::kSpiral}) {
    const SceneTruth t = generate_scene(single_instance(family, 256, 256, 16, family == SpineFamily::kSpiral ? 16 : 8));
    const auto segs = proposals(t);
    REQUIRE(!segs.empty());
    const Polygon p = shape_approximate(segs, 256, 256);
    CHECK(is_simple(p));
    const BitMask members = morph_close(rasterize(
        [&] {
          std::vector<RotRect> r;
          for (const auto& s : segs) r.push_back(s.rect);
          return r;
        }(),
        256, 256));
    const Labeling lab = label_components(members);
    const BitMask largest = component_mask(lab, largest_component(lab));
    const BitMask poly = rasterize(p, 256, 256);
    const double covered = static_cast<double>(count_set(mask_and(poly, largest)));
    CHECK(covered >= 0.99 * static_cast<double>(count_set(largest)));
  }
}

TEST_CASE("route finding self-intersects on a spiral") {
  const SceneTruth t = generate_scene(single_instance(SpineFamily::kSpiral, 256, 256, 16, 16));
  const auto segs = proposals(t);
  CHECK(segs.size() >= 30);
  CHECK_FALSE(is_simple(route_find_baseline(segs)));
  CHECK(is_simple(shape_approximate(segs, 256, 256)));
  const auto order = route_order(segs);
  CHECK(std::set<int>(order.begin(), order.end()).size() == segs.size());
}

TEST_CASE("instance coverage filter") {
  const BitMask g = bar(40, 40, 10, 10, 20, 20);
  CHECK(ggtr_coverage(to_polygon(RotRect::make(20, 20, 8, 8, 0)), g) == 1.0);
  CHECK(ggtr_coverage(to_polygon(RotRect::make(4, 4, 4, 4, 0)), g) == 0.0);
}

TEST_CASE("detection on a clean single instance") {
  for (auto family : {SpineFamily::kLine, SpineFamily::kArc, SpineFamily::kSine}) {
    const SceneRecord rec = realize(single_instance(family, 256, 256, 16, 7));
    const DetectionResult d = detect(rec.faulted.maps, rec.faulted.ggtr, trained());
    const auto kept = d.kept();
    REQUIRE(kept.size() == 1);
    CHECK(polygon_iou(kept[0], rec.truth.instances[0].polygon) >= 0.8);
    CHECK(is_simple(kept[0]));
  }
}

TEST_CASE("suppression on a fault scene") {
  const SceneRecord rec = fault_scene();
  const auto truths = truth_polygons(rec.truth);

  const DetectionResult on = detect(rec.faulted.maps, rec.faulted.ggtr, trained());
  const auto kept = on.kept();
  CHECK(kept.size() == 2);
  for (const auto& p : kept) {
    CHECK(best_iou(p, truths) >= 0.5);
    CHECK(is_simple(p));
  }
  for (const auto& p : on.polygons) CHECK(is_simple(p.polygon));

  InferConfig off;
  off.fpns_node = false;
  off.fpns_ggtr = false;
  const DetectionResult raw = detect(rec.faulted.maps, rec.faulted.ggtr, trained(), off);
  CHECK(raw.kept().size() >= 3);

  // Node suppression never adds segments to grouping.
  InferConfig ggtr_only = off;
  ggtr_only.fpns_ggtr = true;
  InferConfig both = ggtr_only;
  both.fpns_node = true;
  const auto a = detect(rec.faulted.maps, rec.faulted.ggtr, trained(), ggtr_only);
  const auto b = detect(rec.faulted.maps, rec.faulted.ggtr, trained(), both);
  CHECK(b.segments.size() <= a.segments.size());
  CHECK(b.segments.size() + b.stages.node_removed == b.stages.proposed);
  CHECK(a.stages.node_removed == 0);
}

TEST_CASE("detection is deterministic and honours the GCN toggle") {
  const SceneRecord rec = fault_scene();
  const auto a = detect(rec.faulted.maps, rec.faulted.ggtr, trained());
  const auto b = detect(rec.faulted.maps, rec.faulted.ggtr, trained());
  REQUIRE(a.polygons.size() == b.polygons.size());
  for (std::size_t k = 0; k < a.polygons.size(); ++k) {
    CHECK(a.polygons[k].polygon.vertices.size() == b.polygons[k].polygon.vertices.size());
    CHECK(polygon_iou(a.polygons[k].polygon, b.polygons[k].polygon) == 1.0);
    CHECK(a.polygons[k].kept == b.polygons[k].kept);
  }

  InferConfig by_component;
  by_component.use_gcn = false;
  const auto c = detect(rec.faulted.maps, rec.faulted.ggtr, GcnParams{}, by_component);
  const auto stage = propose_stage(rec.faulted.maps, rec.faulted.ggtr, by_component);
  std::set<int> comps(stage.component.begin(), stage.component.end());
  CHECK(c.groups.size() == comps.size());
  CHECK(c.stages.node_removed == 0);

  const TextMaps blank = empty_maps(64, 64);
  const auto none = detect(blank, ScalarGrid(64, 64), trained());
  CHECK(none.polygons.empty());
  CHECK(none.stages.proposed == 0);
}
