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

#include "segtext/infer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "segtext/error.hpp"

namespace segtext {

BitMask shrink_ggtr(const BitMask& ggtr) {
  BitMask s = ggtr;
  for (auto& v : s.data()) v = v ? 1 : 0;
  const int rows = s.rows();
  const int cols = s.cols();
  auto at = [&](int r, int c) -> int { return s.in_bounds(r, c) ? s(r, c) : 0; };
  std::vector<std::pair<int, int>> doomed;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      doomed.clear();
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
          if (!s(r, c)) continue;
          // p2..p9 clockwise from north.
          const int p[8] = {at(r - 1, c),     at(r - 1, c + 1), at(r, c + 1), at(r + 1, c + 1),
                            at(r + 1, c),     at(r + 1, c - 1), at(r, c - 1), at(r - 1, c - 1)};
          const int b = std::accumulate(p, p + 8, 0);
          if (b < 2 || b > 6) continue;
          int a = 0;
          for (int k = 0; k < 8; ++k) a += p[k] == 0 && p[(k + 1) % 8] == 1;
          if (a != 1) continue;
          if (pass == 0) {
            if (p[0] * p[2] * p[4] != 0 || p[2] * p[4] * p[6] != 0) continue;
          } else {
            if (p[0] * p[2] * p[6] != 0 || p[0] * p[4] * p[6] != 0) continue;
          }
          doomed.emplace_back(r, c);
        }
      }
      for (auto [r, c] : doomed) s(r, c) = 0;
      changed = changed || !doomed.empty();
    }
  }
  return s;
}

BitMask binarize(const ScalarGrid& g, double threshold) {
  BitMask m(g.rows(), g.cols());
  for (int r = 0; r < g.rows(); ++r)
    for (int c = 0; c < g.cols(); ++c) m(r, c) = g(r, c) >= threshold ? 1 : 0;
  return m;
}

std::string_view tcl_op_name(TclOp op) { return op == TclOp::kUnion ? "union" : "intersect"; }

TclOp parse_tcl_op(std::string_view name) {
  if (name == "union") return TclOp::kUnion;
  if (name == "intersect") return TclOp::kIntersect;
  throw Error(ErrorCode::kParse, "unknown TCL op: " + std::string(name));
}

BitMask rectify_tcl(const BitMask& tcl, const ScalarGrid& ggtr, TclOp op, double threshold) {
  if (tcl.rows() != ggtr.rows() || tcl.cols() != ggtr.cols())
    throw Error(ErrorCode::kShapeMismatch, "TCL and GGTR sizes differ");
  const BitMask skel = shrink_ggtr(binarize(ggtr, threshold));
  return op == TclOp::kUnion ? mask_or(tcl, skel) : mask_and(tcl, skel);
}

std::vector<InstanceGroup> group_segments(int count, std::span<const LinkPair> pairs,
                                          std::span<const double> prob, double threshold) {
  if (pairs.size() != prob.size())
    throw Error(ErrorCode::kShapeMismatch, "pairs and probabilities differ in length");
  std::vector<int> parent(count);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (!(prob[k] >= threshold)) continue;
    const int a = find(pairs[k].pivot);
    const int b = find(pairs[k].neighbor);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::vector<int> slot(count, -1);
  std::vector<InstanceGroup> groups;
  for (int v = 0; v < count; ++v) {
    const int root = find(v);
    if (slot[root] < 0) {
      slot[root] = static_cast<int>(groups.size());
      groups.emplace_back();
    }
    groups[slot[root]].members.push_back(v);
  }
  for (std::size_t k = 0; k < pairs.size(); ++k)
    if (prob[k] >= threshold)
      groups[slot[find(pairs[k].pivot)]].links.emplace_back(pairs[k].pivot, pairs[k].neighbor);
  return groups;
}

std::vector<Polygon> shape_approximate_all(std::span<const TextSegment> members, int rows,
                                           int cols) {
  if (members.empty()) throw Error(ErrorCode::kEmptyGroup, "shape approximation of empty group");
  double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
  for (const auto& m : members)
    for (const Point& p : corners(m.rect)) {
      x0 = std::min(x0, p.x);
      y0 = std::min(y0, p.y);
      x1 = std::max(x1, p.x);
      y1 = std::max(y1, p.y);
    }
  const int c0 = std::clamp(static_cast<int>(std::floor(x0)) - 3, 0, cols);
  const int r0 = std::clamp(static_cast<int>(std::floor(y0)) - 3, 0, rows);
  const int c1 = std::clamp(static_cast<int>(std::ceil(x1)) + 3, 0, cols);
  const int r1 = std::clamp(static_cast<int>(std::ceil(y1)) + 3, 0, rows);
  BitMask local(r1 - r0, c1 - c0);
  for (const auto& m : members) {
    RotRect r = m.rect;
    r.cx -= c0;
    r.cy -= r0;
    paint(local, r);
  }
  const Labeling lab = label_components(morph_close(local));
  std::vector<int> order(lab.count);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return lab.areas[a] > lab.areas[b]; });
  std::vector<Polygon> out;
  for (int k : order) {
    Polygon p = trace_contour(component_mask(lab, k));
    for (Point& v : p.vertices) {
      v.x += c0;
      v.y += r0;
    }
    out.push_back(std::move(p));
  }
  return out;
}

Polygon shape_approximate(std::span<const TextSegment> members, int rows, int cols) {
  auto all = shape_approximate_all(members, rows, cols);
  if (all.empty()) return Polygon{};
  return std::move(all.front());
}

std::vector<int> route_order(std::span<const TextSegment> members) {
  const int n = static_cast<int>(members.size());
  if (n == 0) throw Error(ErrorCode::kEmptyGroup, "route finding on empty group");
  double mx = 0.0, my = 0.0;
  for (const auto& m : members) {
    mx += m.rect.cx;
    my += m.rect.cy;
  }
  mx /= n;
  my /= n;
  int start = 0;
  double far = -1.0;
  for (int i = 0; i < n; ++i) {
    const double d = std::hypot(members[i].rect.cx - mx, members[i].rect.cy - my);
    if (d > far) {
      far = d;
      start = i;
    }
  }
  std::vector<int> order{start};
  std::vector<bool> seen(n, false);
  seen[start] = true;
  for (int step = 1; step < n; ++step) {
    const RotRect& cur = members[order.back()].rect;
    int best = -1;
    double best_d = 1e300;
    for (int j = 0; j < n; ++j) {
      if (seen[j]) continue;
      const double d = std::hypot(members[j].rect.cx - cur.cx, members[j].rect.cy - cur.cy);
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    seen[best] = true;
    order.push_back(best);
  }
  return order;
}

Polygon route_find_baseline(std::span<const TextSegment> members) {
  const std::vector<int> order = route_order(members);
  if (order.size() == 1) return to_polygon(members[order[0]].rect);
  std::vector<Point> top, bottom;
  Point prev_n{0.0, 0.0};
  const std::size_t n = order.size();
  for (std::size_t k = 0; k < n; ++k) {
    const RotRect& r = members[order[k]].rect;
    // Path direction at this segment, used to orient its normal.
    const RotRect& a = members[order[k == 0 ? 0 : k - 1]].rect;
    const RotRect& b = members[order[k + 1 < n ? k + 1 : k]].rect;
    double dx = b.cx - a.cx, dy = b.cy - a.cy;
    const double len = std::hypot(dx, dy);
    if (len > 0.0) {
      dx /= len;
      dy /= len;
    } else {
      dx = std::cos(r.theta);
      dy = std::sin(r.theta);
    }
    Point nrm{-std::sin(r.theta), std::cos(r.theta)};
    const double side = k == 0 ? (-dy * nrm.x + dx * nrm.y) : (prev_n.x * nrm.x + prev_n.y * nrm.y);
    if (side < 0.0) nrm = Point{-nrm.x, -nrm.y};
    prev_n = nrm;
    const double hh = r.h / 2.0;
    Point u{std::cos(r.theta), std::sin(r.theta)};
    if (u.x * dx + u.y * dy < 0.0) u = Point{-u.x, -u.y};
    const double hw = r.w / 2.0;
    if (k == 0) {
      top.push_back({r.cx - u.x * hw + nrm.x * hh, r.cy - u.y * hw + nrm.y * hh});
      bottom.push_back({r.cx - u.x * hw - nrm.x * hh, r.cy - u.y * hw - nrm.y * hh});
    }
    top.push_back({r.cx + nrm.x * hh, r.cy + nrm.y * hh});
    bottom.push_back({r.cx - nrm.x * hh, r.cy - nrm.y * hh});
    if (k + 1 == n) {
      top.push_back({r.cx + u.x * hw + nrm.x * hh, r.cy + u.y * hw + nrm.y * hh});
      bottom.push_back({r.cx + u.x * hw - nrm.x * hh, r.cy + u.y * hw - nrm.y * hh});
    }
  }
  Polygon p;
  p.vertices = top;
  p.vertices.insert(p.vertices.end(), bottom.rbegin(), bottom.rend());
  return p;
}

double ggtr_coverage(const Polygon& p, const BitMask& ggtr) {
  const BitMask m = rasterize(p, ggtr.rows(), ggtr.cols());
  const std::size_t area = count_set(m);
  if (area == 0) return 0.0;
  return static_cast<double>(count_set(mask_and(m, ggtr))) / static_cast<double>(area);
}

namespace {

// Raises TCL around each rectified pixel to the tent profile a centre line of
// that height carries, so pooled map statistics read it as text.
void restore_profile(TextMaps& maps, const BitMask& added, double band) {
  const TextMaps source = maps;
  for (int r = 0; r < maps.rows(); ++r) {
    for (int c = 0; c < maps.cols(); ++c) {
      if (!added(r, c) || source.h(r, c) <= 0.0) continue;
      const double radius = band * source.h(r, c) / 2.0;
      const int reach = static_cast<int>(std::ceil(radius));
      for (int dr = -reach; dr <= reach; ++dr) {
        for (int dc = -reach; dc <= reach; ++dc) {
          if (!maps.tcl.in_bounds(r + dr, c + dc)) continue;
          const double value = 1.0 - std::hypot(dr, dc) / radius;
          if (value <= maps.tcl(r + dr, c + dc)) continue;
          maps.tcl(r + dr, c + dc) = value;
          if (maps.h(r + dr, c + dc) <= 0.0) {
            maps.h(r + dr, c + dc) = source.h(r, c);
            maps.w(r + dr, c + dc) = source.w(r, c);
            maps.theta(r + dr, c + dc) = source.theta(r, c);
          }
        }
      }
    }
  }
}

}  // namespace

ProposalStage propose_stage(const TextMaps& maps, const ScalarGrid& ggtr,
                            const InferConfig& config) {
  if (!ggtr.same_shape(maps.tcl)) throw Error(ErrorCode::kShapeMismatch, "GGTR size");
  ProposalStage st;
  BitMask tcl(maps.rows(), maps.cols());
  for (int r = 0; r < maps.rows(); ++r)
    for (int c = 0; c < maps.cols(); ++c)
      tcl(r, c) = maps.tcl(r, c) > config.proposal.tcl_threshold ? 1 : 0;
  st.tcl_rectified =
      config.fpns_ggtr ? rectify_tcl(tcl, ggtr, config.tcl_op, config.ggtr_threshold) : tcl;

  // Rectified pixels enter the proposal as confident centre-line pixels; their
  // geometry is borrowed from nearby pixels.
  st.maps = maps;
  BitMask added(maps.rows(), maps.cols());
  for (int r = 0; r < maps.rows(); ++r)
    for (int c = 0; c < maps.cols(); ++c)
      if (st.tcl_rectified(r, c) && !tcl(r, c)) {
        added(r, c) = 1;
        st.maps.tcl(r, c) = 1.0;
      }
  borrow_geometry(st.maps, added, config.proposal.geometry_search_radius);
  restore_profile(st.maps, added, config.restored_band);

  const Labeling lab = label_components(st.tcl_rectified);
  for (int k = 0; k < lab.count; ++k) {
    const BitMask region = component_mask(lab, k);
    for (auto& s : propose_segments(st.maps, config.proposal, &region)) {
      st.segments.push_back(s);
      st.component.push_back(k);
    }
  }
  return st;
}

std::vector<Polygon> DetectionResult::kept() const {
  std::vector<Polygon> out;
  for (const auto& p : polygons)
    if (p.kept) out.push_back(p.polygon);
  return out;
}

namespace {

Matrix final_embedding(const Matrix& features, const SegmentGraph& g, const GcnParams& params) {
  const Matrix x0 = embed(features, params);
  auto layers = gcn_forward(x0, g.normalized, params);
  return layers.empty() ? x0 : layers.back();
}

}  // namespace

DetectionResult finish_detection(const ProposalStage& stage, const TextMaps& maps,
                                 const ScalarGrid& ggtr, const GcnParams& params,
                                 const InferConfig& config) {
  DetectionResult res;
  res.stages.proposed = stage.segments.size();
  std::vector<TextSegment> segs;
  std::vector<int> comp;
  if (config.use_gcn && config.fpns_node && !stage.segments.empty()) {
    const SegmentGraph g = build_graph(std::span<const TextSegment>(stage.segments), config.graph);
    const NodeClassification cls =
        classify_nodes(final_embedding(node_features(stage.segments, stage.maps), g, params), g,
                       params);
    for (std::size_t i = 0; i < stage.segments.size(); ++i) {
      TextSegment s = stage.segments[i];
      s.type = cls.predicted(static_cast<int>(i));
      if (s.type == SegmentType::kNonText) {
        res.removed.push_back(s);
        continue;
      }
      segs.push_back(s);
      comp.push_back(stage.component[i]);
    }
  } else {
    segs = stage.segments;
    comp = stage.component;
  }
  res.stages.node_removed = res.removed.size();

  if (config.use_gcn) {
    if (!segs.empty()) {
      const SegmentGraph g = build_graph(std::span<const TextSegment>(segs), config.graph);
      const auto pairs = candidate_pairs(g);
      const LinkPrediction lp =
          predict_links(final_embedding(node_features(segs, stage.maps), g, params), pairs,
                        pair_geometry(segs, pairs), params);
      res.groups = group_segments(static_cast<int>(segs.size()), pairs, lp.prob,
                                  config.link_threshold);
    }
  } else {
    int max_comp = -1;
    for (int c : comp) max_comp = std::max(max_comp, c);
    std::vector<int> slot(max_comp + 1, -1);
    for (std::size_t i = 0; i < segs.size(); ++i) {
      int& s = slot[comp[i]];
      if (s < 0) {
        s = static_cast<int>(res.groups.size());
        res.groups.emplace_back();
      }
      res.groups[s].members.push_back(static_cast<int>(i));
    }
  }
  res.stages.groups = res.groups.size();

  const BitMask gbin = binarize(ggtr, config.ggtr_threshold);
  int next_id = 0;
  for (std::size_t gi = 0; gi < res.groups.size(); ++gi) {
    std::vector<TextSegment> members;
    for (int m : res.groups[gi].members) members.push_back(segs[m]);
    std::vector<Polygon> polys;
    if (config.shape_approx)
      polys = shape_approximate_all(members, maps.rows(), maps.cols());
    else
      polys.push_back(route_find_baseline(members));
    for (std::size_t k = 0; k < polys.size(); ++k) {
      if (polygon_area(polys[k]) < config.min_area) continue;
      DetectedPolygon d;
      d.polygon = std::move(polys[k]);
      d.group = static_cast<int>(gi);
      if (config.fpns_ggtr) {
        d.coverage = ggtr_coverage(d.polygon, gbin);
        d.kept = d.coverage >= config.keep_coverage;
      }
      // Fragments beyond the largest component only survive if they pass.
      if (!d.kept && k > 0) continue;
      if (!d.kept) ++res.stages.ggtr_dropped;
      d.id = next_id++;
      res.polygons.push_back(std::move(d));
    }
  }
  res.segments = std::move(segs);
  return res;
}

DetectionResult detect(const TextMaps& maps, const ScalarGrid& ggtr, const GcnParams& params,
                       const InferConfig& config) {
  return finish_detection(propose_stage(maps, ggtr, config), maps, ggtr, params, config);
}

}  // namespace segtext
