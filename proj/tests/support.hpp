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
// Shared fixtures and independent reference implementations for the tests.
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <vector>

#include "segtext/graph.hpp"
#include "segtext/grid.hpp"
#include "segtext/harness.hpp"
#include "segtext/proposal.hpp"
#include "segtext/random.hpp"
#include "segtext/scene.hpp"

namespace segtext::testing {

inline RotRect random_rect(Rng& rng, double extent, double lo = 2.0, double hi = 12.0) {
  return RotRect::make(rng.uniform(0.0, extent), rng.uniform(0.0, extent), rng.uniform(lo, hi),
                       rng.uniform(lo, hi), rng.uniform(-M_PI, M_PI));
}

// Point-in-rect by projecting onto the rect's own axes.
inline bool inside(const RotRect& r, double x, double y) {
  const double dx = x - r.cx, dy = y - r.cy;
  const double u = dx * std::cos(r.theta) + dy * std::sin(r.theta);
  const double v = -dx * std::sin(r.theta) + dy * std::cos(r.theta);
  return std::abs(u) <= r.w / 2 && std::abs(v) <= r.h / 2;
}

inline double monte_carlo_iou(const RotRect& a, const RotRect& b, int samples, Rng& rng) {
  const double ra = std::hypot(a.h, a.w) / 2, rb = std::hypot(b.h, b.w) / 2;
  const double x0 = std::min(a.cx - ra, b.cx - rb), x1 = std::max(a.cx + ra, b.cx + rb);
  const double y0 = std::min(a.cy - ra, b.cy - rb), y1 = std::max(a.cy + ra, b.cy + rb);
  long both = 0, either = 0;
  for (int k = 0; k < samples; ++k) {
    const double x = rng.uniform(x0, x1), y = rng.uniform(y0, y1);
    const bool ia = inside(a, x, y), ib = inside(b, x, y);
    both += ia && ib;
    either += ia || ib;
  }
  return either == 0 ? 0.0 : static_cast<double>(both) / either;
}

// Greedy suppression, O(n^2), with the library's documented tie order.
inline std::vector<std::size_t> greedy_nms(const std::vector<RotRect>& rects,
                                           const std::vector<double>& scores, double thr) {
  std::vector<std::size_t> order(rects.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    if (scores[i] != scores[j]) return scores[i] > scores[j];
    if (rects[i].cy != rects[j].cy) return rects[i].cy < rects[j].cy;
    return rects[i].cx < rects[j].cx;
  });
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    bool ok = true;
    for (std::size_t k : kept) ok = ok && rect_iou(rects[k], rects[i]) <= thr;
    if (ok) kept.push_back(i);
  }
  return kept;
}

inline BitMask random_mask(Rng& rng, int rows, int cols, double density) {
  BitMask m(rows, cols);
  for (auto& v : m.data()) v = rng.bernoulli(density) ? 1 : 0;
  return m;
}

// Spec for a clean scene with one instance of the given family.
inline SceneSpec single_instance(SpineFamily family, int rows = 256, int cols = 256,
                                 double char_h = 16.0, int chars = 6) {
  SceneSpec s;
  s.rows = rows;
  s.cols = cols;
  s.seed = 7;
  SpineSpec i;
  i.family = family;
  i.chars = chars;
  i.char_h = char_h;
  i.char_w = 0.75 * char_h;
  i.char_gap = 3.0;
  switch (family) {
    case SpineFamily::kLine:
      i.params = {{"x0", 40.0}, {"y0", rows / 2.0}, {"angle", 0.0}};
      break;
    case SpineFamily::kArc:
      i.params = {{"cx", cols / 2.0}, {"cy", rows / 2.0 + 60}, {"radius", 90.0}, {"start", -2.4}};
      break;
    case SpineFamily::kSine:
      i.params = {{"x0", 30.0}, {"y0", rows / 2.0}, {"angle", 0.0}, {"amplitude", 20.0},
                  {"wavelength", 160.0}};
      break;
    case SpineFamily::kSpiral:
      i.params = {{"cx", cols / 2.0}, {"cy", rows / 2.0}, {"r0", 40.0}, {"growth", 8.0},
                  {"start", 0.0}};
      break;
  }
  s.instances.push_back(i);
  return s;
}

// Random segments on a small canvas with random maps: enough structure for the
// GCN to produce non-trivial gradients.
struct SmallScene {
  TextMaps maps;
  std::vector<TextSegment> segments;
};

inline SmallScene small_scene(std::uint64_t seed, int n) {
  Rng rng(seed);
  SmallScene s;
  s.maps = empty_maps(48, 48);
  for (auto& v : s.maps.tcl.data()) v = rng.uniform();
  for (auto& v : s.maps.h.data()) v = rng.uniform(4.0, 14.0);
  for (int k = 0; k < n; ++k) {
    TextSegment t;
    t.rect = RotRect::make(rng.uniform(2, 46), rng.uniform(2, 46), rng.uniform(4, 14),
                           rng.uniform(2, 6), rng.uniform(-1.5, 1.5));
    t.instance = static_cast<int>(rng.index(2));
    t.type = static_cast<SegmentType>(rng.index(4));
    s.segments.push_back(t);
  }
  return s;
}

// Plain-loop dense reference for the embedding and graph-convolution layers.
inline std::vector<Matrix> dense_forward_oracle(const Matrix& f, const Matrix& a_hat,
                                                const GcnParams& p) {
  const int n = static_cast<int>(f.rows());
  const int fd = static_cast<int>(f.cols());
  const int d = static_cast<int>(p.embed_w.cols());
  Matrix x(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) {
      double acc = p.embed_b(0, j);
      for (int k = 0; k < fd; ++k)
        acc += (f(i, k) - p.feature_shift(0, k)) * p.feature_scale(0, k) * p.embed_w(k, j);
      x(i, j) = acc;
    }
  std::vector<Matrix> out;
  for (const Matrix& w : p.conv_w) {
    Matrix ax = Matrix::Zero(n, d);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k)
        for (int j = 0; j < d; ++j) ax(i, j) += a_hat(i, k) * x(k, j);
    const int dout = static_cast<int>(w.cols());
    Matrix y(n, dout);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < dout; ++j) {
        double acc = 0.0;
        for (int k = 0; k < d; ++k) acc += x(i, k) * w(k, j) + ax(i, k) * w(d + k, j);
        y(i, j) = std::max(0.0, acc);
      }
    out.push_back(y);
    x = y;
  }
  return out;
}

// Union-find over accepted edges; returns a canonical component id per node
// (the smallest member).
inline std::vector<int> union_find_oracle(int n, const std::vector<std::pair<int, int>>& edges) {
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  for (auto [a, b] : edges) {
    const int ra = find(a), rb = find(b);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  std::vector<int> out(n);
  for (int v = 0; v < n; ++v) out[v] = find(v);
  return out;
}

// Segments whose centre pixel lies in the char union, then for each the
// nearest other segment by squared distance, ties to the lower index.
inline std::set<std::size_t> interval_oracle(const std::vector<TextSegment>& segs, const BitMask& chars) {
  std::vector<bool> is_char(segs.size());
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const int r = static_cast<int>(std::floor(segs[i].rect.cy));
    const int c = static_cast<int>(std::floor(segs[i].rect.cx));
    is_char[i] = chars.in_bounds(r, c) && chars(r, c);
  }
  std::set<std::size_t> out;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (!is_char[i]) continue;
    std::size_t best = segs.size();
    double best_d = 0.0;
    for (std::size_t j = 0; j < segs.size(); ++j) {
      if (is_char[j]) continue;
      const double dx = segs[i].rect.cx - segs[j].rect.cx, dy = segs[i].rect.cy - segs[j].rect.cy;
      const double d = dx * dx + dy * dy;
      if (best == segs.size() || d < best_d) {
        best = j;
        best_d = d;
      }
    }
    if (best < segs.size()) out.insert(best);
  }
  return out;
}

// A small model (12 training scenes, 300 iterations) trained once per process
// and shared by the end-to-end fixtures.
inline const GcnParams& small_trained_params() {
  static const GcnParams params = [] {
    const CorpusConfig corpus = training_corpus(0, 12);
    std::vector<SceneRecord> records;
    for (int i = 0; i < corpus.count; ++i) records.push_back(realize(corpus_scene_spec(corpus, i)));
    return train_on_records(records, TrainConfig{300, 0.05, 0}, GcnConfig{}).result.params;
  }();
  return params;
}

}  // namespace segtext::testing
