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
#include "segtext/grid.hpp"
#include "support.hpp"

using namespace segtext;
using segtext::testing::greedy_nms;
using segtext::testing::monte_carlo_iou;
using segtext::testing::random_mask;
using segtext::testing::random_rect;

namespace {

Point centroid(const std::array<Point, 4>& c) {
  Point p;
  for (const auto& q : c) {
    p.x += q.x / 4;
    p.y += q.y / 4;
  }
  return p;
}

BitMask box_mask(int rows, int cols, int r0, int c0, int r1, int c1) {
  BitMask m(rows, cols);
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c) m(r, c) = 1;
  return m;
}

Polygon axis_box(double x0, double y0, double x1, double y1) {
  return Polygon{{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}};
}

}  // namespace

TEST_CASE("angles normalise into a half turn") {
  Rng rng(3);
  for (int k = 0; k < 200; ++k) {
    const double t = rng.uniform(-20, 20);
    const double n = normalize_angle(t);
    CHECK(n >= -M_PI / 2);
    CHECK(n < M_PI / 2);
    CHECK(std::abs(std::sin(2 * (n - t))) < 1e-9);
  }
}

TEST_CASE("corners") {
  auto c = corners(RotRect::make(0, 0, 2, 2, 0));
  std::set<std::pair<double, double>> got;
  for (auto p : c) got.insert({p.x, p.y});
  CHECK(got == std::set<std::pair<double, double>>{{-1, -1}, {-1, 1}, {1, -1}, {1, 1}});

  c = corners(RotRect::make(0, 0, 2, 2, M_PI / 4));
  for (auto p : c) {
    CHECK(std::hypot(p.x, p.y) == doctest::Approx(std::sqrt(2.0)));
    CHECK(std::min(std::abs(p.x), std::abs(p.y)) < 1e-12);
  }

  const RotRect r = RotRect::make(5, 3, 4, 2, 0.3);
  const Point m = centroid(corners(r));
  CHECK(m.x == doctest::Approx(5));
  CHECK(m.y == doctest::Approx(3));
  // Edge lengths from a direct rotation.
  c = corners(r);
  std::multiset<long> lens;
  for (int k = 0; k < 4; ++k)
    lens.insert(std::lround(1e6 * std::hypot(c[k].x - c[(k + 1) % 4].x, c[k].y - c[(k + 1) % 4].y)));
  CHECK(lens == std::multiset<long>{2000000, 2000000, 4000000, 4000000});
}

TEST_CASE("rect_iou basics") {
  const RotRect a = RotRect::make(10, 10, 6, 4, 0.4);
  CHECK(rect_iou(a, a) == 1.0);
  CHECK(rect_iou(a, RotRect::make(40, 40, 6, 4, 0.4)) == 0.0);
  const RotRect sq = RotRect::make(0, 0, 1, 1, 0);
  const RotRect rot = RotRect::make(0, 0, 1, 1, M_PI / 4);
  Rng rng(11);
  const double mc = monte_carlo_iou(sq, rot, 1000000, rng);
  CHECK(std::abs(rect_iou(sq, rot) - mc) < 0.002);
  CHECK(rect_iou(sq, rot) == doctest::Approx(0.7071).epsilon(0.002));
}

TEST_CASE("rect_iou is symmetric and agrees with sampling") {
  Rng rng(5);
  Rng mc(6);
  for (int k = 0; k < 10; ++k) {
    const RotRect a = random_rect(rng, 10);
    const RotRect b = random_rect(rng, 10);
    CHECK(rect_iou(a, b) == rect_iou(b, a));
    CHECK(std::abs(rect_iou(a, b) - monte_carlo_iou(a, b, 200000, mc)) < 0.005);
  }
}

TEST_CASE("nms") {
  const RotRect r = RotRect::make(5, 5, 4, 4, 0);
  std::vector<RotRect> three{r, r, r};
  std::vector<double> s{0.5, 0.5, 0.5};
  CHECK(nms(three, s, 0.5).size() == 1);

  // Two axis-aligned 10x10 squares shifted so the overlap gives IoU 0.3.
  const double shift = 10 * (1 - 2 * 0.3 / 1.3);
  std::vector<RotRect> two{RotRect::make(0, 0, 10, 10, 0), RotRect::make(shift, 0, 10, 10, 0)};
  CHECK(rect_iou(two[0], two[1]) == doctest::Approx(0.3));
  CHECK(nms(two, std::vector<double>{0.9, 0.8}, 0.5).size() == 2);

  std::vector<RotRect> chain;
  std::vector<double> scores;
  Rng rng(8);
  for (int k = 0; k < 20; ++k) {
    chain.push_back(RotRect::make(2.0 * k, 0.3 * k, 8, 3, 0.1));
    scores.push_back(std::round(rng.uniform() * 4) / 4);
  }
  auto kept = nms(chain, scores, 0.5);
  CHECK(kept == greedy_nms(chain, scores, 0.5));
  for (std::size_t i = 0; i < kept.size(); ++i)
    for (std::size_t j = i + 1; j < kept.size(); ++j)
      CHECK(rect_iou(chain[kept[i]], chain[kept[j]]) <= 0.5 + 1e-9);
}

TEST_CASE("rasterize") {
  std::vector<RotRect> one{RotRect::make(2, 2, 2, 2, 0)};
  CHECK(count_set(rasterize(one, 4, 4)) == 4);
  CHECK(count_set(rasterize(std::vector<RotRect>{}, 8, 8)) == 0);
  const RotRect diag = RotRect::make(30, 30, 12, 20, M_PI / 4);
  const double n = static_cast<double>(count_set(rasterize(std::vector<RotRect>{diag}, 64, 64)));
  CHECK(std::abs(n - diag.area()) <= 2.0 + 0.02 * diag.area());
}

TEST_CASE("morphology") {
  CHECK(count_set(morph_close(BitMask(10, 10))) == 0);

  BitMask two(9, 9);
  two(4, 3) = 1;
  two(4, 5) = 1;
  CHECK(label_components(morph_close(two)).count == 1);

  const BitMask solid = box_mask(12, 12, 3, 2, 8, 9);
  CHECK(morph_close(solid) == solid);

  Rng rng(21);
  for (int k = 0; k < 20; ++k) {
    const BitMask m = random_mask(rng, 24, 31, rng.uniform(0.05, 0.6));
    const BitMask c = morph_close(m);
    CHECK(mask_subset(m, c));
    CHECK(morph_close(c) == c);
  }
}

TEST_CASE("connected components") {
  BitMask diag(4, 4);
  diag(0, 0) = 1;
  diag(1, 1) = 1;
  CHECK(connected_components(diag).size() == 1);
  CHECK(connected_components(BitMask(5, 5)).empty());
  BitMask checker(4, 4);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) checker(r, c) = (r + c) % 2;
  CHECK(connected_components(checker).size() == 1);

  Rng rng(4);
  for (int k = 0; k < 20; ++k) {
    const BitMask m = random_mask(rng, 20, 20, 0.3);
    const auto comps = connected_components(m);
    BitMask all(20, 20);
    for (std::size_t i = 0; i < comps.size(); ++i) {
      for (std::size_t j = i + 1; j < comps.size(); ++j)
        CHECK(count_set(mask_and(comps[i], comps[j])) == 0);
      all = mask_or(all, comps[i]);
    }
    CHECK(all == m);
  }
}

TEST_CASE("trace_contour") {
  BitMask one(5, 5);
  one(2, 3) = 1;
  const Polygon p = trace_contour(one);
  CHECK(p.size() == 4);
  CHECK(std::abs(polygon_area(p)) == doctest::Approx(1.0));
  for (auto v : p.vertices) {
    CHECK((v.x == 3 || v.x == 4));
    CHECK((v.y == 2 || v.y == 3));
  }

  const Polygon rect = trace_contour(box_mask(10, 10, 2, 2, 4, 6));
  CHECK(rect.size() == 4);
  CHECK(std::abs(polygon_area(rect)) == doctest::Approx(15.0));

  BitMask disk(40, 40);
  for (int r = 0; r < 40; ++r)
    for (int c = 0; c < 40; ++c)
      if (std::hypot(c + 0.5 - 20, r + 0.5 - 20) <= 10) disk(r, c) = 1;
  Polygon analytic;
  for (int k = 0; k < 720; ++k)
    analytic.vertices.push_back({20 + 10 * std::cos(k * M_PI / 360), 20 + 10 * std::sin(k * M_PI / 360)});
  CHECK(polygon_iou(trace_contour(disk), analytic) >= 0.95);

  CHECK_THROWS_AS(trace_contour(BitMask(3, 3)), Error);
}

TEST_CASE("contours of random components are simple") {
  Rng rng(9);
  for (int k = 0; k < 30; ++k) {
    const BitMask m = random_mask(rng, 16, 16, rng.uniform(0.3, 0.7));
    const Labeling lab = label_components(m);
    if (lab.count == 0) continue;
    const Polygon p = trace_contour(component_mask(lab, largest_component(lab)));
    CHECK(is_simple(p));
  }
}

TEST_CASE("rasterize, trace, rasterize round trip for convex shapes") {
  Rng rng(10);
  for (int k = 0; k < 20; ++k) {
    const RotRect r = RotRect::make(rng.uniform(25, 39), rng.uniform(25, 39), rng.uniform(8, 20),
                                    rng.uniform(8, 20), rng.uniform(-M_PI, M_PI));
    const BitMask m = rasterize(std::vector<RotRect>{r}, 64, 64);
    const BitMask back = rasterize(trace_contour(m), 64, 64);
    const double inter = static_cast<double>(count_set(mask_and(m, back)));
    const double uni = static_cast<double>(count_set(mask_or(m, back)));
    CHECK(inter / uni >= 0.95);
  }
}

TEST_CASE("polygon_iou") {
  const Polygon a = axis_box(0, 0, 4, 1);
  CHECK(polygon_iou(a, a) == doctest::Approx(1.0));
  CHECK(polygon_iou(a, axis_box(10, 10, 12, 12)) == 0.0);
  // Two 4x1 boxes overlapping by 2: overlap 2, union 6.
  const Polygon b = axis_box(2, 0, 6, 1);
  CHECK(std::abs(polygon_iou(a, b) - 1.0 / 3) < 0.01);
  CHECK(polygon_iou(a, b) == polygon_iou(b, a));
}

TEST_CASE("simplicity test") {
  CHECK(is_simple(axis_box(0, 0, 3, 3)));
  const Polygon bowtie{{{0, 0}, {2, 2}, {2, 0}, {0, 2}}};
  CHECK_FALSE(is_simple(bowtie));
  CHECK(segments_intersect({0, 0}, {2, 2}, {0, 2}, {2, 0}));
  CHECK_FALSE(segments_intersect({0, 0}, {1, 0}, {0, 1}, {1, 1}));
}
