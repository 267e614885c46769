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

// Rotated-rectangle geometry, raster masks, morphology, connected components,
// contour tracing and polygon IoU.

#include <array>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace segtext {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

// Maps any angle into [-pi/2, pi/2); a rectangle and its half-turn are the
// same shape.
double normalize_angle(double theta);

// Smallest absolute difference between two undirected orientations.
double orientation_distance(double a, double b);

// Centre (cx, cy), extent h across the text direction and w along it, and the
// text direction theta. Pixel (r, c) has its centre at (c + 0.5, r + 0.5).
struct RotRect {
  double cx = 0.0;
  double cy = 0.0;
  double h = 1.0;
  double w = 1.0;
  double theta = 0.0;

  static RotRect make(double cx, double cy, double h, double w, double theta) {
    return RotRect{cx, cy, h, w, normalize_angle(theta)};
  }

  double area() const { return h * w; }

  friend bool operator==(const RotRect&, const RotRect&) = default;
};

struct Polygon {
  std::vector<Point> vertices;

  std::size_t size() const { return vertices.size(); }
  bool empty() const { return vertices.empty(); }
};

// Dense row-major grid; BitMask and the scalar text maps share it.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
    assert(rows >= 0 && cols >= 0);
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool in_bounds(int r, int c) const { return r >= 0 && c >= 0 && r < rows_ && c < cols_; }

  T& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  const T& operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  bool same_shape(const Grid& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

using BitMask = Grid<std::uint8_t>;
using ScalarGrid = Grid<double>;

std::size_t count_set(const BitMask& m);
bool any_set(const BitMask& m);
BitMask mask_or(const BitMask& a, const BitMask& b);
BitMask mask_and(const BitMask& a, const BitMask& b);
// a ⊆ b
bool mask_subset(const BitMask& a, const BitMask& b);

// ---- rotated rectangles ---------------------------------------------------

// Ordered so the shoelace signed area is positive, the orientation every
// polygon routine here expects from convex clip polygons.
std::array<Point, 4> corners(const RotRect& r);

bool contains(const RotRect& r, Point p, double eps = 1e-9);

double signed_area(std::span<const Point> poly);
double polygon_area(const Polygon& p);

// Intersection of a polygon with a convex clip polygon (Sutherland-Hodgman).
std::vector<Point> clip_convex(std::span<const Point> subject, std::span<const Point> clip);

double rect_iou(const RotRect& a, const RotRect& b);

// Greedy suppression in descending score order; equal scores are ordered by
// centre row, then column, then input index. Returns kept indices in the
// order they were accepted. A rect is suppressed when its IoU with an already
// kept rect exceeds `iou_threshold`.
std::vector<std::size_t> nms(std::span<const RotRect> rects, std::span<const double> scores,
                             double iou_threshold);

// ---- rasterization --------------------------------------------------------

// Calls fn(row, col) for every pixel whose centre lies inside the rect
// (boundary counts as inside), clipped to the grid.
void for_each_pixel(const RotRect& r, int rows, int cols,
                    const std::function<void(int, int)>& fn);

BitMask rasterize(std::span<const RotRect> rects, int rows, int cols);
BitMask rasterize(const Polygon& poly, int rows, int cols);
void paint(BitMask& m, const RotRect& r);
void paint(BitMask& m, const Polygon& poly);

// ---- morphology -----------------------------------------------------------

// 3x3 square structuring element. Dilation treats outside pixels as unset,
// erosion treats them as set, which keeps closing extensive and idempotent.
BitMask dilate3(const BitMask& m);
BitMask erode3(const BitMask& m);
BitMask morph_close(const BitMask& m);

// ---- components -----------------------------------------------------------

struct Labeling {
  Grid<int> labels;  // -1 for background, else component index
  int count = 0;
  std::vector<std::size_t> areas;
};

// 8-connected labelling; components are numbered in row-major order of their
// first pixel.
Labeling label_components(const BitMask& m);
std::vector<BitMask> connected_components(const BitMask& m);
BitMask component_mask(const Labeling& lab, int index);
// Index of the component with the most pixels (lowest index on ties), -1 if none.
int largest_component(const Labeling& lab);

// ---- contours -------------------------------------------------------------

// Outer boundary of the component containing the first set pixel (row-major),
// traced along pixel edges. Vertices sit on pixel corners; collinear runs are
// merged. Throws Error(kEmptyMask) on an empty mask.
Polygon trace_contour(const BitMask& m);

bool segments_intersect(Point a, Point b, Point c, Point d);
// No two non-adjacent edges touch and no adjacent edges fold back.
bool is_simple(const Polygon& p);

// Rasterized IoU at 2x supersampling over the joint bounding box.
double polygon_iou(const Polygon& a, const Polygon& b);

Polygon to_polygon(const RotRect& r);

}  // namespace segtext
