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

#include "segtext/grid.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <tuple>
#include <unordered_map>

#include "segtext/error.hpp"

namespace segtext {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyMask: return "EmptyMask";
    case ErrorCode::kSpecOverflow: return "SpecOverflow";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kNoCharSegments: return "NoCharSegments";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNoLabeledNodes: return "NoLabeledNodes";
    case ErrorCode::kDivergence: return "Divergence";
    case ErrorCode::kEmptyGroup: return "EmptyGroup";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kParse: return "Parse";
  }
  return "Unknown";
}

double normalize_angle(double theta) {
  double t = std::fmod(theta + M_PI / 2.0, M_PI);
  if (t < 0.0) t += M_PI;
  t -= M_PI / 2.0;
  if (t >= M_PI / 2.0) t -= M_PI;
  return t;
}

double orientation_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), M_PI);
  return std::min(d, M_PI - d);
}

std::size_t count_set(const BitMask& m) {
  return static_cast<std::size_t>(std::count_if(m.data().begin(), m.data().end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

bool any_set(const BitMask& m) {
  return std::any_of(m.data().begin(), m.data().end(), [](std::uint8_t v) { return v != 0; });
}

BitMask mask_or(const BitMask& a, const BitMask& b) {
  assert(a.same_shape(b));
  BitMask out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = (a.data()[i] | b.data()[i]) ? 1 : 0;
  return out;
}

BitMask mask_and(const BitMask& a, const BitMask& b) {
  assert(a.same_shape(b));
  BitMask out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = (a.data()[i] && b.data()[i]) ? 1 : 0;
  return out;
}

bool mask_subset(const BitMask& a, const BitMask& b) {
  assert(a.same_shape(b));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.data()[i] && !b.data()[i]) return false;
  }
  return true;
}

// ---- rotated rectangles ---------------------------------------------------

std::array<Point, 4> corners(const RotRect& r) {
  const double ux = std::cos(r.theta), uy = std::sin(r.theta);
  const double nx = -uy, ny = ux;
  const double hw = r.w / 2.0, hh = r.h / 2.0;
  return {Point{r.cx - ux * hw - nx * hh, r.cy - uy * hw - ny * hh},
          Point{r.cx + ux * hw - nx * hh, r.cy + uy * hw - ny * hh},
          Point{r.cx + ux * hw + nx * hh, r.cy + uy * hw + ny * hh},
          Point{r.cx - ux * hw + nx * hh, r.cy - uy * hw + ny * hh}};
}

bool contains(const RotRect& r, Point p, double eps) {
  const double ux = std::cos(r.theta), uy = std::sin(r.theta);
  const double dx = p.x - r.cx, dy = p.y - r.cy;
  const double along = dx * ux + dy * uy;
  const double across = -dx * uy + dy * ux;
  return std::abs(along) <= r.w / 2.0 + eps && std::abs(across) <= r.h / 2.0 + eps;
}

double signed_area(std::span<const Point> poly) {
  const std::size_t n = poly.size();
  if (n < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = poly[i];
    const Point& b = poly[(i + 1) % n];
    acc += a.x * b.y - b.x * a.y;
  }
  return acc / 2.0;
}

double polygon_area(const Polygon& p) { return std::abs(signed_area(p.vertices)); }

namespace {

double cross(Point o, Point a, Point b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

Point line_intersection(Point p, Point q, Point a, Point b) {
  const double a1 = cross(a, b, p);
  const double a2 = cross(a, b, q);
  const double t = a1 / (a1 - a2);
  return Point{p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
}

bool rect_less(const RotRect& a, const RotRect& b) {
  return std::tie(a.cx, a.cy, a.h, a.w, a.theta) < std::tie(b.cx, b.cy, b.h, b.w, b.theta);
}

}  // namespace

std::vector<Point> clip_convex(std::span<const Point> subject, std::span<const Point> clip) {
  std::vector<Point> out(subject.begin(), subject.end());
  const double orient = signed_area(clip) >= 0.0 ? 1.0 : -1.0;
  const std::size_t m = clip.size();
  for (std::size_t e = 0; e < m && !out.empty(); ++e) {
    const Point a = clip[e];
    const Point b = clip[(e + 1) % m];
    std::vector<Point> in = std::move(out);
    out.clear();
    const std::size_t n = in.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Point p = in[i];
      const Point q = in[(i + 1) % n];
      const bool p_in = orient * cross(a, b, p) >= 0.0;
      const bool q_in = orient * cross(a, b, q) >= 0.0;
      if (p_in) {
        out.push_back(p);
        if (!q_in) out.push_back(line_intersection(p, q, a, b));
      } else if (q_in) {
        out.push_back(line_intersection(p, q, a, b));
      }
    }
  }
  return out;
}

double rect_iou(const RotRect& a_in, const RotRect& b_in) {
  if (a_in == b_in) return 1.0;
  // Fixed argument order makes the floating-point result exactly symmetric.
  const bool swap = rect_less(b_in, a_in);
  const RotRect& a = swap ? b_in : a_in;
  const RotRect& b = swap ? a_in : b_in;
  const double ra = 0.5 * std::hypot(a.h, a.w);
  const double rb = 0.5 * std::hypot(b.h, b.w);
  if (std::hypot(a.cx - b.cx, a.cy - b.cy) > ra + rb) return 0.0;
  const auto ca = corners(a);
  const auto cb = corners(b);
  const double inter = std::abs(signed_area(clip_convex(ca, cb)));
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::vector<std::size_t> nms(std::span<const RotRect> rects, std::span<const double> scores,
                             double iou_threshold) {
  assert(rects.size() == scores.size());
  std::vector<std::size_t> order(rects.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    if (scores[i] != scores[j]) return scores[i] > scores[j];
    if (rects[i].cy != rects[j].cy) return rects[i].cy < rects[j].cy;
    if (rects[i].cx != rects[j].cx) return rects[i].cx < rects[j].cx;
    return i < j;
  });

  double max_radius = 0.5;
  for (const auto& r : rects) max_radius = std::max(max_radius, 0.5 * std::hypot(r.h, r.w));
  const double cell = 2.0 * max_radius;
  auto key = [](long long ix, long long iy) { return (ix << 32) ^ (iy & 0xffffffffLL); };
  std::unordered_map<long long, std::vector<std::size_t>> buckets;

  std::vector<std::size_t> kept;
  for (std::size_t idx : order) {
    const RotRect& r = rects[idx];
    const long long ix = static_cast<long long>(std::floor(r.cx / cell));
    const long long iy = static_cast<long long>(std::floor(r.cy / cell));
    bool suppressed = false;
    for (long long dy = -1; dy <= 1 && !suppressed; ++dy) {
      for (long long dx = -1; dx <= 1 && !suppressed; ++dx) {
        auto it = buckets.find(key(ix + dx, iy + dy));
        if (it == buckets.end()) continue;
        for (std::size_t k : it->second) {
          if (rect_iou(rects[k], r) > iou_threshold) {
            suppressed = true;
            break;
          }
        }
      }
    }
    if (!suppressed) {
      kept.push_back(idx);
      buckets[key(ix, iy)].push_back(idx);
    }
  }
  return kept;
}

// ---- rasterization --------------------------------------------------------

void for_each_pixel(const RotRect& r, int rows, int cols,
                    const std::function<void(int, int)>& fn) {
  const auto cs = corners(r);
  double minx = cs[0].x, maxx = cs[0].x, miny = cs[0].y, maxy = cs[0].y;
  for (const auto& p : cs) {
    minx = std::min(minx, p.x);
    maxx = std::max(maxx, p.x);
    miny = std::min(miny, p.y);
    maxy = std::max(maxy, p.y);
  }
  const int c0 = std::max(0, static_cast<int>(std::floor(minx - 0.5)));
  const int c1 = std::min(cols - 1, static_cast<int>(std::ceil(maxx - 0.5)));
  const int r0 = std::max(0, static_cast<int>(std::floor(miny - 0.5)));
  const int r1 = std::min(rows - 1, static_cast<int>(std::ceil(maxy - 0.5)));
  for (int row = r0; row <= r1; ++row) {
    for (int col = c0; col <= c1; ++col) {
      if (contains(r, Point{col + 0.5, row + 0.5})) fn(row, col);
    }
  }
}

void paint(BitMask& m, const RotRect& r) {
  for_each_pixel(r, m.rows(), m.cols(), [&](int row, int col) { m(row, col) = 1; });
}

BitMask rasterize(std::span<const RotRect> rects, int rows, int cols) {
  BitMask m(rows, cols);
  for (const auto& r : rects) paint(m, r);
  return m;
}

namespace {

// Scanline fill of a (possibly non-convex) polygon onto a lattice whose cell
// (i, j) has its centre at (x0 + (j + 0.5) * step, y0 + (i + 0.5) * step).
template <typename Fn>
void scan_polygon(const Polygon& poly, double x0, double y0, double step, int rows, int cols,
                  Fn&& fn) {
  const auto& v = poly.vertices;
  const std::size_t n = v.size();
  if (n < 3) return;
  double miny = v[0].y, maxy = v[0].y;
  for (const auto& p : v) {
    miny = std::min(miny, p.y);
    maxy = std::max(maxy, p.y);
  }
  const int i0 = std::max(0, static_cast<int>(std::floor((miny - y0) / step - 0.5)));
  const int i1 = std::min(rows - 1, static_cast<int>(std::ceil((maxy - y0) / step - 0.5)));
  std::vector<double> xs;
  for (int i = i0; i <= i1; ++i) {
    const double y = y0 + (i + 0.5) * step;
    xs.clear();
    for (std::size_t k = 0; k < n; ++k) {
      const Point& p = v[k];
      const Point& q = v[(k + 1) % n];
      if ((p.y <= y) != (q.y <= y)) {
        xs.push_back(p.x + (y - p.y) * (q.x - p.x) / (q.y - p.y));
      }
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      const int j0 = std::max(0, static_cast<int>(std::ceil((xs[k] - x0) / step - 0.5 - 1e-9)));
      const int j1 =
          std::min(cols - 1, static_cast<int>(std::floor((xs[k + 1] - x0) / step - 0.5 + 1e-9)));
      for (int j = j0; j <= j1; ++j) fn(i, j);
    }
  }
}

}  // namespace

void paint(BitMask& m, const Polygon& poly) {
  scan_polygon(poly, 0.0, 0.0, 1.0, m.rows(), m.cols(), [&](int r, int c) { m(r, c) = 1; });
}

BitMask rasterize(const Polygon& poly, int rows, int cols) {
  BitMask m(rows, cols);
  paint(m, poly);
  return m;
}

// ---- morphology -----------------------------------------------------------

BitMask dilate3(const BitMask& m) {
  const int rows = m.rows(), cols = m.cols();
  BitMask horiz(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      bool v = m(r, c) || (c > 0 && m(r, c - 1)) || (c + 1 < cols && m(r, c + 1));
      horiz(r, c) = v ? 1 : 0;
    }
  }
  BitMask out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      bool v = horiz(r, c) || (r > 0 && horiz(r - 1, c)) || (r + 1 < rows && horiz(r + 1, c));
      out(r, c) = v ? 1 : 0;
    }
  }
  return out;
}

BitMask erode3(const BitMask& m) {
  const int rows = m.rows(), cols = m.cols();
  BitMask horiz(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      bool v = m(r, c) && (c == 0 || m(r, c - 1)) && (c + 1 == cols || m(r, c + 1));
      horiz(r, c) = v ? 1 : 0;
    }
  }
  BitMask out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      bool v = horiz(r, c) && (r == 0 || horiz(r - 1, c)) && (r + 1 == rows || horiz(r + 1, c));
      out(r, c) = v ? 1 : 0;
    }
  }
  return out;
}

BitMask morph_close(const BitMask& m) { return erode3(dilate3(m)); }

// ---- components -----------------------------------------------------------

Labeling label_components(const BitMask& m) {
  Labeling lab;
  lab.labels = Grid<int>(m.rows(), m.cols(), -1);
  std::deque<std::pair<int, int>> queue;
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      if (!m(r, c) || lab.labels(r, c) >= 0) continue;
      const int id = lab.count++;
      std::size_t area = 0;
      lab.labels(r, c) = id;
      queue.emplace_back(r, c);
      while (!queue.empty()) {
        auto [qr, qc] = queue.front();
        queue.pop_front();
        ++area;
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const int nr = qr + dr, nc = qc + dc;
            if (!m.in_bounds(nr, nc) || !m(nr, nc) || lab.labels(nr, nc) >= 0) continue;
            lab.labels(nr, nc) = id;
            queue.emplace_back(nr, nc);
          }
        }
      }
      lab.areas.push_back(area);
    }
  }
  return lab;
}

BitMask component_mask(const Labeling& lab, int index) {
  BitMask out(lab.labels.rows(), lab.labels.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = lab.labels.data()[i] == index ? 1 : 0;
  return out;
}

std::vector<BitMask> connected_components(const BitMask& m) {
  const Labeling lab = label_components(m);
  std::vector<BitMask> out;
  out.reserve(static_cast<std::size_t>(lab.count));
  for (int i = 0; i < lab.count; ++i) out.push_back(component_mask(lab, i));
  return out;
}

int largest_component(const Labeling& lab) {
  int best = -1;
  for (int i = 0; i < lab.count; ++i) {
    if (best < 0 || lab.areas[i] > lab.areas[best]) best = i;
  }
  return best;
}

// ---- contours -------------------------------------------------------------

namespace {

struct Dir {
  int dx, dy;
};

constexpr Dir kDirs[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};  // R D L U

bool pixel_at(const BitMask& m, int row, int col) { return m.in_bounds(row, col) && m(row, col); }

// Pixels to the left and right of the unit edge leaving corner (x, y) along d.
std::pair<bool, bool> edge_sides(const BitMask& m, int x, int y, int d) {
  switch (d) {
    case 0: return {pixel_at(m, y - 1, x), pixel_at(m, y, x)};
    case 1: return {pixel_at(m, y, x), pixel_at(m, y, x - 1)};
    case 2: return {pixel_at(m, y, x - 1), pixel_at(m, y - 1, x - 1)};
    default: return {pixel_at(m, y - 1, x - 1), pixel_at(m, y - 1, x)};
  }
}

constexpr double kPinchChamfer = 0.25;

std::vector<Point> merge_collinear(std::vector<Point> pts) {
  bool changed = true;
  while (changed && pts.size() > 3) {
    changed = false;
    std::vector<Point> out;
    const std::size_t n = pts.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Point& prev = pts[(i + n - 1) % n];
      const Point& cur = pts[i];
      const Point& next = pts[(i + 1) % n];
      const double cr = cross(prev, cur, next);
      const double dot = (cur.x - prev.x) * (next.x - cur.x) + (cur.y - prev.y) * (next.y - cur.y);
      if (std::abs(cr) < 1e-9 && dot > 0.0) {
        changed = true;
        continue;
      }
      out.push_back(cur);
    }
    pts = std::move(out);
  }
  return pts;
}

}  // namespace

Polygon trace_contour(const BitMask& m) {
  int sr = -1, sc = -1;
  for (int r = 0; r < m.rows() && sr < 0; ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      if (m(r, c)) {
        sr = r;
        sc = c;
        break;
      }
    }
  }
  if (sr < 0) throw Error(ErrorCode::kEmptyMask, "trace_contour: mask has no set pixel");

  // Walk pixel edges with the region on the right-hand side.
  std::vector<Point> pts;
  int x = sc, y = sr, d = 0;
  const int start_x = x, start_y = y;
  do {
    x += kDirs[d].dx;
    y += kDirs[d].dy;
    const auto [ahead_left, ahead_right] = edge_sides(m, x, y, d);
    if (ahead_left) {
      const int nd = (d + 3) % 4;
      if (!ahead_right) {
        // Diagonal pinch: two passes meet here, cut the corner on each pass.
        pts.push_back(Point{x - kDirs[d].dx * kPinchChamfer, y - kDirs[d].dy * kPinchChamfer});
        pts.push_back(Point{x + kDirs[nd].dx * kPinchChamfer, y + kDirs[nd].dy * kPinchChamfer});
      } else {
        pts.push_back(Point{static_cast<double>(x), static_cast<double>(y)});
      }
      d = nd;
    } else if (!ahead_right) {
      pts.push_back(Point{static_cast<double>(x), static_cast<double>(y)});
      d = (d + 1) % 4;
    }
  } while (!(x == start_x && y == start_y && d == 0));

  return Polygon{merge_collinear(std::move(pts))};
}

bool segments_intersect(Point a, Point b, Point c, Point d) {
  auto on_segment = [](Point p, Point q, Point r) {
    return std::min(p.x, q.x) - 1e-12 <= r.x && r.x <= std::max(p.x, q.x) + 1e-12 &&
           std::min(p.y, q.y) - 1e-12 <= r.y && r.y <= std::max(p.y, q.y) + 1e-12;
  };
  const double d1 = cross(c, d, a);
  const double d2 = cross(c, d, b);
  const double d3 = cross(a, b, c);
  const double d4 = cross(a, b, d);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
    return true;
  }
  if (d1 == 0 && on_segment(c, d, a)) return true;
  if (d2 == 0 && on_segment(c, d, b)) return true;
  if (d3 == 0 && on_segment(a, b, c)) return true;
  if (d4 == 0 && on_segment(a, b, d)) return true;
  return false;
}

bool is_simple(const Polygon& p) {
  const auto& v = p.vertices;
  const std::size_t n = v.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Point a = v[i], b = v[(i + 1) % n];
    if (a == b) return false;
    // Adjacent edge folding back onto this one.
    const Point c = v[(i + 2) % n];
    if (std::abs(cross(a, b, c)) < 1e-12 &&
        (c.x - b.x) * (b.x - a.x) + (c.y - b.y) * (b.y - a.y) < 0.0) {
      return false;
    }
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;
      if (segments_intersect(a, b, v[j], v[(j + 1) % n])) return false;
    }
  }
  return true;
}

double polygon_iou(const Polygon& a, const Polygon& b) {
  if (a.size() < 3 || b.size() < 3) return 0.0;
  double minx = a.vertices[0].x, maxx = minx, miny = a.vertices[0].y, maxy = miny;
  for (const auto* poly : {&a, &b}) {
    for (const auto& p : poly->vertices) {
      minx = std::min(minx, p.x);
      maxx = std::max(maxx, p.x);
      miny = std::min(miny, p.y);
      maxy = std::max(maxy, p.y);
    }
  }
  constexpr double kStep = 0.5;
  const double x0 = std::floor(minx), y0 = std::floor(miny);
  const int cols = static_cast<int>(std::ceil((std::ceil(maxx) - x0) / kStep));
  const int rows = static_cast<int>(std::ceil((std::ceil(maxy) - y0) / kStep));
  if (rows <= 0 || cols <= 0) return 0.0;
  BitMask ma(rows, cols), mb(rows, cols);
  scan_polygon(a, x0, y0, kStep, rows, cols, [&](int r, int c) { ma(r, c) = 1; });
  scan_polygon(b, x0, y0, kStep, rows, cols, [&](int r, int c) { mb(r, c) = 1; });
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < ma.size(); ++i) {
    inter += (ma.data()[i] && mb.data()[i]) ? 1 : 0;
    uni += (ma.data()[i] || mb.data()[i]) ? 1 : 0;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

Polygon to_polygon(const RotRect& r) {
  const auto cs = corners(r);
  return Polygon{std::vector<Point>(cs.begin(), cs.end())};
}

}  // namespace segtext
