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

#include "segtext/scene.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "segtext/error.hpp"
#include "segtext/proposal.hpp"
#include "segtext/random.hpp"

namespace segtext {

namespace {

double param(const SpineSpec& s, const std::string& key) {
  auto it = s.params.find(key);
  if (it == s.params.end()) {
    throw Error(ErrorCode::kInvalidSpec,
                "spine '" + std::string(family_name(s.family)) + "' needs parameter '" + key + "'");
  }
  return it->second;
}

double param(const SpineSpec& s, const std::string& key, double fallback) {
  auto it = s.params.find(key);
  return it == s.params.end() ? fallback : it->second;
}

double instance_height(const SpineSpec& s) { return s.char_h + 2.0 * kInstancePad; }

double text_length(const SpineSpec& s) {
  double len = s.chars * s.char_w;
  for (int j = 0; j + 1 < s.chars; ++j) {
    const bool word_end = s.word_len > 0 && (j + 1) % s.word_len == 0;
    len += word_end ? s.word_gap : s.char_gap;
  }
  return len;
}

void validate(const SpineSpec& s) {
  if (s.chars < 1) throw Error(ErrorCode::kInvalidSpec, "instance needs at least one char");
  if (s.char_h < 8.0) throw Error(ErrorCode::kInvalidSpec, "char height must be >= 8 px");
  if (s.char_w <= 0.0) throw Error(ErrorCode::kInvalidSpec, "char width must be positive");
  if (s.char_gap < 1.0 || s.word_gap < 1.0) {
    throw Error(ErrorCode::kInvalidSpec, "char and word gaps must be >= 1 px");
  }
  const double hp = instance_height(s);
  double min_radius = 1e300;
  switch (s.family) {
    case SpineFamily::kLine: break;
    case SpineFamily::kArc: min_radius = param(s, "radius"); break;
    case SpineFamily::kSine: {
      const double k = 2.0 * M_PI / param(s, "wavelength");
      const double curvature = std::abs(param(s, "amplitude")) * k * k;
      if (curvature > 0.0) min_radius = 1.0 / curvature;
      break;
    }
    case SpineFamily::kSpiral: min_radius = param(s, "r0"); break;
  }
  if (min_radius < hp) {
    throw Error(ErrorCode::kInvalidSpec, "spine curvature radius below the instance height");
  }
}

}  // namespace

std::string_view family_name(SpineFamily f) {
  switch (f) {
    case SpineFamily::kLine: return "line";
    case SpineFamily::kArc: return "arc";
    case SpineFamily::kSine: return "sine";
    case SpineFamily::kSpiral: return "spiral";
  }
  return "line";
}

SpineFamily parse_family(std::string_view name) {
  if (name == "line") return SpineFamily::kLine;
  if (name == "arc") return SpineFamily::kArc;
  if (name == "sine") return SpineFamily::kSine;
  if (name == "spiral") return SpineFamily::kSpiral;
  throw Error(ErrorCode::kInvalidSpec, "unknown spine family '" + std::string(name) + "'");
}

// ---- spine ----------------------------------------------------------------

Spine::Spine(std::vector<Point> samples) : samples_(std::move(samples)) {
  const std::size_t n = samples_.size();
  directions_.resize(n, 0.0);
  for (std::size_t i = 0; i < n && n > 1; ++i) {
    const Point& a = samples_[i == 0 ? 0 : i - 1];
    const Point& b = samples_[i + 1 == n ? n - 1 : i + 1];
    directions_[i] = std::atan2(b.y - a.y, b.x - a.x);
  }
}

Point Spine::point(double s) const {
  if (samples_.empty()) return {};
  const double t = std::clamp(s / kStep, 0.0, static_cast<double>(samples_.size() - 1));
  const std::size_t i = std::min(static_cast<std::size_t>(t), samples_.size() - 1);
  if (i + 1 >= samples_.size()) return samples_.back();
  const double f = t - static_cast<double>(i);
  return Point{samples_[i].x + f * (samples_[i + 1].x - samples_[i].x),
               samples_[i].y + f * (samples_[i + 1].y - samples_[i].y)};
}

double Spine::direction(double s) const {
  if (samples_.size() < 2) return 0.0;
  const double t = std::clamp(s / kStep, 0.0, static_cast<double>(samples_.size() - 1));
  const std::size_t i = std::min(static_cast<std::size_t>(t), samples_.size() - 2);
  return std::atan2(samples_[i + 1].y - samples_[i].y, samples_[i + 1].x - samples_[i].x);
}

Spine build_spine(const SpineSpec& spec, double length) {
  std::function<Point(double)> curve;
  double dtau = 0.02;
  switch (spec.family) {
    case SpineFamily::kLine: {
      const double x0 = param(spec, "x0"), y0 = param(spec, "y0"), a = param(spec, "angle");
      curve = [=](double t) { return Point{x0 + t * std::cos(a), y0 + t * std::sin(a)}; };
      break;
    }
    case SpineFamily::kArc: {
      const double cx = param(spec, "cx"), cy = param(spec, "cy"), r = param(spec, "radius");
      const double start = param(spec, "start"), dir = param(spec, "dir", 1.0) >= 0 ? 1.0 : -1.0;
      curve = [=](double t) {
        const double phi = start + dir * t / r;
        return Point{cx + r * std::cos(phi), cy + r * std::sin(phi)};
      };
      break;
    }
    case SpineFamily::kSine: {
      const double x0 = param(spec, "x0"), y0 = param(spec, "y0"), a = param(spec, "angle");
      const double amp = param(spec, "amplitude"), lambda = param(spec, "wavelength");
      const double phase = param(spec, "phase", 0.0);
      curve = [=](double t) {
        const double off = amp * std::sin(2.0 * M_PI * t / lambda + phase);
        return Point{x0 + t * std::cos(a) - off * std::sin(a), y0 + t * std::sin(a) + off * std::cos(a)};
      };
      break;
    }
    case SpineFamily::kSpiral: {
      const double cx = param(spec, "cx"), cy = param(spec, "cy"), r0 = param(spec, "r0");
      const double g = param(spec, "growth"), start = param(spec, "start");
      const double dir = param(spec, "dir", 1.0) >= 0 ? 1.0 : -1.0;
      curve = [=](double phi) {
        const double r = r0 + g * phi;
        return Point{cx + r * std::cos(start + dir * phi), cy + r * std::sin(start + dir * phi)};
      };
      dtau = 0.02 / std::max(1.0, r0);
      break;
    }
  }

  // Dense walk, then resample at uniform arc length.
  const std::size_t n = static_cast<std::size_t>(std::ceil(length / Spine::kStep)) + 1;
  std::vector<Point> out;
  out.reserve(n);
  Point prev = curve(0.0);
  out.push_back(prev);
  double tau = 0.0, arc = 0.0, next_s = Spine::kStep;
  std::size_t guard = 0;
  while (out.size() < n) {
    tau += dtau;
    const Point cur = curve(tau);
    const double seg = std::hypot(cur.x - prev.x, cur.y - prev.y);
    while (seg > 0.0 && arc + seg >= next_s && out.size() < n) {
      const double f = (next_s - arc) / seg;
      out.push_back(Point{prev.x + f * (cur.x - prev.x), prev.y + f * (cur.y - prev.y)});
      next_s += Spine::kStep;
    }
    arc += seg;
    prev = cur;
    if (++guard > 100000000) throw Error(ErrorCode::kInvalidSpec, "spine failed to advance");
  }
  return Spine(std::move(out));
}

TextMaps empty_maps(int rows, int cols) {
  return TextMaps{ScalarGrid(rows, cols), ScalarGrid(rows, cols), ScalarGrid(rows, cols),
                  ScalarGrid(rows, cols), BitMask(rows, cols)};
}

SpineProximity spine_proximity(const Spine& spine, double radius, int rows, int cols) {
  SpineProximity prox{Grid<int>(rows, cols, -1), ScalarGrid(rows, cols, 1e300)};
  const auto& pts = spine.samples();
  const double r2 = radius * radius;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const Point p = pts[k];
    const int r0 = std::max(0, static_cast<int>(std::floor(p.y - radius - 0.5)));
    const int r1 = std::min(rows - 1, static_cast<int>(std::ceil(p.y + radius - 0.5)));
    const int c0 = std::max(0, static_cast<int>(std::floor(p.x - radius - 0.5)));
    const int c1 = std::min(cols - 1, static_cast<int>(std::ceil(p.x + radius - 0.5)));
    for (int r = r0; r <= r1; ++r) {
      const double dy = r + 0.5 - p.y;
      for (int c = c0; c <= c1; ++c) {
        const double dx = c + 0.5 - p.x;
        const double d2 = dx * dx + dy * dy;
        if (d2 <= r2 && d2 < prox.distance(r, c)) {
          prox.distance(r, c) = d2;
          prox.nearest(r, c) = static_cast<int>(k);
        }
      }
    }
  }
  for (auto& d : prox.distance.data()) d = d >= 1e300 ? d : std::sqrt(d);
  return prox;
}

namespace {

Polygon band_polygon(const Spine& spine, double half_height) {
  const double len = spine.length();
  std::vector<double> stations;
  for (double s = 0.0; s < len; s += 2.0) stations.push_back(s);
  stations.push_back(len);
  std::vector<Point> top, bottom;
  for (double s : stations) {
    const Point p = spine.point(s);
    const double d = spine.direction(s);
    const double nx = -std::sin(d), ny = std::cos(d);
    top.push_back(Point{p.x - nx * half_height, p.y - ny * half_height});
    bottom.push_back(Point{p.x + nx * half_height, p.y + ny * half_height});
  }
  Polygon poly;
  poly.vertices = top;
  poly.vertices.insert(poly.vertices.end(), bottom.rbegin(), bottom.rend());
  if (signed_area(poly.vertices) < 0.0) std::reverse(poly.vertices.begin(), poly.vertices.end());
  return poly;
}

struct Stroke {
  RotRect body;
  RotRect core;
};

std::vector<Stroke> distractor_strokes(const DistractorSpec& d) {
  const double t = std::max(3.0, std::round(d.size / 6.0));
  const double ux = std::cos(d.angle), uy = std::sin(d.angle);
  const double nx = -uy, ny = ux;
  const double half = d.size / 2.0;
  std::vector<std::pair<Point, double>> axes;  // centre, angle
  switch (d.shape) {
    case DistractorShape::kPlus:
      axes = {{{d.cx, d.cy}, d.angle}, {{d.cx, d.cy}, d.angle + M_PI / 2}};
      break;
    case DistractorShape::kTee:
      axes = {{{d.cx - nx * half, d.cy - ny * half}, d.angle}, {{d.cx, d.cy}, d.angle + M_PI / 2}};
      break;
    case DistractorShape::kEll:
      axes = {{{d.cx + nx * half, d.cy + ny * half}, d.angle},
              {{d.cx - ux * half, d.cy - uy * half}, d.angle + M_PI / 2}};
      break;
    case DistractorShape::kVee:
      axes = {{{d.cx - ux * d.size / 4, d.cy - uy * d.size / 4}, d.angle + M_PI / 3},
              {{d.cx + ux * d.size / 4, d.cy + uy * d.size / 4}, d.angle - M_PI / 3}};
      break;
  }
  std::vector<Stroke> out;
  for (const auto& [c, a] : axes) {
    out.push_back(Stroke{RotRect::make(c.x, c.y, t, d.size, a),
                         RotRect::make(c.x, c.y, std::max(1.0, 0.5 * t), std::max(1.0, d.size - t), a)});
  }
  return out;
}

double distractor_radius(const DistractorSpec& d) { return 0.75 * d.size + 4.0; }

void paint_distractor(TextMaps& maps, const DistractorSpec& d) {
  const double height = d.height > 0.0 ? d.height : d.size;
  for (const Stroke& s : distractor_strokes(d)) {
    for_each_pixel(s.body, maps.rows(), maps.cols(), [&](int r, int c) { maps.tr(r, c) = 1; });
    for_each_pixel(s.core, maps.rows(), maps.cols(), [&](int r, int c) {
      maps.tcl(r, c) = std::max(maps.tcl(r, c), 0.85);
      maps.h(r, c) = height;
      maps.w(r, c) = clip_width(height);
      maps.theta(r, c) = s.core.theta;
    });
  }
}

bool fits(const DistractorSpec& d, int rows, int cols) {
  const double r = distractor_radius(d);
  return d.cx - r >= 0 && d.cy - r >= 0 && d.cx + r <= cols && d.cy + r <= rows;
}

bool clear_of(const DistractorSpec& d, const BitMask& occupied) {
  const double r = distractor_radius(d) + 4.0;
  const int r0 = std::max(0, static_cast<int>(d.cy - r)), r1 = std::min(occupied.rows() - 1, static_cast<int>(d.cy + r));
  const int c0 = std::max(0, static_cast<int>(d.cx - r)), c1 = std::min(occupied.cols() - 1, static_cast<int>(d.cx + r));
  for (int y = r0; y <= r1; ++y) {
    for (int x = c0; x <= c1; ++x) {
      if (occupied(y, x) && std::hypot(x + 0.5 - d.cx, y + 0.5 - d.cy) <= r) return false;
    }
  }
  return true;
}

}  // namespace

SceneTruth generate_scene(const SceneSpec& spec) {
  if (spec.rows <= 0 || spec.cols <= 0) throw Error(ErrorCode::kInvalidSpec, "canvas must be non-empty");
  if (!(spec.shrink > 0.0 && spec.shrink < 1.0)) {
    throw Error(ErrorCode::kInvalidSpec, "shrink factor must lie in (0, 1)");
  }
  SceneTruth truth;
  truth.maps = empty_maps(spec.rows, spec.cols);
  truth.char_union = BitMask(spec.rows, spec.cols);

  int char_id = 0;
  for (std::size_t i = 0; i < spec.instances.size(); ++i) {
    const SpineSpec& s = spec.instances[i];
    validate(s);
    const double hp = instance_height(s);
    const double length = text_length(s) + 2.0 * kInstancePad;

    InstanceTruth inst;
    inst.id = static_cast<int>(i);
    inst.height = hp;
    inst.spine = build_spine(s, length);
    inst.polygon = band_polygon(inst.spine, hp / 2.0);
    for (const auto& v : inst.polygon.vertices) {
      if (v.x < 0.0 || v.y < 0.0 || v.x > spec.cols || v.y > spec.rows) {
        throw Error(ErrorCode::kSpecOverflow,
                    "instance " + std::to_string(i) + " leaves the " + std::to_string(spec.cols) +
                        "x" + std::to_string(spec.rows) + " canvas");
      }
    }

    double pos = kInstancePad;
    for (int j = 0; j < s.chars; ++j) {
      const double centre = pos + s.char_w / 2.0;
      const Point p = inst.spine.point(centre);
      CharBox cb{char_id++, inst.id,
                 RotRect::make(p.x, p.y, s.char_h, s.char_w, inst.spine.direction(centre))};
      paint(truth.char_union, cb.box);
      truth.chars.push_back(cb);
      const bool word_end = s.word_len > 0 && (j + 1) % s.word_len == 0;
      pos += s.char_w + (word_end ? s.word_gap : s.char_gap);
    }

    const BitMask mask = rasterize(inst.polygon, spec.rows, spec.cols);
    const SpineProximity prox = spine_proximity(inst.spine, hp / 2.0 + 2.0, spec.rows, spec.cols);
    const double band = spec.shrink * hp / 2.0;
    TextMaps& m = truth.maps;
    for (int r = 0; r < spec.rows; ++r) {
      for (int c = 0; c < spec.cols; ++c) {
        if (!mask(r, c)) continue;
        m.tr(r, c) = 1;
        const int k = prox.nearest(r, c);
        if (k < 0) continue;
        const double d = prox.distance(r, c);
        if (d > band) continue;
        const double value = 1.0 - d / band;
        if (value <= m.tcl(r, c)) continue;
        m.tcl(r, c) = value;
        m.h(r, c) = hp;
        m.w(r, c) = clip_width(hp);
        m.theta(r, c) = normalize_angle(inst.spine.direction_at(static_cast<std::size_t>(k)));
      }
    }
    truth.instances.push_back(std::move(inst));
  }

  for (const auto& d : spec.distractors) {
    if (!fits(d, spec.rows, spec.cols)) {
      throw Error(ErrorCode::kSpecOverflow, "distractor leaves the canvas");
    }
    truth.distractors.push_back(d);
  }
  return truth;
}

BitMask shrink_region(const InstanceTruth& inst, double factor, int rows, int cols) {
  if (inst.spine.empty()) throw Error(ErrorCode::kInvalidSpec, "shrink_region needs the instance spine");
  const BitMask mask = rasterize(inst.polygon, rows, cols);
  const SpineProximity prox = spine_proximity(inst.spine, inst.height / 2.0 + 2.0, rows, cols);
  const double band = factor * inst.height / 2.0;
  BitMask out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (mask(r, c) && prox.nearest(r, c) >= 0 && prox.distance(r, c) <= band) out(r, c) = 1;
    }
  }
  return out;
}

std::vector<BitMask> instance_masks(const SceneTruth& truth) {
  std::vector<BitMask> out;
  out.reserve(truth.instances.size());
  for (const auto& inst : truth.instances) {
    out.push_back(rasterize(inst.polygon, truth.maps.rows(), truth.maps.cols()));
  }
  return out;
}

FaultedMaps inject_faults(const SceneTruth& truth, const FaultSpec& faults) {
  const int rows = truth.maps.rows(), cols = truth.maps.cols();
  FaultedMaps out{truth.maps, ScalarGrid(rows, cols)};
  Rng rng(faults.seed);

  // GGTR stand-in from the clean text region.
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (!faults.ggtr_noise) {
        out.ggtr(r, c) = truth.maps.tr(r, c) ? 1.0 : 0.0;
        continue;
      }
      double acc = 0.0;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (truth.maps.tr.in_bounds(r + dr, c + dc) && truth.maps.tr(r + dr, c + dc)) acc += 1.0;
        }
      }
      out.ggtr(r, c) = std::clamp(acc / 9.0 + faults.ggtr_noise_sigma * rng.normal(), 0.0, 1.0);
    }
  }

  TextMaps& m = out.maps;
  for (const SplitFault& split : faults.splits) {
    if (split.instance < 0 || split.instance >= static_cast<int>(truth.instances.size())) {
      throw Error(ErrorCode::kInvalidSpec, "split refers to unknown instance");
    }
    const InstanceTruth& inst = truth.instances[static_cast<std::size_t>(split.instance)];
    if (inst.spine.empty()) throw Error(ErrorCode::kInvalidSpec, "split needs the instance spine");
    if (!(split.gap > 0.0 && split.gap < inst.spine.length())) {
      throw Error(ErrorCode::kInvalidSpec, "split gap must be shorter than the spine");
    }
    const double s = std::clamp(split.position, 0.0, 1.0) * inst.spine.length();
    const Point p = inst.spine.point(s);
    const RotRect cut = RotRect::make(p.x, p.y, inst.height + 4.0, split.gap, inst.spine.direction(s));
    const BitMask mask = rasterize(inst.polygon, rows, cols);
    for_each_pixel(cut, rows, cols, [&](int r, int c) {
      if (!mask(r, c)) return;
      m.tcl(r, c) = m.h(r, c) = m.w(r, c) = m.theta(r, c) = 0.0;
      m.tr(r, c) = 0;
    });
  }

  if (faults.distractors > 0) {
    std::vector<DistractorSpec> placed;
    BitMask occupied = truth.maps.tr;
    double typical_height = 0.0;
    for (const auto& inst : truth.instances) typical_height += inst.height;
    typical_height = truth.instances.empty() ? 20.0 : typical_height / truth.instances.size();

    auto occupy = [&](const DistractorSpec& d) {
      for (const Stroke& s : distractor_strokes(d)) paint(occupied, s.body);
      placed.push_back(d);
    };
    for (const auto& d : truth.distractors) {
      if (static_cast<int>(placed.size()) >= faults.distractors) break;
      occupy(d);
    }
    int attempts = 0;
    while (static_cast<int>(placed.size()) < faults.distractors && attempts++ < 2000) {
      DistractorSpec d;
      d.size = rng.uniform(14.0, 26.0);
      d.angle = rng.uniform(0.0, M_PI);
      d.shape = static_cast<DistractorShape>(rng.index(4));
      d.height = typical_height;
      const double r = distractor_radius(d);
      if (cols <= 2 * r || rows <= 2 * r) break;
      d.cx = rng.uniform(r, cols - r);
      d.cy = rng.uniform(r, rows - r);
      if (!clear_of(d, occupied)) continue;
      occupy(d);
    }
    for (const auto& d : placed) paint_distractor(m, d);
  }
  return out;
}

}  // namespace segtext
