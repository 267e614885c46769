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

#include "segtext/proposal.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "segtext/error.hpp"

namespace segtext {

std::string_view segment_type_name(SegmentType t) {
  switch (t) {
    case SegmentType::kChar: return "char";
    case SegmentType::kInterval: return "interval";
    case SegmentType::kNonText: return "nontext";
    case SegmentType::kUnlabeled: return "unlabeled";
  }
  return "unlabeled";
}

SegmentType parse_segment_type(std::string_view name) {
  if (name == "char") return SegmentType::kChar;
  if (name == "interval") return SegmentType::kInterval;
  if (name == "nontext") return SegmentType::kNonText;
  if (name == "unlabeled") return SegmentType::kUnlabeled;
  throw Error(ErrorCode::kParse, "unknown segment type '" + std::string(name) + "'");
}

double clip_width(double h, WidthBand band) {
  return std::clamp(std::round(h / 4.0), band.lo, band.hi);
}

double mean_over(const ScalarGrid& grid, const RotRect& rect) {
  double sum = 0.0;
  std::size_t n = 0;
  for_each_pixel(rect, grid.rows(), grid.cols(), [&](int r, int c) {
    sum += grid(r, c);
    ++n;
  });
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

std::optional<std::pair<int, int>> pixel_of(Point p, int rows, int cols) {
  const int r = static_cast<int>(std::floor(p.y));
  const int c = static_cast<int>(std::floor(p.x));
  if (r < 0 || c < 0 || r >= rows || c >= cols) return std::nullopt;
  return std::make_pair(r, c);
}

namespace {

// Nearest pixel carrying geometry, searched ring by ring.
std::optional<std::pair<int, int>> geometry_source(const TextMaps& maps, int r, int c, int radius) {
  if (maps.h(r, c) > 0.0) return std::make_pair(r, c);
  for (int k = 1; k <= radius; ++k) {
    double best = 1e300;
    std::optional<std::pair<int, int>> found;
    for (int dr = -k; dr <= k; ++dr) {
      for (int dc = -k; dc <= k; ++dc) {
        if (std::max(std::abs(dr), std::abs(dc)) != k) continue;
        const int rr = r + dr, cc = c + dc;
        if (!maps.h.in_bounds(rr, cc) || maps.h(rr, cc) <= 0.0) continue;
        const double d = dr * dr + dc * dc;
        if (d < best) {
          best = d;
          found = std::make_pair(rr, cc);
        }
      }
    }
    if (found) return found;
  }
  return std::nullopt;
}

}  // namespace

std::vector<TextSegment> propose_segments(const TextMaps& maps, const ProposalConfig& config,
                                          const BitMask* region) {
  std::vector<RotRect> rects;
  std::vector<double> scores;
  for (int r = 0; r < maps.rows(); ++r) {
    for (int c = 0; c < maps.cols(); ++c) {
      if (region && !(*region)(r, c)) continue;
      if (!(maps.tcl(r, c) > config.tcl_threshold)) continue;
      const auto src = geometry_source(maps, r, c, config.geometry_search_radius);
      if (!src) continue;
      const double h = maps.h(src->first, src->second);
      const RotRect rect = RotRect::make(c + 0.5, r + 0.5, h, clip_width(h, config.width),
                                         maps.theta(src->first, src->second));
      rects.push_back(rect);
      scores.push_back(mean_over(maps.tcl, rect));
    }
  }
  const auto kept = nms(rects, scores, config.nms_iou);
  std::vector<TextSegment> out;
  out.reserve(kept.size());
  for (std::size_t k : kept) out.push_back(TextSegment{rects[k], scores[k]});
  return out;
}

void borrow_geometry(TextMaps& maps, const BitMask& pixels, int radius) {
  const TextMaps source = maps;
  for (int r = 0; r < maps.rows(); ++r) {
    for (int c = 0; c < maps.cols(); ++c) {
      if (!pixels(r, c) || source.h(r, c) > 0.0) continue;
      const auto src = geometry_source(source, r, c, radius);
      if (!src) continue;
      maps.h(r, c) = source.h(src->first, src->second);
      maps.w(r, c) = source.w(src->first, src->second);
      maps.theta(r, c) = source.theta(src->first, src->second);
    }
  }
}

std::vector<std::size_t> nearest_non_char(std::span<const TextSegment> segments,
                                          const std::vector<bool>& is_char) {
  // Bucketed search; candidates per cell are kept in increasing index order.
  constexpr double kCell = 8.0;
  auto cell_of = [](double v) { return static_cast<long long>(std::floor(v / kCell)); };
  auto key = [](long long x, long long y) { return (x << 32) ^ (y & 0xffffffffLL); };
  std::unordered_map<long long, std::vector<std::size_t>> buckets;
  long long min_x = 0, max_x = 0, min_y = 0, max_y = 0;
  bool have = false;
  for (std::size_t j = 0; j < segments.size(); ++j) {
    if (is_char[j]) continue;
    const long long cx = cell_of(segments[j].rect.cx), cy = cell_of(segments[j].rect.cy);
    buckets[key(cx, cy)].push_back(j);
    if (!have) {
      min_x = max_x = cx;
      min_y = max_y = cy;
      have = true;
    }
    min_x = std::min(min_x, cx);
    max_x = std::max(max_x, cx);
    min_y = std::min(min_y, cy);
    max_y = std::max(max_y, cy);
  }

  std::vector<std::size_t> partner(segments.size(), segments.size());
  if (!have) return partner;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (!is_char[i]) continue;
    const double x = segments[i].rect.cx, y = segments[i].rect.cy;
    const long long cx = cell_of(x), cy = cell_of(y);
    const long long reach = std::max({std::abs(cx - min_x), std::abs(cx - max_x),
                                      std::abs(cy - min_y), std::abs(cy - max_y)});
    double best = 1e300;
    std::size_t best_j = segments.size();
    for (long long k = 0; k <= reach; ++k) {
      if (best_j != segments.size()) {
        const double bound = (k - 1) * kCell;
        if (bound > 0.0 && bound * bound > best) break;
      }
      for (long long dy = -k; dy <= k; ++dy) {
        for (long long dx = -k; dx <= k; ++dx) {
          if (std::max(std::abs(dx), std::abs(dy)) != k) continue;
          auto it = buckets.find(key(cx + dx, cy + dy));
          if (it == buckets.end()) continue;
          for (std::size_t j : it->second) {
            const double ddx = segments[j].rect.cx - x, ddy = segments[j].rect.cy - y;
            const double d = ddx * ddx + ddy * ddy;
            if (d < best || (d == best && j < best_j)) {
              best = d;
              best_j = j;
            }
          }
        }
      }
    }
    partner[i] = best_j;
  }
  return partner;
}

Annotation annotate_segments(std::span<const TextSegment> segments, const SceneTruth& truth,
                             Rng& rng, const AnnotationConfig& config) {
  const int rows = truth.maps.rows(), cols = truth.maps.cols();
  const std::size_t n = segments.size();
  if (n > 0 && !any_set(truth.char_union)) {
    throw Error(ErrorCode::kNoCharSegments, "annotation needs a non-empty char union");
  }

  Annotation out;
  out.proposed = n;
  out.segments.assign(segments.begin(), segments.end());
  const auto masks = instance_masks(truth);

  std::vector<bool> is_char(n, false);
  std::vector<bool> inside_tr(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    TextSegment& s = out.segments[i];
    s.type = SegmentType::kUnlabeled;
    s.instance = -1;
    const auto px = pixel_of(s.center(), rows, cols);
    if (!px) continue;
    const auto [r, c] = *px;
    for (std::size_t k = 0; k < masks.size(); ++k) {
      if (masks[k](r, c)) {
        s.instance = truth.instances[k].id;
        break;
      }
    }
    is_char[i] = truth.char_union(r, c) != 0;
    inside_tr[i] = truth.maps.tr(r, c) != 0;
  }

  const auto partner = nearest_non_char(out.segments, is_char);

  for (std::size_t i = 0; i < n; ++i) {
    if (is_char[i]) out.segments[i].type = SegmentType::kChar;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (is_char[i] && partner[i] < n) out.segments[partner[i]].type = SegmentType::kInterval;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (out.segments[i].type == SegmentType::kUnlabeled && !inside_tr[i]) {
      out.segments[i].type = SegmentType::kNonText;
    }
  }

  // Synthesised non-text samples.
  std::vector<std::size_t> donors;
  for (std::size_t i = 0; i < n; ++i) {
    const auto t = out.segments[i].type;
    if (t == SegmentType::kChar || t == SegmentType::kInterval) donors.push_back(i);
  }
  if (donors.empty()) {
    for (std::size_t i = 0; i < n; ++i) donors.push_back(i);
  }
  std::vector<std::pair<int, int>> background;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (!truth.maps.tr(r, c)) background.emplace_back(r, c);
    }
  }
  if (!donors.empty() && !background.empty()) {
    const auto count = static_cast<std::size_t>(std::max<double>(
        config.min_nontext, std::ceil(config.nontext_fraction * static_cast<double>(n))));
    for (std::size_t k = 0; k < count; ++k) {
      const auto [r, c] = background[rng.index(background.size())];
      const RotRect& g = segments[donors[rng.index(donors.size())]].rect;
      TextSegment s;
      s.rect = RotRect::make(c + 0.5, r + 0.5, g.h, g.w, g.theta);
      s.score = mean_over(truth.maps.tcl, s.rect);
      s.type = SegmentType::kNonText;
      out.segments.push_back(s);
    }
  }

  out.labels.types.reserve(out.segments.size());
  for (const auto& s : out.segments) {
    out.labels.types.push_back(s.type);
    out.labels.accepted.push_back(s.type != SegmentType::kUnlabeled);
  }
  return out;
}

SegmentLabels weak_label_filter(std::span<const TextSegment> segments,
                                std::span<const SegmentType> predicted, const BitMask& tr) {
  SegmentLabels out;
  out.types.resize(segments.size(), SegmentType::kUnlabeled);
  out.accepted.resize(segments.size(), false);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto px = pixel_of(segments[i].center(), tr.rows(), tr.cols());
    const bool inside = px && tr(px->first, px->second);
    const SegmentType p = predicted[i];
    const bool ok = ((p == SegmentType::kChar || p == SegmentType::kInterval) && inside) ||
                    (p == SegmentType::kNonText && !inside);
    if (ok) {
      out.types[i] = p;
      out.accepted[i] = true;
    }
  }
  return out;
}

}  // namespace segtext
