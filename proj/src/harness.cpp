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

#include "segtext/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <tuple>

#include "nn.hpp"
#include "segtext/error.hpp"

namespace segtext {

CorpusConfig training_corpus(std::uint64_t seed, int count) {
  CorpusConfig c;
  c.count = count;
  c.seed = seed;
  c.char_h_hi = 22.0;
  c.min_distractors = 1;
  c.max_distractors = 3;
  c.ggtr_noise = false;
  return c;
}

CorpusConfig ablation_corpus(std::uint64_t seed, int count) {
  CorpusConfig c;
  c.count = count;
  c.seed = seed;
  c.rows = 512;
  c.cols = 512;
  c.min_instances = 3;
  c.max_instances = 5;
  c.char_h_lo = 12.0;
  c.char_h_hi = 22.0;
  c.fault_fraction = 0.4;
  return c;
}

std::string scene_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%04d", index);
  return buf;
}

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a * 0x9e3779b97f4a7c15ULL + b + 0x632be59bd9b4e019ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

SpineSpec random_instance(Rng& rng, const CorpusConfig& c) {
  SpineSpec s;
  s.family = static_cast<SpineFamily>(rng.index(4));
  s.char_h = std::round(rng.uniform(c.char_h_lo, c.char_h_hi));
  s.char_w = std::round(s.char_h * rng.uniform(0.55, 0.85));
  s.char_gap = std::round(rng.uniform(1.5, 3.5));
  s.chars = rng.integer(4, 10);
  if (rng.bernoulli(0.3)) {
    s.word_len = rng.integer(2, 4);
    s.word_gap = std::round(rng.uniform(6.0, 10.0));
  }
  const double hp = s.char_h + 2.0 * kInstancePad;
  const double rows = c.rows, cols = c.cols;
  auto& p = s.params;
  switch (s.family) {
    case SpineFamily::kLine: {
      p["x0"] = rng.uniform(4.0, cols - 4.0);
      p["y0"] = rng.uniform(4.0, rows - 4.0);
      double a = rng.uniform(-0.6, 0.6);
      if (rng.bernoulli(0.15)) a += M_PI / 2.0;
      if (rng.bernoulli(0.5)) a += M_PI;
      p["angle"] = a;
      break;
    }
    case SpineFamily::kArc: {
      const double radius = rng.uniform(2.0 * hp, std::max(2.5 * hp, 0.35 * std::min(rows, cols)));
      p["cx"] = rng.uniform(0.0, cols);
      p["cy"] = rng.uniform(0.0, rows);
      p["radius"] = radius;
      p["start"] = rng.uniform(0.0, 2.0 * M_PI);
      p["dir"] = rng.bernoulli(0.5) ? 1.0 : -1.0;
      break;
    }
    case SpineFamily::kSine: {
      const double amp = rng.uniform(3.0, 1.2 * hp);
      const double min_lambda = 2.0 * M_PI * std::sqrt(amp * hp) * 1.3;
      p["x0"] = rng.uniform(4.0, cols - 4.0);
      p["y0"] = rng.uniform(4.0, rows - 4.0);
      double a = rng.uniform(-0.5, 0.5);
      if (rng.bernoulli(0.5)) a += M_PI;
      p["angle"] = a;
      p["amplitude"] = amp;
      p["wavelength"] = rng.uniform(std::max(min_lambda, 4.0 * hp), std::max(min_lambda, 4.0 * hp) + 6.0 * hp);
      p["phase"] = rng.uniform(0.0, 2.0 * M_PI);
      break;
    }
    case SpineFamily::kSpiral: {
      const double r0 = rng.uniform(1.5 * hp, 2.5 * hp);
      const double growth = (hp + rng.uniform(6.0, 12.0)) / (2.0 * M_PI);
      p["cx"] = rng.uniform(0.0, cols);
      p["cy"] = rng.uniform(0.0, rows);
      p["r0"] = r0;
      p["growth"] = growth;
      p["start"] = rng.uniform(0.0, 2.0 * M_PI);
      p["dir"] = rng.bernoulli(0.5) ? 1.0 : -1.0;
      // Long enough to wrap most of a turn or more.
      const double target = rng.uniform(0.8, 1.4) * 2.0 * M_PI * (r0 + growth * M_PI);
      s.chars = std::max(4, static_cast<int>(target / (s.char_w + s.char_gap)));
      s.word_len = 0;
      break;
    }
  }
  return s;
}

BitMask grow(BitMask m, int steps) {
  for (int i = 0; i < steps; ++i) m = dilate3(m);
  return m;
}

}  // namespace

SceneSpec corpus_scene_spec(const CorpusConfig& corpus, int index) {
  Rng rng(mix(corpus.seed, static_cast<std::uint64_t>(index)));
  SceneSpec spec;
  spec.rows = corpus.rows;
  spec.cols = corpus.cols;
  spec.seed = mix(corpus.seed ^ 0x5eedULL, static_cast<std::uint64_t>(index));
  const int want = rng.integer(corpus.min_instances, corpus.max_instances);
  BitMask occupied(spec.rows, spec.cols);
  for (int attempt = 0; attempt < 400 && static_cast<int>(spec.instances.size()) < want;
       ++attempt) {
    SceneSpec one;
    one.rows = spec.rows;
    one.cols = spec.cols;
    one.instances.push_back(random_instance(rng, corpus));
    SceneTruth t;
    try {
      t = generate_scene(one);
    } catch (const Error&) {
      continue;
    }
    const BitMask mask = rasterize(t.instances[0].polygon, spec.rows, spec.cols);
    if (any_set(mask_and(mask, occupied))) continue;
    occupied = mask_or(occupied, grow(mask, 6));
    spec.instances.push_back(one.instances[0]);
  }
  spec.faults.seed = spec.seed;
  spec.faults.ggtr_noise = corpus.ggtr_noise;
  if (corpus.max_distractors > 0)
    spec.faults.distractors = rng.integer(corpus.min_distractors, corpus.max_distractors);
  // Exactly round(count * fraction) faulted scenes, spread evenly by index.
  auto faulted_before = [&](int n) {
    return static_cast<long long>(std::floor(n * corpus.fault_fraction + 1e-9));
  };
  if (faulted_before(index + 1) > faulted_before(index) && !spec.instances.empty()) {
    const int splits = rng.bernoulli(0.3) ? 2 : 1;
    for (int k = 0; k < splits; ++k) {
      SplitFault f;
      f.instance = static_cast<int>(rng.index(spec.instances.size()));
      f.gap = std::round(rng.uniform(6.0, 12.0));
      f.position = rng.uniform(0.3, 0.7);
      spec.faults.splits.push_back(f);
    }
    spec.faults.distractors += rng.integer(1, 3);
  }
  return spec;
}

std::vector<SceneSpec> corpus_specs(const CorpusConfig& corpus) {
  std::vector<SceneSpec> out;
  out.reserve(corpus.count);
  for (int i = 0; i < corpus.count; ++i) out.push_back(corpus_scene_spec(corpus, i));
  return out;
}

SceneRecord realize(const SceneSpec& spec, std::string name) {
  SceneRecord r;
  r.name = std::move(name);
  r.spec = spec;
  r.truth = generate_scene(spec);
  r.faulted = inject_faults(r.truth, spec.faults);
  return r;
}

GraphSample training_sample(const SceneTruth& truth, const TextMaps& maps, std::uint64_t seed,
                            const SampleConfig& config) {
  const auto segs = propose_segments(maps, config.proposal);
  Rng rng(seed);
  Annotation ann = annotate_segments(segs, truth, rng, config.annotation);
  return make_sample(std::move(ann.segments), maps, config.graph, config.include_self);
}

std::size_t weak_supervision_round(const GcnParams& params, std::span<GraphSample> batch,
                                   std::span<const BitMask> text_regions) {
  std::size_t added = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    GraphSample& s = batch[b];
    const Matrix x0 = embed(s.features, params);
    const auto layers = gcn_forward(x0, s.normalized, params);
    const Matrix& e = layers.empty() ? x0 : layers.back();
    Matrix z = (s.aggregation * e) * params.node_w;
    z.rowwise() += params.node_b.row(0);
    z = detail::apply(params.config.node_activation, z, 0.0);
    std::vector<SegmentType> predicted(s.node_labels.size());
    for (std::size_t v = 0; v < predicted.size(); ++v) {
      Eigen::Index best = 0;
      z.row(static_cast<Eigen::Index>(v)).maxCoeff(&best);
      predicted[v] = static_cast<SegmentType>(best);
    }
    const SegmentLabels f = weak_label_filter(s.segments, predicted, text_regions[b]);
    for (std::size_t v = 0; v < predicted.size(); ++v) {
      if (s.node_labels[v] >= 0 || !f.accepted[v]) continue;
      s.node_labels[v] = static_cast<int>(f.types[v]);
      ++added;
    }
  }
  return added;
}

ImageEval match_image(std::span<const Polygon> preds, std::span<const Polygon> truths,
                      double iou_threshold) {
  ImageEval ev;
  ev.preds = preds.size();
  ev.truths = truths.size();
  auto box = [](const Polygon& p) {
    double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
    for (const Point& v : p.vertices) {
      x0 = std::min(x0, v.x);
      y0 = std::min(y0, v.y);
      x1 = std::max(x1, v.x);
      y1 = std::max(y1, v.y);
    }
    return std::array<double, 4>{x0, y0, x1, y1};
  };
  std::vector<std::array<double, 4>> tb;
  for (const auto& t : truths) tb.push_back(box(t));
  std::vector<Match> cands;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto pb = box(preds[i]);
    for (std::size_t j = 0; j < truths.size(); ++j) {
      if (pb[2] < tb[j][0] || tb[j][2] < pb[0] || pb[3] < tb[j][1] || tb[j][3] < pb[1]) continue;
      const double iou = polygon_iou(preds[i], truths[j]);
      if (iou >= iou_threshold)
        cands.push_back(Match{static_cast<int>(i), static_cast<int>(j), iou});
    }
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Match& a, const Match& b) {
    return std::tie(b.iou, a.pred, a.truth) < std::tie(a.iou, b.pred, b.truth);
  });
  std::vector<bool> pu(preds.size()), tu(truths.size());
  for (const Match& m : cands) {
    if (pu[m.pred] || tu[m.truth]) continue;
    pu[m.pred] = tu[m.truth] = true;
    ev.matches.push_back(m);
  }
  return ev;
}

EvalReport summarize(std::vector<ImageEval> images, double iou_threshold) {
  EvalReport r;
  r.iou_threshold = iou_threshold;
  for (const auto& im : images) {
    r.tp += im.matches.size();
    r.preds += im.preds;
    r.truths += im.truths;
  }
  r.precision = r.preds ? static_cast<double>(r.tp) / r.preds : 0.0;
  r.recall = r.truths ? static_cast<double>(r.tp) / r.truths : 0.0;
  r.f = r.precision + r.recall > 0.0
            ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
            : 0.0;
  r.images = std::move(images);
  return r;
}

EvalReport evaluate(const std::vector<std::vector<Polygon>>& preds,
                    const std::vector<std::vector<Polygon>>& truths, double iou_threshold) {
  if (preds.size() != truths.size())
    throw Error(ErrorCode::kShapeMismatch, "prediction and truth image counts differ");
  std::vector<ImageEval> images;
  for (std::size_t i = 0; i < preds.size(); ++i)
    images.push_back(match_image(preds[i], truths[i], iou_threshold));
  return summarize(std::move(images), iou_threshold);
}

namespace {

AblationRow row(std::string name, bool node, bool ggtr, bool sap, bool gcn) {
  AblationRow r;
  r.name = std::move(name);
  r.config.fpns_node = node;
  r.config.fpns_ggtr = ggtr;
  r.config.shape_approx = sap;
  r.config.use_gcn = gcn;
  return r;
}

bool has_spiral(const SceneSpec& spec) {
  return std::any_of(spec.instances.begin(), spec.instances.end(),
                     [](const SpineSpec& s) { return s.family == SpineFamily::kSpiral; });
}

}  // namespace

std::vector<AblationRow> table_rows() {
  return {row("baseline", false, false, false, true),
          row("+fpns_node", true, false, false, true),
          row("+fpns_ggtr", false, true, false, true),
          row("+fpns", true, true, false, true),
          row("+sap", false, false, true, true),
          row("+fpns+sap", true, true, true, true),
          row("gcn_off+fpns_ggtr+sap", false, true, true, false)};
}

std::vector<AblationRow> width_rows() {
  std::vector<AblationRow> out;
  const WidthBand bands[] = {{1, 3}, {2, 6}, {8, 12}, {16, 24}};
  for (const auto& b : bands) {
    AblationRow r = row("width_" + std::to_string(static_cast<int>(b.lo)) + "-" +
                            std::to_string(static_cast<int>(b.hi)),
                        true, true, true, true);
    r.config.proposal.width = b;
    out.push_back(r);
  }
  return out;
}

AblationOutcome run_ablation(std::span<const SceneSpec> corpus, const GcnParams& params,
                             std::vector<AblationRow> toggles, std::vector<AblationRow> widths,
                             const ProgressFn& progress) {
  AblationOutcome out;
  std::vector<AblationRow*> all;
  for (auto& r : toggles) all.push_back(&r);
  for (auto& r : widths) all.push_back(&r);
  std::vector<std::vector<ImageEval>> evals(all.size());

  for (std::size_t si = 0; si < corpus.size(); ++si) {
    const SceneRecord rec = realize(corpus[si], scene_name(static_cast<int>(si)));
    std::vector<Polygon> truths;
    for (const auto& inst : rec.truth.instances) truths.push_back(inst.polygon);
    const bool spiral = has_spiral(rec.spec);
    out.spiral_scenes += spiral;
    bool route_failed = false;

    std::map<std::tuple<bool, int, double, double>, ProposalStage> cache;
    for (std::size_t k = 0; k < all.size(); ++k) {
      const InferConfig& cfg = all[k]->config;
      const auto key = std::make_tuple(cfg.fpns_ggtr, static_cast<int>(cfg.tcl_op),
                                       cfg.proposal.width.lo, cfg.proposal.width.hi);
      auto it = cache.find(key);
      if (it == cache.end())
        it = cache.emplace(key, propose_stage(rec.faulted.maps, rec.faulted.ggtr, cfg)).first;
      const DetectionResult det =
          finish_detection(it->second, rec.faulted.maps, rec.faulted.ggtr, params, cfg);
      const auto kept = det.kept();
      for (const auto& p : kept) {
        if (cfg.shape_approx) {
          ++out.sap_polygons;
          out.sap_nonsimple_polygons += !is_simple(p);
        } else if (spiral && !is_simple(p)) {
          route_failed = true;
        }
      }
      ImageEval ev = match_image(kept, truths, 0.5);
      ev.name = rec.name;
      evals[k].push_back(std::move(ev));
    }
    out.routefind_nonsimple_spiral_scenes += route_failed;
    if (progress) progress(static_cast<int>(si) + 1, static_cast<int>(corpus.size()));
  }

  for (std::size_t k = 0; k < all.size(); ++k) all[k]->report = summarize(std::move(evals[k]), 0.5);
  auto deltas = [](std::vector<AblationRow>& rows) {
    if (rows.empty()) return;
    const EvalReport base = rows.front().report;
    for (auto& r : rows) {
      r.dp = 100.0 * (r.report.precision - base.precision);
      r.dr = 100.0 * (r.report.recall - base.recall);
      r.df = 100.0 * (r.report.f - base.f);
    }
  };
  deltas(toggles);
  deltas(widths);
  out.toggles = std::move(toggles);
  out.widths = std::move(widths);
  return out;
}

std::string ablation_csv(const AblationOutcome& o) {
  std::string s = "table,row,fpns_node,fpns_ggtr,sap,gcn,width,P,R,F,dP,dR,dF\n";
  auto emit = [&s](const char* table, const AblationRow& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%s,%d,%d,%d,%d,%g-%g,%.4f,%.4f,%.4f,%.2f,%.2f,%.2f\n",
                  table, r.name.c_str(), r.config.fpns_node, r.config.fpns_ggtr,
                  r.config.shape_approx, r.config.use_gcn, r.config.proposal.width.lo,
                  r.config.proposal.width.hi, 100.0 * r.report.precision,
                  100.0 * r.report.recall, 100.0 * r.report.f, r.dp, r.dr, r.df);
    s += buf;
  };
  for (const auto& r : o.toggles) emit("toggles", r);
  for (const auto& r : o.widths) emit("width", r);
  return s;
}

TrainingRun train_on_records(std::span<const SceneRecord> records, const TrainConfig& train,
                             const GcnConfig& config, int weak_rounds,
                             const SampleConfig& sample) {
  TrainingRun run;
  std::vector<BitMask> regions;
  for (const auto& r : records) {
    run.samples.push_back(training_sample(r.truth, r.faulted.maps, r.spec.seed, sample));
    regions.push_back(r.truth.maps.tr);
  }
  run.result = train_gcn(run.samples, train, config);
  for (int round = 0; round < weak_rounds; ++round) {
    run.weak_labels_added += weak_supervision_round(run.result.params, run.samples, regions);
    TrainResult next = train_gcn(run.samples, train, run.result.params);
    run.result.trace.insert(run.result.trace.end(), next.trace.begin(), next.trace.end());
    run.result.params = std::move(next.params);
  }
  return run;
}

std::string render_svg(const TextMaps& maps, std::span<const Polygon> truth,
                       const DetectionResult& det) {
  const int rows = maps.rows(), cols = maps.cols();
  std::string s;
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
                "viewBox=\"0 0 %d %d\">\n<rect width=\"%d\" height=\"%d\" fill=\"black\"/>\n",
                cols, rows, cols, rows, cols, rows);
  s += buf;
  // Text region as horizontal runs.
  s += "<g fill=\"#444\">\n";
  for (int r = 0; r < rows; ++r) {
    int c = 0;
    while (c < cols) {
      if (!maps.tr(r, c)) {
        ++c;
        continue;
      }
      const int start = c;
      while (c < cols && maps.tr(r, c)) ++c;
      std::snprintf(buf, sizeof buf, "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"1\"/>\n",
                    start, r, c - start);
      s += buf;
    }
  }
  s += "</g>\n";
  auto points = [](const Polygon& p) {
    std::string out;
    char b[64];
    for (const Point& v : p.vertices) {
      std::snprintf(b, sizeof b, "%.2f,%.2f ", v.x, v.y);
      out += b;
    }
    return out;
  };
  auto colour = [](SegmentType t) {
    switch (t) {
      case SegmentType::kChar:
        return "#f5a623";
      case SegmentType::kInterval:
        return "#9b59b6";
      case SegmentType::kNonText:
        return "#e74c3c";
      default:
        return "#95a5a6";
    }
  };
  auto segs = [&](std::span<const TextSegment> list) {
    for (const auto& seg : list) {
      const Polygon p = to_polygon(seg.rect);
      s += "<polygon points=\"" + points(p) + "\" fill=\"none\" stroke=\"" +
           colour(seg.type) + "\" stroke-width=\"0.3\"/>\n";
    }
  };
  segs(det.segments);
  segs(det.removed);
  for (const auto& t : truth)
    s += "<polygon points=\"" + points(t) +
         "\" fill=\"none\" stroke=\"#2ecc71\" stroke-width=\"1\"/>\n";
  for (const auto& d : det.polygons)
    s += "<polygon points=\"" + points(d.polygon) + "\" fill=\"none\" stroke=\"" +
         (d.kept ? "#3498db" : "#e74c3c") + "\" stroke-width=\"1.5\"" +
         (d.kept ? "" : " stroke-dasharray=\"3,2\"") + "/>\n";
  s += "</svg>\n";
  return s;
}

}  // namespace segtext
