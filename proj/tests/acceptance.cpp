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

// Acceptance run: one PASS/FAIL line per criterion, then informational lines.
// Usage: acceptance <path to the segtext CLI> [scratch dir]

#include <Eigen/Eigenvalues>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "segtext/fusion.hpp"
#include "segtext/harness.hpp"
#include "segtext/io.hpp"
#include "support.hpp"

using namespace segtext;
using namespace segtext::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void verdict(int id, bool ok, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  failures += !ok;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

GcnParams fitted(std::uint64_t seed, std::span<const GraphSample> batch) {
  GcnParams p = init_params(GcnConfig{}, seed);
  std::vector<Matrix> f;
  for (const auto& s : batch) f.push_back(s.features);
  fit_standardization(p, f);
  return p;
}

void gradients() {
  const auto t0 = Clock::now();
  double worst = 0.0, control = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const int n = 8 + static_cast<int>(seed % 3) * 6;  // 8, 14 or 20 nodes
    const auto sc = small_scene(1000 + seed, n);
    std::vector<GraphSample> batch{make_sample(sc.segments, sc.maps, GraphConfig{}, true)};
    const GcnParams p = fitted(seed, batch);
    worst = std::max(worst, grad_check(p, batch).max_relative_error);
    if (seed == 0)  // negative control: a 10% error in one tensor must show
      control = grad_check(p, batch, 1e-5, [](GcnParams& g) {
                  g.conv_w[0] *= 1.1;
                }).max_relative_error;
  }
  const double t = seconds_since(t0);
  verdict(1, worst < 1e-4 && control > 1e-2 && t < 30.0,
          fmt("max rel err %.3g (< 1e-4), corrupted %.3g (> 1e-2), %.1f s", worst, control, t));
}

std::vector<Point> random_points(Rng& rng, int n, double extent) {
  std::vector<Point> pts;
  for (int i = 0; i < n; ++i) pts.push_back({rng.uniform(0, extent), rng.uniform(0, extent)});
  return pts;
}

void operators() {
  Rng rng(77);
  double asym = 0.0, radius = 0.0, equi = 0.0;
  const GcnParams p = init_params(GcnConfig{}, 9);
  for (int t = 0; t < 100; ++t) {
    const int n = 2 + static_cast<int>(rng.uniform() * 60);
    const auto pts = random_points(rng, n, rng.uniform(10, 200));
    const Matrix a = build_graph(pts).dense_normalized();
    asym = std::max(asym, (a - a.transpose()).cwiseAbs().maxCoeff());
    const Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()));
    radius = std::max(radius, es.eigenvalues().cwiseAbs().maxCoeff());

    if (t % 10 != 0) continue;
    Matrix x(n, p.config.embed_dim);
    for (int i = 0; i < x.rows(); ++i)
      for (int j = 0; j < x.cols(); ++j) x(i, j) = rng.uniform(-1, 1);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
    Matrix ap(n, n), xp(n, x.cols());
    for (int i = 0; i < n; ++i) {
      xp.row(i) = x.row(perm[i]);
      for (int j = 0; j < n; ++j) ap(i, j) = a(perm[i], perm[j]);
    }
    const auto y = gcn_forward(x, a.sparseView(), p);
    const auto yp = gcn_forward(xp, ap.sparseView(), p);
    for (std::size_t l = 0; l < y.size(); ++l)
      for (int i = 0; i < n; ++i)
        equi = std::max(equi, (yp[l].row(i) - y[l].row(perm[i])).cwiseAbs().maxCoeff());
  }
  verdict(2, asym < 1e-12 && radius <= 1 + 1e-9 && equi < 1e-12,
          fmt("asymmetry %.2g, spectral radius %.12f, equivariance %.2g", asym, radius, equi));
}

void geometry() {
  Rng rng(123), mc(321);
  double iou_err = 0.0;
  for (int k = 0; k < 50; ++k) {
    const RotRect a = random_rect(rng, 10);
    const RotRect b = random_rect(rng, 10);
    iou_err = std::max(iou_err, std::abs(rect_iou(a, b) - monte_carlo_iou(a, b, 1000000, mc)));
  }
  int nms_ok = 0;
  for (int k = 0; k < 100; ++k) {
    std::vector<RotRect> rects;
    std::vector<double> scores;
    for (int i = 0; i < 50; ++i) {
      rects.push_back(random_rect(rng, 40));
      scores.push_back(std::round(rng.uniform() * 8) / 8);
    }
    nms_ok += nms(rects, scores, 0.5) == greedy_nms(rects, scores, 0.5);
  }
  int closed_ok = 0;
  for (int k = 0; k < 100; ++k) {
    const BitMask m = random_mask(rng, 20 + k % 17, 20 + k % 23, rng.uniform(0.05, 0.7));
    const BitMask c = morph_close(m);
    closed_ok += morph_close(c) == c;
  }
  verdict(3, iou_err < 0.002 && nms_ok == 100 && closed_ok == 100,
          fmt("IoU vs MC max err %.4f, NMS %d/100, closing idempotent %d/100", iou_err, nms_ok,
              closed_ok));
}

void transfer() {
  Rng rng(5);
  bool round_trip = true, zero_outside = true, guard = true;
  for (int t = 0; t < 20; ++t) {
    const int rows = 40, cols = 120;
    std::vector<TextSegment> segs;
    for (int k = 0; k < 6; ++k) {
      TextSegment s;
      s.rect = RotRect::make(10 + 20 * k, rng.uniform(12, 28), rng.uniform(4, 12),
                             rng.uniform(2, 6), rng.uniform(-0.4, 0.4));
      s.type = k % 3 == 2 ? SegmentType::kNonText
                          : (k % 2 ? SegmentType::kInterval : SegmentType::kChar);
      segs.push_back(s);
    }
    PivotFeatures f;
    f.nodes = 6;
    f.hops = 2;
    f.dim = 3;
    for (int k = 0; k < 36; ++k) f.data.push_back(rng.uniform(-1, 1));
    const Tensor3 out = lat_transfer(f, segs, rows, cols);
    BitMask painted(rows, cols);
    for (int k = 0; k < 6; ++k) {
      const auto row = f.row(k);
      for_each_pixel(segs[k].rect, rows, cols, [&](int r, int c) {
        const bool text = segs[k].type != SegmentType::kNonText;
        if (text) painted(r, c) = 1;
        for (int ch = 0; ch < out.channels; ++ch) {
          if (text && out.at(ch, r, c) != row[ch]) round_trip = false;
          if (!text && out.at(ch, r, c) != 0.0) guard = false;
        }
      });
    }
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        if (!painted(r, c))
          for (int ch = 0; ch < out.channels; ++ch)
            if (out.at(ch, r, c) != 0.0) zero_outside = false;
  }
  verdict(4, round_trip && zero_outside && guard,
          fmt("round trip %s, zero outside %s, non-text guard %s", round_trip ? "exact" : "broken",
              zero_outside ? "yes" : "no", guard ? "yes" : "no"));
}

void annotation() {
  const CorpusConfig corpus = training_corpus(11, 50);
  int ok = 0;
  for (int i = 0; i < corpus.count; ++i) {
    const SceneRecord rec = realize(corpus_scene_spec(corpus, i));
    const auto segs = propose_segments(rec.faulted.maps, ProposalConfig{});
    Rng rng(i);
    const Annotation a = annotate_segments(segs, rec.truth, rng);
    std::set<std::size_t> got;
    for (std::size_t k = 0; k < segs.size(); ++k)
      if (a.segments[k].type == SegmentType::kInterval) got.insert(k);
    ok += got == interval_oracle(segs, rec.truth.char_union);
  }
  verdict(5, ok == corpus.count, fmt("%d/%d scenes match the quadratic oracle", ok, corpus.count));
}

std::vector<GraphSample> samples_of(const CorpusConfig& c) {
  std::vector<GraphSample> out;
  for (int i = 0; i < c.count; ++i) {
    const SceneRecord r = realize(corpus_scene_spec(c, i));
    out.push_back(training_sample(r.truth, r.faulted.maps, r.spec.seed));
  }
  return out;
}

GcnParams training(double& final_loss) {
  const auto t0 = Clock::now();
  const CorpusConfig corpus = training_corpus(0);
  std::vector<SceneRecord> records;
  for (int i = 0; i < corpus.count; ++i) records.push_back(realize(corpus_scene_spec(corpus, i)));
  const TrainingRun run = train_on_records(records, TrainConfig{500, 0.05, 0}, GcnConfig{});
  const double t = seconds_since(t0);
  bool finite = true;
  for (const auto& l : run.result.trace) finite = finite && std::isfinite(l.total());
  const ModelQuality held = assess(run.result.params, samples_of(training_corpus(1, 20)));
  final_loss = run.result.trace.back().total();
  verdict(6, held.link_accuracy >= 0.95 && held.nontext_recall >= 0.90 && finite && t < 300.0,
          fmt("held-out link acc %.4f (>= 0.95), non-text recall %.4f (>= 0.90), trace %s, "
              "%.1f s",
              held.link_accuracy, held.nontext_recall, finite ? "finite" : "NOT finite", t));
  return run.result.params;
}

void ablation(const GcnParams& params) {
  const auto t0 = Clock::now();
  const auto specs = corpus_specs(ablation_corpus());
  const AblationOutcome o = run_ablation(specs, params, table_rows(), width_rows());
  const double t = seconds_since(t0);
  const AblationRow* base = nullptr;
  const AblationRow* full = nullptr;
  for (const auto& r : o.toggles) {
    if (r.name == "baseline") base = &r;
    if (r.name == "+fpns+sap") full = &r;
  }
  const double df = 100.0 * (full->report.f - base->report.f);
  verdict(7,
          df >= 2.0 && o.sap_nonsimple_polygons == 0 && o.routefind_nonsimple_spiral_scenes >= 1 &&
              t < 600.0,
          fmt("F %.2f vs baseline %.2f (dF %+.2f >= 2), non-simple SAp %zu/%zu, route-find "
              "non-simple on %zu/%zu spiral scenes, %.1f s",
              100 * full->report.f, 100 * base->report.f, df, o.sap_nonsimple_polygons,
              o.sap_polygons, o.routefind_nonsimple_spiral_scenes, o.spiral_scenes, t));
  double f26 = -1, f1624 = -1;
  for (const auto& r : o.widths) {
    if (r.name == "width_2-6") f26 = r.report.f;
    if (r.name == "width_16-24") f1624 = r.report.f;
  }
  verdict(8, f26 >= f1624, fmt("F(2-6) %.2f >= F(16-24) %.2f", 100 * f26, 100 * f1624));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Relative path -> contents for every regular file under `root`.
std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  return out;
}

bool cli_run(const std::string& cli, const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string d = dir.string();
  const std::string cmds[] = {
      cli + " synth --corpus train --count 4 --out " + d + "/scenes",
      cli + " train --scenes " + d + "/scenes --iters 40 --seed 0 --out " + d + "/params.gcnp",
      cli + " detect --scenes " + d + "/scenes --params " + d + "/params.gcnp --out " + d + "/det",
      cli + " eval --preds " + d + "/det --truth " + d + "/scenes --iou 0.5 --report " + d +
          "/report.json",
  };
  const std::string logs[] = {"synth.out", "train.out", "detect.out", "eval.out"};
  for (int k = 0; k < 4; ++k) {
    const std::string line = cmds[k] + " > " + d + "/" + logs[k] + " 2>/dev/null";
    if (std::system(line.c_str()) != 0) return false;
  }
  return true;
}

void determinism(const std::string& cli, const fs::path& scratch) {
  const bool ran = cli_run(cli, scratch / "run_a") && cli_run(cli, scratch / "run_b");
  std::size_t files = 0;
  bool same = ran;
  if (ran) {
    const auto a = tree(scratch / "run_a");
    const auto b = tree(scratch / "run_b");
    same = a == b;
    files = a.size();
  }
  verdict(9, same,
          ran ? fmt("%zu files from synth, train, detect and eval %s", files,
                    same ? "bit-identical across two runs" : "DIFFER")
              : std::string("a CLI command failed"));
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance <segtext cli> [scratch dir]\n");
    return 2;
  }
  const std::string cli = argv[1];
  const fs::path scratch =
      argc > 2 ? fs::path(argv[2]) : fs::temp_directory_path() / "segtext_acceptance";

  gradients();
  operators();
  geometry();
  transfer();
  annotation();
  double final_loss = 0.0;
  const GcnParams params = training(final_loss);
  ablation(params);
  determinism(cli, scratch);

  std::printf("info: final training loss %.4f; the 0.25 bound in the training example is not met\n",
              final_loss);
  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
