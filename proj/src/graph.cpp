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

#include "segtext/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "nn.hpp"
#include "segtext/error.hpp"

namespace segtext {

using detail::apply;
using detail::softmax_rows;

namespace {

// The k nearest other centres of `i`, ordered by distance then index.
std::vector<int> nearest(std::span<const Point> c, int i, int k) {
  const int n = static_cast<int>(c.size());
  k = std::min(k, n - 1);
  std::vector<std::pair<double, int>> best;
  best.reserve(static_cast<std::size_t>(k) + 1);
  for (int j = 0; j < n; ++j) {
    if (j == i) continue;
    const double dx = c[j].x - c[i].x;
    const double dy = c[j].y - c[i].y;
    const std::pair<double, int> cand{dx * dx + dy * dy, j};
    if (static_cast<int>(best.size()) == k) {
      if (k == 0 || !(cand < best.back())) continue;
      best.pop_back();
    }
    best.insert(std::upper_bound(best.begin(), best.end(), cand), cand);
  }
  std::vector<int> out;
  out.reserve(best.size());
  for (const auto& b : best) out.push_back(b.second);
  return out;
}

Matrix xavier(int fan_in, int fan_out, Rng& rng) {
  const double lim = std::sqrt(6.0 / (fan_in + fan_out));
  Matrix m(fan_in, fan_out);
  for (int i = 0; i < fan_in; ++i)
    for (int j = 0; j < fan_out; ++j) m(i, j) = rng.uniform(-lim, lim);
  return m;
}

}  // namespace

SegmentGraph build_graph(std::span<const Point> centers, const GraphConfig& config) {
  const int n = static_cast<int>(centers.size());
  SegmentGraph g;
  g.one_hop.resize(n);
  g.two_hop.resize(n);
  g.neighbors.resize(n);

  const int k = std::max(config.one_hop, config.two_hop + 1);
  std::vector<std::vector<int>> knn(n);
  for (int i = 0; i < n; ++i) knn[i] = nearest(centers, i, k);

  std::vector<std::vector<int>> adj(n);
  auto link = [&](int a, int b) {
    if (a == b) return;
    adj[a].push_back(b);
    adj[b].push_back(a);
  };
  for (int p = 0; p < n; ++p) {
    const auto& kp = knn[p];
    g.one_hop[p].assign(kp.begin(), kp.begin() + std::min<std::size_t>(kp.size(), config.one_hop));
    for (int u : g.one_hop[p]) {
      link(p, u);
      std::vector<int> second;
      for (int w : knn[u]) {
        if (w == p) continue;
        if (static_cast<int>(second.size()) == config.two_hop) break;
        second.push_back(w);
      }
      for (int w : second) link(u, w);
      g.two_hop[p].push_back(std::move(second));
    }
  }

  std::vector<Eigen::Triplet<double>> a_trip;
  g.degree = Eigen::VectorXd::Ones(n);
  for (int i = 0; i < n; ++i) {
    auto& v = adj[i];
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    g.neighbors[i] = v;
    g.degree(i) += static_cast<double>(v.size());
    for (int j : v) a_trip.emplace_back(i, j, 1.0);
  }
  g.adjacency.resize(n, n);
  g.adjacency.setFromTriplets(a_trip.begin(), a_trip.end());

  std::vector<Eigen::Triplet<double>> n_trip;
  for (int i = 0; i < n; ++i) {
    const double di = 1.0 / std::sqrt(g.degree(i));
    n_trip.emplace_back(i, i, di * di);
    for (int j : g.neighbors[i]) n_trip.emplace_back(i, j, di / std::sqrt(g.degree(j)));
  }
  g.normalized.resize(n, n);
  g.normalized.setFromTriplets(n_trip.begin(), n_trip.end());
  return g;
}

SegmentGraph build_graph(std::span<const TextSegment> segments, const GraphConfig& config) {
  std::vector<Point> c;
  c.reserve(segments.size());
  for (const auto& s : segments) c.push_back(s.center());
  return build_graph(c, config);
}

std::vector<LinkPair> candidate_pairs(const SegmentGraph& graph) {
  std::vector<LinkPair> out;
  for (int p = 0; p < graph.size(); ++p)
    for (std::size_t r = 0; r < graph.one_hop[p].size(); ++r)
      out.push_back(LinkPair{p, graph.one_hop[p][r], static_cast<int>(r)});
  return out;
}

std::vector<int> link_labels(std::span<const TextSegment> segments,
                             std::span<const LinkPair> pairs, int top_k) {
  std::vector<int> out;
  out.reserve(pairs.size());
  for (const auto& pr : pairs) {
    const int a = segments[pr.pivot].instance;
    const int b = segments[pr.neighbor].instance;
    out.push_back(pr.rank < top_k && a >= 0 && a == b ? 1 : 0);
  }
  return out;
}

namespace {
// Size features are divided by a fixed length rather than the canvas so that a
// glyph looks the same on any canvas.
constexpr double kReferenceHeight = 32.0;
}  // namespace

Matrix node_features(std::span<const TextSegment> segments, const TextMaps& maps) {
  const int n = static_cast<int>(segments.size());
  const double rows = maps.rows();
  const double cols = maps.cols();
  Matrix f(n, kNodeFeatureDim);

  // Bucket centres so density queries only look at nearby cells.
  double reach = 1.0;
  for (const auto& s : segments) reach = std::max(reach, s.rect.h);
  std::map<std::pair<int, int>, std::vector<int>> buckets;
  auto cell = [reach](double v) { return static_cast<int>(std::floor(v / reach)); };
  for (int i = 0; i < n; ++i)
    buckets[{cell(segments[i].rect.cx), cell(segments[i].rect.cy)}].push_back(i);

  for (int i = 0; i < n; ++i) {
    const RotRect& r = segments[i].rect;
    int near = 0;
    const int bx = cell(r.cx);
    const int by = cell(r.cy);
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        auto it = buckets.find({bx + dx, by + dy});
        if (it == buckets.end()) continue;
        for (int j : it->second) {
          if (j == i) continue;
          if (std::hypot(segments[j].rect.cx - r.cx, segments[j].rect.cy - r.cy) <= r.h) ++near;
        }
      }
    f(i, 0) = r.cx / cols;
    f(i, 1) = r.cy / rows;
    f(i, 2) = r.h / kReferenceHeight;
    f(i, 3) = r.w / std::max(r.h, 1.0);
    f(i, 4) = std::sin(r.theta);
    f(i, 5) = std::cos(r.theta);
    f(i, 6) = mean_over(maps.tcl, r);
    f(i, 7) = mean_over(maps.h, r) / std::max(r.h, 1.0);
    f(i, 8) = near / std::max(r.h, 1.0);
  }
  return f;
}

Matrix pair_geometry(std::span<const TextSegment> segments, std::span<const LinkPair> pairs) {
  Matrix g = Matrix::Zero(static_cast<Eigen::Index>(pairs.size()), kPairGeometryDim);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const RotRect& p = segments[pairs[k].pivot].rect;
    const RotRect& q = segments[pairs[k].neighbor].rect;
    const double dx = q.cx - p.cx;
    const double dy = q.cy - p.cy;
    const double h = std::max(p.h, 1e-6);
    const auto i = static_cast<Eigen::Index>(k);
    g(i, 0) = std::abs(dx * std::cos(p.theta) + dy * std::sin(p.theta)) / h;
    g(i, 1) = std::abs(-dx * std::sin(p.theta) + dy * std::cos(p.theta)) / h;
    g(i, 2) = std::hypot(dx, dy) / h;
    g(i, 3) = std::abs(std::sin(p.theta - q.theta));
    g(i, 4 + std::min(pairs[k].rank, kRankSlots - 1)) = 1.0;
  }
  return g;
}

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::kIdentity:
      return "identity";
    case Activation::kRelu:
      return "relu";
    case Activation::kPrelu:
      return "prelu";
  }
  return "identity";
}

Activation parse_activation(std::string_view name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "relu") return Activation::kRelu;
  if (name == "prelu") return Activation::kPrelu;
  throw Error(ErrorCode::kParse, "unknown activation: " + std::string(name));
}

std::vector<std::pair<std::string, Matrix*>> GcnParams::tensors() {
  std::vector<std::pair<std::string, Matrix*>> t{{"embed_w", &embed_w}, {"embed_b", &embed_b}};
  for (std::size_t i = 0; i < conv_w.size(); ++i)
    t.emplace_back("conv" + std::to_string(i) + "_w", &conv_w[i]);
  t.emplace_back("link_w1", &link_w1);
  t.emplace_back("link_b1", &link_b1);
  t.emplace_back("link_alpha", &link_alpha);
  t.emplace_back("link_w2", &link_w2);
  t.emplace_back("link_b2", &link_b2);
  t.emplace_back("node_w", &node_w);
  t.emplace_back("node_b", &node_b);
  return t;
}

std::vector<std::pair<std::string, Matrix*>> GcnParams::all_tensors() {
  std::vector<std::pair<std::string, Matrix*>> t{{"feature_shift", &feature_shift},
                                                 {"feature_scale", &feature_scale}};
  for (auto& e : tensors()) t.push_back(e);
  return t;
}

std::vector<std::pair<std::string, const Matrix*>> GcnParams::all_tensors() const {
  std::vector<std::pair<std::string, const Matrix*>> out;
  for (auto& [name, m] : const_cast<GcnParams*>(this)->all_tensors()) out.emplace_back(name, m);
  return out;
}

std::vector<std::pair<std::string, const Matrix*>> GcnParams::tensors() const {
  std::vector<std::pair<std::string, const Matrix*>> out;
  for (auto& [name, m] : const_cast<GcnParams*>(this)->tensors()) out.emplace_back(name, m);
  return out;
}

void GcnParams::validate() const {
  const int d = config.embed_dim;
  const int hdn = config.link_hidden;
  auto need = [](const Matrix& m, Eigen::Index r, Eigen::Index c, const char* what) {
    if (m.rows() != r || m.cols() != c)
      throw Error(ErrorCode::kShapeMismatch, std::string("tensor ") + what + " has shape " +
                                                 std::to_string(m.rows()) + "x" +
                                                 std::to_string(m.cols()));
  };
  if (d <= 0 || hdn <= 0 || config.feature_dim <= 0 || config.layers < 0)
    throw Error(ErrorCode::kShapeMismatch, "non-positive dimension in config");
  need(feature_shift, 1, config.feature_dim, "feature_shift");
  need(feature_scale, 1, config.feature_dim, "feature_scale");
  need(embed_w, config.feature_dim, d, "embed_w");
  need(embed_b, 1, d, "embed_b");
  if (static_cast<int>(conv_w.size()) != config.layers)
    throw Error(ErrorCode::kShapeMismatch, "layer count disagrees with config");
  for (const auto& w : conv_w) need(w, 2 * d, d, "conv_w");
  need(link_w1, 2 * d + kPairGeometryDim, hdn, "link_w1");
  need(link_b1, 1, hdn, "link_b1");
  need(link_alpha, 1, 1, "link_alpha");
  need(link_w2, hdn, 2, "link_w2");
  need(link_b2, 1, 2, "link_b2");
  need(node_w, d, kNodeClasses, "node_w");
  need(node_b, 1, kNodeClasses, "node_b");
  for (const auto& [name, m] : all_tensors())
    if (!m->allFinite()) throw Error(ErrorCode::kShapeMismatch, "non-finite tensor " + name);
}

GcnParams init_params(const GcnConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  GcnParams p;
  p.config = config;
  const int d = config.embed_dim;
  p.feature_shift = Matrix::Zero(1, config.feature_dim);
  p.feature_scale = Matrix::Ones(1, config.feature_dim);
  p.embed_w = xavier(config.feature_dim, d, rng);
  p.embed_b = Matrix::Zero(1, d);
  for (int i = 0; i < config.layers; ++i) p.conv_w.push_back(xavier(2 * d, d, rng));
  p.link_w1 = xavier(2 * d + kPairGeometryDim, config.link_hidden, rng);
  p.link_b1 = Matrix::Zero(1, config.link_hidden);
  p.link_alpha = Matrix::Constant(1, 1, 0.25);
  p.link_w2 = xavier(config.link_hidden, 2, rng);
  p.link_b2 = Matrix::Zero(1, 2);
  p.node_w = xavier(d, kNodeClasses, rng);
  // Positive bias keeps the ReLU in front of the softmax active at the start.
  p.node_b = Matrix::Constant(1, kNodeClasses, 1.0);
  return p;
}

void fit_standardization(GcnParams& params, std::span<const Matrix> features) {
  const int f = params.config.feature_dim;
  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(f);
  Eigen::RowVectorXd sq = Eigen::RowVectorXd::Zero(f);
  double n = 0.0;
  for (const Matrix& m : features) {
    if (m.cols() != f) throw Error(ErrorCode::kShapeMismatch, "feature width");
    sum += m.colwise().sum();
    n += static_cast<double>(m.rows());
  }
  if (n == 0.0) return;
  const Eigen::RowVectorXd mean = sum / n;
  for (const Matrix& m : features) sq += (m.rowwise() - mean).array().square().matrix().colwise().sum();
  params.feature_shift = mean;
  for (int j = 0; j < f; ++j) {
    const double sd = std::sqrt(sq(j) / n);
    params.feature_scale(0, j) = sd > 1e-12 ? 1.0 / sd : 1.0;
  }
}

GcnParams zeros_like(const GcnParams& p) {
  GcnParams z = p;
  for (auto& [name, m] : z.tensors()) m->setZero();
  return z;
}

Matrix embed(const Matrix& features, const GcnParams& params) {
  if (features.cols() != params.embed_w.rows())
    throw Error(ErrorCode::kShapeMismatch, "feature width " + std::to_string(features.cols()) +
                                               " != " + std::to_string(params.embed_w.rows()));
  const Matrix standard =
      ((features.rowwise() - params.feature_shift.row(0)).array().rowwise() *
       params.feature_scale.row(0).array())
          .matrix();
  Matrix x = standard * params.embed_w;
  x.rowwise() += params.embed_b.row(0);
  return x;
}

std::vector<Matrix> gcn_forward(const Matrix& x0, const SparseMatrix& normalized,
                                const GcnParams& params) {
  const int d = params.config.embed_dim;
  if (x0.cols() != d)
    throw Error(ErrorCode::kShapeMismatch, "input width " + std::to_string(x0.cols()) +
                                               " != embedding dim " + std::to_string(d));
  if (normalized.rows() != x0.rows() || normalized.cols() != x0.rows())
    throw Error(ErrorCode::kShapeMismatch, "adjacency does not match node count");
  std::vector<Matrix> out;
  Matrix x = x0;
  for (const auto& w : params.conv_w) {
    if (w.rows() != 2 * d || w.cols() != d)
      throw Error(ErrorCode::kShapeMismatch, "graph-conv weight shape");
    const Matrix ax = normalized * x;
    Matrix h = x * w.topRows(d) + ax * w.bottomRows(d);
    x = apply(params.config.conv_activation, h, 0.0);
    out.push_back(x);
  }
  return out;
}

LinkPrediction predict_links(const Matrix& node_embedding, std::span<const LinkPair> pairs,
                             const Matrix& pair_geo, const GcnParams& params) {
  const Eigen::Index d = node_embedding.cols();
  const auto np = static_cast<Eigen::Index>(pairs.size());
  if (params.link_w1.rows() != 2 * d + kPairGeometryDim || pair_geo.rows() != np ||
      (np > 0 && pair_geo.cols() != kPairGeometryDim))
    throw Error(ErrorCode::kShapeMismatch, "link head input shape");
  const Matrix ep = node_embedding * params.link_w1.topRows(d);
  const Matrix eq = node_embedding * params.link_w1.middleRows(d, d);
  Matrix h = pair_geo * params.link_w1.bottomRows(kPairGeometryDim);
  for (Eigen::Index k = 0; k < np; ++k)
    h.row(k) += ep.row(pairs[k].pivot) + eq.row(pairs[k].neighbor);
  h.rowwise() += params.link_b1.row(0);
  Matrix a = apply(params.config.link_activation, h, params.link_alpha(0, 0));
  Matrix logits = a * params.link_w2;
  logits.rowwise() += params.link_b2.row(0);
  const Matrix p = softmax_rows(logits);
  LinkPrediction out;
  out.prob.resize(pairs.size());
  for (Eigen::Index k = 0; k < np; ++k) out.prob[k] = p(k, 1);
  return out;
}

SegmentType NodeClassification::predicted(int v) const {
  Eigen::Index best = 0;
  probs.row(v).maxCoeff(&best);
  return static_cast<SegmentType>(best);
}

SparseMatrix aggregation_operator(const SegmentGraph& graph, bool include_self) {
  const int n = graph.size();
  std::vector<Eigen::Triplet<double>> trip;
  for (int v = 0; v < n; ++v) {
    const auto& nb = graph.neighbors[v];
    // An isolated node always aggregates over itself.
    const bool self = include_self || nb.empty();
    const double wgt = 1.0 / static_cast<double>(nb.size() + (self ? 1 : 0));
    if (self) trip.emplace_back(v, v, wgt);
    for (int u : nb) trip.emplace_back(v, u, wgt);
  }
  SparseMatrix m(n, n);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

NodeClassification classify_nodes(const Matrix& node_embedding, const SegmentGraph& graph,
                                  const GcnParams& params) {
  if (node_embedding.rows() != graph.size() || node_embedding.cols() != params.node_w.rows())
    throw Error(ErrorCode::kShapeMismatch, "node head input shape");
  const SparseMatrix agg = aggregation_operator(graph, params.config.node_include_self);
  Matrix z = (agg * node_embedding) * params.node_w;
  z.rowwise() += params.node_b.row(0);
  return NodeClassification{softmax_rows(apply(params.config.node_activation, z, 0.0))};
}

double loss_link(std::span<const double> prob, std::span<const int> truth) {
  if (prob.size() != truth.size())
    throw Error(ErrorCode::kShapeMismatch, "link predictions and labels differ in length");
  if (prob.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    const double r = std::clamp(prob[i], kProbEpsilon, 1.0 - kProbEpsilon);
    s -= truth[i] ? std::log(r) : std::log(1.0 - r);
  }
  return s / static_cast<double>(prob.size());
}

double loss_node(const Matrix& probs, std::span<const SegmentType> labels) {
  if (static_cast<std::size_t>(probs.rows()) != labels.size())
    throw Error(ErrorCode::kShapeMismatch, "node predictions and labels differ in length");
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t v = 0; v < labels.size(); ++v) {
    if (labels[v] == SegmentType::kUnlabeled) continue;
    s -= std::log(std::max(probs(static_cast<Eigen::Index>(v), static_cast<int>(labels[v])),
                           kProbEpsilon));
    ++n;
  }
  if (n == 0) throw Error(ErrorCode::kNoLabeledNodes, "no labeled nodes in batch");
  return s / static_cast<double>(n);
}

}  // namespace segtext
