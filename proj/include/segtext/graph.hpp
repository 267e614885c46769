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

// Segment graph construction, graph-convolution trunk, link and node heads,
// losses, analytic-gradient training and finite-difference verification.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "segtext/grid.hpp"
#include "segtext/proposal.hpp"
#include "segtext/random.hpp"
#include "segtext/scene.hpp"

namespace segtext {

using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct GraphConfig {
  int one_hop = 8;
  int two_hop = 4;
};

struct SegmentGraph {
  // Per pivot: nearest segments first (distance, then index).
  std::vector<std::vector<int>> one_hop;
  // Per pivot, per one-hop node: its nearest segments, pivot excluded.
  std::vector<std::vector<std::vector<int>>> two_hop;
  // Sorted adjacency lists of the symmetrised graph, no self entries.
  std::vector<std::vector<int>> neighbors;
  SparseMatrix adjacency;   // binary, zero diagonal
  SparseMatrix normalized;  // D^-1/2 (A + I) D^-1/2
  Eigen::VectorXd degree;   // row sums of A + I

  int size() const { return static_cast<int>(one_hop.size()); }
  Matrix dense_adjacency() const { return Matrix(adjacency); }
  Matrix dense_normalized() const { return Matrix(normalized); }
};

SegmentGraph build_graph(std::span<const Point> centers, const GraphConfig& config = {});
SegmentGraph build_graph(std::span<const TextSegment> segments, const GraphConfig& config = {});

// Link candidates: every pivot paired with each of its one-hop nodes.
struct LinkPair {
  int pivot = 0;
  int neighbor = 0;
  int rank = 0;  // position in the pivot's one-hop list
};

std::vector<LinkPair> candidate_pairs(const SegmentGraph& graph);

// r = 1 iff the neighbour is among the pivot's `top_k` closest segments and
// both carry the same (non-negative) instance id.
std::vector<int> link_labels(std::span<const TextSegment> segments,
                             std::span<const LinkPair> pairs, int top_k = 3);

inline constexpr int kNodeFeatureDim = 9;
inline constexpr int kRankSlots = 8;
inline constexpr int kPairGeometryDim = 4 + kRankSlots;
inline constexpr int kNodeClasses = 3;
inline constexpr double kProbEpsilon = 1e-7;

// Rows: [cx/cols, cy/rows, h/32, w/h, sin t, cos t, mean TCL over rect,
//        mean H over rect / h, local density].
Matrix node_features(std::span<const TextSegment> segments, const TextMaps& maps);

// Rows per pair, relative to the pivot: [|along| / h, |across| / h, dist / h,
// |sin(theta_p - theta_q)|, one-hot rank (ranks past the last slot share it)].
Matrix pair_geometry(std::span<const TextSegment> segments, std::span<const LinkPair> pairs);

enum class Activation { kIdentity, kRelu, kPrelu };

std::string_view activation_name(Activation a);
Activation parse_activation(std::string_view name);

struct GcnConfig {
  int feature_dim = kNodeFeatureDim;
  int embed_dim = 32;
  int layers = 2;
  int link_hidden = 32;
  Activation conv_activation = Activation::kRelu;
  Activation link_activation = Activation::kPrelu;
  Activation node_activation = Activation::kRelu;
  bool node_include_self = true;
};

struct GcnParams {
  GcnConfig config;
  // Fixed input standardisation, (f - shift) * scale, fitted once on the
  // training batch and never trained.
  Matrix feature_shift;  // 1 x feature_dim
  Matrix feature_scale;  // 1 x feature_dim
  Matrix embed_w;  // feature_dim x D
  Matrix embed_b;  // 1 x D
  std::vector<Matrix> conv_w;  // 2D x D per layer, acting on [X, A X]
  Matrix link_w1;     // (2D + pair geometry) x hidden
  Matrix link_b1;     // 1 x hidden
  Matrix link_alpha;  // 1 x 1, PReLU slope
  Matrix link_w2;     // hidden x 2
  Matrix link_b2;     // 1 x 2
  Matrix node_w;      // D x 3
  Matrix node_b;      // 1 x 3

  // Trainable tensors.
  std::vector<std::pair<std::string, Matrix*>> tensors();
  std::vector<std::pair<std::string, const Matrix*>> tensors() const;
  // Trainable tensors plus the fixed standardisation, as serialised.
  std::vector<std::pair<std::string, const Matrix*>> all_tensors() const;
  std::vector<std::pair<std::string, Matrix*>> all_tensors();
  // Throws Error(kShapeMismatch) when tensor shapes disagree with config.
  void validate() const;
};

GcnParams init_params(const GcnConfig& config, std::uint64_t seed);
// Per-column mean and inverse standard deviation of every node feature in the
// batch (scale 1 for constant columns).
void fit_standardization(GcnParams& params, std::span<const Matrix> features);
GcnParams zeros_like(const GcnParams& p);

Matrix embed(const Matrix& features, const GcnParams& params);

// Graph-convolution layers on embedded features; element i of the result is
// the output of layer i.
std::vector<Matrix> gcn_forward(const Matrix& x0, const SparseMatrix& normalized,
                                const GcnParams& params);

struct LinkPrediction {
  std::vector<double> prob;  // probability of a link per pair
};

LinkPrediction predict_links(const Matrix& node_embedding, std::span<const LinkPair> pairs,
                             const Matrix& pair_geo, const GcnParams& params);

struct NodeClassification {
  Matrix probs;  // N x 3 over {char, interval, nontext}

  SegmentType predicted(int v) const;
};

// Row-normalised aggregation operator over N(v) (optionally including v).
SparseMatrix aggregation_operator(const SegmentGraph& graph, bool include_self);

NodeClassification classify_nodes(const Matrix& node_embedding, const SegmentGraph& graph,
                                  const GcnParams& params);

// Mean binary cross-entropy with probabilities clamped to [eps, 1 - eps].
double loss_link(std::span<const double> prob, std::span<const int> truth);
// Mean cross-entropy over labeled nodes; Error(kNoLabeledNodes) if none.
double loss_node(const Matrix& probs, std::span<const SegmentType> labels);

// ---- training ---------------------------------------------------------------

// Everything one scene contributes to the objective.
struct GraphSample {
  std::vector<TextSegment> segments;
  Matrix features;
  SparseMatrix normalized;
  SparseMatrix aggregation;
  std::vector<LinkPair> pairs;
  Matrix pair_geo;
  std::vector<int> link_truth;
  std::vector<int> node_labels;  // -1 unlabeled, else SegmentType index
};

GraphSample make_sample(std::vector<TextSegment> segments, const TextMaps& maps,
                        const GraphConfig& graph_config, bool include_self);

struct LossBreakdown {
  double link = 0.0;
  double node = 0.0;
  double total() const { return link + node; }
};

// Pooled objective over a batch: mean BCE over all pairs plus mean CE over
// all labeled nodes. Fills `grad` (same shapes as params) when non-null.
LossBreakdown loss_and_gradient(const GcnParams& params, std::span<const GraphSample> batch,
                                GcnParams* grad);

struct TrainConfig {
  int iterations = 500;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
};

struct TrainResult {
  GcnParams params;
  std::vector<LossBreakdown> trace;  // loss before each update, plus the final loss
};

// Full-batch gradient descent. Error(kDivergence) on a non-finite loss. The
// config overload initialises from the seed and fits the standardisation to
// the batch; the other starts from `initial` as given.
TrainResult train_gcn(std::span<const GraphSample> batch, const TrainConfig& train,
                      const GcnConfig& config);
TrainResult train_gcn(std::span<const GraphSample> batch, const TrainConfig& train,
                      GcnParams initial);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::vector<std::pair<std::string, double>> per_tensor;
};

// Compares the analytic gradient with central differences on every parameter.
// Per tensor: max |analytic - numeric| / max(max |analytic|, max |numeric|).
// `corrupt` may tamper with the analytic gradient (negative controls).
// `stencil` 4 uses the fourth-order five-point formula instead of the plain
// two-point one.
// A coordinate whose probe on one side crosses a ReLU or PReLU kink is
// differenced one-sided on the smooth side.
GradCheckReport grad_check(const GcnParams& params, std::span<const GraphSample> batch,
                           double step = 1e-5,
                           const std::function<void(GcnParams&)>& corrupt = {},
                           int stencil = 2);

struct ModelQuality {
  double link_accuracy = 0.0;
  double nontext_recall = 0.0;
  double node_accuracy = 0.0;
  std::size_t pairs = 0;
  std::size_t nontext = 0;
};

ModelQuality assess(const GcnParams& params, std::span<const GraphSample> batch);

}  // namespace segtext
