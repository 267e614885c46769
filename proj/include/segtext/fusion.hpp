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

// Location-aware transfer of graph features into image-aligned grids and the
// fusion-decoding stack that turns them into a graph guided text region map.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "segtext/graph.hpp"
#include "segtext/proposal.hpp"
#include "segtext/scene.hpp"

namespace segtext {

// Channel-first dense tensor.
struct Tensor3 {
  int channels = 0;
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(int c, int r, int w, double fill = 0.0)
      : channels(c), rows(r), cols(w), data(static_cast<std::size_t>(c) * r * w, fill) {}

  double& at(int c, int r, int x) {
    return data[(static_cast<std::size_t>(c) * rows + r) * cols + x];
  }
  double at(int c, int r, int x) const {
    return data[(static_cast<std::size_t>(c) * rows + r) * cols + x];
  }
  bool same_shape(const Tensor3& o) const {
    return channels == o.channels && rows == o.rows && cols == o.cols;
  }
};

// (N, M, D) features: for every pivot, the embeddings of its one-hop nodes in
// rank order, zero rows where a pivot has fewer than M neighbours.
struct PivotFeatures {
  int nodes = 0;
  int hops = 0;
  int dim = 0;
  std::vector<double> data;  // row-major (N, M * D)

  std::span<const double> row(int k) const {
    return std::span<const double>(data).subspan(static_cast<std::size_t>(k) * hops * dim,
                                                 static_cast<std::size_t>(hops) * dim);
  }
};

PivotFeatures gather_pivot_features(const Matrix& node_embedding, const SegmentGraph& graph,
                                    int hops = 8);

// Paints every non-nontext segment's flattened feature row into the pixels its
// rect covers (later segments overwrite earlier ones). `scale` maps canvas
// coordinates to the output grid, whose size is rows x cols.
Tensor3 lat_transfer(const PivotFeatures& features, std::span<const TextSegment> segments,
                     int rows, int cols, double scale = 1.0);

struct ConvWeights {
  int out = 0;
  int in = 0;
  int kernel = 1;             // 1 or 3, zero padding keeps the size
  std::vector<double> w;      // [out][in][kernel][kernel]
  std::vector<double> bias;   // [out]

  double& at(int o, int i, int ky, int kx) {
    return w[((static_cast<std::size_t>(o) * in + i) * kernel + ky) * kernel + kx];
  }
  double at(int o, int i, int ky, int kx) const {
    return w[((static_cast<std::size_t>(o) * in + i) * kernel + ky) * kernel + kx];
  }
};

ConvWeights make_conv(int out, int in, int kernel);  // all zero
ConvWeights random_conv(int out, int in, int kernel, Rng& rng);

Tensor3 conv2d(const Tensor3& x, const ConvWeights& k);
Tensor3 relu(Tensor3 x);
Tensor3 upsample2(const Tensor3& x);
Tensor3 concat(const Tensor3& a, const Tensor3& b);

inline constexpr double kBatchNormEps = 1e-5;

// Convolution, batch normalisation with fixed statistics (mean 0, variance 1)
// and ReLU.
struct Cbr {
  ConvWeights conv;
  std::vector<double> gamma;
  std::vector<double> beta;
};

Cbr make_cbr(int out, int in, Rng* rng);  // rng == nullptr gives zero weights, gamma 1
Tensor3 apply_cbr(const Tensor3& x, const Cbr& m);
// 1x1 convolution and ReLU.
Tensor3 apply_cr(const Tensor3& x, const ConvWeights& k);

struct FdStageWeights {
  ConvWeights transfer;  // CR on T_i
  Cbr prime;             // on [UP(prev); CR(T)]
  Cbr skip;              // on [UP(C); CR(T)]
  Cbr fuse;              // on [F'; CBR(...)]
};

FdStageWeights make_stage(int prev_ch, int skip_ch, int transfer_ch, int reduced_ch, int out_ch,
                          Rng* rng);

// F' = CBR([UP(prev); CR(T)]); out = CBR([F'; CBR([UP(skip); CR(T)])]).
// prev and skip share a scale; T is at twice that scale.
Tensor3 fd_fuse(const Tensor3& prev, const Tensor3& skip, const Tensor3& transfer,
                const FdStageWeights& w);

// 1x1 convolution to one channel followed by the logistic function.
ScalarGrid ggtr_map(const Tensor3& f3, const ConvWeights& head);

struct FdModel {
  static constexpr std::array<int, 4> kChannels{64, 48, 32, 16};
  int reduced = 8;
  std::array<int, 3> transfer_layer{0, 0, 0};  // GCN layer feeding T_1..T_3
  std::array<FdStageWeights, 3> stages;
  std::array<ConvWeights, 4> pyramid;  // map statistics -> stand-in encoder grids
  ConvWeights head;
};

FdModel init_fd(int embed_dim, std::uint64_t seed, int hops = 8);

struct FdTensors {
  // P at 1/16 followed by the skip grids at 1/16, 1/8 and 1/4.
  std::vector<Tensor3> pyramid;
  std::vector<Tensor3> transfer;  // T_1..T_3 at 1/8, 1/4, 1/2
  std::vector<Tensor3> fused;     // F_1..F_3
  ScalarGrid ggtr;                // canvas resolution
};

// Untrained forward pass; canvas sides must be multiples of 16.
FdTensors run_fd(const TextMaps& maps, std::span<const TextSegment> segments,
                 const std::vector<Matrix>& layer_outputs, const SegmentGraph& graph,
                 const FdModel& model);

}  // namespace segtext
