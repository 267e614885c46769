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

#include "segtext/fusion.hpp"

#include <cmath>

#include "segtext/error.hpp"

namespace segtext {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::kShapeMismatch, what);
}

}  // namespace

PivotFeatures gather_pivot_features(const Matrix& node_embedding, const SegmentGraph& graph,
                                    int hops) {
  require(node_embedding.rows() == graph.size(), "embedding rows differ from graph size");
  PivotFeatures f;
  f.nodes = graph.size();
  f.hops = hops;
  f.dim = static_cast<int>(node_embedding.cols());
  f.data.assign(static_cast<std::size_t>(f.nodes) * hops * f.dim, 0.0);
  for (int k = 0; k < f.nodes; ++k) {
    const auto& nb = graph.one_hop[k];
    for (int m = 0; m < hops && m < static_cast<int>(nb.size()); ++m)
      for (int j = 0; j < f.dim; ++j)
        f.data[(static_cast<std::size_t>(k) * hops + m) * f.dim + j] = node_embedding(nb[m], j);
  }
  return f;
}

Tensor3 lat_transfer(const PivotFeatures& features, std::span<const TextSegment> segments,
                     int rows, int cols, double scale) {
  require(features.nodes == static_cast<int>(segments.size()),
          "feature rows differ from segment count");
  require(features.data.size() ==
              static_cast<std::size_t>(features.nodes) * features.hops * features.dim,
          "feature buffer size");
  const int c = features.hops * features.dim;
  Tensor3 t(c, rows, cols);
  for (int k = 0; k < features.nodes; ++k) {
    if (segments[k].type == SegmentType::kNonText) continue;
    const RotRect& r = segments[k].rect;
    const RotRect s{r.cx * scale, r.cy * scale, r.h * scale, r.w * scale, r.theta};
    const auto row = features.row(k);
    for_each_pixel(s, rows, cols, [&](int y, int x) {
      for (int ch = 0; ch < c; ++ch) t.at(ch, y, x) = row[ch];
    });
  }
  return t;
}

ConvWeights make_conv(int out, int in, int kernel) {
  require(kernel == 1 || kernel == 3, "kernel must be 1 or 3");
  ConvWeights k;
  k.out = out;
  k.in = in;
  k.kernel = kernel;
  k.w.assign(static_cast<std::size_t>(out) * in * kernel * kernel, 0.0);
  k.bias.assign(out, 0.0);
  return k;
}

ConvWeights random_conv(int out, int in, int kernel, Rng& rng) {
  ConvWeights k = make_conv(out, in, kernel);
  const double lim = std::sqrt(6.0 / (in * kernel * kernel + out));
  for (double& v : k.w) v = rng.uniform(-lim, lim);
  for (double& v : k.bias) v = rng.uniform(-0.1, 0.1);
  return k;
}

Tensor3 conv2d(const Tensor3& x, const ConvWeights& k) {
  require(x.channels == k.in, "conv input channels");
  require(k.w.size() == static_cast<std::size_t>(k.out) * k.in * k.kernel * k.kernel &&
              k.bias.size() == static_cast<std::size_t>(k.out),
          "conv weight size");
  Tensor3 y(k.out, x.rows, x.cols);
  const int half = k.kernel / 2;
  for (int o = 0; o < k.out; ++o) {
    double* out = &y.at(o, 0, 0);
    for (std::size_t p = 0; p < static_cast<std::size_t>(x.rows) * x.cols; ++p) out[p] = k.bias[o];
    for (int i = 0; i < k.in; ++i) {
      for (int ky = 0; ky < k.kernel; ++ky) {
        for (int kx = 0; kx < k.kernel; ++kx) {
          const double wv = k.at(o, i, ky, kx);
          if (wv == 0.0) continue;
          const int dy = ky - half;
          const int dx = kx - half;
          for (int r = std::max(0, -dy); r < std::min(x.rows, x.rows - dy); ++r) {
            const double* in =
                x.data.data() + (static_cast<std::size_t>(i) * x.rows + r + dy) * x.cols;
            double* dst = out + static_cast<std::size_t>(r) * x.cols;
            for (int c = std::max(0, -dx); c < std::min(x.cols, x.cols - dx); ++c)
              dst[c] += wv * in[c + dx];
          }
        }
      }
    }
  }
  return y;
}

Tensor3 relu(Tensor3 x) {
  for (double& v : x.data) v = v > 0.0 ? v : 0.0;
  return x;
}

Tensor3 upsample2(const Tensor3& x) {
  Tensor3 y(x.channels, 2 * x.rows, 2 * x.cols);
  for (int c = 0; c < x.channels; ++c)
    for (int r = 0; r < y.rows; ++r)
      for (int q = 0; q < y.cols; ++q) y.at(c, r, q) = x.at(c, r / 2, q / 2);
  return y;
}

Tensor3 concat(const Tensor3& a, const Tensor3& b) {
  require(a.rows == b.rows && a.cols == b.cols, "concat spatial size");
  Tensor3 y(a.channels + b.channels, a.rows, a.cols);
  std::copy(a.data.begin(), a.data.end(), y.data.begin());
  std::copy(b.data.begin(), b.data.end(), y.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
  return y;
}

Cbr make_cbr(int out, int in, Rng* rng) {
  Cbr m;
  m.conv = rng ? random_conv(out, in, 3, *rng) : make_conv(out, in, 3);
  m.gamma.assign(out, 1.0);
  m.beta.assign(out, 0.0);
  return m;
}

Tensor3 apply_cbr(const Tensor3& x, const Cbr& m) {
  require(m.gamma.size() == static_cast<std::size_t>(m.conv.out) &&
              m.beta.size() == static_cast<std::size_t>(m.conv.out),
          "batch-norm size");
  Tensor3 y = conv2d(x, m.conv);
  const double inv = 1.0 / std::sqrt(1.0 + kBatchNormEps);
  const std::size_t plane = static_cast<std::size_t>(y.rows) * y.cols;
  for (int c = 0; c < y.channels; ++c)
    for (std::size_t p = 0; p < plane; ++p) {
      double& v = y.data[c * plane + p];
      v = m.gamma[c] * v * inv + m.beta[c];
      if (v < 0.0) v = 0.0;
    }
  return y;
}

Tensor3 apply_cr(const Tensor3& x, const ConvWeights& k) {
  require(k.kernel == 1, "CR expects a 1x1 convolution");
  return relu(conv2d(x, k));
}

FdStageWeights make_stage(int prev_ch, int skip_ch, int transfer_ch, int reduced_ch, int out_ch,
                          Rng* rng) {
  FdStageWeights w;
  w.transfer = rng ? random_conv(reduced_ch, transfer_ch, 1, *rng)
                   : make_conv(reduced_ch, transfer_ch, 1);
  w.prime = make_cbr(out_ch, prev_ch + reduced_ch, rng);
  w.skip = make_cbr(out_ch, skip_ch + reduced_ch, rng);
  w.fuse = make_cbr(out_ch, 2 * out_ch, rng);
  return w;
}

Tensor3 fd_fuse(const Tensor3& prev, const Tensor3& skip, const Tensor3& transfer,
                const FdStageWeights& w) {
  require(prev.rows == skip.rows && prev.cols == skip.cols, "prev and skip scales differ");
  require(transfer.rows == 2 * prev.rows && transfer.cols == 2 * prev.cols,
          "transfer grid must be twice the coarse scale");
  const Tensor3 t = apply_cr(transfer, w.transfer);
  const Tensor3 f_prime = apply_cbr(concat(upsample2(prev), t), w.prime);
  const Tensor3 side = apply_cbr(concat(upsample2(skip), t), w.skip);
  return apply_cbr(concat(f_prime, side), w.fuse);
}

ScalarGrid ggtr_map(const Tensor3& f3, const ConvWeights& head) {
  require(head.out == 1 && head.kernel == 1, "GGTR head must be 1x1 with one output");
  const Tensor3 z = conv2d(f3, head);
  ScalarGrid g(z.rows, z.cols);
  for (int r = 0; r < z.rows; ++r)
    for (int c = 0; c < z.cols; ++c) g(r, c) = 1.0 / (1.0 + std::exp(-z.at(0, r, c)));
  return g;
}

FdModel init_fd(int embed_dim, std::uint64_t seed, int hops) {
  Rng rng(seed);
  FdModel m;
  const auto& ch = FdModel::kChannels;
  for (int j = 0; j < 4; ++j) m.pyramid[j] = random_conv(ch[j], 6, 1, rng);
  for (int j = 0; j < 3; ++j)
    m.stages[j] = make_stage(ch[j], ch[j + 1], hops * embed_dim, m.reduced, ch[j + 1], &rng);
  m.head = random_conv(1, ch[3], 1, rng);
  return m;
}

namespace {

// Map statistics average-pooled by `f`: TCL, TR, H, W, sin and cos of theta.
Tensor3 pooled_stats(const TextMaps& maps, int f) {
  const int rows = maps.rows() / f;
  const int cols = maps.cols() / f;
  Tensor3 t(6, rows, cols);
  const double norm = maps.rows();
  for (int r = 0; r < maps.rows() && r / f < rows; ++r)
    for (int c = 0; c < maps.cols() && c / f < cols; ++c) {
      const bool geo = maps.tcl(r, c) > 0.0;
      const double v[6] = {maps.tcl(r, c),
                           static_cast<double>(maps.tr(r, c)),
                           maps.h(r, c) / norm,
                           maps.w(r, c) / norm,
                           geo ? std::sin(maps.theta(r, c)) : 0.0,
                           geo ? std::cos(maps.theta(r, c)) : 0.0};
      for (int k = 0; k < 6; ++k) t.at(k, r / f, c / f) += v[k] / (f * f);
    }
  return t;
}

}  // namespace

FdTensors run_fd(const TextMaps& maps, std::span<const TextSegment> segments,
                 const std::vector<Matrix>& layer_outputs, const SegmentGraph& graph,
                 const FdModel& model) {
  require(maps.rows() % 16 == 0 && maps.cols() % 16 == 0, "canvas sides must be multiples of 16");
  require(static_cast<int>(segments.size()) == graph.size(), "segments differ from graph");
  FdTensors out;
  const int scales[4] = {16, 16, 8, 4};
  for (int j = 0; j < 4; ++j)
    out.pyramid.push_back(apply_cr(pooled_stats(maps, scales[j]), model.pyramid[j]));
  Tensor3 prev = out.pyramid[0];
  for (int j = 0; j < 3; ++j) {
    const int layer = model.transfer_layer[j];
    require(layer >= 0 && layer < static_cast<int>(layer_outputs.size()), "transfer layer index");
    const PivotFeatures pf = gather_pivot_features(layer_outputs[layer], graph,
                                                   model.stages[j].transfer.in /
                                                       static_cast<int>(layer_outputs[layer].cols()));
    const int f = scales[j + 1] / 2;
    out.transfer.push_back(
        lat_transfer(pf, segments, maps.rows() / f, maps.cols() / f, 1.0 / f));
    prev = fd_fuse(prev, out.pyramid[j + 1], out.transfer.back(), model.stages[j]);
    out.fused.push_back(prev);
  }
  const ScalarGrid half = ggtr_map(prev, model.head);
  out.ggtr = ScalarGrid(maps.rows(), maps.cols());
  for (int r = 0; r < maps.rows(); ++r)
    for (int c = 0; c < maps.cols(); ++c) out.ggtr(r, c) = half(r / 2, c / 2);
  return out;
}

}  // namespace segtext
