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

#include <algorithm>
#include <cmath>

#include "nn.hpp"
#include "segtext/error.hpp"
#include "segtext/graph.hpp"

namespace segtext {

using detail::activation_backward;
using detail::apply;
using detail::softmax_rows;

GraphSample make_sample(std::vector<TextSegment> segments, const TextMaps& maps,
                        const GraphConfig& graph_config, bool include_self) {
  GraphSample s;
  const SegmentGraph g = build_graph(std::span<const TextSegment>(segments), graph_config);
  s.features = node_features(segments, maps);
  s.normalized = g.normalized;
  s.aggregation = aggregation_operator(g, include_self);
  s.pairs = candidate_pairs(g);
  s.pair_geo = pair_geometry(segments, s.pairs);
  s.link_truth = link_labels(segments, s.pairs);
  s.node_labels.reserve(segments.size());
  for (const auto& seg : segments)
    s.node_labels.push_back(seg.type == SegmentType::kUnlabeled ? -1 : static_cast<int>(seg.type));
  s.segments = std::move(segments);
  return s;
}

namespace {

struct Forward {
  std::vector<Matrix> x;   // x[0] embedded input, x[l + 1] output of layer l
  std::vector<Matrix> ax;  // normalized * x[l]
  std::vector<Matrix> h;   // pre-activation of layer l
  Matrix h1, a1, link_p;
  Matrix g, zn, node_p;
};

Forward run(const GcnParams& prm, const GraphSample& s) {
  const int d = prm.config.embed_dim;
  Forward f;
  f.x.push_back(embed(s.features, prm));
  for (const auto& w : prm.conv_w) {
    f.ax.push_back(s.normalized * f.x.back());
    f.h.push_back(f.x.back() * w.topRows(d) + f.ax.back() * w.bottomRows(d));
    f.x.push_back(apply(prm.config.conv_activation, f.h.back(), 0.0));
  }
  const Matrix& e = f.x.back();
  // [e_p, e_q, g] W1 evaluated block-wise: per-node products, then gathered.
  const Matrix ep = e * prm.link_w1.topRows(d);
  const Matrix eq = e * prm.link_w1.middleRows(d, d);
  f.h1 = s.pair_geo * prm.link_w1.bottomRows(kPairGeometryDim);
  for (Eigen::Index k = 0; k < f.h1.rows(); ++k)
    f.h1.row(k) += ep.row(s.pairs[k].pivot) + eq.row(s.pairs[k].neighbor);
  f.h1.rowwise() += prm.link_b1.row(0);
  f.a1 = apply(prm.config.link_activation, f.h1, prm.link_alpha(0, 0));
  Matrix logits = f.a1 * prm.link_w2;
  logits.rowwise() += prm.link_b2.row(0);
  f.link_p = softmax_rows(logits);

  f.g = s.aggregation * e;
  f.zn = f.g * prm.node_w;
  f.zn.rowwise() += prm.node_b.row(0);
  f.node_p = softmax_rows(apply(prm.config.node_activation, f.zn, 0.0));
  return f;
}

// Appends which side of zero every pre-activation of a non-smooth activation
// lies on. A probe that changes this pattern has stepped across a kink.
void append_kink_pattern(const GcnConfig& cfg, const Forward& f, std::vector<bool>& out) {
  auto add = [&](Activation a, const Matrix& z) {
    if (a == Activation::kIdentity) return;
    for (Eigen::Index i = 0; i < z.size(); ++i) out.push_back(z.data()[i] > 0.0);
  };
  for (const auto& h : f.h) add(cfg.conv_activation, h);
  add(cfg.link_activation, f.h1);
  add(cfg.node_activation, f.zn);
}

LossBreakdown loss_impl(const GcnParams& params, std::span<const GraphSample> batch,
                        GcnParams* grad, std::vector<bool>* pattern);

}  // namespace

LossBreakdown loss_and_gradient(const GcnParams& params, std::span<const GraphSample> batch,
                                GcnParams* grad) {
  return loss_impl(params, batch, grad, nullptr);
}

namespace {

LossBreakdown loss_impl(const GcnParams& params, std::span<const GraphSample> batch,
                        GcnParams* grad, std::vector<bool>* pattern) {
  params.validate();
  std::size_t n_pairs = 0;
  std::size_t n_labeled = 0;
  for (const auto& s : batch) {
    n_pairs += s.pairs.size();
    for (int l : s.node_labels) n_labeled += l >= 0;
  }
  if (n_labeled == 0) throw Error(ErrorCode::kNoLabeledNodes, "no labeled nodes in batch");
  if (grad) *grad = zeros_like(params);

  const int d = params.config.embed_dim;
  const double alpha = params.link_alpha(0, 0);
  LossBreakdown loss;
  for (const auto& s : batch) {
    const Forward f = run(params, s);
    if (pattern) append_kink_pattern(params.config, f, *pattern);
    const auto np = static_cast<Eigen::Index>(s.pairs.size());
    const auto nn = static_cast<Eigen::Index>(s.node_labels.size());

    Matrix d_logit = Matrix::Zero(np, 2);
    for (Eigen::Index k = 0; k < np; ++k) {
      const double r = s.link_truth[k];
      const double p = f.link_p(k, 1);
      const double pc = std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon);
      loss.link -= (r * std::log(pc) + (1.0 - r) * std::log(1.0 - pc)) / n_pairs;
      if (pc == p) {
        d_logit(k, 1) = (p - r) / n_pairs;
        d_logit(k, 0) = (r - p) / n_pairs;
      }
    }
    Matrix d_out = Matrix::Zero(nn, kNodeClasses);
    for (Eigen::Index v = 0; v < nn; ++v) {
      const int y = s.node_labels[v];
      if (y < 0) continue;
      const double p = f.node_p(v, y);
      loss.node -= std::log(std::max(p, kProbEpsilon)) / n_labeled;
      if (p >= kProbEpsilon) {
        d_out.row(v) = f.node_p.row(v) / static_cast<double>(n_labeled);
        d_out(v, y) -= 1.0 / n_labeled;
      }
    }
    if (!grad) continue;

    // Link head.
    grad->link_w2 += f.a1.transpose() * d_logit;
    grad->link_b2 += d_logit.colwise().sum();
    const Matrix d_a1 = d_logit * params.link_w2.transpose();
    if (params.config.link_activation == Activation::kPrelu)
      grad->link_alpha(0, 0) +=
          d_a1.cwiseProduct(f.h1.unaryExpr([](double v) { return v > 0.0 ? 0.0 : v; })).sum();
    const Matrix d_h1 = activation_backward(params.config.link_activation, f.h1, d_a1, alpha);
    Matrix by_pivot = Matrix::Zero(f.x.back().rows(), d_h1.cols());
    Matrix by_neighbor = Matrix::Zero(f.x.back().rows(), d_h1.cols());
    for (Eigen::Index k = 0; k < np; ++k) {
      by_pivot.row(s.pairs[k].pivot) += d_h1.row(k);
      by_neighbor.row(s.pairs[k].neighbor) += d_h1.row(k);
    }
    const Matrix& e = f.x.back();
    grad->link_w1.topRows(d) += e.transpose() * by_pivot;
    grad->link_w1.middleRows(d, d) += e.transpose() * by_neighbor;
    grad->link_w1.bottomRows(kPairGeometryDim) += s.pair_geo.transpose() * d_h1;
    grad->link_b1 += d_h1.colwise().sum();
    Matrix d_e = by_pivot * params.link_w1.topRows(d).transpose() +
                 by_neighbor * params.link_w1.middleRows(d, d).transpose();

    // Node head.
    const Matrix d_zn = activation_backward(params.config.node_activation, f.zn, d_out, 0.0);
    grad->node_w += f.g.transpose() * d_zn;
    grad->node_b += d_zn.colwise().sum();
    d_e += s.aggregation.transpose() * (d_zn * params.node_w.transpose());

    // Graph-conv trunk.
    Matrix d_x = d_e;
    for (int l = static_cast<int>(params.conv_w.size()) - 1; l >= 0; --l) {
      const Matrix& w = params.conv_w[l];
      const Matrix d_h = activation_backward(params.config.conv_activation, f.h[l], d_x, 0.0);
      grad->conv_w[l].topRows(d) += f.x[l].transpose() * d_h;
      grad->conv_w[l].bottomRows(d) += f.ax[l].transpose() * d_h;
      d_x = d_h * w.topRows(d).transpose() +
            s.normalized.transpose() * (d_h * w.bottomRows(d).transpose());
    }

    // Embedding.
    const Matrix standard =
        ((s.features.rowwise() - params.feature_shift.row(0)).array().rowwise() *
         params.feature_scale.row(0).array())
            .matrix();
    grad->embed_w += standard.transpose() * d_x;
    grad->embed_b += d_x.colwise().sum();
  }
  return loss;
}

}  // namespace

TrainResult train_gcn(std::span<const GraphSample> batch, const TrainConfig& train,
                      const GcnConfig& config) {
  GcnParams p = init_params(config, train.seed);
  std::vector<Matrix> feats;
  for (const auto& s : batch) feats.push_back(s.features);
  fit_standardization(p, feats);
  return train_gcn(batch, train, std::move(p));
}

TrainResult train_gcn(std::span<const GraphSample> batch, const TrainConfig& train,
                      GcnParams initial) {
  TrainResult out;
  out.params = std::move(initial);
  const int iterations = std::max(train.iterations, 0);
  GcnParams grad;
  for (int it = 0; it <= iterations; ++it) {
    const bool last = it == iterations;
    const LossBreakdown l = loss_and_gradient(out.params, batch, last ? nullptr : &grad);
    if (!std::isfinite(l.link) || !std::isfinite(l.node))
      throw Error(ErrorCode::kDivergence, "loss became non-finite at iteration " +
                                              std::to_string(it));
    out.trace.push_back(l);
    if (last) break;
    auto dst = out.params.tensors();
    auto src = grad.tensors();
    for (std::size_t t = 0; t < dst.size(); ++t)
      *dst[t].second -= train.learning_rate * *src[t].second;
  }
  return out;
}

GradCheckReport grad_check(const GcnParams& params, std::span<const GraphSample> batch,
                           double step, const std::function<void(GcnParams&)>& corrupt,
                           int stencil) {
  if (stencil != 2 && stencil != 4)
    throw Error(ErrorCode::kShapeMismatch, "stencil must be 2 or 4 points");
  GcnParams analytic;
  std::vector<bool> base_pattern;
  const double base_loss = loss_impl(params, batch, &analytic, &base_pattern).total();
  if (corrupt) corrupt(analytic);

  GradCheckReport report;
  GcnParams probe = params;
  auto probe_t = probe.tensors();
  auto an_t = analytic.tensors();
  for (std::size_t t = 0; t < probe_t.size(); ++t) {
    Matrix& m = *probe_t[t].second;
    const Matrix& a = *an_t[t].second;
    Matrix numeric(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double keep = m.data()[i];
      auto at = [&](double offset) {
        m.data()[i] = keep + offset;
        return loss_and_gradient(probe, batch, nullptr).total();
      };
      auto probed = [&](double offset, bool& smooth) {
        m.data()[i] = keep + offset;
        std::vector<bool> pattern;
        const double l = loss_impl(probe, batch, nullptr, &pattern).total();
        smooth = pattern == base_pattern;
        return l;
      };
      bool plus_smooth = true, minus_smooth = true;
      const double plus = probed(step, plus_smooth);
      const double minus = probed(-step, minus_smooth);
      if (plus_smooth != minus_smooth) {
        // One probe crosses a kink: difference on the side that stays smooth.
        numeric.data()[i] = plus_smooth ? (plus - base_loss) / step : (base_loss - minus) / step;
      } else if (stencil == 2) {
        numeric.data()[i] = (plus - minus) / (2.0 * step);
      } else {
        const double far = at(2 * step) - at(-2 * step);
        numeric.data()[i] = (8.0 * (plus - minus) - far) / (12.0 * step);
      }
      m.data()[i] = keep;
    }
    const double scale = std::max(a.cwiseAbs().maxCoeff(), numeric.cwiseAbs().maxCoeff());
    const double diff = (a - numeric).cwiseAbs().maxCoeff();
    const double rel = scale > 0.0 ? diff / scale : 0.0;
    report.per_tensor.emplace_back(probe_t[t].first, rel);
    report.max_relative_error = std::max(report.max_relative_error, rel);
  }
  return report;
}

ModelQuality assess(const GcnParams& params, std::span<const GraphSample> batch) {
  ModelQuality q;
  std::size_t link_ok = 0;
  std::size_t nontext_hit = 0;
  std::size_t labeled = 0;
  std::size_t node_ok = 0;
  for (const auto& s : batch) {
    const Forward f = run(params, s);
    for (std::size_t k = 0; k < s.pairs.size(); ++k) {
      const int pred = f.link_p(static_cast<Eigen::Index>(k), 1) > 0.5 ? 1 : 0;
      link_ok += pred == s.link_truth[k];
    }
    q.pairs += s.pairs.size();
    for (std::size_t v = 0; v < s.node_labels.size(); ++v) {
      const int y = s.node_labels[v];
      if (y < 0) continue;
      Eigen::Index best = 0;
      f.node_p.row(static_cast<Eigen::Index>(v)).maxCoeff(&best);
      ++labeled;
      node_ok += best == y;
      if (y == static_cast<int>(SegmentType::kNonText)) {
        ++q.nontext;
        nontext_hit += best == y;
      }
    }
  }
  q.link_accuracy = q.pairs ? static_cast<double>(link_ok) / q.pairs : 0.0;
  q.nontext_recall = q.nontext ? static_cast<double>(nontext_hit) / q.nontext : 0.0;
  q.node_accuracy = labeled ? static_cast<double>(node_ok) / labeled : 0.0;
  return q;
}

}  // namespace segtext
