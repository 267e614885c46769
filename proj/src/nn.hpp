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

#include <cmath>

#include "segtext/graph.hpp"

namespace segtext::detail {

inline Matrix relu(const Matrix& m) { return m.cwiseMax(0.0); }

inline Matrix softmax_rows(const Matrix& z) {
  Matrix p(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double mx = z.row(i).maxCoeff();
    double s = 0.0;
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      p(i, j) = std::exp(z(i, j) - mx);
      s += p(i, j);
    }
    p.row(i) /= s;
  }
  return p;
}

inline Matrix apply(Activation a, const Matrix& z, double alpha) {
  switch (a) {
    case Activation::kIdentity:
      return z;
    case Activation::kRelu:
      return relu(z);
    case Activation::kPrelu:
      return z.unaryExpr([alpha](double v) { return v > 0.0 ? v : alpha * v; });
  }
  return z;
}

// Upstream gradient pushed back through the activation evaluated at z.
inline Matrix activation_backward(Activation a, const Matrix& z, const Matrix& upstream,
                                  double alpha) {
  switch (a) {
    case Activation::kIdentity:
      return upstream;
    case Activation::kRelu:
      return upstream.cwiseProduct(z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
    case Activation::kPrelu:
      return upstream.cwiseProduct(
          z.unaryExpr([alpha](double v) { return v > 0.0 ? 1.0 : alpha; }));
  }
  return upstream;
}

}  // namespace segtext::detail
