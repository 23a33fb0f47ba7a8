// Copyright 2026 The segstream Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace segstream {

// Blank transducer output id, fixed to 0 across the whole codebase.
inline constexpr int kBlankId = 0;

// Row-major throughout: row index is always time (or label position), so
// slicing a frame range is a contiguous block.
template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using MatrixF = Matrix<float>;
using MatrixD = Matrix<double>;
using VectorF = Vector<float>;
using VectorD = Vector<double>;

template <typename T>
constexpr T neg_inf() {
  return -std::numeric_limits<T>::infinity();
}

// Numerically stable log(exp(a) + exp(b)). Tolerates -inf on either side.
template <typename T>
inline T log_add_exp(T a, T b) {
  if (a < b) std::swap(a, b);
  if (b == neg_inf<T>()) return a;
  return a + std::log1p(std::exp(b - a));
}

// Dense (d0 x d1 x d2) tensor with contiguous row-major storage. Used for
// per-segment joint logits (time x label-position x vocab) and their
// gradients.
template <typename T>
struct Tensor3 {
  int d0 = 0;
  int d1 = 0;
  int d2 = 0;
  std::vector<T> data;

  Tensor3() = default;
  Tensor3(int n0, int n1, int n2, T fill = T(0))
      : d0(n0), d1(n1), d2(n2), data(static_cast<size_t>(n0) * n1 * n2, fill) {}

  T& operator()(int i, int j, int k) {
    return data[(static_cast<size_t>(i) * d1 + j) * d2 + k];
  }
  const T& operator()(int i, int j, int k) const {
    return data[(static_cast<size_t>(i) * d1 + j) * d2 + k];
  }

  T* row(int i, int j) { return data.data() + (static_cast<size_t>(i) * d1 + j) * d2; }
  const T* row(int i, int j) const {
    return data.data() + (static_cast<size_t>(i) * d1 + j) * d2;
  }

  size_t size() const { return data.size(); }
};

template <typename Dst, typename Src>
Matrix<Dst> cast_matrix(const Matrix<Src>& m) {
  return m.template cast<Dst>();
}

}  // namespace segstream
