// Copyright 2026 The hrtfdiff Authors.
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

#ifndef HRTFDIFF_NN_LAYERS_H_
#define HRTFDIFF_NN_LAYERS_H_

#include <cstddef>
#include <random>

#include <Eigen/Dense>

namespace hrtfdiff::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Activations are stored channels x (batch * length), column b * length + t.

class ParamLayout {
 public:
  std::size_t Add(std::size_t n) {
    const std::size_t offset = size_;
    size_ += n;
    return offset;
  }
  std::size_t size() const { return size_; }

 private:
  std::size_t size_ = 0;
};

Matrix Silu(const Matrix& x);
// grad * silu'(x)
Matrix SiluBackward(const Matrix& x, const Matrix& grad);

class Linear {
 public:
  Linear() = default;
  Linear(ParamLayout& layout, int in, int out);

  void Init(Vector& params, std::mt19937_64& rng) const;
  // x: in x batch
  Matrix Forward(const Vector& params, const Matrix& x) const;
  // Accumulates into grad_params when non-null; returns dL/dx.
  Matrix Backward(const Vector& params, Vector* grad_params, const Matrix& x,
                  const Matrix& grad_out) const;

  int in() const { return in_; }
  int out() const { return out_; }

 private:
  int in_ = 0, out_ = 0;
  std::size_t w_offset_ = 0, b_offset_ = 0;
};

// 1-D convolution, odd kernel, zero "same" padding.
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(ParamLayout& layout, int in, int out, int kernel);

  void Init(Vector& params, std::mt19937_64& rng, bool zero = false) const;
  // Stores the unfolded input in `cols` for the backward pass.
  Matrix Forward(const Vector& params, const Matrix& x, int length,
                 Matrix* cols) const;
  Matrix Backward(const Vector& params, Vector* grad_params, const Matrix& cols,
                  const Matrix& grad_out, int length) const;

  int in() const { return in_; }
  int out() const { return out_; }

 private:
  Matrix Unfold(const Matrix& x, int length) const;
  Matrix Fold(const Matrix& cols, int length) const;

  int in_ = 0, out_ = 0, kernel_ = 1;
  std::size_t w_offset_ = 0, b_offset_ = 0;
};

// length -> length / 2
Matrix AvgPool2(const Matrix& x, int length);
Matrix AvgPool2Backward(const Matrix& grad_out, int length);
// Nearest neighbour, length -> 2 * length
Matrix Upsample2(const Matrix& x, int length);
Matrix Upsample2Backward(const Matrix& grad_out, int length);

}  // namespace hrtfdiff::nn

#endif  // HRTFDIFF_NN_LAYERS_H_
