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

#include "hrtfdiff/nn_layers.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace hrtfdiff::nn {

namespace {

void UniformInit(Vector& params, std::size_t offset, std::size_t n, double bound,
                 std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  for (std::size_t i = 0; i < n; ++i) params[offset + i] = u(rng);
}

}  // namespace

Matrix Silu(const Matrix& x) {
  return x.unaryExpr([](double v) { return v / (1.0 + std::exp(-v)); });
}

Matrix SiluBackward(const Matrix& x, const Matrix& grad) {
  return grad.binaryExpr(x, [](double g, double v) {
    const double s = 1.0 / (1.0 + std::exp(-v));
    return g * s * (1.0 + v * (1.0 - s));
  });
}

Linear::Linear(ParamLayout& layout, int in, int out) : in_(in), out_(out) {
  w_offset_ = layout.Add(std::size_t(in) * out);
  b_offset_ = layout.Add(out);
}

void Linear::Init(Vector& params, std::mt19937_64& rng) const {
  const double bound = 1.0 / std::sqrt(double(in_));
  UniformInit(params, w_offset_, std::size_t(in_) * out_, bound, rng);
  UniformInit(params, b_offset_, out_, bound, rng);
}

Matrix Linear::Forward(const Vector& params, const Matrix& x) const {
  Eigen::Map<const Matrix> w(params.data() + w_offset_, out_, in_);
  Eigen::Map<const Vector> b(params.data() + b_offset_, out_);
  Matrix y = w * x;
  y.colwise() += b;
  return y;
}

Matrix Linear::Backward(const Vector& params, Vector* grad_params, const Matrix& x,
                        const Matrix& grad_out) const {
  Eigen::Map<const Matrix> w(params.data() + w_offset_, out_, in_);
  if (grad_params != nullptr) {
    Eigen::Map<Matrix> gw(grad_params->data() + w_offset_, out_, in_);
    Eigen::Map<Vector> gb(grad_params->data() + b_offset_, out_);
    gw.noalias() += grad_out * x.transpose();
    gb += grad_out.rowwise().sum();
  }
  return w.transpose() * grad_out;
}

Conv1d::Conv1d(ParamLayout& layout, int in, int out, int kernel)
    : in_(in), out_(out), kernel_(kernel) {
  w_offset_ = layout.Add(std::size_t(in) * out * kernel);
  b_offset_ = layout.Add(out);
}

void Conv1d::Init(Vector& params, std::mt19937_64& rng, bool zero) const {
  const std::size_t n = std::size_t(in_) * out_ * kernel_;
  if (zero) {
    params.segment(w_offset_, n).setZero();
    params.segment(b_offset_, out_).setZero();
    return;
  }
  const double bound = 1.0 / std::sqrt(double(in_ * kernel_));
  UniformInit(params, w_offset_, n, bound, rng);
  UniformInit(params, b_offset_, out_, bound, rng);
}

// Row j * in + c of the result holds channel c shifted by j - kernel / 2.
Matrix Conv1d::Unfold(const Matrix& x, int length) const {
  if (kernel_ == 1) return x;
  const int batch = static_cast<int>(x.cols()) / length;
  const int half = kernel_ / 2;
  Matrix cols = Matrix::Zero(std::size_t(in_) * kernel_, x.cols());
  for (int b = 0; b < batch; ++b) {
    for (int j = 0; j < kernel_; ++j) {
      const int shift = j - half;
      const int dst = std::max(0, -shift);
      const int src = std::max(0, shift);
      const int n = length - std::abs(shift);
      if (n <= 0) continue;
      cols.block(std::size_t(j) * in_, b * length + dst, in_, n) =
          x.block(0, b * length + src, in_, n);
    }
  }
  return cols;
}

Matrix Conv1d::Fold(const Matrix& cols, int length) const {
  if (kernel_ == 1) return cols;
  const int batch = static_cast<int>(cols.cols()) / length;
  const int half = kernel_ / 2;
  Matrix x = Matrix::Zero(in_, cols.cols());
  for (int b = 0; b < batch; ++b) {
    for (int j = 0; j < kernel_; ++j) {
      const int shift = j - half;
      const int dst = std::max(0, -shift);
      const int src = std::max(0, shift);
      const int n = length - std::abs(shift);
      if (n <= 0) continue;
      x.block(0, b * length + src, in_, n) +=
          cols.block(std::size_t(j) * in_, b * length + dst, in_, n);
    }
  }
  return x;
}

Matrix Conv1d::Forward(const Vector& params, const Matrix& x, int length,
                       Matrix* cols) const {
  Eigen::Map<const Matrix> w(params.data() + w_offset_, out_, std::size_t(in_) * kernel_);
  Eigen::Map<const Vector> b(params.data() + b_offset_, out_);
  *cols = Unfold(x, length);
  Matrix y(out_, x.cols());
  y.noalias() = w * *cols;
  y.colwise() += b;
  return y;
}

Matrix Conv1d::Backward(const Vector& params, Vector* grad_params, const Matrix& cols,
                        const Matrix& grad_out, int length) const {
  Eigen::Map<const Matrix> w(params.data() + w_offset_, out_, std::size_t(in_) * kernel_);
  if (grad_params != nullptr) {
    Eigen::Map<Matrix> gw(grad_params->data() + w_offset_, out_, std::size_t(in_) * kernel_);
    Eigen::Map<Vector> gb(grad_params->data() + b_offset_, out_);
    gw.noalias() += grad_out * cols.transpose();
    gb += grad_out.rowwise().sum();
  }
  Matrix grad_cols(cols.rows(), cols.cols());
  grad_cols.noalias() = w.transpose() * grad_out;
  return Fold(grad_cols, length);
}

Matrix AvgPool2(const Matrix& x, int length) {
  const int batch = static_cast<int>(x.cols()) / length;
  const int half = length / 2;
  Matrix y(x.rows(), std::size_t(batch) * half);
  for (int b = 0; b < batch; ++b) {
    for (int t = 0; t < half; ++t) {
      y.col(b * half + t) = 0.5 * (x.col(b * length + 2 * t) + x.col(b * length + 2 * t + 1));
    }
  }
  return y;
}

Matrix AvgPool2Backward(const Matrix& grad_out, int length) {
  const int half = length / 2;
  const int batch = static_cast<int>(grad_out.cols()) / half;
  Matrix g(grad_out.rows(), std::size_t(batch) * length);
  for (int b = 0; b < batch; ++b) {
    for (int t = 0; t < half; ++t) {
      g.col(b * length + 2 * t) = 0.5 * grad_out.col(b * half + t);
      g.col(b * length + 2 * t + 1) = 0.5 * grad_out.col(b * half + t);
    }
  }
  return g;
}

Matrix Upsample2(const Matrix& x, int length) {
  const int batch = static_cast<int>(x.cols()) / length;
  Matrix y(x.rows(), std::size_t(batch) * length * 2);
  for (int b = 0; b < batch; ++b) {
    for (int t = 0; t < length; ++t) {
      y.col(b * 2 * length + 2 * t) = x.col(b * length + t);
      y.col(b * 2 * length + 2 * t + 1) = x.col(b * length + t);
    }
  }
  return y;
}

Matrix Upsample2Backward(const Matrix& grad_out, int length) {
  const int batch = static_cast<int>(grad_out.cols()) / (2 * length);
  Matrix g(grad_out.rows(), std::size_t(batch) * length);
  for (int b = 0; b < batch; ++b) {
    for (int t = 0; t < length; ++t) {
      g.col(b * length + t) = grad_out.col(b * 2 * length + 2 * t) +
                              grad_out.col(b * 2 * length + 2 * t + 1);
    }
  }
  return g;
}

}  // namespace hrtfdiff::nn
