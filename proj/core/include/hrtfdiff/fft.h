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

#ifndef HRTFDIFF_FFT_H_
#define HRTFDIFF_FFT_H_

#include <complex>
#include <span>
#include <vector>

namespace hrtfdiff {

using Complex = std::complex<double>;

// Unnormalized real-input DFT of size n (n/2+1 output bins) and its inverse.
// Plans are created with FFTW_ESTIMATE so results are bit-reproducible
// across runs. Instances are cached per size and per thread; obtain them
// through RealFft::Get.
class RealFft {
 public:
  static const RealFft& Get(int n);

  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  int size() const { return n_; }
  int num_bins() const { return n_ / 2 + 1; }

  // in: n samples; out: n/2+1 bins.
  void Forward(std::span<const double> in, std::span<Complex> out) const;
  // in: n/2+1 bins; out: n samples, scaled by 1/n (true inverse).
  void Inverse(std::span<const Complex> in, std::span<double> out) const;
  // Same as Inverse without the 1/n factor.
  void InverseUnscaled(std::span<const Complex> in, std::span<double> out) const;

 private:
  explicit RealFft(int n);

  int n_;
  double* time_;
  void* freq_;
  void* forward_plan_;
  void* inverse_plan_;
};

// Unnormalized complex DFT (sign -1 forward, +1 inverse scaled by 1/n).
class ComplexFft {
 public:
  static const ComplexFft& Get(int n);

  ~ComplexFft();
  ComplexFft(const ComplexFft&) = delete;
  ComplexFft& operator=(const ComplexFft&) = delete;

  int size() const { return n_; }
  void Forward(std::span<const Complex> in, std::span<Complex> out) const;
  void Inverse(std::span<const Complex> in, std::span<Complex> out) const;

 private:
  explicit ComplexFft(int n);

  int n_;
  void* in_;
  void* out_;
  void* forward_plan_;
  void* inverse_plan_;
};

int NextPowerOfTwo(int n);

// Full linear convolution via FFT; result length a.size() + b.size() - 1.
std::vector<double> FftConvolve(std::span<const double> a,
                                std::span<const double> b);

}  // namespace hrtfdiff

#endif  // HRTFDIFF_FFT_H_
