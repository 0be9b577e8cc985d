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

#include "hrtfdiff/fft.h"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>

#include "hrtfdiff/common.h"

namespace hrtfdiff {

namespace {
// FFTW's planner is not thread-safe; execution of existing plans is.
std::mutex& PlannerMutex() {
  static std::mutex mu;
  return mu;
}
}  // namespace

const RealFft& RealFft::Get(int n) {
  thread_local std::map<int, std::unique_ptr<RealFft>> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    it = cache.emplace(n, std::unique_ptr<RealFft>(new RealFft(n))).first;
  }
  return *it->second;
}

RealFft::RealFft(int n) : n_(n) {
  if (n <= 0 || n % 2 != 0) {
    throw Error("bad_fft_size", "real FFT size must be positive and even");
  }
  std::lock_guard<std::mutex> lock(PlannerMutex());
  time_ = fftw_alloc_real(n);
  auto* freq = fftw_alloc_complex(n / 2 + 1);
  freq_ = freq;
  forward_plan_ = fftw_plan_dft_r2c_1d(n, time_, freq, FFTW_ESTIMATE);
  inverse_plan_ = fftw_plan_dft_c2r_1d(n, freq, time_, FFTW_ESTIMATE);
}

RealFft::~RealFft() {
  std::lock_guard<std::mutex> lock(PlannerMutex());
  fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
  fftw_free(time_);
  fftw_free(freq_);
}

void RealFft::Forward(std::span<const double> in, std::span<Complex> out) const {
  std::copy(in.begin(), in.begin() + n_, time_);
  auto* freq = static_cast<fftw_complex*>(freq_);
  fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_plan_), time_, freq);
  for (int k = 0; k <= n_ / 2; ++k) out[k] = Complex(freq[k][0], freq[k][1]);
}

void RealFft::InverseUnscaled(std::span<const Complex> in,
                              std::span<double> out) const {
  auto* freq = static_cast<fftw_complex*>(freq_);
  for (int k = 0; k <= n_ / 2; ++k) {
    freq[k][0] = in[k].real();
    freq[k][1] = in[k].imag();
  }
  // c2r destroys its input; freq_ is scratch so that is fine.
  fftw_execute_dft_c2r(static_cast<fftw_plan>(inverse_plan_), freq, time_);
  std::copy(time_, time_ + n_, out.begin());
}

void RealFft::Inverse(std::span<const Complex> in, std::span<double> out) const {
  InverseUnscaled(in, out);
  const double scale = 1.0 / n_;
  for (int i = 0; i < n_; ++i) out[i] *= scale;
}

const ComplexFft& ComplexFft::Get(int n) {
  thread_local std::map<int, std::unique_ptr<ComplexFft>> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    it = cache.emplace(n, std::unique_ptr<ComplexFft>(new ComplexFft(n))).first;
  }
  return *it->second;
}

ComplexFft::ComplexFft(int n) : n_(n) {
  if (n <= 0) throw Error("bad_fft_size", "complex FFT size must be positive");
  std::lock_guard<std::mutex> lock(PlannerMutex());
  auto* in = fftw_alloc_complex(n);
  auto* out = fftw_alloc_complex(n);
  in_ = in;
  out_ = out;
  forward_plan_ = fftw_plan_dft_1d(n, in, out, FFTW_FORWARD, FFTW_ESTIMATE);
  inverse_plan_ = fftw_plan_dft_1d(n, in, out, FFTW_BACKWARD, FFTW_ESTIMATE);
}

ComplexFft::~ComplexFft() {
  std::lock_guard<std::mutex> lock(PlannerMutex());
  fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
  fftw_free(in_);
  fftw_free(out_);
}

void ComplexFft::Forward(std::span<const Complex> in,
                         std::span<Complex> out) const {
  auto* a = static_cast<fftw_complex*>(in_);
  auto* b = static_cast<fftw_complex*>(out_);
  for (int i = 0; i < n_; ++i) {
    a[i][0] = in[i].real();
    a[i][1] = in[i].imag();
  }
  fftw_execute(static_cast<fftw_plan>(forward_plan_));
  for (int i = 0; i < n_; ++i) out[i] = Complex(b[i][0], b[i][1]);
}

void ComplexFft::Inverse(std::span<const Complex> in,
                         std::span<Complex> out) const {
  auto* a = static_cast<fftw_complex*>(in_);
  auto* b = static_cast<fftw_complex*>(out_);
  for (int i = 0; i < n_; ++i) {
    a[i][0] = in[i].real();
    a[i][1] = in[i].imag();
  }
  fftw_execute(static_cast<fftw_plan>(inverse_plan_));
  const double scale = 1.0 / n_;
  for (int i = 0; i < n_; ++i) out[i] = Complex(b[i][0], b[i][1]) * scale;
}

int NextPowerOfTwo(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<double> FftConvolve(std::span<const double> a,
                                std::span<const double> b) {
  if (a.empty() || b.empty()) return {};
  const int out_len = static_cast<int>(a.size() + b.size() - 1);
  const int n = std::max(2, NextPowerOfTwo(out_len));
  const RealFft& fft = RealFft::Get(n);
  std::vector<double> buf(n, 0.0);
  std::vector<Complex> fa(n / 2 + 1), fb(n / 2 + 1);
  std::copy(a.begin(), a.end(), buf.begin());
  fft.Forward(buf, fa);
  std::fill(buf.begin(), buf.end(), 0.0);
  std::copy(b.begin(), b.end(), buf.begin());
  fft.Forward(buf, fb);
  for (int k = 0; k <= n / 2; ++k) fa[k] *= fb[k];
  fft.Inverse(fa, buf);
  buf.resize(out_len);
  return buf;
}

}  // namespace hrtfdiff
