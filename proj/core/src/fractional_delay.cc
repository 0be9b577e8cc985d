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

#include "hrtfdiff/fractional_delay.h"

#include <algorithm>
#include <cmath>

#include "hrtfdiff/common.h"

namespace hrtfdiff {

namespace {

constexpr double kHalf = kInterpHalfWidth;

bool IsInteger(double x) { return x == std::round(x); }

double Sinc(double x) {
  if (x == 0.0) return 1.0;
  if (IsInteger(x)) return 0.0;
  const double px = kPi * x;
  if (std::abs(x) < 1e-6) return 1.0 - px * px / 6.0;
  return std::sin(px) / px;
}

double SincDerivative(double x) {
  if (x == 0.0) return 0.0;
  if (IsInteger(x)) {
    return (static_cast<long long>(std::round(x)) % 2 == 0 ? 1.0 : -1.0) / x;
  }
  const double px = kPi * x;
  if (std::abs(x) < 1e-6) return -kPi * px / 3.0;
  return (px * std::cos(px) - std::sin(px)) / (px * x);
}

double Window(double x) {
  const double t = kPi * x / kHalf;
  return 0.42 + 0.5 * std::cos(t) + 0.08 * std::cos(2.0 * t);
}

double WindowDerivative(double x) {
  const double t = kPi * x / kHalf;
  return -(kPi / kHalf) * (0.5 * std::sin(t) + 0.16 * std::sin(2.0 * t));
}

// Taps j for which K(j - delay) can be nonzero.
void TapRange(double delay, long* first, long* last) {
  const long base = static_cast<long>(std::floor(delay));
  *first = base - kInterpHalfWidth + 1;
  *last = base + kInterpHalfWidth;
}

}  // namespace

double InterpKernel(double x) {
  if (std::abs(x) >= kHalf) return 0.0;
  return Sinc(x) * Window(x);
}

double InterpKernelDerivative(double x) {
  if (std::abs(x) >= kHalf) return 0.0;
  return SincDerivative(x) * Window(x) + Sinc(x) * WindowDerivative(x);
}

void AddDelayed(std::span<const double> in, double delay, double gain,
                std::span<double> out) {
  const long n_out = static_cast<long>(out.size());
  const long n_in = static_cast<long>(in.size());
  if (IsInteger(delay)) {
    const long shift = static_cast<long>(delay);
    for (long k = 0; k < n_in; ++k) {
      const long n = k + shift;
      if (n >= 0 && n < n_out) out[n] += gain * in[k];
    }
    return;
  }
  long first, last;
  TapRange(delay, &first, &last);
  for (long j = first; j <= last; ++j) {
    const double tap = gain * InterpKernel(j - delay);
    if (tap == 0.0) continue;
    const long k_begin = std::max(0L, -j);
    const long k_end = std::min(n_in, n_out - j);
    for (long k = k_begin; k < k_end; ++k) out[k + j] += tap * in[k];
  }
}

void AddDelayedAdjoint(std::span<const double> grad_out, double delay,
                       double gain, std::span<double> grad_in) {
  const long n_out = static_cast<long>(grad_out.size());
  const long n_in = static_cast<long>(grad_in.size());
  if (IsInteger(delay)) {
    const long shift = static_cast<long>(delay);
    for (long k = 0; k < n_in; ++k) {
      const long n = k + shift;
      if (n >= 0 && n < n_out) grad_in[k] += gain * grad_out[n];
    }
    return;
  }
  long first, last;
  TapRange(delay, &first, &last);
  for (long j = first; j <= last; ++j) {
    const double tap = gain * InterpKernel(j - delay);
    if (tap == 0.0) continue;
    const long k_begin = std::max(0L, -j);
    const long k_end = std::min(n_in, n_out - j);
    for (long k = k_begin; k < k_end; ++k) grad_in[k] += tap * grad_out[k + j];
  }
}

double DelayDerivative(std::span<const double> in, double delay,
                       std::span<const double> grad_out) {
  const long n_out = static_cast<long>(grad_out.size());
  const long n_in = static_cast<long>(in.size());
  long first, last;
  TapRange(delay, &first, &last);
  // An integer delay also needs the tap just below the window.
  first -= 1;
  double acc = 0.0;
  for (long j = first; j <= last; ++j) {
    // d/d(delay) K(j - delay) = -K'(j - delay)
    const double dtap = -InterpKernelDerivative(j - delay);
    if (dtap == 0.0) continue;
    const long k_begin = std::max(0L, -j);
    const long k_end = std::min(n_in, n_out - j);
    double s = 0.0;
    for (long k = k_begin; k < k_end; ++k) s += in[k] * grad_out[k + j];
    acc += dtap * s;
  }
  return acc;
}

std::vector<double> Resample(std::span<const double> in, double from_rate,
                             double to_rate) {
  if (from_rate <= 0.0 || to_rate <= 0.0) {
    throw Error("bad_rate", "sample rates must be positive");
  }
  if (from_rate == to_rate) return {in.begin(), in.end()};
  const double ratio = to_rate / from_rate;
  const double cutoff = std::min(1.0, ratio);
  const long n_out = static_cast<long>(std::ceil(in.size() * ratio));
  const long n_in = static_cast<long>(in.size());
  const double half_span = kHalf / cutoff;
  std::vector<double> out(n_out, 0.0);
  for (long m = 0; m < n_out; ++m) {
    const double t = m / ratio;
    const long lo = std::max(0L, static_cast<long>(std::ceil(t - half_span)));
    const long hi = std::min(n_in - 1, static_cast<long>(std::floor(t + half_span)));
    double acc = 0.0;
    for (long n = lo; n <= hi; ++n) acc += in[n] * InterpKernel((t - n) * cutoff);
    out[m] = acc * cutoff;
  }
  return out;
}

}  // namespace hrtfdiff
