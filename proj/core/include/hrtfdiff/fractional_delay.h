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

#ifndef HRTFDIFF_FRACTIONAL_DELAY_H_
#define HRTFDIFF_FRACTIONAL_DELAY_H_

#include <span>
#include <vector>

namespace hrtfdiff {

// Blackman-windowed sinc interpolator with 64 taps (support |x| < 32).
inline constexpr int kInterpHalfWidth = 32;

double InterpKernel(double x);
double InterpKernelDerivative(double x);

// out[n] += gain * sum_k in[k] * K(n - k - delay), for 0 <= n < out.size().
// Integer delays reduce to an exact shift. Samples that would land at n < 0
// are dropped.
void AddDelayed(std::span<const double> in, double delay, double gain,
                std::span<double> out);

// Adjoint of AddDelayed with respect to `in`:
// grad_in[k] += gain * sum_n grad_out[n] * K(n - k - delay).
void AddDelayedAdjoint(std::span<const double> grad_out, double delay,
                       double gain, std::span<double> grad_in);

// d/d(delay) of <grad_out, AddDelayed(in, delay, 1)>.
double DelayDerivative(std::span<const double> in, double delay,
                       std::span<const double> grad_out);

// Band-limited sample-rate conversion with the same kernel (cutoff at the
// lower of the two Nyquist frequencies).
std::vector<double> Resample(std::span<const double> in, double from_rate,
                             double to_rate);

}  // namespace hrtfdiff

#endif  // HRTFDIFF_FRACTIONAL_DELAY_H_
