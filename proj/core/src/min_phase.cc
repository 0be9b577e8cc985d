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

#include "hrtfdiff/min_phase.h"

#include <algorithm>
#include <cmath>

#include "hrtfdiff/fft.h"

namespace hrtfdiff {

namespace {

constexpr double kDbToNeper = 0.11512925464970229;  // ln(10) / 20

struct MinPhaseTape {
  std::vector<Complex> spectrum;  // H = exp(C), full n bins
};

// Forward pass; keeps the complex spectrum for the VJP.
std::vector<double> Forward(std::span<const double> log_mag, MinPhaseTape* tape) {
  const int half = static_cast<int>(log_mag.size()) - 1;
  const int n = 2 * half;
  if (half < 1) throw Error("bad_size", "min-phase needs at least 2 bins");
  for (double v : log_mag) {
    if (!std::isfinite(v)) {
      throw Error("non_finite_feature", "non-finite magnitude in min-phase input");
    }
  }
  const RealFft& rfft = RealFft::Get(n);
  // Real cepstrum of the even log spectrum.
  std::vector<Complex> spec(half + 1);
  for (int k = 0; k <= half; ++k) spec[k] = log_mag[k];
  std::vector<double> cep(n);
  rfft.Inverse(spec, cep);
  // Fold onto the causal part.
  std::vector<double> folded(n, 0.0);
  folded[0] = cep[0];
  for (int i = 1; i < half; ++i) folded[i] = 2.0 * cep[i];
  folded[half] = cep[half];
  std::vector<Complex> c(n);
  {
    std::vector<Complex> in(n);
    for (int i = 0; i < n; ++i) in[i] = folded[i];
    ComplexFft::Get(n).Forward(in, c);
  }
  for (auto& v : c) v = std::exp(v);
  std::vector<Complex> h(n);
  ComplexFft::Get(n).Inverse(c, h);
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = h[i].real();
  if (tape) tape->spectrum = std::move(c);
  return out;
}

}  // namespace

std::vector<double> MinimumPhaseFromLogMagnitude(std::span<const double> log_mag) {
  return Forward(log_mag, nullptr);
}

std::vector<double> MinimumPhaseFromLogMagnitudeVjp(
    std::span<const double> log_mag, std::span<const double> grad_fir) {
  MinPhaseTape tape;
  Forward(log_mag, &tape);
  const int half = static_cast<int>(log_mag.size()) - 1;
  const int n = 2 * half;
  const ComplexFft& cfft = ComplexFft::Get(n);
  // h = Re(IDFT(H)): dL/dH = DFT(g) / n.
  std::vector<Complex> g(n), gh(n);
  for (int i = 0; i < n; ++i) g[i] = grad_fir[i];
  cfft.Forward(g, gh);
  // H = exp(C): dL/dC = conj(H) * dL/dH.
  for (int k = 0; k < n; ++k) gh[k] = std::conj(tape.spectrum[k]) * gh[k] / double(n);
  // C = DFT(folded): dL/dfolded = Re(n * IDFT(dL/dC)).
  std::vector<Complex> gf(n);
  cfft.Inverse(gh, gf);
  std::vector<double> g_cep(n, 0.0);
  g_cep[0] = gf[0].real() * n;
  for (int i = 1; i < half; ++i) g_cep[i] = 2.0 * gf[i].real() * n;
  g_cep[half] = gf[half].real() * n;
  // cep = IDFT(even log spectrum): dL/dL_k = (1/n) sum_i g_cep[i] cos(2 pi k i / n)
  // over the full symmetric spectrum, then fold mirrored bins.
  std::vector<Complex> gk(half + 1);
  RealFft::Get(n).Forward(g_cep, gk);
  std::vector<double> out(half + 1);
  for (int k = 0; k <= half; ++k) {
    const double full = gk[k].real() / n;
    out[k] = (k == 0 || k == half) ? full : 2.0 * full;
  }
  return out;
}

std::vector<double> MinimumPhaseOf(std::span<const double> h) {
  const int n = static_cast<int>(h.size());
  if (n < 2 || n % 2 != 0) throw Error("bad_size", "length must be even");
  std::vector<Complex> spec(n / 2 + 1);
  RealFft::Get(n).Forward(h, spec);
  double peak = 0.0;
  for (const auto& v : spec) peak = std::max(peak, std::abs(v));
  if (peak == 0.0) throw Error("zero_signal", "impulse response is all zeros");
  const double floor = peak * 1e-5;
  std::vector<double> log_mag(n / 2 + 1);
  for (int k = 0; k <= n / 2; ++k) {
    log_mag[k] = std::log(std::max(std::abs(spec[k]), floor));
  }
  return MinimumPhaseFromLogMagnitude(log_mag);
}

StereoSignal MinimumPhaseFilter(const AlignedHrtfFeature& feature) {
  if (feature.normalized) {
    throw Error("normalized_feature",
                "minimum-phase filter expects a denormalized dB feature");
  }
  CheckFinite(feature);
  StereoSignal out;
  for (int c = 0; c < kNumChannels; ++c) {
    std::vector<double> log_mag(kNumBins + 1);
    for (int f = 0; f < kNumBins; ++f) log_mag[f] = feature.at(c, f) * kDbToNeper;
    log_mag[kNumBins] = log_mag[kNumBins - 1];
    out.channel(c) = MinimumPhaseFromLogMagnitude(log_mag);
  }
  return out;
}

FeatureArray MinimumPhaseFilterVjp(const AlignedHrtfFeature& feature,
                                   const StereoSignal& grad_fir) {
  FeatureArray grad{};
  for (int c = 0; c < kNumChannels; ++c) {
    std::vector<double> log_mag(kNumBins + 1);
    for (int f = 0; f < kNumBins; ++f) log_mag[f] = feature.at(c, f) * kDbToNeper;
    log_mag[kNumBins] = log_mag[kNumBins - 1];
    auto g = MinimumPhaseFromLogMagnitudeVjp(log_mag, grad_fir.channel(c));
    g[kNumBins - 1] += g[kNumBins];
    for (int f = 0; f < kNumBins; ++f) grad[c * kNumBins + f] = g[f] * kDbToNeper;
  }
  return grad;
}

}  // namespace hrtfdiff
