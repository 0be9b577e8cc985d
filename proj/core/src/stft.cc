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

#include "hrtfdiff/stft.h"

#include <algorithm>
#include <cmath>

#include "hrtfdiff/common.h"

namespace hrtfdiff {

Stft::Stft(StftConfig config) : config_(config) {
  const int n = config_.window_length;
  if (n <= 0 || n % 2 != 0 || config_.hop <= 0 || n % config_.hop != 0) {
    throw Error("bad_stft_config",
                "window length must be even and a multiple of the hop");
  }
  window_.resize(n);
  for (int i = 0; i < n; ++i) window_[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / n);
  // Sum of squared windows at any sample; constant for Hann at hop <= n/4.
  overlap_gain_ = 0.0;
  for (int m = 0; m < n / config_.hop; ++m) {
    const double w = window_[m * config_.hop];
    overlap_gain_ += w * w;
  }
}

int Stft::NumFrames(int signal_length) const {
  if (signal_length < config_.window_length) {
    throw Error("signal_too_short", "signal shorter than one STFT window");
  }
  return (signal_length + Offset() - 1) / config_.hop + 1;
}

Spectrogram Stft::Analyze(std::span<const double> x) const {
  return Analyze(x, NumFrames(static_cast<int>(x.size())));
}

Spectrogram Stft::Analyze(std::span<const double> x, int frames) const {
  const int n = config_.window_length;
  const int len = static_cast<int>(x.size());
  const RealFft& fft = RealFft::Get(n);
  Spectrogram out(frames, config_.num_bins());
  std::vector<double> buf(n);
  for (int m = 0; m < frames; ++m) {
    const int start = m * config_.hop - Offset();
    for (int t = 0; t < n; ++t) {
      const int i = start + t;
      buf[t] = (i >= 0 && i < len) ? x[i] * window_[t] : 0.0;
    }
    fft.Forward(buf, std::span<Complex>(out.frame(m), out.bins));
  }
  return out;
}

std::vector<double> Stft::Synthesize(const Spectrogram& spec, int length) const {
  const int n = config_.window_length;
  const RealFft& fft = RealFft::Get(n);
  std::vector<double> out(length, 0.0);
  std::vector<double> buf(n);
  const double scale = 1.0 / overlap_gain_;
  for (int m = 0; m < spec.frames; ++m) {
    const int start = m * config_.hop - Offset();
    if (start >= length) break;
    fft.Inverse(std::span<const Complex>(spec.frame(m), spec.bins), buf);
    for (int t = 0; t < n; ++t) {
      const int i = start + t;
      if (i >= 0 && i < length) out[i] += scale * window_[t] * buf[t];
    }
  }
  return out;
}

std::vector<double> Stft::AnalyzeAdjoint(const Spectrogram& grad, int length) const {
  const int n = config_.window_length;
  const int half = n / 2;
  const RealFft& fft = RealFft::Get(n);
  std::vector<double> out(length, 0.0);
  std::vector<Complex> g(half + 1);
  std::vector<double> buf(n);
  for (int m = 0; m < grad.frames; ++m) {
    const int start = m * config_.hop - Offset();
    if (start >= length) break;
    // Re(sum_k G_k e^{+j theta k t}) over the one-sided bins.
    const Complex* gm = grad.frame(m);
    for (int k = 0; k <= half; ++k) g[k] = gm[k];
    g[0] *= 2.0;
    g[half] *= 2.0;
    fft.InverseUnscaled(g, buf);
    for (int t = 0; t < n; ++t) {
      const int i = start + t;
      if (i >= 0 && i < length) out[i] += 0.5 * window_[t] * buf[t];
    }
  }
  return out;
}

Spectrogram Stft::SynthesizeAdjoint(std::span<const double> grad, int frames) const {
  const int n = config_.window_length;
  const int half = n / 2;
  const int len = static_cast<int>(grad.size());
  const RealFft& fft = RealFft::Get(n);
  Spectrogram out(frames, config_.num_bins());
  std::vector<double> buf(n);
  const double scale = 1.0 / (overlap_gain_ * n);
  for (int m = 0; m < frames; ++m) {
    const int start = m * config_.hop - Offset();
    for (int t = 0; t < n; ++t) {
      const int i = start + t;
      buf[t] = (i >= 0 && i < len) ? grad[i] * window_[t] : 0.0;
    }
    Complex* z = out.frame(m);
    fft.Forward(buf, std::span<Complex>(z, out.bins));
    for (int k = 0; k <= half; ++k) {
      const double c = (k == 0 || k == half) ? 1.0 : 2.0;
      z[k] *= c * scale;
    }
    z[0] = Complex(z[0].real(), 0.0);
    z[half] = Complex(z[half].real(), 0.0);
  }
  return out;
}

}  // namespace hrtfdiff
