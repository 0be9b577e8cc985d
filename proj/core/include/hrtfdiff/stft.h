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

#ifndef HRTFDIFF_STFT_H_
#define HRTFDIFF_STFT_H_

#include <span>
#include <vector>

#include "hrtfdiff/fft.h"

namespace hrtfdiff {

struct StftConfig {
  int window_length = 1024;  // ~23 ms Hann at 44.1 kHz
  int hop = 256;             // 75% overlap
  int num_bins() const { return window_length / 2 + 1; }
};

// frames x bins, row-major.
struct Spectrogram {
  int frames = 0;
  int bins = 0;
  std::vector<Complex> data;

  Spectrogram() = default;
  Spectrogram(int f, int b) : frames(f), bins(b), data(std::size_t(f) * b) {}
  Complex& at(int m, int k) { return data[std::size_t(m) * bins + k]; }
  const Complex& at(int m, int k) const { return data[std::size_t(m) * bins + k]; }
  Complex* frame(int m) { return data.data() + std::size_t(m) * bins; }
  const Complex* frame(int m) const { return data.data() + std::size_t(m) * bins; }
};

// Periodic-Hann STFT with window_length - hop leading zeros, so every input
// sample is covered by window_length / hop frames and Synthesize(Analyze(x))
// reproduces x over its whole length. Both maps are linear; their adjoints
// are exposed for gradient computations.
class Stft {
 public:
  explicit Stft(StftConfig config = {});

  const StftConfig& config() const { return config_; }
  const std::vector<double>& window() const { return window_; }
  int NumFrames(int signal_length) const;
  // Constant window-power sum at this overlap (1.5 for Hann at 75%).
  double overlap_gain() const { return overlap_gain_; }

  Spectrogram Analyze(std::span<const double> x) const;
  // Analyze with an explicit frame count (input zero-extended or truncated).
  Spectrogram Analyze(std::span<const double> x, int frames) const;
  std::vector<double> Synthesize(const Spectrogram& spec, int length) const;

  // Gradient of <G, Analyze(x)> (real inner product on Re/Im) w.r.t. x.
  std::vector<double> AnalyzeAdjoint(const Spectrogram& grad, int length) const;
  // Gradient of <g, Synthesize(Z)> w.r.t. Z, returned as dRe + j dIm.
  Spectrogram SynthesizeAdjoint(std::span<const double> grad, int frames) const;

 private:
  int Offset() const { return config_.window_length - config_.hop; }

  StftConfig config_;
  std::vector<double> window_;
  double overlap_gain_;
};

}  // namespace hrtfdiff

#endif  // HRTFDIFF_STFT_H_
