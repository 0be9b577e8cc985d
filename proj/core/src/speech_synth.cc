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

#include "hrtfdiff/speech_synth.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "hrtfdiff/common.h"

namespace hrtfdiff {

namespace {

// Two-pole resonator, unit gain at its centre frequency.
class Resonator {
 public:
  Resonator(double freq, double bandwidth, int fs) { Set(freq, bandwidth, fs); }

  void Set(double freq, double bandwidth, int fs) {
    const double r = std::exp(-kPi * bandwidth / fs);
    a1_ = 2.0 * r * std::cos(2.0 * kPi * freq / fs);
    a2_ = -r * r;
    gain_ = 1.0 - r;
  }

  double Process(double x) {
    const double y = gain_ * x + a1_ * y1_ + a2_ * y2_;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  double a1_ = 0.0, a2_ = 0.0, gain_ = 1.0;
  double y1_ = 0.0, y2_ = 0.0;
};

constexpr std::array<std::array<double, 3>, 8> kVowels = {{
    {730, 1090, 2440}, {570, 840, 2410}, {300, 870, 2240}, {440, 1020, 2240},
    {270, 2290, 3010}, {390, 1990, 2550}, {530, 1840, 2480}, {660, 1720, 2410},
}};

double Envelope(int i, int n) {
  const int ramp = std::max(1, std::min(n / 5, 400));
  if (i < ramp) return 0.5 - 0.5 * std::cos(kPi * i / ramp);
  if (i >= n - ramp) return 0.5 - 0.5 * std::cos(kPi * (n - 1 - i) / ramp);
  return 1.0;
}

}  // namespace

std::vector<double> SynthesizeSpeech(std::uint64_t seed,
                                     const SpeechSynthConfig& config) {
  const int fs = config.sample_rate;
  const auto total = static_cast<std::size_t>(config.seconds * fs);
  std::vector<double> out(total, 0.0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::size_t pos = static_cast<std::size_t>(0.01 * fs);
  const double base_f0 = 95.0 + 120.0 * u(rng);
  while (pos < total) {
    const double kind = u(rng);
    if (kind < 0.15) {
      pos += static_cast<std::size_t>((0.03 + 0.07 * u(rng)) * fs);
      continue;
    }
    if (kind < 0.40) {
      const int n = static_cast<int>((0.04 + 0.08 * u(rng)) * fs);
      Resonator res(3500.0 + 4000.0 * u(rng), 1500.0 + 2000.0 * u(rng), fs);
      const double amp = 0.3 + 0.5 * u(rng);
      double prev = 0.0;
      for (int i = 0; i < n && pos + i < total; ++i) {
        const double w = gauss(rng);
        const double hp = w - prev;
        prev = w;
        out[pos + i] += amp * Envelope(i, n) * (0.4 * hp + 3.0 * res.Process(w));
      }
      pos += n;
      continue;
    }
    const int n = static_cast<int>((0.08 + 0.15 * u(rng)) * fs);
    const auto& vowel = kVowels[static_cast<std::size_t>(u(rng) * kVowels.size())];
    std::array<Resonator, 4> formants = {
        Resonator(vowel[0], 80.0, fs), Resonator(vowel[1], 100.0, fs),
        Resonator(vowel[2], 120.0, fs), Resonator(3300.0 + 300.0 * u(rng), 200.0, fs)};
    const double f0_start = base_f0 * (0.85 + 0.3 * u(rng));
    const double f0_end = base_f0 * (0.85 + 0.3 * u(rng));
    const double amp = 0.6 + 0.6 * u(rng);
    double phase = 0.0;
    double tilt = 0.0;
    for (int i = 0; i < n && pos + i < total; ++i) {
      const double frac = double(i) / n;
      const double f0 = f0_start + (f0_end - f0_start) * frac +
                        3.0 * std::sin(2.0 * kPi * 5.5 * i / fs);
      phase += f0 / fs;
      double pulse = 0.0;
      if (phase >= 1.0) {
        phase -= 1.0;
        pulse = 1.0;
      }
      // Glottal source: impulse train with a one-pole tilt and aspiration.
      tilt = 0.9 * tilt + pulse + 0.02 * gauss(rng);
      double y = 0.0;
      const double gains[4] = {1.0, 0.7, 0.4, 0.2};
      for (int f = 0; f < 4; ++f) y += gains[f] * formants[f].Process(tilt);
      out[pos + i] += amp * Envelope(i, n) * y;
    }
    pos += n;
  }

  const double energy = Energy(out);
  if (energy > 0.0) {
    const double scale = config.rms / std::sqrt(energy / total);
    for (double& v : out) v *= scale;
  }
  return out;
}

}  // namespace hrtfdiff
