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

#include <benchmark/benchmark.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "hrtfdiff/brir_model.h"
#include "hrtfdiff/diffusion.h"
#include "hrtfdiff/min_phase.h"
#include "hrtfdiff/score_net.h"
#include "hrtfdiff/speech_synth.h"
#include "hrtfdiff/stft.h"
#include "hrtfdiff/synthetic_hrtf.h"

namespace hrtfdiff {
namespace {

std::vector<double> Noise(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> x(n);
  for (auto& v : x) v = d(rng);
  return x;
}

FeatureArray Features(std::uint64_t seed) {
  const std::vector<double> x = Noise(kFeatureSize, seed);
  FeatureArray a;
  std::copy(x.begin(), x.end(), a.begin());
  return a;
}

void BM_StftRoundTrip(benchmark::State& state) {
  const Stft stft;
  const std::vector<double> x = Noise(static_cast<int>(state.range(0)), 1);
  for (auto _ : state) {
    const Spectrogram s = stft.Analyze(x);
    benchmark::DoNotOptimize(stft.Synthesize(s, static_cast<int>(x.size())));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_StftRoundTrip)->Arg(44100)->Arg(441000)->Unit(benchmark::kMillisecond);

void BM_MinimumPhase(benchmark::State& state) {
  std::vector<double> log_mag(kNumBins + 1);
  for (std::size_t i = 0; i < log_mag.size(); ++i) log_mag[i] = std::sin(0.1 * i);
  for (auto _ : state) benchmark::DoNotOptimize(MinimumPhaseFromLogMagnitude(log_mag));
}
BENCHMARK(BM_MinimumPhase);

struct FitFixture {
  explicit FitFixture(double seconds)
      : op(ReverbConfig{}, 7),
        subject(MakeSyntheticSubject("1", 3)),
        hrtf(subject.hrirs[0]),
        params(InitParams(subject.grid[0])),
        dry(SynthesizeSpeech(5, {seconds})),
        fit(op, dry, op.Render(params, hrtf, dry)) {}
  ReverbOperator op;
  HrirSet subject;
  StereoSignal hrtf;
  BrirParams params;
  std::vector<double> dry;
  ObservationFit fit;
};

void BM_FitDistanceAndGradient(benchmark::State& state) {
  FitFixture f(state.range(0) / 10.0);
  BrirGradient grad;
  StereoSignal grad_hrtf;
  for (auto _ : state) {
    benchmark::DoNotOptimize(f.fit.DistanceAndGradient(f.params, f.hrtf, &grad, &grad_hrtf));
  }
}
BENCHMARK(BM_FitDistanceAndGradient)->Arg(2)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_DenoiserForward(benchmark::State& state) {
  ScoreNet net;
  const nn::Vector weights = net.params();
  const Denoiser den(net, weights, DiffusionSchedule{}, 1.0);
  const FeatureArray a = Features(2);
  const Doa doa = Doa(30.0, 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(den.Denoise(a, 1.0, doa));
}
BENCHMARK(BM_DenoiserForward)->Unit(benchmark::kMillisecond);

void BM_DenoiserVjp(benchmark::State& state) {
  ScoreNet net;
  const nn::Vector weights = net.params();
  const Denoiser den(net, weights, DiffusionSchedule{}, 1.0);
  const FeatureArray a = Features(2);
  const FeatureArray v = Features(3);
  const Doa doa = Doa(30.0, 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(den.DenoiseVjp(a, 1.0, doa, v, nullptr));
}
BENCHMARK(BM_DenoiserVjp)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace hrtfdiff

BENCHMARK_MAIN();
