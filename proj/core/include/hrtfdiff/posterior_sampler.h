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

#ifndef HRTFDIFF_POSTERIOR_SAMPLER_H_
#define HRTFDIFF_POSTERIOR_SAMPLER_H_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hrtfdiff/brir_model.h"
#include "hrtfdiff/diffusion.h"

namespace hrtfdiff {

struct GuidanceConfig {
  double zeta = 3e3;  // zeta_0; the per-step scale is zeta_0 / distance
  int inner_iters = 50;
  double inner_lr = 0.01;
};

void to_json(nlohmann::json& j, const GuidanceConfig& c);
void from_json(const nlohmann::json& j, GuidanceConfig& c);

struct SamplerState {
  FeatureArray a{};
  BrirParams psi;
  int step_index = 0;
  double tau = 0.0;
};

// Everything one estimation needs. Holds references; the caller keeps the
// denoiser, statistics and fit alive.
struct PosteriorProblem {
  const Denoiser* denoiser = nullptr;
  const NormStats* norm = nullptr;
  const ObservationFit* fit = nullptr;
  Doa doa;
  InitConfig init;
};

// FIR realized from a normalized feature.
StereoSignal FilterFromNormalized(const FeatureArray& normalized, const NormStats& norm);

struct LikelihoodResult {
  double distance = 0.0;
  FeatureArray grad_a{};
  FeatureArray h0_hat{};
};

// Distance between the observation and the rendering of (psi, filter(h0(a)))
// and its gradient with respect to a through renderer, filter and network.
LikelihoodResult LikelihoodGrad(const FeatureArray& a, double tau, const BrirParams& psi,
                                const PosteriorProblem& problem);

// score - zeta_n * grad
FeatureArray GuidedScore(const FeatureArray& score, const FeatureArray& grad, double zeta_n);

struct TraceEntry {
  int step = 0;
  double tau = 0.0;
  double fit_initial = 0.0;  // distance before the inner fit
  double distance = 0.0;     // distance after the inner fit
  double zeta_n = 0.0;
  double score_norm = 0.0;
  double guidance_norm = 0.0;
};

// One reverse step from grid[state.step_index] to grid[state.step_index + 1].
TraceEntry PosteriorStep(SamplerState& state, const PosteriorProblem& problem,
                         const std::vector<double>& grid, const GuidanceConfig& guidance,
                         std::mt19937_64& rng, FeatureArray* h0_hat);

struct InferenceResult {
  FeatureArray estimate_normalized{};
  AlignedHrtfFeature estimate;
  BrirParams psi;
  std::vector<TraceEntry> trace;
};

// a ~ N(0, grid[0]^2 I), psi = InitParams(doa); one PosteriorStep per grid
// interval; the estimate is h0_hat of the final step.
InferenceResult RunInference(const PosteriorProblem& problem, const std::vector<double>& grid,
                             const GuidanceConfig& guidance, std::uint64_t seed);

void WriteTraceCsv(const std::string& path, const std::vector<TraceEntry>& trace);

}  // namespace hrtfdiff

#endif  // HRTFDIFF_POSTERIOR_SAMPLER_H_
