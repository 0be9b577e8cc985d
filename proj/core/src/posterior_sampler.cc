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

#include "hrtfdiff/posterior_sampler.h"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "hrtfdiff/min_phase.h"

namespace hrtfdiff {

namespace {

double Norm(const FeatureArray& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

void CheckProblem(const PosteriorProblem& problem) {
  if (problem.denoiser == nullptr || problem.norm == nullptr || problem.fit == nullptr) {
    throw Error("missing_input", "posterior problem is incomplete");
  }
}

}  // namespace

void to_json(nlohmann::json& j, const GuidanceConfig& c) {
  j = nlohmann::json{{"zeta", c.zeta}, {"inner_iters", c.inner_iters}, {"inner_lr", c.inner_lr}};
}

void from_json(const nlohmann::json& j, GuidanceConfig& c) {
  GuidanceConfig d;
  c.zeta = j.value("zeta", d.zeta);
  c.inner_iters = j.value("inner_iters", d.inner_iters);
  c.inner_lr = j.value("inner_lr", d.inner_lr);
}

StereoSignal FilterFromNormalized(const FeatureArray& normalized, const NormStats& norm) {
  AlignedHrtfFeature f;
  f.values = normalized;
  f.normalized = true;
  return MinimumPhaseFilter(InvertNorm(f, norm));
}

LikelihoodResult LikelihoodGrad(const FeatureArray& a, double tau, const BrirParams& psi,
                                const PosteriorProblem& problem) {
  CheckProblem(problem);
  LikelihoodResult result;
  result.h0_hat = problem.denoiser->Denoise(a, tau, problem.doa).h0_hat;
  AlignedHrtfFeature h0;
  h0.values = result.h0_hat;
  h0.normalized = true;
  const AlignedHrtfFeature db = InvertNorm(h0, *problem.norm);
  const StereoSignal fir = MinimumPhaseFilter(db);
  StereoSignal grad_fir;
  result.distance = problem.fit->DistanceAndGradient(psi, fir, nullptr, &grad_fir);
  if (!std::isfinite(result.distance)) {
    throw Error("non_finite_distance", "observation distance is not finite");
  }
  FeatureArray grad_h0 = MinimumPhaseFilterVjp(db, grad_fir);
  for (int i = 0; i < kFeatureSize; ++i) grad_h0[i] *= problem.norm->std[i];
  result.grad_a = problem.denoiser->DenoiseVjp(a, tau, problem.doa, grad_h0);
  return result;
}

FeatureArray GuidedScore(const FeatureArray& score, const FeatureArray& grad, double zeta_n) {
  FeatureArray out;
  for (int i = 0; i < kFeatureSize; ++i) out[i] = score[i] - zeta_n * grad[i];
  return out;
}

TraceEntry PosteriorStep(SamplerState& state, const PosteriorProblem& problem,
                         const std::vector<double>& grid, const GuidanceConfig& guidance,
                         std::mt19937_64& rng, FeatureArray* h0_hat) {
  CheckProblem(problem);
  const int k = state.step_index;
  if (k < 0 || k + 1 >= static_cast<int>(grid.size())) {
    throw Error("bad_state", "sampler step index outside the grid");
  }
  state.tau = grid[k];
  TraceEntry entry;
  entry.step = k;
  entry.tau = state.tau;

  const DenoiserOutput prior = problem.denoiser->Denoise(state.a, state.tau, problem.doa);
  if (h0_hat != nullptr) *h0_hat = prior.h0_hat;
  const StereoSignal fir = FilterFromNormalized(prior.h0_hat, *problem.norm);
  FitOptions options;
  options.iterations = guidance.inner_iters;
  options.adam.learning_rate = guidance.inner_lr;
  const FitResult fit = FitParams(state.psi, fir, *problem.fit, options);
  state.psi = fit.params;
  entry.fit_initial = fit.initial_residual;
  entry.distance = fit.residual;
  entry.score_norm = Norm(prior.score);

  FeatureArray score = prior.score;
  if (guidance.zeta != 0.0) {
    const LikelihoodResult lik = LikelihoodGrad(state.a, state.tau, state.psi, problem);
    entry.distance = lik.distance;
    entry.zeta_n = guidance.zeta / std::max(lik.distance, 1e-12);
    entry.guidance_norm = entry.zeta_n * Norm(lik.grad_a);
    score = GuidedScore(prior.score, lik.grad_a, entry.zeta_n);
  }
  EulerMaruyamaStep(state.a, score, grid[k], grid[k + 1], rng);
  for (double v : state.a) {
    if (!std::isfinite(v)) throw Error("non_finite_state", "diffusion iterate became non-finite");
  }
  ClampParams(&state.psi, problem.fit->op().config().clamps);
  state.step_index = k + 1;
  return entry;
}

InferenceResult RunInference(const PosteriorProblem& problem, const std::vector<double>& grid,
                             const GuidanceConfig& guidance, std::uint64_t seed) {
  CheckProblem(problem);
  if (grid.size() < 2) throw Error("bad_schedule", "grid needs at least two times");
  std::mt19937_64 rng(seed);
  SamplerState state;
  state.a = InitialNoise(grid.front(), rng);
  state.psi = InitParams(problem.doa, problem.fit->op().config().num_bands, problem.init);
  state.step_index = 0;
  InferenceResult result;
  FeatureArray h0{};
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    result.trace.push_back(PosteriorStep(state, problem, grid, guidance, rng, &h0));
  }
  result.estimate_normalized = h0;
  AlignedHrtfFeature f;
  f.doa = problem.doa;
  f.values = h0;
  f.normalized = true;
  result.estimate = InvertNorm(f, *problem.norm);
  result.psi = state.psi;
  return result;
}

void WriteTraceCsv(const std::string& path, const std::vector<TraceEntry>& trace) {
  std::ofstream out(path);
  if (!out) throw Error("io_error", "cannot write " + path);
  out.precision(12);
  out << "step,tau,fit_initial,distance,zeta_n,score_norm,guidance_norm\n";
  for (const auto& e : trace) {
    out << e.step << ',' << e.tau << ',' << e.fit_initial << ',' << e.distance << ','
        << e.zeta_n << ',' << e.score_norm << ',' << e.guidance_norm << '\n';
  }
}

}  // namespace hrtfdiff
