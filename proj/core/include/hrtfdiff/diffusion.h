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

#ifndef HRTFDIFF_DIFFUSION_H_
#define HRTFDIFF_DIFFUSION_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hrtfdiff/adam.h"
#include "hrtfdiff/common.h"
#include "hrtfdiff/hrtf_dataset.h"
#include "hrtfdiff/score_net.h"

namespace hrtfdiff {

struct DiffusionSchedule {
  double t_min_train = 0.01;
  double t_max_train = 10.0;
  double t_min_infer = 0.05;
  double t_max_infer = 8.0;
  int n_steps = 100;
};

void to_json(nlohmann::json& j, const DiffusionSchedule& s);
void from_json(const nlohmann::json& j, DiffusionSchedule& s);

enum class ScheduleMode { kTrain, kInfer };

// n_steps + 1 log-spaced times, descending from t_max to t_min.
std::vector<double> ScheduleTimes(const DiffusionSchedule& schedule, ScheduleMode mode);

// Variance-exploding preconditioning with sigma = tau.
struct Preconditioning {
  double c_skip;
  double c_out;
  double c_in;
  double c_noise;
  double loss_weight;
};

Preconditioning Precondition(double sigma, double sigma_data = 1.0);

struct DenoiserOutput {
  FeatureArray h0_hat{};
  FeatureArray score{};
};

// D(a; tau, doa) = c_skip a + c_out F(c_in a; c_noise, doa) over a fixed
// weight vector (raw or EMA).
class Denoiser {
 public:
  Denoiser(const ScoreNet& net, const nn::Vector& weights,
           const DiffusionSchedule& schedule = {}, double sigma_data = 1.0);

  DenoiserOutput Denoise(const FeatureArray& a, double tau,
                         const std::optional<Doa>& doa) const;

  // Returns (d h0_hat / d a)^T v and optionally h0_hat itself.
  FeatureArray DenoiseVjp(const FeatureArray& a, double tau,
                          const std::optional<Doa>& doa, const FeatureArray& v,
                          FeatureArray* h0_hat = nullptr) const;

  std::vector<FeatureArray> DenoiseBatch(const std::vector<FeatureArray>& a,
                                         const std::vector<double>& tau,
                                         const std::vector<std::optional<Doa>>& doa) const;

 private:
  void CheckTau(double tau) const;

  const ScoreNet& net_;
  const nn::Vector& weights_;
  DiffusionSchedule schedule_;
  double sigma_data_;
};

struct TrainConfig {
  double learning_rate = 5e-4;
  int batch_size = 32;
  long steps = 110000;
  double ema_decay = 0.999;
  double doa_noise_sigma = 0.05;
  double doa_dropout_p = 0.3;
  double sigma_data = 1.0;
  std::uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct TrainItem {
  FeatureArray feature{};  // normalized
  Doa doa;
  std::uint64_t id = 0;
};

// Random quantities for one item at one step; drawn from a stream keyed by
// (seed, step, item id) so that batch order does not matter.
struct ItemNoise {
  double sigma = 1.0;
  FeatureArray eps{};
  std::array<double, 3> doa_noise{};
  bool doa_dropped = false;
};

ItemNoise DrawItemNoise(const TrainConfig& config, const DiffusionSchedule& schedule,
                        std::uint64_t step, std::uint64_t item_id);

struct LossValue {
  double weighted = 0.0;    // mean over items of lambda(sigma) * per-item MSE
  double unweighted = 0.0;  // mean over items of per-item MSE
};

// Denoising score-matching loss for fixed noise draws; accumulates the
// gradient of the weighted loss into grad when non-null.
LossValue DsmLoss(const ScoreNet& net, const nn::Vector& params,
                  const std::vector<TrainItem>& batch,
                  const std::vector<ItemNoise>& noise, double sigma_data,
                  nn::Vector* grad);

// ema <- decay * ema + (1 - decay) * weights
void EmaUpdate(nn::Vector& ema, const nn::Vector& weights, double decay);

// Decay used at a given step: ema_decay capped by (1 + step) / (10 + step).
double EmaDecayAt(double decay, long step);

class Trainer {
 public:
  Trainer(ScoreNet& net, const TrainConfig& config,
          const DiffusionSchedule& schedule = {});

  // One Adam update on the batch; returns the weighted loss.
  double TrainStep(const std::vector<TrainItem>& batch);

  const nn::Vector& ema() const { return ema_; }
  long step() const { return step_; }

 private:
  ScoreNet& net_;
  TrainConfig config_;
  DiffusionSchedule schedule_;
  Adam adam_;
  nn::Vector ema_;
  long step_ = 0;
};

// Draws config.steps batches uniformly with replacement from items.
struct TrainResult {
  std::vector<double> losses;
  nn::Vector ema;
};

TrainResult Train(ScoreNet& net, const std::vector<TrainItem>& items,
                  const TrainConfig& config, const DiffusionSchedule& schedule,
                  const std::function<void(long, double)>& progress = {});

// a_{k+1} = a_k + (t^2 - t'^2) score + sqrt(t^2 - t'^2) z
void EulerMaruyamaStep(FeatureArray& a, const FeatureArray& score, double t,
                       double t_next, std::mt19937_64& rng);

FeatureArray InitialNoise(double t_max, std::mt19937_64& rng);

// Unguided reverse diffusion over `grid`; returns the normalized h0_hat of
// the final step.
FeatureArray SamplePriorNormalized(const Denoiser& denoiser,
                                   const std::optional<Doa>& doa,
                                   const std::vector<double>& grid,
                                   std::uint64_t seed);

AlignedHrtfFeature SamplePrior(const Denoiser& denoiser, const std::optional<Doa>& doa,
                               const std::vector<double>& grid, std::uint64_t seed,
                               const NormStats& stats);

struct Checkpoint {
  ScoreNetConfig net;
  DiffusionSchedule schedule;
  TrainConfig train;
  NormStats norm;
  long steps = 0;
  nn::Vector weights;
  nn::Vector ema;
};

void SaveCheckpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint LoadCheckpoint(const std::filesystem::path& path);

void WriteTrainingCurve(const std::filesystem::path& path,
                        const std::vector<double>& losses);

}  // namespace hrtfdiff

#endif  // HRTFDIFF_DIFFUSION_H_
