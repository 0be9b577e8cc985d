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

#include "hrtfdiff/diffusion.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace hrtfdiff {

using nn::Matrix;
using nn::Vector;

namespace {

constexpr char kCheckpointMagic[8] = {'H', 'R', 'T', 'F', 'D', 'C', 'K', 'P'};
constexpr std::uint32_t kCheckpointVersion = 1;

std::optional<std::array<double, 3>> DoaVector(const std::optional<Doa>& doa) {
  if (!doa) return std::nullopt;
  return doa->UnitVector();
}

}  // namespace

void to_json(nlohmann::json& j, const DiffusionSchedule& s) {
  j = nlohmann::json{{"t_min_train", s.t_min_train},
                     {"t_max_train", s.t_max_train},
                     {"t_min_infer", s.t_min_infer},
                     {"t_max_infer", s.t_max_infer},
                     {"n_steps", s.n_steps}};
}

void from_json(const nlohmann::json& j, DiffusionSchedule& s) {
  DiffusionSchedule d;
  s.t_min_train = j.value("t_min_train", d.t_min_train);
  s.t_max_train = j.value("t_max_train", d.t_max_train);
  s.t_min_infer = j.value("t_min_infer", d.t_min_infer);
  s.t_max_infer = j.value("t_max_infer", d.t_max_infer);
  s.n_steps = j.value("n_steps", d.n_steps);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"learning_rate", c.learning_rate},
                     {"batch_size", c.batch_size},
                     {"steps", c.steps},
                     {"ema_decay", c.ema_decay},
                     {"doa_noise_sigma", c.doa_noise_sigma},
                     {"doa_dropout_p", c.doa_dropout_p},
                     {"sigma_data", c.sigma_data},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.steps = j.value("steps", d.steps);
  c.ema_decay = j.value("ema_decay", d.ema_decay);
  c.doa_noise_sigma = j.value("doa_noise_sigma", d.doa_noise_sigma);
  c.doa_dropout_p = j.value("doa_dropout_p", d.doa_dropout_p);
  c.sigma_data = j.value("sigma_data", d.sigma_data);
  c.seed = j.value("seed", d.seed);
}

std::vector<double> ScheduleTimes(const DiffusionSchedule& schedule, ScheduleMode mode) {
  const double t_max = mode == ScheduleMode::kTrain ? schedule.t_max_train : schedule.t_max_infer;
  const double t_min = mode == ScheduleMode::kTrain ? schedule.t_min_train : schedule.t_min_infer;
  if (!(t_min > 0.0) || t_min >= t_max) {
    throw Error("bad_schedule", "schedule needs 0 < t_min < t_max");
  }
  if (schedule.n_steps < 1) throw Error("bad_schedule", "schedule needs at least one step");
  const int n = schedule.n_steps;
  std::vector<double> grid(n + 1);
  const double log_max = std::log(t_max);
  const double log_min = std::log(t_min);
  for (int i = 0; i <= n; ++i) {
    grid[i] = std::exp(log_max + (log_min - log_max) * i / n);
  }
  grid.front() = t_max;
  grid.back() = t_min;
  return grid;
}

Preconditioning Precondition(double sigma, double sigma_data) {
  const double s2 = sigma * sigma;
  const double d2 = sigma_data * sigma_data;
  Preconditioning p;
  p.c_skip = d2 / (s2 + d2);
  p.c_out = sigma * sigma_data / std::sqrt(s2 + d2);
  p.c_in = 1.0 / std::sqrt(s2 + d2);
  p.c_noise = 0.25 * std::log(sigma);
  p.loss_weight = 1.0 / (p.c_out * p.c_out);
  return p;
}

Denoiser::Denoiser(const ScoreNet& net, const Vector& weights,
                   const DiffusionSchedule& schedule, double sigma_data)
    : net_(net), weights_(weights), schedule_(schedule), sigma_data_(sigma_data) {
  if (static_cast<std::size_t>(weights.size()) != net.num_params()) {
    throw Error("shape_mismatch", "weight vector does not match the network");
  }
}

void Denoiser::CheckTau(double tau) const {
  const double tol = 1e-9;
  if (!(tau >= schedule_.t_min_train * (1.0 - tol) && tau <= schedule_.t_max_train * (1.0 + tol))) {
    throw Error("tau_out_of_range", "diffusion time " + std::to_string(tau) +
                                        " is outside the training support");
  }
}

std::vector<FeatureArray> Denoiser::DenoiseBatch(
    const std::vector<FeatureArray>& a, const std::vector<double>& tau,
    const std::vector<std::optional<Doa>>& doa) const {
  std::vector<NetCondition> cond(a.size());
  std::vector<FeatureArray> scaled(a.size());
  for (std::size_t b = 0; b < a.size(); ++b) {
    CheckTau(tau[b]);
    const Preconditioning p = Precondition(tau[b], sigma_data_);
    cond[b].c_noise = p.c_noise;
    cond[b].doa = DoaVector(doa[b]);
    for (int i = 0; i < kFeatureSize; ++i) scaled[b][i] = p.c_in * a[b][i];
  }
  const Matrix out = net_.Forward(weights_, FeaturesToMatrix(scaled), cond, nullptr);
  std::vector<FeatureArray> f = MatrixToFeatures(out);
  for (std::size_t b = 0; b < a.size(); ++b) {
    const Preconditioning p = Precondition(tau[b], sigma_data_);
    for (int i = 0; i < kFeatureSize; ++i) f[b][i] = p.c_skip * a[b][i] + p.c_out * f[b][i];
  }
  return f;
}

DenoiserOutput Denoiser::Denoise(const FeatureArray& a, double tau,
                                 const std::optional<Doa>& doa) const {
  DenoiserOutput out;
  out.h0_hat = DenoiseBatch({a}, {tau}, {doa})[0];
  const double s2 = tau * tau;
  for (int i = 0; i < kFeatureSize; ++i) out.score[i] = (out.h0_hat[i] - a[i]) / s2;
  return out;
}

FeatureArray Denoiser::DenoiseVjp(const FeatureArray& a, double tau,
                                  const std::optional<Doa>& doa, const FeatureArray& v,
                                  FeatureArray* h0_hat) const {
  CheckTau(tau);
  const Preconditioning p = Precondition(tau, sigma_data_);
  std::vector<NetCondition> cond(1);
  cond[0].c_noise = p.c_noise;
  cond[0].doa = DoaVector(doa);
  FeatureArray scaled;
  for (int i = 0; i < kFeatureSize; ++i) scaled[i] = p.c_in * a[i];
  ScoreNet::Tape tape;
  const Matrix out = net_.Forward(weights_, FeaturesToMatrix({scaled}), cond, &tape);
  if (h0_hat != nullptr) {
    const FeatureArray f = MatrixToFeatures(out)[0];
    for (int i = 0; i < kFeatureSize; ++i) (*h0_hat)[i] = p.c_skip * a[i] + p.c_out * f[i];
  }
  Matrix grad_x;
  net_.Backward(weights_, tape, FeaturesToMatrix({v}), nullptr, &grad_x);
  const FeatureArray gx = MatrixToFeatures(grad_x)[0];
  FeatureArray result;
  for (int i = 0; i < kFeatureSize; ++i) {
    result[i] = p.c_skip * v[i] + p.c_out * p.c_in * gx[i];
  }
  return result;
}

ItemNoise DrawItemNoise(const TrainConfig& config, const DiffusionSchedule& schedule,
                        std::uint64_t step, std::uint64_t item_id) {
  std::mt19937_64 rng(MixSeed(MixSeed(config.seed, step), item_id));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  ItemNoise noise;
  const double lo = std::log(schedule.t_min_train);
  const double hi = std::log(schedule.t_max_train);
  noise.sigma = std::exp(lo + (hi - lo) * u(rng));
  for (double& e : noise.eps) e = n(rng);
  for (double& d : noise.doa_noise) d = config.doa_noise_sigma * n(rng);
  noise.doa_dropped = u(rng) < config.doa_dropout_p;
  return noise;
}

LossValue DsmLoss(const ScoreNet& net, const Vector& params,
                  const std::vector<TrainItem>& batch, const std::vector<ItemNoise>& noise,
                  double sigma_data, Vector* grad) {
  const std::size_t count = batch.size();
  if (count == 0 || noise.size() != count) {
    throw Error("shape_mismatch", "batch and noise draws must be non-empty and equal in size");
  }
  std::vector<NetCondition> cond(count);
  std::vector<FeatureArray> noisy(count), scaled(count);
  std::vector<Preconditioning> pre(count);
  for (std::size_t b = 0; b < count; ++b) {
    pre[b] = Precondition(noise[b].sigma, sigma_data);
    for (int i = 0; i < kFeatureSize; ++i) {
      noisy[b][i] = batch[b].feature[i] + noise[b].sigma * noise[b].eps[i];
      scaled[b][i] = pre[b].c_in * noisy[b][i];
    }
    cond[b].c_noise = pre[b].c_noise;
    if (!noise[b].doa_dropped) {
      auto u = batch[b].doa.UnitVector();
      for (int d = 0; d < 3; ++d) u[d] += noise[b].doa_noise[d];
      cond[b].doa = u;
    }
  }
  ScoreNet::Tape tape;
  const Matrix out = net.Forward(params, FeaturesToMatrix(scaled), cond, grad ? &tape : nullptr);
  const std::vector<FeatureArray> f = MatrixToFeatures(out);
  LossValue loss;
  std::vector<FeatureArray> grad_f(count);
  for (std::size_t b = 0; b < count; ++b) {
    double mse = 0.0;
    for (int i = 0; i < kFeatureSize; ++i) {
      const double d = pre[b].c_skip * noisy[b][i] + pre[b].c_out * f[b][i] - batch[b].feature[i];
      mse += d * d;
      grad_f[b][i] = pre[b].loss_weight * 2.0 * d * pre[b].c_out / (kFeatureSize * double(count));
    }
    mse /= kFeatureSize;
    loss.unweighted += mse / count;
    loss.weighted += pre[b].loss_weight * mse / count;
  }
  if (grad != nullptr) {
    net.Backward(params, tape, FeaturesToMatrix(grad_f), grad, nullptr);
  }
  return loss;
}

void EmaUpdate(Vector& ema, const Vector& weights, double decay) {
  if (ema.size() != weights.size()) {
    throw Error("shape_mismatch", "EMA and weight vectors differ in size");
  }
  ema = decay * ema + (1.0 - decay) * weights;
}

double EmaDecayAt(double decay, long step) {
  return std::min(decay, (1.0 + step) / (10.0 + step));
}

Trainer::Trainer(ScoreNet& net, const TrainConfig& config, const DiffusionSchedule& schedule)
    : net_(net),
      config_(config),
      schedule_(schedule),
      adam_(net.num_params(), AdamConfig{config.learning_rate, 0.9, 0.999, 1e-8}),
      ema_(net.params()) {
  if (!(config.ema_decay > 0.0 && config.ema_decay < 1.0)) {
    throw Error("bad_config", "ema_decay must lie in (0, 1)");
  }
  if (!(config.doa_dropout_p >= 0.0 && config.doa_dropout_p <= 1.0)) {
    throw Error("bad_config", "doa_dropout_p must lie in [0, 1]");
  }
}

double Trainer::TrainStep(const std::vector<TrainItem>& batch) {
  std::vector<ItemNoise> noise;
  noise.reserve(batch.size());
  for (const TrainItem& item : batch) {
    noise.push_back(DrawItemNoise(config_, schedule_, step_, item.id));
  }
  Vector grad = Vector::Zero(net_.num_params());
  const LossValue loss = DsmLoss(net_, net_.params(), batch, noise, config_.sigma_data, &grad);
  if (!std::isfinite(loss.weighted) || !grad.allFinite()) {
    nlohmann::json diag = {{"step", step_},
                           {"loss", std::isfinite(loss.weighted) ? loss.weighted : -1.0},
                           {"grad_finite", grad.allFinite()},
                           {"params_finite", net_.params().allFinite()}};
    throw Error("non_finite_loss", "training diverged: " + diag.dump());
  }
  adam_.Step(std::span<double>(net_.params().data(), net_.num_params()),
             std::span<const double>(grad.data(), net_.num_params()));
  EmaUpdate(ema_, net_.params(), EmaDecayAt(config_.ema_decay, step_));
  ++step_;
  return loss.weighted;
}

TrainResult Train(ScoreNet& net, const std::vector<TrainItem>& items,
                  const TrainConfig& config, const DiffusionSchedule& schedule,
                  const std::function<void(long, double)>& progress) {
  if (items.empty()) throw Error("empty_training_set", "no training items");
  Trainer trainer(net, config, schedule);
  std::mt19937_64 rng(MixSeed(config.seed, 0xba7c));
  std::uniform_int_distribution<std::size_t> pick(0, items.size() - 1);
  TrainResult result;
  result.losses.reserve(config.steps);
  std::vector<TrainItem> batch(config.batch_size);
  for (long s = 0; s < config.steps; ++s) {
    for (auto& item : batch) item = items[pick(rng)];
    const double loss = trainer.TrainStep(batch);
    result.losses.push_back(loss);
    if (progress) progress(s, loss);
  }
  result.ema = trainer.ema();
  return result;
}

void EulerMaruyamaStep(FeatureArray& a, const FeatureArray& score, double t, double t_next,
                       std::mt19937_64& rng) {
  const double dt = t * t - t_next * t_next;
  const double noise_scale = std::sqrt(std::max(dt, 0.0));
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < kFeatureSize; ++i) {
    a[i] = a[i] + dt * score[i] + noise_scale * n(rng);
  }
}

FeatureArray InitialNoise(double t_max, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  FeatureArray a;
  for (double& v : a) v = t_max * n(rng);
  return a;
}

FeatureArray SamplePriorNormalized(const Denoiser& denoiser, const std::optional<Doa>& doa,
                                   const std::vector<double>& grid, std::uint64_t seed) {
  if (grid.size() < 2) throw Error("bad_schedule", "grid needs at least two times");
  std::mt19937_64 rng(seed);
  FeatureArray a = InitialNoise(grid.front(), rng);
  FeatureArray h0{};
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const DenoiserOutput out = denoiser.Denoise(a, grid[k], doa);
    h0 = out.h0_hat;
    EulerMaruyamaStep(a, out.score, grid[k], grid[k + 1], rng);
  }
  return h0;
}

AlignedHrtfFeature SamplePrior(const Denoiser& denoiser, const std::optional<Doa>& doa,
                               const std::vector<double>& grid, std::uint64_t seed,
                               const NormStats& stats) {
  AlignedHrtfFeature feature;
  feature.doa = doa.value_or(Doa());
  feature.values = SamplePriorNormalized(denoiser, doa, grid, seed);
  feature.normalized = true;
  return InvertNorm(feature, stats);
}

void SaveCheckpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  if (checkpoint.weights.size() != checkpoint.ema.size()) {
    throw Error("shape_mismatch", "raw and EMA weights differ in size");
  }
  nlohmann::json header = {{"net", checkpoint.net},
                           {"schedule", checkpoint.schedule},
                           {"train", checkpoint.train},
                           {"norm", NormStatsToJson(checkpoint.norm)},
                           {"steps", checkpoint.steps}};
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io_error", "cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  out.write(reinterpret_cast<const char*>(&kCheckpointVersion), sizeof(kCheckpointVersion));
  const std::uint64_t text_len = text.size();
  out.write(reinterpret_cast<const char*>(&text_len), sizeof(text_len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  const std::uint64_t n = checkpoint.weights.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(checkpoint.weights.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
  out.write(reinterpret_cast<const char*>(checkpoint.ema.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
  if (!out) throw Error("io_error", "failed writing checkpoint " + path.string());
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("missing_checkpoint", "checkpoint not found: " + path.string());
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t text_len = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&text_len), sizeof(text_len));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0 ||
      version != kCheckpointVersion || text_len > (1u << 26)) {
    throw Error("bad_checkpoint", "not a checkpoint file: " + path.string());
  }
  std::string text(text_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(text_len));
  const nlohmann::json header = nlohmann::json::parse(text);
  Checkpoint ckpt;
  ckpt.net = header.at("net").get<ScoreNetConfig>();
  ckpt.schedule = header.at("schedule").get<DiffusionSchedule>();
  ckpt.train = header.at("train").get<TrainConfig>();
  ckpt.norm = NormStatsFromJson(header.at("norm"));
  ckpt.steps = header.at("steps").get<long>();
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!in || n > (1u << 28)) throw Error("bad_checkpoint", "truncated checkpoint " + path.string());
  ckpt.weights.resize(static_cast<Eigen::Index>(n));
  ckpt.ema.resize(static_cast<Eigen::Index>(n));
  in.read(reinterpret_cast<char*>(ckpt.weights.data()), static_cast<std::streamsize>(n * sizeof(double)));
  in.read(reinterpret_cast<char*>(ckpt.ema.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw Error("bad_checkpoint", "truncated checkpoint " + path.string());
  return ckpt;
}

void WriteTrainingCurve(const std::filesystem::path& path, const std::vector<double>& losses) {
  std::ofstream out(path);
  if (!out) throw Error("io_error", "cannot write " + path.string());
  out << "step,loss\n";
  out.precision(17);
  for (std::size_t i = 0; i < losses.size(); ++i) out << i << ',' << losses[i] << '\n';
}

}  // namespace hrtfdiff
