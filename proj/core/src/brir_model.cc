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

#include "hrtfdiff/brir_model.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "hrtfdiff/fft.h"
#include "hrtfdiff/fractional_delay.h"

namespace hrtfdiff {

namespace {

constexpr double kDbToNeper = 0.11512925464970229;  // ln(10) / 20
constexpr double kTenOverLn10 = 4.3429448190325175;  // 10 / ln(10)

double DirectDelay(const BrirParams& p, int channel) {
  return channel == 0 ? p.t_left : p.t_left + p.t_itd;
}

}  // namespace

void ClampParams(BrirParams* params, const ClampRanges& r) {
  for (double& w : params->w) w = std::clamp(w, r.w_min_db, r.w_max_db);
  for (double& a : params->alpha) a = std::clamp(a, r.alpha_min, r.alpha_max);
  params->t_left = std::max(params->t_left, 0.0);
  params->g = std::max(params->g, 0.0);
}

bool WithinClamps(const BrirParams& params, const ClampRanges& r) {
  for (double w : params.w) {
    if (!(w >= r.w_min_db && w <= r.w_max_db)) return false;
  }
  for (double a : params.alpha) {
    if (!(a >= r.alpha_min && a <= r.alpha_max)) return false;
  }
  return params.t_left >= 0.0 && params.g >= 0.0 && std::isfinite(params.t_itd);
}

double WoodworthItdSamples(const Doa& doa, double head_radius_m) {
  const auto u = doa.UnitVector();
  // Lateral angle: positive towards the left ear.
  const double lateral = std::asin(std::clamp(u[1], -1.0, 1.0));
  return head_radius_m / kSpeedOfSound * (std::sin(lateral) + lateral) *
         kSampleRate;
}

BrirParams InitParams(const Doa& doa, int num_bands, const InitConfig& init) {
  BrirParams p;
  p.g = init.g;
  p.t_left = init.t_left;
  p.t_itd = WoodworthItdSamples(doa, init.head_radius_m);
  p.w.assign(num_bands, init.w_db);
  p.alpha.assign(num_bands, init.alpha);
  return p;
}

nlohmann::json BrirParamsToJson(const BrirParams& p) {
  return nlohmann::json{{"g", p.g},
                        {"t_left", p.t_left},
                        {"t_itd", p.t_itd},
                        {"w_db", p.w},
                        {"alpha", p.alpha}};
}

BrirParams BrirParamsFromJson(const nlohmann::json& j) {
  BrirParams p;
  p.g = j.at("g").get<double>();
  p.t_left = j.at("t_left").get<double>();
  p.t_itd = j.at("t_itd").get<double>();
  p.w = j.at("w_db").get<std::vector<double>>();
  p.alpha = j.at("alpha").get<std::vector<double>>();
  if (p.w.size() != p.alpha.size()) {
    throw Error("bad_params", "w_db and alpha must have the same length");
  }
  return p;
}

ReverbOperator::ReverbOperator(ReverbConfig config, std::uint64_t seed)
    : config_(config),
      stft_(config.stft),
      scale_(config.num_bands, config.stft.num_bins()),
      late_length_(config.num_frames * config.stft.hop) {
  if (config_.num_frames < 1) throw Error("bad_reverb_config", "num_frames < 1");
  if (config_.late_onset < 0) throw Error("bad_reverb_config", "late_onset < 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, config_.late_noise_std);
  const int noise_len = late_length_ + config_.stft.window_length;
  for (int c = 0; c < kNumChannels; ++c) {
    std::vector<double> noise(noise_len);
    for (double& v : noise) v = normal(rng);
    Spectrogram full = stft_.Analyze(noise, config_.num_frames);
    noise_[c] = std::move(full);
  }
}

double ReverbOperator::Envelope(const BrirParams& params, int band, int frame) const {
  if (frame < 0 || frame >= config_.num_frames) return 0.0;
  return std::exp(params.w[band] * kDbToNeper - params.alpha[band] * frame);
}

std::vector<double> ReverbOperator::EnvelopeTable(const BrirParams& params) const {
  const int bands = config_.num_bands;
  std::vector<double> env(std::size_t(config_.num_frames) * bands);
  for (int m = 0; m < config_.num_frames; ++m) {
    for (int b = 0; b < bands; ++b) env[std::size_t(m) * bands + b] = Envelope(params, b, m);
  }
  return env;
}

int ReverbOperator::BrirLength(const BrirParams& params,
                               const StereoSignal& hrtf) const {
  int length = 1;
  for (int c = 0; c < kNumChannels; ++c) {
    const double d = std::max(0.0, DirectDelay(params, c));
    length = std::max(length, static_cast<int>(std::ceil(d)) +
                                  static_cast<int>(hrtf.channel(c).size()) +
                                  kInterpHalfWidth + 1);
  }
  if (config_.late_enabled) length = std::max(length, config_.late_onset + late_length_);
  return length;
}

StereoSignal ReverbOperator::BuildDirect(const BrirParams& params,
                                         const StereoSignal& hrtf) const {
  StereoSignal out;
  out.Resize(BrirLength(params, hrtf));
  for (int c = 0; c < kNumChannels; ++c) {
    AddDelayed(hrtf.channel(c), DirectDelay(params, c), params.g, out.channel(c));
  }
  return out;
}

StereoSignal ReverbOperator::BuildBrir(const BrirParams& params,
                                       const StereoSignal& hrtf) const {
  if (static_cast<int>(params.w.size()) != config_.num_bands ||
      static_cast<int>(params.alpha.size()) != config_.num_bands) {
    throw Error("bad_params", "parameter vectors do not match the band count");
  }
  if (!WithinClamps(params, config_.clamps)) {
    throw Error("params_out_of_range",
                "BRIR parameters outside clamp ranges: " +
                    BrirParamsToJson(params).dump());
  }
  StereoSignal out = BuildDirect(params, hrtf);
  if (!config_.late_enabled) return out;
  const int start = config_.late_onset;
  const int bins = stft_.config().num_bins();
  const std::vector<double> env = EnvelopeTable(params);
  const int bands = config_.num_bands;
  for (int c = 0; c < kNumChannels; ++c) {
    Spectrogram masked = noise_[c];
    for (int m = 0; m < masked.frames; ++m) {
      Complex* z = masked.frame(m);
      const double* em = env.data() + std::size_t(m) * bands;
      for (int k = 0; k < bins; ++k) z[k] *= em[scale_.BandOfBin(k)];
    }
    const std::vector<double> late = stft_.Synthesize(masked, late_length_);
    auto& ch = out.channel(c);
    for (int n = 0; n < late_length_; ++n) ch[start + n] += late[n];
  }
  return out;
}

void ReverbOperator::BuildBrirAdjoint(const BrirParams& params,
                                      const StereoSignal& hrtf,
                                      const StereoSignal& grad_brir,
                                      BrirGradient* grad,
                                      StereoSignal* grad_hrtf) const {
  const int bands = config_.num_bands;
  if (grad->w.size() != std::size_t(bands)) grad->w.assign(bands, 0.0);
  if (grad->alpha.size() != std::size_t(bands)) grad->alpha.assign(bands, 0.0);
  const int length = static_cast<int>(grad_brir.size());
  for (int c = 0; c < kNumChannels; ++c) {
    const auto& h = hrtf.channel(c);
    const auto& gb = grad_brir.channel(c);
    const double delay = DirectDelay(params, c);
    std::vector<double> unit(length, 0.0);
    AddDelayed(h, delay, 1.0, unit);
    double dot = 0.0;
    for (int n = 0; n < length; ++n) dot += unit[n] * gb[n];
    grad->g += dot;
    const double d_delay = params.g * DelayDerivative(h, delay, gb);
    grad->t_left += d_delay;
    if (c == 1) grad->t_itd += d_delay;
    if (grad_hrtf != nullptr) {
      auto& gh = grad_hrtf->channel(c);
      gh.resize(h.size(), 0.0);
      AddDelayedAdjoint(gb, delay, params.g, gh);
    }
  }
  if (!config_.late_enabled) return;
  const int start = config_.late_onset;
  const int bins = stft_.config().num_bins();
  const std::vector<double> env = EnvelopeTable(params);
  for (int c = 0; c < kNumChannels; ++c) {
    const auto& gb = grad_brir.channel(c);
    std::vector<double> g_late(late_length_, 0.0);
    for (int n = 0; n < late_length_ && start + n < length; ++n) g_late[n] = gb[start + n];
    const Spectrogram gz = stft_.SynthesizeAdjoint(g_late, config_.num_frames);
    const Spectrogram& noise = noise_[c];
    for (int m = 0; m < gz.frames; ++m) {
      const Complex* gzm = gz.frame(m);
      const Complex* nm = noise.frame(m);
      for (int k = 0; k < bins; ++k) {
        const int b = scale_.BandOfBin(k);
        const double q = (std::conj(nm[k]) * gzm[k]).real();
        const double e = env[std::size_t(m) * bands + b];
        grad->w[b] += q * e * kDbToNeper;
        grad->alpha[b] -= q * e * m;
      }
    }
  }
}

StereoSignal ReverbOperator::Render(const BrirParams& params,
                                    const StereoSignal& hrtf,
                                    std::span<const double> dry) const {
  if (dry.empty()) throw Error("empty_signal", "dry excitation is empty");
  const StereoSignal brir = BuildBrir(params, hrtf);
  StereoSignal out;
  out.left = FftConvolve(dry, brir.left);
  out.right = FftConvolve(dry, brir.right);
  return out;
}

ObservationFit::ObservationFit(const ReverbOperator& op, std::vector<double> dry,
                               const StereoSignal& observation, double floor_db)
    : op_(&op), dry_(std::move(dry)), length_(static_cast<int>(observation.size())) {
  if (dry_.empty()) throw Error("empty_signal", "dry excitation is empty");
  if (observation.left.size() != observation.right.size()) {
    throw Error("bad_observation", "observation channels differ in length");
  }
  frames_ = op.stft().NumFrames(length_);
  double peak2 = 0.0;
  std::array<Spectrogram, 2> obs;
  for (int c = 0; c < kNumChannels; ++c) {
    obs[c] = op.stft().Analyze(observation.channel(c), frames_);
    for (const auto& v : obs[c].data) peak2 = std::max(peak2, std::norm(v));
  }
  if (peak2 == 0.0) peak2 = 1.0;
  eps2_ = peak2 * std::pow(10.0, floor_db / 10.0);
  for (int c = 0; c < kNumChannels; ++c) {
    target_log_[c].resize(obs[c].data.size());
    for (std::size_t i = 0; i < obs[c].data.size(); ++i) {
      target_log_[c][i] = kTenOverLn10 * std::log(std::norm(obs[c].data[i]) + eps2_);
    }
  }
}

const std::vector<Complex>& ObservationFit::DrySpectrum(int n) const {
  auto it = dry_spectra_.find(n);
  if (it != dry_spectra_.end()) return it->second;
  std::vector<double> buf(n, 0.0);
  std::copy(dry_.begin(), dry_.end(), buf.begin());
  std::vector<Complex> spec(n / 2 + 1);
  RealFft::Get(n).Forward(buf, spec);
  return dry_spectra_.emplace(n, std::move(spec)).first->second;
}

StereoSignal ObservationFit::RenderAligned(const BrirParams& params,
                                           const StereoSignal& hrtf) const {
  const StereoSignal brir = op_->BuildBrir(params, hrtf);
  const int brir_len = static_cast<int>(brir.size());
  const int n = NextPowerOfTwo(std::max(length_, static_cast<int>(dry_.size()) + brir_len));
  const RealFft& fft = RealFft::Get(n);
  const auto& dry_spec = DrySpectrum(n);
  StereoSignal out;
  std::vector<double> buf(n);
  std::vector<Complex> spec(n / 2 + 1);
  for (int c = 0; c < kNumChannels; ++c) {
    std::fill(buf.begin(), buf.end(), 0.0);
    std::copy(brir.channel(c).begin(), brir.channel(c).end(), buf.begin());
    fft.Forward(buf, spec);
    for (int k = 0; k <= n / 2; ++k) spec[k] *= dry_spec[k];
    fft.Inverse(spec, buf);
    out.channel(c).assign(buf.begin(), buf.begin() + length_);
  }
  return out;
}

double ObservationFit::Distance(const BrirParams& params,
                                const StereoSignal& hrtf) const {
  return Evaluate(params, hrtf, nullptr, nullptr);
}

double ObservationFit::DistanceAndGradient(const BrirParams& params,
                                           const StereoSignal& hrtf,
                                           BrirGradient* grad,
                                           StereoSignal* grad_hrtf) const {
  return Evaluate(params, hrtf, grad, grad_hrtf);
}

double ObservationFit::Evaluate(const BrirParams& params, const StereoSignal& hrtf,
                                BrirGradient* grad, StereoSignal* grad_hrtf) const {
  const StereoSignal brir = op_->BuildBrir(params, hrtf);
  const int brir_len = static_cast<int>(brir.size());
  const int n = NextPowerOfTwo(std::max(length_, static_cast<int>(dry_.size()) + brir_len));
  const RealFft& fft = RealFft::Get(n);
  const auto& dry_spec = DrySpectrum(n);
  const Stft& stft = op_->stft();
  const bool want_grad = grad != nullptr || grad_hrtf != nullptr;

  std::vector<double> buf(n);
  std::vector<Complex> spec(n / 2 + 1);
  StereoSignal grad_brir;
  if (want_grad) grad_brir.Resize(brir_len);
  double total = 0.0;
  for (int c = 0; c < kNumChannels; ++c) {
    std::fill(buf.begin(), buf.end(), 0.0);
    std::copy(brir.channel(c).begin(), brir.channel(c).end(), buf.begin());
    fft.Forward(buf, spec);
    for (int k = 0; k <= n / 2; ++k) spec[k] *= dry_spec[k];
    fft.Inverse(spec, buf);
    const std::span<const double> y(buf.data(), length_);
    Spectrogram ys = stft.Analyze(y, frames_);
    const auto& target = target_log_[c];
    const double count = static_cast<double>(ys.data.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < ys.data.size(); ++i) {
      const double p = std::norm(ys.data[i]) + eps2_;
      const double diff = kTenOverLn10 * std::log(p) - target[i];
      acc += diff * diff;
      if (want_grad) ys.data[i] *= (2.0 / count) * diff * (2.0 * kTenOverLn10) / p;
    }
    total += acc / count;
    if (!want_grad) continue;
    // ys now holds dD/dY; pull back through STFT, truncation and convolution.
    const std::vector<double> gy = stft.AnalyzeAdjoint(ys, length_);
    std::fill(buf.begin(), buf.end(), 0.0);
    std::copy(gy.begin(), gy.end(), buf.begin());
    fft.Forward(buf, spec);
    for (int k = 0; k <= n / 2; ++k) spec[k] *= std::conj(dry_spec[k]);
    fft.Inverse(spec, buf);
    std::copy(buf.begin(), buf.begin() + brir_len, grad_brir.channel(c).begin());
  }
  if (want_grad) {
    BrirGradient local;
    BrirGradient* g = grad != nullptr ? grad : &local;
    op_->BuildBrirAdjoint(params, hrtf, grad_brir, g, grad_hrtf);
  }
  return total;
}

FitResult FitParams(const BrirParams& params_in, const StereoSignal& hrtf,
                    const ObservationFit& fit, const FitOptions& options) {
  const ClampRanges& clamps = fit.op().config().clamps;
  FitResult result;
  result.params = params_in;
  ClampParams(&result.params, clamps);
  BrirParams& p = result.params;
  const int bands = static_cast<int>(p.w.size());
  // Flat layout: g, t_left, t_itd, w[bands], alpha[bands].
  std::vector<double> theta(3 + 2 * bands), grad_flat(3 + 2 * bands);
  Adam adam(theta.size(), options.adam);
  auto pack = [&]() {
    theta[0] = p.g;
    theta[1] = p.t_left;
    theta[2] = p.t_itd;
    for (int b = 0; b < bands; ++b) {
      theta[3 + b] = p.w[b];
      theta[3 + bands + b] = p.alpha[b];
    }
  };
  auto unpack = [&]() {
    p.g = theta[0];
    p.t_left = theta[1];
    p.t_itd = theta[2];
    for (int b = 0; b < bands; ++b) {
      p.w[b] = theta[3 + b];
      p.alpha[b] = theta[3 + bands + b];
    }
  };
  double best_d = std::numeric_limits<double>::infinity();
  BrirParams best_p = p;
  for (int it = 0; it < options.iterations; ++it) {
    BrirGradient g;
    const double d = fit.DistanceAndGradient(p, hrtf, &g, nullptr);
    if (it == 0) result.initial_residual = d;
    result.history.push_back(d);
    if (d < best_d) {
      best_d = d;
      best_p = p;
    }
    result.best.push_back(best_d);
    grad_flat[0] = options.fit_g ? g.g : 0.0;
    grad_flat[1] = options.fit_delays ? g.t_left : 0.0;
    grad_flat[2] = options.fit_delays ? g.t_itd : 0.0;
    for (int b = 0; b < bands; ++b) {
      grad_flat[3 + b] = options.fit_w ? g.w[b] : 0.0;
      grad_flat[3 + bands + b] = options.fit_alpha ? g.alpha[b] : 0.0;
    }
    for (double v : grad_flat) {
      if (!std::isfinite(v) || !std::isfinite(d)) {
        throw Error("non_finite_gradient",
                    "non-finite gradient in BRIR fit at iteration " +
                        std::to_string(it) + "; state: " +
                        BrirParamsToJson(p).dump());
      }
    }
    pack();
    adam.Step(theta, grad_flat);
    unpack();
    ClampParams(&p, clamps);
  }
  const double final_d = fit.Distance(p, hrtf);
  if (options.iterations == 0) result.initial_residual = final_d;
  if (final_d <= best_d) {
    result.residual = final_d;
  } else {
    result.residual = best_d;
    p = best_p;
  }
  return result;
}

}  // namespace hrtfdiff
