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

#ifndef HRTFDIFF_BRIR_MODEL_H_
#define HRTFDIFF_BRIR_MODEL_H_

#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include <nlohmann/json.hpp>

#include "hrtfdiff/adam.h"
#include "hrtfdiff/common.h"
#include "hrtfdiff/stft.h"
#include "hrtfdiff/subband_scale.h"

namespace hrtfdiff {

// Parametric BRIR state: direct path plus subband-shaped decaying noise.
struct BrirParams {
  double g = 0.15;       // linear direct gain
  double t_left = 52.0;  // direct-path delay of the left ear, samples
  double t_itd = 0.0;    // right minus left arrival, samples
  std::vector<double> w;      // subband weights, dB
  std::vector<double> alpha;  // subband decay rates, per STFT frame
};

struct ClampRanges {
  double w_min_db = 0.0;
  double w_max_db = 40.0;
  double alpha_min = 0.01;
  double alpha_max = 40.0;
};

void ClampParams(BrirParams* params, const ClampRanges& ranges = {});
bool WithinClamps(const BrirParams& params, const ClampRanges& ranges = {});

struct InitConfig {
  double g = 0.15;
  double t_left = 52.0;
  double w_db = 2.0;
  double alpha = 0.1;
  double head_radius_m = 0.0875;
};

// Interaural delay in samples from the Woodworth spherical-head formula.
double WoodworthItdSamples(const Doa& doa, double head_radius_m = 0.0875);

BrirParams InitParams(const Doa& doa, int num_bands = 40,
                      const InitConfig& init = {});

nlohmann::json BrirParamsToJson(const BrirParams& params);
BrirParams BrirParamsFromJson(const nlohmann::json& j);

struct ReverbConfig {
  StftConfig stft;
  int num_frames = 200;  // M_r
  int num_bands = 40;
  // Standard deviation of the late-field noise; sets the 0 dB reference of w.
  double late_noise_std = 1e-2;
  // First sample of the late field.
  int late_onset = 52;
  bool late_enabled = true;
  ClampRanges clamps;
};

struct BrirGradient {
  double g = 0.0;
  double t_left = 0.0;
  double t_itd = 0.0;
  std::vector<double> w;
  std::vector<double> alpha;
};

// Renders BRIRs from BrirParams and a stereo (minimum-phase) HRTF filter.
// Immutable after construction; the late-field noise is drawn once from
// `seed`.
class ReverbOperator {
 public:
  ReverbOperator(ReverbConfig config, std::uint64_t seed);

  const ReverbConfig& config() const { return config_; }
  const Stft& stft() const { return stft_; }
  const SubbandScale& scale() const { return scale_; }
  int late_length() const { return late_length_; }

  // 10^(w_b/20) * exp(-alpha_b * m) for m < M_r.
  double Envelope(const BrirParams& params, int band, int frame) const;
  // Envelope for every (frame, band), frame-major.
  std::vector<double> EnvelopeTable(const BrirParams& params) const;

  // Throws if params violate the clamp ranges.
  StereoSignal BuildBrir(const BrirParams& params, const StereoSignal& hrtf) const;
  // Direct part only (the g * delayed HRTF term).
  StereoSignal BuildDirect(const BrirParams& params, const StereoSignal& hrtf) const;
  int BrirLength(const BrirParams& params, const StereoSignal& hrtf) const;

  // Accumulates dL/dparams (and dL/dhrtf when non-null) from dL/dBRIR.
  void BuildBrirAdjoint(const BrirParams& params, const StereoSignal& hrtf,
                        const StereoSignal& grad_brir, BrirGradient* grad,
                        StereoSignal* grad_hrtf) const;

  // dry convolved with BuildBrir, per channel (full length).
  StereoSignal Render(const BrirParams& params, const StereoSignal& hrtf,
                      std::span<const double> dry) const;

 private:
  ReverbConfig config_;
  Stft stft_;
  SubbandScale scale_;
  int late_length_;
  std::array<Spectrogram, 2> noise_;
};

// Observation-fit distance: squared difference of log-magnitude STFTs
// (10 log10(|Y|^2 + eps^2), eps 80 dB below the observation's peak bin),
// averaged over time-frequency bins and summed over both ears.
class ObservationFit {
 public:
  ObservationFit(const ReverbOperator& op, std::vector<double> dry,
                 const StereoSignal& observation, double floor_db = -80.0);

  const ReverbOperator& op() const { return *op_; }
  int length() const { return length_; }
  const std::vector<double>& dry() const { return dry_; }

  double Distance(const BrirParams& params, const StereoSignal& hrtf) const;
  // Returns the distance; fills gradients when the pointers are non-null.
  double DistanceAndGradient(const BrirParams& params, const StereoSignal& hrtf,
                             BrirGradient* grad, StereoSignal* grad_hrtf) const;

  // Rendered observation truncated/zero-padded to length().
  StereoSignal RenderAligned(const BrirParams& params, const StereoSignal& hrtf) const;

 private:
  const std::vector<Complex>& DrySpectrum(int n) const;
  double Evaluate(const BrirParams& params, const StereoSignal& hrtf,
                  BrirGradient* grad, StereoSignal* grad_hrtf) const;

  const ReverbOperator* op_;
  std::vector<double> dry_;
  int length_;
  int frames_;
  double eps2_;
  std::array<std::vector<double>, 2> target_log_;
  // Not thread-safe; one ObservationFit per task.
  mutable std::map<int, std::vector<Complex>> dry_spectra_;
};

struct FitOptions {
  AdamConfig adam{0.01, 0.9, 0.999, 1e-8};
  int iterations = 50;
  // Parameter subsets left free; the rest stay fixed.
  bool fit_g = true;
  bool fit_delays = true;
  bool fit_w = true;
  bool fit_alpha = true;
};

struct FitResult {
  BrirParams params;
  double initial_residual = 0.0;
  double residual = 0.0;            // distance at the returned params
  std::vector<double> history;      // distance before each step
  std::vector<double> best;         // running minimum of history
};

// Adam on the observation-fit distance with the HRTF frozen; parameters are
// clamped before the first step and after every step. Returns the iterate
// with the lowest distance, so residual <= initial_residual.
FitResult FitParams(const BrirParams& params_in, const StereoSignal& hrtf,
                    const ObservationFit& fit, const FitOptions& options = {});

}  // namespace hrtfdiff

#endif  // HRTFDIFF_BRIR_MODEL_H_
