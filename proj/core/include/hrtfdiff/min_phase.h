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

#ifndef HRTFDIFF_MIN_PHASE_H_
#define HRTFDIFF_MIN_PHASE_H_

#include <span>
#include <vector>

#include "hrtfdiff/common.h"

namespace hrtfdiff {

// Minimum-phase FIR of length n whose n-point DFT magnitude equals
// exp(log_mag) exactly. `log_mag` holds natural-log magnitudes for bins
// 0..n/2 (inclusive of Nyquist). Built by folding the real cepstrum.
std::vector<double> MinimumPhaseFromLogMagnitude(std::span<const double> log_mag);

// Vector-Jacobian product of MinimumPhaseFromLogMagnitude: given dL/dh,
// returns dL/d(log_mag) for bins 0..n/2.
std::vector<double> MinimumPhaseFromLogMagnitudeVjp(
    std::span<const double> log_mag, std::span<const double> grad_fir);

// Minimum-phase version of an arbitrary impulse response (same length).
// Magnitudes are floored 100 dB below the spectral peak.
std::vector<double> MinimumPhaseOf(std::span<const double> h);

// Per-channel 256-tap minimum-phase filters from a denormalized dB feature.
// The missing Nyquist bin repeats bin 127.
StereoSignal MinimumPhaseFilter(const AlignedHrtfFeature& feature);

// dL/d(feature dB values) given dL/d(filter taps).
FeatureArray MinimumPhaseFilterVjp(const AlignedHrtfFeature& feature,
                                   const StereoSignal& grad_fir);

}  // namespace hrtfdiff

#endif  // HRTFDIFF_MIN_PHASE_H_
