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

#ifndef HRTFDIFF_SYNTHETIC_HRTF_H_
#define HRTFDIFF_SYNTHETIC_HRTF_H_

#include <cstdint>
#include <string>
#include <vector>

#include "hrtfdiff/hrtf_dataset.h"

namespace hrtfdiff {

// Stand-in HRTF database for environments without measured/simulated sets.
// Each subject draws head radius, ear placement, pinna scale, notch depths,
// concha resonance and a few high-frequency spectral features; HRIRs are
// realized as minimum-phase filters with spherical-head arrival delays.
struct SyntheticHrtfConfig {
  std::vector<double> elevations_deg = {-30.0, -15.0, 0.0, 15.0, 30.0, 60.0};
  double azimuth_step_deg = 20.0;
  bool include_zenith = true;
  double base_delay_samples = 30.0;
};

std::vector<Doa> SyntheticGrid(const SyntheticHrtfConfig& config = {});

HrirSet MakeSyntheticSubject(const std::string& subject_id, std::uint64_t seed,
                             const SyntheticHrtfConfig& config = {});

// Subject ids "1", "2", ... `count`. With `hutubs_like`, the roster has 95
// ids (1..96 without 18) and "88"/"96" repeat "1"/"22".
std::vector<std::string> SyntheticRoster(int count, bool hutubs_like);

// Seed used for a roster id; repeated subjects share their original's seed.
std::uint64_t SyntheticSubjectSeed(const std::string& subject_id,
                                   std::uint64_t base_seed);

}  // namespace hrtfdiff

#endif  // HRTFDIFF_SYNTHETIC_HRTF_H_
