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

#ifndef HRTFDIFF_HRTF_DATASET_H_
#define HRTFDIFF_HRTF_DATASET_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hrtfdiff/common.h"

namespace hrtfdiff {

struct HrirSet {
  std::string subject_id;
  int sample_rate = kSampleRate;
  std::vector<Doa> grid;
  std::vector<StereoSignal> hrirs;  // one per grid entry, kHrirLength taps
};

// Throws on duplicate DoAs, channel-length mismatch or ragged lengths.
void ValidateHrirSet(const HrirSet& set);

// Reads a SOFA (AES69) SimpleFreeFieldHRIR file through HDF5: Data.IR
// [M, R, N], SourcePosition [M, 3] and Data.SamplingRate. The result is
// resampled to 44.1 kHz and truncated or zero-padded to kHrirLength.
HrirSet LoadHrtfSet(const std::string& path);

// Writes the same minimal SOFA layout (spherical SourcePosition in degrees).
void SaveHrtfSet(const std::string& path, const HrirSet& set);

// Pure delay of an impulse response, in fractional samples: argmax of the
// 32x band-limited circular cross-correlation between `h` and its
// minimum-phase counterpart. Result lies in [-n/2, n/2).
double EstimatePureDelay(std::span<const double> h);

struct ExtractedFeature {
  AlignedHrtfFeature feature;
  std::array<double, kNumChannels> delays{};
};

// Removes each channel's pure delay, takes the 256-point DFT magnitude in dB
// (floored at -100 dB) and keeps bins 0..127.
ExtractedFeature ExtractFeatureWithDelays(const StereoSignal& hrir_pair,
                                          const Doa& doa);
AlignedHrtfFeature ExtractFeature(const StereoSignal& hrir_pair, const Doa& doa);

struct SubjectFeatures {
  std::string subject_id;
  std::vector<AlignedHrtfFeature> features;  // grid order
};

SubjectFeatures ExtractSubjectFeatures(const HrirSet& set);

struct NormStats {
  FeatureArray mean{};
  FeatureArray std{};
};

inline constexpr double kNormStdFloor = 1e-3;

NormStats FitNormStats(std::span<const AlignedHrtfFeature> features);
AlignedHrtfFeature ApplyNorm(const AlignedHrtfFeature& feature, const NormStats& stats);
AlignedHrtfFeature InvertNorm(const AlignedHrtfFeature& feature, const NormStats& stats);

nlohmann::json NormStatsToJson(const NormStats& stats);
NormStats NormStatsFromJson(const nlohmann::json& j);

struct SplitSizes {
  int val = 2;
  int test = 6;
  int train = -1;  // -1: everything not in val/test
};

struct SplitManifest {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
  std::vector<std::string> excluded;
};

// Subjects whose data duplicate others in HUTUBS (repeated simulations).
std::vector<std::string> DefaultExcludedSubjects();

SplitManifest MakeSplits(const std::vector<std::string>& subjects,
                         const SplitSizes& sizes, std::uint64_t seed,
                         const std::vector<std::string>& excluded =
                             DefaultExcludedSubjects());

nlohmann::json SplitManifestToJson(const SplitManifest& manifest);
SplitManifest SplitManifestFromJson(const nlohmann::json& j);

// Binary feature cache, little endian:
//   char[8]  "HRTFFEAT"
//   u32      version (1)
//   u32      subject id length, then the id bytes
//   u32      n_doa
//   u32      channels (2), u32 bins (128)
//   f64[n_doa][2]          azimuth, elevation in degrees
//   f32[n_doa][2][128]     row-major dB values
void WriteFeatureCache(const std::string& path, const SubjectFeatures& subject);
SubjectFeatures ReadFeatureCache(const std::string& path);

}  // namespace hrtfdiff

#endif  // HRTFDIFF_HRTF_DATASET_H_
