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

#ifndef HRTFDIFF_COMMON_H_
#define HRTFDIFF_COMMON_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace hrtfdiff {

inline constexpr int kSampleRate = 44100;
// HRIR length used for feature extraction; a 256-point real DFT has 129
// bins, 128 once the Nyquist bin is dropped.
inline constexpr int kHrirLength = 256;
inline constexpr int kNumBins = 128;
inline constexpr int kNumChannels = 2;
inline constexpr int kFeatureSize = kNumChannels * kNumBins;
inline constexpr double kSpeedOfSound = 343.0;
inline constexpr double kPi = 3.14159265358979323846;

// Error carrying a short machine-readable code next to the message. The CLI
// serializes both into its error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

// Direction of arrival in the head frame. Azimuth is counter-clockwise from
// the front (90 deg = left ear), elevation positive upwards.
class Doa {
 public:
  Doa() = default;
  Doa(double azimuth_deg, double elevation_deg);

  static Doa FromVector(double x, double y, double z);

  double azimuth() const { return azimuth_deg_; }
  double elevation() const { return elevation_deg_; }
  std::array<double, 3> UnitVector() const;

  // Great-circle angle in radians.
  double AngleTo(const Doa& other) const;

  bool operator==(const Doa& other) const {
    return azimuth_deg_ == other.azimuth_deg_ &&
           elevation_deg_ == other.elevation_deg_;
  }

 private:
  double azimuth_deg_ = 0.0;
  double elevation_deg_ = 0.0;
};

// Index of the grid entry closest to `doa` (largest dot product).
std::size_t NearestDoaIndex(const std::vector<Doa>& grid, const Doa& doa);

using FeatureArray = std::array<double, kFeatureSize>;

// 2x128 time-aligned log-magnitude spectrum (dB) for one DoA, stored
// channel-major: values[c * kNumBins + f].
struct AlignedHrtfFeature {
  Doa doa;
  FeatureArray values{};
  bool normalized = false;

  double at(int channel, int bin) const {
    return values[channel * kNumBins + bin];
  }
  double& at(int channel, int bin) { return values[channel * kNumBins + bin]; }
};

// Throws if any value is NaN or infinite.
void CheckFinite(const AlignedHrtfFeature& feature);

struct StereoSignal {
  std::vector<double> left;
  std::vector<double> right;

  std::vector<double>& channel(int c) { return c == 0 ? left : right; }
  const std::vector<double>& channel(int c) const {
    return c == 0 ? left : right;
  }
  std::size_t size() const { return left.size(); }
  void Resize(std::size_t n) {
    left.resize(n, 0.0);
    right.resize(n, 0.0);
  }
};

double Energy(const std::vector<double>& x);
double Energy(const StereoSignal& x);

// Deterministic 64-bit seed mixing (splitmix64 finalizer).
std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t stream);

}  // namespace hrtfdiff

#endif  // HRTFDIFF_COMMON_H_
