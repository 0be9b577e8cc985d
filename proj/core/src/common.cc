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

#include "hrtfdiff/common.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hrtfdiff {

namespace {
constexpr double kDegToRad = kPi / 180.0;
}  // namespace

Doa::Doa(double azimuth_deg, double elevation_deg) {
  if (!std::isfinite(azimuth_deg) || !std::isfinite(elevation_deg) ||
      elevation_deg < -90.0 || elevation_deg > 90.0) {
    throw Error("invalid_doa", "DoA out of range: az=" +
                                   std::to_string(azimuth_deg) +
                                   " el=" + std::to_string(elevation_deg));
  }
  double az = std::fmod(azimuth_deg, 360.0);
  if (az < 0.0) az += 360.0;
  if (az >= 360.0) az = 0.0;
  azimuth_deg_ = az;
  elevation_deg_ = elevation_deg;
}

Doa Doa::FromVector(double x, double y, double z) {
  const double r = std::sqrt(x * x + y * y + z * z);
  if (r == 0.0) throw Error("invalid_doa", "zero direction vector");
  const double el = std::asin(std::clamp(z / r, -1.0, 1.0)) / kDegToRad;
  double az = 0.0;
  if (std::hypot(x, y) > 1e-12 * r) az = std::atan2(y, x) / kDegToRad;
  return Doa(az, el);
}

std::array<double, 3> Doa::UnitVector() const {
  const double az = azimuth_deg_ * kDegToRad;
  const double el = elevation_deg_ * kDegToRad;
  return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
          std::sin(el)};
}

double Doa::AngleTo(const Doa& other) const {
  const auto a = UnitVector();
  const auto b = other.UnitVector();
  const double dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
  const double cx = a[1] * b[2] - a[2] * b[1];
  const double cy = a[2] * b[0] - a[0] * b[2];
  const double cz = a[0] * b[1] - a[1] * b[0];
  return std::atan2(std::sqrt(cx * cx + cy * cy + cz * cz), dot);
}

std::size_t NearestDoaIndex(const std::vector<Doa>& grid, const Doa& doa) {
  if (grid.empty()) throw Error("empty_grid", "DoA grid is empty");
  const auto u = doa.UnitVector();
  std::size_t best = 0;
  double best_dot = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto v = grid[i].UnitVector();
    const double dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    if (dot > best_dot) {
      best_dot = dot;
      best = i;
    }
  }
  return best;
}

void CheckFinite(const AlignedHrtfFeature& feature) {
  for (double v : feature.values) {
    if (!std::isfinite(v)) {
      throw Error("non_finite_feature", "feature contains non-finite values");
    }
  }
}

double Energy(const std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

double Energy(const StereoSignal& x) { return Energy(x.left) + Energy(x.right); }

std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace hrtfdiff
