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

#include "hrtfdiff/synthetic_hrtf.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>

#include "hrtfdiff/fractional_delay.h"
#include "hrtfdiff/min_phase.h"

namespace hrtfdiff {

namespace {

constexpr double kDegToRad = kPi / 180.0;

struct SubjectTraits {
  double head_radius;
  double ear_offset_rad;  // rearward rotation of the ear axis
  double pinna_scale;
  double notch1_depth_db;
  double notch2_depth_db;
  double concha_gain_db;
  double concha_hz;
  std::vector<double> bump_hz;
  std::vector<double> bump_db;
  std::vector<double> bump_elev_shift;
};

SubjectTraits DrawTraits(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  SubjectTraits t;
  t.head_radius = 0.080 + 0.015 * u(rng);
  t.ear_offset_rad = (4.0 + 8.0 * u(rng)) * kDegToRad;
  t.pinna_scale = 0.85 + 0.30 * u(rng);
  t.notch1_depth_db = 10.0 + 15.0 * u(rng);
  t.notch2_depth_db = 6.0 + 12.0 * u(rng);
  t.concha_gain_db = 3.0 + 6.0 * u(rng);
  t.concha_hz = (3800.0 + 1400.0 * u(rng)) * t.pinna_scale;
  for (int i = 0; i < 6; ++i) {
    t.bump_hz.push_back(3000.0 * std::pow(6.0, u(rng)));
    t.bump_db.push_back(4.0 * n(rng));
    t.bump_elev_shift.push_back(0.25 * n(rng));
  }
  return t;
}

double Gaussian(double x, double center, double width) {
  const double z = (x - center) / width;
  return std::exp(-0.5 * z * z);
}

// Log-magnitude response (dB) for one ear at bins 0..n/2.
std::vector<double> EarResponseDb(const SubjectTraits& t, const Doa& doa, int ear,
                                  int n) {
  const auto u = doa.UnitVector();
  const double side = ear == 0 ? 1.0 : -1.0;
  // Ear axis points sideways, rotated slightly backwards.
  const double ex = -std::sin(t.ear_offset_rad);
  const double ey = side * std::cos(t.ear_offset_rad);
  const double cos_inc = std::clamp(u[0] * ex + u[1] * ey, -1.0, 1.0);
  const double theta_inc = std::acos(cos_inc) / kDegToRad;
  const double shadow_alpha = 1.05 + 0.95 * std::cos(theta_inc / 150.0 * 180.0 * kDegToRad);
  const double w0 = kSpeedOfSound / t.head_radius;
  const double el = doa.elevation();
  const double rear = 0.5 * (1.0 - u[0]);  // 0 front, 1 back
  const double visibility = 0.5 * (1.0 + cos_inc);  // pinna cues fade contralaterally
  const double notch1 = t.pinna_scale * (5500.0 + 4500.0 * (el + 45.0) / 135.0);
  const double notch2 = 1.45 * notch1;
  std::vector<double> db(n / 2 + 1);
  for (int k = 0; k <= n / 2; ++k) {
    const double f = std::max(1.0, k * double(kSampleRate) / n);
    const double w = 2.0 * kPi * f;
    const std::complex<double> num(1.0, shadow_alpha * w / (2.0 * w0));
    const std::complex<double> den(1.0, w / (2.0 * w0));
    double v = 20.0 * std::log10(std::abs(num / den));
    const double lf = std::log(f);
    const double hf = 1.0 / (1.0 + std::exp(-(f - 3000.0) / 600.0));
    v += t.concha_gain_db * Gaussian(lf, std::log(t.concha_hz), 0.25) * (0.4 + 0.6 * visibility);
    v -= t.notch1_depth_db * Gaussian(lf, std::log(notch1), 0.07) * (0.3 + 0.7 * visibility);
    v -= t.notch2_depth_db * Gaussian(lf, std::log(notch2), 0.06) * (0.3 + 0.7 * visibility);
    v -= 4.0 * rear * hf;
    for (std::size_t i = 0; i < t.bump_hz.size(); ++i) {
      const double center = std::log(t.bump_hz[i]) + t.bump_elev_shift[i] * std::sin(el * kDegToRad);
      v += t.bump_db[i] * Gaussian(lf, center, 0.12) * hf * (0.5 + 0.5 * visibility);
    }
    db[k] = v;
  }
  return db;
}

// Arrival time at one ear relative to the head centre, in seconds
// (spherical head, incidence angle from the ear axis).
double EarArrival(const SubjectTraits& t, const Doa& doa, int ear) {
  const auto u = doa.UnitVector();
  const double side = ear == 0 ? 1.0 : -1.0;
  const double cos_inc = std::clamp(u[1] * side, -1.0, 1.0);
  const double inc = std::acos(cos_inc);
  const double a_c = t.head_radius / kSpeedOfSound;
  if (inc < kPi / 2.0) return -a_c * std::cos(inc);
  return a_c * (inc - kPi / 2.0);
}

}  // namespace

std::vector<Doa> SyntheticGrid(const SyntheticHrtfConfig& config) {
  std::vector<Doa> grid;
  for (double el : config.elevations_deg) {
    for (double az = 0.0; az < 360.0 - 1e-9; az += config.azimuth_step_deg) {
      grid.emplace_back(az, el);
    }
  }
  if (config.include_zenith) grid.emplace_back(0.0, 90.0);
  return grid;
}

HrirSet MakeSyntheticSubject(const std::string& subject_id, std::uint64_t seed,
                             const SyntheticHrtfConfig& config) {
  const SubjectTraits traits = DrawTraits(seed);
  HrirSet set;
  set.subject_id = subject_id;
  set.sample_rate = kSampleRate;
  set.grid = SyntheticGrid(config);
  for (const Doa& doa : set.grid) {
    StereoSignal pair;
    for (int ear = 0; ear < kNumChannels; ++ear) {
      const std::vector<double> db = EarResponseDb(traits, doa, ear, kHrirLength);
      std::vector<double> log_mag(db.size());
      for (std::size_t k = 0; k < db.size(); ++k) log_mag[k] = db[k] * std::log(10.0) / 20.0;
      const std::vector<double> mp = MinimumPhaseFromLogMagnitude(log_mag);
      const double delay =
          config.base_delay_samples + EarArrival(traits, doa, ear) * kSampleRate;
      std::vector<double> h(kHrirLength, 0.0);
      AddDelayed(mp, delay, 1.0, h);
      pair.channel(ear) = std::move(h);
    }
    set.hrirs.push_back(std::move(pair));
  }
  return set;
}

std::vector<std::string> SyntheticRoster(int count, bool hutubs_like) {
  std::vector<std::string> ids;
  if (hutubs_like) {
    for (int i = 1; i <= 96; ++i) {
      if (i != 18) ids.push_back(std::to_string(i));
    }
    return ids;
  }
  for (int i = 1; i <= count; ++i) ids.push_back(std::to_string(i));
  return ids;
}

std::uint64_t SyntheticSubjectSeed(const std::string& subject_id,
                                   std::uint64_t base_seed) {
  std::string id = subject_id;
  if (id == "88") id = "1";
  if (id == "96") id = "22";
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : id) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  return MixSeed(base_seed, h);
}

}  // namespace hrtfdiff
