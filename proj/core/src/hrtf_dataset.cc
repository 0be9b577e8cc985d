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

#include "hrtfdiff/hrtf_dataset.h"

#include <hdf5.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "hrtfdiff/fft.h"
#include "hrtfdiff/fractional_delay.h"
#include "hrtfdiff/min_phase.h"

namespace hrtfdiff {

namespace {

constexpr int kUpsample = 32;
constexpr double kMagnitudeFloor = 1e-5;  // -100 dB

// Closes an HDF5 handle on scope exit.
class H5Handle {
 public:
  H5Handle(hid_t id, herr_t (*closer)(hid_t)) : id_(id), closer_(closer) {}
  ~H5Handle() {
    if (id_ >= 0) closer_(id_);
  }
  H5Handle(const H5Handle&) = delete;
  H5Handle& operator=(const H5Handle&) = delete;
  hid_t get() const { return id_; }
  bool ok() const { return id_ >= 0; }

 private:
  hid_t id_;
  herr_t (*closer_)(hid_t);
};

void SilenceHdf5Errors() { H5Eset_auto2(H5E_DEFAULT, nullptr, nullptr); }

std::vector<double> ReadDoubleDataset(hid_t file, const char* name,
                                      std::vector<hsize_t>* dims) {
  H5Handle ds(H5Dopen2(file, name, H5P_DEFAULT), H5Dclose);
  if (!ds.ok()) return {};
  H5Handle space(H5Dget_space(ds.get()), H5Sclose);
  const int rank = H5Sget_simple_extent_ndims(space.get());
  dims->assign(std::max(rank, 0), 0);
  if (rank > 0) H5Sget_simple_extent_dims(space.get(), dims->data(), nullptr);
  hssize_t count = H5Sget_simple_extent_npoints(space.get());
  std::vector<double> data(std::max<hssize_t>(count, 0));
  if (count > 0 && H5Dread(ds.get(), H5T_NATIVE_DOUBLE, H5S_ALL, H5S_ALL,
                           H5P_DEFAULT, data.data()) < 0) {
    throw Error("bad_sofa", std::string("failed reading dataset ") + name);
  }
  return data;
}

std::string ReadStringAttribute(hid_t obj, const char* name) {
  if (H5Aexists(obj, name) <= 0) return {};
  H5Handle attr(H5Aopen(obj, name, H5P_DEFAULT), H5Aclose);
  if (!attr.ok()) return {};
  H5Handle type(H5Aget_type(attr.get()), H5Tclose);
  if (H5Tget_class(type.get()) != H5T_STRING) return {};
  if (H5Tis_variable_str(type.get()) > 0) {
    char* value = nullptr;
    H5Handle mem(H5Tcopy(H5T_C_S1), H5Tclose);
    H5Tset_size(mem.get(), H5T_VARIABLE);
    if (H5Aread(attr.get(), mem.get(), &value) < 0 || value == nullptr) return {};
    std::string out(value);
    H5free_memory(value);
    return out;
  }
  const std::size_t size = H5Tget_size(type.get());
  std::string out(size, '\0');
  if (H5Aread(attr.get(), type.get(), out.data()) < 0) return {};
  out.resize(std::strlen(out.c_str()));
  return out;
}

void WriteStringAttribute(hid_t obj, const char* name, const std::string& value) {
  H5Handle type(H5Tcopy(H5T_C_S1), H5Tclose);
  H5Tset_size(type.get(), std::max<std::size_t>(value.size(), 1));
  H5Tset_strpad(type.get(), H5T_STR_NULLTERM);
  H5Handle space(H5Screate(H5S_SCALAR), H5Sclose);
  H5Handle attr(H5Acreate2(obj, name, type.get(), space.get(), H5P_DEFAULT,
                           H5P_DEFAULT),
                H5Aclose);
  std::string padded = value.empty() ? std::string(1, '\0') : value;
  H5Awrite(attr.get(), type.get(), padded.data());
}

void WriteDoubleDataset(hid_t file, const char* name,
                        const std::vector<hsize_t>& dims,
                        const std::vector<double>& data) {
  H5Handle space(H5Screate_simple(static_cast<int>(dims.size()), dims.data(), nullptr),
                 H5Sclose);
  H5Handle ds(H5Dcreate2(file, name, H5T_IEEE_F64LE, space.get(), H5P_DEFAULT,
                         H5P_DEFAULT, H5P_DEFAULT),
              H5Dclose);
  if (!ds.ok() || H5Dwrite(ds.get(), H5T_NATIVE_DOUBLE, H5S_ALL, H5S_ALL,
                           H5P_DEFAULT, data.data()) < 0) {
    throw Error("io_error", std::string("failed writing dataset ") + name);
  }
}

std::vector<double> FitLength(std::vector<double> h, int length) {
  h.resize(length, 0.0);
  return h;
}

}  // namespace

void ValidateHrirSet(const HrirSet& set) {
  if (set.grid.size() != set.hrirs.size()) {
    throw Error("bad_hrir_set", "grid and HRIR counts differ");
  }
  for (std::size_t i = 0; i < set.grid.size(); ++i) {
    for (std::size_t j = i + 1; j < set.grid.size(); ++j) {
      if (set.grid[i].AngleTo(set.grid[j]) < 1e-9) {
        throw Error("bad_hrir_set", "duplicate DoA in grid of subject " + set.subject_id);
      }
    }
  }
  for (const auto& h : set.hrirs) {
    if (h.left.size() != h.right.size() ||
        h.left.size() != set.hrirs.front().left.size()) {
      throw Error("bad_hrir_set", "HRIRs must share one length");
    }
  }
}

HrirSet LoadHrtfSet(const std::string& path) {
  SilenceHdf5Errors();
  if (!std::filesystem::exists(path)) {
    throw Error("missing_input", "HRTF file not found: " + path);
  }
  H5Handle file(H5Fopen(path.c_str(), H5F_ACC_RDONLY, H5P_DEFAULT), H5Fclose);
  if (!file.ok()) throw Error("bad_sofa", "cannot open as SOFA/HDF5: " + path);

  std::vector<hsize_t> ir_dims;
  const std::vector<double> ir = ReadDoubleDataset(file.get(), "Data.IR", &ir_dims);
  if (ir_dims.size() != 3) throw Error("bad_sofa", "Data.IR missing or not 3-D in " + path);
  const std::size_t m = ir_dims[0], r = ir_dims[1], n = ir_dims[2];
  if (r != 2) {
    throw Error("non_stereo", "non-stereo HRIR data (" + std::to_string(r) +
                                  " receivers) in " + path);
  }
  std::vector<hsize_t> pos_dims;
  const std::vector<double> pos = ReadDoubleDataset(file.get(), "SourcePosition", &pos_dims);
  if (pos_dims.size() != 2 || pos_dims[1] != 3 || pos_dims[0] != m) {
    throw Error("missing_doa", "missing DoA metadata (SourcePosition [M,3]) in " + path);
  }
  std::string pos_type;
  {
    H5Handle ds(H5Dopen2(file.get(), "SourcePosition", H5P_DEFAULT), H5Dclose);
    pos_type = ReadStringAttribute(ds.get(), "Type");
  }
  std::vector<hsize_t> sr_dims;
  const std::vector<double> sr = ReadDoubleDataset(file.get(), "Data.SamplingRate", &sr_dims);
  const double rate = sr.empty() ? kSampleRate : sr[0];

  HrirSet set;
  set.subject_id = ReadStringAttribute(file.get(), "ListenerShortName");
  if (set.subject_id.empty()) set.subject_id = std::filesystem::path(path).stem().string();
  set.sample_rate = kSampleRate;
  for (std::size_t i = 0; i < m; ++i) {
    const double a = pos[i * 3], b = pos[i * 3 + 1], c = pos[i * 3 + 2];
    if (pos_type == "cartesian") {
      set.grid.push_back(Doa::FromVector(a, b, c));
    } else {
      set.grid.emplace_back(a, b);
    }
    StereoSignal h;
    for (int ch = 0; ch < 2; ++ch) {
      std::vector<double> taps(ir.begin() + (i * r + ch) * n,
                               ir.begin() + (i * r + ch + 1) * n);
      if (rate != kSampleRate) taps = Resample(taps, rate, kSampleRate);
      h.channel(ch) = FitLength(std::move(taps), kHrirLength);
    }
    set.hrirs.push_back(std::move(h));
  }
  ValidateHrirSet(set);
  return set;
}

void SaveHrtfSet(const std::string& path, const HrirSet& set) {
  SilenceHdf5Errors();
  ValidateHrirSet(set);
  H5Handle file(H5Fcreate(path.c_str(), H5F_ACC_TRUNC, H5P_DEFAULT, H5P_DEFAULT),
                H5Fclose);
  if (!file.ok()) throw Error("io_error", "cannot create SOFA file: " + path);
  WriteStringAttribute(file.get(), "Conventions", "SOFA");
  WriteStringAttribute(file.get(), "SOFAConventions", "SimpleFreeFieldHRIR");
  WriteStringAttribute(file.get(), "ListenerShortName", set.subject_id);
  const hsize_t m = set.grid.size();
  const hsize_t n = set.hrirs.empty() ? 0 : set.hrirs.front().left.size();
  std::vector<double> ir(m * 2 * n), pos(m * 3);
  for (hsize_t i = 0; i < m; ++i) {
    for (int ch = 0; ch < 2; ++ch) {
      const auto& taps = set.hrirs[i].channel(ch);
      std::copy(taps.begin(), taps.end(), ir.begin() + (i * 2 + ch) * n);
    }
    pos[i * 3] = set.grid[i].azimuth();
    pos[i * 3 + 1] = set.grid[i].elevation();
    pos[i * 3 + 2] = 1.5;
  }
  WriteDoubleDataset(file.get(), "Data.IR", {m, 2, n}, ir);
  WriteDoubleDataset(file.get(), "SourcePosition", {m, 3}, pos);
  WriteDoubleDataset(file.get(), "Data.SamplingRate", {1},
                     {static_cast<double>(set.sample_rate)});
  H5Handle ds(H5Dopen2(file.get(), "SourcePosition", H5P_DEFAULT), H5Dclose);
  WriteStringAttribute(ds.get(), "Type", "spherical");
  WriteStringAttribute(ds.get(), "Units", "degree, degree, metre");
}

double EstimatePureDelay(std::span<const double> h) {
  const int n = static_cast<int>(h.size());
  if (n < 2 || n % 2 != 0) throw Error("bad_size", "impulse response length must be even");
  bool nonzero = false;
  for (double v : h) nonzero |= (v != 0.0);
  if (!nonzero) throw Error("zero_signal", "cannot estimate the delay of an all-zero response");
  const std::vector<double> hmp = MinimumPhaseOf(h);
  const RealFft& fft = RealFft::Get(n);
  std::vector<Complex> a(n / 2 + 1), b(n / 2 + 1);
  fft.Forward(h, a);
  fft.Forward(hmp, b);
  // Cross-spectrum, zero-padded to 32x for band-limited interpolation.
  const int big = n * kUpsample;
  std::vector<Complex> cross(big / 2 + 1, Complex(0.0, 0.0));
  for (int k = 0; k <= n / 2; ++k) cross[k] = a[k] * std::conj(b[k]);
  cross[n / 2] *= 0.5;
  std::vector<double> r(big);
  RealFft::Get(big).Inverse(cross, r);
  int best = 0;
  for (int i = 1; i < big; ++i) {
    if (r[i] > r[best]) best = i;
  }
  // Parabolic refinement around the peak.
  const double ym = r[(best - 1 + big) % big], y0 = r[best], yp = r[(best + 1) % big];
  const double denom = ym - 2.0 * y0 + yp;
  double frac = denom != 0.0 ? 0.5 * (ym - yp) / denom : 0.0;
  frac = std::clamp(frac, -0.5, 0.5);
  double lag = (best + frac) / kUpsample;
  if (lag >= n / 2.0) lag -= n;
  return lag;
}

ExtractedFeature ExtractFeatureWithDelays(const StereoSignal& hrir_pair, const Doa& doa) {
  ExtractedFeature out;
  out.feature.doa = doa;
  out.feature.normalized = false;
  for (int c = 0; c < kNumChannels; ++c) {
    const auto& h = hrir_pair.channel(c);
    if (static_cast<int>(h.size()) != kHrirLength) {
      throw Error("bad_size", "HRIR channel must have " + std::to_string(kHrirLength) + " taps");
    }
    bool nonzero = false;
    for (double v : h) nonzero |= (v != 0.0);
    if (!nonzero) throw Error("zero_signal", "HRIR channel is all zeros");
    const double delay = EstimatePureDelay(h);
    out.delays[c] = delay;
    std::vector<Complex> spec(kHrirLength / 2 + 1);
    RealFft::Get(kHrirLength).Forward(h, spec);
    for (int f = 0; f < kNumBins; ++f) {
      // Circular band-limited advance by the pure delay.
      const Complex aligned =
          spec[f] * std::polar(1.0, 2.0 * kPi * f * delay / kHrirLength);
      out.feature.at(c, f) = 20.0 * std::log10(std::max(std::abs(aligned), kMagnitudeFloor));
    }
  }
  return out;
}

AlignedHrtfFeature ExtractFeature(const StereoSignal& hrir_pair, const Doa& doa) {
  return ExtractFeatureWithDelays(hrir_pair, doa).feature;
}

SubjectFeatures ExtractSubjectFeatures(const HrirSet& set) {
  ValidateHrirSet(set);
  SubjectFeatures out;
  out.subject_id = set.subject_id;
  for (std::size_t i = 0; i < set.grid.size(); ++i) {
    out.features.push_back(ExtractFeature(set.hrirs[i], set.grid[i]));
  }
  return out;
}

NormStats FitNormStats(std::span<const AlignedHrtfFeature> features) {
  if (features.size() < 2) {
    throw Error("empty_input", "need at least two features to fit normalization");
  }
  NormStats stats;
  const double n = static_cast<double>(features.size());
  for (const auto& f : features) {
    if (f.normalized) throw Error("normalized_feature", "fit on raw features only");
    for (int i = 0; i < kFeatureSize; ++i) stats.mean[i] += f.values[i];
  }
  for (double& m : stats.mean) m /= n;
  for (const auto& f : features) {
    for (int i = 0; i < kFeatureSize; ++i) {
      const double d = f.values[i] - stats.mean[i];
      stats.std[i] += d * d;
    }
  }
  for (double& s : stats.std) s = std::max(std::sqrt(s / n), kNormStdFloor);
  return stats;
}

AlignedHrtfFeature ApplyNorm(const AlignedHrtfFeature& feature, const NormStats& stats) {
  if (feature.normalized) throw Error("normalized_feature", "feature already normalized");
  AlignedHrtfFeature out = feature;
  for (int i = 0; i < kFeatureSize; ++i) {
    out.values[i] = (feature.values[i] - stats.mean[i]) / stats.std[i];
  }
  out.normalized = true;
  return out;
}

AlignedHrtfFeature InvertNorm(const AlignedHrtfFeature& feature, const NormStats& stats) {
  if (!feature.normalized) throw Error("normalized_feature", "feature is not normalized");
  AlignedHrtfFeature out = feature;
  for (int i = 0; i < kFeatureSize; ++i) {
    out.values[i] = feature.values[i] * stats.std[i] + stats.mean[i];
  }
  out.normalized = false;
  return out;
}

nlohmann::json NormStatsToJson(const NormStats& stats) {
  return {{"mean", std::vector<double>(stats.mean.begin(), stats.mean.end())},
          {"std", std::vector<double>(stats.std.begin(), stats.std.end())}};
}

NormStats NormStatsFromJson(const nlohmann::json& j) {
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto std = j.at("std").get<std::vector<double>>();
  if (mean.size() != kFeatureSize || std.size() != kFeatureSize) {
    throw Error("bad_norm_stats", "normalization stats must have 256 entries");
  }
  NormStats s;
  std::copy(mean.begin(), mean.end(), s.mean.begin());
  std::copy(std.begin(), std.end(), s.std.begin());
  return s;
}

std::vector<std::string> DefaultExcludedSubjects() { return {"88", "96"}; }

SplitManifest MakeSplits(const std::vector<std::string>& subjects,
                         const SplitSizes& sizes, std::uint64_t seed,
                         const std::vector<std::string>& excluded) {
  SplitManifest manifest;
  std::vector<std::string> pool;
  std::set<std::string> seen;
  for (const auto& s : subjects) {
    if (!seen.insert(s).second) throw Error("bad_roster", "duplicate subject id " + s);
    if (std::find(excluded.begin(), excluded.end(), s) != excluded.end()) {
      manifest.excluded.push_back(s);
    } else {
      pool.push_back(s);
    }
  }
  const int held_out = sizes.val + sizes.test;
  const int train = sizes.train < 0 ? static_cast<int>(pool.size()) - held_out : sizes.train;
  if (sizes.val < 0 || sizes.test < 0 || train < 1 ||
      train + held_out > static_cast<int>(pool.size())) {
    throw Error("roster_too_small",
                "roster of " + std::to_string(pool.size()) +
                    " usable subjects cannot hold the requested split sizes");
  }
  std::sort(pool.begin(), pool.end());
  std::mt19937_64 rng(seed);
  for (std::size_t i = pool.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(pool[i - 1], pool[j]);
  }
  auto it = pool.begin();
  manifest.test.assign(it, it + sizes.test);
  it += sizes.test;
  manifest.val.assign(it, it + sizes.val);
  it += sizes.val;
  manifest.train.assign(it, it + train);
  return manifest;
}

nlohmann::json SplitManifestToJson(const SplitManifest& m) {
  return {{"train", m.train}, {"val", m.val}, {"test", m.test}, {"excluded", m.excluded}};
}

SplitManifest SplitManifestFromJson(const nlohmann::json& j) {
  SplitManifest m;
  m.train = j.at("train").get<std::vector<std::string>>();
  m.val = j.at("val").get<std::vector<std::string>>();
  m.test = j.at("test").get<std::vector<std::string>>();
  m.excluded = j.value("excluded", std::vector<std::string>{});
  return m;
}

namespace {

template <typename T>
void PutRaw(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T GetRaw(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error("bad_feature_cache", "truncated feature cache");
  return v;
}

}  // namespace

void WriteFeatureCache(const std::string& path, const SubjectFeatures& subject) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io_error", "cannot write feature cache: " + path);
  out.write("HRTFFEAT", 8);
  PutRaw<std::uint32_t>(out, 1);
  PutRaw<std::uint32_t>(out, static_cast<std::uint32_t>(subject.subject_id.size()));
  out.write(subject.subject_id.data(), subject.subject_id.size());
  PutRaw<std::uint32_t>(out, static_cast<std::uint32_t>(subject.features.size()));
  PutRaw<std::uint32_t>(out, kNumChannels);
  PutRaw<std::uint32_t>(out, kNumBins);
  for (const auto& f : subject.features) {
    PutRaw<double>(out, f.doa.azimuth());
    PutRaw<double>(out, f.doa.elevation());
  }
  for (const auto& f : subject.features) {
    for (double v : f.values) PutRaw<float>(out, static_cast<float>(v));
  }
  if (!out) throw Error("io_error", "failed writing feature cache: " + path);
}

SubjectFeatures ReadFeatureCache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("missing_input", "feature cache not found: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "HRTFFEAT", 8) != 0) {
    throw Error("bad_feature_cache", "bad magic in " + path);
  }
  if (GetRaw<std::uint32_t>(in) != 1) throw Error("bad_feature_cache", "unknown version");
  SubjectFeatures s;
  s.subject_id.resize(GetRaw<std::uint32_t>(in));
  in.read(s.subject_id.data(), s.subject_id.size());
  const std::uint32_t n_doa = GetRaw<std::uint32_t>(in);
  if (GetRaw<std::uint32_t>(in) != kNumChannels || GetRaw<std::uint32_t>(in) != kNumBins) {
    throw Error("bad_feature_cache", "unexpected feature dimensions in " + path);
  }
  s.features.resize(n_doa);
  for (auto& f : s.features) {
    const double az = GetRaw<double>(in);
    const double el = GetRaw<double>(in);
    f.doa = Doa(az, el);
  }
  for (auto& f : s.features) {
    for (double& v : f.values) v = GetRaw<float>(in);
  }
  return s;
}

}  // namespace hrtfdiff
