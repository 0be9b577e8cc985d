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

#include <gtest/gtest.h>
#include <hdf5.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "hrtfdiff/fractional_delay.h"
#include "hrtfdiff/hashing.h"
#include "hrtfdiff/hrtf_dataset.h"
#include "hrtfdiff/synthetic_hrtf.h"
#include "test_util.h"

namespace hrtfdiff {
namespace {

using testing::Impulse;

constexpr double kSixDb = 6.020599913279624;

StereoSignal Pair(std::vector<double> l, std::vector<double> r) { return {std::move(l), std::move(r)}; }

TEST(DoaTest, UnitVectorMatchesSphericalImage) {
  for (double az : {0.0, 30.0, 90.0, 181.0, -45.0}) {
    for (double el : {-30.0, 0.0, 45.0, 89.0}) {
      const Doa d(az, el);
      const auto u = d.UnitVector();
      const double a = az * kPi / 180.0, e = el * kPi / 180.0;
      EXPECT_NEAR(u[0], std::cos(e) * std::cos(a), 1e-9);
      EXPECT_NEAR(u[1], std::cos(e) * std::sin(a), 1e-9);
      EXPECT_NEAR(u[2], std::sin(e), 1e-9);
    }
  }
}

TEST(PureDelayTest, IntegerImpulse) {
  for (int k : {0, 3, 17, 60}) EXPECT_NEAR(EstimatePureDelay(Impulse(kHrirLength, k)), k, 0.05);
}

TEST(PureDelayTest, HalfSampleImpulse) {
  for (int k : {4, 20}) {
    std::vector<double> h(kHrirLength, 0.0);
    AddDelayed(Impulse(1, 0), k + 0.5, 1.0, h);
    EXPECT_NEAR(EstimatePureDelay(h), k + 0.5, 0.1);
  }
}

TEST(PureDelayTest, CircularShiftEquivariance) {
  const HrirSet set = MakeSyntheticSubject("4", 11);
  for (std::size_t i = 0; i < set.hrirs.size(); i += 17) {
    const auto& h = set.hrirs[i].left;
    std::vector<double> shifted(h.size());
    for (std::size_t n = 0; n < h.size(); ++n) shifted[(n + 10) % h.size()] = h[n];
    EXPECT_NEAR(EstimatePureDelay(shifted) - EstimatePureDelay(h), 10.0, 0.1);
  }
}

TEST(PureDelayTest, ZeroInputThrows) {
  EXPECT_THROW(EstimatePureDelay(std::vector<double>(kHrirLength, 0.0)), Error);
}

TEST(ExtractFeatureTest, UnitImpulseIsFlatZeroDb) {
  const auto f = ExtractFeature(Pair(Impulse(kHrirLength, 0), Impulse(kHrirLength, 0)), Doa());
  for (double v : f.values) EXPECT_NEAR(v, 0.0, 1e-9);
  EXPECT_FALSE(f.normalized);
}

TEST(ExtractFeatureTest, ScaledShiftedImpulse) {
  const auto f =
      ExtractFeature(Pair(Impulse(kHrirLength, 5, 2.0), Impulse(kHrirLength, 5, 2.0)), Doa());
  for (double v : f.values) EXPECT_NEAR(v, kSixDb, 1e-9);
}

TEST(ExtractFeatureTest, CombFilterHitsFloorAtOddBins) {
  std::vector<double> h = Impulse(kHrirLength, 0);
  h[128] = 1.0;
  const auto f = ExtractFeature(Pair(h, h), Doa());
  for (int c = 0; c < 2; ++c) {
    for (int k = 0; k < kNumBins; ++k) {
      EXPECT_NEAR(f.at(c, k), k % 2 == 0 ? kSixDb : -100.0, 1e-6) << "bin " << k;
    }
  }
}

TEST(ExtractFeatureTest, GainEquivariance) {
  const HrirSet set = MakeSyntheticSubject("2", 5);
  const StereoSignal& h = set.hrirs[7];
  const double alpha = 0.37;
  StereoSignal scaled = h;
  for (int c = 0; c < 2; ++c) {
    for (double& v : scaled.channel(c)) v *= alpha;
  }
  const auto a = ExtractFeature(h, Doa());
  const auto b = ExtractFeature(scaled, Doa());
  for (int i = 0; i < kFeatureSize; ++i) {
    EXPECT_NEAR(b.values[i] - a.values[i], 20.0 * std::log10(alpha), 1e-9);
  }
}

TEST(ExtractFeatureTest, DelayInvariance) {
  const HrirSet set = MakeSyntheticSubject("2", 5);
  for (std::size_t i = 0; i < set.hrirs.size(); i += 13) {
    const StereoSignal& h = set.hrirs[i];
    StereoSignal shifted;
    shifted.Resize(kHrirLength);
    for (int c = 0; c < 2; ++c) {
      for (int n = 0; n + 7 < kHrirLength; ++n) shifted.channel(c)[n + 7] = h.channel(c)[n];
    }
    const auto a = ExtractFeature(h, Doa());
    const auto b = ExtractFeature(shifted, Doa());
    for (int k = 0; k < kFeatureSize; ++k) EXPECT_NEAR(a.values[k], b.values[k], 0.1);
  }
}

TEST(ExtractFeatureTest, ZeroChannelThrows) {
  EXPECT_THROW(ExtractFeature(Pair(Impulse(kHrirLength, 0), std::vector<double>(kHrirLength)), Doa()),
               Error);
}

TEST(NormStatsTest, TrainingSetNormalizesToZeroMeanUnitVariance) {
  const SubjectFeatures s = ExtractSubjectFeatures(MakeSyntheticSubject("3", 9));
  const NormStats stats = FitNormStats(s.features);
  std::vector<double> mean(kFeatureSize, 0.0), var(kFeatureSize, 0.0);
  for (const auto& f : s.features) {
    const auto n = ApplyNorm(f, stats);
    EXPECT_TRUE(n.normalized);
    for (int i = 0; i < kFeatureSize; ++i) mean[i] += n.values[i] / s.features.size();
  }
  for (const auto& f : s.features) {
    const auto n = ApplyNorm(f, stats);
    for (int i = 0; i < kFeatureSize; ++i) {
      var[i] += (n.values[i] - mean[i]) * (n.values[i] - mean[i]) / s.features.size();
    }
  }
  for (int i = 0; i < kFeatureSize; ++i) {
    EXPECT_NEAR(mean[i], 0.0, 1e-6);
    EXPECT_NEAR(var[i], 1.0, 1e-6);
  }
}

TEST(NormStatsTest, RoundTripIsIdentity) {
  const SubjectFeatures s = ExtractSubjectFeatures(MakeSyntheticSubject("3", 9));
  const NormStats stats = FitNormStats(s.features);
  for (const auto& f : s.features) {
    const auto back = InvertNorm(ApplyNorm(f, stats), stats);
    for (int i = 0; i < kFeatureSize; ++i) EXPECT_NEAR(back.values[i], f.values[i], 1e-9);
  }
}

TEST(NormStatsTest, ConstantBinIsFloored) {
  std::vector<AlignedHrtfFeature> set(4);
  for (int j = 0; j < 4; ++j) {
    for (int i = 0; i < kFeatureSize; ++i) set[j].values[i] = i == 3 ? -12.0 : j * 0.5 + i;
  }
  const NormStats stats = FitNormStats(set);
  EXPECT_DOUBLE_EQ(stats.std[3], kNormStdFloor);
  AlignedHrtfFeature probe = set[0];
  probe.values[3] = -11.0;
  const auto n = ApplyNorm(probe, stats);
  for (double v : n.values) EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(n.values[3], 1.0 / kNormStdFloor, 1e-6);
}

TEST(NormStatsTest, RejectsTooFewFeatures) {
  std::vector<AlignedHrtfFeature> one(1);
  EXPECT_THROW(FitNormStats(one), Error);
  EXPECT_THROW(FitNormStats({}), Error);
}

TEST(NormStatsTest, JsonRoundTrip) {
  const SubjectFeatures s = ExtractSubjectFeatures(MakeSyntheticSubject("3", 9));
  const NormStats stats = FitNormStats(s.features);
  const NormStats back = NormStatsFromJson(NormStatsToJson(stats));
  EXPECT_EQ(back.mean, stats.mean);
  EXPECT_EQ(back.std, stats.std);
}

TEST(SplitsTest, FullRosterSizes) {
  const auto roster = SyntheticRoster(0, true);
  std::vector<std::string> with_repeats = roster;
  with_repeats.push_back("88");
  with_repeats.push_back("96");
  std::sort(with_repeats.begin(), with_repeats.end());
  with_repeats.erase(std::unique(with_repeats.begin(), with_repeats.end()), with_repeats.end());
  const SplitManifest m = MakeSplits(with_repeats, {2, 6, -1}, 42);
  EXPECT_EQ(m.train.size(), 85u);
  EXPECT_EQ(m.val.size(), 2u);
  EXPECT_EQ(m.test.size(), 6u);
  EXPECT_NE(std::find(m.excluded.begin(), m.excluded.end(), "88"), m.excluded.end());
  EXPECT_NE(std::find(m.excluded.begin(), m.excluded.end(), "96"), m.excluded.end());
}

TEST(SplitsTest, DeskRosterIsDisjointCover) {
  const auto roster = SyntheticRoster(12, false);
  const SplitManifest m = MakeSplits(roster, {2, 2, 8}, 7);
  std::set<std::string> all;
  for (const auto* part : {&m.train, &m.val, &m.test}) {
    for (const auto& s : *part) EXPECT_TRUE(all.insert(s).second) << s;
  }
  EXPECT_EQ(all, std::set<std::string>(roster.begin(), roster.end()));
  EXPECT_EQ(m.train.size(), 8u);
}

TEST(SplitsTest, DeterministicGivenSeed) {
  const auto roster = SyntheticRoster(20, false);
  const auto a = SplitManifestToJson(MakeSplits(roster, {2, 2, -1}, 3));
  const auto b = SplitManifestToJson(MakeSplits(roster, {2, 2, -1}, 3));
  EXPECT_EQ(a, b);
  EXPECT_EQ(SplitManifestToJson(SplitManifestFromJson(a)), a);
}

TEST(SplitsTest, RosterTooSmall) {
  EXPECT_THROW(MakeSplits(SyntheticRoster(3, false), {2, 2, -1}, 1), Error);
}

TEST(SyntheticHrtfTest, SubjectIsValidAndDeterministic) {
  const HrirSet a = MakeSyntheticSubject("7", SyntheticSubjectSeed("7", 1));
  const HrirSet b = MakeSyntheticSubject("7", SyntheticSubjectSeed("7", 1));
  EXPECT_NO_THROW(ValidateHrirSet(a));
  ASSERT_EQ(a.hrirs.size(), b.hrirs.size());
  for (std::size_t i = 0; i < a.hrirs.size(); ++i) EXPECT_EQ(a.hrirs[i].left, b.hrirs[i].left);
  EXPECT_EQ(SyntheticSubjectSeed("88", 1), SyntheticSubjectSeed("1", 1));
  EXPECT_EQ(SyntheticSubjectSeed("96", 1), SyntheticSubjectSeed("22", 1));
}

TEST(ValidateHrirSetTest, RejectsDuplicateDoas) {
  HrirSet set;
  set.grid = {Doa(0, 0), Doa(0, 0)};
  set.hrirs.assign(2, Pair(Impulse(kHrirLength, 0), Impulse(kHrirLength, 0)));
  EXPECT_THROW(ValidateHrirSet(set), Error);
}

TEST(SofaTest, SingleImpulseRoundTrip) {
  const auto dir = testing::ScratchDir("sofa_single");
  HrirSet set;
  set.subject_id = "toy";
  set.grid = {Doa(30, 10)};
  set.hrirs = {Pair(Impulse(kHrirLength, 0), Impulse(kHrirLength, 0))};
  SaveHrtfSet((dir / "toy.sofa").string(), set);
  const HrirSet back = LoadHrtfSet((dir / "toy.sofa").string());
  ASSERT_EQ(back.grid.size(), 1u);
  EXPECT_NEAR(back.grid[0].azimuth(), 30.0, 1e-9);
  EXPECT_NEAR(back.grid[0].elevation(), 10.0, 1e-9);
  EXPECT_EQ(back.subject_id, "toy");
  for (int n = 0; n < kHrirLength; ++n) EXPECT_NEAR(back.hrirs[0].left[n], n == 0 ? 1.0 : 0.0, 1e-12);
}

TEST(SofaTest, GridOrderPreserved) {
  const auto dir = testing::ScratchDir("sofa_grid");
  const HrirSet set = MakeSyntheticSubject("5", 2);
  SaveHrtfSet((dir / "s.sofa").string(), set);
  const HrirSet back = LoadHrtfSet((dir / "s.sofa").string());
  ASSERT_EQ(back.grid.size(), set.grid.size());
  for (std::size_t i = 0; i < set.grid.size(); ++i) {
    EXPECT_LT(back.grid[i].AngleTo(set.grid[i]), 1e-9);
    for (int n = 0; n < kHrirLength; ++n) {
      EXPECT_NEAR(back.hrirs[i].right[n], set.hrirs[i].right[n], 1e-6);
    }
  }
}

TEST(SofaTest, MonoDataIsRejected) {
  const auto path = (testing::ScratchDir("sofa_mono") / "mono.sofa").string();
  const hid_t file = H5Fcreate(path.c_str(), H5F_ACC_TRUNC, H5P_DEFAULT, H5P_DEFAULT);
  const hsize_t ir_dims[3] = {1, 1, kHrirLength};
  const hid_t ir_space = H5Screate_simple(3, ir_dims, nullptr);
  const hid_t ir = H5Dcreate2(file, "Data.IR", H5T_NATIVE_DOUBLE, ir_space, H5P_DEFAULT,
                              H5P_DEFAULT, H5P_DEFAULT);
  std::vector<double> data(kHrirLength, 0.0);
  data[0] = 1.0;
  H5Dwrite(ir, H5T_NATIVE_DOUBLE, H5S_ALL, H5S_ALL, H5P_DEFAULT, data.data());
  const hsize_t pos_dims[2] = {1, 3};
  const hid_t pos_space = H5Screate_simple(2, pos_dims, nullptr);
  const hid_t pos = H5Dcreate2(file, "SourcePosition", H5T_NATIVE_DOUBLE, pos_space, H5P_DEFAULT,
                               H5P_DEFAULT, H5P_DEFAULT);
  const double p[3] = {0.0, 0.0, 1.5};
  H5Dwrite(pos, H5T_NATIVE_DOUBLE, H5S_ALL, H5S_ALL, H5P_DEFAULT, p);
  H5Dclose(pos);
  H5Sclose(pos_space);
  H5Dclose(ir);
  H5Sclose(ir_space);
  H5Fclose(file);
  try {
    LoadHrtfSet(path);
    FAIL() << "expected non_stereo";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "non_stereo");
  }
}

TEST(SofaTest, MissingAndGarbageFiles) {
  EXPECT_THROW(LoadHrtfSet("/nonexistent/file.sofa"), Error);
  const auto path = testing::ScratchDir("sofa_garbage") / "x.sofa";
  std::ofstream(path) << "not hdf5";
  EXPECT_THROW(LoadHrtfSet(path.string()), Error);
}

TEST(FeatureCacheTest, RoundTripAndChecksumStable) {
  const auto dir = testing::ScratchDir("feat_cache");
  const SubjectFeatures s = ExtractSubjectFeatures(MakeSyntheticSubject("6", 4));
  WriteFeatureCache((dir / "a.feat").string(), s);
  WriteFeatureCache((dir / "b.feat").string(), s);
  EXPECT_EQ(Sha256File((dir / "a.feat").string()), Sha256File((dir / "b.feat").string()));
  const SubjectFeatures back = ReadFeatureCache((dir / "a.feat").string());
  EXPECT_EQ(back.subject_id, "6");
  ASSERT_EQ(back.features.size(), s.features.size());
  for (std::size_t i = 0; i < s.features.size(); ++i) {
    EXPECT_EQ(back.features[i].doa, s.features[i].doa);
    for (int k = 0; k < kFeatureSize; ++k) {
      EXPECT_NEAR(back.features[i].values[k], s.features[i].values[k], 1e-4);
    }
  }
}

}  // namespace
}  // namespace hrtfdiff
