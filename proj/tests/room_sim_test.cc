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

#include <cmath>
#include <fstream>
#include <set>

#include "hrtfdiff/fft.h"
#include "hrtfdiff/fractional_delay.h"
#include "hrtfdiff/room_sim.h"
#include "hrtfdiff/synthetic_hrtf.h"
#include "test_util.h"

namespace hrtfdiff {
namespace {

double Dist(const Vec3& a, const Vec3& b) {
  return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) +
                   (a[2] - b[2]) * (a[2] - b[2]));
}

HrirSet ImpulseSet() {
  HrirSet set;
  set.subject_id = "delta";
  set.grid = SyntheticGrid();
  set.hrirs.assign(set.grid.size(), StereoSignal{testing::Impulse(kHrirLength, 0),
                                                 testing::Impulse(kHrirLength, 0)});
  return set;
}

Scene FixedScene(double absorption) {
  Scene s;
  s.room = {9.0, 11.0, 3.0, absorption, kSpeedOfSound};
  s.placement.head_pos = {3.0, 4.0, 1.5};
  s.placement.src_pos = {6.0, 8.0, 1.5};
  s.placement.head_yaw = 0.3;
  return s;
}

TEST(SampleSceneTest, ThousandDrawsRespectConstraints) {
  const auto grid = SyntheticGrid();
  const SceneConfig cfg;
  std::mt19937_64 rng(12);
  for (int i = 0; i < 1000; ++i) {
    const Scene s = SampleScene(rng, grid, cfg);
    const RoomSpec& r = s.room;
    const ScenePlacement& p = s.placement;
    ASSERT_GE(r.height, 2.5);
    ASSERT_LE(r.height, 4.0);
    ASSERT_GE(r.width, 7.0);
    ASSERT_LE(r.width, 15.0);
    ASSERT_GE(r.length, 7.0);
    ASSERT_LE(r.length, 15.0);
    ASSERT_GT(r.absorption, 0.0);
    ASSERT_LT(r.absorption, 1.0);
    for (const Vec3* v : {&p.head_pos, &p.src_pos}) {
      ASSERT_GE((*v)[0], 1.5 - 1e-12);
      ASSERT_LE((*v)[0], r.width - 1.5 + 1e-12);
      ASSERT_GE((*v)[1], 1.5 - 1e-12);
      ASSERT_LE((*v)[1], r.length - 1.5 + 1e-12);
      ASSERT_GE((*v)[2], 1.0 - 1e-12);
      ASSERT_LE((*v)[2], 2.0 + 1e-12);
    }
    ASSERT_GE(Dist(p.head_pos, p.src_pos), 1.0);
    ASSERT_EQ(grid[p.doa_index], p.doa);
    ASSERT_LT(HeadFrameDoa(p, p.src_pos).AngleTo(p.doa), 1e-9);
  }
}

TEST(SampleSceneTest, InfeasibleConstraintsThrow) {
  SceneConfig cfg;
  cfg.floor_min = cfg.floor_max = 3.0;  // clearance leaves no room for 1 m separation
  std::mt19937_64 rng(1);
  try {
    SampleScene(rng, SyntheticGrid(), cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "infeasible_scene");
  }
}

TEST(ImageSourceTest, OrderTwoCountIs25) {
  const Scene s = FixedScene(0.1);
  const auto images = EnumerateImageSources(s.room, s.placement.src_pos, s.placement.head_pos, 2);
  EXPECT_EQ(images.size(), 25u);
  // Brute-force lattice enumeration.
  int count = 0;
  for (int i = -2; i <= 2; ++i) {
    for (int j = -2; j <= 2; ++j) {
      for (int k = -2; k <= 2; ++k) count += std::abs(i) + std::abs(j) + std::abs(k) <= 2;
    }
  }
  EXPECT_EQ(count, 25);
  std::set<std::array<int, 3>> seen;
  for (const auto& img : images) {
    EXPECT_TRUE(seen.insert(img.index).second);
    EXPECT_EQ(img.order, std::abs(img.index[0]) + std::abs(img.index[1]) + std::abs(img.index[2]));
    EXPECT_NEAR(img.amplitude, std::pow(0.9, img.order / 2.0) / img.distance, 1e-12);
  }
}

TEST(ImageSourceTest, FirstOrderImagesAreMirrors) {
  const Scene s = FixedScene(0.1);
  const auto images = EnumerateImageSources(s.room, s.placement.src_pos, s.placement.head_pos, 1);
  for (const auto& img : images) {
    if (img.index == std::array<int, 3>{-1, 0, 0}) EXPECT_NEAR(img.position[0], -6.0, 1e-12);
    if (img.index == std::array<int, 3>{1, 0, 0}) EXPECT_NEAR(img.position[0], 12.0, 1e-12);
    if (img.index == std::array<int, 3>{0, 0, 1}) EXPECT_NEAR(img.position[2], 4.5, 1e-12);
  }
}

TEST(ImageSourceTest, DirectArrivalIndex) {
  Scene s = FixedScene(0.1);
  ImageSourceConfig cfg;
  cfg.max_order = 0;
  const StereoSignal brir = ImageSourceBrir(s, ImpulseSet(), cfg);
  const double d = Dist(s.placement.src_pos, s.placement.head_pos);
  const long expected = std::lround(d / kSpeedOfSound * kSampleRate);
  std::size_t peak = 0;
  for (std::size_t n = 0; n < brir.size(); ++n) {
    if (std::abs(brir.left[n]) > std::abs(brir.left[peak])) peak = n;
  }
  EXPECT_LE(std::abs(static_cast<long>(peak) - expected), 1);
  EXPECT_NEAR(DirectDelaySamples(s), d / kSpeedOfSound * kSampleRate, 1e-9);
}

TEST(ImageSourceTest, FullAbsorptionLeavesScaledDirectHrir) {
  Scene s = FixedScene(1.0);
  const HrirSet subject = MakeSyntheticSubject("3", 8);
  const StereoSignal brir = ImageSourceBrir(s, subject, {});
  const double d = Dist(s.placement.src_pos, s.placement.head_pos);
  const std::size_t idx = NearestDoaIndex(subject.grid, HeadFrameDoa(s.placement, s.placement.src_pos));
  for (int c = 0; c < 2; ++c) {
    std::vector<double> expected(brir.size(), 0.0);
    AddDelayed(subject.hrirs[idx].channel(c), d / kSpeedOfSound * kSampleRate, 1.0 / d, expected);
    for (std::size_t n = 0; n < brir.size(); ++n) {
      EXPECT_NEAR(brir.channel(c)[n], expected[n], 1e-6);
    }
  }
}

TEST(ImageSourceTest, MoreAbsorptionNeverAddsEnergy) {
  const HrirSet subject = MakeSyntheticSubject("3", 8);
  ImageSourceConfig cfg;
  cfg.max_order = 8;
  double previous = std::numeric_limits<double>::infinity();
  for (double a : {0.05, 0.1, 0.3, 0.6, 0.9}) {
    const StereoSignal b = ImageSourceBrir(FixedScene(a), subject, cfg);
    const double e = Energy(b);
    EXPECT_LE(e, previous * (1 + 1e-12));
    previous = e;
  }
}

TEST(ImageSourceTest, DegenerateGeometryThrows) {
  Scene s = FixedScene(0.1);
  s.placement.src_pos = s.placement.head_pos;
  EXPECT_THROW(ImageSourceBrir(s, ImpulseSet(), {}), Error);
}

class TaskGenTest : public ::testing::Test {
 protected:
  void SetUp() override {
    subject_ = MakeSyntheticSubject("5", 77);
    features_ = ExtractSubjectFeatures(subject_);
    utterances_ = {testing::GaussianNoise(4410, 1, 0.05), testing::GaussianNoise(6000, 2, 0.05)};
    cfg_.image.max_order = 6;
    cfg_.min_tail = 2048;
  }
  HrirSet subject_;
  SubjectFeatures features_;
  std::vector<std::vector<double>> utterances_;
  TaskGenConfig cfg_;
};

TEST_F(TaskGenTest, SameSeedBitIdentical) {
  const EstimationTask a = GenerateTask("5_000", subject_, features_, utterances_, 9, cfg_);
  const EstimationTask b = GenerateTask("5_000", subject_, features_, utterances_, 9, cfg_);
  EXPECT_EQ(a.observation.left, b.observation.left);
  EXPECT_EQ(a.observation.right, b.observation.right);
  EXPECT_EQ(SceneToJson(a.scene), SceneToJson(b.scene));
  const EstimationTask c = GenerateTask("5_000", subject_, features_, utterances_, 10, cfg_);
  EXPECT_NE(a.observation.left, c.observation.left);
}

TEST_F(TaskGenTest, SilenceGivesZeroObservation) {
  const std::vector<std::vector<double>> silent = {std::vector<double>(3000, 0.0)};
  const EstimationTask t = GenerateTask("5_001", subject_, features_, silent, 3, cfg_);
  for (int c = 0; c < 2; ++c) {
    for (double v : t.observation.channel(c)) ASSERT_EQ(v, 0.0);
  }
}

TEST_F(TaskGenTest, ObservationLayoutAndTruth) {
  const EstimationTask t = GenerateTask("5_002", subject_, features_, utterances_, 4, cfg_);
  EXPECT_GE(t.observation.size(), t.dry.size() + cfg_.min_tail);
  EXPECT_EQ(t.truth.values, features_.features[t.scene.placement.doa_index].values);
  EXPECT_EQ(t.truth_hrir.left, subject_.hrirs[t.scene.placement.doa_index].left);
  EXPECT_NEAR(t.time_offset, DirectDelaySamples(t.scene) - cfg_.direct_lead, 1e-9);
  // Energy is at least that of the direct-path-only rendering.
  ImageSourceConfig direct = cfg_.image;
  direct.max_order = 0;
  direct.time_offset = t.time_offset;
  const StereoSignal d = ImageSourceBrir(t.scene, subject_, direct);
  double direct_energy = 0.0;
  for (int c = 0; c < 2; ++c) direct_energy += Energy(FftConvolve(t.dry, d.channel(c)));
  EXPECT_GE(Energy(t.observation), direct_energy * (1 - 1e-9));
  EXPECT_TRUE(std::isfinite(Energy(t.observation)));
}

TEST_F(TaskGenTest, EmptySubjectRejected) {
  HrirSet empty;
  empty.subject_id = "x";
  EXPECT_THROW(GenerateTask("x_000", empty, features_, utterances_, 1, cfg_), Error);
}

TEST_F(TaskGenTest, SaveLoadRoundTripRevalidates) {
  const auto dir = testing::ScratchDir("task_bundle");
  const EstimationTask t = GenerateTask("5_003", subject_, features_, utterances_, 5, cfg_);
  SaveTask(dir / t.task_id, t);
  const EstimationTask back = LoadTask(dir / t.task_id, subject_.grid, cfg_.scene);
  EXPECT_EQ(back.task_id, t.task_id);
  EXPECT_EQ(back.doa, t.doa);
  ASSERT_EQ(back.observation.size(), t.observation.size());
  for (std::size_t n = 0; n < t.observation.size(); n += 101) {
    EXPECT_NEAR(back.observation.left[n], t.observation.left[n], 1e-6);
  }
  for (int k = 0; k < kFeatureSize; ++k) EXPECT_NEAR(back.truth.values[k], t.truth.values[k], 1e-4);

  // Move the head against a wall; reloading must fail validation.
  std::ifstream in(dir / t.task_id / "task.json");
  nlohmann::json j = nlohmann::json::parse(in);
  in.close();
  j["scene"]["placement"]["head_pos"][0] = 0.2;
  std::ofstream(dir / t.task_id / "task.json") << j.dump();
  try {
    LoadTask(dir / t.task_id, subject_.grid, cfg_.scene);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "invalid_scene");
  }
}

TEST_F(TaskGenTest, ManifestCsvHasOneRowPerTask) {
  const auto dir = testing::ScratchDir("task_manifest");
  const auto tasks = GenerateTasks({subject_}, {features_}, utterances_, 2,
                                   [&] {
                                     TaskGenConfig c = cfg_;
                                     c.tasks_per_subject = 3;
                                     return c;
                                   }());
  ASSERT_EQ(tasks.size(), 3u);
  EXPECT_EQ(tasks[1].task_id, "5_001");
  WriteTaskManifest(dir / "tasks.csv", tasks);
  std::ifstream in(dir / "tasks.csv");
  std::string header, line;
  std::getline(in, header);
  EXPECT_EQ(header, "task_id,subject,azimuth,elevation,width,length,height,absorption");
  int rows = 0;
  while (std::getline(in, line)) rows += !line.empty();
  EXPECT_EQ(rows, 3);
}

}  // namespace
}  // namespace hrtfdiff
