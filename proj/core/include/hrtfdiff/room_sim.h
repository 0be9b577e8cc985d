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

#ifndef HRTFDIFF_ROOM_SIM_H_
#define HRTFDIFF_ROOM_SIM_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hrtfdiff/common.h"
#include "hrtfdiff/hrtf_dataset.h"

namespace hrtfdiff {

using Vec3 = std::array<double, 3>;

// Shoebox room; x spans width, y spans length, z spans height.
struct RoomSpec {
  double width = 10.0;
  double length = 10.0;
  double height = 3.0;
  double absorption = 0.08;
  double speed_of_sound = kSpeedOfSound;
};

struct ScenePlacement {
  Vec3 head_pos{};
  Vec3 src_pos{};
  double head_yaw = 0.0;  // radians, counter-clockwise about z
  Doa doa;                // head frame, on the HRIR grid
  std::size_t doa_index = 0;
};

struct Scene {
  RoomSpec room;
  ScenePlacement placement;
};

struct SceneConfig {
  double floor_min = 7.0;
  double floor_max = 15.0;
  double height_min = 2.5;
  double height_max = 4.0;
  double absorption_min = 0.05;
  double absorption_max = 0.1;
  double wall_clearance = 1.5;
  double position_height_min = 1.0;
  double position_height_max = 2.0;
  double min_distance = 1.0;
  int max_rejections = 10000;
};

nlohmann::json SceneToJson(const Scene& scene);
Scene SceneFromJson(const nlohmann::json& j);

// Head-frame direction of `point` seen from the head.
Doa HeadFrameDoa(const ScenePlacement& placement, const Vec3& point);

// Throws "invalid_scene" when any placement constraint is violated.
void ValidateScene(const Scene& scene, const std::vector<Doa>& grid,
                   const SceneConfig& config = {});

// Rejection-samples a room and placement, then moves the source onto the
// ray of the nearest grid DoA at unchanged distance.
Scene SampleScene(std::mt19937_64& rng, const std::vector<Doa>& grid,
                  const SceneConfig& config = {});

struct ImageSource {
  std::array<int, 3> index{};
  int order = 0;
  Vec3 position{};
  double distance = 0.0;
  double amplitude = 0.0;  // (1 - absorption)^(order / 2) / distance
};

// All images with |i| + |j| + |k| <= max_order.
std::vector<ImageSource> EnumerateImageSources(const RoomSpec& room, const Vec3& source,
                                               const Vec3& listener, int max_order);

struct ImageSourceConfig {
  int max_order = 20;
  double tail_db = -90.0;
  // Subtracted from every arrival time, samples.
  double time_offset = 0.0;
};

// Sum of grid HRIRs (nearest DoA per image, head frame) at the images'
// fractional propagation delays.
StereoSignal ImageSourceBrir(const Scene& scene, const HrirSet& hrirs,
                             const ImageSourceConfig& config = {});

double DirectDelaySamples(const Scene& scene);

struct TaskGenConfig {
  int tasks_per_subject = 100;
  SceneConfig scene;
  ImageSourceConfig image;
  // Propagation delay is removed except for this lead, samples.
  double direct_lead = 22.0;
  // Observations are zero-padded to at least dry length + this many samples.
  int min_tail = 51200 + 1024;
};

struct EstimationTask {
  std::string task_id;
  std::string subject_id;
  std::uint64_t seed = 0;
  Scene scene;
  Doa doa;
  double time_offset = 0.0;
  std::vector<double> dry;
  StereoSignal observation;
  AlignedHrtfFeature truth;
  StereoSignal truth_hrir;
};

EstimationTask GenerateTask(const std::string& task_id, const HrirSet& subject,
                            const SubjectFeatures& features,
                            const std::vector<std::vector<double>>& utterances,
                            std::uint64_t seed, const TaskGenConfig& config = {});

// tasks_per_subject tasks for each subject, ids "<subject>_<nnn>", each
// seeded from (seed, subject index, task index).
std::vector<EstimationTask> GenerateTasks(const std::vector<HrirSet>& subjects,
                                          const std::vector<SubjectFeatures>& features,
                                          const std::vector<std::vector<double>>& utterances,
                                          std::uint64_t seed, const TaskGenConfig& config = {});

// Bundle layout: task.json, dry.wav, observation.wav, truth.feat,
// truth_hrir.wav under `dir`.
void SaveTask(const std::filesystem::path& dir, const EstimationTask& task);
EstimationTask LoadTask(const std::filesystem::path& dir, const std::vector<Doa>& grid,
                        const SceneConfig& config = {});

void WriteTaskManifest(const std::filesystem::path& path,
                       const std::vector<EstimationTask>& tasks);

}  // namespace hrtfdiff

#endif  // HRTFDIFF_ROOM_SIM_H_
