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

#include "hrtfdiff/room_sim.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "hrtfdiff/fft.h"
#include "hrtfdiff/fractional_delay.h"
#include "hrtfdiff/wav.h"

namespace hrtfdiff {

namespace {

double Distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// World-frame unit vector of a head-frame direction.
Vec3 WorldDirection(const ScenePlacement& placement, const Doa& doa) {
  const auto u = doa.UnitVector();
  const double c = std::cos(placement.head_yaw), s = std::sin(placement.head_yaw);
  return {c * u[0] - s * u[1], s * u[0] + c * u[1], u[2]};
}

double ImageCoordinate(int i, double extent, double x) {
  return (i % 2 == 0) ? i * extent + x : (i + 1) * extent - x;
}

bool PositionOk(const RoomSpec& room, const Vec3& p, const SceneConfig& config) {
  return p[0] >= config.wall_clearance && p[0] <= room.width - config.wall_clearance &&
         p[1] >= config.wall_clearance && p[1] <= room.length - config.wall_clearance &&
         p[2] >= config.position_height_min && p[2] <= config.position_height_max;
}

std::string CheckScene(const Scene& scene, const std::vector<Doa>& grid,
                       const SceneConfig& config) {
  const RoomSpec& room = scene.room;
  const ScenePlacement& pl = scene.placement;
  constexpr double kTol = 1e-9;
  if (room.width < config.floor_min - kTol || room.width > config.floor_max + kTol ||
      room.length < config.floor_min - kTol || room.length > config.floor_max + kTol) {
    return "floor dimensions outside range";
  }
  if (room.height < config.height_min - kTol || room.height > config.height_max + kTol) {
    return "room height outside range";
  }
  if (!(room.absorption > 0.0 && room.absorption < 1.0)) return "absorption outside (0, 1)";
  SceneConfig loose = config;
  loose.wall_clearance -= kTol;
  loose.position_height_min -= kTol;
  loose.position_height_max += kTol;
  if (!PositionOk(room, pl.head_pos, loose)) return "head position violates clearance";
  if (!PositionOk(room, pl.src_pos, loose)) return "source position violates clearance";
  if (Distance(pl.head_pos, pl.src_pos) < config.min_distance - kTol) {
    return "source closer than minimum distance";
  }
  if (pl.doa_index >= grid.size()) return "DoA index outside grid";
  const Doa seen = HeadFrameDoa(pl, pl.src_pos);
  if (seen.AngleTo(grid[pl.doa_index]) > 1e-6) return "source is not on the grid DoA ray";
  return "";
}

}  // namespace

nlohmann::json SceneToJson(const Scene& scene) {
  const RoomSpec& r = scene.room;
  const ScenePlacement& p = scene.placement;
  return {{"room",
           {{"width", r.width},
            {"length", r.length},
            {"height", r.height},
            {"absorption", r.absorption},
            {"speed_of_sound", r.speed_of_sound}}},
          {"placement",
           {{"head_pos", p.head_pos},
            {"src_pos", p.src_pos},
            {"head_yaw", p.head_yaw},
            {"doa", {p.doa.azimuth(), p.doa.elevation()}},
            {"doa_index", p.doa_index}}}};
}

Scene SceneFromJson(const nlohmann::json& j) {
  Scene s;
  const auto& r = j.at("room");
  s.room.width = r.at("width").get<double>();
  s.room.length = r.at("length").get<double>();
  s.room.height = r.at("height").get<double>();
  s.room.absorption = r.at("absorption").get<double>();
  s.room.speed_of_sound = r.value("speed_of_sound", kSpeedOfSound);
  const auto& p = j.at("placement");
  s.placement.head_pos = p.at("head_pos").get<Vec3>();
  s.placement.src_pos = p.at("src_pos").get<Vec3>();
  s.placement.head_yaw = p.at("head_yaw").get<double>();
  const auto doa = p.at("doa").get<std::array<double, 2>>();
  s.placement.doa = Doa(doa[0], doa[1]);
  s.placement.doa_index = p.at("doa_index").get<std::size_t>();
  return s;
}

Doa HeadFrameDoa(const ScenePlacement& placement, const Vec3& point) {
  const double vx = point[0] - placement.head_pos[0];
  const double vy = point[1] - placement.head_pos[1];
  const double vz = point[2] - placement.head_pos[2];
  const double c = std::cos(placement.head_yaw), s = std::sin(placement.head_yaw);
  return Doa::FromVector(c * vx + s * vy, -s * vx + c * vy, vz);
}

void ValidateScene(const Scene& scene, const std::vector<Doa>& grid, const SceneConfig& config) {
  const std::string problem = CheckScene(scene, grid, config);
  if (!problem.empty()) throw Error("invalid_scene", problem);
}

Scene SampleScene(std::mt19937_64& rng, const std::vector<Doa>& grid, const SceneConfig& config) {
  if (grid.empty()) throw Error("missing_doa", "empty DoA grid");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  Scene scene;
  scene.room.width = uniform(config.floor_min, config.floor_max);
  scene.room.length = uniform(config.floor_min, config.floor_max);
  scene.room.height = uniform(config.height_min, config.height_max);
  scene.room.absorption = uniform(config.absorption_min, config.absorption_max);
  const RoomSpec& room = scene.room;
  auto draw_position = [&]() -> Vec3 {
    return {uniform(config.wall_clearance, room.width - config.wall_clearance),
            uniform(config.wall_clearance, room.length - config.wall_clearance),
            uniform(config.position_height_min, config.position_height_max)};
  };
  for (int attempt = 0; attempt < config.max_rejections; ++attempt) {
    ScenePlacement& pl = scene.placement;
    pl.head_pos = draw_position();
    pl.src_pos = draw_position();
    pl.head_yaw = uniform(0.0, 2.0 * kPi);
    const double dist = Distance(pl.head_pos, pl.src_pos);
    if (dist < config.min_distance) continue;
    pl.doa_index = NearestDoaIndex(grid, HeadFrameDoa(pl, pl.src_pos));
    pl.doa = grid[pl.doa_index];
    const Vec3 dir = WorldDirection(pl, pl.doa);
    for (int d = 0; d < 3; ++d) pl.src_pos[d] = pl.head_pos[d] + dist * dir[d];
    if (CheckScene(scene, grid, config).empty()) return scene;
  }
  throw Error("infeasible_scene", "no valid placement after " +
                                      std::to_string(config.max_rejections) + " draws");
}

std::vector<ImageSource> EnumerateImageSources(const RoomSpec& room, const Vec3& source,
                                               const Vec3& listener, int max_order) {
  std::vector<ImageSource> images;
  const double keep = 1.0 - room.absorption;
  for (int i = -max_order; i <= max_order; ++i) {
    const int ri = max_order - std::abs(i);
    for (int j = -ri; j <= ri; ++j) {
      const int rj = ri - std::abs(j);
      for (int k = -rj; k <= rj; ++k) {
        ImageSource img;
        img.index = {i, j, k};
        img.order = std::abs(i) + std::abs(j) + std::abs(k);
        img.position = {ImageCoordinate(i, room.width, source[0]),
                        ImageCoordinate(j, room.length, source[1]),
                        ImageCoordinate(k, room.height, source[2])};
        img.distance = Distance(img.position, listener);
        if (img.distance <= 0.0) {
          throw Error("degenerate_geometry", "image source coincides with the listener");
        }
        img.amplitude = std::pow(keep, 0.5 * img.order) / img.distance;
        images.push_back(img);
      }
    }
  }
  return images;
}

double DirectDelaySamples(const Scene& scene) {
  return Distance(scene.placement.src_pos, scene.placement.head_pos) /
         scene.room.speed_of_sound * kSampleRate;
}

StereoSignal ImageSourceBrir(const Scene& scene, const HrirSet& hrirs,
                             const ImageSourceConfig& config) {
  const ScenePlacement& pl = scene.placement;
  if (Distance(pl.src_pos, pl.head_pos) <= 0.0) {
    throw Error("degenerate_geometry", "source coincides with the head");
  }
  if (hrirs.grid.empty() || hrirs.hrirs.size() != hrirs.grid.size()) {
    throw Error("missing_doa", "HRIR set has no grid");
  }
  const auto images =
      EnumerateImageSources(scene.room, pl.src_pos, pl.head_pos, config.max_order);
  const double direct_amp = 1.0 / Distance(pl.src_pos, pl.head_pos);
  const double floor_amp = direct_amp * std::pow(10.0, config.tail_db / 20.0);
  const double fs_over_c = kSampleRate / scene.room.speed_of_sound;

  double max_delay = 0.0;
  std::vector<const ImageSource*> kept;
  for (const ImageSource& img : images) {
    if (img.amplitude < floor_amp) continue;
    kept.push_back(&img);
    max_delay = std::max(max_delay, img.distance * fs_over_c - config.time_offset);
  }
  const int hrir_len = static_cast<int>(hrirs.hrirs.front().size());
  const auto train_len = static_cast<std::size_t>(std::ceil(max_delay)) + kInterpHalfWidth + 2;

  std::map<std::size_t, std::vector<double>> trains;
  const double unit = 1.0;
  for (const ImageSource* img : kept) {
    const std::size_t idx = NearestDoaIndex(hrirs.grid, HeadFrameDoa(pl, img->position));
    auto& train = trains[idx];
    if (train.empty()) train.assign(train_len, 0.0);
    AddDelayed(std::span<const double>(&unit, 1), img->distance * fs_over_c - config.time_offset,
               img->amplitude, train);
  }
  StereoSignal brir;
  brir.Resize(train_len + hrir_len - 1);
  for (const auto& [idx, train] : trains) {
    for (int c = 0; c < kNumChannels; ++c) {
      const std::vector<double> part = FftConvolve(train, hrirs.hrirs[idx].channel(c));
      auto& out = brir.channel(c);
      for (std::size_t n = 0; n < part.size() && n < out.size(); ++n) out[n] += part[n];
    }
  }
  return brir;
}

EstimationTask GenerateTask(const std::string& task_id, const HrirSet& subject,
                            const SubjectFeatures& features,
                            const std::vector<std::vector<double>>& utterances,
                            std::uint64_t seed, const TaskGenConfig& config) {
  if (subject.grid.empty()) {
    throw Error("missing_subject", "no HRTFs for subject " + subject.subject_id);
  }
  if (features.features.size() != subject.grid.size()) {
    throw Error("missing_subject", "feature set does not match HRIR grid for " +
                                       subject.subject_id);
  }
  if (utterances.empty()) throw Error("missing_input", "no dry utterances");
  std::mt19937_64 rng(seed);
  EstimationTask task;
  task.task_id = task_id;
  task.subject_id = subject.subject_id;
  task.seed = seed;
  task.scene = SampleScene(rng, subject.grid, config.scene);
  task.doa = task.scene.placement.doa;
  std::uniform_int_distribution<std::size_t> pick(0, utterances.size() - 1);
  task.dry = utterances[pick(rng)];
  if (task.dry.empty()) throw Error("missing_input", "empty dry utterance");

  ImageSourceConfig image = config.image;
  task.time_offset = std::max(0.0, DirectDelaySamples(task.scene) - config.direct_lead);
  image.time_offset = task.time_offset;
  const StereoSignal brir = ImageSourceBrir(task.scene, subject, image);
  const std::size_t len =
      std::max(task.dry.size() + brir.size() - 1, task.dry.size() + config.min_tail);
  task.observation.Resize(len);
  for (int c = 0; c < kNumChannels; ++c) {
    const std::vector<double> y = FftConvolve(task.dry, brir.channel(c));
    std::copy(y.begin(), y.end(), task.observation.channel(c).begin());
  }
  task.truth = features.features[task.scene.placement.doa_index];
  task.truth_hrir = subject.hrirs[task.scene.placement.doa_index];
  return task;
}

std::vector<EstimationTask> GenerateTasks(const std::vector<HrirSet>& subjects,
                                          const std::vector<SubjectFeatures>& features,
                                          const std::vector<std::vector<double>>& utterances,
                                          std::uint64_t seed, const TaskGenConfig& config) {
  if (features.size() != subjects.size()) {
    throw Error("missing_subject", "feature sets do not match subjects");
  }
  std::vector<EstimationTask> tasks;
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    for (int t = 0; t < config.tasks_per_subject; ++t) {
      char id[64];
      std::snprintf(id, sizeof(id), "%s_%03d", subjects[s].subject_id.c_str(), t);
      tasks.push_back(GenerateTask(id, subjects[s], features[s], utterances,
                                   MixSeed(MixSeed(seed, s), t), config));
    }
  }
  return tasks;
}

void SaveTask(const std::filesystem::path& dir, const EstimationTask& task) {
  std::filesystem::create_directories(dir);
  nlohmann::json j = {{"task_id", task.task_id},
                      {"subject_id", task.subject_id},
                      {"seed", task.seed},
                      {"scene", SceneToJson(task.scene)},
                      {"doa", {task.doa.azimuth(), task.doa.elevation()}},
                      {"time_offset", task.time_offset},
                      {"dry", "dry.wav"},
                      {"observation", "observation.wav"},
                      {"truth", "truth.feat"},
                      {"truth_hrir", "truth_hrir.wav"}};
  std::ofstream out(dir / "task.json");
  if (!out) throw Error("io_error", "cannot write " + (dir / "task.json").string());
  out << j.dump(2) << '\n';
  WriteWav((dir / "dry.wav").string(), WavData{kSampleRate, {task.dry}});
  WriteWav((dir / "observation.wav").string(),
           WavData{kSampleRate, {task.observation.left, task.observation.right}});
  WriteWav((dir / "truth_hrir.wav").string(),
           WavData{kSampleRate, {task.truth_hrir.left, task.truth_hrir.right}});
  WriteFeatureCache((dir / "truth.feat").string(), SubjectFeatures{task.subject_id, {task.truth}});
}

EstimationTask LoadTask(const std::filesystem::path& dir, const std::vector<Doa>& grid,
                        const SceneConfig& config) {
  const auto json_path = dir / "task.json";
  std::ifstream in(json_path);
  if (!in) throw Error("missing_input", "task bundle not found: " + json_path.string());
  const nlohmann::json j = nlohmann::json::parse(in);
  EstimationTask task;
  task.task_id = j.at("task_id").get<std::string>();
  task.subject_id = j.at("subject_id").get<std::string>();
  task.seed = j.at("seed").get<std::uint64_t>();
  task.scene = SceneFromJson(j.at("scene"));
  const auto doa = j.at("doa").get<std::array<double, 2>>();
  task.doa = Doa(doa[0], doa[1]);
  task.time_offset = j.at("time_offset").get<double>();
  ValidateScene(task.scene, grid, config);
  const WavData dry = ReadWav((dir / j.at("dry").get<std::string>()).string());
  const WavData obs = ReadWav((dir / j.at("observation").get<std::string>()).string());
  const WavData hrir = ReadWav((dir / j.at("truth_hrir").get<std::string>()).string());
  if (dry.channels.size() != 1 || obs.channels.size() != 2 || hrir.channels.size() != 2) {
    throw Error("bad_task", "unexpected channel layout in " + dir.string());
  }
  task.dry = dry.channels[0];
  task.observation.left = obs.channels[0];
  task.observation.right = obs.channels[1];
  task.truth_hrir.left = hrir.channels[0];
  task.truth_hrir.right = hrir.channels[1];
  const SubjectFeatures truth = ReadFeatureCache((dir / j.at("truth").get<std::string>()).string());
  if (truth.features.size() != 1) throw Error("bad_task", "truth cache must hold one feature");
  task.truth = truth.features[0];
  return task;
}

void WriteTaskManifest(const std::filesystem::path& path, const std::vector<EstimationTask>& tasks) {
  std::ofstream out(path);
  if (!out) throw Error("io_error", "cannot write " + path.string());
  out.precision(10);
  out << "task_id,subject,azimuth,elevation,width,length,height,absorption\n";
  for (const auto& t : tasks) {
    out << t.task_id << ',' << t.subject_id << ',' << t.doa.azimuth() << ','
        << t.doa.elevation() << ',' << t.scene.room.width << ',' << t.scene.room.length << ','
        << t.scene.room.height << ',' << t.scene.room.absorption << '\n';
  }
}

}  // namespace hrtfdiff
