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

#ifndef HRTFDIFF_PIPELINE_H_
#define HRTFDIFF_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hrtfdiff/brir_model.h"
#include "hrtfdiff/diffusion.h"
#include "hrtfdiff/hrtf_dataset.h"
#include "hrtfdiff/posterior_sampler.h"
#include "hrtfdiff/room_sim.h"
#include "hrtfdiff/score_net.h"

namespace hrtfdiff {

enum class Stage { kPrepareData, kTrain, kGenTasks, kEstimate, kEvaluate, kPlot };

const char* StageName(Stage stage);

struct UtteranceConfig {
  std::string source = "synthetic";  // "synthetic" or "wav_dir"
  std::string dir;
  std::vector<std::string> speakers = {"p226", "p287"};
  int count = 8;
  double seconds = 1.0;
};

struct DatasetConfig {
  std::string source = "synthetic";  // "synthetic" or "sofa"
  int num_subjects = 0;              // synthetic only; 0 selects the 95-id roster
  std::vector<std::string> excluded = DefaultExcludedSubjects();
  SplitSizes splits{2, 6, 85};
};

// Resolved configuration: the JSON document after desk-scale overrides and
// seed derivation, plus typed views of each section.
struct RunConfig {
  nlohmann::json json;
  std::filesystem::path data_dir;
  std::filesystem::path work_dir;
  bool desk_scale = false;
  std::uint64_t seed = 0;
  std::map<std::string, std::uint64_t> stage_seeds;
  DatasetConfig dataset;
  ScoreNetConfig net;
  TrainConfig train;
  DiffusionSchedule schedule;
  ReverbConfig reverb;
  InitConfig init;
  double fit_floor_db = -80.0;
  GuidanceConfig guidance;
  TaskGenConfig tasks;
  UtteranceConfig utterances;
  int workers = 1;

  std::uint64_t StageSeed(Stage stage) const;
  std::filesystem::path StageDir(Stage stage) const;
};

// Documented defaults (full-scale values).
nlohmann::json DefaultConfigJson();

// Merges `user` over the defaults, applies --seed / --desk-scale and the
// desk profile, and derives any missing per-stage seeds.
RunConfig ResolveRunConfig(const nlohmann::json& user, std::optional<std::uint64_t> seed,
                           bool desk_scale);
RunConfig LoadRunConfig(const std::optional<std::filesystem::path>& path,
                        std::optional<std::uint64_t> seed, bool desk_scale);

// Hash of the configuration sections a stage (and its upstream) depends on.
std::string StageConfigHash(const RunConfig& config, Stage stage);

struct StageOptions {
  bool force = false;
  // Stop cmd_estimate after this many newly completed tasks (-1: no limit).
  int max_new_tasks = -1;
  std::function<void(const std::string&)> log;
};

void RunStage(Stage stage, const RunConfig& config, const StageOptions& options = {});

void CmdPrepareData(const RunConfig& config, const StageOptions& options);
void CmdTrain(const RunConfig& config, const StageOptions& options);
void CmdGenTasks(const RunConfig& config, const StageOptions& options);
void CmdEstimate(const RunConfig& config, const StageOptions& options);
void CmdEvaluate(const RunConfig& config, const StageOptions& options);
void CmdPlot(const RunConfig& config, const StageOptions& options);

// {"error": {"code", "message", "stage"}}
std::string ErrorJson(const std::string& code, const std::string& message,
                      const std::string& stage);

// Dry excitations per the utterance configuration.
std::vector<std::vector<double>> LoadUtterances(const UtteranceConfig& config,
                                                std::uint64_t seed);

// HRIRs of one subject from the configured source.
HrirSet LoadSubjectHrirs(const RunConfig& config, const std::string& subject_id);

}  // namespace hrtfdiff

#endif  // HRTFDIFF_PIPELINE_H_
