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

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "hrtfdiff/pipeline.h"

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool desk_scale = false;
  bool force = false;
  int max_tasks = -1;
  int workers = 0;
};

void AddCommonFlags(CLI::App* cmd, CommonFlags* flags) {
  cmd->add_option("--config", flags->config, "JSON config file overlaid on the defaults");
  cmd->add_option("--seed", flags->seed, "Base seed; per-stage seeds derive from it");
  cmd->add_flag("--desk-scale", flags->desk_scale, "Use the reduced desk-scale profile");
  cmd->add_flag("--force", flags->force, "Proceed even if upstream outputs look stale");
}

int Fail(const std::string& code, const std::string& message, const std::string& stage, int rc) {
  std::cerr << hrtfdiff::ErrorJson(code, message, stage) << std::endl;
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HRTF estimation from reverberant binaural speech with a diffusion prior"};
  app.require_subcommand(1);
  CommonFlags flags;
  bool print_config = false;
  struct Entry {
    hrtfdiff::Stage stage;
    const char* help;
  };
  const Entry entries[] = {
      {hrtfdiff::Stage::kPrepareData, "Extract aligned features, splits and norm stats"},
      {hrtfdiff::Stage::kTrain, "Train the score network"},
      {hrtfdiff::Stage::kGenTasks, "Render reverberant estimation tasks"},
      {hrtfdiff::Stage::kEstimate, "Run guided posterior sampling on every task"},
      {hrtfdiff::Stage::kEvaluate, "Score estimates and baselines"},
      {hrtfdiff::Stage::kPlot, "Render SVG figures from evaluation results"},
  };
  std::vector<std::pair<CLI::App*, hrtfdiff::Stage>> commands;
  for (const auto& e : entries) {
    CLI::App* cmd = app.add_subcommand(hrtfdiff::StageName(e.stage), e.help);
    AddCommonFlags(cmd, &flags);
    cmd->add_flag("--print-config", print_config, "Print the resolved config and exit");
    if (e.stage == hrtfdiff::Stage::kEstimate) {
      cmd->add_option("--max-tasks", flags.max_tasks, "Estimate at most this many new tasks");
    }
    if (e.stage == hrtfdiff::Stage::kGenTasks || e.stage == hrtfdiff::Stage::kEstimate) {
      cmd->add_option("--workers", flags.workers, "Worker threads (overrides config)");
    }
    commands.emplace_back(cmd, e.stage);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return Fail("usage", e.what(), "", 2);
  }

  hrtfdiff::Stage stage = hrtfdiff::Stage::kPrepareData;
  for (const auto& [cmd, s] : commands) {
    if (cmd->parsed()) stage = s;
  }
  const std::string name = hrtfdiff::StageName(stage);
  try {
    std::optional<std::filesystem::path> path;
    if (!flags.config.empty()) path = flags.config;
    hrtfdiff::RunConfig config = hrtfdiff::LoadRunConfig(path, flags.seed, flags.desk_scale);
    if (flags.workers > 0) config.workers = flags.workers;
    if (print_config) {
      std::cout << config.json.dump(2) << std::endl;
      return 0;
    }
    hrtfdiff::StageOptions options;
    options.force = flags.force;
    options.max_new_tasks = flags.max_tasks;
    options.log = [&](const std::string& msg) { std::cerr << "[" << name << "] " << msg << std::endl; };
    hrtfdiff::RunStage(stage, config, options);
  } catch (const hrtfdiff::Error& e) {
    return Fail(e.code(), e.what(), name, 1);
  } catch (const std::exception& e) {
    return Fail("internal", e.what(), name, 1);
  }
  return 0;
}
