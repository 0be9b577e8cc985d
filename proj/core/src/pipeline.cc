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

#include "hrtfdiff/pipeline.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "hrtfdiff/fractional_delay.h"
#include "hrtfdiff/hashing.h"
#include "hrtfdiff/metrics.h"
#include "hrtfdiff/min_phase.h"
#include "hrtfdiff/speech_synth.h"
#include "hrtfdiff/svg_plot.h"
#include "hrtfdiff/synthetic_hrtf.h"
#include "hrtfdiff/wav.h"

namespace hrtfdiff {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kDoneMarker = "done";

const Stage kAllStages[] = {Stage::kPrepareData, Stage::kTrain, Stage::kGenTasks,
                            Stage::kEstimate, Stage::kEvaluate, Stage::kPlot};

std::uint64_t StableHash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : s) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  return h;
}

void Log(const StageOptions& options, const std::string& message) {
  if (options.log) options.log(message);
}

json ReadJson(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing_input", "file not found: " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("bad_json", path.string() + ": " + e.what());
  }
}

void WriteJson(const fs::path& path, const json& j) {
  WriteTextFile(path.string(), j.dump(2) + "\n");
}

void ResetDir(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
}

std::string OutputsHash(const fs::path& dir) { return HashDirectory(dir.string(), {kManifest}); }

void WriteManifest(const RunConfig& config, Stage stage, const json& inputs) {
  const fs::path dir = config.StageDir(stage);
  json m = {{"stage", StageName(stage)},
            {"config_hash", StageConfigHash(config, stage)},
            {"seed", config.StageSeed(stage)},
            {"inputs", inputs},
            {"outputs_hash", OutputsHash(dir)}};
  WriteJson(dir / kManifest, m);
}

// Verifies an upstream stage and returns its outputs hash.
std::string CheckUpstream(const RunConfig& config, Stage upstream, const StageOptions& options) {
  const fs::path dir = config.StageDir(upstream);
  const fs::path path = dir / kManifest;
  if (!fs::exists(path)) {
    throw Error("missing_upstream", std::string("stage '") + StageName(upstream) +
                                        "' has not completed: " + path.string() + " not found");
  }
  const json m = ReadJson(path);
  const std::string expected = StageConfigHash(config, upstream);
  if (m.at("config_hash").get<std::string>() != expected && !options.force) {
    throw Error("stale_upstream",
                std::string("stage '") + StageName(upstream) +
                    "' was produced with a different configuration (manifest " +
                    m.at("config_hash").get<std::string>() + ", current " + expected +
                    "); re-run it or pass --force");
  }
  const std::string actual = OutputsHash(dir);
  if (actual != m.at("outputs_hash").get<std::string>() && !options.force) {
    throw Error("stale_upstream", std::string("outputs of stage '") + StageName(upstream) +
                                      "' changed after its manifest was written; re-run it "
                                      "or pass --force");
  }
  return actual;
}

// Runs fn(i) for i in [0, n) on `workers` threads; rethrows the first error.
void ParallelFor(int n, int workers, const std::function<void(int)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> threads;
  for (int w = 0; w < std::min(workers, n); ++w) {
    threads.emplace_back([&]() {
      for (int i = next++; i < n; i = next++) {
        {
          std::lock_guard<std::mutex> lock(mu);
          if (error) return;
        }
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

SplitSizes SplitsFromJson(const json& j) {
  SplitSizes s;
  s.train = j.value("train", s.train);
  s.val = j.value("val", s.val);
  s.test = j.value("test", s.test);
  return s;
}

std::vector<std::string> ReadTaskIds(const RunConfig& config) {
  return ReadJson(config.StageDir(Stage::kGenTasks) / "task_ids.json")
      .get<std::vector<std::string>>();
}

SplitManifest ReadSplits(const RunConfig& config) {
  return SplitManifestFromJson(ReadJson(config.StageDir(Stage::kPrepareData) / "splits.json"));
}

SubjectFeatures ReadSubjectFeatures(const RunConfig& config, const std::string& id) {
  return ReadFeatureCache(
      (config.StageDir(Stage::kPrepareData) / "features" / (id + ".feat")).string());
}

std::vector<double> ReadCsvColumn(const fs::path& path, std::size_t column) {
  std::ifstream in(path);
  std::vector<double> values;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    for (std::size_t c = 0; c <= column && std::getline(ss, cell, ','); ++c) {
      if (c == column) values.push_back(std::stod(cell));
    }
  }
  return values;
}

}  // namespace

const char* StageName(Stage stage) {
  switch (stage) {
    case Stage::kPrepareData: return "prepare-data";
    case Stage::kTrain: return "train";
    case Stage::kGenTasks: return "gen-tasks";
    case Stage::kEstimate: return "estimate";
    case Stage::kEvaluate: return "evaluate";
    case Stage::kPlot: return "plot";
  }
  return "unknown";
}

std::uint64_t RunConfig::StageSeed(Stage stage) const { return stage_seeds.at(StageName(stage)); }

fs::path RunConfig::StageDir(Stage stage) const { return work_dir / StageName(stage); }

json DefaultConfigJson() {
  const ReverbConfig reverb;
  const InitConfig init;
  const SceneConfig scene;
  const TaskGenConfig tasks;
  const UtteranceConfig utt;
  return {
      {"paths", {{"data", "data/hrtf"}, {"work", "run"}}},
      {"seed", 0},
      {"seeds", json::object()},
      {"desk_scale", false},
      {"desk",
       {{"num_subjects", 16},
        {"splits", {{"train", -1}, {"val", 2}, {"test", 2}}},
        {"train_steps", 2000},
        {"learning_rate", 2e-3},
        {"tasks_per_subject", 10},
        {"n_steps", 50},
        {"inner_iters", 10}}},
      {"dataset",
       {{"source", "synthetic"},
        {"num_subjects", 0},
        {"excluded_subjects", DefaultExcludedSubjects()},
        {"splits", {{"train", 85}, {"val", 2}, {"test", 6}}}}},
      {"score_net", json(ScoreNetConfig{})},
      {"train", json(TrainConfig{})},
      {"schedule", json(DiffusionSchedule{})},
      {"reverb",
       {{"stft_window", reverb.stft.window_length},
        {"stft_hop", reverb.stft.hop},
        {"num_frames", reverb.num_frames},
        {"num_bands", reverb.num_bands},
        {"late_noise_std", reverb.late_noise_std},
        {"late_onset", reverb.late_onset},
        {"fit_floor_db", -80.0},
        {"clamps",
         {{"w_min_db", reverb.clamps.w_min_db},
          {"w_max_db", reverb.clamps.w_max_db},
          {"alpha_min", reverb.clamps.alpha_min},
          {"alpha_max", reverb.clamps.alpha_max}}},
        {"init",
         {{"g", init.g},
          {"t_left", init.t_left},
          {"w_db", init.w_db},
          {"alpha", init.alpha},
          {"head_radius_m", init.head_radius_m}}}}},
      {"guidance", json(GuidanceConfig{})},
      {"rooms",
       {{"floor_min", scene.floor_min},
        {"floor_max", scene.floor_max},
        {"height_min", scene.height_min},
        {"height_max", scene.height_max},
        {"absorption_min", scene.absorption_min},
        {"absorption_max", scene.absorption_max},
        {"wall_clearance", scene.wall_clearance},
        {"position_height_min", scene.position_height_min},
        {"position_height_max", scene.position_height_max},
        {"min_distance", scene.min_distance},
        {"max_rejections", scene.max_rejections},
        {"max_order", tasks.image.max_order},
        {"tail_db", tasks.image.tail_db},
        {"direct_lead", tasks.direct_lead},
        {"tasks_per_subject", tasks.tasks_per_subject}}},
      {"utterances",
       {{"source", utt.source},
        {"dir", utt.dir},
        {"speakers", utt.speakers},
        {"count", utt.count},
        {"seconds", utt.seconds}}},
      {"workers", 1}};
}

RunConfig ResolveRunConfig(const json& user, std::optional<std::uint64_t> seed, bool desk_scale) {
  json j = DefaultConfigJson();
  j.merge_patch(user);
  if (seed) j["seed"] = *seed;
  if (desk_scale) j["desk_scale"] = true;
  RunConfig c;
  try {
    c.seed = j.at("seed").get<std::uint64_t>();
    c.desk_scale = j.at("desk_scale").get<bool>();
    if (c.desk_scale) {
      const json& d = j.at("desk");
      j["dataset"]["num_subjects"] = d.at("num_subjects");
      j["dataset"]["splits"] = d.at("splits");
      j["train"]["steps"] = d.at("train_steps");
      j["train"]["learning_rate"] = d.at("learning_rate");
      j["rooms"]["tasks_per_subject"] = d.at("tasks_per_subject");
      j["schedule"]["n_steps"] = d.at("n_steps");
      j["guidance"]["inner_iters"] = d.at("inner_iters");
    }
    for (std::size_t i = 0; i < std::size(kAllStages); ++i) {
      const std::string name = StageName(kAllStages[i]);
      if (!j["seeds"].contains(name)) j["seeds"][name] = MixSeed(c.seed, i + 1);
      c.stage_seeds[name] = j["seeds"][name].get<std::uint64_t>();
    }
    j["train"]["seed"] = c.stage_seeds.at("train");
    j["score_net"]["init_seed"] = c.stage_seeds.at("train");

    c.data_dir = j.at("paths").at("data").get<std::string>();
    c.work_dir = j.at("paths").at("work").get<std::string>();
    const json& ds = j.at("dataset");
    c.dataset.source = ds.at("source").get<std::string>();
    c.dataset.num_subjects = ds.at("num_subjects").get<int>();
    c.dataset.excluded = ds.at("excluded_subjects").get<std::vector<std::string>>();
    c.dataset.splits = SplitsFromJson(ds.at("splits"));
    if (c.dataset.source != "synthetic" && c.dataset.source != "sofa") {
      throw Error("bad_config", "dataset.source must be 'synthetic' or 'sofa'");
    }
    c.net = j.at("score_net").get<ScoreNetConfig>();
    c.train = j.at("train").get<TrainConfig>();
    c.schedule = j.at("schedule").get<DiffusionSchedule>();
    const json& rv = j.at("reverb");
    c.reverb.stft.window_length = rv.at("stft_window").get<int>();
    c.reverb.stft.hop = rv.at("stft_hop").get<int>();
    c.reverb.num_frames = rv.at("num_frames").get<int>();
    c.reverb.num_bands = rv.at("num_bands").get<int>();
    c.reverb.late_noise_std = rv.at("late_noise_std").get<double>();
    c.reverb.late_onset = rv.at("late_onset").get<int>();
    c.fit_floor_db = rv.at("fit_floor_db").get<double>();
    const json& cl = rv.at("clamps");
    c.reverb.clamps.w_min_db = cl.at("w_min_db").get<double>();
    c.reverb.clamps.w_max_db = cl.at("w_max_db").get<double>();
    c.reverb.clamps.alpha_min = cl.at("alpha_min").get<double>();
    c.reverb.clamps.alpha_max = cl.at("alpha_max").get<double>();
    const json& in = rv.at("init");
    c.init.g = in.at("g").get<double>();
    c.init.t_left = in.at("t_left").get<double>();
    c.init.w_db = in.at("w_db").get<double>();
    c.init.alpha = in.at("alpha").get<double>();
    c.init.head_radius_m = in.at("head_radius_m").get<double>();
    c.guidance = j.at("guidance").get<GuidanceConfig>();
    const json& rm = j.at("rooms");
    SceneConfig& sc = c.tasks.scene;
    sc.floor_min = rm.at("floor_min").get<double>();
    sc.floor_max = rm.at("floor_max").get<double>();
    sc.height_min = rm.at("height_min").get<double>();
    sc.height_max = rm.at("height_max").get<double>();
    sc.absorption_min = rm.at("absorption_min").get<double>();
    sc.absorption_max = rm.at("absorption_max").get<double>();
    sc.wall_clearance = rm.at("wall_clearance").get<double>();
    sc.position_height_min = rm.at("position_height_min").get<double>();
    sc.position_height_max = rm.at("position_height_max").get<double>();
    sc.min_distance = rm.at("min_distance").get<double>();
    sc.max_rejections = rm.at("max_rejections").get<int>();
    c.tasks.image.max_order = rm.at("max_order").get<int>();
    c.tasks.image.tail_db = rm.at("tail_db").get<double>();
    c.tasks.direct_lead = rm.at("direct_lead").get<double>();
    c.tasks.tasks_per_subject = rm.at("tasks_per_subject").get<int>();
    c.tasks.min_tail = c.reverb.num_frames * c.reverb.stft.hop + c.reverb.stft.window_length;
    const json& ut = j.at("utterances");
    c.utterances.source = ut.at("source").get<std::string>();
    c.utterances.dir = ut.at("dir").get<std::string>();
    c.utterances.speakers = ut.at("speakers").get<std::vector<std::string>>();
    c.utterances.count = ut.at("count").get<int>();
    c.utterances.seconds = ut.at("seconds").get<double>();
    c.workers = std::max(1, j.at("workers").get<int>());
  } catch (const json::exception& e) {
    throw Error("bad_config", std::string("invalid configuration: ") + e.what());
  }
  c.json = j;
  return c;
}

RunConfig LoadRunConfig(const std::optional<fs::path>& path, std::optional<std::uint64_t> seed,
                        bool desk_scale) {
  json user = json::object();
  if (path) {
    if (!fs::exists(*path)) throw Error("missing_input", "config file not found: " + path->string());
    user = ReadJson(*path);
    if (!user.is_object()) throw Error("bad_config", "config root must be an object");
  }
  return ResolveRunConfig(user, seed, desk_scale);
}

std::string StageConfigHash(const RunConfig& config, Stage stage) {
  const json& j = config.json;
  auto seed = [&](Stage s) { return json(config.StageSeed(s)); };
  json parts = json::object();
  parts["prepare"] = {{"dataset", j.at("dataset")}, {"seed", seed(Stage::kPrepareData)}};
  if (stage == Stage::kTrain || stage >= Stage::kEstimate) {
    parts["train"] = {{"score_net", j.at("score_net")},
                      {"train", j.at("train")},
                      {"schedule_train",
                       {j.at("schedule").at("t_min_train"), j.at("schedule").at("t_max_train")}},
                      {"seed", seed(Stage::kTrain)}};
  }
  if (stage >= Stage::kGenTasks && stage != Stage::kTrain) {
    parts["gen"] = {{"rooms", j.at("rooms")},
                    {"utterances", j.at("utterances")},
                    {"min_tail", config.tasks.min_tail},
                    {"seed", seed(Stage::kGenTasks)}};
  }
  if (stage >= Stage::kEstimate) {
    parts["estimate"] = {{"reverb", j.at("reverb")},
                         {"guidance", j.at("guidance")},
                         {"schedule", j.at("schedule")},
                         {"seed", seed(Stage::kEstimate)}};
  }
  if (stage >= Stage::kEvaluate) parts["evaluate"] = {{"seed", seed(Stage::kEvaluate)}};
  return Sha256Hex(parts.dump());
}

std::string ErrorJson(const std::string& code, const std::string& message, const std::string& stage) {
  return json{{"error", {{"code", code}, {"message", message}, {"stage", stage}}}}.dump();
}

std::vector<std::vector<double>> LoadUtterances(const UtteranceConfig& config, std::uint64_t seed) {
  std::vector<std::vector<double>> out;
  if (config.source == "synthetic") {
    SpeechSynthConfig sc;
    sc.seconds = config.seconds;
    for (int i = 0; i < config.count; ++i) out.push_back(SynthesizeSpeech(MixSeed(seed, i), sc));
    return out;
  }
  if (config.source != "wav_dir") {
    throw Error("bad_config", "utterances.source must be 'synthetic' or 'wav_dir'");
  }
  if (!fs::is_directory(config.dir)) {
    throw Error("missing_input", "utterance directory not found: " + config.dir);
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(config.dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".wav") continue;
    const std::string name = e.path().filename().string();
    bool keep = config.speakers.empty();
    for (const auto& s : config.speakers) keep = keep || name.rfind(s, 0) == 0;
    if (keep) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error("missing_input", "no matching utterances in " + config.dir);
  for (const auto& f : files) {
    const WavData w = ReadWav(f.string());
    std::vector<double> mono = w.channels.at(0);
    out.push_back(w.sample_rate == kSampleRate ? mono : Resample(mono, w.sample_rate, kSampleRate));
  }
  return out;
}

HrirSet LoadSubjectHrirs(const RunConfig& config, const std::string& subject_id) {
  if (config.dataset.source == "synthetic") {
    return MakeSyntheticSubject(subject_id,
                                SyntheticSubjectSeed(subject_id, config.StageSeed(Stage::kPrepareData)));
  }
  const json index = ReadJson(config.StageDir(Stage::kPrepareData) / "sofa_index.json");
  if (!index.contains(subject_id)) {
    throw Error("missing_subject", "no HRTF file for subject " + subject_id);
  }
  HrirSet set = LoadHrtfSet(index.at(subject_id).get<std::string>());
  set.subject_id = subject_id;
  return set;
}

void CmdPrepareData(const RunConfig& config, const StageOptions& options) {
  const fs::path dir = config.StageDir(Stage::kPrepareData);
  std::vector<std::string> roster;
  std::map<std::string, std::string> sofa_index;
  json inputs = json::object();
  if (config.dataset.source == "synthetic") {
    roster = SyntheticRoster(config.dataset.num_subjects, config.dataset.num_subjects <= 0);
  } else {
    if (!fs::is_directory(config.data_dir)) {
      throw Error("missing_input", "HRTF data directory not found: " + config.data_dir.string());
    }
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(config.data_dir)) {
      if (e.is_regular_file() && e.path().extension() == ".sofa") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
      throw Error("missing_input", "no .sofa files in " + config.data_dir.string());
    }
    for (const auto& f : files) {
      const HrirSet set = LoadHrtfSet(f.string());
      if (sofa_index.count(set.subject_id)) {
        throw Error("bad_sofa", "duplicate subject id " + set.subject_id);
      }
      sofa_index[set.subject_id] = fs::absolute(f).string();
      roster.push_back(set.subject_id);
    }
    inputs["data"] = HashDirectory(config.data_dir.string());
  }
  ResetDir(dir);
  fs::create_directories(dir / "features");
  if (!sofa_index.empty()) WriteJson(dir / "sofa_index.json", json(sofa_index));
  Log(options, "extracting features for " + std::to_string(roster.size()) + " subjects");
  for (const auto& id : roster) {
    const HrirSet set = LoadSubjectHrirs(config, id);
    WriteFeatureCache((dir / "features" / (id + ".feat")).string(), ExtractSubjectFeatures(set));
  }
  const SplitManifest splits =
      MakeSplits(roster, config.dataset.splits,
                 MixSeed(config.StageSeed(Stage::kPrepareData), StableHash("splits")),
                 config.dataset.excluded);
  WriteJson(dir / "splits.json", SplitManifestToJson(splits));
  std::vector<AlignedHrtfFeature> train_features;
  for (const auto& id : splits.train) {
    const SubjectFeatures f = ReadSubjectFeatures(config, id);
    train_features.insert(train_features.end(), f.features.begin(), f.features.end());
  }
  WriteJson(dir / "norm_stats.json", NormStatsToJson(FitNormStats(train_features)));
  WriteManifest(config, Stage::kPrepareData, inputs);
}

void CmdTrain(const RunConfig& config, const StageOptions& options) {
  json inputs = {{"prepare-data", CheckUpstream(config, Stage::kPrepareData, options)}};
  const fs::path dir = config.StageDir(Stage::kTrain);
  const SplitManifest splits = ReadSplits(config);
  const NormStats norm =
      NormStatsFromJson(ReadJson(config.StageDir(Stage::kPrepareData) / "norm_stats.json"));
  std::vector<TrainItem> items;
  for (const auto& id : splits.train) {
    for (const auto& f : ReadSubjectFeatures(config, id).features) {
      TrainItem item;
      item.feature = ApplyNorm(f, norm).values;
      item.doa = f.doa;
      item.id = items.size();
      items.push_back(item);
    }
  }
  ResetDir(dir);
  Log(options, "training on " + std::to_string(items.size()) + " items from " +
                   std::to_string(splits.train.size()) + " subjects for " +
                   std::to_string(config.train.steps) + " steps");
  ScoreNet net(config.net);
  const TrainResult result = Train(net, items, config.train, config.schedule, [&](long s, double loss) {
    if (s % 100 == 0) Log(options, "step " + std::to_string(s) + " loss " + std::to_string(loss));
  });
  Checkpoint ckpt;
  ckpt.net = config.net;
  ckpt.schedule = config.schedule;
  ckpt.train = config.train;
  ckpt.norm = norm;
  ckpt.steps = config.train.steps;
  ckpt.weights = net.params();
  ckpt.ema = result.ema;
  SaveCheckpoint(dir / "checkpoint.bin", ckpt);
  WriteTrainingCurve(dir / "training_curve.csv", result.losses);
  WriteManifest(config, Stage::kTrain, inputs);
}

void CmdGenTasks(const RunConfig& config, const StageOptions& options) {
  json inputs = {{"prepare-data", CheckUpstream(config, Stage::kPrepareData, options)}};
  const fs::path dir = config.StageDir(Stage::kGenTasks);
  const SplitManifest splits = ReadSplits(config);
  const std::uint64_t seed = config.StageSeed(Stage::kGenTasks);
  const auto utterances = LoadUtterances(config.utterances, MixSeed(seed, StableHash("utterances")));
  std::vector<HrirSet> subjects;
  std::vector<SubjectFeatures> features;
  for (const auto& id : splits.test) {
    subjects.push_back(LoadSubjectHrirs(config, id));
    features.push_back(ReadSubjectFeatures(config, id));
  }
  ResetDir(dir);
  struct Job {
    std::size_t subject;
    int index;
    std::string id;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    for (int t = 0; t < config.tasks.tasks_per_subject; ++t) {
      char id[64];
      std::snprintf(id, sizeof(id), "%s_%03d", subjects[s].subject_id.c_str(), t);
      jobs.push_back({s, t, id});
    }
  }
  Log(options, "generating " + std::to_string(jobs.size()) + " tasks");
  std::vector<EstimationTask> tasks(jobs.size());
  ParallelFor(static_cast<int>(jobs.size()), config.workers, [&](int i) {
    const Job& job = jobs[i];
    EstimationTask task = GenerateTask(job.id, subjects[job.subject], features[job.subject],
                                       utterances, MixSeed(MixSeed(seed, job.subject), job.index),
                                       config.tasks);
    SaveTask(dir / job.id, task);
    task.dry.clear();
    task.observation = StereoSignal();
    tasks[i] = std::move(task);
  });
  std::vector<std::string> ids;
  for (const auto& job : jobs) ids.push_back(job.id);
  WriteJson(dir / "task_ids.json", json(ids));
  WriteTaskManifest(dir / "tasks.csv", tasks);
  WriteManifest(config, Stage::kGenTasks, inputs);
}

void CmdEstimate(const RunConfig& config, const StageOptions& options) {
  json inputs = {{"train", CheckUpstream(config, Stage::kTrain, options)},
                 {"gen-tasks", CheckUpstream(config, Stage::kGenTasks, options)}};
  const fs::path dir = config.StageDir(Stage::kEstimate);
  fs::remove(dir / kManifest);
  fs::create_directories(dir);
  const std::string marker = Sha256Hex(StageConfigHash(config, Stage::kEstimate) + inputs.dump());
  const Checkpoint ckpt = LoadCheckpoint(config.StageDir(Stage::kTrain) / "checkpoint.bin");
  ScoreNet net(ckpt.net);
  if (static_cast<std::size_t>(ckpt.ema.size()) != net.num_params()) {
    throw Error("bad_checkpoint", "checkpoint does not match the network configuration");
  }
  const Denoiser denoiser(net, ckpt.ema, ckpt.schedule, ckpt.train.sigma_data);
  const std::vector<double> grid = ScheduleTimes(config.schedule, ScheduleMode::kInfer);
  const std::vector<std::string> ids = ReadTaskIds(config);
  const std::uint64_t seed = config.StageSeed(Stage::kEstimate);
  const std::vector<Doa> doa_grid = [&]() {
    std::vector<Doa> g;
    const SplitManifest splits = ReadSplits(config);
    for (const auto& f : ReadSubjectFeatures(config, splits.test.front()).features) g.push_back(f.doa);
    return g;
  }();

  std::vector<std::string> pending;
  for (const auto& id : ids) {
    std::ifstream done(dir / id / kDoneMarker);
    std::string content;
    if (done && std::getline(done, content) && content == marker) continue;
    pending.push_back(id);
  }
  const std::size_t finished = ids.size() - pending.size();
  if (options.max_new_tasks >= 0 && static_cast<int>(pending.size()) > options.max_new_tasks) {
    pending.resize(options.max_new_tasks);
  }
  Log(options, std::to_string(finished) + " of " + std::to_string(ids.size()) +
                   " tasks already estimated; running " + std::to_string(pending.size()));
  std::mutex log_mu;
  ParallelFor(static_cast<int>(pending.size()), config.workers, [&](int i) {
    const std::string& id = pending[i];
    const fs::path out = dir / id;
    fs::remove_all(out);
    fs::create_directories(out);
    const EstimationTask task =
        LoadTask(config.StageDir(Stage::kGenTasks) / id, doa_grid, config.tasks.scene);
    const std::uint64_t task_seed = MixSeed(seed, StableHash(id));
    const ReverbOperator op(config.reverb, MixSeed(task_seed, 1));
    const ObservationFit fit(op, task.dry, task.observation, config.fit_floor_db);
    PosteriorProblem problem;
    problem.denoiser = &denoiser;
    problem.norm = &ckpt.norm;
    problem.fit = &fit;
    problem.doa = task.doa;
    problem.init = config.init;
    const InferenceResult result = RunInference(problem, grid, config.guidance, MixSeed(task_seed, 2));
    WriteFeatureCache((out / "estimate.feat").string(), SubjectFeatures{task.subject_id, {result.estimate}});
    WriteJson(out / "psi.json", BrirParamsToJson(result.psi));
    WriteTraceCsv((out / "trace.csv").string(), result.trace);
    const StereoSignal fir = MinimumPhaseFilter(result.estimate);
    WriteWav((out / "fir.wav").string(), WavData{kSampleRate, {fir.left, fir.right}});
    WriteTextFile((out / kDoneMarker).string(), marker + "\n");
    std::lock_guard<std::mutex> lock(log_mu);
    Log(options, "estimated " + id + " (final distance " +
                     std::to_string(result.trace.back().distance) + ")");
  });
  for (const auto& id : ids) {
    std::ifstream done(dir / id / kDoneMarker);
    std::string content;
    if (!(done && std::getline(done, content) && content == marker)) {
      Log(options, "estimation incomplete; re-run to resume");
      return;
    }
  }
  WriteManifest(config, Stage::kEstimate, inputs);
}

void CmdEvaluate(const RunConfig& config, const StageOptions& options) {
  const std::vector<std::string> ids = ReadTaskIds(config);
  const fs::path est_dir = config.StageDir(Stage::kEstimate);
  std::vector<std::string> missing;
  for (const auto& id : ids) {
    if (!fs::exists(est_dir / id / kDoneMarker)) missing.push_back(id);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw Error("missing_estimate", "no estimates for tasks: " + list);
  }
  json inputs = {{"estimate", CheckUpstream(config, Stage::kEstimate, options)},
                 {"gen-tasks", CheckUpstream(config, Stage::kGenTasks, options)},
                 {"prepare-data", CheckUpstream(config, Stage::kPrepareData, options)}};
  const fs::path dir = config.StageDir(Stage::kEvaluate);
  const SplitManifest splits = ReadSplits(config);
  std::vector<SubjectFeatures> bank_subjects;
  for (const auto& id : splits.train) bank_subjects.push_back(ReadSubjectFeatures(config, id));
  const TrainBank bank = MakeTrainBank(std::move(bank_subjects));
  const std::size_t generic = GenericSubject(bank);
  const std::uint64_t seed = config.StageSeed(Stage::kEvaluate);

  std::vector<EvalTask> tasks;
  std::map<std::string, std::map<std::string, AlignedHrtfFeature>> estimates;
  for (const auto& id : ids) {
    const fs::path task_dir = config.StageDir(Stage::kGenTasks) / id;
    const json meta = ReadJson(task_dir / "task.json");
    EvalTask t;
    t.task_id = id;
    t.subject_id = meta.at("subject_id").get<std::string>();
    t.truth = ReadFeatureCache((task_dir / "truth.feat").string()).features.at(0);
    const Doa doa = t.truth.doa;
    estimates["proposed"][id] = ReadFeatureCache((est_dir / id / "estimate.feat").string()).features.at(0);
    estimates["random"][id] = BaselineRandom(bank, doa, MixSeed(seed, StableHash(id)));
    estimates["generic"][id] = BaselineGeneric(bank, generic, doa);
    estimates["nearest"][id] = BaselineNearest(bank, t.truth, doa);
    tasks.push_back(std::move(t));
  }
  const MetricReport report = Evaluate(tasks, estimates);
  ResetDir(dir);
  WriteResultsCsv((dir / "results.csv").string(), report);
  json summary = SummaryToJson(report);
  summary["generic_subject"] = bank.subjects[generic].subject_id;
  summary["num_tasks"] = ids.size();
  WriteJson(dir / "summary.json", summary);
  for (const auto& [method, s] : report.summary) {
    Log(options, method + ": mean LRE " + std::to_string(s.mean_lre) + " dB, mean LMD " +
                     std::to_string(s.mean_lmd) + " dB");
  }
  WriteManifest(config, Stage::kEvaluate, inputs);
}

void CmdPlot(const RunConfig& config, const StageOptions& options) {
  json inputs = {{"evaluate", CheckUpstream(config, Stage::kEvaluate, options)}};
  const fs::path eval_dir = config.StageDir(Stage::kEvaluate);
  const fs::path dir = config.StageDir(Stage::kPlot);
  const json summary = ReadJson(eval_dir / "summary.json");
  ResetDir(dir);

  std::vector<Series> curves;
  for (const auto& [method, s] : summary.at("methods").items()) {
    const auto bins = s.at("lmd_per_bin_db").get<std::vector<double>>();
    Series series;
    series.name = method;
    for (int f = 1; f < kNumBins; ++f) {
      series.x.push_back(f * double(kSampleRate) / kHrirLength);
      series.y.push_back(0.5 * (bins[f] + bins[kNumBins + f]));
    }
    curves.push_back(std::move(series));
  }
  WriteTextFile((dir / "lmd_per_frequency.svg").string(),
                LinePlotSvg(curves, {"Mean LMD per frequency", "Frequency (Hz)", "LMD (dB)"}, true));

  std::map<std::string, Group> lre, lmd;
  {
    std::ifstream in(eval_dir / "results.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      std::stringstream ss(line);
      std::string task, method, a, b;
      std::getline(ss, task, ',');
      std::getline(ss, method, ',');
      std::getline(ss, a, ',');
      std::getline(ss, b, ',');
      lre[method].name = method;
      lre[method].values.push_back(std::stod(a));
      lmd[method].name = method;
      lmd[method].values.push_back(std::stod(b));
    }
  }
  std::vector<Group> lre_groups, lmd_groups;
  for (auto& [m, g] : lre) lre_groups.push_back(g);
  for (auto& [m, g] : lmd) lmd_groups.push_back(g);
  WriteTextFile((dir / "lre_boxplot.svg").string(),
                BoxPlotSvg(lre_groups, {"Per-task mean LRE", "Method", "LRE (dB)"}));
  WriteTextFile((dir / "lmd_boxplot.svg").string(),
                BoxPlotSvg(lmd_groups, {"Per-task mean LMD", "Method", "LMD (dB)"}));

  const fs::path curve_path = config.StageDir(Stage::kTrain) / "training_curve.csv";
  if (fs::exists(curve_path)) {
    const std::vector<double> loss = ReadCsvColumn(curve_path, 1);
    Series s{"loss (50-step mean)", {}, {}};
    const std::size_t w = 50;
    for (std::size_t i = 0; i + w <= loss.size(); i += w) {
      double sum = 0.0;
      for (std::size_t k = i; k < i + w; ++k) sum += loss[k];
      s.x.push_back(double(i + w));
      s.y.push_back(sum / w);
    }
    WriteTextFile((dir / "training_curve.svg").string(),
                  LinePlotSvg({s}, {"Training loss", "Step", "Weighted DSM loss"}));
  }
  WriteManifest(config, Stage::kPlot, inputs);
}

void RunStage(Stage stage, const RunConfig& config, const StageOptions& options) {
  switch (stage) {
    case Stage::kPrepareData: return CmdPrepareData(config, options);
    case Stage::kTrain: return CmdTrain(config, options);
    case Stage::kGenTasks: return CmdGenTasks(config, options);
    case Stage::kEstimate: return CmdEstimate(config, options);
    case Stage::kEvaluate: return CmdEvaluate(config, options);
    case Stage::kPlot: return CmdPlot(config, options);
  }
}

}  // namespace hrtfdiff
