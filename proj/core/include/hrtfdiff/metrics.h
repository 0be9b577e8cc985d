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

#ifndef HRTFDIFF_METRICS_H_
#define HRTFDIFF_METRICS_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hrtfdiff/common.h"
#include "hrtfdiff/hrtf_dataset.h"

namespace hrtfdiff {

inline constexpr double kLreFloorDb = -300.0;

// 20 log10(|h_hat - h| / |h|), floored at kLreFloorDb.
double Lre(double h, double h_hat);
// |20 log10(|h_hat| / |h|)|
double Lmd(double h, double h_hat);

// Means over channels and bins of the dB-domain features, evaluated on the
// corresponding linear magnitudes.
double MeanLre(const AlignedHrtfFeature& truth, const AlignedHrtfFeature& estimate);
double MeanLmd(const AlignedHrtfFeature& truth, const AlignedHrtfFeature& estimate);

// Per-bin LMD (channel-major, like the features).
FeatureArray BinLmd(const AlignedHrtfFeature& truth, const AlignedHrtfFeature& estimate);

// Training subjects, each with features over the same grid.
struct TrainBank {
  std::vector<SubjectFeatures> subjects;
  std::vector<Doa> grid;

  std::size_t DoaIndex(const Doa& doa) const;  // throws missing_doa
};

TrainBank MakeTrainBank(std::vector<SubjectFeatures> subjects);

// Index of the subject minimizing the mean over all other subjects of the
// mean LRE (across DoAs, bins and channels) with that subject as estimate.
std::size_t GenericSubject(const TrainBank& bank);
// Pairwise matrix M[t][s] = mean LRE with truth t and estimate s.
std::vector<std::vector<double>> PairwiseLre(const TrainBank& bank);

AlignedHrtfFeature BaselineRandom(const TrainBank& bank, const Doa& doa, std::uint64_t seed,
                                  std::size_t* subject = nullptr);
AlignedHrtfFeature BaselineGeneric(const TrainBank& bank, std::size_t generic_subject,
                                   const Doa& doa);
AlignedHrtfFeature BaselineNearest(const TrainBank& bank, const AlignedHrtfFeature& truth,
                                   const Doa& doa, std::size_t* subject = nullptr);

struct TaskMetric {
  std::string task_id;
  std::string method;
  std::string subject_id;
  Doa doa;
  double mean_lre = 0.0;
  double mean_lmd = 0.0;
};

struct MethodSummary {
  int count = 0;
  double mean_lre = 0.0;
  double median_lre = 0.0;
  double mean_lmd = 0.0;
  double median_lmd = 0.0;
  std::vector<double> lmd_per_bin;  // mean over tasks, 2 x 128
};

struct MetricReport {
  std::vector<TaskMetric> per_task;  // sorted by (task_id, method)
  std::map<std::string, MethodSummary> summary;
};

struct EvalTask {
  std::string task_id;
  std::string subject_id;
  AlignedHrtfFeature truth;
};

// estimates[method][task_id]; every task must have an estimate per method.
MetricReport Evaluate(const std::vector<EvalTask>& tasks,
                      const std::map<std::string, std::map<std::string, AlignedHrtfFeature>>& estimates);

void WriteResultsCsv(const std::string& path, const MetricReport& report);
nlohmann::json SummaryToJson(const MetricReport& report);

}  // namespace hrtfdiff

#endif  // HRTFDIFF_METRICS_H_
