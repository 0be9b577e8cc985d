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

#include "hrtfdiff/metrics.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <tuple>

namespace hrtfdiff {

namespace {

double Magnitude(double db) { return std::pow(10.0, db / 20.0); }

double Median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

double Lre(double h, double h_hat) {
  if (h == 0.0) throw Error("zero_magnitude", "LRE reference magnitude is zero");
  const double num = std::abs(h_hat - h);
  if (num == 0.0) return kLreFloorDb;
  return std::max(kLreFloorDb, 20.0 * std::log10(num / std::abs(h)));
}

double Lmd(double h, double h_hat) {
  if (h == 0.0 || h_hat == 0.0) throw Error("zero_magnitude", "LMD needs nonzero magnitudes");
  return std::abs(20.0 * std::log10(std::abs(h_hat) / std::abs(h)));
}

double MeanLre(const AlignedHrtfFeature& truth, const AlignedHrtfFeature& estimate) {
  double sum = 0.0;
  for (int i = 0; i < kFeatureSize; ++i) {
    sum += Lre(Magnitude(truth.values[i]), Magnitude(estimate.values[i]));
  }
  return sum / kFeatureSize;
}

double MeanLmd(const AlignedHrtfFeature& truth, const AlignedHrtfFeature& estimate) {
  double sum = 0.0;
  for (int i = 0; i < kFeatureSize; ++i) {
    sum += Lmd(Magnitude(truth.values[i]), Magnitude(estimate.values[i]));
  }
  return sum / kFeatureSize;
}

FeatureArray BinLmd(const AlignedHrtfFeature& truth, const AlignedHrtfFeature& estimate) {
  FeatureArray out;
  for (int i = 0; i < kFeatureSize; ++i) {
    out[i] = Lmd(Magnitude(truth.values[i]), Magnitude(estimate.values[i]));
  }
  return out;
}

std::size_t TrainBank::DoaIndex(const Doa& doa) const {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i].AngleTo(doa) < 1e-9) return i;
  }
  throw Error("missing_doa", "DoA (" + std::to_string(doa.azimuth()) + ", " +
                                 std::to_string(doa.elevation()) + ") is not on the grid");
}

TrainBank MakeTrainBank(std::vector<SubjectFeatures> subjects) {
  if (subjects.empty()) throw Error("empty_training_set", "no training subjects");
  TrainBank bank;
  for (const auto& f : subjects.front().features) bank.grid.push_back(f.doa);
  for (const auto& s : subjects) {
    if (s.features.size() != bank.grid.size()) {
      throw Error("missing_doa", "subject " + s.subject_id + " has a different grid");
    }
    for (std::size_t i = 0; i < bank.grid.size(); ++i) {
      if (s.features[i].doa.AngleTo(bank.grid[i]) > 1e-9) {
        throw Error("missing_doa", "subject " + s.subject_id + " has a different grid");
      }
    }
  }
  bank.subjects = std::move(subjects);
  return bank;
}

std::vector<std::vector<double>> PairwiseLre(const TrainBank& bank) {
  const std::size_t n = bank.subjects.size();
  std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t s = 0; s < n; ++s) {
      if (s == t) continue;
      double sum = 0.0;
      for (std::size_t d = 0; d < bank.grid.size(); ++d) {
        sum += MeanLre(bank.subjects[t].features[d], bank.subjects[s].features[d]);
      }
      m[t][s] = sum / bank.grid.size();
    }
  }
  return m;
}

std::size_t GenericSubject(const TrainBank& bank) {
  const std::size_t n = bank.subjects.size();
  if (n == 1) return 0;
  const auto m = PairwiseLre(bank);
  std::size_t best = 0;
  double best_score = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    double sum = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      if (t != s) sum += m[t][s];
    }
    const double score = sum / (n - 1);
    if (s == 0 || score < best_score) {
      best = s;
      best_score = score;
    }
  }
  return best;
}

AlignedHrtfFeature BaselineRandom(const TrainBank& bank, const Doa& doa, std::uint64_t seed,
                                  std::size_t* subject) {
  const std::size_t d = bank.DoaIndex(doa);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, bank.subjects.size() - 1);
  const std::size_t s = pick(rng);
  if (subject != nullptr) *subject = s;
  return bank.subjects[s].features[d];
}

AlignedHrtfFeature BaselineGeneric(const TrainBank& bank, std::size_t generic_subject,
                                   const Doa& doa) {
  if (generic_subject >= bank.subjects.size()) {
    throw Error("bad_baseline", "generic subject index out of range");
  }
  return bank.subjects[generic_subject].features[bank.DoaIndex(doa)];
}

AlignedHrtfFeature BaselineNearest(const TrainBank& bank, const AlignedHrtfFeature& truth,
                                   const Doa& doa, std::size_t* subject) {
  const std::size_t d = bank.DoaIndex(doa);
  std::size_t best = 0;
  double best_lre = 0.0;
  for (std::size_t s = 0; s < bank.subjects.size(); ++s) {
    const double lre = MeanLre(truth, bank.subjects[s].features[d]);
    if (s == 0 || lre < best_lre) {
      best = s;
      best_lre = lre;
    }
  }
  if (subject != nullptr) *subject = best;
  return bank.subjects[best].features[d];
}

MetricReport Evaluate(
    const std::vector<EvalTask>& tasks,
    const std::map<std::string, std::map<std::string, AlignedHrtfFeature>>& estimates) {
  std::vector<std::string> missing;
  for (const auto& [method, per_task] : estimates) {
    for (const auto& task : tasks) {
      if (!per_task.count(task.task_id)) missing.push_back(method + ":" + task.task_id);
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ",") + m;
    throw Error("missing_estimate", "missing estimates for " + list);
  }
  MetricReport report;
  for (const auto& [method, per_task] : estimates) {
    for (const auto& task : tasks) {
      const AlignedHrtfFeature& est = per_task.at(task.task_id);
      TaskMetric m;
      m.task_id = task.task_id;
      m.method = method;
      m.subject_id = task.subject_id;
      m.doa = task.truth.doa;
      m.mean_lre = MeanLre(task.truth, est);
      m.mean_lmd = MeanLmd(task.truth, est);
      report.per_task.push_back(m);
    }
  }
  std::sort(report.per_task.begin(), report.per_task.end(),
            [](const TaskMetric& a, const TaskMetric& b) {
              return std::tie(a.task_id, a.method) < std::tie(b.task_id, b.method);
            });
  std::vector<EvalTask> sorted = tasks;
  std::sort(sorted.begin(), sorted.end(),
            [](const EvalTask& a, const EvalTask& b) { return a.task_id < b.task_id; });
  for (const auto& [method, per_task] : estimates) {
    MethodSummary s;
    std::vector<double> lre, lmd;
    s.lmd_per_bin.assign(kFeatureSize, 0.0);
    for (const auto& m : report.per_task) {
      if (m.method != method) continue;
      lre.push_back(m.mean_lre);
      lmd.push_back(m.mean_lmd);
    }
    for (const auto& task : sorted) {
      const FeatureArray bins = BinLmd(task.truth, per_task.at(task.task_id));
      for (int i = 0; i < kFeatureSize; ++i) s.lmd_per_bin[i] += bins[i];
    }
    s.count = static_cast<int>(lre.size());
    for (std::size_t i = 0; i < lre.size(); ++i) {
      s.mean_lre += lre[i];
      s.mean_lmd += lmd[i];
    }
    if (s.count > 0) {
      s.mean_lre /= s.count;
      s.mean_lmd /= s.count;
      for (double& v : s.lmd_per_bin) v /= s.count;
    }
    s.median_lre = Median(lre);
    s.median_lmd = Median(lmd);
    report.summary[method] = s;
  }
  return report;
}

void WriteResultsCsv(const std::string& path, const MetricReport& report) {
  std::ofstream out(path);
  if (!out) throw Error("io_error", "cannot write " + path);
  out.precision(17);
  out << "task_id,method,mean_LRE,mean_LMD,azimuth,elevation,subject\n";
  for (const auto& m : report.per_task) {
    out << m.task_id << ',' << m.method << ',' << m.mean_lre << ',' << m.mean_lmd << ','
        << m.doa.azimuth() << ',' << m.doa.elevation() << ',' << m.subject_id << '\n';
  }
}

nlohmann::json SummaryToJson(const MetricReport& report) {
  nlohmann::json methods = nlohmann::json::object();
  for (const auto& [method, s] : report.summary) {
    methods[method] = {{"count", s.count},
                       {"mean_lre_db", s.mean_lre},
                       {"median_lre_db", s.median_lre},
                       {"mean_lmd_db", s.mean_lmd},
                       {"median_lmd_db", s.median_lmd},
                       {"lmd_per_bin_db", s.lmd_per_bin}};
  }
  return {{"aggregation", "per-task means of dB values over channels and bins"},
          {"methods", methods}};
}

}  // namespace hrtfdiff
