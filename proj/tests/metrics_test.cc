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

#include "hrtfdiff/metrics.h"
#include "test_util.h"

namespace hrtfdiff {
namespace {

const std::vector<Doa> kGrid = {Doa(0, 0), Doa(90, 0), Doa(180, 0), Doa(270, 30)};

SubjectFeatures RandomSubject(const std::string& id, std::uint64_t seed, double spread = 6.0) {
  SubjectFeatures s;
  s.subject_id = id;
  for (std::size_t d = 0; d < kGrid.size(); ++d) {
    AlignedHrtfFeature f;
    f.doa = kGrid[d];
    f.values = testing::RandomFeatureArray(seed * 31 + d, spread);
    s.features.push_back(f);
  }
  return s;
}

TEST(LreTest, ClosedForms) {
  EXPECT_EQ(Lre(0.7, 0.7), kLreFloorDb);
  EXPECT_EQ(Lre(0.7, 1.4), 0.0);
  EXPECT_EQ(Lre(0.7, 0.0), 0.0);
  EXPECT_NEAR(Lre(1.0, 1.1), 20.0 * std::log10(0.1), 1e-9);
  EXPECT_THROW(Lre(0.0, 1.0), Error);
}

TEST(LreTest, ScaleInvariance) {
  const auto h = testing::GaussianNoise(200, 1);
  const auto e = testing::GaussianNoise(200, 2);
  for (double alpha : {1e-3, 0.5, 3.0, 1e4}) {
    for (std::size_t i = 0; i < h.size(); ++i) {
      EXPECT_NEAR(Lre(alpha * h[i], alpha * e[i]), Lre(h[i], e[i]), 1e-12);
    }
  }
}

TEST(LmdTest, ClosedFormsAndSymmetry) {
  EXPECT_EQ(Lmd(0.3, 0.3), 0.0);
  EXPECT_NEAR(Lmd(0.3, 0.6), 6.020599913279624, 1e-9);
  const auto a = testing::GaussianNoise(100, 3);
  const auto b = testing::GaussianNoise(100, 4);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(Lmd(a[i], b[i]), Lmd(b[i], a[i]), 1e-12);
  EXPECT_THROW(Lmd(0.0, 1.0), Error);
  EXPECT_THROW(Lmd(1.0, 0.0), Error);
}

TEST(LmdTest, TriangleBound) {
  const auto a = testing::GaussianNoise(100, 5);
  const auto b = testing::GaussianNoise(100, 6);
  const auto c = testing::GaussianNoise(100, 7);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_LE(Lmd(a[i], c[i]), Lmd(a[i], b[i]) + Lmd(b[i], c[i]) + 1e-12);
  }
}

TEST(FeatureMetricsTest, MeanOverBinsOfMagnitudes) {
  AlignedHrtfFeature t, e;
  // Two bins differ, the rest match exactly.
  t.values[3] = 0.0;
  e.values[3] = 20.0 * std::log10(2.0);
  t.values[200] = -6.0;
  e.values[200] = -6.0 + 20.0 * std::log10(0.5);
  const double lre3 = 20.0 * std::log10(1.0);
  const double lre200 = 20.0 * std::log10(0.5);
  const double expected_lre = (lre3 + lre200 + (kFeatureSize - 2) * kLreFloorDb) / kFeatureSize;
  EXPECT_NEAR(MeanLre(t, e), expected_lre, 1e-12);
  EXPECT_NEAR(MeanLmd(t, e), 2.0 * 20.0 * std::log10(2.0) / kFeatureSize, 1e-12);
  const FeatureArray bins = BinLmd(t, e);
  EXPECT_NEAR(bins[3], 20.0 * std::log10(2.0), 1e-12);
  EXPECT_EQ(bins[4], 0.0);
}

TEST(FeatureMetricsTest, GlobalGainShiftInvariance) {
  const auto s = RandomSubject("a", 1);
  const auto r = RandomSubject("b", 2);
  AlignedHrtfFeature ts = s.features[0], tr = r.features[0];
  for (int i = 0; i < kFeatureSize; ++i) {
    ts.values[i] += 7.5;
    tr.values[i] += 7.5;
  }
  EXPECT_NEAR(MeanLre(ts, tr), MeanLre(s.features[0], r.features[0]), 1e-12);
}

TEST(BaselineTest, SingletonReturnsThatSubject) {
  const TrainBank bank = MakeTrainBank({RandomSubject("only", 1)});
  const Doa d = kGrid[2];
  std::size_t idx = 9;
  EXPECT_EQ(GenericSubject(bank), 0u);
  EXPECT_EQ(BaselineRandom(bank, d, 5, &idx).values, bank.subjects[0].features[2].values);
  EXPECT_EQ(idx, 0u);
  EXPECT_EQ(BaselineGeneric(bank, 0, d).values, bank.subjects[0].features[2].values);
  EXPECT_EQ(BaselineNearest(bank, RandomSubject("x", 9).features[2], d, &idx).values,
            bank.subjects[0].features[2].values);
}

TEST(BaselineTest, GenericMatchesBruteForceArgmin) {
  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    std::vector<SubjectFeatures> subjects;
    for (int s = 0; s < 5; ++s) {
      subjects.push_back(RandomSubject(std::to_string(s), trial * 10 + s, 2.0 + s % 3));
    }
    const TrainBank bank = MakeTrainBank(subjects);
    std::size_t best = 0;
    double best_score = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < 5; ++s) {
      double sum = 0.0;
      int count = 0;
      for (std::size_t t = 0; t < 5; ++t) {
        if (t == s) continue;
        for (std::size_t d = 0; d < kGrid.size(); ++d) {
          sum += MeanLre(subjects[t].features[d], subjects[s].features[d]);
          ++count;
        }
      }
      if (sum / count < best_score) {
        best_score = sum / count;
        best = s;
      }
    }
    EXPECT_EQ(GenericSubject(bank), best) << "trial " << trial;
  }
}

TEST(BaselineTest, GenericStableUnderGlobalRescaling) {
  std::vector<SubjectFeatures> subjects, shifted;
  for (int s = 0; s < 6; ++s) subjects.push_back(RandomSubject(std::to_string(s), s + 50, 1.0 + s));
  shifted = subjects;
  for (auto& s : shifted) {
    for (auto& f : s.features) {
      for (double& v : f.values) v -= 13.0;
    }
  }
  EXPECT_EQ(GenericSubject(MakeTrainBank(subjects)), GenericSubject(MakeTrainBank(shifted)));
}

TEST(BaselineTest, NearestHitsFloorWhenTruthInBank) {
  std::vector<SubjectFeatures> subjects;
  for (int s = 0; s < 4; ++s) subjects.push_back(RandomSubject(std::to_string(s), s));
  const TrainBank bank = MakeTrainBank(subjects);
  const AlignedHrtfFeature& truth = subjects[2].features[1];
  std::size_t idx = 0;
  const AlignedHrtfFeature est = BaselineNearest(bank, truth, kGrid[1], &idx);
  EXPECT_EQ(idx, 2u);
  EXPECT_EQ(MeanLre(truth, est), kLreFloorDb);
}

TEST(BaselineTest, NearestBeatsRandomOnAverage) {
  std::vector<SubjectFeatures> subjects;
  for (int s = 0; s < 8; ++s) subjects.push_back(RandomSubject(std::to_string(s), s, 3.0));
  const TrainBank bank = MakeTrainBank(subjects);
  double nearest = 0.0, random = 0.0;
  for (int t = 0; t < 60; ++t) {
    const auto truth = RandomSubject("t", 1000 + t, 3.0).features[t % kGrid.size()];
    nearest += MeanLre(truth, BaselineNearest(bank, truth, truth.doa));
    random += MeanLre(truth, BaselineRandom(bank, truth.doa, t));
  }
  EXPECT_LE(nearest, random);
}

TEST(BaselineTest, MissingDoaThrows) {
  const TrainBank bank = MakeTrainBank({RandomSubject("a", 1)});
  EXPECT_THROW(BaselineRandom(bank, Doa(45, 45), 1), Error);
}

std::vector<EvalTask> MakeTasks(int n) {
  std::vector<EvalTask> tasks;
  for (int i = 0; i < n; ++i) {
    EvalTask t;
    t.task_id = "s_" + std::to_string(100 + i);
    t.subject_id = "s";
    t.truth = RandomSubject("s", 500 + i).features[i % kGrid.size()];
    tasks.push_back(t);
  }
  return tasks;
}

TEST(EvaluateTest, PerfectEstimates) {
  const auto tasks = MakeTasks(3);
  std::map<std::string, std::map<std::string, AlignedHrtfFeature>> est;
  for (const auto& t : tasks) est["proposed"][t.task_id] = t.truth;
  const MetricReport r = Evaluate(tasks, est);
  ASSERT_EQ(r.per_task.size(), 3u);
  EXPECT_EQ(r.summary.at("proposed").mean_lmd, 0.0);
  EXPECT_EQ(r.summary.at("proposed").mean_lre, kLreFloorDb);
}

TEST(EvaluateTest, OrderInvarianceAndAggregates) {
  auto tasks = MakeTasks(5);
  std::map<std::string, std::map<std::string, AlignedHrtfFeature>> est;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    est["a"][tasks[i].task_id] = RandomSubject("e", 900 + i).features[0];
    est["b"][tasks[i].task_id] = RandomSubject("f", 950 + i).features[1];
  }
  const MetricReport r1 = Evaluate(tasks, est);
  std::reverse(tasks.begin(), tasks.end());
  const MetricReport r2 = Evaluate(tasks, est);
  EXPECT_EQ(SummaryToJson(r1), SummaryToJson(r2));
  ASSERT_EQ(r1.per_task.size(), 10u);
  for (std::size_t i = 0; i < r1.per_task.size(); ++i) {
    EXPECT_EQ(r1.per_task[i].task_id, r2.per_task[i].task_id);
    EXPECT_EQ(r1.per_task[i].method, r2.per_task[i].method);
  }
  double sum = 0.0;
  for (const auto& m : r1.per_task) {
    if (m.method == "a") sum += m.mean_lre;
  }
  EXPECT_NEAR(r1.summary.at("a").mean_lre, sum / 5.0, 1e-12);
  EXPECT_EQ(r1.summary.at("a").count, 5);
}

TEST(EvaluateTest, MissingEstimateListed) {
  const auto tasks = MakeTasks(3);
  std::map<std::string, std::map<std::string, AlignedHrtfFeature>> est;
  est["proposed"][tasks[0].task_id] = tasks[0].truth;
  try {
    Evaluate(tasks, est);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "missing_estimate");
    EXPECT_NE(std::string(e.what()).find(tasks[1].task_id), std::string::npos);
    EXPECT_NE(std::string(e.what()).find(tasks[2].task_id), std::string::npos);
  }
}

TEST(EvaluateTest, ResultsCsvLayout) {
  const auto tasks = MakeTasks(2);
  std::map<std::string, std::map<std::string, AlignedHrtfFeature>> est;
  for (const auto& t : tasks) est["nearest"][t.task_id] = t.truth;
  const auto path = testing::ScratchDir("results") / "results.csv";
  WriteResultsCsv(path.string(), Evaluate(tasks, est));
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "task_id,method,mean_LRE,mean_LMD,azimuth,elevation,subject");
}

}  // namespace
}  // namespace hrtfdiff
