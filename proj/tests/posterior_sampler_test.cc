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
#include <memory>

#include "hrtfdiff/min_phase.h"
#include "hrtfdiff/posterior_sampler.h"
#include "hrtfdiff/synthetic_hrtf.h"
#include "test_util.h"

namespace hrtfdiff {
namespace {

using nn::Vector;

// Small network, short reverb and a short excitation keep each test fast.
class PosteriorTest : public ::testing::Test {
 protected:
  void SetUp() override {
    ScoreNetConfig nc;
    nc.widths = {4, 4, 4, 4, 6, 6, 8, 8};
    nc.embed_dim = 8;
    nc.noise_features = 4;
    nc.doa_features = 4;
    nc.init_seed = 5;
    net_ = std::make_unique<ScoreNet>(nc);
    weights_ = net_->params() + 0.02 * Vector::Random(net_->num_params());
    denoiser_ = std::make_unique<Denoiser>(*net_, weights_);

    const SubjectFeatures feats = ExtractSubjectFeatures(MakeSyntheticSubject("2", 4));
    norm_ = FitNormStats(feats.features);
    truth_ = feats.features[12];

    ReverbConfig rc;
    rc.num_frames = 12;
    op_ = std::make_unique<ReverbOperator>(rc, 3);
    dry_ = testing::GaussianNoise(2000, 6, 0.05);
    truth_psi_ = InitParams(truth_.doa);
    truth_psi_.g = 0.25;
    const StereoSignal obs = op_->Render(truth_psi_, MinimumPhaseFilter(truth_), dry_);
    fit_ = std::make_unique<ObservationFit>(*op_, dry_, obs);

    problem_.denoiser = denoiser_.get();
    problem_.norm = &norm_;
    problem_.fit = fit_.get();
    problem_.doa = truth_.doa;

    schedule_.n_steps = 6;
    grid_ = ScheduleTimes(schedule_, ScheduleMode::kInfer);
    guidance_.inner_iters = 3;
    guidance_.zeta = 1.0;
  }

  std::unique_ptr<ScoreNet> net_;
  Vector weights_;
  std::unique_ptr<Denoiser> denoiser_;
  NormStats norm_;
  AlignedHrtfFeature truth_;
  std::unique_ptr<ReverbOperator> op_;
  std::vector<double> dry_;
  BrirParams truth_psi_;
  std::unique_ptr<ObservationFit> fit_;
  PosteriorProblem problem_;
  DiffusionSchedule schedule_;
  std::vector<double> grid_;
  GuidanceConfig guidance_;
};

TEST_F(PosteriorTest, GuidedScoreIsLinearCombination) {
  const FeatureArray s = testing::RandomFeatureArray(1);
  const FeatureArray g = testing::RandomFeatureArray(2);
  const FeatureArray out = GuidedScore(s, g, 0.37);
  for (int i = 0; i < kFeatureSize; ++i) EXPECT_NEAR(out[i], s[i] - 0.37 * g[i], 1e-15);
}

TEST_F(PosteriorTest, LikelihoodGradientMatchesFiniteDifferences) {
  const FeatureArray a = testing::RandomFeatureArray(3, 0.8);
  const double tau = 0.9;
  const LikelihoodResult r = LikelihoodGrad(a, tau, truth_psi_, problem_);
  EXPECT_GT(r.distance, 0.0);
  for (double v : r.grad_a) ASSERT_TRUE(std::isfinite(v));
  const double h = 1e-4;
  for (int idx : {0, 9, 40, 100, 127, 128, 180, 255}) {
    FeatureArray ap = a, am = a;
    ap[idx] += h;
    am[idx] -= h;
    const double fd = (LikelihoodGrad(ap, tau, truth_psi_, problem_).distance -
                       LikelihoodGrad(am, tau, truth_psi_, problem_).distance) /
                      (2 * h);
    EXPECT_NEAR(r.grad_a[idx], fd, 1e-2 * std::abs(fd) + 1e-8) << "coordinate " << idx;
  }
}

TEST_F(PosteriorTest, StationaryUnderGainAtTruth) {
  const StereoSignal fir = MinimumPhaseFilter(truth_);
  StereoSignal grad_fir;
  const double d = fit_->DistanceAndGradient(truth_psi_, fir, nullptr, &grad_fir);
  EXPECT_NEAR(d, 0.0, 1e-18);
  // d/d(gain) of distance(gain * fir) at gain 1.
  double deriv = 0.0;
  for (int c = 0; c < 2; ++c) {
    for (std::size_t n = 0; n < fir.size(); ++n) deriv += grad_fir.channel(c)[n] * fir.channel(c)[n];
  }
  EXPECT_NEAR(deriv, 0.0, 1e-3);
}

TEST_F(PosteriorTest, ZeroObservationGivesPositiveDistance) {
  StereoSignal zero;
  zero.Resize(dry_.size() + 4000);
  const ObservationFit silent(*op_, dry_, zero);
  PosteriorProblem p = problem_;
  p.fit = &silent;
  EXPECT_GT(LikelihoodGrad(testing::RandomFeatureArray(4), 1.0, truth_psi_, p).distance, 0.0);
}

TEST_F(PosteriorTest, ZeroGuidanceMatchesPriorSampler) {
  GuidanceConfig off = guidance_;
  off.zeta = 0.0;
  const InferenceResult r = RunInference(problem_, grid_, off, 42);
  const FeatureArray prior = SamplePriorNormalized(*denoiser_, problem_.doa, grid_, 42);
  EXPECT_EQ(r.estimate_normalized, prior);
}

TEST_F(PosteriorTest, TraceShapeAndDeterminism) {
  const InferenceResult a = RunInference(problem_, grid_, guidance_, 7);
  const InferenceResult b = RunInference(problem_, grid_, guidance_, 7);
  ASSERT_EQ(a.trace.size(), static_cast<std::size_t>(schedule_.n_steps));
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    EXPECT_EQ(a.trace[i].tau, grid_[i]);
    if (i > 0) EXPECT_LT(a.trace[i].tau, a.trace[i - 1].tau);
    EXPECT_GT(a.trace[i].zeta_n, 0.0);
  }
  EXPECT_EQ(a.estimate.values, b.estimate.values);
  EXPECT_EQ(BrirParamsToJson(a.psi), BrirParamsToJson(b.psi));
  EXPECT_FALSE(a.estimate.normalized);
  EXPECT_EQ(a.estimate.doa, truth_.doa);
}

TEST_F(PosteriorTest, StateStaysLegalAfterEveryStep) {
  std::mt19937_64 rng(9);
  SamplerState state;
  state.a = InitialNoise(grid_.front(), rng);
  state.psi = InitParams(problem_.doa);
  std::fill(state.psi.w.begin(), state.psi.w.end(), 39.99);
  GuidanceConfig g = guidance_;
  g.inner_lr = 0.5;
  for (int k = 0; k < schedule_.n_steps; ++k) {
    PosteriorStep(state, problem_, grid_, g, rng, nullptr);
    ASSERT_TRUE(WithinClamps(state.psi));
    for (double v : state.a) ASSERT_TRUE(std::isfinite(v));
    ASSERT_EQ(state.step_index, k + 1);
  }
  EXPECT_THROW(PosteriorStep(state, problem_, grid_, g, rng, nullptr), Error);
}

TEST_F(PosteriorTest, GuidanceChangesTheTrajectory) {
  GuidanceConfig off = guidance_;
  off.zeta = 0.0;
  const InferenceResult guided = RunInference(problem_, grid_, guidance_, 3);
  const InferenceResult free = RunInference(problem_, grid_, off, 3);
  EXPECT_NE(guided.estimate_normalized, free.estimate_normalized);
}

TEST_F(PosteriorTest, GuidanceConfigJsonRoundTrip) {
  GuidanceConfig g;
  g.zeta = 2.5;
  g.inner_iters = 7;
  const GuidanceConfig back = nlohmann::json(g).get<GuidanceConfig>();
  EXPECT_EQ(back.zeta, 2.5);
  EXPECT_EQ(back.inner_iters, 7);
}

TEST_F(PosteriorTest, TraceCsv) {
  const InferenceResult r = RunInference(problem_, grid_, guidance_, 1);
  const auto path = testing::ScratchDir("trace") / "trace.csv";
  WriteTraceCsv(path.string(), r.trace);
  std::ifstream in(path);
  std::string line;
  int rows = -1;
  while (std::getline(in, line)) rows += !line.empty();
  EXPECT_EQ(rows, schedule_.n_steps);
}

TEST_F(PosteriorTest, MissingProblemPartsRejected) {
  PosteriorProblem p = problem_;
  p.fit = nullptr;
  EXPECT_THROW(RunInference(p, grid_, guidance_, 1), Error);
}

}  // namespace
}  // namespace hrtfdiff
