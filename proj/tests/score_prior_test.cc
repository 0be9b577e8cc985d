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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hrtfdiff/diffusion.h"
#include "hrtfdiff/score_net.h"
#include "test_util.h"

namespace hrtfdiff {
namespace {

using nn::Matrix;
using nn::Vector;

ScoreNetConfig TinyConfig() {
  ScoreNetConfig c;
  c.widths = {4, 4, 4, 4, 6, 6, 8, 8};
  c.embed_dim = 8;
  c.noise_features = 4;
  c.doa_features = 4;
  c.init_seed = 3;
  return c;
}

std::vector<TrainItem> MakeItems(int n, std::uint64_t seed) {
  std::vector<TrainItem> items(n);
  for (int i = 0; i < n; ++i) {
    items[i].feature = testing::RandomFeatureArray(seed + i);
    items[i].doa = Doa(20.0 * i, 10.0 * (i % 3));
    items[i].id = static_cast<std::uint64_t>(i);
  }
  return items;
}

TEST(ScheduleTest, InferenceEndpointsAndMidpoint) {
  const auto grid = ScheduleTimes(DiffusionSchedule{}, ScheduleMode::kInfer);
  ASSERT_EQ(grid.size(), 101u);
  EXPECT_EQ(grid.front(), 8.0);
  EXPECT_EQ(grid.back(), 0.05);
  EXPECT_NEAR(grid[50], std::sqrt(8.0 * 0.05), 1e-12);
  const double ratio = grid[1] / grid[0];
  for (std::size_t i = 1; i < grid.size(); ++i) {
    EXPECT_LT(grid[i], grid[i - 1]);
    EXPECT_NEAR(grid[i] / grid[i - 1], ratio, 1e-12);
  }
}

TEST(ScheduleTest, TrainingEndpoints) {
  const auto grid = ScheduleTimes(DiffusionSchedule{}, ScheduleMode::kTrain);
  EXPECT_EQ(grid.front(), 10.0);
  EXPECT_EQ(grid.back(), 0.01);
}

TEST(ScheduleTest, RejectsInvertedRange) {
  DiffusionSchedule s;
  s.t_min_infer = 9.0;
  EXPECT_THROW(ScheduleTimes(s, ScheduleMode::kInfer), Error);
}

TEST(RffTest, ZeroInputGivesSinZeroCosOne) {
  const ScoreNet net(TinyConfig());
  const double x = 0.0;
  const Vector e = RffEmbed(net.noise_freqs(), std::span<const double>(&x, 1));
  const int n = static_cast<int>(net.noise_freqs().cols());
  ASSERT_EQ(e.size(), 2 * n);
  for (int i = 0; i < n; ++i) {
    EXPECT_EQ(e[i], 0.0);
    EXPECT_EQ(e[n + i], 1.0);
  }
}

TEST(RffTest, PythagoreanIdentityAndDeterminism) {
  const ScoreNet a(TinyConfig()), b(TinyConfig());
  const auto xs = testing::GaussianNoise(30, 5);
  for (double x : xs) {
    const Vector e1 = RffEmbed(a.noise_freqs(), std::span<const double>(&x, 1));
    const Vector e2 = RffEmbed(b.noise_freqs(), std::span<const double>(&x, 1));
    EXPECT_EQ(e1, e2);
    const int n = static_cast<int>(e1.size() / 2);
    for (int i = 0; i < n; ++i) EXPECT_NEAR(e1[i] * e1[i] + e1[n + i] * e1[n + i], 1.0, 1e-7);
  }
}

TEST(ScoreNetTest, ParameterCountNearReference) {
  const ScoreNet net;
  EXPECT_GT(net.num_params(), 0.8 * 752000);
  EXPECT_LT(net.num_params(), 1.2 * 752000);
}

TEST(ScoreNetTest, ResolutionLadder) {
  const ScoreNet net(TinyConfig());
  const int batch = 2;
  ScoreNet::Tape tape;
  const Matrix x = FeaturesToMatrix({testing::RandomFeatureArray(1), testing::RandomFeatureArray(2)});
  std::vector<NetCondition> cond(batch);
  const Matrix out = net.Forward(x, cond, &tape);
  EXPECT_EQ(out.rows(), 2);
  EXPECT_EQ(out.cols(), batch * kNumBins);
  ASSERT_EQ(tape.enc.size(), 7u);
  ASSERT_EQ(tape.dec.size(), 7u);
  for (int l = 0; l < 7; ++l) {
    EXPECT_EQ(tape.enc[l].x.cols(), batch * (kNumBins >> l)) << "level " << l;
    EXPECT_EQ(tape.dec[l].x.cols(), batch * (kNumBins >> l)) << "level " << l;
  }
  EXPECT_EQ(tape.mid.x.cols(), batch);
}

TEST(ScoreNetTest, InputGradientMatchesFiniteDifferences) {
  ScoreNet net(TinyConfig());
  // Perturb the zero-initialized head so the output depends on the input.
  Vector params = net.params() + 0.05 * Vector::Random(net.num_params());
  const Matrix x = FeaturesToMatrix({testing::RandomFeatureArray(8)});
  std::vector<NetCondition> cond(1);
  cond[0].c_noise = 0.1;
  cond[0].doa = std::array<double, 3>{0.5, 0.5, std::sqrt(0.5)};
  const Matrix w = FeaturesToMatrix({testing::RandomFeatureArray(9)});
  ScoreNet::Tape tape;
  net.Forward(params, x, cond, &tape);
  Matrix gx;
  net.Backward(params, tape, w, nullptr, &gx);
  const double h = 1e-5;
  for (int idx : {0, 17, 128 + 5, 200, 255}) {
    Matrix xp = x, xm = x;
    xp(idx / kNumBins, idx % kNumBins) += h;
    xm(idx / kNumBins, idx % kNumBins) -= h;
    const double fp = (net.Forward(params, xp, cond, nullptr).array() * w.array()).sum();
    const double fm = (net.Forward(params, xm, cond, nullptr).array() * w.array()).sum();
    const double fd = (fp - fm) / (2 * h);
    EXPECT_NEAR(gx(idx / kNumBins, idx % kNumBins), fd, 1e-6 + 1e-4 * std::abs(fd));
  }
}

TEST(DenoiserTest, ZeroHeadGivesSkipTerm) {
  const ScoreNet net(TinyConfig());
  const Denoiser den(net, net.params());
  const FeatureArray a = testing::RandomFeatureArray(4);
  for (double tau : {0.05, 0.7, 8.0}) {
    const DenoiserOutput out = den.Denoise(a, tau, Doa(30, 0));
    const double c_skip = Precondition(tau).c_skip;
    for (int i = 0; i < kFeatureSize; ++i) EXPECT_NEAR(out.h0_hat[i], c_skip * a[i], 1e-12);
  }
}

TEST(DenoiserTest, ScoreIdentity) {
  ScoreNet net(TinyConfig());
  net.params() += 0.05 * Vector::Random(net.num_params());
  const Denoiser den(net, net.params());
  const FeatureArray a = testing::RandomFeatureArray(5);
  for (double tau : {0.02, 1.0, 9.0}) {
    for (const auto& doa : {std::optional<Doa>(Doa(90, 0)), std::optional<Doa>()}) {
      const DenoiserOutput out = den.Denoise(a, tau, doa);
      for (int i = 0; i < kFeatureSize; ++i) {
        EXPECT_NEAR(out.score[i] * tau * tau + a[i], out.h0_hat[i], 1e-6);
      }
    }
  }
}

TEST(DenoiserTest, VjpMatchesFiniteDifferences) {
  ScoreNet net(TinyConfig());
  net.params() += 0.05 * Vector::Random(net.num_params());
  const Denoiser den(net, net.params());
  const FeatureArray a = testing::RandomFeatureArray(6);
  const FeatureArray v = testing::RandomFeatureArray(7);
  const double tau = 0.8;
  FeatureArray h0;
  const FeatureArray g = den.DenoiseVjp(a, tau, Doa(45, 15), v, &h0);
  const FeatureArray direct = den.Denoise(a, tau, Doa(45, 15)).h0_hat;
  for (int i = 0; i < kFeatureSize; ++i) EXPECT_NEAR(h0[i], direct[i], 1e-12);
  const double h = 1e-5;
  for (int idx : {3, 64, 130, 250}) {
    FeatureArray ap = a, am = a;
    ap[idx] += h;
    am[idx] -= h;
    const auto fp = den.Denoise(ap, tau, Doa(45, 15)).h0_hat;
    const auto fm = den.Denoise(am, tau, Doa(45, 15)).h0_hat;
    double fd = 0.0;
    for (int i = 0; i < kFeatureSize; ++i) fd += v[i] * (fp[i] - fm[i]) / (2 * h);
    EXPECT_NEAR(g[idx], fd, 1e-6 + 1e-4 * std::abs(fd));
  }
}

TEST(DenoiserTest, RejectsTauOutsideTrainingSupport) {
  const ScoreNet net(TinyConfig());
  const Denoiser den(net, net.params());
  const FeatureArray a{};
  for (double tau : {0.005, 10.5}) {
    try {
      den.Denoise(a, tau, std::nullopt);
      FAIL() << "tau " << tau;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), "tau_out_of_range");
    }
  }
  EXPECT_NO_THROW(den.Denoise(a, 0.01, std::nullopt));
  EXPECT_NO_THROW(den.Denoise(a, 10.0, std::nullopt));
}

TEST(DsmLossTest, DeterministicGivenSeed) {
  ScoreNet net(TinyConfig());
  TrainConfig cfg;
  cfg.seed = 11;
  const auto items = MakeItems(6, 1);
  std::vector<ItemNoise> n1, n2;
  for (const auto& it : items) {
    n1.push_back(DrawItemNoise(cfg, {}, 4, it.id));
    n2.push_back(DrawItemNoise(cfg, {}, 4, it.id));
  }
  Vector g1 = Vector::Zero(net.num_params()), g2 = Vector::Zero(net.num_params());
  const LossValue l1 = DsmLoss(net, net.params(), items, n1, 1.0, &g1);
  const LossValue l2 = DsmLoss(net, net.params(), items, n2, 1.0, &g2);
  EXPECT_EQ(l1.weighted, l2.weighted);
  EXPECT_EQ(g1, g2);
}

TEST(DsmLossTest, PermutationInvariant) {
  ScoreNet net(TinyConfig());
  net.params() += 0.05 * Vector::Random(net.num_params());
  TrainConfig cfg;
  cfg.seed = 2;
  auto items = MakeItems(5, 3);
  std::vector<ItemNoise> noise;
  for (const auto& it : items) noise.push_back(DrawItemNoise(cfg, {}, 0, it.id));
  const double before = DsmLoss(net, net.params(), items, noise, 1.0, nullptr).weighted;
  std::reverse(items.begin(), items.end());
  noise.clear();
  for (const auto& it : items) noise.push_back(DrawItemNoise(cfg, {}, 0, it.id));
  const double after = DsmLoss(net, net.params(), items, noise, 1.0, nullptr).weighted;
  EXPECT_NEAR(after, before, 1e-12 * std::abs(before));
}

TEST(DsmLossTest, TinyNoiseWithZeroHeadIsNearZero) {
  ScoreNet net(TinyConfig());
  const auto items = MakeItems(4, 9);
  std::vector<ItemNoise> noise(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    noise[i].sigma = 1e-6;
    noise[i].eps = testing::RandomFeatureArray(100 + i);
  }
  EXPECT_LT(DsmLoss(net, net.params(), items, noise, 1.0, nullptr).unweighted, 1e-10);
}

TEST(DsmLossTest, ParameterGradientMatchesFiniteDifferences) {
  ScoreNet net(TinyConfig());
  net.params() += 0.05 * Vector::Random(net.num_params());
  TrainConfig cfg;
  cfg.seed = 5;
  const auto items = MakeItems(3, 20);
  std::vector<ItemNoise> noise;
  for (const auto& it : items) noise.push_back(DrawItemNoise(cfg, {}, 1, it.id));
  Vector grad = Vector::Zero(net.num_params());
  DsmLoss(net, net.params(), items, noise, 1.0, &grad);
  std::vector<Eigen::Index> order(net.num_params());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + 8, order.end(),
                    [&](auto a, auto b) { return std::abs(grad[a]) > std::abs(grad[b]); });
  const double h = 1e-6;
  for (int k = 0; k < 8; ++k) {
    const auto idx = order[k];
    Vector p = net.params(), m = net.params();
    p[idx] += h;
    m[idx] -= h;
    const double fd = (DsmLoss(net, p, items, noise, 1.0, nullptr).weighted -
                       DsmLoss(net, m, items, noise, 1.0, nullptr).weighted) /
                      (2 * h);
    EXPECT_NEAR(grad[idx], fd, 1e-3 * std::abs(fd) + 1e-7) << "param " << idx;
  }
}

TEST(ItemNoiseTest, DropoutRateAndDoaNoise) {
  TrainConfig cfg;
  cfg.seed = 99;
  int dropped = 0;
  double sum2 = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const ItemNoise noise = DrawItemNoise(cfg, {}, i / 100, i % 100);
    dropped += noise.doa_dropped;
    for (double d : noise.doa_noise) sum2 += d * d;
    EXPECT_GE(noise.sigma, 0.01);
    EXPECT_LE(noise.sigma, 10.0);
  }
  EXPECT_NEAR(dropped / double(n), 0.3, 0.015);
  EXPECT_NEAR(std::sqrt(sum2 / (3.0 * n)), 0.05, 0.002);
}

TEST(EmaTest, OneStepArithmetic) {
  Vector ema = Vector::Zero(3);
  EmaUpdate(ema, Vector::Ones(3), 0.999);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(ema[i], 0.001, 1e-15);
}

TEST(EmaTest, FixedPoint) {
  const Vector w = Vector::Random(5);
  Vector ema = w;
  EmaUpdate(ema, w, 0.999);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(ema[i], w[i], 1e-15);
}

TEST(EmaTest, ClosedFormAfterKSteps) {
  const Vector w = Vector::Random(4);
  const Vector ema0 = Vector::Random(4);
  Vector ema = ema0;
  const int k = 250;
  for (int i = 0; i < k; ++i) EmaUpdate(ema, w, 0.999);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(ema[i], w[i] + (ema0[i] - w[i]) * std::pow(0.999, k), 1e-9);
}

TEST(EmaTest, WarmupCapsDecay) {
  EXPECT_EQ(EmaDecayAt(0.999, 0), 0.1);
  EXPECT_NEAR(EmaDecayAt(0.999, 90), 0.91, 1e-15);
  EXPECT_EQ(EmaDecayAt(0.999, 100000), 0.999);
  for (long k = 1; k < 20000; k += 97) EXPECT_GE(EmaDecayAt(0.999, k), EmaDecayAt(0.999, k - 1));
}

TEST(EmaTest, ShapeMismatchThrows) {
  Vector ema = Vector::Zero(3);
  EXPECT_THROW(EmaUpdate(ema, Vector::Zero(4), 0.999), Error);
}

TEST(TrainerTest, LossIsFiniteAndEmaFinite) {
  ScoreNet net(TinyConfig());
  TrainConfig cfg;
  cfg.seed = 1;
  cfg.batch_size = 4;
  cfg.steps = 5;
  const auto items = MakeItems(8, 40);
  const TrainResult r = Train(net, items, cfg, {});
  ASSERT_EQ(r.losses.size(), 5u);
  for (double l : r.losses) EXPECT_TRUE(std::isfinite(l));
  EXPECT_TRUE(r.ema.allFinite());
}

TEST(TrainerTest, TrainingIsDeterministic) {
  TrainConfig cfg;
  cfg.seed = 4;
  cfg.batch_size = 4;
  cfg.steps = 3;
  const auto items = MakeItems(8, 40);
  ScoreNet a(TinyConfig()), b(TinyConfig());
  const TrainResult ra = Train(a, items, cfg, {});
  const TrainResult rb = Train(b, items, cfg, {});
  EXPECT_EQ(ra.losses, rb.losses);
  EXPECT_EQ(ra.ema, rb.ema);
}

TEST(SamplePriorTest, ShapeFiniteAndDeterministic) {
  ScoreNet net(TinyConfig());
  net.params() += 0.01 * Vector::Random(net.num_params());
  const Denoiser den(net, net.params());
  DiffusionSchedule s;
  s.n_steps = 10;
  const auto grid = ScheduleTimes(s, ScheduleMode::kInfer);
  NormStats stats;
  stats.mean.fill(-3.0);
  stats.std.fill(4.0);
  const AlignedHrtfFeature a = SamplePrior(den, Doa(0, 0), grid, 17, stats);
  const AlignedHrtfFeature b = SamplePrior(den, Doa(0, 0), grid, 17, stats);
  EXPECT_FALSE(a.normalized);
  EXPECT_NO_THROW(CheckFinite(a));
  EXPECT_EQ(a.values, b.values);
  const AlignedHrtfFeature c = SamplePrior(den, std::nullopt, grid, 18, stats);
  EXPECT_NE(a.values, c.values);
}

TEST(CheckpointTest, RoundTrip) {
  const auto dir = testing::ScratchDir("ckpt");
  ScoreNet net(TinyConfig());
  Checkpoint c;
  c.net = TinyConfig();
  c.steps = 12;
  c.weights = net.params();
  c.ema = net.params() * 0.5;
  c.norm.mean.fill(1.5);
  c.norm.std.fill(2.5);
  SaveCheckpoint(dir / "c.bin", c);
  const Checkpoint back = LoadCheckpoint(dir / "c.bin");
  EXPECT_EQ(back.steps, 12);
  EXPECT_EQ(back.weights, c.weights);
  EXPECT_EQ(back.ema, c.ema);
  EXPECT_EQ(back.norm.std, c.norm.std);
  EXPECT_EQ(back.net.widths, c.net.widths);
}

TEST(CheckpointTest, MissingFile) {
  try {
    LoadCheckpoint("/nonexistent/ckpt.bin");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "missing_checkpoint");
  }
}

}  // namespace
}  // namespace hrtfdiff
