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

#include "hrtfdiff/score_net.h"

#include <cmath>
#include <random>

namespace hrtfdiff {

using nn::Matrix;
using nn::Vector;

namespace {

constexpr double kResidualScale = 0.70710678118654752440;

}  // namespace


struct ScoreNet::ResBlock {
  nn::Conv1d conv1, conv2, skip;
  nn::Linear embed;
  bool has_skip = false;

  ResBlock(nn::ParamLayout& layout, int in, int out, int embed_dim)
      : conv1(layout, in, out, 3), conv2(layout, out, out, 3),
        embed(layout, embed_dim, out), has_skip(in != out) {
    if (has_skip) skip = nn::Conv1d(layout, in, out, 1);
  }

  void Init(Vector& params, std::mt19937_64& rng) const {
    conv1.Init(params, rng);
    conv2.Init(params, rng);
    embed.Init(params, rng);
    if (has_skip) skip.Init(params, rng);
  }

  Matrix Forward(const Vector& p, const Matrix& x, int length, const Matrix& silu_embed,
                 ResBlockTape* t) const {
    t->x = x;
    t->h = conv1.Forward(p, nn::Silu(x), length, &t->cols1);
    const Matrix proj = embed.Forward(p, silu_embed);
    const int batch = static_cast<int>(x.cols()) / length;
    for (int b = 0; b < batch; ++b) {
      t->h.middleCols(b * length, length).colwise() += proj.col(b);
    }
    Matrix out = conv2.Forward(p, nn::Silu(t->h), length, &t->cols2);
    if (has_skip) {
      Matrix unused;
      out += skip.Forward(p, x, length, &unused);
    } else {
      out += x;
    }
    out *= kResidualScale;
    return out;
  }

  Matrix Backward(const Vector& p, Vector* gp, const ResBlockTape& t, const Matrix& grad,
                  int length, const Matrix& silu_embed, Matrix* grad_silu_embed) const {
    const Matrix g = grad * kResidualScale;
    Matrix gz = conv2.Backward(p, gp, t.cols2, g, length);
    Matrix gh = nn::SiluBackward(t.h, gz);
    const int batch = static_cast<int>(t.x.cols()) / length;
    Matrix gproj(gh.rows(), batch);
    for (int b = 0; b < batch; ++b) {
      gproj.col(b) = gh.middleCols(b * length, length).rowwise().sum();
    }
    *grad_silu_embed += embed.Backward(p, gp, silu_embed, gproj);
    Matrix ga = conv1.Backward(p, gp, t.cols1, gh, length);
    Matrix gx = nn::SiluBackward(t.x, ga);
    if (has_skip) {
      gx += skip.Backward(p, gp, t.x, g, length);
    } else {
      gx += g;
    }
    return gx;
  }
};

void to_json(nlohmann::json& j, const ScoreNetConfig& c) {
  j = nlohmann::json{{"widths", c.widths},
                     {"embed_dim", c.embed_dim},
                     {"noise_features", c.noise_features},
                     {"noise_scale", c.noise_scale},
                     {"doa_features", c.doa_features},
                     {"doa_scale", c.doa_scale},
                     {"init_seed", c.init_seed}};
}

void from_json(const nlohmann::json& j, ScoreNetConfig& c) {
  ScoreNetConfig d;
  c.widths = j.value("widths", d.widths);
  c.embed_dim = j.value("embed_dim", d.embed_dim);
  c.noise_features = j.value("noise_features", d.noise_features);
  c.noise_scale = j.value("noise_scale", d.noise_scale);
  c.doa_features = j.value("doa_features", d.doa_features);
  c.doa_scale = j.value("doa_scale", d.doa_scale);
  c.init_seed = j.value("init_seed", d.init_seed);
}

Vector RffEmbed(const Matrix& freqs, std::span<const double> x) {
  if (static_cast<Eigen::Index>(x.size()) != freqs.rows()) {
    throw Error("shape_mismatch", "rff input dimension does not match frequencies");
  }
  const Eigen::Index n = freqs.cols();
  Vector out(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double dot = 0.0;
    for (Eigen::Index d = 0; d < freqs.rows(); ++d) dot += freqs(d, i) * x[d];
    out[i] = std::sin(2.0 * kPi * dot);
    out[n + i] = std::cos(2.0 * kPi * dot);
  }
  return out;
}

ScoreNet::ScoreNet(const ScoreNetConfig& config) : config_(config) {
  const auto& w = config_.widths;
  const int levels = static_cast<int>(w.size()) - 1;
  if (levels < 1 || (kNumBins >> levels) < 1 || (kNumBins % (1 << levels)) != 0) {
    throw Error("bad_config", "score net widths do not fit 128 bins");
  }
  if (2 * (config_.noise_features + config_.doa_features) <= 0) {
    throw Error("bad_config", "embedding needs features");
  }
  const int embed_in = 2 * config_.noise_features + 2 * config_.doa_features;
  in_conv_ = nn::Conv1d(layout_, kNumChannels, w[0], 3);
  embed1_ = nn::Linear(layout_, embed_in, config_.embed_dim);
  embed2_ = nn::Linear(layout_, config_.embed_dim, config_.embed_dim);
  null_doa_offset_ = layout_.Add(2 * config_.doa_features);
  int prev = w[0];
  for (int l = 0; l < levels; ++l) {
    encoder_.emplace_back(layout_, prev, w[l], config_.embed_dim);
    prev = w[l];
  }
  mid_ = std::make_unique<ResBlock>(layout_, prev, w[levels], config_.embed_dim);
  prev = w[levels];
  std::vector<std::unique_ptr<ResBlock>> dec(levels);
  for (int l = levels - 1; l >= 0; --l) {
    dec[l] = std::make_unique<ResBlock>(layout_, prev + w[l], w[l], config_.embed_dim);
    prev = w[l];
  }
  for (auto& block : dec) decoder_.push_back(std::move(*block));
  out_conv_ = nn::Conv1d(layout_, w[0], kNumChannels, 3);
  Initialize();
}

ScoreNet::~ScoreNet() = default;

void ScoreNet::Initialize() {
  std::mt19937_64 rng(config_.init_seed);
  params_ = Vector::Zero(layout_.size());
  in_conv_.Init(params_, rng);
  embed1_.Init(params_, rng);
  embed2_.Init(params_, rng);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 2 * config_.doa_features; ++i) {
    params_[null_doa_offset_ + i] = n(rng);
  }
  for (const auto& b : encoder_) b.Init(params_, rng);
  mid_->Init(params_, rng);
  for (const auto& b : decoder_) b.Init(params_, rng);
  out_conv_.Init(params_, rng, /*zero=*/true);

  std::mt19937_64 frng(MixSeed(config_.init_seed, 0x5eed));
  noise_freqs_.resize(1, config_.noise_features);
  for (int i = 0; i < config_.noise_features; ++i) noise_freqs_(0, i) = config_.noise_scale * n(frng);
  doa_freqs_.resize(3, config_.doa_features);
  for (int i = 0; i < config_.doa_features; ++i) {
    for (int d = 0; d < 3; ++d) doa_freqs_(d, i) = config_.doa_scale * n(frng);
  }
}

std::unique_ptr<ScoreNet::Tape> ScoreNet::NewTape() const {
  return std::make_unique<Tape>();
}

Matrix ScoreNet::EmbedInput(const std::vector<NetCondition>& cond, const Vector& params,
                            std::vector<bool>* used_null) const {
  const int nf = config_.noise_features;
  const int df = config_.doa_features;
  Matrix in(2 * nf + 2 * df, static_cast<Eigen::Index>(cond.size()));
  used_null->assign(cond.size(), false);
  for (std::size_t b = 0; b < cond.size(); ++b) {
    const double c = cond[b].c_noise;
    in.col(b).head(2 * nf) = RffEmbed(noise_freqs_, std::span<const double>(&c, 1));
    if (cond[b].doa) {
      in.col(b).tail(2 * df) = RffEmbed(doa_freqs_, *cond[b].doa);
    } else {
      (*used_null)[b] = true;
      for (int i = 0; i < 2 * df; ++i) in(2 * nf + i, b) = params[null_doa_offset_ + i];
    }
  }
  return in;
}

Matrix ScoreNet::Forward(const Matrix& x, const std::vector<NetCondition>& cond,
                         Tape* tape) const {
  return Forward(params_, x, cond, tape);
}

Matrix ScoreNet::Forward(const Vector& p, const Matrix& x,
                         const std::vector<NetCondition>& cond, Tape* tape) const {
  const int batch = static_cast<int>(cond.size());
  if (x.rows() != kNumChannels || x.cols() != Eigen::Index(batch) * kNumBins) {
    throw Error("shape_mismatch", "score net input must be 2 x (batch * 128)");
  }
  Tape local;
  Tape& t = tape != nullptr ? *tape : local;
  t.batch = batch;
  t.embed_in = EmbedInput(cond, p, &t.used_null);
  t.hidden = embed1_.Forward(p, t.embed_in);
  t.embed = embed2_.Forward(p, nn::Silu(t.hidden));
  t.silu_embed = nn::Silu(t.embed);

  const int levels = static_cast<int>(encoder_.size());
  t.enc.resize(levels);
  t.dec.resize(levels);
  std::vector<Matrix> skips(levels);
  Matrix h = in_conv_.Forward(p, x, kNumBins, &t.in_cols);
  for (int l = 0; l < levels; ++l) {
    const int length = kNumBins >> l;
    h = encoder_[l].Forward(p, h, length, t.silu_embed, &t.enc[l]);
    skips[l] = h;
    h = nn::AvgPool2(h, length);
  }
  h = mid_->Forward(p, h, kNumBins >> levels, t.silu_embed, &t.mid);
  for (int l = levels - 1; l >= 0; --l) {
    const int length = kNumBins >> l;
    Matrix up = nn::Upsample2(h, length / 2);
    Matrix cat(up.rows() + skips[l].rows(), up.cols());
    cat << up, skips[l];
    h = decoder_[l].Forward(p, cat, length, t.silu_embed, &t.dec[l]);
  }
  t.final_h = h;
  return out_conv_.Forward(p, nn::Silu(h), kNumBins, &t.out_cols);
}

void ScoreNet::Backward(const Vector& p, const Tape& t, const Matrix& grad_out,
                        Vector* grad_params, Matrix* grad_x) const {
  const int levels = static_cast<int>(encoder_.size());
  Matrix grad_silu_embed = Matrix::Zero(t.silu_embed.rows(), t.silu_embed.cols());
  Matrix g = out_conv_.Backward(p, grad_params, t.out_cols, grad_out, kNumBins);
  g = nn::SiluBackward(t.final_h, g);
  std::vector<Matrix> grad_skips(levels);
  for (int l = 0; l < levels; ++l) {
    const int length = kNumBins >> l;
    Matrix gcat = decoder_[l].Backward(p, grad_params, t.dec[l], g, length, t.silu_embed,
                                       &grad_silu_embed);
    const Eigen::Index skip_rows = config_.widths[l];
    const Eigen::Index up_rows = gcat.rows() - skip_rows;
    grad_skips[l] = gcat.bottomRows(skip_rows);
    g = nn::Upsample2Backward(gcat.topRows(up_rows), length / 2);
  }
  g = mid_->Backward(p, grad_params, t.mid, g, kNumBins >> levels, t.silu_embed,
                     &grad_silu_embed);
  for (int l = levels - 1; l >= 0; --l) {
    const int length = kNumBins >> l;
    g = nn::AvgPool2Backward(g, length);
    g += grad_skips[l];
    g = encoder_[l].Backward(p, grad_params, t.enc[l], g, length, t.silu_embed,
                             &grad_silu_embed);
  }
  Matrix gx = in_conv_.Backward(p, grad_params, t.in_cols, g, kNumBins);
  if (grad_x != nullptr) *grad_x = std::move(gx);
  if (grad_params == nullptr) return;

  Matrix g_embed = nn::SiluBackward(t.embed, grad_silu_embed);
  Matrix g_hidden_act = embed2_.Backward(p, grad_params, nn::Silu(t.hidden), g_embed);
  Matrix g_hidden = nn::SiluBackward(t.hidden, g_hidden_act);
  Matrix g_in = embed1_.Backward(p, grad_params, t.embed_in, g_hidden);
  const int offset = 2 * config_.noise_features;
  const int df2 = 2 * config_.doa_features;
  for (int b = 0; b < t.batch; ++b) {
    if (!t.used_null[b]) continue;
    grad_params->segment(null_doa_offset_, df2) += g_in.col(b).segment(offset, df2);
  }
}

Matrix FeaturesToMatrix(const std::vector<FeatureArray>& features) {
  Matrix m(kNumChannels, Eigen::Index(features.size()) * kNumBins);
  for (std::size_t b = 0; b < features.size(); ++b) {
    for (int c = 0; c < kNumChannels; ++c) {
      for (int f = 0; f < kNumBins; ++f) m(c, b * kNumBins + f) = features[b][c * kNumBins + f];
    }
  }
  return m;
}

std::vector<FeatureArray> MatrixToFeatures(const Matrix& m) {
  std::vector<FeatureArray> out(m.cols() / kNumBins);
  for (std::size_t b = 0; b < out.size(); ++b) {
    for (int c = 0; c < kNumChannels; ++c) {
      for (int f = 0; f < kNumBins; ++f) out[b][c * kNumBins + f] = m(c, b * kNumBins + f);
    }
  }
  return out;
}

}  // namespace hrtfdiff
