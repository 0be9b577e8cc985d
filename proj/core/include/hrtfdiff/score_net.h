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

#ifndef HRTFDIFF_SCORE_NET_H_
#define HRTFDIFF_SCORE_NET_H_

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "hrtfdiff/common.h"
#include "hrtfdiff/nn_layers.h"

namespace hrtfdiff {

struct ScoreNetConfig {
  // Channel width per resolution level; the last entry is the bottleneck.
  std::vector<int> widths = {32, 32, 32, 32, 64, 64, 128, 128};
  int embed_dim = 128;
  int noise_features = 64;
  double noise_scale = 16.0;
  int doa_features = 64;
  double doa_scale = 1.0;
  std::uint64_t init_seed = 0;
};

void to_json(nlohmann::json& j, const ScoreNetConfig& c);
void from_json(const nlohmann::json& j, ScoreNetConfig& c);

// Per-item conditioning; a missing DoA selects the learned null embedding.
struct NetCondition {
  double c_noise = 0.0;
  std::optional<std::array<double, 3>> doa;
};

// Intermediate activations recorded by ScoreNet::Forward.
struct ResBlockTape {
  nn::Matrix x;
  nn::Matrix cols1;
  nn::Matrix h;
  nn::Matrix cols2;
};

struct ScoreNetTape {
  int batch = 0;
  nn::Matrix embed_in;
  nn::Matrix hidden;
  nn::Matrix embed;
  nn::Matrix silu_embed;
  std::vector<bool> used_null;
  nn::Matrix in_cols;
  std::vector<ResBlockTape> enc;
  ResBlockTape mid;
  std::vector<ResBlockTape> dec;
  nn::Matrix final_h;
  nn::Matrix out_cols;
};

// 1-D UNet over the 128 frequency bins with the two ears as channels.
class ScoreNet {
 public:
  using Tape = ScoreNetTape;

  explicit ScoreNet(const ScoreNetConfig& config = {});
  ~ScoreNet();
  ScoreNet(const ScoreNet&) = delete;
  ScoreNet& operator=(const ScoreNet&) = delete;

  const ScoreNetConfig& config() const { return config_; }
  std::size_t num_params() const { return layout_.size(); }
  nn::Vector& params() { return params_; }
  const nn::Vector& params() const { return params_; }

  // Re-draws every parameter from config().init_seed.
  void Initialize();

  // x: 2 x (batch * 128). The tape, when given, records what Backward needs.
  nn::Matrix Forward(const nn::Matrix& x, const std::vector<NetCondition>& cond,
                     Tape* tape = nullptr) const;
  nn::Matrix Forward(const nn::Vector& params, const nn::Matrix& x,
                     const std::vector<NetCondition>& cond, Tape* tape) const;

  // Accumulates parameter gradients when grad_params is non-null and writes
  // the input gradient when grad_x is non-null.
  void Backward(const nn::Vector& params, const Tape& tape,
                const nn::Matrix& grad_out, nn::Vector* grad_params,
                nn::Matrix* grad_x) const;

  std::unique_ptr<Tape> NewTape() const;

  const nn::Matrix& noise_freqs() const { return noise_freqs_; }
  const nn::Matrix& doa_freqs() const { return doa_freqs_; }

 private:
  struct ResBlock;
  nn::Matrix EmbedInput(const std::vector<NetCondition>& cond,
                        const nn::Vector& params, std::vector<bool>* used_null) const;

  ScoreNetConfig config_;
  nn::ParamLayout layout_;
  nn::Vector params_;
  nn::Matrix noise_freqs_;  // 1 x noise_features
  nn::Matrix doa_freqs_;    // 3 x doa_features
  nn::Conv1d in_conv_;
  nn::Linear embed1_, embed2_;
  std::size_t null_doa_offset_ = 0;
  std::vector<ResBlock> encoder_;
  std::unique_ptr<ResBlock> mid_;
  std::vector<ResBlock> decoder_;  // decoder_[l] works at level l
  nn::Conv1d out_conv_;
};

// Random Fourier features [sin(2 pi f_i . x), cos(2 pi f_i . x)]_i for
// frequencies stored as dim x n columns.
nn::Vector RffEmbed(const nn::Matrix& freqs, std::span<const double> x);

// Feature <-> network layout helpers (2 x (batch * 128)).
nn::Matrix FeaturesToMatrix(const std::vector<FeatureArray>& features);
std::vector<FeatureArray> MatrixToFeatures(const nn::Matrix& m);

}  // namespace hrtfdiff

#endif  // HRTFDIFF_SCORE_NET_H_
