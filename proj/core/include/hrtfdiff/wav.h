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

#ifndef HRTFDIFF_WAV_H_
#define HRTFDIFF_WAV_H_

#include <string>
#include <vector>

namespace hrtfdiff {

struct WavData {
  int sample_rate = 0;
  // channels[c][n]
  std::vector<std::vector<double>> channels;
};

// Reads PCM16, PCM24, PCM32 or IEEE float32/float64 RIFF files.
WavData ReadWav(const std::string& path);

// Writes IEEE float32. All channels must have equal length.
void WriteWav(const std::string& path, const WavData& data);

}  // namespace hrtfdiff

#endif  // HRTFDIFF_WAV_H_
