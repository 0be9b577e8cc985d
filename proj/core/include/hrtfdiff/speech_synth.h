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

#ifndef HRTFDIFF_SPEECH_SYNTH_H_
#define HRTFDIFF_SPEECH_SYNTH_H_

#include <cstdint>
#include <vector>

namespace hrtfdiff {

// Speech-like excitation: voiced formant segments over a drifting glottal
// pulse train, fricative noise bursts and short pauses.
struct SpeechSynthConfig {
  double seconds = 1.0;
  int sample_rate = 44100;
  double rms = 0.05;
};

std::vector<double> SynthesizeSpeech(std::uint64_t seed,
                                     const SpeechSynthConfig& config = {});

}  // namespace hrtfdiff

#endif  // HRTFDIFF_SPEECH_SYNTH_H_
