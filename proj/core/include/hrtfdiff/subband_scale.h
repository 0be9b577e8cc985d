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

#ifndef HRTFDIFF_SUBBAND_SCALE_H_
#define HRTFDIFF_SUBBAND_SCALE_H_

#include <string>
#include <vector>

namespace hrtfdiff {

// Partition of the STFT bin axis into quasi-logarithmic bands: two-bin
// linear bands below `linear_cutoff_hz`, geometric spacing above.
class SubbandScale {
 public:
  SubbandScale(int num_bands = 40, int num_bins = 513,
               double sample_rate = 44100.0, double linear_cutoff_hz = 400.0);

  int num_bands() const { return static_cast<int>(edges_.size()) - 1; }
  int num_bins() const { return num_bins_; }
  // num_bands + 1 strictly increasing bin indices; edges[0] = 0 and
  // edges.back() = num_bins. Band b covers [edges[b], edges[b+1]).
  const std::vector<int>& edges() const { return edges_; }
  int BandOfBin(int bin) const { return band_of_bin_[bin]; }

  // CSV: band,lo_bin,hi_bin,lo_hz,hi_hz
  std::string ToCsv() const;

 private:
  int num_bins_;
  double bin_hz_;
  std::vector<int> edges_;
  std::vector<int> band_of_bin_;
};

}  // namespace hrtfdiff

#endif  // HRTFDIFF_SUBBAND_SCALE_H_
