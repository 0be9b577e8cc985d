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

#include "hrtfdiff/subband_scale.h"

#include <cmath>
#include <sstream>

#include "hrtfdiff/common.h"

namespace hrtfdiff {

SubbandScale::SubbandScale(int num_bands, int num_bins, double sample_rate,
                           double linear_cutoff_hz)
    : num_bins_(num_bins), bin_hz_(sample_rate / (2.0 * (num_bins - 1))) {
  if (num_bands < 1 || num_bins < num_bands) {
    throw Error("bad_subbands", "cannot split " + std::to_string(num_bins) +
                                    " bins into " + std::to_string(num_bands) +
                                    " bands");
  }
  const int cutoff_bin = static_cast<int>(std::round(linear_cutoff_hz / bin_hz_));
  edges_.push_back(0);
  while (edges_.back() + 2 <= cutoff_bin &&
         static_cast<int>(edges_.size()) < num_bands / 2) {
    edges_.push_back(edges_.back() + 2);
  }
  const int linear_bands = static_cast<int>(edges_.size()) - 1;
  const int log_bands = num_bands - linear_bands;
  const double lo = std::max(1, edges_.back());
  const double ratio = static_cast<double>(num_bins) / lo;
  for (int i = 1; i <= log_bands; ++i) {
    int e = static_cast<int>(std::round(lo * std::pow(ratio, double(i) / log_bands)));
    // Leave room for the remaining edges to stay distinct.
    const int remaining = log_bands - i;
    e = std::max(e, edges_.back() + 1);
    e = std::min(e, num_bins - remaining);
    edges_.push_back(e);
  }
  edges_.back() = num_bins;
  band_of_bin_.resize(num_bins);
  for (int b = 0; b + 1 < static_cast<int>(edges_.size()); ++b) {
    for (int k = edges_[b]; k < edges_[b + 1]; ++k) band_of_bin_[k] = b;
  }
}

std::string SubbandScale::ToCsv() const {
  std::ostringstream out;
  out << "band,lo_bin,hi_bin,lo_hz,hi_hz\n";
  for (int b = 0; b < num_bands(); ++b) {
    out << b << ',' << edges_[b] << ',' << edges_[b + 1] - 1 << ','
        << edges_[b] * bin_hz_ << ',' << (edges_[b + 1] - 1) * bin_hz_ << '\n';
  }
  return out.str();
}

}  // namespace hrtfdiff
