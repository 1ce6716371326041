// Copyright 2026 The ionlaser Authors
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

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace ionlaser {

enum class Normalization { RateProduct, TailMean };

/// g2 values on a uniform tau grid. Model curves leave `counts` empty and
/// `normalization` unset; measured/simulated histograms fill both.
struct CorrelationSeries {
  std::vector<double> tau_us;   // bin centers
  std::vector<double> values;   // g2 estimates
  std::vector<double> errors;   // one-sigma statistical error per bin (histograms only)
  std::vector<std::uint64_t> counts;
  double bin_width_ns = 0.0;
  std::optional<Normalization> normalization;
  std::optional<double> snr_applied;  // +inf means "no noise"
  std::size_t clamped_bins = 0;
  double norm_factor = 0.0;  // expected accidental count per bin, for error bars

  std::size_t size() const { return values.size(); }
};

}  // namespace ionlaser
