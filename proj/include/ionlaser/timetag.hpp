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

// Two-channel photon time tags: file formats, coincidence histogram and
// correction for accidental (noise) coincidences.
//
// File formats:
//   csv    - header line `channel,picoseconds`, then one `c,t` row per click
//   binary - repeated 9-byte little-endian records: uint8 channel, uint64 ps
// Within each channel timestamps must be non-decreasing.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ionlaser/core.hpp"
#include "ionlaser/correlation.hpp"

namespace ionlaser {

struct ClickRecord {
  std::uint8_t channel = 0;
  std::uint64_t t_ps = 0;

  friend bool operator==(const ClickRecord&, const ClickRecord&) = default;
};

using ClickStream = std::vector<ClickRecord>;
using ClickStreams = std::array<ClickStream, 2>;

enum class ClickFormat { Csv, Binary };

namespace detail {

inline void add_click(ClickStreams& s, unsigned channel, std::uint64_t t, const std::string& where) {
  using K = ClickFormatError::Kind;
  if (channel > 1) throw ClickFormatError(K::BadChannel, where + ": channel must be 0 or 1");
  auto& stream = s[channel];
  if (!stream.empty() && t < stream.back().t_ps)
    throw ClickFormatError(K::UnsortedInput, where + ": timestamps decrease within channel " + std::to_string(channel));
  stream.push_back({static_cast<std::uint8_t>(channel), t});
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline ClickStreams read_clicks_csv(std::istream& in) {
  using K = ClickFormatError::Kind;
  ClickStreams out;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::trim(line);
    if (line.empty()) continue;
    if (!header) {
      if (line != "channel,picoseconds")
        throw ClickFormatError(K::Malformed, "line " + std::to_string(lineno) + ": expected header channel,picoseconds");
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    const std::string where = "line " + std::to_string(lineno);
    if (comma == std::string::npos) throw ClickFormatError(K::Malformed, where + ": expected channel,picoseconds");
    const std::string c = detail::trim(line.substr(0, comma));
    const std::string t = detail::trim(line.substr(comma + 1));
    if (c.empty() || t.empty() || c.find_first_not_of("0123456789") != std::string::npos ||
        t.find_first_not_of("0123456789") != std::string::npos)
      throw ClickFormatError(K::Malformed, where + ": fields must be non-negative integers");
    unsigned long long ch = 0, ps = 0;
    try {
      ch = std::stoull(c);
      ps = std::stoull(t);
    } catch (const std::exception&) {
      throw ClickFormatError(K::Malformed, where + ": integer out of range");
    }
    detail::add_click(out, ch > 255 ? 256u : static_cast<unsigned>(ch), ps, where);
  }
  return out;
}

inline ClickStreams read_clicks_binary(std::istream& in) {
  using K = ClickFormatError::Kind;
  ClickStreams out;
  std::array<unsigned char, 9> rec{};
  std::size_t index = 0;
  while (true) {
    in.read(reinterpret_cast<char*>(rec.data()), rec.size());
    const auto got = in.gcount();
    if (got == 0) break;
    if (got != static_cast<std::streamsize>(rec.size()))
      throw ClickFormatError(K::TruncatedRecord, "record " + std::to_string(index) + ": truncated");
    std::uint64_t t = 0;
    for (int b = 7; b >= 0; --b) t = (t << 8) | rec[static_cast<std::size_t>(1 + b)];
    detail::add_click(out, rec[0], t, "record " + std::to_string(index));
    ++index;
  }
  return out;
}

inline ClickStreams load_clicks(const std::string& path, ClickFormat format) {
  std::ifstream in(path, format == ClickFormat::Binary ? std::ios::binary : std::ios::in);
  if (!in) throw Error("cannot open " + path);
  return format == ClickFormat::Csv ? read_clicks_csv(in) : read_clicks_binary(in);
}

/// Both channels merged in time order (channel 0 first on ties).
inline std::vector<ClickRecord> merged(const ClickStreams& s) {
  std::vector<ClickRecord> all;
  all.reserve(s[0].size() + s[1].size());
  std::merge(s[0].begin(), s[0].end(), s[1].begin(), s[1].end(), std::back_inserter(all),
             [](const ClickRecord& a, const ClickRecord& b) { return a.t_ps < b.t_ps; });
  return all;
}

inline void write_clicks_csv(std::ostream& out, const ClickStreams& s) {
  out << "channel,picoseconds\n";
  for (const auto& r : merged(s)) out << static_cast<unsigned>(r.channel) << ',' << r.t_ps << '\n';
}

inline void write_clicks_binary(std::ostream& out, const ClickStreams& s) {
  for (const auto& r : merged(s)) {
    std::array<unsigned char, 9> rec{};
    rec[0] = r.channel;
    for (int b = 0; b < 8; ++b) rec[static_cast<std::size_t>(1 + b)] = static_cast<unsigned char>(r.t_ps >> (8 * b));
    out.write(reinterpret_cast<const char*>(rec.data()), rec.size());
  }
}

inline void save_clicks(const std::string& path, const ClickStreams& s, ClickFormat format) {
  std::ofstream out(path, format == ClickFormat::Binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error("cannot write " + path);
  format == ClickFormat::Csv ? write_clicks_csv(out, s) : write_clicks_binary(out, s);
}

struct CrossCorrelationOptions {
  double bin_width_ns = 500.0;
  double tau_max_us = 15.0;
  Normalization normalization = Normalization::RateProduct;
  /// Acquisition time for RateProduct. Unset: overlap of the two streams.
  std::optional<double> duration_us;
};

/// Histogram of delays t1 - t0 over all pairs with |tau| <= tau_max, in bins
/// of `bin_width_ns` centered on multiples of the width (the zero bin spans
/// -w/2..+w/2; delays exactly on a boundary go to the bin farther from zero,
/// so swapping channels mirrors the histogram exactly).
///
/// RateProduct: g2 = C T / (N0 N1 w). TailMean: g2 = C / mean(C over the
/// outer 20% of bins).
inline CorrelationSeries cross_correlate(const ClickStream& s0, const ClickStream& s1,
                                         const CrossCorrelationOptions& opt = {}) {
  using K = CorrelationError::Kind;
  if (s0.empty() || s1.empty()) throw CorrelationError(K::EmptyStream, "cross_correlate: empty stream");
  if (!(opt.bin_width_ns > 0.0) || !(opt.tau_max_us >= 0.0)) throw ConfigurationError("cross_correlate: bad binning");

  const auto width = static_cast<std::int64_t>(std::llround(opt.bin_width_ns * 1e3));
  if (width <= 0) throw ConfigurationError("cross_correlate: bin width below 1 ps");
  const auto half_bins = static_cast<std::int64_t>(std::floor(opt.tau_max_us * 1e6 / static_cast<double>(width) + 1e-9));
  const std::int64_t nbins = 2 * half_bins + 1;
  const std::int64_t reach = (half_bins + 1) * width;

  std::vector<std::uint64_t> counts(static_cast<std::size_t>(nbins), 0);
  std::size_t lo = 0;
  for (const auto& a : s0) {
    const auto t0 = static_cast<std::int64_t>(a.t_ps);
    while (lo < s1.size() && static_cast<std::int64_t>(s1[lo].t_ps) < t0 - reach) ++lo;
    for (std::size_t j = lo; j < s1.size(); ++j) {
      const std::int64_t delta = static_cast<std::int64_t>(s1[j].t_ps) - t0;
      if (delta > reach) break;
      const std::int64_t mag = (2 * (delta < 0 ? -delta : delta) + width) / (2 * width);
      if (mag > half_bins) continue;
      const std::int64_t k = delta < 0 ? -mag : mag;
      ++counts[static_cast<std::size_t>(k + half_bins)];
    }
  }

  CorrelationSeries out;
  out.bin_width_ns = opt.bin_width_ns;
  out.normalization = opt.normalization;
  out.counts = counts;
  out.tau_us.resize(counts.size());
  for (std::int64_t k = -half_bins; k <= half_bins; ++k)
    out.tau_us[static_cast<std::size_t>(k + half_bins)] = static_cast<double>(k * width) * 1e-6;

  double norm = 0.0;
  if (opt.normalization == Normalization::RateProduct) {
    double duration_us = 0.0;
    if (opt.duration_us) {
      duration_us = *opt.duration_us;
    } else {
      const auto first = std::max(s0.front().t_ps, s1.front().t_ps);
      const auto last = std::min(s0.back().t_ps, s1.back().t_ps);
      duration_us = last > first ? static_cast<double>(last - first) * 1e-6 : 0.0;
    }
    if (!(duration_us > 0.0)) throw CorrelationError(K::ZeroDuration, "cross_correlate: zero acquisition time");
    norm = static_cast<double>(s0.size()) * static_cast<double>(s1.size()) * (opt.bin_width_ns * 1e-3) / duration_us;
  } else {
    const std::size_t tail = std::max<std::size_t>(1, static_cast<std::size_t>(0.1 * static_cast<double>(nbins)));
    double sum = 0.0;
    for (std::size_t i = 0; i < tail; ++i) sum += static_cast<double>(counts[i] + counts[counts.size() - 1 - i]);
    norm = sum / static_cast<double>(2 * tail);
    if (!(norm > 0.0)) throw CorrelationError(K::EmptyStream, "cross_correlate: no coincidences in the tail bins");
  }
  out.norm_factor = norm;
  out.values.resize(counts.size());
  out.errors.resize(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    out.values[i] = static_cast<double>(counts[i]) / norm;
    out.errors[i] = std::sqrt(std::max<double>(1.0, static_cast<double>(counts[i]))) / norm;
  }
  return out;
}

/// Removes accidental coincidences from Poissonian background:
/// g2 = 1 + ((S/N + 1)^2 / (S/N)^2) (g2_raw - 1). `snr` = +inf leaves the
/// series unchanged. Negative results are clamped to 0 and counted.
inline CorrelationSeries subtract_accidentals(const CorrelationSeries& raw, double snr) {
  if (std::isnan(snr) || !(snr > 0.0))
    throw CorrelationError(CorrelationError::Kind::NonPositiveSNR, "subtract_accidentals: S/N must be > 0");
  CorrelationSeries out = raw;
  out.snr_applied = snr;
  out.clamped_bins = 0;
  if (std::isinf(snr)) return out;
  const double factor = (snr + 1.0) * (snr + 1.0) / (snr * snr);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    double v = 1.0 + factor * (raw.values[i] - 1.0);
    if (v < 0.0) {
      v = 0.0;
      ++out.clamped_bins;
    }
    out.values[i] = v;
  }
  for (auto& e : out.errors) e *= factor;
  return out;
}

/// Inverse of subtract_accidentals (without clamping): puts the accidental
/// background back into a noise-free series.
inline CorrelationSeries add_accidentals(const CorrelationSeries& clean, double snr) {
  if (std::isnan(snr) || !(snr > 0.0))
    throw CorrelationError(CorrelationError::Kind::NonPositiveSNR, "add_accidentals: S/N must be > 0");
  CorrelationSeries out = clean;
  out.snr_applied.reset();
  if (std::isinf(snr)) return out;
  const double factor = snr * snr / ((snr + 1.0) * (snr + 1.0));
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = 1.0 + factor * (clean.values[i] - 1.0);
  for (auto& e : out.errors) e *= factor;
  return out;
}

/// Value of the tau = 0 bin.
inline double zero_lag_value(const CorrelationSeries& s) {
  for (std::size_t i = 0; i < s.tau_us.size(); ++i)
    if (std::abs(s.tau_us[i]) < 1e-12) return s.values.at(i);
  throw CorrelationError(CorrelationError::Kind::MissingZeroBin, "series has no tau = 0 bin");
}

/// Mandel Q from the measured zero-lag correlation: n_ss (g2(0) - 1).
inline double q_from_series(const CorrelationSeries& s, double n_ss) { return n_ss * (zero_lag_value(s) - 1.0); }

/// CSV export: header `tau_us,g2,counts`.
inline void write_series_csv(std::ostream& out, const CorrelationSeries& s) {
  out << "tau_us,g2,counts\n";
  out << std::setprecision(12);
  for (std::size_t i = 0; i < s.values.size(); ++i)
    out << s.tau_us[i] << ',' << s.values[i] << ',' << (i < s.counts.size() ? s.counts[i] : 0) << '\n';
}

inline void save_series_csv(const std::string& path, const CorrelationSeries& s) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_series_csv(out, s);
}

}  // namespace ionlaser
