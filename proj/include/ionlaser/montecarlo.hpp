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

// Quantum-jump unraveling of the master equation and a model of the
// two-detector (Hanbury Brown-Twiss) click record it produces.
//
// Between jumps the state evolves under H_eff = H - i/2 sum C^+C. H_eff is
// diagonalized once per parameter point, so propagation over any interval is
// a pair of dense matrix-vector products and the jump time (when |psi|^2
// falls to a uniform random number) is found by a bracketed Newton search.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <thread>
#include <vector>

#include "ionlaser/core.hpp"
#include "ionlaser/master.hpp"
#include "ionlaser/params.hpp"
#include "ionlaser/timetag.hpp"

namespace ionlaser {

/// Detection chain behind the cavity output mirror. Rates are per detector,
/// in counts per second.
struct DetectionParams {
  /// Probability that a photon leaving the cavity is registered by either
  /// detector. The default reproduces 32 kHz of counts per intracavity
  /// photon at the calibrated cavity decay rate.
  double cavity_path_efficiency = 32.0 / (2.0 * kTwoPi * 54.0);
  double splitter_ratio = 0.5;  // fraction sent to channel 0
  double dark_rate = 50.0;
  double stray_rate = 0.0;
  double eta_397 = 0.018;  // collection efficiency of the spontaneous 397 nm light
  double timing_jitter_ps = 0.0;  // Gaussian sigma

  double noise_rate() const { return dark_rate + stray_rate; }

  void validate() const {
    auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!unit(cavity_path_efficiency) || !unit(splitter_ratio) || !unit(eta_397))
      throw ConfigurationError("detection: efficiencies and splitter ratio must lie in [0, 1]");
    if (!(dark_rate >= 0.0) || !(stray_rate >= 0.0) || !(timing_jitter_ps >= 0.0) || !std::isfinite(noise_rate()))
      throw ConfigurationError("detection: rates and jitter must be >= 0");
  }
};

struct MonteCarloOptions {
  double duration_us = 1000.0;  // recorded time per trajectory
  int n_traj = 1;
  std::uint64_t seed = 1;
  double burn_in_us = 20.0;  // discarded start of each trajectory
  double sample_interval_us = 0.25;
  int batches_per_trajectory = 10;
  int threads = 1;
  double norm_tolerance = 1e-9;
};

struct MonteCarloResult {
  ClickStreams streams;
  double total_duration_us = 0.0;  // n_traj * duration; trajectories are laid end to end
  double mean_n = 0.0, se_n = 0.0;
  double mean_np = 0.0, se_np = 0.0;
  std::uint64_t jumps = 0;
  std::uint64_t cavity_emissions = 0;
  std::array<std::uint64_t, 2> signal_clicks{};
  std::array<std::uint64_t, 2> noise_clicks{};
  std::uint64_t fluorescence_counts = 0;  // detected 397 nm photons

  /// S/N from the known origin of every click.
  double true_snr() const {
    const double s = static_cast<double>(signal_clicks[0] + signal_clicks[1]);
    const double n = static_cast<double>(noise_clicks[0] + noise_clicks[1]);
    return n > 0.0 ? s / n : std::numeric_limits<double>::infinity();
  }
};

namespace detail {

/// Random numbers from a 64-bit Mersenne twister with explicit conversions,
/// so streams are identical across standard libraries.
class TrajectoryRng {
 public:
  TrajectoryRng(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    gen_.seed(seq);
  }

  /// Uniform on (0, 1].
  double uniform() { return static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53; }
  double exponential(double rate) { return -std::log(uniform()) / rate; }
  double normal() {
    const double u1 = uniform(), u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

 private:
  std::mt19937_64 gen_;
};

struct TrajectoryOutput {
  ClickStreams streams;
  std::vector<double> batch_n, batch_np;
  std::uint64_t jumps = 0, cavity_emissions = 0, fluorescence = 0;
  std::array<std::uint64_t, 2> signal{}, noise{};
};

class JumpPropagator {
 public:
  JumpPropagator(const SystemParams& p, const DetectionParams& d, const MonteCarloOptions& opt)
      : params_(p), det_(d), opt_(opt), space_(ion_space(p)) {
    const Operator h = build_hamiltonian(space_, p);
    const auto dim = space_.dim();
    DenseMatrix rates = DenseMatrix::Zero(dim, dim);
    for (auto& c : build_collapse_channels(space_, p)) {
      rates += DenseMatrix(Operator(Operator(c.op.adjoint()) * c.op));
      channels_.push_back(std::move(c));
    }
    rates_ = 0.5 * (rates + rates.adjoint());
    const DenseMatrix heff = DenseMatrix(h) - Complex(0.0, 0.5) * rates_;

    Eigen::ComplexEigenSolver<DenseMatrix> es(heff);
    if (es.info() != Eigen::Success) throw NonConvergence("monte carlo: H_eff diagonalization failed");
    v_ = es.eigenvectors();
    lambda_ = es.eigenvalues();
    Eigen::PartialPivLU<DenseMatrix> lu(v_);
    v_inv_ = lu.inverse();
    const DenseMatrix rebuilt = v_ * lambda_.asDiagonal() * v_inv_;
    const double scale = std::max(1.0, heff.cwiseAbs().maxCoeff());
    if ((rebuilt - heff).cwiseAbs().maxCoeff() > 1e-9 * scale)
      throw NonConvergence("monte carlo: H_eff eigenbasis is ill-conditioned");

    number_ = DenseMatrix(photon_number_operator(space_)).diagonal().real();
    p_proj_ = DenseMatrix(term_projector(space_, Term::P12)).diagonal().real();
    const Atom& atom = space_.atom();
    start_ = {space_.index(atom.index(Term::S12, -1), 0, 0), space_.index(atom.index(Term::S12, 1), 0, 0)};
  }

  TrajectoryOutput run(std::uint64_t index) const {
    TrajectoryRng rng(opt_.seed, index);
    TrajectoryOutput out;
    const double offset_us = static_cast<double>(index) * opt_.duration_us;
    const double end = opt_.burn_in_us + opt_.duration_us;
    const int nb = std::max(1, opt_.batches_per_trajectory);
    std::vector<double> sum_n(static_cast<std::size_t>(nb), 0.0), sum_np(static_cast<std::size_t>(nb), 0.0);
    std::vector<std::size_t> samples(static_cast<std::size_t>(nb), 0);

    auto record_click = [&](int channel, double t_us, bool signal) {
      double ps = (offset_us + t_us - opt_.burn_in_us) * 1e6;
      if (det_.timing_jitter_ps > 0.0) ps += det_.timing_jitter_ps * rng.normal();
      const auto t = static_cast<std::uint64_t>(std::llround(std::max(0.0, ps)));
      out.streams[static_cast<std::size_t>(channel)].push_back({static_cast<std::uint8_t>(channel), t});
      (signal ? out.signal : out.noise)[static_cast<std::size_t>(channel)]++;
    };

    Vector psi = Vector::Zero(space_.dim());
    psi(rng.uniform() <= 0.5 ? start_[0] : start_[1]) = 1.0;
    double t = 0.0;
    double next_sample = opt_.burn_in_us + 0.5 * opt_.sample_interval_us;

    while (t < end) {
      const Vector c0 = v_inv_ * psi;
      const double r = rng.uniform();
      const double horizon = end - t;
      const double tau = jump_delay(c0, r, psi, horizon);

      const double stop = std::min(t + tau, end);
      while (next_sample < stop) {
        const Vector s = evolve(c0, next_sample - t);
        const double norm2 = s.squaredNorm();
        const auto b = std::min<std::size_t>(
            static_cast<std::size_t>(nb) - 1,
            static_cast<std::size_t>((next_sample - opt_.burn_in_us) / opt_.duration_us * nb));
        sum_n[b] += (s.cwiseAbs2().array() * number_.array()).sum() / norm2;
        sum_np[b] += (s.cwiseAbs2().array() * p_proj_.array()).sum() / norm2;
        ++samples[b];
        next_sample += opt_.sample_interval_us;
      }
      if (!(tau < horizon)) break;

      t += tau;
      psi = evolve(c0, tau);
      std::vector<double> weights(channels_.size());
      double total = 0.0;
      for (std::size_t k = 0; k < channels_.size(); ++k) {
        weights[k] = (channels_[k].op * psi).squaredNorm();
        total += weights[k];
      }
      double pick = rng.uniform() * total;
      std::size_t k = 0;
      while (k + 1 < channels_.size() && pick > weights[k]) pick -= weights[k++];
      psi = channels_[k].op * psi;
      psi /= psi.norm();
      ++out.jumps;

      const auto kind = channels_[k].kind;
      if (t < opt_.burn_in_us) continue;
      if (kind == CollapseKind::CavityH || kind == CollapseKind::CavityV) {
        ++out.cavity_emissions;
        if (rng.uniform() <= det_.cavity_path_efficiency) record_click(rng.uniform() <= det_.splitter_ratio ? 0 : 1, t, true);
      } else if (kind == CollapseKind::DecayS && det_.eta_397 > 0.0 && rng.uniform() <= det_.eta_397) {
        ++out.fluorescence;
      }
    }

    const double noise_per_us = det_.noise_rate() * 1e-6;
    if (noise_per_us > 0.0) {
      for (int ch = 0; ch < 2; ++ch) {
        double tn = opt_.burn_in_us + rng.exponential(noise_per_us);
        while (tn < end) {
          record_click(ch, tn, false);
          tn += rng.exponential(noise_per_us);
        }
      }
    }
    for (auto& s : out.streams)
      std::stable_sort(s.begin(), s.end(), [](const ClickRecord& a, const ClickRecord& b) { return a.t_ps < b.t_ps; });

    for (int b = 0; b < nb; ++b) {
      const auto n = static_cast<double>(std::max<std::size_t>(1, samples[static_cast<std::size_t>(b)]));
      out.batch_n.push_back(sum_n[static_cast<std::size_t>(b)] / n);
      out.batch_np.push_back(sum_np[static_cast<std::size_t>(b)] / n);
    }
    return out;
  }

 private:
  Vector evolve(const Vector& c0, double tau) const {
    Vector c(c0.size());
    for (Eigen::Index i = 0; i < c0.size(); ++i) c(i) = c0(i) * std::exp(Complex(0.0, -1.0) * lambda_(i) * tau);
    return v_ * c;
  }

  /// Delay until |psi(tau)|^2 = r, or `horizon` if that does not happen first.
  double jump_delay(const Vector& c0, double r, const Vector& psi0, double horizon) const {
    auto f = [&](double tau, Vector& psi) {
      psi = evolve(c0, tau);
      return psi.squaredNorm() - r;
    };
    Vector psi;
    const double rate0 = std::real(psi0.dot(rates_ * psi0));
    double lo = 0.0;
    double hi = std::min(horizon, rate0 > 0.0 ? std::max(1e-6, -std::log(r) / rate0) : 1.0);
    double fhi = f(hi, psi);
    while (fhi > 0.0) {
      if (hi >= horizon) return horizon;
      lo = hi;
      hi = std::min(horizon, 2.0 * hi);
      fhi = f(hi, psi);
    }
    double x = hi;
    double fx = fhi;
    for (int it = 0; it < 200; ++it) {
      if (std::abs(fx) < opt_.norm_tolerance || hi - lo < 1e-13 * std::max(1.0, hi)) break;
      const double slope = -std::real(psi.dot(rates_ * psi));
      double next = slope < 0.0 ? x - fx / slope : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      x = next;
      fx = f(x, psi);
      (fx > 0.0 ? lo : hi) = x;
    }
    return x;
  }

  SystemParams params_;
  DetectionParams det_;
  MonteCarloOptions opt_;
  Space space_;
  std::vector<CollapseChannel> channels_;
  DenseMatrix rates_;
  DenseMatrix v_, v_inv_;
  Vector lambda_;
  Eigen::VectorXd number_, p_proj_;
  std::array<Eigen::Index, 2> start_{};
};

}  // namespace detail

/// Simulates `opt.n_traj` independent trajectories of `opt.duration_us` each
/// (after burn-in) and returns the detector clicks with the trajectories
/// placed back to back in time. Results depend only on the parameters and
/// the seed, not on the thread count.
inline MonteCarloResult run_trajectories(const SystemParams& p, const DetectionParams& d, const MonteCarloOptions& opt) {
  p.validate();
  d.validate();
  if (opt.n_traj < 1) throw ConfigurationError("monte carlo: n_traj must be >= 1");
  if (!(opt.duration_us > 0.0) || !(opt.burn_in_us >= 0.0) || !(opt.sample_interval_us > 0.0))
    throw ConfigurationError("monte carlo: duration and sample interval must be > 0");

  const detail::JumpPropagator prop(p, d, opt);
  std::vector<detail::TrajectoryOutput> outs(static_cast<std::size_t>(opt.n_traj));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < opt.n_traj; i = next++)
      outs[static_cast<std::size_t>(i)] = prop.run(static_cast<std::uint64_t>(i));
  };
  const int nthreads = std::clamp(opt.threads, 1, opt.n_traj);
  std::vector<std::thread> pool;
  for (int i = 1; i < nthreads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  MonteCarloResult res;
  res.total_duration_us = opt.duration_us * opt.n_traj;
  std::vector<double> bn, bnp;
  for (auto& o : outs) {
    for (std::size_t ch = 0; ch < 2; ++ch) {
      auto& dst = res.streams[ch];
      dst.insert(dst.end(), o.streams[ch].begin(), o.streams[ch].end());
      res.signal_clicks[ch] += o.signal[ch];
      res.noise_clicks[ch] += o.noise[ch];
    }
    res.jumps += o.jumps;
    res.cavity_emissions += o.cavity_emissions;
    res.fluorescence_counts += o.fluorescence;
    bn.insert(bn.end(), o.batch_n.begin(), o.batch_n.end());
    bnp.insert(bnp.end(), o.batch_np.begin(), o.batch_np.end());
  }
  // Jitter may push a click slightly past the start of the next trajectory.
  for (auto& s : res.streams)
    std::stable_sort(s.begin(), s.end(), [](const ClickRecord& a, const ClickRecord& b) { return a.t_ps < b.t_ps; });

  auto mean_se = [](const std::vector<double>& x, double& mean, double& se) {
    const auto n = static_cast<double>(x.size());
    mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    se = x.size() > 1 ? std::sqrt(var / (n - 1.0) / n) : std::numeric_limits<double>::infinity();
  };
  mean_se(bn, res.mean_n, res.se_n);
  mean_se(bnp, res.mean_np, res.se_np);
  return res;
}

/// S/N from signal and noise count rates. Zero noise gives +inf.
inline double snr_from_rates(double signal_rate, double noise_rate) {
  if (!(noise_rate > 0.0)) return std::numeric_limits<double>::infinity();
  return signal_rate / noise_rate;
}

/// S/N of a recorded pair of streams, taking the noise to be the known dark
/// and stray rates of both detectors and the signal to be everything else.
inline double estimate_snr(const ClickStreams& s, double duration_us, const DetectionParams& d) {
  if (!(duration_us > 0.0)) throw CorrelationError(CorrelationError::Kind::ZeroDuration, "estimate_snr: zero duration");
  const double total = static_cast<double>(s[0].size() + s[1].size()) / (duration_us * 1e-6);
  const double noise = 2.0 * d.noise_rate();
  return snr_from_rates(std::max(0.0, total - noise), noise);
}

}  // namespace ionlaser
