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

// Scalar observables derived from a steady state.

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "ionlaser/core.hpp"
#include "ionlaser/master.hpp"

namespace ionlaser {

/// Intra-cavity photons to detected photo-electrons, kHz per photon.
inline constexpr double kCountRateKHzPerPhoton = 32.0;
/// Detection efficiency of the 397 nm fluorescence channel.
inline constexpr double kEta397 = 0.018;

/// <n_h + n_v> = Tr[n rho].
inline double photon_number(const Space& space, const DensityMatrix& rho) {
  return rho.expectation(photon_number_operator(space));
}

/// Total P1/2 population.
inline double p_population(const Space& space, const DensityMatrix& rho) {
  return rho.expectation(term_projector(space, Term::P12));
}

/// Probability of total photon number n = n_h + n_v, for n = 0 .. 2(N_F - 1)
/// (0 .. N_F - 1 for a single-mode space).
inline std::vector<double> fock_populations(const Space& space, const DensityMatrix& rho) {
  const int nf = space.fock();
  const int modes = space.num_modes();
  std::vector<double> p(static_cast<std::size_t>(modes * (nf - 1) + 1), 0.0);
  for (std::size_t lvl = 0; lvl < space.atom().size(); ++lvl)
    for (int nh = 0; nh < nf; ++nh)
      for (int nv = 0; nv < (modes == 2 ? nf : 1); ++nv) {
        const auto i = space.index(lvl, nh, nv);
        p[static_cast<std::size_t>(nh + nv)] += rho.matrix()(i, i).real();
      }
  return p;
}

/// Per-mode photon-number distributions (diagnostics): {p_h(n), p_v(n)}.
inline std::pair<std::vector<double>, std::vector<double>> mode_populations(const Space& space,
                                                                            const DensityMatrix& rho) {
  const int nf = space.fock();
  std::vector<double> ph(static_cast<std::size_t>(nf), 0.0), pv(static_cast<std::size_t>(nf), 0.0);
  for (std::size_t lvl = 0; lvl < space.atom().size(); ++lvl)
    for (int nh = 0; nh < nf; ++nh)
      for (int nv = 0; nv < (space.num_modes() == 2 ? nf : 1); ++nv) {
        const double w = rho.matrix()(space.index(lvl, nh, nv), space.index(lvl, nh, nv)).real();
        ph[static_cast<std::size_t>(nh)] += w;
        pv[static_cast<std::size_t>(nv)] += w;
      }
  return {ph, pv};
}

/// g2(0) ~ 2 p2 / p1^2, valid when higher Fock states are negligible.
inline double g2_zero_fock_approx(double p1, double p2) {
  if (!(p1 > 0.0)) throw ZeroDenominator("g2 approximation needs p1 > 0");
  return 2.0 * p2 / (p1 * p1);
}

/// Exact zero-delay correlation <n(n-1)> / <n>^2 from the photon distribution.
inline double g2_zero_from_populations(const std::vector<double>& p) {
  double n = 0.0, nn = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    n += k * p[k];
    nn += k * (k - 1.0) * p[k];
  }
  if (!(n > 1e-12)) throw VacuumCavity("g2 undefined: photon number is zero");
  return nn / (n * n);
}

inline double mandel_q(double n_ss, double g2_0) { return n_ss * (g2_0 - 1.0); }

/// R = kappa n_ss / (gamma2 n_P): coherent cavity emission over incoherent
/// scattering into D3/2. kappa and gamma2 in the same units.
inline double r_parameter(double n_ss, double n_p, double kappa, double gamma2) {
  if (!(n_p > 0.0)) throw ZeroDenominator("R parameter needs n_P > 0");
  if (!(gamma2 > 0.0)) throw ZeroDenominator("R parameter needs gamma2 > 0");
  return kappa * n_ss / (gamma2 * n_p);
}

/// Detected count rate in kHz.
inline double count_rate(double n_ss, double khz_per_photon = kCountRateKHzPerPhoton) {
  return khz_per_photon * n_ss;
}

struct SteadyStateResult {
  DensityMatrix rho_ss;
  double n_ss = 0.0;
  double n_p = 0.0;
  std::vector<double> p;  // total photon number distribution
  double g2_0 = 0.0;
  double q = 0.0;
  double r = 0.0;

  double p1() const { return p.size() > 1 ? p[1] : 0.0; }
  double p2() const { return p.size() > 2 ? p[2] : 0.0; }
};

/// Collects every scalar observable of `rho`. g2_0, Q and R are NaN when the
/// cavity is empty or the P population vanishes.
inline SteadyStateResult analyze(const Space& space, const SystemParams& params, DensityMatrix rho) {
  SteadyStateResult r;
  r.p = fock_populations(space, rho);
  r.n_ss = photon_number(space, rho);
  r.n_p = p_population(space, rho);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  r.g2_0 = r.n_ss > 1e-12 ? g2_zero_from_populations(r.p) : nan;
  r.q = r.n_ss > 1e-12 ? mandel_q(r.n_ss, r.g2_0) : 0.0;
  r.r = r.n_p > 0.0 ? r_parameter(r.n_ss, r.n_p, params.cavity.decay, params.decay.gamma2) : nan;
  r.rho_ss = std::move(rho);
  return r;
}

/// Builds the model, solves for the steady state and analyzes it.
inline SteadyStateResult solve_steady_state(const SystemParams& params, const SteadyStateOptions& opt = {}) {
  const Model m = build_model(params);
  return analyze(m.space, params, steady_state(m.liouvillian, opt));
}

struct DressedState {
  double energy;    // rad/us, rotating frame
  double p_weight;  // total P1/2 population of the eigenvector
};

/// Eigenstates of the D3/2 + P1/2 block with only the recycle coupling,
/// detunings and Zeeman terms, sorted by ascending P1/2 admixture. States
/// with vanishing admixture are dark to the recycle laser.
inline std::vector<DressedState> dark_state_weights(const SystemParams& p) {
  const Atom atom = build_atom(p.b_gauss);
  std::vector<std::size_t> block;
  for (std::size_t i = 0; i < atom.size(); ++i)
    if (atom.levels[i].term != Term::S12) block.push_back(i);
  const auto n = static_cast<Eigen::Index>(block.size());

  const DenseMatrix dp = DenseMatrix(atomic_lowering(atom, Branch::DP, p.geometry.recycle));
  DenseMatrix h = DenseMatrix::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    const auto& lvl = atom.levels[block[static_cast<std::size_t>(a)]];
    double e = mhz(lvl.zeeman_shift_mhz);
    if (lvl.term == Term::P12) e += -p.drive.detuning;
    if (lvl.term == Term::D32) e += -(p.drive.detuning - p.recycle.detuning);
    h(a, a) = e;
    for (Eigen::Index b = 0; b < n; ++b) {
      const auto ia = static_cast<Eigen::Index>(block[static_cast<std::size_t>(a)]);
      const auto ib = static_cast<Eigen::Index>(block[static_cast<std::size_t>(b)]);
      h(a, b) += 0.5 * p.recycle.rabi * (dp(ia, ib) + std::conj(dp(ib, ia)));
    }
  }
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(h);
  std::vector<DressedState> out;
  for (Eigen::Index k = 0; k < n; ++k) {
    double w = 0.0;
    for (Eigen::Index a = 0; a < n; ++a)
      if (atom.levels[block[static_cast<std::size_t>(a)]].term == Term::P12) w += std::norm(es.eigenvectors()(a, k));
    out.push_back({es.eigenvalues()(k), w});
  }
  std::sort(out.begin(), out.end(), [](const DressedState& x, const DressedState& y) { return x.p_weight < y.p_weight; });
  return out;
}

}  // namespace ionlaser
