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

// Locking the drive laser onto a selected cavity-assisted Raman line.
//
// Each pair (S1/2 m_s, D3/2 m_d) gives its own Raman resonance, separated by
// Zeeman and light shifts and only ~0.2 MHz wide. The experiment keeps the
// cavity fixed and tunes the drive detuning onto one line at low recycling
// power; raman_lock() does the same on the model: a dressed-state estimate of
// the line position followed by maximizing n_ss at a reference Omega2.

#include <cmath>
#include <cstdint>

#include <boost/math/tools/minima.hpp>

#include "ionlaser/core.hpp"
#include "ionlaser/master.hpp"
#include "ionlaser/observables.hpp"

namespace ionlaser {

struct RamanLine {
  int s_two_m = -1;  // S1/2 sublevel, 2m
  int d_two_m = -3;  // D3/2 sublevel, 2m
};

struct LockOptions {
  RamanLine line;
  double reference_recycle_rabi = mhz(2.0);
  int fock_cutoff = 3;          // cutoff used during the search
  double search_window = mhz(0.3);
  int bits = 20;                // Brent precision in bits of the window
  std::uintmax_t max_evaluations = 40;
};

namespace detail {

// Atom-only rotating-frame Hamiltonian (no cavity), dense.
inline DenseMatrix atom_hamiltonian(const SystemParams& p) {
  SystemParams q = p;
  q.cavity.modes.fock_cutoff = 1;
  q.cavity.coupling = 0.0;
  const Space s(build_atom(q.b_gauss), q.cavity.modes, 1);
  return DenseMatrix(build_hamiltonian(s, q));
}

}  // namespace detail

/// Raman detuning mismatch E(S-like) - E(D-like) - (Delta_c - Delta_2) of the
/// dressed atomic states that overlap most with the bare levels of `line`.
/// Zero means |S, 0 photons> and |D, 1 photon> are degenerate.
inline double raman_mismatch(const SystemParams& p, const RamanLine& line) {
  const Atom atom = build_atom(p.b_gauss);
  const auto is = static_cast<Eigen::Index>(atom.index(Term::S12, line.s_two_m));
  const auto id = static_cast<Eigen::Index>(atom.index(Term::D32, line.d_two_m));
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(detail::atom_hamiltonian(p));
  Eigen::Index ks = 0, kd = 0;
  es.eigenvectors().row(is).cwiseAbs().maxCoeff(&ks);
  es.eigenvectors().row(id).cwiseAbs().maxCoeff(&kd);
  return es.eigenvalues()(ks) - es.eigenvalues()(kd) - (p.cavity.detuning - p.recycle.detuning);
}

/// Drive detuning that puts `line` on resonance according to the dressed-state
/// estimate (Newton iteration; the mismatch has slope ~1 in Delta_1).
inline double estimate_line_detuning(SystemParams p, const RamanLine& line) {
  for (int it = 0; it < 50; ++it) {
    const double f = raman_mismatch(p, line);
    const double h = 1e-4;
    SystemParams q = p;
    q.drive.detuning += h;
    const double slope = (raman_mismatch(q, line) - f) / h;
    if (!(std::abs(slope) > 1e-6)) break;
    p.drive.detuning -= f / slope;
    if (std::abs(f) < 1e-10) break;
  }
  return p.drive.detuning;
}

struct LockResult {
  SystemParams params;    // input with the drive detuning moved onto the line
  double estimate = 0.0;  // dressed-state estimate of the detuning
  double n_peak = 0.0;    // n_ss at the lock point (reference Omega2, search cutoff)
};

/// Returns `p` with drive.detuning tuned to the n_ss maximum of `opt.line`,
/// found at Omega2 = opt.reference_recycle_rabi. All other parameters,
/// including the actual recycle Rabi frequency, are left untouched.
inline LockResult raman_lock(const SystemParams& p, const LockOptions& opt = {}) {
  p.validate();
  SystemParams ref = p;
  ref.recycle.rabi = opt.reference_recycle_rabi;
  ref.cavity.modes.fock_cutoff = opt.fock_cutoff;

  LockResult out;
  out.estimate = estimate_line_detuning(ref, opt.line);
  auto negative_n = [&](double d1) {
    SystemParams q = ref;
    q.drive.detuning = d1;
    const Model m = build_model(q);
    return -photon_number(m.space, steady_state(m.liouvillian));
  };
  std::uintmax_t iters = opt.max_evaluations;
  const auto [best, value] = boost::math::tools::brent_find_minima(
      negative_n, out.estimate - opt.search_window, out.estimate + opt.search_window, opt.bits, iters);
  out.params = p;
  out.params.drive.detuning = best;
  out.n_peak = -value;
  return out;
}

}  // namespace ionlaser
