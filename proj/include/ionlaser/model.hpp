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

// Level structure of the 40Ca+ ion (S1/2, P1/2, D3/2 Zeeman manifolds), the
// dipole channels between them, and operator construction on the composite
// space atom (x) mode_h (x) mode_v.
//
// Constants used here are standard atomic data, not fit parameters:
//   Bohr magneton      mu_B = 1.399624 MHz/G
//   Lande g-factors    g(S1/2) = 2, g(P1/2) = 2/3, g(D3/2) = 4/5

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <unsupported/Eigen/KroneckerProduct>

#include "ionlaser/core.hpp"

namespace ionlaser {

inline constexpr double kBohrMagnetonMHzPerGauss = 1.399624;

enum class Term { S12, P12, D32 };

constexpr int two_j(Term t) { return t == Term::D32 ? 3 : 1; }

constexpr double lande_g(Term t) {
  switch (t) {
    case Term::S12: return 2.0;
    case Term::P12: return 2.0 / 3.0;
    case Term::D32: return 4.0 / 5.0;
  }
  return 0.0;
}

inline const char* term_name(Term t) {
  switch (t) {
    case Term::S12: return "S1/2";
    case Term::P12: return "P1/2";
    case Term::D32: return "D3/2";
  }
  return "?";
}

struct AtomicLevel {
  Term term;
  int two_m;                // 2*m, so m = -1/2 is stored as -1
  double zeeman_shift_mhz;  // cyclic MHz

  double m() const { return 0.5 * two_m; }
};

/// Linear Zeeman shift m * g_J * mu_B * B in cyclic MHz.
inline double zeeman_shift_mhz(Term term, int two_m, double b_gauss) {
  return 0.5 * two_m * lande_g(term) * kBohrMagnetonMHzPerGauss * b_gauss;
}

/// Clebsch-Gordan coefficient <j1 m1; j2 m2 | J M> via the Racah formula.
/// All arguments are doubled so half-integers stay exact.
inline double clebsch_gordan(int tj1, int tm1, int tj2, int tm2, int tJ, int tM) {
  if (tm1 + tm2 != tM) return 0.0;
  if (std::abs(tm1) > tj1 || std::abs(tm2) > tj2 || std::abs(tM) > tJ) return 0.0;
  if (tJ < std::abs(tj1 - tj2) || tJ > tj1 + tj2) return 0.0;
  if ((tj1 + tm1) % 2 || (tj2 + tm2) % 2 || (tJ + tM) % 2 || (tj1 + tj2 + tJ) % 2) return 0.0;

  auto fact = [](int n) {
    long double r = 1.0L;
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
  };
  const int a = (tj1 + tj2 - tJ) / 2;
  const int b = (tj1 - tj2 + tJ) / 2;
  const int c = (-tj1 + tj2 + tJ) / 2;
  const int d = (tj1 + tj2 + tJ) / 2 + 1;
  long double pre = (tJ + 1) * fact(a) * fact(b) * fact(c) / fact(d);
  pre *= fact((tJ + tM) / 2) * fact((tJ - tM) / 2) * fact((tj1 - tm1) / 2) *
         fact((tj1 + tm1) / 2) * fact((tj2 - tm2) / 2) * fact((tj2 + tm2) / 2);

  long double sum = 0.0L;
  for (int k = 0; k <= a; ++k) {
    const int e1 = (tj1 - tm1) / 2 - k;
    const int e2 = (tj2 + tm2) / 2 - k;
    const int e3 = (tJ - tj2 + tm1) / 2 + k;
    const int e4 = (tJ - tj1 - tm2) / 2 + k;
    if (e1 < 0 || e2 < 0 || e3 < 0 || e4 < 0) continue;
    const long double term = 1.0L / (fact(k) * fact(a - k) * fact(e1) * fact(e2) * fact(e3) * fact(e4));
    sum += (k % 2 ? -term : term);
  }
  return static_cast<double>(std::sqrt(pre) * sum);
}

/// Fine-structure branch of a dipole channel: the lower level is in S1/2 or D3/2,
/// the upper level is always in P1/2.
enum class Branch { SP, DP };

struct TransitionChannel {
  std::size_t lower;  // index into Atom::levels
  std::size_t upper;
  int delta_m;        // m(upper) - m(lower)
  double cg_amplitude;
  Branch branch;
};

struct Atom {
  std::vector<AtomicLevel> levels;
  std::vector<TransitionChannel> channels;

  std::size_t size() const { return levels.size(); }

  std::optional<std::size_t> find(Term term, int two_m) const {
    for (std::size_t i = 0; i < levels.size(); ++i)
      if (levels[i].term == term && levels[i].two_m == two_m) return i;
    return std::nullopt;
  }

  std::size_t index(Term term, int two_m) const {
    if (auto i = find(term, two_m)) return *i;
    throw ConfigurationError(std::string("no level ") + term_name(term) + " 2m=" + std::to_string(two_m));
  }
};

namespace detail {

inline Branch branch_of(Term lower) { return lower == Term::S12 ? Branch::SP : Branch::DP; }

// Adds every |dm| <= 1 channel from `lower_term` levels into each P1/2 level,
// with squared amplitudes normalized to one per upper level and branch.
inline void add_channels(Atom& atom, Term lower_term) {
  for (std::size_t u = 0; u < atom.levels.size(); ++u) {
    const auto& up = atom.levels[u];
    if (up.term != Term::P12) continue;
    std::vector<TransitionChannel> found;
    double norm2 = 0.0;
    for (std::size_t l = 0; l < atom.levels.size(); ++l) {
      const auto& lo = atom.levels[l];
      if (lo.term != lower_term) continue;
      const int two_q = up.two_m - lo.two_m;
      if (std::abs(two_q) > 2) continue;
      const double cg = clebsch_gordan(two_j(lo.term), lo.two_m, 2, two_q, two_j(up.term), up.two_m);
      if (cg == 0.0) continue;
      found.push_back({l, u, two_q / 2, cg, branch_of(lower_term)});
      norm2 += cg * cg;
    }
    for (auto& ch : found) {
      ch.cg_amplitude /= std::sqrt(norm2);
      atom.channels.push_back(ch);
    }
  }
}

}  // namespace detail

/// The eight S1/2, P1/2, D3/2 sublevels with Zeeman shifts for field `b_gauss`,
/// plus the 4 S<->P and 6 P<->D dipole channels.
inline Atom build_atom(double b_gauss) {
  if (!(b_gauss >= 0.0)) throw ConfigurationError("magnetic field must be >= 0");
  Atom atom;
  auto add = [&](Term t, std::initializer_list<int> two_ms) {
    for (int tm : two_ms) atom.levels.push_back({t, tm, zeeman_shift_mhz(t, tm, b_gauss)});
  };
  add(Term::S12, {-1, 1});
  add(Term::P12, {-1, 1});
  add(Term::D32, {-3, -1, 1, 3});
  detail::add_channels(atom, Term::S12);
  detail::add_channels(atom, Term::D32);
  return atom;
}

/// Reduced Lambda system: one S, one P and one D sublevel (all m = +1/2),
/// joined by pi channels of unit amplitude. Used for small-instance checks.
inline Atom build_lambda_atom(double b_gauss = 0.0) {
  Atom atom;
  for (Term t : {Term::S12, Term::P12, Term::D32})
    atom.levels.push_back({t, 1, zeeman_shift_mhz(t, 1, b_gauss)});
  atom.channels.push_back({0, 1, 0, 1.0, Branch::SP});
  atom.channels.push_back({2, 1, 0, 1.0, Branch::DP});
  return atom;
}

/// Spherical components of a field polarization. A channel with delta_m = q
/// is driven with weight `component(q)`.
struct Polarization {
  double sigma_minus = 0.0;  // q = -1
  double pi = 0.0;           // q =  0
  double sigma_plus = 0.0;   // q = +1

  double component(int q) const { return q < 0 ? sigma_minus : (q == 0 ? pi : sigma_plus); }

  static Polarization Pi() { return {0.0, 1.0, 0.0}; }
  static Polarization SigmaPlus() { return {0.0, 0.0, 1.0}; }
  static Polarization SigmaMinus() { return {1.0, 0.0, 0.0}; }
  /// Linear polarization orthogonal to the quantization axis, (sigma+ - sigma-)/sqrt2.
  /// `sign` flips the relative phase; observables do not depend on it.
  static Polarization Perpendicular(double sign = 1.0) {
    const double s = 1.0 / std::sqrt(2.0);
    return {-sign * s, 0.0, sign * s};
  }
};

enum class Mode { H, V };
enum class Ladder { Annihilate, Create, Number };

/// Truncated Fock space of one cavity mode.
struct ModeConfig {
  int fock_cutoff = 4;  // number of retained Fock states, n = 0..cutoff-1
};

/// Composite space atom (x) mode_h [(x) mode_v]. Every operator of one model is
/// built against the same Space so basis ordering cannot drift between modules.
class Space {
 public:
  Space() = default;
  Space(Atom atom, ModeConfig modes, int num_modes = 2)
      : atom_(std::move(atom)), modes_(modes), num_modes_(num_modes) {
    if (modes_.fock_cutoff < 1) throw ConfigurationError("Fock cutoff must be >= 1");
    if (num_modes_ != 1 && num_modes_ != 2) throw ConfigurationError("one or two cavity modes supported");
    if (atom_.size() == 0) throw ConfigurationError("atom has no levels");
  }

  bool registered() const { return atom_.size() > 0; }
  const Atom& atom() const { return atom_; }
  int fock() const { return modes_.fock_cutoff; }
  int num_modes() const { return num_modes_; }
  Eigen::Index atom_dim() const { return static_cast<Eigen::Index>(atom_.size()); }
  Eigen::Index mode_dim() const { return num_modes_ == 2 ? fock() * fock() : fock(); }
  Eigen::Index dim() const { return atom_dim() * mode_dim(); }

  /// Basis index of |level; n_h, n_v>.
  Eigen::Index index(std::size_t level, int n_h, int n_v = 0) const {
    return (static_cast<Eigen::Index>(level) * fock() + n_h) * (num_modes_ == 2 ? fock() : 1) + n_v;
  }

  void require_registered() const {
    if (!registered()) throw ConfigurationError("operator requested on an unregistered space");
  }

 private:
  Atom atom_;
  ModeConfig modes_;
  int num_modes_ = 2;
};

inline Operator identity(Eigen::Index n) {
  Operator id(n, n);
  id.setIdentity();
  return id;
}

/// Kronecker product a (x) b.
inline Operator kron(const Operator& a, const Operator& b) {
  Operator out = Eigen::kroneckerProduct(a, b).eval();
  out.makeCompressed();
  return out;
}

/// Kronecker product in the fixed factor order atom, mode_h, mode_v.
inline Operator tensor(const Space& space, const Operator& atom_op, const Operator& h_op,
                       const Operator& v_op) {
  space.require_registered();
  if (space.num_modes() != 2) throw DimensionMismatch("tensor: space has a single mode");
  if (atom_op.rows() != space.atom_dim() || atom_op.cols() != space.atom_dim() ||
      h_op.rows() != space.fock() || h_op.cols() != space.fock() || v_op.rows() != space.fock() ||
      v_op.cols() != space.fock())
    throw DimensionMismatch("tensor: factor dimensions do not match the registered space");
  return kron(kron(atom_op, h_op), v_op);
}

/// Lifts an atomic operator (or an atom (x) mode operator) into the full space.
inline Operator lift_atom(const Space& space, const Operator& atom_op) {
  space.require_registered();
  if (atom_op.rows() != space.atom_dim() || atom_op.cols() != space.atom_dim())
    throw DimensionMismatch("lift_atom: operator is not atom-sized");
  return kron(atom_op, identity(space.mode_dim()));
}

namespace detail {

inline Operator ladder(int cutoff, Ladder kind) {
  Operator a(cutoff, cutoff);
  std::vector<Eigen::Triplet<Complex>> t;
  for (int n = 1; n < cutoff; ++n) t.emplace_back(n - 1, n, std::sqrt(static_cast<double>(n)));
  a.setFromTriplets(t.begin(), t.end());
  switch (kind) {
    case Ladder::Annihilate: return a;
    case Ladder::Create: return Operator(a.adjoint());
    case Ladder::Number: return Operator(Operator(a.adjoint()) * a);
  }
  return a;
}

}  // namespace detail

/// Truncated ladder operator of mode `which` in the composite space.
/// Create on the top Fock state gives zero; Number is exactly Create * Annihilate.
inline Operator mode_operator(const Space& space, Mode which, Ladder kind) {
  space.require_registered();
  const Operator single = detail::ladder(space.fock(), kind);
  const Operator id_atom = identity(space.atom_dim());
  if (space.num_modes() == 1) {
    if (which == Mode::V) throw ConfigurationError("space has no V mode");
    return kron(id_atom, single);
  }
  const Operator id_mode = identity(space.fock());
  return which == Mode::H ? tensor(space, id_atom, single, id_mode) : tensor(space, id_atom, id_mode, single);
}

/// Total photon number n_h + n_v.
inline Operator photon_number_operator(const Space& space) {
  Operator n = mode_operator(space, Mode::H, Ladder::Number);
  if (space.num_modes() == 2) n += mode_operator(space, Mode::V, Ladder::Number);
  return n;
}

/// Atomic lowering operator sum_ch e_q * cg * |lower><upper| over the channels
/// of `branch`, atom-sized.
inline Operator atomic_lowering(const Atom& atom, Branch branch, const Polarization& pol) {
  const auto n = static_cast<Eigen::Index>(atom.size());
  std::vector<Eigen::Triplet<Complex>> t;
  for (const auto& ch : atom.channels) {
    if (ch.branch != branch) continue;
    const double w = pol.component(ch.delta_m);
    if (w != 0.0)
      t.emplace_back(static_cast<Eigen::Index>(ch.lower), static_cast<Eigen::Index>(ch.upper), w * ch.cg_amplitude);
  }
  Operator op(n, n);
  op.setFromTriplets(t.begin(), t.end());
  op.prune(Complex(0.0));
  return op;
}

inline Operator lowering_operator(const Space& space, Branch branch, const Polarization& pol) {
  space.require_registered();
  return lift_atom(space, atomic_lowering(space.atom(), branch, pol));
}

/// Projector onto all sublevels of `term`, lifted to the composite space.
inline Operator term_projector(const Space& space, Term term) {
  space.require_registered();
  const auto& levels = space.atom().levels;
  Operator p(space.atom_dim(), space.atom_dim());
  std::vector<Eigen::Triplet<Complex>> t;
  for (std::size_t i = 0; i < levels.size(); ++i)
    if (levels[i].term == term) t.emplace_back(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i), 1.0);
  p.setFromTriplets(t.begin(), t.end());
  return lift_atom(space, p);
}

}  // namespace ionlaser
