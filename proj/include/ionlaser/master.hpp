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

// Rotating-frame master equation of the ion-cavity system.
//
// Frame: P1/2 rotates with the drive laser (w1), D3/2 with w1 - w2 and both
// cavity modes with the recycle laser (w2). With that choice every coupling is
// time independent and the diagonal reads
//
//   H0 = -D1 * P_P - (D1 - D2) * P_D + (Dc - D2) * (n_h + n_v) + Zeeman,
//
// with D1, D2 the laser detunings and Dc the cavity detuning from the P-D line.
// Laser phase noise enters through the frame: laser 1 phase sits on P and D,
// laser 2 phase on (n - P_D), so the dephasing generators are
// G1 = P_P + P_D and G2 = n_h + n_v - P_D, each at rate 2*delta.
//
// Vectorization is column-major: vec(A X B) = (B^T (x) A) vec(X).

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/SparseLU>
#include <unsupported/Eigen/IterativeSolvers>

#include "ionlaser/correlation.hpp"
#include "ionlaser/core.hpp"
#include "ionlaser/linalg.hpp"
#include "ionlaser/model.hpp"
#include "ionlaser/params.hpp"

namespace ionlaser {

class DensityMatrix {
 public:
  DensityMatrix() = default;
  explicit DensityMatrix(DenseMatrix m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols()) throw DimensionMismatch("density matrix must be square");
  }

  static DensityMatrix pure(const Vector& psi) { return DensityMatrix(psi * psi.adjoint()); }

  /// |index><index| in a space of dimension `dim`.
  static DensityMatrix basis_state(Eigen::Index dim, Eigen::Index index) {
    DenseMatrix m = DenseMatrix::Zero(dim, dim);
    m(index, index) = 1.0;
    return DensityMatrix(std::move(m));
  }

  const DenseMatrix& matrix() const { return m_; }
  Eigen::Index dim() const { return m_.rows(); }
  Complex trace() const { return m_.trace(); }

  double hermiticity_error() const { return (m_ - m_.adjoint()).cwiseAbs().maxCoeff(); }

  double min_eigenvalue() const {
    const DenseMatrix h = 0.5 * (m_ + m_.adjoint());
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

  /// Re Tr[op rho].
  double expectation(const Operator& op) const {
    if (op.rows() != dim()) throw DimensionMismatch("expectation: operator/state dimension mismatch");
    Complex acc = 0.0;
    for (Eigen::Index k = 0; k < op.outerSize(); ++k)
      for (Operator::InnerIterator it(op, k); it; ++it) acc += it.value() * m_(it.col(), it.row());
    return acc.real();
  }

  void validate(double hermiticity_tol = 1e-10, double trace_tol = 1e-8, double positivity_tol = 1e-8) const {
    if (hermiticity_error() > hermiticity_tol) throw Error("density matrix is not Hermitian");
    if (std::abs(trace() - Complex(1.0)) > trace_tol) throw Error("density matrix trace differs from 1");
    if (min_eigenvalue() < -positivity_tol) throw Error("density matrix has a negative eigenvalue");
  }

 private:
  DenseMatrix m_;
};

/// Trace distance numerator: sum of |eigenvalues| of the Hermitian part of a - b.
inline double trace_norm_difference(const DenseMatrix& a, const DenseMatrix& b) {
  const DenseMatrix d = a - b;
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(0.5 * (d + d.adjoint()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().sum();
}

/// Linear map on column-major vectorized D x D matrices.
class Superoperator {
 public:
  Superoperator() = default;
  Superoperator(Operator matrix, Eigen::Index hilbert_dim) : matrix_(std::move(matrix)), hilbert_dim_(hilbert_dim) {
    if (matrix_.rows() != hilbert_dim * hilbert_dim || matrix_.cols() != matrix_.rows())
      throw DimensionMismatch("superoperator size is not D^2 x D^2");
  }

  const Operator& matrix() const { return matrix_; }
  Eigen::Index hilbert_dim() const { return hilbert_dim_; }
  Eigen::Index dim() const { return matrix_.rows(); }

  DenseMatrix apply(const DenseMatrix& rho) const {
    if (rho.rows() != hilbert_dim_ || rho.cols() != hilbert_dim_) throw DimensionMismatch("apply: wrong state size");
    const Eigen::Map<const Vector> v(rho.data(), rho.size());
    const Vector out = matrix_ * v;
    return Eigen::Map<const DenseMatrix>(out.data(), hilbert_dim_, hilbert_dim_);
  }

  /// Infinity norm (max absolute row sum); used as the scale for residuals.
  double norm_inf() const {
    Eigen::VectorXd rows = Eigen::VectorXd::Zero(dim());
    for (Eigen::Index k = 0; k < matrix_.outerSize(); ++k)
      for (Operator::InnerIterator it(matrix_, k); it; ++it) rows(it.row()) += std::abs(it.value());
    return rows.size() ? rows.maxCoeff() : 0.0;
  }

 private:
  Operator matrix_;
  Eigen::Index hilbert_dim_ = 0;
};

/// The eight-level ion with two cavity modes for these parameters.
inline Space ion_space(const SystemParams& p) { return Space(build_atom(p.b_gauss), p.cavity.modes, 2); }

inline Operator build_hamiltonian(const Space& space, const SystemParams& p) {
  space.require_registered();
  const auto& atom = space.atom();
  const auto na = space.atom_dim();

  std::vector<Eigen::Triplet<Complex>> diag;
  for (std::size_t i = 0; i < atom.size(); ++i) {
    const auto& lvl = atom.levels[i];
    double e = mhz(lvl.zeeman_shift_mhz);
    if (lvl.term == Term::P12) e += -p.drive.detuning;
    if (lvl.term == Term::D32) e += -(p.drive.detuning - p.recycle.detuning);
    if (e != 0.0) diag.emplace_back(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i), e);
  }
  Operator h_atom(na, na);
  h_atom.setFromTriplets(diag.begin(), diag.end());

  const Operator sp = atomic_lowering(atom, Branch::SP, p.geometry.drive);
  const Operator dp = atomic_lowering(atom, Branch::DP, p.geometry.recycle);
  h_atom += Operator(0.5 * p.drive.rabi * (sp + Operator(sp.adjoint())));
  h_atom += Operator(0.5 * p.recycle.rabi * (dp + Operator(dp.adjoint())));

  Operator h = lift_atom(space, h_atom);
  h += Operator((p.cavity.detuning - p.recycle.detuning) * photon_number_operator(space));

  auto jaynes_cummings = [&](Mode mode, const Polarization& pol) {
    const Operator raise = Operator(lowering_operator(space, Branch::DP, pol).adjoint());
    const Operator a = mode_operator(space, mode, Ladder::Annihilate);
    const Operator term = p.cavity.coupling * Operator(a * raise);
    return Operator(term + Operator(term.adjoint()));
  };
  h += jaynes_cummings(Mode::H, p.geometry.mode_h);
  if (space.num_modes() == 2) h += jaynes_cummings(Mode::V, p.geometry.mode_v);
  h.prune(Complex(0.0));
  h.makeCompressed();
  return h;
}

enum class CollapseKind { DecayS, DecayD, CavityH, CavityV, DephasingDrive, DephasingRecycle };

struct CollapseChannel {
  Operator op;
  CollapseKind kind;
};

/// Collapse set: spontaneous decay per polarization class into S1/2 and D3/2,
/// cavity loss per mode, and laser dephasing (omitted when the linewidth is 0).
/// Operators that vanish identically are dropped.
inline std::vector<CollapseChannel> build_collapse_channels(const Space& space, const SystemParams& p) {
  space.require_registered();
  std::vector<CollapseChannel> out;
  auto push = [&](Operator op, CollapseKind kind) {
    op.prune(Complex(0.0));
    if (op.nonZeros() > 0) {
      op.makeCompressed();
      out.push_back({std::move(op), kind});
    }
  };
  for (int q : {-1, 0, 1}) {
    Polarization pol;
    (q < 0 ? pol.sigma_minus : (q == 0 ? pol.pi : pol.sigma_plus)) = 1.0;
    push(std::sqrt(2.0 * p.decay.gamma1) * lowering_operator(space, Branch::SP, pol), CollapseKind::DecayS);
    push(std::sqrt(2.0 * p.decay.gamma2) * lowering_operator(space, Branch::DP, pol), CollapseKind::DecayD);
  }
  push(std::sqrt(2.0 * p.cavity.decay) * mode_operator(space, Mode::H, Ladder::Annihilate), CollapseKind::CavityH);
  if (space.num_modes() == 2)
    push(std::sqrt(2.0 * p.cavity.decay) * mode_operator(space, Mode::V, Ladder::Annihilate), CollapseKind::CavityV);

  const Operator pp = term_projector(space, Term::P12);
  const Operator pd = term_projector(space, Term::D32);
  if (p.drive.linewidth > 0.0) push(std::sqrt(2.0 * p.drive.linewidth) * Operator(pp + pd), CollapseKind::DephasingDrive);
  if (p.recycle.linewidth > 0.0)
    push(std::sqrt(2.0 * p.recycle.linewidth) * Operator(photon_number_operator(space) - pd),
         CollapseKind::DephasingRecycle);
  return out;
}

inline std::vector<Operator> build_collapse_ops(const Space& space, const SystemParams& p) {
  std::vector<Operator> out;
  for (auto& c : build_collapse_channels(space, p)) out.push_back(std::move(c.op));
  return out;
}

/// L[rho] = -i[H, rho] + sum_k (C rho C^+ - 1/2 {C^+ C, rho}).
inline Superoperator liouvillian(const Operator& h, const std::vector<Operator>& collapses) {
  if (h.rows() != h.cols()) throw DimensionMismatch("liouvillian: H not square");
  const Eigen::Index d = h.rows();
  Operator k = h;  // K = H - i/2 sum C^+C
  for (const auto& c : collapses) {
    if (c.rows() != d || c.cols() != d) throw DimensionMismatch("liouvillian: collapse operator size");
    k -= Operator(Complex(0.0, 0.5) * Operator(Operator(c.adjoint()) * c));
  }
  const Operator id = identity(d);
  Operator l = Complex(0.0, -1.0) * kron(id, k);
  l += Complex(0.0, 1.0) * kron(Operator(k.conjugate()), id);
  for (const auto& c : collapses) l += kron(Operator(c.conjugate()), c);
  l.prune(Complex(0.0));
  l.makeCompressed();
  return Superoperator(std::move(l), d);
}

/// All pieces of one parameter point, built against a single Space.
struct Model {
  SystemParams params;
  Space space;
  Operator hamiltonian;
  std::vector<Operator> collapses;
  Superoperator liouvillian;
};

inline Model build_model(const SystemParams& p) {
  p.validate();
  Model m{p, ion_space(p), {}, {}, {}};
  m.hamiltonian = build_hamiltonian(m.space, p);
  m.collapses = build_collapse_ops(m.space, p);
  m.liouvillian = ionlaser::liouvillian(m.hamiltonian, m.collapses);
  return m;
}

// ---------------------------------------------------------------------------
// Steady state

enum class SteadyStateMethod { Auto, SparseLU, Iterative };

struct SteadyStateOptions {
  SteadyStateMethod method = SteadyStateMethod::Auto;
  double residual_tol = 1e-9;     // relative to ||L||_inf
  double degeneracy_tol = 1e-6;   // trace-norm distance between the two regularized solves
  double hermiticity_tol = 1e-8;  // on the raw solution, before symmetrization
  double positivity_tol = 1e-8;
  int max_iterations = 5000;      // iterative path
  double iterative_tol = 1e-13;
  Eigen::Index lu_max_dim = 200000;  // Auto switches to the iterative path above this
};

namespace detail {

inline Eigen::Index diag_index(Eigen::Index d, Eigen::Index i) { return i * d + i; }

// L with row `row` replaced by the trace functional.
inline Operator trace_regularized(const Superoperator& l, Eigen::Index row) {
  const Eigen::Index d = l.hilbert_dim();
  const Operator& m = l.matrix();
  std::vector<Eigen::Triplet<Complex>> t;
  t.reserve(static_cast<std::size_t>(m.nonZeros() + d));
  for (Eigen::Index k = 0; k < m.outerSize(); ++k)
    for (Operator::InnerIterator it(m, k); it; ++it)
      if (it.row() != row) t.emplace_back(it.row(), it.col(), it.value());
  for (Eigen::Index i = 0; i < d; ++i) t.emplace_back(row, diag_index(d, i), 1.0);
  Operator out(m.rows(), m.cols());
  out.setFromTriplets(t.begin(), t.end());
  out.makeCompressed();
  return out;
}

inline Vector dense_row(const Operator& m, Eigen::Index row) {
  Vector r = Vector::Zero(m.cols());
  for (Eigen::Index k = 0; k < m.outerSize(); ++k)
    for (Operator::InnerIterator it(m, k); it; ++it)
      if (it.row() == row) r(it.col()) += it.value();
  return r;
}

inline DensityMatrix finalize_steady_state(const Superoperator& l, const Vector& x, const SteadyStateOptions& opt) {
  const Eigen::Index d = l.hilbert_dim();
  if (!x.allFinite()) throw DegenerateSteadyState("steady state: non-finite solution (singular Liouvillian)");
  DenseMatrix rho = Eigen::Map<const DenseMatrix>(x.data(), d, d);
  const Complex tr = rho.trace();
  if (std::abs(tr) == 0.0) throw DegenerateSteadyState("steady state: zero-trace solution");
  rho /= tr;

  const double residual = (l.matrix() * Eigen::Map<const Vector>(rho.data(), rho.size())).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, l.norm_inf());
  if (residual > opt.residual_tol * scale)
    throw NonConvergence("steady state: residual " + std::to_string(residual) + " above tolerance");

  const double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  if (herm > opt.hermiticity_tol) throw NonConvergence("steady state: solution is not Hermitian");
  rho = 0.5 * (rho + rho.adjoint()).eval();
  rho /= rho.trace().real();
  DensityMatrix out(std::move(rho));
  if (out.min_eigenvalue() < -opt.positivity_tol) throw NonConvergence("steady state: negative eigenvalue");
  return out;
}

inline DensityMatrix steady_state_lu(const Superoperator& l, const SteadyStateOptions& opt) {
  const Eigen::Index d = l.hilbert_dim();
  const Eigen::Index n = l.dim();
  const Eigen::Index r1 = diag_index(d, 0);
  const Eigen::Index r2 = diag_index(d, d / 2);

  const Operator m1 = trace_regularized(l, r1);
  SparseLuSolver lu;
  if (!lu.compute(m1))
    throw DegenerateSteadyState("steady state: regularized Liouvillian is singular (null space dimension > 1)");

  Vector e1 = Vector::Zero(n);
  e1(r1) = 1.0;
  const Vector x1 = lu.solve(e1);

  // Second regularization: trace functional on row r2 instead of r1. M2 is a
  // rank-2 update of M1, solved with Woodbury on the existing factorization.
  if (d > 1) {
    const Vector trace_row = [&] {
      Vector t = Vector::Zero(n);
      for (Eigen::Index i = 0; i < d; ++i) t(diag_index(d, i)) = 1.0;
      return t;
    }();
    Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(n, 2);
    u(r1, 0) = 1.0;
    u(r2, 1) = 1.0;
    Eigen::MatrixXcd v(n, 2);
    v.col(0) = dense_row(l.matrix(), r1) - trace_row;
    v.col(1) = trace_row - dense_row(l.matrix(), r2);
    const Eigen::MatrixXcd z = lu.solve(u);  // M1^-1 U
    const Vector y = z.col(1);               // M1^-1 e_r2
    Eigen::Matrix2cd cap = Eigen::Matrix2cd::Identity() + v.transpose() * z;
    if (std::abs(cap.determinant()) < 1e-12 * std::max(1.0, cap.cwiseAbs().maxCoeff()))
      throw DegenerateSteadyState("steady state: second regularization is singular");
    const Vector x2 = y - z * cap.inverse() * (v.transpose() * y);

    auto as_rho = [d](const Vector& x) {
      DenseMatrix m = Eigen::Map<const DenseMatrix>(x.data(), d, d);
      return DenseMatrix(m / m.trace());
    };
    if (!x1.allFinite() || !x2.allFinite() || trace_norm_difference(as_rho(x1), as_rho(x2)) > opt.degeneracy_tol)
      throw DegenerateSteadyState("steady state: regularized solutions disagree (null space dimension > 1)");
  }
  return finalize_steady_state(l, x1, opt);
}

inline DensityMatrix steady_state_iterative(const Superoperator& l, const SteadyStateOptions& opt) {
  const Eigen::Index d = l.hilbert_dim();
  const Eigen::Index r = diag_index(d, 0);
  const Operator m = trace_regularized(l, r);
  Eigen::GMRES<Operator, Eigen::IncompleteLUT<Complex>> solver;
  solver.preconditioner().setDroptol(1e-6);
  solver.preconditioner().setFillfactor(20);
  solver.set_restart(200);
  solver.setMaxIterations(opt.max_iterations);
  solver.setTolerance(opt.iterative_tol);
  solver.compute(m);
  if (solver.info() != Eigen::Success) throw NonConvergence("steady state: preconditioner setup failed");
  Vector b = Vector::Zero(l.dim());
  b(r) = 1.0;
  const Vector x = solver.solve(b);
  if (solver.info() != Eigen::Success) throw NonConvergence("steady state: GMRES did not converge");
  return finalize_steady_state(l, x, opt);
}

}  // namespace detail

/// Unique stationary state of L. The primary path is sparse LU on L with one
/// row replaced by the trace constraint; a second row choice is solved from the
/// same factorization and must agree, otherwise DegenerateSteadyState.
inline DensityMatrix steady_state(const Superoperator& l, const SteadyStateOptions& opt = {}) {
  switch (opt.method) {
    case SteadyStateMethod::SparseLU: return detail::steady_state_lu(l, opt);
    case SteadyStateMethod::Iterative: return detail::steady_state_iterative(l, opt);
    case SteadyStateMethod::Auto: break;
  }
  if (l.dim() <= opt.lu_max_dim) return detail::steady_state_lu(l, opt);
  return detail::steady_state_iterative(l, opt);
}

// ---------------------------------------------------------------------------
// Time evolution

enum class Integrator {
  DormandPrince,  // adaptive explicit 5(4)
  TrBdf2,         // L-stable implicit, fixed step, one factorization per step size
};

struct EvolveOptions {
  Integrator integrator = Integrator::DormandPrince;
  double stiff_step = 0.05;  // us, upper bound on the TR-BDF2 step
  double rtol = 1e-8;
  double atol = 1e-10;
  double initial_step = 1e-4;  // us
  double min_step = 1e-9;      // us; below this StepUnderflow
  double max_step = 1.0;       // us
  double max_trace_drift = 1e-7;
};

namespace detail {

inline Complex vec_trace(const Vector& v, Eigen::Index d) {
  Complex t = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) t += v(diag_index(d, i));
  return t;
}

// TR-BDF2 with gamma = 2 - sqrt2: both stages solve with I - (1 - 1/sqrt2) h L.
inline std::vector<DensityMatrix> evolve_trbdf2(const DensityMatrix& rho0, const Superoperator& l,
                                                std::span<const double> t_grid, const EvolveOptions& opt) {
  const Eigen::Index d = l.hilbert_dim();
  const double diag = 1.0 - 1.0 / std::sqrt(2.0);
  const double g = 2.0 - std::sqrt(2.0);
  const double c_mid = 1.0 / (g * (2.0 - g));
  const double c_old = (1.0 - g) * (1.0 - g) / (g * (2.0 - g));

  const Operator& lm = l.matrix();
  const Operator id = identity(l.dim());
  double cached_h = -1.0;
  SparseLuSolver lu;

  Vector y = Eigen::Map<const Vector>(rho0.matrix().data(), rho0.matrix().size());
  std::vector<DensityMatrix> out;
  out.reserve(t_grid.size());
  double t = 0.0;
  for (double target : t_grid) {
    const double span = target - t;
    if (span > 0.0) {
      const auto steps = static_cast<long>(std::ceil(span / opt.stiff_step - 1e-9));
      const double h = span / static_cast<double>(steps);
      if (h < opt.min_step) throw StepUnderflow("evolve: required step below minimum");
      if (std::abs(h - cached_h) > 1e-12 * h) {
        const Operator a = id - Operator((diag * h) * lm);
        if (!lu.compute(a)) throw NonConvergence("evolve: implicit stage matrix is singular");
        cached_h = h;
      }
      for (long s = 0; s < steps; ++s) {
        const Vector mid = lu.solve(Vector(y + (diag * h) * (lm * y)));
        y = lu.solve(Vector(c_mid * mid - c_old * y));
      }
      t = target;
    }
    out.emplace_back(DenseMatrix(Eigen::Map<const DenseMatrix>(y.data(), d, d)));
  }
  return out;
}

}  // namespace detail

/// Integrates d rho/dt = L[rho] and returns rho at every time in `t_grid`
/// (us, non-decreasing, measured from rho0 at t = 0). The default path is
/// adaptive Dormand-Prince 5(4) with error and trace-drift step control.
inline std::vector<DensityMatrix> evolve(const DensityMatrix& rho0, const Superoperator& l,
                                         std::span<const double> t_grid, const EvolveOptions& opt = {}) {
  const Eigen::Index d = l.hilbert_dim();
  if (rho0.dim() != d) throw DimensionMismatch("evolve: initial state size");
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (!(t_grid[i] >= 0.0)) throw ConfigurationError("evolve: times must be >= 0");
    if (i > 0 && t_grid[i] < t_grid[i - 1]) throw ConfigurationError("evolve: times must be non-decreasing");
  }
  if (opt.integrator == Integrator::TrBdf2) return detail::evolve_trbdf2(rho0, l, t_grid, opt);

  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;
  (void)c2, (void)c3, (void)c4, (void)c5;

  const Operator& lm = l.matrix();
  Vector y = Eigen::Map<const Vector>(rho0.matrix().data(), rho0.matrix().size());
  const Complex trace0 = rho0.trace();

  std::vector<DensityMatrix> out;
  out.reserve(t_grid.size());
  double t = 0.0;
  double h = opt.initial_step;
  Vector k1 = lm * y, k2, k3, k4, k5, k6, k7, ytmp, ynew;

  for (double target : t_grid) {
    while (t < target) {
      bool last = false;
      double step = h;
      if (t + step >= target) {
        step = target - t;
        last = true;
      }
      ytmp = y + step * a21 * k1;
      k2 = lm * ytmp;
      ytmp = y + step * (a31 * k1 + a32 * k2);
      k3 = lm * ytmp;
      ytmp = y + step * (a41 * k1 + a42 * k2 + a43 * k3);
      k4 = lm * ytmp;
      ytmp = y + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
      k5 = lm * ytmp;
      ytmp = y + step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
      k6 = lm * ytmp;
      ynew = y + step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      k7 = lm * ynew;
      const Vector err = step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

      double err_norm = 0.0;
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double sc = opt.atol + opt.rtol * std::max(std::abs(y(i)), std::abs(ynew(i)));
        err_norm = std::max(err_norm, std::abs(err(i)) / sc);
      }
      const bool trace_ok = std::abs(detail::vec_trace(ynew, d) - trace0) <= opt.max_trace_drift;

      if (err_norm <= 1.0 && trace_ok) {
        t = last ? target : t + step;
        y.swap(ynew);
        k1.swap(k7);
        const double fac = err_norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err_norm, -0.2), 0.2, 5.0);
        if (!last || fac < 1.0) h = std::min(opt.max_step, step * fac);
      } else {
        const double fac = trace_ok ? std::clamp(0.9 * std::pow(err_norm, -0.2), 0.1, 0.9) : 0.5;
        h = step * fac;
      }
      if (h < opt.min_step) throw StepUnderflow("evolve: required step below minimum");
    }
    out.emplace_back(DenseMatrix(Eigen::Map<const DenseMatrix>(y.data(), d, d)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Second-order correlation via the quantum regression theorem

/// Conditional state rho0 = (a_h rho a_h^+ + a_v rho a_v^+) / n_ss.
inline DensityMatrix conditional_state(const Space& space, const DensityMatrix& rho_ss, double n_ss) {
  DenseMatrix acc = DenseMatrix::Zero(rho_ss.dim(), rho_ss.dim());
  for (int m = 0; m < space.num_modes(); ++m) {
    const Operator a = mode_operator(space, m == 0 ? Mode::H : Mode::V, Ladder::Annihilate);
    const DenseMatrix left = a * rho_ss.matrix();
    acc += left * Operator(a.adjoint());
  }
  return DensityMatrix(acc / n_ss);
}

/// Stiff fixed-step settings used for regression curves by default.
inline EvolveOptions regression_evolve_options() {
  EvolveOptions o;
  o.integrator = Integrator::TrBdf2;
  return o;
}

/// g2(tau) = <n(tau)>_0 / n_ss. Negative grid points use g2(-tau) = g2(tau).
inline CorrelationSeries g2_regression(const Space& space, const DensityMatrix& rho_ss, const Superoperator& l,
                                       std::span<const double> tau_grid,
                                       const EvolveOptions& opt = regression_evolve_options()) {
  const Operator n_op = photon_number_operator(space);
  const double n_ss = rho_ss.expectation(n_op);
  if (!(n_ss > 1e-12)) throw VacuumCavity("g2 undefined: steady-state photon number is zero");
  const DensityMatrix rho0 = conditional_state(space, rho_ss, n_ss);

  std::vector<double> abs_tau(tau_grid.size());
  std::transform(tau_grid.begin(), tau_grid.end(), abs_tau.begin(), [](double x) { return std::abs(x); });
  std::vector<double> sorted = abs_tau;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  const auto states = evolve(rho0, l, sorted, opt);

  CorrelationSeries out;
  out.tau_us.assign(tau_grid.begin(), tau_grid.end());
  out.values.resize(tau_grid.size());
  for (std::size_t i = 0; i < tau_grid.size(); ++i) {
    const auto pos = std::lower_bound(sorted.begin(), sorted.end(), abs_tau[i]) - sorted.begin();
    out.values[i] = states[static_cast<std::size_t>(pos)].expectation(n_op) / n_ss;
  }
  return out;
}

}  // namespace ionlaser
