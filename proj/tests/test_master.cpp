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


#include <gtest/gtest.h>

#include <boost/math/tools/minima.hpp>

#include "fixtures.hpp"
#include "ionlaser/master.hpp"
#include "ionlaser/observables.hpp"
#include "oracles.hpp"

namespace ionlaser {
namespace {

Space lambda_space(const SystemParams& p) { return Space(build_lambda_atom(p.b_gauss), p.cavity.modes, 1); }

// Full eight-level atom with a small cutoff: cheap but structurally complete.
SystemParams small_full(double omega2 = 7.0) {
  SystemParams p = testing::family(95.0, -400.0, -400.0);
  p.recycle.rabi = mhz(omega2);
  p.cavity.modes.fock_cutoff = 2;
  return p;
}

double max_abs(const DenseMatrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

TEST(Hamiltonian, Hermitian) {
  const SystemParams p = testing::family(95.0, -400.0, -400.0);
  const Space s = ion_space(p);
  const DenseMatrix h = DenseMatrix(build_hamiltonian(s, testing::with_recycle(p, 7.0)));
  EXPECT_LT(max_abs(h - h.adjoint()), 1e-12);
}

TEST(Hamiltonian, DecoupledLimitIsDiagonal) {
  SystemParams p = calibrated_system();
  p.cavity.coupling = 0.0;
  p.b_gauss = 0.0;
  p.drive.detuning = mhz(-350.0);
  p.recycle.detuning = mhz(-20.0);
  p.cavity.detuning = mhz(-340.0);
  p.cavity.modes.fock_cutoff = 3;
  const Space s = ion_space(p);
  const DenseMatrix h = DenseMatrix(build_hamiltonian(s, p));
  EXPECT_EQ(max_abs(h - DenseMatrix(h.diagonal().asDiagonal())), 0.0);
  const double d1 = p.drive.detuning, d2 = p.recycle.detuning, photon = p.cavity.detuning - d2;
  for (std::size_t l = 0; l < 8; ++l) {
    const Term t = s.atom().levels[l].term;
    const double base = t == Term::S12 ? 0.0 : (t == Term::P12 ? -d1 : -(d1 - d2));
    for (int nh = 0; nh < 3; ++nh)
      for (int nv = 0; nv < 3; ++nv) {
        const auto i = s.index(l, nh, nv);
        EXPECT_NEAR(h(i, i).real(), base + photon * (nh + nv), 1e-9);
      }
  }
}

TEST(Hamiltonian, ReducedModelMatchesHandBuiltMatrix) {
  const SystemParams p = oracles::reduced_lambda_params();
  const Space s = lambda_space(p);
  const DenseMatrix h = DenseMatrix(build_hamiltonian(s, p));
  const DenseMatrix ref = oracles::lambda_hamiltonian(p);
  ASSERT_EQ(h.rows(), 6);
  EXPECT_LT(max_abs(h - ref), 1e-12);
}

TEST(Collapse, CountAndRates) {
  SystemParams p = small_full();
  p.drive.linewidth = p.recycle.linewidth = 0.0;
  const Space s = ion_space(p);
  const auto cs = build_collapse_ops(s, p);
  EXPECT_EQ(cs.size(), 8u);  // 3 + 3 polarization classes, 2 cavity modes

  Operator rate(s.dim(), s.dim());
  for (const auto& c : cs) rate += Operator(Operator(c.adjoint()) * c);
  const DenseMatrix r = DenseMatrix(rate);
  const Atom& a = s.atom();
  for (int tm : {-1, 1}) {
    // Total decay from either P sublevel: 2 gamma1 + 2 gamma2.
    const auto i = s.index(a.index(Term::P12, tm), 0, 0);
    EXPECT_NEAR(r(i, i).real(), 2.0 * p.decay.gamma(), 1e-9);
    const auto g = s.index(a.index(Term::S12, tm), 0, 0);
    EXPECT_EQ(std::abs(r(g, g)), 0.0);
  }
  const auto one = s.index(a.index(Term::S12, 1), 1, 0);
  EXPECT_NEAR(r(one, one).real(), 2.0 * p.cavity.decay, 1e-12);

  p.drive.linewidth = mhz(0.03);
  p.recycle.linewidth = mhz(0.2);
  EXPECT_EQ(build_collapse_ops(s, p).size(), 10u);
}

TEST(Liouvillian, TrivialCases) {
  const Operator h(4, 4);
  const Superoperator l = liouvillian(h, {});
  EXPECT_EQ(l.dim(), 16);
  const DenseMatrix id = DenseMatrix::Identity(4, 4) / 4.0;
  EXPECT_EQ(l.apply(id).norm(), 0.0);
  EXPECT_THROW(liouvillian(h, {identity(3)}), DimensionMismatch);

  const Model m = build_model(testing::family(95.0, -400.0, -400.0));
  EXPECT_EQ(m.liouvillian.dim(), 16384);
}

TEST(Liouvillian, MatchesLindbladMapOnRandomMatrices) {
  const SystemParams p = oracles::reduced_lambda_params();
  const Space s = lambda_space(p);
  const Superoperator l = liouvillian(build_hamiltonian(s, p), build_collapse_ops(s, p));
  std::mt19937_64 rng(11);
  for (int k = 0; k < 5; ++k) {
    DenseMatrix rho = oracles::random_hermitian(6, rng);
    rho(0, 5) += Complex(0.3, 0.1);  // also non-Hermitian input
    const DenseMatrix ref = oracles::lindblad(oracles::lambda_hamiltonian(p), oracles::lambda_collapses(p), rho);
    EXPECT_LT((l.apply(rho) - ref).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Liouvillian, PreservesTraceAndHermiticity) {
  const Model m = build_model(small_full());
  std::mt19937_64 rng(5);
  for (int k = 0; k < 20; ++k) {
    const DenseMatrix rho = oracles::random_hermitian(m.space.dim(), rng);
    const DenseMatrix lr = m.liouvillian.apply(rho);
    EXPECT_LT(std::abs(lr.trace()), 1e-10);
    EXPECT_LT((lr - lr.adjoint()).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(SteadyState, ReducedModelMatchesDenseNullSpace) {
  const SystemParams p = oracles::reduced_lambda_params();
  const Space s = lambda_space(p);
  const Superoperator l = liouvillian(build_hamiltonian(s, p), build_collapse_ops(s, p));
  const DenseMatrix ref =
      oracles::dense_null_space_state(oracles::lambda_hamiltonian(p), oracles::lambda_collapses(p));
  EXPECT_LT(max_abs(steady_state(l).matrix() - ref), 1e-10);
  SteadyStateOptions it;
  it.method = SteadyStateMethod::Iterative;
  EXPECT_LT(max_abs(steady_state(l, it).matrix() - ref), 1e-9);
}

TEST(SteadyState, ValidDensityMatrix) {
  const Model m = build_model(small_full());
  const DensityMatrix rho = steady_state(m.liouvillian);
  EXPECT_NEAR(rho.trace().real(), 1.0, 1e-12);
  EXPECT_LT(rho.hermiticity_error(), 1e-10);
  EXPECT_GE(rho.min_eigenvalue(), -1e-8);
  const DenseMatrix r = m.liouvillian.apply(rho.matrix());
  EXPECT_LT(r.cwiseAbs().maxCoeff(), 1e-9 * m.liouvillian.norm_inf());
}

TEST(SteadyState, LasersOffIsDegenerate) {
  SystemParams p = small_full();
  p.drive.rabi = p.recycle.rabi = 0.0;
  const Model m = build_model(p);
  EXPECT_THROW(steady_state(m.liouvillian), DegenerateSteadyState);
}

TEST(SteadyState, IndependentOfPerpendicularPhaseConvention) {
  SystemParams p = small_full();
  const double n1 = solve_steady_state(p).n_ss;
  p.geometry.recycle = Polarization::Perpendicular(-1.0);
  p.geometry.mode_v = Polarization::Perpendicular(-1.0);
  EXPECT_NEAR(solve_steady_state(p).n_ss, n1, 1e-10);
}

TEST(SteadyState, RamanResonanceNearDriveDetuning) {
  SystemParams p = small_full(1.0);
  p.drive.linewidth = p.recycle.linewidth = 0.0;
  auto neg_n = [&](double dc) {
    SystemParams q = p;
    q.cavity.detuning = dc;
    return -solve_steady_state(q).n_ss;
  };
  // Coarse scan for the dominant line, then refine.
  double best = p.drive.detuning, best_val = 0.0;
  for (double off = -20.0; off <= 20.0; off += 0.25) {
    const double v = neg_n(p.drive.detuning + mhz(off));
    if (v < best_val) best_val = v, best = p.drive.detuning + mhz(off);
  }
  std::uintmax_t iters = 40;
  const auto r = boost::math::tools::brent_find_minima(neg_n, best - mhz(0.25), best + mhz(0.25), 20, iters);
  EXPECT_LT(std::abs(to_mhz(r.first - p.drive.detuning)), 15.0);
}

TEST(Evolve, ZeroGeneratorIsIdentity) {
  const Superoperator l = liouvillian(Operator(3, 3), {});
  const DensityMatrix rho0 = DensityMatrix::basis_state(3, 1);
  const std::vector<double> grid = {0.0, 0.5, 3.0};
  for (const auto& r : evolve(rho0, l, grid)) EXPECT_EQ(max_abs(r.matrix() - rho0.matrix()), 0.0);
}

TEST(Evolve, SteadyStateIsFixedPoint) {
  const Model m = build_model(small_full());
  const DensityMatrix rho = steady_state(m.liouvillian);
  const std::vector<double> grid = {0.5, 2.0, 5.0};
  for (const auto integrator : {Integrator::DormandPrince, Integrator::TrBdf2}) {
    EvolveOptions opt;
    opt.integrator = integrator;
    for (const auto& r : evolve(rho, m.liouvillian, grid, opt)) EXPECT_LT(trace_norm_difference(r.matrix(), rho.matrix()), 1e-7);
  }
}

TEST(Evolve, EmptyCavityDecaysExponentially) {
  SystemParams p = calibrated_system();
  p.cavity.modes.fock_cutoff = 3;
  p.drive.linewidth = p.recycle.linewidth = 0.0;
  const Model m = build_model(p);
  const auto start = m.space.index(0, 1, 0);
  const std::vector<double> grid = {0.5, 1.0, 2.0, 4.0};
  const Operator n = photon_number_operator(m.space);
  const auto states = evolve(DensityMatrix::basis_state(m.space.dim(), start), m.liouvillian, grid);
  for (std::size_t i = 0; i < grid.size(); ++i)
    EXPECT_NEAR(states[i].expectation(n), std::exp(-2.0 * p.cavity.decay * grid[i]), 1e-6);
  EvolveOptions stiff = regression_evolve_options();
  const auto coarse = evolve(DensityMatrix::basis_state(m.space.dim(), start), m.liouvillian, grid, stiff);
  for (std::size_t i = 0; i < grid.size(); ++i)
    EXPECT_NEAR(coarse[i].expectation(n), std::exp(-2.0 * p.cavity.decay * grid[i]), 1e-4);
}

TEST(Evolve, StepUnderflowAndBadGrid) {
  const Model m = build_model(small_full());
  const DensityMatrix rho0 = DensityMatrix::basis_state(m.space.dim(), 0);
  EvolveOptions opt;
  opt.rtol = 1e-16;
  opt.atol = 1e-20;
  opt.min_step = 1e-3;
  const std::vector<double> grid = {1.0};
  EXPECT_THROW(evolve(rho0, m.liouvillian, grid, opt), StepUnderflow);
  const std::vector<double> bad = {1.0, 0.5};
  EXPECT_THROW(evolve(rho0, m.liouvillian, bad), ConfigurationError);
}

TEST(Regression, ZeroLagMatchesPopulationsAndDecaysToOne) {
  SystemParams p = small_full();
  p.cavity.modes.fock_cutoff = 3;
  const Model m = build_model(p);
  const DensityMatrix rho = steady_state(m.liouvillian);
  const std::vector<double> grid = {-40.0, 0.0, 40.0};
  const CorrelationSeries g = g2_regression(m.space, rho, m.liouvillian, grid);
  EXPECT_NEAR(g.values[1], g2_zero_from_populations(fock_populations(m.space, rho)), 1e-8);
  EXPECT_NEAR(g.values[0], 1.0, 0.02);
  EXPECT_EQ(g.values[0], g.values[2]);
}

TEST(Regression, VacuumCavityRejected) {
  const Model m = build_model(small_full());
  const DensityMatrix vac = DensityMatrix::basis_state(m.space.dim(), 0);
  const std::vector<double> grid = {0.0};
  EXPECT_THROW(g2_regression(m.space, vac, m.liouvillian, grid), VacuumCavity);
}

}  // namespace
}  // namespace ionlaser
