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

// Closed-form effective three-level rates (S1/2 -> D3/2 Raman transition plus
// recycling through P1/2). These are estimates for orientation and parameter
// maps; quantitative predictions come from the master equation.

#include <algorithm>
#include <cmath>

#include "ionlaser/core.hpp"
#include "ionlaser/params.hpp"

namespace ionlaser {

/// All rates angular (rad/us), matching SystemParams.
struct EffectiveParams {
  double s1 = 0.0;          // Omega1 / 2|Delta1|
  double s2 = 0.0;          // Omega2 / 2 Delta2_eff
  double delta2_eff = 0.0;  // sqrt(Delta2^2 + (Omega2/2)^2 + gamma^2)
  double g_eff = 0.0;       // g s1
  double gamma_eff_1 = 0.0; // gamma s1^2, broadening of S1/2
  double gamma_eff_2 = 0.0; // gamma s2^2, broadening of D3/2
  double gamma_eff = 0.0;   // gamma_eff_1 + gamma_eff_2
  double gamma_r = 0.0;     // gamma1 s2^2, half the recycling rate
  double gamma_tot = 0.0;   // 1/Gamma_tot = 1/(2 g_eff) + 1/(2 gamma_r)
};

inline EffectiveParams effective_params(const SystemParams& p) {
  if (p.drive.detuning == 0.0) throw ZeroDetuning("effective rates need a detuned drive laser");
  EffectiveParams e;
  const double gamma = p.decay.gamma();
  e.s1 = p.drive.rabi / (2.0 * std::abs(p.drive.detuning));
  const double half_rabi2 = 0.5 * p.recycle.rabi;
  e.delta2_eff = std::sqrt(p.recycle.detuning * p.recycle.detuning + half_rabi2 * half_rabi2 + gamma * gamma);
  e.s2 = p.recycle.rabi / (2.0 * e.delta2_eff);
  e.g_eff = p.cavity.coupling * e.s1;
  e.gamma_r = p.decay.gamma1 * e.s2 * e.s2;
  e.gamma_eff_1 = gamma * e.s1 * e.s1;
  e.gamma_eff_2 = gamma * e.s2 * e.s2;
  e.gamma_eff = e.gamma_eff_1 + e.gamma_eff_2;
  if (e.g_eff > 0.0 && e.gamma_r > 0.0) e.gamma_tot = 1.0 / (1.0 / (2.0 * e.g_eff) + 1.0 / (2.0 * e.gamma_r));
  return e;
}

enum class CouplingRegime { EffectiveStrongCoupling, Intermediate, Weak };

inline const char* regime_name(CouplingRegime r) {
  switch (r) {
    case CouplingRegime::EffectiveStrongCoupling: return "strong";
    case CouplingRegime::Intermediate: return "intermediate";
    case CouplingRegime::Weak: return "weak";
  }
  return "?";
}

/// Effective strong coupling means g_eff > (gamma_eff, kappa). Ratios within
/// +-`band` of the boundary are reported as Intermediate.
inline CouplingRegime regime_classifier(const EffectiveParams& e, double kappa, double band = 0.05) {
  const double limit = std::max(e.gamma_eff, kappa);
  if (!(limit > 0.0)) return e.g_eff > 0.0 ? CouplingRegime::EffectiveStrongCoupling : CouplingRegime::Weak;
  const double ratio = e.g_eff / limit;
  if (ratio > 1.0 + band) return CouplingRegime::EffectiveStrongCoupling;
  if (ratio < 1.0 - band) return CouplingRegime::Weak;
  return CouplingRegime::Intermediate;
}

}  // namespace ionlaser
