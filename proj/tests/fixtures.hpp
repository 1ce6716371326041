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

// Parameter families used across the test suites. Drive detunings are
// Raman-locked once per family and cached.

#include "ionlaser/params.hpp"
#include "ionlaser/resonance.hpp"

namespace ionlaser::testing {

inline SystemParams family(double omega1_mhz, double delta1_mhz, double delta_c_mhz) {
  SystemParams p = calibrated_system();
  p.drive.rabi = mhz(omega1_mhz);
  p.drive.detuning = mhz(delta1_mhz);
  p.recycle.detuning = mhz(-20.0);
  p.cavity.detuning = mhz(delta_c_mhz);
  return p;
}

inline SystemParams with_recycle(SystemParams p, double omega2_mhz) {
  p.recycle.rabi = mhz(omega2_mhz);
  return p;
}

/// Omega1 = 95, Delta1 = Delta_c = -400 MHz: the family whose correlation
/// changes from antibunched to bunched as Omega2 grows (7, 12, 16 MHz).
inline SystemParams antibunching_series(double omega2_mhz) {
  static const SystemParams locked = raman_lock(family(95.0, -400.0, -400.0)).params;
  return with_recycle(locked, omega2_mhz);
}

/// Omega1 = 88, Delta1 = Delta_c = -350 MHz: g_eff at the strong-coupling boundary.
inline SystemParams boundary_sweep(double omega2_mhz) {
  static const SystemParams locked = raman_lock(family(88.0, -350.0, -350.0)).params;
  return with_recycle(locked, omega2_mhz);
}

/// Omega1 = 130, Delta1 = Delta_c = -350 MHz: stronger drive, threshold-like behavior.
inline SystemParams threshold_sweep(double omega2_mhz) {
  static const SystemParams locked = raman_lock(family(130.0, -350.0, -350.0)).params;
  return with_recycle(locked, omega2_mhz);
}

}  // namespace ionlaser::testing
