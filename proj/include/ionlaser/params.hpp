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

// Physical parameters of the ion-cavity system. All frequencies are angular,
// in rad/us; build values with mhz()/khz() from core.hpp.

#include <cmath>
#include <string>

#include "ionlaser/core.hpp"
#include "ionlaser/model.hpp"

namespace ionlaser {

struct LaserParams {
  double rabi = 0.0;       // Omega
  double detuning = 0.0;   // Delta = omega_laser - omega_transition, red is negative
  double linewidth = 0.0;  // delta; coherences dephase at this rate

  void validate(const char* name) const {
    if (!(rabi >= 0.0) || !std::isfinite(rabi)) throw ConfigurationError(std::string(name) + ": rabi must be >= 0");
    if (!std::isfinite(detuning)) throw ConfigurationError(std::string(name) + ": detuning must be finite");
    if (!(linewidth >= 0.0) || !std::isfinite(linewidth))
      throw ConfigurationError(std::string(name) + ": linewidth must be >= 0");
  }
};

struct CavityParams {
  double coupling = 0.0;  // g
  double decay = 0.0;     // kappa, field decay rate
  double detuning = 0.0;  // Delta_c, relative to the P1/2-D3/2 transition
  ModeConfig modes;

  void validate() const {
    if (!(coupling >= 0.0) || !std::isfinite(coupling)) throw ConfigurationError("cavity: g must be >= 0");
    if (!(decay > 0.0) || !std::isfinite(decay)) throw ConfigurationError("cavity: kappa must be > 0");
    if (!std::isfinite(detuning)) throw ConfigurationError("cavity: detuning must be finite");
    if (modes.fock_cutoff < 1) throw ConfigurationError("cavity: Fock cutoff must be >= 1");
  }
};

/// Half decay rates of P1/2: 2*gamma1 into S1/2, 2*gamma2 into D3/2.
struct DecayParams {
  double gamma1 = 0.0;
  double gamma2 = 0.0;

  double gamma() const { return gamma1 + gamma2; }

  void validate() const {
    if (!(gamma1 > 0.0) || !(gamma2 > 0.0)) throw ConfigurationError("decay: gamma1 and gamma2 must be > 0");
  }
};

/// Polarizations of the four fields relative to the quantization axis.
struct Geometry {
  Polarization drive = Polarization::Pi();
  Polarization recycle = Polarization::Perpendicular();
  Polarization mode_h = Polarization::Pi();
  Polarization mode_v = Polarization::Perpendicular();
};

struct SystemParams {
  LaserParams drive;    // 397 nm, S1/2 - P1/2
  LaserParams recycle;  // 866 nm, D3/2 - P1/2
  CavityParams cavity;
  DecayParams decay;
  double b_gauss = 0.0;
  Geometry geometry;

  void validate() const {
    drive.validate("drive");
    recycle.validate("recycle");
    cavity.validate();
    decay.validate();
    if (!(b_gauss >= 0.0) || !std::isfinite(b_gauss)) throw ConfigurationError("B must be >= 0");
  }
};

/// Calibrated constants of the experiment: g, kappa, decay rates, B, linewidths.
/// Laser Rabi frequencies and detunings are left at zero.
inline SystemParams calibrated_system() {
  SystemParams p;
  p.cavity.coupling = mhz(1.3);
  p.cavity.decay = khz(54.0);
  p.decay.gamma1 = mhz(10.0);
  p.decay.gamma2 = mhz(0.845);
  p.b_gauss = 2.8;
  p.drive.linewidth = mhz(0.03);
  p.recycle.linewidth = mhz(0.2);
  return p;
}

}  // namespace ionlaser
