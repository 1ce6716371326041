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

// Shared scalar/matrix types, unit conversions and the error hierarchy.
//
// Units inside the library: angular frequencies in rad/us (so that 2*pi*1 MHz
// is `mhz(1.0)`), times in microseconds. Conversion from the "MHz divided by
// 2*pi" convention used in configuration files happens only at the boundary.

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace ionlaser {

using Complex = std::complex<double>;
using Operator = Eigen::SparseMatrix<Complex>;
using DenseMatrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Cyclic frequency in MHz to angular frequency in rad/us.
constexpr double mhz(double f) { return kTwoPi * f; }
/// Cyclic frequency in kHz to angular frequency in rad/us.
constexpr double khz(double f) { return kTwoPi * f * 1e-3; }
/// Angular frequency in rad/us back to cyclic MHz.
constexpr double to_mhz(double w) { return w / kTwoPi; }

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigurationError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class DegenerateSteadyState : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public Error {
 public:
  using Error::Error;
};

class StepUnderflow : public Error {
 public:
  using Error::Error;
};

class VacuumCavity : public Error {
 public:
  using Error::Error;
};

class ZeroDenominator : public Error {
 public:
  using Error::Error;
};

class ZeroDetuning : public Error {
 public:
  using Error::Error;
};

class InvalidSeed : public Error {
 public:
  using Error::Error;
};

/// Raised by the click-file readers; `kind` distinguishes the failure.
class ClickFormatError : public Error {
 public:
  enum class Kind { UnsortedInput, BadChannel, TruncatedRecord, Malformed };
  ClickFormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

class CorrelationError : public Error {
 public:
  enum class Kind { EmptyStream, ZeroDuration, NonPositiveSNR, MissingZeroBin };
  CorrelationError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace ionlaser
