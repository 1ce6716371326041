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

// Sparse direct solver used by the steady-state and stiff integrators.
// UMFPACK is used when the build found it; Eigen's SparseLU otherwise.

#include <Eigen/SparseLU>
#ifdef IONLASER_HAVE_UMFPACK
#include <Eigen/UmfPackSupport>
#endif

#include "ionlaser/core.hpp"

namespace ionlaser {

class SparseLuSolver {
 public:
  /// Returns false when the factorization failed (singular matrix).
  bool compute(Operator m) {
    // UmfPackLU keeps a reference to the factored matrix.
    matrix_ = std::move(m);
    matrix_.makeCompressed();
    lu_.compute(matrix_);
    ok_ = lu_.info() == Eigen::Success;
    return ok_;
  }

  bool ok() const { return ok_; }

  template <typename Rhs>
  Eigen::Matrix<Complex, Eigen::Dynamic, Rhs::ColsAtCompileTime> solve(const Eigen::MatrixBase<Rhs>& b) const {
    if (!ok_) throw Error("sparse LU: solve on a failed factorization");
    return lu_.solve(b);
  }

  static const char* backend() {
#ifdef IONLASER_HAVE_UMFPACK
    return "umfpack";
#else
    return "eigen-sparselu";
#endif
  }

 private:
#ifdef IONLASER_HAVE_UMFPACK
  Eigen::UmfPackLU<Operator> lu_;
#else
  Eigen::SparseLU<Operator, Eigen::COLAMDOrdering<int>> lu_;
#endif
  Operator matrix_;
  bool ok_ = false;
};

}  // namespace ionlaser
