// Copyright 2026 The ellipse-lab Authors
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

#include <Eigen/Dense>

#include "ellipse/common.hpp"
#include "ellipse/ensemble.hpp"

namespace ellipse {

struct Svd {
  Eigen::VectorXd s;  ///< singular values, descending
  CMatrix u;          ///< left singular vectors (empty if not requested)
  CMatrix w;          ///< right singular vectors, A = U diag(s) W*
};

/// Dense SVD via LAPACK zgesdd.
Svd svd(CMatrix a, bool vectors);

struct HermitianEig {
  Eigen::VectorXd values;  ///< ascending
  CMatrix vectors;
};

/// Dense Hermitian eigensolve via LAPACK zheevd (lower triangle is referenced).
HermitianEig hermitian_eig(CMatrix h, bool vectors = true);

struct GeneralEig {
  Eigen::VectorXcd values;
  CMatrix right_vectors;  ///< unit-norm columns (empty if not requested)
};

/// Dense non-Hermitian eigensolve via LAPACK zgeev.
GeneralEig general_eig(CMatrix a, bool right_vectors);

/// log|det A| via LU (zgetrf); -inf for an exactly singular factor.
double log_abs_det(CMatrix a);

}  // namespace ellipse
