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

#include "ellipse/linalg.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <lapacke.h>

namespace ellipse {
namespace {

lapack_complex_double* raw(CMatrix& m) {
  return reinterpret_cast<lapack_complex_double*>(m.data());
}

void check(lapack_int info, const char* routine) {
  if (info != 0)
    throw NumericalError(std::string(routine) + " failed with info = " + std::to_string(info));
}

}  // namespace

Svd svd(CMatrix a, bool vectors) {
  const lapack_int m = static_cast<lapack_int>(a.rows());
  const lapack_int n = static_cast<lapack_int>(a.cols());
  if (m != n) throw std::invalid_argument("svd expects a square matrix");
  Svd out;
  out.s.resize(n);
  if (vectors) {
    out.u.resize(n, n);
    CMatrix wh(n, n);
    check(LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'A', m, n, raw(a), m, out.s.data(), raw(out.u), m,
                         raw(wh), n),
          "zgesdd");
    out.w = wh.adjoint();
  } else {
    check(LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'N', m, n, raw(a), m, out.s.data(), nullptr, 1, nullptr,
                         1),
          "zgesdd");
  }
  return out;
}

HermitianEig hermitian_eig(CMatrix h, bool vectors) {
  const lapack_int n = static_cast<lapack_int>(h.rows());
  HermitianEig out;
  out.values.resize(n);
  check(LAPACKE_zheevd(LAPACK_COL_MAJOR, vectors ? 'V' : 'N', 'L', n, raw(h), n,
                       out.values.data()),
        "zheevd");
  if (vectors) out.vectors = std::move(h);
  return out;
}

GeneralEig general_eig(CMatrix a, bool right_vectors) {
  const lapack_int n = static_cast<lapack_int>(a.rows());
  GeneralEig out;
  out.values.resize(n);
  if (right_vectors) out.right_vectors.resize(n, n);
  check(LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', right_vectors ? 'V' : 'N', n, raw(a), n,
                      reinterpret_cast<lapack_complex_double*>(out.values.data()), nullptr, 1,
                      right_vectors ? raw(out.right_vectors) : nullptr, right_vectors ? n : 1),
        "zgeev");
  return out;
}

double log_abs_det(CMatrix a) {
  const lapack_int n = static_cast<lapack_int>(a.rows());
  std::vector<lapack_int> piv(n);
  const lapack_int info = LAPACKE_zgetrf(LAPACK_COL_MAJOR, n, n, raw(a), n, piv.data());
  if (info < 0) check(info, "zgetrf");
  if (info > 0) return -std::numeric_limits<double>::infinity();
  double s = 0.0;
  for (lapack_int i = 0; i < n; ++i) s += std::log(std::abs(a(i, i)));
  return s;
}

}  // namespace ellipse
