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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ellipse/common.hpp"
#include "ellipse/dyson.hpp"
#include "ellipse/ensemble.hpp"

namespace ellipse {

using CVector = Eigen::VectorXcd;

/// H_zeta = [[0, X - zeta], [(X - zeta)*, 0]].
struct Hermitization {
  Complex zeta;
  CMatrix matrix;
  int n() const { return static_cast<int>(matrix.rows() / 2); }
};

Hermitization hermitize(const RowMatrix& x, Complex zeta);

/// Spectral decomposition of H_zeta. Eigenvalues are stored ascending. Eigenvectors
/// are held either as a full 2n x 2n matrix (Hermitian eigensolve) or implicitly
/// through the SVD X - zeta = U diag(s) W*, whose pairs +-s_j carry the vectors
/// (u_j, +-w_j)/sqrt(2).
class SpectralDecomposition {
 public:
  Complex zeta() const { return zeta_; }
  int n() const { return n_; }
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  bool has_vectors() const { return kind_ != Kind::kValuesOnly; }

  /// Column k of the unitary eigenvector matrix.
  CVector eigenvector(int k) const;
  /// The full 2n x 2n eigenvector matrix.
  CMatrix eigenvector_matrix() const;
  /// Coefficients c_k = <v_k, x> for all k.
  CVector project(const CVector& x) const;
  /// sum_i v_k(i) conj(v_k(j)) over the (a, b) block, for all k; a, b in {0, 1}.
  CVector block_weights(int a, int b) const;
  /// sum_k v_k v_k* f(lambda_k) restricted to block (a, b).
  CMatrix spectral_block(int a, int b, const CVector& f) const;

  friend SpectralDecomposition decompose(const Hermitization& h);
  friend SpectralDecomposition decompose_svd(const RowMatrix& x, Complex zeta, bool vectors);

 private:
  enum class Kind { kFull, kSvd, kValuesOnly };
  Kind kind_ = Kind::kValuesOnly;
  Complex zeta_{};
  int n_ = 0;
  Eigen::VectorXd eigenvalues_;
  CMatrix v_;  // kFull
  CMatrix u_;  // kSvd
  CMatrix w_;  // kSvd
  std::array<CVector, 4> weights_;  // block_weights(a, b) at index 2a + b

  void compute_weights();
};

/// Hermitian eigensolve of the 2n x 2n matrix (zheevd).
SpectralDecomposition decompose(const Hermitization& h);
/// The same decomposition from an n x n SVD of X - zeta.
SpectralDecomposition decompose_svd(const RowMatrix& x, Complex zeta, bool vectors = true);

/// <G> = (1/2n) sum_k 1/(lambda_k - i eta)
Complex resolvent_trace(const SpectralDecomposition& dec, double eta);
/// <x, G y>
Complex resolvent_isotropic(const SpectralDecomposition& dec, double eta, const CVector& x,
                            const CVector& y);
/// <x, G y> from precomputed projections cx = dec.project(x), cy = dec.project(y).
Complex resolvent_isotropic_projected(const SpectralDecomposition& dec, double eta,
                                      const CVector& cx, const CVector& cy);
/// The 2 x 2 matrix of normalised block traces <G_ab>.
Mat2 partial_trace(const SpectralDecomposition& dec, double eta);

/// A 2n x 2n matrix split into its four n x n blocks.
struct BlockMatrix {
  CMatrix b11, b12, b21, b22;
};
BlockMatrix resolvent_blocks(const SpectralDecomposition& dec, double eta);

/// Dense (H - i eta)^{-1} by LU, for cross-checks at small n.
CMatrix dense_resolvent(const Hermitization& h, double eta);

struct LogDetCheck {
  double lhs = 0.0;  ///< sum log|lambda_i|
  double rhs = 0.0;  ///< -2n int_0^T <Im G> + sum log|lambda_i - iT|
  double quadrature_error = 0.0;
};

/// Zero eigenvalues (|lambda| < 1e-300) raise NumericalError.
LogDetCheck log_det_check(const SpectralDecomposition& dec, double t, double quad_tol = 1e-10);

long small_singular_count(const SpectralDecomposition& dec, double eta);
double smallest_singular_value(const SpectralDecomposition& dec);

/// Hadamard correction data of the self-energy for the i.i.d. pair model.
struct SelfEnergyData {
  Complex p{};  ///< E x_ij conj(x_ji), i != j
  Complex q{};  ///< E x_ij^2, i != j
  bool hadamard_correction = true;

  static SelfEnergyData from_spec(const EnsembleSpec& spec);
};

/// Test matrix for averaged functionals <B A>, with B built from diagonal n x n blocks.
struct TestMatrix {
  std::string name;
  CVector d11, d12, d21, d22;  ///< B = [[diag d11, diag d12], [diag d21, diag d22]]
};

/// S^[A] = S[A] + [[P o A22^t, Q o A21^t], [Q* o A12^t, P o A11^t]] with constant
/// off-diagonal profiles P = p, Q = q (zero diagonal).
BlockMatrix self_energy_hat(const BlockMatrix& a, double rho, const SelfEnergyData& se);

/// {I, E_-, upper off-block selector, lower off-block selector, seeded random signs}.
std::vector<TestMatrix> standard_test_matrices(int n, std::uint64_t seed);

/// v_k* B v_k for every eigenvector.
CVector test_matrix_weights(const SpectralDecomposition& dec, const TestMatrix& b);
/// <B G> = (1/2n) sum_k weights_k / (lambda_k - i eta).
Complex averaged_functional(const SpectralDecomposition& dec, double eta, const CVector& weights);
/// <B M> for the deterministic approximation.
Complex averaged_functional(const DysonSolution& m, const TestMatrix& b);

/// Probe family: e_1, e_{n+1}, uniform, alternating sign, then k seeded Haar unit vectors.
std::vector<CVector> standard_probes(int n, int k_random, std::uint64_t seed);

/// The deterministic approximation M (2n x 2n) of G applied to a vector.
CVector apply_m(const DysonSolution& m, const CVector& y);

struct ErrorMatrixNorms {
  double iso = 0.0;  ///< max over probe pairs |<x, D y>|
  double avg = 0.0;  ///< max over test matrices |<B D>|
};

/// D = (H + Z + S^[G]) G with H + Z = [[0, X], [X*, 0]].
ErrorMatrixNorms error_matrix_norms(const RowMatrix& x, const SpectralDecomposition& dec,
                                    double eta, double rho, const SelfEnergyData& se,
                                    const std::vector<std::pair<CVector, CVector>>& probe_pairs,
                                    const std::vector<TestMatrix>& tests);

/// Same quantity with D formed explicitly by dense products; cross-check at small n.
ErrorMatrixNorms error_matrix_norms_dense(const RowMatrix& x, Complex zeta, double eta,
                                          double rho, const SelfEnergyData& se,
                                          const std::vector<std::pair<CVector, CVector>>& probe_pairs,
                                          const std::vector<TestMatrix>& tests);

}  // namespace ellipse
