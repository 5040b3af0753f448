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

#include "ellipse/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ellipse/linalg.hpp"
#include "ellipse/quadrature.hpp"
#include "ellipse/rng.hpp"

namespace ellipse {
namespace {

constexpr double kZeroEigenvalue = 1e-300;

CVector resolvent_values(const Eigen::VectorXd& lambda, double eta) {
  CVector f(lambda.size());
  for (Eigen::Index k = 0; k < lambda.size(); ++k) f(k) = 1.0 / Complex(lambda(k), -eta);
  return f;
}

void check_eta_positive(double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
}

// diag(A C)
CVector diag_product(const CMatrix& a, const CMatrix& c) {
  return a.cwiseProduct(c.transpose()).rowwise().sum();
}

// diag(A^t C)
CVector diag_transpose_product(const CMatrix& a, const CMatrix& c) {
  return a.cwiseProduct(c).colwise().sum().transpose();
}

// diag(S C) for an S^ block S = t I + coef (A^t - diag A).
CVector diag_self_energy_product(Complex t, Complex coef, const CMatrix& a, const CMatrix& c) {
  const CVector dc = c.diagonal();
  return t * dc + coef * (diag_transpose_product(a, c) - a.diagonal().cwiseProduct(dc));
}

// (t I + coef (A^t - diag A)) y
CVector apply_self_energy_block(Complex t, Complex coef, const CMatrix& a, const CVector& y) {
  return t * y + coef * (a.transpose() * y - a.diagonal().cwiseProduct(y));
}

Complex avg(const CMatrix& a) { return a.trace() / static_cast<double>(a.rows()); }

}  // namespace

Hermitization hermitize(const RowMatrix& x, Complex zeta) {
  const Eigen::Index n = x.rows();
  if (x.cols() != n) throw std::invalid_argument("hermitize expects a square matrix");
  Hermitization h{zeta, CMatrix::Zero(2 * n, 2 * n)};
  CMatrix a = x;
  a.diagonal().array() -= zeta;
  h.matrix.topRightCorner(n, n) = a;
  h.matrix.bottomLeftCorner(n, n) = a.adjoint();
  return h;
}

void SpectralDecomposition::compute_weights() {
  const int n = n_;
  if (kind_ == Kind::kFull) {
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        weights_[2 * a + b] = v_.middleRows(a * n, n)
                                  .cwiseProduct(v_.middleRows(b * n, n).conjugate())
                                  .colwise()
                                  .sum()
                                  .transpose();
    return;
  }
  weights_[0] = CVector::Constant(2 * n, 0.5);
  weights_[3] = CVector::Constant(2 * n, 0.5);
  if (kind_ != Kind::kSvd) return;
  weights_[1].resize(2 * n);
  for (int j = 0; j < n; ++j) {
    const Complex c = 0.5 * w_.col(j).dot(u_.col(j));  // sum_i u_j(i) conj(w_j(i)) / 2
    weights_[1](j) = -c;
    weights_[1](2 * n - 1 - j) = c;
  }
  weights_[2] = weights_[1].conjugate();
}

CVector SpectralDecomposition::eigenvector(int k) const {
  if (kind_ == Kind::kFull) return v_.col(k);
  if (kind_ != Kind::kSvd) throw std::logic_error("decomposition holds eigenvalues only");
  const int n = n_;
  const bool negative = k < n;
  const int j = negative ? k : 2 * n - 1 - k;
  CVector v(2 * n);
  const double r = std::numbers::sqrt2 / 2.0;
  v.head(n) = r * u_.col(j);
  v.tail(n) = (negative ? -r : r) * w_.col(j);
  return v;
}

CMatrix SpectralDecomposition::eigenvector_matrix() const {
  if (kind_ == Kind::kFull) return v_;
  CMatrix v(2 * n_, 2 * n_);
  for (int k = 0; k < 2 * n_; ++k) v.col(k) = eigenvector(k);
  return v;
}

CVector SpectralDecomposition::project(const CVector& x) const {
  if (x.size() != 2 * n_) throw std::invalid_argument("probe has the wrong dimension");
  if (kind_ == Kind::kFull) return v_.adjoint() * x;
  if (kind_ != Kind::kSvd) throw std::logic_error("decomposition holds eigenvalues only");
  const int n = n_;
  const CVector a = u_.adjoint() * x.head(n);
  const CVector b = w_.adjoint() * x.tail(n);
  const double r = std::numbers::sqrt2 / 2.0;
  CVector c(2 * n);
  for (int j = 0; j < n; ++j) {
    c(j) = r * (a(j) - b(j));
    c(2 * n - 1 - j) = r * (a(j) + b(j));
  }
  return c;
}

CVector SpectralDecomposition::block_weights(int a, int b) const {
  const CVector& w = weights_.at(2 * a + b);
  if (w.size() == 0) throw std::logic_error("off-diagonal block weights need eigenvectors");
  return w;
}

CMatrix SpectralDecomposition::spectral_block(int a, int b, const CVector& f) const {
  const int n = n_;
  if (kind_ == Kind::kFull)
    return v_.middleRows(a * n, n) * f.asDiagonal() * v_.middleRows(b * n, n).adjoint();
  if (kind_ != Kind::kSvd) throw std::logic_error("decomposition holds eigenvalues only");
  // Pair j carries f_- = f(-s_j) at index j and f_+ = f(s_j) at index 2n-1-j.
  CVector g(n);
  for (int j = 0; j < n; ++j) {
    const Complex fm = f(j);
    const Complex fp = f(2 * n - 1 - j);
    g(j) = (a == b) ? 0.5 * (fp + fm) : 0.5 * (fp - fm);
  }
  const CMatrix& left = a == 0 ? u_ : w_;
  const CMatrix& right = b == 0 ? u_ : w_;
  return left * g.asDiagonal() * right.adjoint();
}

SpectralDecomposition decompose(const Hermitization& h) {
  SpectralDecomposition d;
  d.kind_ = SpectralDecomposition::Kind::kFull;
  d.zeta_ = h.zeta;
  d.n_ = h.n();
  HermitianEig e = hermitian_eig(h.matrix, true);
  d.eigenvalues_ = std::move(e.values);
  d.v_ = std::move(e.vectors);
  d.compute_weights();
  return d;
}

SpectralDecomposition decompose_svd(const RowMatrix& x, Complex zeta, bool vectors) {
  const int n = static_cast<int>(x.rows());
  CMatrix a = x;
  a.diagonal().array() -= zeta;
  Svd s = svd(std::move(a), vectors);
  SpectralDecomposition d;
  d.kind_ = vectors ? SpectralDecomposition::Kind::kSvd : SpectralDecomposition::Kind::kValuesOnly;
  d.zeta_ = zeta;
  d.n_ = n;
  d.eigenvalues_.resize(2 * n);
  for (int j = 0; j < n; ++j) {
    d.eigenvalues_(j) = -s.s(j);
    d.eigenvalues_(2 * n - 1 - j) = s.s(j);
  }
  d.u_ = std::move(s.u);
  d.w_ = std::move(s.w);
  d.compute_weights();
  return d;
}

Complex resolvent_trace(const SpectralDecomposition& dec, double eta) {
  check_eta_positive(eta);
  const auto& lambda = dec.eigenvalues();
  Complex s = 0.0;
  for (Eigen::Index k = 0; k < lambda.size(); ++k) s += 1.0 / Complex(lambda(k), -eta);
  return s / static_cast<double>(lambda.size());
}

Complex resolvent_isotropic_projected(const SpectralDecomposition& dec, double eta,
                                      const CVector& cx, const CVector& cy) {
  check_eta_positive(eta);
  const auto& lambda = dec.eigenvalues();
  Complex s = 0.0;
  for (Eigen::Index k = 0; k < lambda.size(); ++k)
    s += std::conj(cx(k)) * cy(k) / Complex(lambda(k), -eta);
  return s;
}

Complex resolvent_isotropic(const SpectralDecomposition& dec, double eta, const CVector& x,
                            const CVector& y) {
  return resolvent_isotropic_projected(dec, eta, dec.project(x), dec.project(y));
}

Mat2 partial_trace(const SpectralDecomposition& dec, double eta) {
  check_eta_positive(eta);
  const CVector f = resolvent_values(dec.eigenvalues(), eta);
  Mat2 out;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      out(a, b) = dec.block_weights(a, b).cwiseProduct(f).sum() / static_cast<double>(dec.n());
  return out;
}

BlockMatrix resolvent_blocks(const SpectralDecomposition& dec, double eta) {
  check_eta_positive(eta);
  const CVector f = resolvent_values(dec.eigenvalues(), eta);
  return {dec.spectral_block(0, 0, f), dec.spectral_block(0, 1, f), dec.spectral_block(1, 0, f),
          dec.spectral_block(1, 1, f)};
}

CMatrix dense_resolvent(const Hermitization& h, double eta) {
  check_eta_positive(eta);
  CMatrix a = h.matrix;
  a.diagonal().array() -= Complex(0.0, eta);
  return a.partialPivLu().inverse();
}

LogDetCheck log_det_check(const SpectralDecomposition& dec, double t, double quad_tol) {
  if (!(t >= 1.0)) throw std::invalid_argument("T must be >= 1");
  const auto& lambda = dec.eigenvalues();
  const double min_abs = lambda.cwiseAbs().minCoeff();
  if (min_abs < kZeroEigenvalue) throw NumericalError("H_zeta is singular (zero eigenvalue)");
  LogDetCheck out;
  double tail = 0.0;
  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    out.lhs += std::log(std::abs(lambda(k)));
    tail += 0.5 * std::log(lambda(k) * lambda(k) + t * t);
  }
  // eta * 2n <Im G> = sum eta^2 / (lambda^2 + eta^2), integrated in u = log eta.
  auto integrand = [&](double u) {
    const double e2 = std::exp(2.0 * u);
    double s = 0.0;
    for (Eigen::Index k = 0; k < lambda.size(); ++k) s += e2 / (lambda(k) * lambda(k) + e2);
    return s;
  };
  const double eta0 = 1e-7 * min_abs;
  double head = 0.0;  // int_0^eta0, integrand ~ eta / lambda^2
  for (Eigen::Index k = 0; k < lambda.size(); ++k) head += 0.5 * eta0 * eta0 / (lambda(k) * lambda(k));
  const QuadratureResult q = adaptive_simpson(integrand, std::log(eta0), std::log(t), quad_tol);
  if (!q.converged) throw NumericalError("log-determinant quadrature did not converge");
  out.rhs = -(head + q.value) + tail;
  out.quadrature_error = q.error + head;
  return out;
}

long small_singular_count(const SpectralDecomposition& dec, double eta) {
  check_eta_positive(eta);
  return static_cast<long>((dec.eigenvalues().array().abs() <= eta).count());
}

double smallest_singular_value(const SpectralDecomposition& dec) {
  return dec.eigenvalues().cwiseAbs().minCoeff();
}

SelfEnergyData SelfEnergyData::from_spec(const EnsembleSpec& spec) {
  const double n = spec.n;
  const double t = 2.0 * spec.mu - 1.0;
  return {t * spec.rho / n, t / n, true};
}

BlockMatrix self_energy_hat(const BlockMatrix& a, double rho, const SelfEnergyData& se) {
  const Complex p = se.hadamard_correction ? se.p : 0.0;
  const Complex q = se.hadamard_correction ? se.q : 0.0;
  auto block = [&](Complex t, Complex coef, const CMatrix& src) {
    CMatrix out = coef * src.transpose();
    out.diagonal().setZero();
    out.diagonal().array() += t;
    return out;
  };
  return {block(avg(a.b22), p, a.b22), block(rho * avg(a.b21), q, a.b21),
          block(rho * avg(a.b12), std::conj(q), a.b12), block(avg(a.b11), p, a.b11)};
}

std::vector<TestMatrix> standard_test_matrices(int n, std::uint64_t seed) {
  const CVector one = CVector::Ones(n);
  const CVector zero = CVector::Zero(n);
  std::vector<TestMatrix> out;
  out.push_back({"identity", one, zero, zero, one});
  out.push_back({"e_minus", one, zero, zero, -one});
  out.push_back({"upper_selector", zero, one, zero, zero});
  out.push_back({"lower_selector", zero, zero, one, zero});
  CVector s1(n), s2(n);
  for (int i = 0; i < n; ++i) {
    Substream s = rng_policy(seed, 0, domain_entry(StreamDomain::kTestMatrix, i));
    s1(i) = s.sign();
    s2(i) = s.sign();
  }
  out.push_back({"random_signs", s1, zero, zero, s2});
  return out;
}

CVector test_matrix_weights(const SpectralDecomposition& dec, const TestMatrix& b) {
  const int n = dec.n();
  CVector w(2 * n);
  for (int k = 0; k < 2 * n; ++k) {
    const CVector v = dec.eigenvector(k);
    const auto v1 = v.head(n);
    const auto v2 = v.tail(n);
    // v* B v
    w(k) = v1.dot(b.d11.cwiseProduct(v1)) + v1.dot(b.d12.cwiseProduct(v2)) +
           v2.dot(b.d21.cwiseProduct(v1)) + v2.dot(b.d22.cwiseProduct(v2));
  }
  return w;
}

Complex averaged_functional(const SpectralDecomposition& dec, double eta, const CVector& weights) {
  const CVector f = resolvent_values(dec.eigenvalues(), eta);
  return weights.cwiseProduct(f).sum() / static_cast<double>(2 * dec.n());
}

Complex averaged_functional(const DysonSolution& m, const TestMatrix& b) {
  // <B M> = (1/2n) tr(B M) with M = [[iv, conj b], [b, iv]] (x) identity
  const double n2 = 2.0 * static_cast<double>(b.d11.size());
  const Complex iv = kI * m.v;
  return (iv * b.d11.sum() + m.b * b.d12.sum() + std::conj(m.b) * b.d21.sum() +
          iv * b.d22.sum()) /
         n2;
}

std::vector<CVector> standard_probes(int n, int k_random, std::uint64_t seed) {
  const int dim = 2 * n;
  std::vector<CVector> out;
  CVector e = CVector::Zero(dim);
  e(0) = 1.0;
  out.push_back(e);
  e.setZero();
  e(n) = 1.0;
  out.push_back(e);
  out.push_back(CVector::Constant(dim, 1.0 / std::sqrt(static_cast<double>(dim))));
  CVector alt(dim);
  for (int i = 0; i < dim; ++i) alt(i) = (i % 2 == 0 ? 1.0 : -1.0) / std::sqrt(static_cast<double>(dim));
  out.push_back(alt);
  for (int r = 0; r < k_random; ++r) {
    Substream s = rng_policy(seed, 0, domain_entry(StreamDomain::kProbe, r));
    CVector g(dim);
    for (int i = 0; i < dim; ++i) {
      const double re = s.normal();
      const double im = s.normal();
      g(i) = {re, im};
    }
    out.push_back(g / g.norm());
  }
  return out;
}

CVector apply_m(const DysonSolution& m, const CVector& y) {
  const Eigen::Index n = y.size() / 2;
  CVector out(y.size());
  const Complex iv = kI * m.v;
  out.head(n) = iv * y.head(n) + std::conj(m.b) * y.tail(n);
  out.tail(n) = m.b * y.head(n) + iv * y.tail(n);
  return out;
}

ErrorMatrixNorms error_matrix_norms(const RowMatrix& x, const SpectralDecomposition& dec,
                                    double eta, double rho, const SelfEnergyData& se,
                                    const std::vector<std::pair<CVector, CVector>>& probe_pairs,
                                    const std::vector<TestMatrix>& tests) {
  const int n = dec.n();
  const BlockMatrix g = resolvent_blocks(dec, eta);
  const CMatrix xc = x;
  const Complex p = se.hadamard_correction ? se.p : 0.0;
  const Complex q = se.hadamard_correction ? se.q : 0.0;
  // S^[G] = [[t22 + p(G22^t), rho t21 + q(G21^t)], [rho t12 + conj(q)(G12^t), t11 + p(G11^t)]]
  const Complex t11 = avg(g.b11), t12 = avg(g.b12), t21 = avg(g.b21), t22 = avg(g.b22);
  const Complex s11 = t22, s12 = rho * t21, s21 = rho * t12, s22 = t11;

  ErrorMatrixNorms out;
  for (const auto& [xv, yv] : probe_pairs) {
    const CVector g1 = g.b11 * yv.head(n) + g.b12 * yv.tail(n);
    const CVector g2 = g.b21 * yv.head(n) + g.b22 * yv.tail(n);
    const CVector top = xc * g2 + apply_self_energy_block(s11, p, g.b22, g1) +
                        apply_self_energy_block(s12, q, g.b21, g2);
    const CVector bottom = xc.adjoint() * g1 + apply_self_energy_block(s21, std::conj(q), g.b12, g1) +
                           apply_self_energy_block(s22, p, g.b11, g2);
    const Complex val = xv.head(n).dot(top) + xv.tail(n).dot(bottom);
    out.iso = std::max(out.iso, std::abs(val));
  }

  if (!tests.empty()) {
    const CVector d11 = diag_product(xc, g.b21) + diag_self_energy_product(s11, p, g.b22, g.b11) +
                        diag_self_energy_product(s12, q, g.b21, g.b21);
    const CVector d12 = diag_product(xc, g.b22) + diag_self_energy_product(s11, p, g.b22, g.b12) +
                        diag_self_energy_product(s12, q, g.b21, g.b22);
    const CMatrix xh = xc.adjoint();
    const CVector d21 = diag_product(xh, g.b11) +
                        diag_self_energy_product(s21, std::conj(q), g.b12, g.b11) +
                        diag_self_energy_product(s22, p, g.b11, g.b21);
    const CVector d22 = diag_product(xh, g.b12) +
                        diag_self_energy_product(s21, std::conj(q), g.b12, g.b12) +
                        diag_self_energy_product(s22, p, g.b11, g.b22);
    for (const auto& b : tests) {
      const Complex tr = b.d11.cwiseProduct(d11).sum() + b.d12.cwiseProduct(d21).sum() +
                         b.d21.cwiseProduct(d12).sum() + b.d22.cwiseProduct(d22).sum();
      out.avg = std::max(out.avg, std::abs(tr) / (2.0 * n));
    }
  }
  return out;
}

ErrorMatrixNorms error_matrix_norms_dense(const RowMatrix& x, Complex zeta, double eta,
                                          double rho, const SelfEnergyData& se,
                                          const std::vector<std::pair<CVector, CVector>>& probe_pairs,
                                          const std::vector<TestMatrix>& tests) {
  const Eigen::Index n = x.rows();
  const Hermitization h = hermitize(x, zeta);
  const CMatrix g = dense_resolvent(h, eta);
  const BlockMatrix gb{g.topLeftCorner(n, n), g.topRightCorner(n, n), g.bottomLeftCorner(n, n),
                       g.bottomRightCorner(n, n)};
  const BlockMatrix s = self_energy_hat(gb, rho, se);
  CMatrix w = CMatrix::Zero(2 * n, 2 * n);
  w.topRightCorner(n, n) = x;
  w.bottomLeftCorner(n, n) = x.adjoint();
  CMatrix sg(2 * n, 2 * n);
  sg << s.b11, s.b12, s.b21, s.b22;
  const CMatrix d = (w + sg) * g;
  ErrorMatrixNorms out;
  for (const auto& [xv, yv] : probe_pairs) out.iso = std::max(out.iso, std::abs(xv.dot(d * yv)));
  for (const auto& b : tests) {
    CMatrix bm = CMatrix::Zero(2 * n, 2 * n);
    bm.topLeftCorner(n, n) = b.d11.asDiagonal();
    bm.topRightCorner(n, n) = b.d12.asDiagonal();
    bm.bottomLeftCorner(n, n) = b.d21.asDiagonal();
    bm.bottomRightCorner(n, n) = b.d22.asDiagonal();
    out.avg = std::max(out.avg, std::abs((bm * d).trace()) / (2.0 * n));
  }
  return out;
}

}  // namespace ellipse
