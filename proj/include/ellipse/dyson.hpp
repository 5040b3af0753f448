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

#include <Eigen/Dense>

#include "ellipse/common.hpp"

namespace ellipse {

using Mat2 = Eigen::Matrix2cd;

/// Smallest spectral scale accepted by the Dyson solver.
inline constexpr double kMinEta = 1e-12;

/// Entry correlation rho of the elliptic ensemble, |rho| < 1.
class EllipticParam {
 public:
  explicit EllipticParam(double rho);
  double rho() const { return rho_; }

 private:
  double rho_;
};

/// Spectral parameter (zeta, eta) of the Hermitized resolvent.
struct SpectralPoint {
  Complex zeta;
  double eta;

  /// Validating constructor: eta >= kMinEta and zeta finite.
  static SpectralPoint make(Complex zeta, double eta);
};

/// Solution M = [[iv, conj(b)], [b, iv]] of the 2x2 Dyson equation.
struct DysonSolution {
  double v = 0.0;
  Complex b{};
  double residual = 0.0;  ///< max-entry norm of 1 + (i eta + Z + S[M]) M
  int iterations = 0;
  bool used_fallback = false;  ///< scalar v-equation bisection was needed
  int scalar_roots = 0;        ///< sign changes seen by the fallback scan (0 if unused)
};

struct DysonOptions {
  double tol = 1e-12;
  int max_iterations = 100000;
  double damping = 0.5;
};

/// Residuals of the identities satisfied by (v, b).
struct DysonIdentityResiduals {
  double mde = 0.0;            ///< |1 + (i eta + Z + S M) M|_max
  double abs_m_squared = 0.0;  ///< |v^2 + |b|^2 - v/(eta+v)|
  double b_equation = 0.0;     ///< |-conj(b) - (v^2+|b|^2)(zeta + rho b)|
  double v_equation = 0.0;     ///< |v_equation_residual(v)|
};

struct StabilityReport {
  std::array<double, 3> s_spectrum{};  ///< eigenvalues of S on the complement of E_-, descending
  double gap = 0.0;                    ///< Gap(|M|^2 S)
  double inv_norm = 0.0;               ///< |L^{-1}| on the complement of E_- (Hilbert-Schmidt)
  double bound_rhs = 0.0;              ///< [(1-|rho|) |M|^2 (2v^2 + eta/(eta+v))]^{-1}
  double e_minus_leak = 0.0;           ///< max |<E_-, L B>| over the basis B of the complement
};

/// Bulk region E_{rho,delta} of the elliptic law, boundary included.
class EllipseRegion {
 public:
  EllipseRegion(double rho, double delta);

  double rho() const { return rho_; }
  double delta() const { return delta_; }
  /// (Re z)^2/(1+rho)^2 + (Im z)^2/(1-rho)^2
  double form(Complex zeta) const;
  bool contains(Complex zeta) const { return form(zeta) <= 1.0 - delta_; }
  /// Semi-axes of the region: (1+rho) sqrt(1-delta), (1-rho) sqrt(1-delta).
  double semi_axis_re() const;
  double semi_axis_im() const;
  double area() const;

 private:
  double rho_;
  double delta_;
};

struct LogPotential {
  double value = 0.0;
  double error_bound = 0.0;  ///< quadrature estimate plus tail uncertainty
  double tail = 0.0;         ///< analytic tail beyond the cutoff
  int evaluations = 0;
};

struct LogPotentialOptions {
  double eta_min = 1e-8;
  double eta_max = 1e4;
  int max_depth = 40;
};

/// The self-energy S[A] = [[a22, rho a21], [rho a12, a11]].
Mat2 self_energy(const Mat2& a, double rho);

DysonSolution solve_dyson(SpectralPoint point, EllipticParam param, DysonOptions options = {});

/// b as a function of v: -Re z/(1+rho+eta/v) + i Im z/(1-rho+eta/v). Accepts eta >= 0.
Complex b_from_v(double v, Complex zeta, double eta, EllipticParam param);

/// Zero exactly at the Dyson solution v(zeta, eta). Accepts eta >= 0.
double v_equation_residual(double v, Complex zeta, double eta, EllipticParam param);

Mat2 m_matrix(const DysonSolution& solution);

DysonIdentityResiduals identity_residuals(const DysonSolution& solution, SpectralPoint point,
                                          EllipticParam param);

/// Uniform density 1/(pi (1-rho^2)) on the ellipse (boundary included), 0 outside.
double elliptic_density(Complex zeta, EllipticParam param);

/// lim_{eta -> 0} v(zeta, eta) for zeta strictly inside the ellipse.
double v_limit_bulk(Complex zeta, EllipticParam param);

StabilityReport stability_analysis(SpectralPoint point, EllipticParam param);

/// L(zeta) = -int_0^inf (v(zeta, eta) - 1/(1+eta)) d eta by adaptive Simpson on a
/// log-spaced eta axis, plus the analytic 1/eta^2 tail.
LogPotential log_potential(Complex zeta, EllipticParam param, double quad_tol,
                           LogPotentialOptions options = {});

/// L_eps(zeta) = -int_eps^inf (v - 1/(1+eta)) d eta on a fixed composite
/// Gauss-Legendre rule, so that finite differences in zeta are smooth.
double truncated_log_potential(Complex zeta, double eps, EllipticParam param,
                               int panels_per_decade = 24);

/// |2 dL_eps/dzeta + b(zeta, eps)| with dL_eps/dzeta from central differences of step h.
double log_potential_derivative_check(Complex zeta, double eps, EllipticParam param,
                                      double h = 1e-4);

}  // namespace ellipse
