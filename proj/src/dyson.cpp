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

#include "ellipse/dyson.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "ellipse/quadrature.hpp"

namespace ellipse {
namespace {

Mat2 z_matrix(Complex zeta) {
  Mat2 z;
  z << 0.0, zeta, std::conj(zeta), 0.0;
  return z;
}

Mat2 make_m(double v, Complex b) {
  Mat2 m;
  m << kI * v, std::conj(b), b, kI * v;
  return m;
}

double mde_residual(const Mat2& m, Complex zeta, double eta, double rho) {
  const Mat2 lhs =
      Mat2::Identity() + (kI * eta * Mat2::Identity() + z_matrix(zeta) + self_energy(m, rho)) * m;
  return lhs.cwiseAbs().maxCoeff();
}

void check_eta(double eta) {
  if (!(eta >= kMinEta) || !std::isfinite(eta))
    throw std::invalid_argument("spectral scale eta must be >= 1e-12");
}

// Bisection of the v-equation on a sign-changing bracket [lo, hi].
double bisect_bracket(Complex zeta, double eta, EllipticParam param, double lo, double hi,
                      bool lo_negative) {
  for (int it = 0; it < 400 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++it) {
    const double mid = (hi / lo > 4.0) ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
    if ((v_equation_residual(mid, zeta, eta, param) < 0.0) == lo_negative)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Root of the scalar v-equation on (0, min(1, 1/eta)], bracketed next to `hint`.
double bisect_v(Complex zeta, double eta, EllipticParam param, double hint, int& sign_changes) {
  const double v_max = std::min(1.0, 1.0 / eta);
  auto f = [&](double v) { return v_equation_residual(v, zeta, eta, param); };
  constexpr int kScan = 240;
  const double log_lo = std::log(v_max) - 70.0;
  std::vector<double> grid(kScan + 1);
  std::vector<double> vals(kScan + 1);
  for (int k = 0; k <= kScan; ++k) {
    grid[k] = std::exp(log_lo + (std::log(v_max) - log_lo) * k / kScan);
    vals[k] = f(grid[k]);
  }
  grid[kScan] = v_max;
  vals[kScan] = f(v_max);
  sign_changes = 0;
  int best = -1;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int k = 0; k < kScan; ++k) {
    if ((vals[k] < 0.0) != (vals[k + 1] < 0.0)) {
      ++sign_changes;
      const double mid = std::sqrt(grid[k] * grid[k + 1]);
      const double dist = std::abs(std::log(mid) - std::log(std::max(hint, 1e-300)));
      if (dist < best_dist) {
        best_dist = dist;
        best = k;
      }
    }
  }
  if (best < 0) throw NumericalError("v-equation has no sign change on (0, min(1, 1/eta)]");
  return bisect_bracket(zeta, eta, param, grid[best], grid[best + 1], vals[best] < 0.0);
}

}  // namespace

EllipticParam::EllipticParam(double rho) : rho_(rho) {
  if (!(std::abs(rho) < 1.0)) throw std::invalid_argument("rho must satisfy |rho| < 1");
}

SpectralPoint SpectralPoint::make(Complex zeta, double eta) {
  check_eta(eta);
  if (!std::isfinite(zeta.real()) || !std::isfinite(zeta.imag()))
    throw std::invalid_argument("zeta must be finite");
  return {zeta, eta};
}

EllipseRegion::EllipseRegion(double rho, double delta) : rho_(rho), delta_(delta) {
  if (!(std::abs(rho) < 1.0)) throw std::invalid_argument("rho must satisfy |rho| < 1");
  if (!(delta >= 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in [0, 1)");
}

double EllipseRegion::form(Complex zeta) const {
  const double a = zeta.real() / (1.0 + rho_);
  const double b = zeta.imag() / (1.0 - rho_);
  return a * a + b * b;
}

double EllipseRegion::semi_axis_re() const { return (1.0 + rho_) * std::sqrt(1.0 - delta_); }
double EllipseRegion::semi_axis_im() const { return (1.0 - rho_) * std::sqrt(1.0 - delta_); }
double EllipseRegion::area() const { return std::numbers::pi * semi_axis_re() * semi_axis_im(); }

Mat2 self_energy(const Mat2& a, double rho) {
  Mat2 s;
  s << a(1, 1), rho * a(1, 0), rho * a(0, 1), a(0, 0);
  return s;
}

DysonSolution solve_dyson(SpectralPoint point, EllipticParam param, DysonOptions options) {
  check_eta(point.eta);
  if (!(options.tol > 0.0)) throw std::invalid_argument("tol must be positive");
  const double eta = point.eta;
  const Complex zeta = point.zeta;
  const double rho = param.rho();
  const Mat2 shift = kI * eta * Mat2::Identity() + z_matrix(zeta);
  const double t = options.damping;

  Mat2 m = (kI / (1.0 + eta)) * Mat2::Identity();
  DysonSolution sol;
  double checkpoint = std::numeric_limits<double>::infinity();
  bool stalled = false;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    const Mat2 next = -(shift + self_energy(m, rho)).inverse();
    m = (1.0 - t) * m + t * next;
    const double res = mde_residual(m, zeta, eta, rho);
    if (res <= options.tol) {
      ++it;
      break;
    }
    if ((it + 1) % 500 == 0) {
      if (res > 0.5 * checkpoint) {
        stalled = true;
        ++it;
        break;
      }
      checkpoint = res;
    }
  }
  sol.iterations = it;
  sol.v = 0.5 * (m(0, 0).imag() + m(1, 1).imag());
  sol.b = 0.5 * (m(1, 0) + std::conj(m(0, 1)));
  sol.residual = mde_residual(make_m(sol.v, sol.b), zeta, eta, rho);

  // Outside the spectrum v can be tiny while v/(eta+v) is O(1); a residual-level
  // error in v then shows up amplified in the scalar identities. Polish v on the
  // v-equation inside a bracket grown around the fixed point.
  if (!stalled && sol.residual <= options.tol && sol.v > 0.0) {
    double lo = 0.0, hi = 0.0, f_lo = 0.0, f_hi = 0.0;
    for (double w = 1e-8; w <= 0.1; w *= 10.0) {
      lo = sol.v * (1.0 - w);
      hi = sol.v * (1.0 + w);
      f_lo = v_equation_residual(lo, zeta, eta, param);
      f_hi = v_equation_residual(hi, zeta, eta, param);
      if ((f_lo < 0.0) != (f_hi < 0.0)) break;
    }
    if ((f_lo < 0.0) != (f_hi < 0.0)) {
      const double v = bisect_bracket(zeta, eta, param, lo, hi, f_lo < 0.0);
      const Complex b = b_from_v(v, zeta, eta, param);
      const double res = mde_residual(make_m(v, b), zeta, eta, rho);
      if (res <= sol.residual) {
        sol.v = v;
        sol.b = b;
        sol.residual = res;
      }
    }
  }

  if (stalled || sol.residual > options.tol || !(sol.v > 0.0)) {
    const double hint = sol.v > 0.0 ? sol.v : std::min(1.0, 1.0 / eta);
    int roots = 0;
    const double v = bisect_v(zeta, eta, param, hint, roots);
    sol.v = v;
    sol.b = b_from_v(v, zeta, eta, param);
    sol.residual = mde_residual(make_m(sol.v, sol.b), zeta, eta, rho);
    sol.used_fallback = true;
    sol.scalar_roots = roots;
    if (sol.residual > options.tol)
      throw NumericalError("Dyson solver did not reach tol (residual " +
                           std::to_string(sol.residual) + ")");
  }
  return sol;
}

Complex b_from_v(double v, Complex zeta, double eta, EllipticParam param) {
  if (!(v > 0.0)) throw std::invalid_argument("v must be positive");
  if (!(eta >= 0.0)) throw std::invalid_argument("eta must be non-negative");
  const double s = eta / v;
  const double rho = param.rho();
  return {-zeta.real() / (1.0 + rho + s), zeta.imag() / (1.0 - rho + s)};
}

double v_equation_residual(double v, Complex zeta, double eta, EllipticParam param) {
  if (!(v > 0.0)) throw std::invalid_argument("v must be positive");
  if (!(eta >= 0.0)) throw std::invalid_argument("eta must be non-negative");
  const double s = eta / v;
  const double rho = param.rho();
  const double re = zeta.real() / (1.0 + s + rho);
  const double im = zeta.imag() / (1.0 + s - rho);
  return re * re + im * im - (1.0 / (1.0 + s) - v * v);
}

Mat2 m_matrix(const DysonSolution& solution) { return make_m(solution.v, solution.b); }

DysonIdentityResiduals identity_residuals(const DysonSolution& solution, SpectralPoint point,
                                          EllipticParam param) {
  const double v = solution.v;
  const Complex b = solution.b;
  const double eta = point.eta;
  const double m2 = v * v + std::norm(b);
  DysonIdentityResiduals r;
  r.mde = mde_residual(make_m(v, b), point.zeta, eta, param.rho());
  r.abs_m_squared = std::abs(m2 - v / (eta + v));
  r.b_equation = std::abs(-std::conj(b) - m2 * (point.zeta + param.rho() * b));
  r.v_equation = std::abs(v_equation_residual(v, point.zeta, eta, param));
  return r;
}

double elliptic_density(Complex zeta, EllipticParam param) {
  const double rho = param.rho();
  return EllipseRegion(rho, 0.0).contains(zeta) ? 1.0 / (std::numbers::pi * (1.0 - rho * rho))
                                                : 0.0;
}

double v_limit_bulk(Complex zeta, EllipticParam param) {
  const double form = EllipseRegion(param.rho(), 0.0).form(zeta);
  if (!(form < 1.0))
    throw std::invalid_argument("v_limit_bulk requires zeta strictly inside the ellipse");
  return std::sqrt(1.0 - form);
}

StabilityReport stability_analysis(SpectralPoint point, EllipticParam param) {
  check_eta(point.eta);
  const double rho = param.rho();
  const DysonSolution sol = solve_dyson(point, param);
  const Mat2 m = m_matrix(sol);

  const double r2 = std::numbers::sqrt2 / 2.0;
  std::array<Mat2, 3> basis;
  basis[0] << r2, 0.0, 0.0, r2;
  basis[1] << 0.0, r2, r2, 0.0;
  basis[2] << 0.0, -kI * r2, kI * r2, 0.0;
  Mat2 e_minus;
  e_minus << r2, 0.0, 0.0, -r2;

  auto stability_op = [&](const Mat2& r) -> Mat2 { return r - m * self_energy(r, rho) * m; };
  auto hs = [](const Mat2& a, const Mat2& b) { return (a.adjoint() * b).trace(); };

  Eigen::Matrix3cd l_mat;
  Eigen::Matrix3cd s_mat;
  StabilityReport rep;
  for (int j = 0; j < 3; ++j) {
    const Mat2 lb = stability_op(basis[j]);
    const Mat2 sb = self_energy(basis[j], rho);
    for (int i = 0; i < 3; ++i) {
      l_mat(i, j) = hs(basis[i], lb);
      s_mat(i, j) = hs(basis[i], sb);
    }
    rep.e_minus_leak = std::max(rep.e_minus_leak, std::abs(hs(e_minus, lb)));
  }

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3cd> s_eig(s_mat);
  const Eigen::Vector3d s_vals = s_eig.eigenvalues();
  rep.s_spectrum = {s_vals(2), s_vals(1), s_vals(0)};

  const double m_norm2 = std::pow(Eigen::JacobiSVD<Mat2>(m).singularValues()(0), 2);
  std::array<double, 3> t_abs{};
  for (int k = 0; k < 3; ++k) t_abs[k] = m_norm2 * std::abs(s_vals(k));
  std::sort(t_abs.begin(), t_abs.end(), std::greater<>());
  rep.gap = t_abs[0] - t_abs[1];

  const Eigen::Vector3d l_sv = Eigen::JacobiSVD<Eigen::Matrix3cd>(l_mat).singularValues();
  rep.inv_norm = 1.0 / l_sv(2);

  const double v = sol.v;
  const double eta = point.eta;
  rep.bound_rhs = 1.0 / ((1.0 - std::abs(rho)) * m_norm2 * (2.0 * v * v + eta / (eta + v)));
  return rep;
}

namespace {

// v(zeta, eta) - 1/(1+eta)
double centred_v(Complex zeta, double eta, EllipticParam param, double tol) {
  DysonOptions opt;
  opt.tol = tol;
  return solve_dyson({zeta, eta}, param, opt).v - 1.0 / (1.0 + eta);
}

}  // namespace

LogPotential log_potential(Complex zeta, EllipticParam param, double quad_tol,
                           LogPotentialOptions options) {
  if (!(quad_tol > 0.0)) throw std::invalid_argument("quad_tol must be positive");
  LogPotential out;
  auto integrand = [&](double u) {
    const double eta = std::exp(u);
    ++out.evaluations;
    return eta * centred_v(zeta, eta, param, 1e-13);
  };
  const QuadratureResult body = adaptive_simpson(integrand, std::log(options.eta_min),
                                                 std::log(options.eta_max), 0.5 * quad_tol,
                                                 options.max_depth);
  if (!body.converged)
    throw NumericalError("log-potential quadrature did not reach quad_tol");

  // |v - 1/(1+eta)| <= 1 near zero, so the head is bounded by eta_min.
  const double head = options.eta_min * centred_v(zeta, options.eta_min, param, 1e-13);
  // v - 1/(1+eta) = c/eta^2 + O(eta^-3).
  const double t = options.eta_max;
  const double c = t * t * centred_v(zeta, t, param, 1e-14);
  out.tail = c / t;
  out.value = -(head + body.value + out.tail);
  out.error_bound = body.error + options.eta_min +
                    (1.0 + std::abs(c) + std::norm(zeta)) / (t * t);
  return out;
}

double truncated_log_potential(Complex zeta, double eps, EllipticParam param,
                               int panels_per_decade) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  constexpr double kCutoff = 1e4;
  const double lo = std::log(eps);
  const double hi = std::log(kCutoff);
  const int panels = std::max(4, static_cast<int>(std::ceil((hi - lo) / std::log(10.0) *
                                                            panels_per_decade)));
  auto integrand = [&](double u) {
    const double eta = std::exp(u);
    return eta * centred_v(zeta, eta, param, 1e-14);
  };
  const double body = composite_gauss_legendre(integrand, lo, hi, panels);
  const double tail = kCutoff * centred_v(zeta, kCutoff, param, 1e-14);
  return -(body + tail);
}

double log_potential_derivative_check(Complex zeta, double eps, EllipticParam param, double h) {
  if (!(eps > 0.0) || !(h > 0.0)) throw std::invalid_argument("eps and h must be positive");
  auto l = [&](Complex z) { return truncated_log_potential(z, eps, param); };
  const double dx = (l(zeta + h) - l(zeta - h)) / (2.0 * h);
  const double dy = (l(zeta + kI * h) - l(zeta - kI * h)) / (2.0 * h);
  const Complex d = 0.5 * (dx - kI * dy);
  const Complex b = solve_dyson(SpectralPoint::make(zeta, eps), param).b;
  return std::abs(2.0 * d + b);
}

}  // namespace ellipse
