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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ellipse/dyson.hpp"
#include "ellipse/ensemble.hpp"
#include "ellipse/harness.hpp"
#include "ellipse/linalg.hpp"
#include "ellipse/spectral.hpp"

using namespace ellipse;

namespace {

int threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Records of one statistic that pass, as a fraction.
double pass_fraction(const ExperimentReport& r, const std::string& statistic) {
  long total = 0, good = 0;
  for (const auto& rec : r.records) {
    if (rec.statistic != statistic) continue;
    ++total;
    good += rec.pass ? 1 : 0;
  }
  return total == 0 ? 0.0 : static_cast<double>(good) / total;
}

// 1
Outcome dyson_identities() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(20260101);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst_mde = 0.0, worst_id = 0.0, worst_v = -1.0;
  for (int k = 0; k < 100; ++k) {
    const Complex zeta = std::polar(10.0 * std::sqrt(unit(gen)), 2.0 * std::numbers::pi * unit(gen));
    const double eta = std::pow(10.0, -6.0 * unit(gen));
    const double rho = -0.9 + 1.8 * unit(gen);
    const SpectralPoint pt = SpectralPoint::make(zeta, eta);
    const EllipticParam p(rho);
    const DysonSolution s = solve_dyson(pt, p);
    const DysonIdentityResiduals r = identity_residuals(s, pt, p);
    worst_mde = std::max(worst_mde, r.mde);
    worst_id = std::max({worst_id, r.abs_m_squared, r.b_equation, r.v_equation});
    worst_v = std::max(worst_v, s.v - std::min(1.0, 1.0 / eta));
  }
  const double secs = seconds_since(t0);
  return {worst_mde <= 1e-10 && worst_id <= 1e-9 && worst_v <= 1e-12 && secs < 5.0,
          "max mde residual " + fmt(worst_mde) + ", max identity residual " + fmt(worst_id) +
              ", max v - min(1,1/eta) " + fmt(worst_v) + ", " + fmt(secs) + " s"};
}

// 2
Outcome closed_form() {
  double worst = 0.0;
  for (double eta : {1e-3, 0.1, 1.0, 10.0}) {
    const double want = (std::sqrt(eta * eta + 4.0) - eta) / 2.0;
    worst = std::max(worst, std::abs(solve_dyson(SpectralPoint::make(0.0, eta), EllipticParam(0.3)).v - want));
  }
  return {worst <= 1e-10, "max |v(0,eta) - closed form| " + fmt(worst)};
}

// 3
Outcome bulk_limit() {
  double worst = 0.0;
  for (double rho : {0.0, 0.5, -0.7}) {
    const EllipticParam p(rho);
    for (int k = 0; k < 10; ++k) {
      const double scale = 0.1 + 0.08 * k;  // form value scale^2 <= 0.68
      const double theta = 0.9 + 2.3 * k;
      const Complex zeta(scale * (1.0 + rho) * std::cos(theta), scale * (1.0 - rho) * std::sin(theta));
      const double v = solve_dyson(SpectralPoint::make(zeta, 1e-6), p).v;
      const double lim = v_limit_bulk(zeta, p);
      worst = std::max(worst, std::abs(v * v - lim * lim));
    }
  }
  return {worst <= 1e-3, "max |v^2 - v_limit^2| " + fmt(worst)};
}

// 4
Outcome stability() {
  double spec_err = 0.0, worst = 0.0;
  for (double rho : {0.5, -0.3}) {
    for (int i = 0; i < 20; ++i) {
      const Complex zeta = std::polar(2.0 * (i + 0.5) / 20.0, 0.3 + 0.9 * i);
      for (int j = 0; j < 20; ++j) {
        const double eta = std::pow(10.0, -4.0 + 5.0 * j / 19.0);
        const StabilityReport r = stability_analysis(SpectralPoint::make(zeta, eta), EllipticParam(rho));
        const std::array<double, 3> want{1.0, std::abs(rho), -std::abs(rho)};
        for (int k = 0; k < 3; ++k) spec_err = std::max(spec_err, std::abs(r.s_spectrum[k] - want[k]));
        worst = std::max(worst, r.inv_norm / r.bound_rhs);
      }
    }
  }
  return {spec_err <= 1e-12 && worst <= 5.0,
          "spectrum error " + fmt(spec_err) + ", max inv_norm/bound " + fmt(worst) + " over 2 x 20 x 20 points"};
}

// 5
Outcome log_potential_checks() {
  const LogPotential l0 = log_potential(0.0, EllipticParam(0.0), 1e-10);
  // independent closed form of -int_0^inf ((sqrt(eta^2+4)-eta)/2 - 1/(1+eta)) d eta
  const double frozen = -0.5;
  const double literal = 0.5 - std::log(2.0);
  const TestFunction psi(BumpKind::kPolynomial, {0.2, 0.1}, 0.0, 0.4);
  const DistributionalCheck d = log_potential_distributional_check(psi, 0.3, 1e-8);
  const double err = std::abs(l0.value - frozen);
  return {err <= 1e-4 && d.relative_error <= 1e-2,
          "L(0) = " + std::to_string(l0.value) + " vs -1/2 (err " + fmt(err) + "; listed constant 1/2 - log 2 = " +
              std::to_string(literal) + " differs by " + fmt(std::abs(l0.value - literal)) +
              "), distributional relative error " + fmt(d.relative_error)};
}

// 6
Outcome sampler_moments() {
  struct Case {
    double rho, mu;
  };
  bool pass = true;
  std::ostringstream out;
  for (Case c : {Case{0.5, 1.0}, Case{0.5, 0.5}, Case{-0.7, 1.0}}) {
    MomentAccumulator acc(EnsembleSpec{1000, c.rho, c.mu, BaseDistribution::kGaussian, 0});
    for (std::uint64_t seed = 1; seed <= 50; ++seed)
      acc.add(sample(EnsembleSpec{1000, c.rho, c.mu, BaseDistribution::kGaussian, seed}, 0, threads()));
    const MomentReport r = acc.report();
    const bool ok = r.cov_pair.within(5.0) && r.pseudo_cov.within(5.0) && r.conj_cov.within(5.0);
    pass = pass && ok;
    out << "(rho " << c.rho << ", mu " << c.mu << "): n*cov " << fmt(1000.0 * r.cov_pair.value.real()) << ", n*pseudo "
        << fmt(1000.0 * r.pseudo_cov.value.real()) << ", n*conj " << fmt(1000.0 * r.conj_cov.value.real())
        << (ok ? "" : " OUT") << "; ";
  }
  return {pass, out.str()};
}

// 7
Outcome spectral_exactness() {
  const RowMatrix x = sample(EnsembleSpec{256, 0.5, 0.5, BaseDistribution::kGaussian, 11}).entries;
  const SpectralDecomposition dec = decompose_svd(x, {0.3, 0.2});
  const double eta = 0.1;
  const BlockMatrix b = resolvent_blocks(dec, eta);
  CMatrix g(512, 512);
  g << b.b11, b.b12, b.b21, b.b22;
  const CMatrix img = (g - g.adjoint()) / Complex(0.0, 2.0);
  const double ward = (g.adjoint() * g - img / eta).cwiseAbs().maxCoeff();
  const Mat2 pt = partial_trace(dec, eta);
  const double blocks = std::abs(pt(0, 0) - pt(1, 1));

  const RowMatrix x16 = sample(EnsembleSpec{16, 0.5, 0.5, BaseDistribution::kGaussian, 12}).entries;
  const Hermitization h16 = hermitize(x16, {-0.4, 0.3});
  double trace_err = 0.0;
  for (double e : {1e-3, 0.1, 1.0}) {
    const Complex dense = dense_resolvent(h16, e).trace() / 32.0;
    trace_err = std::max(trace_err, std::abs(resolvent_trace(decompose(h16), e) - dense));
  }

  double logdet = 0.0;
  bool logdet_ok = true;
  for (int n : {8, 16, 32, 64}) {
    const RowMatrix xn = sample(EnsembleSpec{n, 0.5, 0.5, BaseDistribution::kGaussian, 13}).entries;
    const LogDetCheck c = log_det_check(decompose_svd(xn, {0.1, -0.2}, false), 1e3);
    const double d = std::abs(c.lhs - c.rhs);
    logdet = std::max(logdet, d / n);
    logdet_ok = logdet_ok && d <= 1e-6 * n;
  }
  return {ward <= 1e-9 && blocks <= 1e-9 && trace_err <= 1e-9 && logdet_ok,
          "Ward " + fmt(ward) + ", |<G11>-<G22>| " + fmt(blocks) + ", trace vs dense " + fmt(trace_err) +
              ", max log-det gap/n " + fmt(logdet)};
}

ExperimentGrid local_law_grid() {
  ExperimentGrid g;
  g.ensemble = EnsembleSpec{0, 0.5, 0.5, BaseDistribution::kGaussian, 2026};
  g.n_values = {256, 512, 1024, 2048};
  g.zeta_points = {Complex(0.3, 0.2)};
  g.betas = {0.75};
  g.trials = 20;
  g.threads = threads();
  return g;
}

// 8
Outcome averaged_law(const ExperimentReport& r) {
  bool bounded = true;
  std::vector<double> ns, medians;
  std::ostringstream out;
  for (const auto& grp : r.summary.groups) {
    if (grp.statistic != "avg") continue;
    const double cap = 10.0 / (grp.n * grp.eta);
    bounded = bounded && grp.median_error <= cap;
    ns.push_back(grp.n);
    medians.push_back(grp.median_error);
    out << "n=" << grp.n << " median " << fmt(grp.median_error) << " (n eta median " << fmt(grp.median_error * grp.n * grp.eta)
        << "); ";
  }
  const double slope = log_log_slope(ns, medians);
  const double lo = -0.75 * 1.35, hi = -0.75 * 0.65;
  const bool in_window = slope >= lo && slope <= hi;
  out << "slope " << fmt(slope) << " vs window [" << lo << ", " << hi << "]"
      << "; (1-beta)-scaled window [" << -0.25 * 1.35 << ", " << -0.25 * 0.65 << "] "
      << (slope >= -0.25 * 1.35 && slope <= -0.25 * 0.65 ? "contains" : "excludes") << " it";
  return {bounded && in_window, (bounded ? "bound holds; " : "bound violated; ") + out.str()};
}

// 9
Outcome isotropic_law(const ExperimentReport& r) {
  const double f = pass_fraction(r, "probe-sup");
  double worst = 0.0;
  for (const auto& rec : r.records)
    if (rec.statistic == "probe-sup") worst = std::max(worst, rec.error / rec.envelope);
  return {f >= 0.95, "records within 10 n^0.1/sqrt(n eta): " + fmt(100.0 * f) + "%, max error/envelope " + fmt(worst)};
}

// 10
Outcome delocalisation() {
  const EnsembleSpec spec{1024, 0.5, 0.5, BaseDistribution::kGaussian, 404};
  DelocalisationOptions opt;
  opt.trials = 10;
  opt.threads = threads();
  const ExperimentReport r = delocalisation_test(spec, delocalisation_probes(1024, 4, 7), opt);
  double worst = 0.0;
  for (const auto& rec : r.records) worst = std::max(worst, rec.error / std::sqrt(std::log(1024.0)));
  return {r.summary.failures == 0 && r.summary.records > 0,
          std::to_string(r.summary.records) + " trial-probe records, max sqrt(n) overlap / sqrt(log n) " + fmt(worst)};
}

// 11
Outcome small_singular() {
  ExperimentGrid g;
  g.ensemble = EnsembleSpec{0, 0.5, 0.5, BaseDistribution::kGaussian, 1111};
  g.n_values = {1024};
  g.zeta_points = {Complex(0.3, 0.2), Complex(-0.6, 0.1)};
  g.betas = {0.9};
  g.trials = 3;
  g.threads = threads();
  const ExperimentReport scan = small_singular_scan(g);
  double ratio = 0.0;
  for (const auto& [k, v] : scan.summary.values)
    if (k == "max_count_ratio") ratio = v;

  g.n_values = {512};
  g.zeta_points = {Complex(0.3, 0.2)};
  g.trials = 50;
  const ExperimentReport smin_scan = small_singular_scan(g);
  double smin = 0.0;
  for (const auto& [k, v] : smin_scan.summary.values)
    if (k == "min_smallest_singular_value") smin = v;
  const double floor = std::pow(512.0, -3.0);
  return {ratio <= 20.0 && smin >= floor, "max count/(n eta) " + fmt(ratio) + " at n=1024; min s_min over 50 trials " +
                                              fmt(smin) + " vs n^-3 = " + fmt(floor)};
}

// 12
Outcome linear_stats() {
  const TestFunction tf(BumpKind::kPolynomial, {0.2, 0.1}, 0.25, 1.0);
  ExperimentReport merged;
  const std::vector<std::pair<int, int>> plan{{256, 40}, {512, 20}, {1024, 10}};
  for (auto [n, trials] : plan) {
    ExperimentGrid g;
    g.ensemble = EnsembleSpec{0, 0.3, 0.5, BaseDistribution::kGaussian, 1212};
    g.n_values = {n};
    g.trials = trials;
    g.threads = threads();
    ExperimentReport r = linear_statistics(g, tf);
    merged.experiment = r.experiment;
    merged.thresholds = r.thresholds;
    merged.records.insert(merged.records.end(), r.records.begin(), r.records.end());
  }
  merged.finalize("rms");
  std::ostringstream out;
  for (const auto& grp : merged.summary.groups)
    out << "n=" << grp.n << " rms " << fmt(grp.rms_error) << " max " << fmt(grp.max_error) << " envelope "
        << fmt(grp.envelope) << "; ";
  double slope = std::nan("");
  for (const auto& s : merged.summary.slopes)
    if (s.points >= 2) slope = s.slope_vs_n;
  out << "rms decay exponent " << fmt(slope) << " (<= -0.3 required)";
  return {merged.summary.failures == 0 && slope <= -0.3, out.str()};
}

// 13
Outcome girko() {
  const TestFunction tf(BumpKind::kPolynomial, {0.1, 0.05}, 0.0, 0.8);
  double worst = 0.0;
  for (std::uint64_t seed : {31u, 32u}) {
    const RowMatrix x = sample(EnsembleSpec{16, 0.4, 0.5, BaseDistribution::kGaussian, seed}).entries;
    worst = std::max(worst, girko_consistency(x, tf, 1e-6).difference);
  }
  return {worst <= 1e-3, "max |lhs - rhs| over 2 matrices " + fmt(worst)};
}

// 14
Outcome monte_carlo() {
  const EllipseRegion omega(0.5, 0.1);
  const double a = omega.semi_axis_re(), b = omega.semi_axis_im();
  const CoverageResult q = monte_carlo_coverage([](Complex z) { return Complex(std::norm(z), 0.0); },
                                                (a * a + b * b) / 4.0, omega, 100, 0.1, 1000, 1414);
  const CoverageResult r = monte_carlo_coverage([](Complex z) { return Complex(z.real(), z.imag() * z.imag()); },
                                                Complex(0.0, b * b / 4.0), omega, 100, 0.1, 1000, 1415);
  return {q.frequency <= 0.1 && r.frequency <= 0.1,
          "violation frequency " + fmt(q.frequency) + " (|z|^2), " + fmt(r.frequency) + " (Re z + i (Im z)^2)"};
}

// 15
Outcome error_matrix() {
  ExperimentGrid g;
  g.ensemble = EnsembleSpec{0, 0.5, 0.5, BaseDistribution::kGaussian, 1515};
  g.n_values = {1024};
  g.zeta_points = {Complex(0.3, 0.2)};
  g.betas = {0.7};
  g.trials = 20;
  g.threads = threads();
  const ExperimentReport r = error_matrix_experiment(g, ProbeFamily{});
  const double iso = pass_fraction(r, "iso"), avg = pass_fraction(r, "avg");
  double worst_iso = 0.0, worst_avg = 0.0;
  for (const auto& rec : r.records)
    (rec.statistic == "iso" ? worst_iso : worst_avg) =
        std::max(rec.statistic == "iso" ? worst_iso : worst_avg, rec.error / rec.envelope);
  return {iso >= 0.95 && avg >= 0.95, "iso within envelope " + fmt(100.0 * iso) + "% (max ratio " + fmt(worst_iso) +
                                          "), avg " + fmt(100.0 * avg) + "% (max ratio " + fmt(worst_avg) + ")"};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int id, const std::string& title, const std::function<Outcome()>& run) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << title << " [" << fmt(seconds_since(t0)) << " s]: "
              << o.detail << std::endl;
  };

  report(1, "Dyson identity suite", dyson_identities);
  report(2, "closed form at zeta = 0", closed_form);
  report(3, "bulk limit of v", bulk_limit);
  report(4, "stability operator", stability);
  report(5, "log-potential", log_potential_checks);
  report(6, "sampler moments", sampler_moments);
  report(7, "spectral engine exactness", spectral_exactness);

  LocalLawReports laws;
  bool laws_ok = true;
  std::string laws_error;
  const auto t_laws = std::chrono::steady_clock::now();
  try {
    ExperimentGrid g = local_law_grid();
    laws = local_law_experiment(g, ProbeFamily{6, 7});
  } catch (const std::exception& e) {
    laws_ok = false;
    laws_error = e.what();
  }
  std::cout << "      (local-law grid: " << fmt(seconds_since(t_laws)) << " s)" << std::endl;
  report(8, "averaged local law", [&]() -> Outcome {
    if (!laws_ok) return {false, "exception: " + laws_error};
    return averaged_law(laws.averaged);
  });
  report(9, "isotropic local law", [&]() -> Outcome {
    if (!laws_ok) return {false, "exception: " + laws_error};
    return isotropic_law(laws.isotropic);
  });
  report(10, "delocalisation", delocalisation);
  report(11, "small singular values", small_singular);
  report(12, "linear statistics", linear_stats);
  report(13, "Girko identity", girko);
  report(14, "Monte Carlo coverage", monte_carlo);
  report(15, "error matrix", error_matrix);

  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
