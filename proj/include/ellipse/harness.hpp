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

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ellipse/common.hpp"
#include "ellipse/dyson.hpp"
#include "ellipse/ensemble.hpp"
#include "ellipse/quadrature.hpp"
#include "ellipse/rng.hpp"
#include "ellipse/spectral.hpp"

namespace ellipse {

/// Fixed reproducible stand-ins for the "n^eps, constant C" quantifiers.
struct Thresholds {
  double epsilon = 0.1;
  double constant = 10.0;
  /// Summary passes when at least this fraction of records pass.
  double pass_fraction = 1.0;
  /// Optional window for the fitted log-log slope (NaN disables a side).
  double slope_min = std::numeric_limits<double>::quiet_NaN();
  double slope_max = std::numeric_limits<double>::quiet_NaN();
  /// Regressor for the slope fit: "n" or "n_eta".
  std::string slope_against = "n";
};

struct ExperimentGrid {
  EnsembleSpec ensemble;  ///< n is taken from n_values
  std::vector<int> n_values;
  std::vector<Complex> zeta_points;
  std::vector<double> betas;  ///< eta = n^{-beta}
  int trials = 1;
  double delta = 0.1;
  int threads = 1;
  Thresholds thresholds;

  static double eta(int n, double beta);
  /// Throws std::invalid_argument; with `bulk`, every zeta must lie in E_{rho,delta}.
  void validate(bool bulk = true) const;
};

struct ExperimentRecord {
  int n = 0;
  Complex zeta{};
  double eta = 0.0;
  int trial = 0;
  std::string statistic;  ///< e.g. "avg", "probe-sup", "count/(n eta)"
  double error = 0.0;
  double envelope = 0.0;
  bool pass = false;
  std::vector<std::pair<std::string, double>> metrics;

  double metric(const std::string& name) const;  ///< NaN when absent
};

struct SlopeFit {
  std::string series;  ///< "statistic zeta=... beta=..."
  double slope_vs_n = std::numeric_limits<double>::quiet_NaN();
  double slope_vs_n_eta = std::numeric_limits<double>::quiet_NaN();
  int points = 0;
};

struct GroupSummary {
  int n = 0;
  Complex zeta{};
  double eta = 0.0;
  std::string statistic;
  long records = 0;
  long failures = 0;
  double median_error = 0.0;
  double rms_error = 0.0;
  double max_error = 0.0;
  double envelope = 0.0;
};

struct ExperimentSummary {
  long records = 0;
  long failures = 0;
  double empirical_constant = 0.0;  ///< max error / envelope
  std::vector<GroupSummary> groups;
  std::vector<SlopeFit> slopes;
  std::vector<std::pair<std::string, double>> values;
  std::vector<std::string> notes;
  bool pass = true;
};

struct ExperimentReport {
  std::string experiment;
  Thresholds thresholds;
  std::vector<ExperimentRecord> records;
  ExperimentSummary summary;

  /// Sorts records by (n, zeta, eta, trial, statistic) and recomputes the summary.
  /// `central` is "median" or "rms", the per-group statistic used for slopes.
  void finalize(const std::string& central = "median");

  void write_jsonl(std::ostream& out) const;
  std::string summary_json() const;
};

/// Runs task(i) for i in [0, count) on `threads` workers. Exceptions are rethrown
/// on the calling thread (first by index).
void run_tasks(std::size_t count, int threads, const std::function<void(std::size_t)>& task);

/// Least-squares slope of log y against log x.
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

// Local laws.

/// Probe pairs built from standard_probes(n, k_random, seed): each probe with itself
/// and with its cyclic successor.
std::vector<std::pair<CVector, CVector>> probe_pairs(int n, int k_random, std::uint64_t seed);

struct ProbeFamily {
  int k_random = 6;
  std::uint64_t seed = 7;
};

/// |<G> - i v| against n^eps/(n eta); statistic "avg".
ExperimentReport averaged_local_law(const ExperimentGrid& grid);

/// probe-sup |<x,(G-M)y>| against n^eps/sqrt(n eta) (statistic "probe-sup") and
/// max_B |<B(G-M)>| against n^eps/(n eta) over standard_test_matrices (statistic "avg-test").
ExperimentReport isotropic_local_law(const ExperimentGrid& grid, const ProbeFamily& probes = {});

struct LocalLawReports {
  ExperimentReport averaged;
  ExperimentReport isotropic;
};

/// Both reports from a single decomposition per (n, trial, zeta).
LocalLawReports local_law_experiment(const ExperimentGrid& grid, const ProbeFamily& probes);

/// Norms of D = (W + S^[G])G; statistics "iso" against n^eps sqrt(<Im G>/(n eta)) and
/// "avg" against n^eps <Im G>/(n eta).
ExperimentReport error_matrix_experiment(const ExperimentGrid& grid, const ProbeFamily& probes);

// Eigenvector delocalisation.

struct NamedVector {
  std::string name;
  CVector vector;
};

/// e_1, uniform, alternating, then k seeded Haar vectors in C^n.
std::vector<NamedVector> delocalisation_probes(int n, int k_random, std::uint64_t seed);

struct DelocalisationOptions {
  int trials = 1;
  double delta = 0.1;
  int threads = 1;
  Thresholds thresholds;
  double residual_gate = 1e-6;
};

/// sqrt(n) max |<w,u>|/(|w||u|) over eigenvectors u of X with eigenvalue in
/// E_{rho,delta}, against sqrt(log n). Eigenvectors failing the residual gate are
/// excluded from the maximum and counted in the "flagged" metric.
ExperimentReport delocalisation_test(const EnsembleSpec& spec, const std::vector<NamedVector>& w_probes,
                                     const DelocalisationOptions& options);

// Linear statistics.

enum class BumpKind { kGaussian, kPolynomial };

std::string to_string(BumpKind k);
BumpKind parse_bump(const std::string& name);

/// Radial bump f(w) = amplitude g(|w|^2/R^2), zero for |w| >= R, and its rescaling
/// f_{zeta0,alpha}(zeta) = n^{2 alpha} f(n^alpha (zeta - zeta0)).
/// polynomial-bump: g(s) = (1-s)^3 (C^2). gaussian-bump: g(s) = exp(1 - 1/(1-s)) (C^inf).
class TestFunction {
 public:
  TestFunction(BumpKind kind, Complex center, double alpha, double radius = 1.0,
               double amplitude = 1.0);

  BumpKind kind() const { return kind_; }
  Complex center() const { return center_; }
  double alpha() const { return alpha_; }
  double radius() const { return radius_; }
  double amplitude() const { return amplitude_; }
  /// f(zeta) = 0 for |zeta| >= phi.
  double phi() const { return radius_; }

  double base(Complex w) const;
  double base_laplacian(Complex w) const;
  double operator()(Complex zeta, int n) const;
  double laplacian(Complex zeta, int n) const;
  double support_radius(int n) const;

  double integral() const;  ///< int f = int f_{zeta0,alpha}
  double laplacian_l1() const;
  double laplacian_lp(double p) const;
  /// |Delta f|_{L^{2+a}} <= n^D |Delta f|_{L^1}
  bool norm_condition(int n, double a, int d) const;

 private:
  double g(double s) const;
  double lap_profile(double s) const;  ///< s g'' + g'
  std::vector<double> profile_breaks() const;
  double profile_integral(const std::function<double(double)>& h) const;
  BumpKind kind_;
  Complex center_;
  double alpha_;
  double radius_;
  double amplitude_;
};

/// int f_{zeta0,alpha} sigma_rho, with the support clipped to the ellipse by exact
/// boundary subdivision in y.
double integrate_against_density(const TestFunction& tf, int n, double rho, double tol = 1e-10);

/// (1/n) sum_xi f_{zeta0,alpha}(xi) - int f sigma against n^{-1+2 alpha+eps}|Delta f|_1.
/// Grid zeta_points and betas are ignored; the bump centre must lie in E_{rho,delta}.
ExperimentReport linear_statistics(const ExperimentGrid& grid, const TestFunction& tf);

struct GirkoResult {
  double lhs = 0.0;  ///< (1/n) sum f(xi)
  double rhs = 0.0;  ///< (1/4 pi n) int Delta f log|det H_zeta|
  double difference = 0.0;
  double quadrature_error = 0.0;
  long evaluations = 0;
  int excluded = 0;  ///< eigenvalues inside the support with an exclusion disk
};

/// Checks Girko's formula for one matrix with LU log-determinants on an adaptive mesh.
GirkoResult girko_consistency(const RowMatrix& x, const TestFunction& tf, double quad_tol = 1e-6,
                              double exclusion_radius = 1e-4);

struct DistributionalCheck {
  double lhs = 0.0;  ///< (1/2 pi) int Delta psi L
  double rhs = 0.0;  ///< int psi sigma
  double relative_error = 0.0;
};

/// Distributional identity of the log-potential for a bump psi (taken at n = 1).
DistributionalCheck log_potential_distributional_check(const TestFunction& psi, double rho,
                                                       double quad_tol = 1e-6);

// Monte Carlo.

struct MonteCarloEstimate {
  Complex estimate{};
  double bound = 0.0;     ///< (1/sqrt(m delta)) sqrt(empirical variance)
  double variance = 0.0;  ///< (1/m) sum |F - mean|^2
};

/// Uniform point on the region, from one substream.
Complex uniform_in_region(const EllipseRegion& region, Substream& stream);

MonteCarloEstimate monte_carlo_estimate(const std::function<Complex(Complex)>& f,
                                        const EllipseRegion& omega, int m, double delta,
                                        std::uint64_t seed, std::uint64_t repetition = 0);

struct CoverageResult {
  int repetitions = 0;
  int violations = 0;
  double frequency = 0.0;
};

/// Frequency over repetitions of |estimate - exact| > bound.
CoverageResult monte_carlo_coverage(const std::function<Complex(Complex)>& f, Complex exact,
                                    const EllipseRegion& omega, int m, double delta, int repetitions,
                                    std::uint64_t seed);

// Small singular values.

/// Dyadic eta_k = n^{-beta} 2^k up to 1 for every beta; statistic "count/(n eta)"
/// against 1, with the smallest singular value in metric "s_min".
ExperimentReport small_singular_scan(const ExperimentGrid& grid);

// Density maps.

struct DensityMap {
  Box box{};
  int nx = 0, ny = 0;
  long total = 0;
  std::vector<long> counts;   ///< row-major, y outer
  long outside_box = 0;
  std::vector<double> sigma;  ///< sigma_rho at cell centres
  double mass_inside_ellipse = 0.0;
  double angular_chi2 = 0.0;
  double angular_p_value = 0.0;
  int angular_sectors = 0;

  double mass(int ix, int iy) const;
  void write_csv(std::ostream& out) const;
};

/// Histogram of eigenvalues of `trials` matrices over a box containing the ellipse.
DensityMap density_map(const EnsembleSpec& spec, int resolution, int trials = 1, int threads = 1,
                       int angular_sectors = 16);

/// sigma_rho on a resolution x resolution grid over the same box, for CSV export.
DensityMap density_field(double rho, int resolution);

}  // namespace ellipse
