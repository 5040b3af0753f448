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

// Command-line front end. Exit codes: 0 pass, 1 experiment assertion failure,
// 2 usage or config error, 3 numerical failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "ellipse/dyson.hpp"
#include "ellipse/ensemble.hpp"
#include "ellipse/harness.hpp"
#include "ellipse/linalg.hpp"
#include "json.hpp"
#include "run_config.hpp"

using namespace ellipse;
using namespace ellipse::cli;
using nlohmann::json;

namespace {

struct Common {
  int threads = std::max(1u, std::thread::hardware_concurrency());
  std::uint64_t seed = 1;
  std::string out_dir = default_output_dir();
  std::string format = "jsonl";
};

struct EnsembleFlags {
  double rho = 0.5;
  double mu = 0.5;
  std::string base = "gaussian";
};

void add_ensemble(CLI::App* c, EnsembleFlags& e) {
  c->add_option("--rho", e.rho, "entry correlation rho, |rho| < 1")->capture_default_str();
  c->add_option("--mu", e.mu, "real-part variance share mu in [0, 1]")->capture_default_str();
  c->add_option("--base", e.base, "gaussian | rademacher-mixture")->capture_default_str();
}

void add_thresholds(CLI::App* c, Thresholds& t) {
  c->add_option("--epsilon", t.epsilon, "exponent eps in the n^eps envelope")->capture_default_str();
  c->add_option("--constant", t.constant, "empirical constant multiplying the envelope")
      ->capture_default_str();
  c->add_option("--pass-fraction", t.pass_fraction, "fraction of records that must pass")
      ->capture_default_str();
  c->add_option("--slope-min", t.slope_min, "lower end of the slope window");
  c->add_option("--slope-max", t.slope_max, "upper end of the slope window");
  c->add_option("--slope-against", t.slope_against, "slope regressor: n | n_eta")->capture_default_str();
}

RunConfig run_from(const Common& c, const EnsembleFlags& e) {
  RunConfig r;
  r.ensemble = EnsembleSpec{0, e.rho, e.mu, parse_base(e.base), c.seed};
  r.output_dir = c.out_dir;
  r.format = c.format;
  r.threads = c.threads;
  return r;
}

std::vector<Complex> parse_list(const std::vector<std::string>& v) {
  std::vector<Complex> out;
  for (const auto& s : v) out.push_back(parse_complex(s));
  return out;
}

void print_outcome(const ExperimentOutcome& o) {
  for (const auto& r : o.reports) {
    std::cout << r.experiment << ": " << (r.summary.pass ? "PASS" : "FAIL") << " (" << r.summary.records
              << " records, " << r.summary.failures << " above envelope, empirical constant "
              << r.summary.empirical_constant << ")\n";
    for (const auto& s : r.summary.slopes)
      if (s.points >= 2)
        std::cout << "  slope " << s.series << ": vs n " << s.slope_vs_n << ", vs n*eta " << s.slope_vs_n_eta
                  << '\n';
    for (const auto& n : r.summary.notes) std::cout << "  note: " << n << '\n';
  }
  for (const auto& f : o.files) std::cout << "  wrote " << f << '\n';
}

int run_single(const RunConfig& run, const ExperimentConfig& exp) {
  const ExperimentOutcome o = run_experiment(run, exp);
  print_outcome(o);
  return o.pass ? kPass : kFail;
}

json solution_json(const DysonSolution& s, const DysonIdentityResiduals& r) {
  return {{"v", s.v},
          {"b", format_complex(s.b)},
          {"residual", s.residual},
          {"iterations", s.iterations},
          {"used_fallback", s.used_fallback},
          {"identity_residuals",
           {{"mde", r.mde}, {"abs_m_squared", r.abs_m_squared}, {"b_equation", r.b_equation}, {"v_equation", r.v_equation}}}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Elliptic random matrix toolkit: Dyson equation, sampling, spectra and local-law experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--threads", common.threads, "worker threads (default: logical cores)")->capture_default_str();
  app.add_option("--seed", common.seed, "ensemble seed")->capture_default_str();
  app.add_option("--out-dir", common.out_dir, "output directory (default: $ELLIPSE_OUT_DIR or ellipse_out)")
      ->capture_default_str();
  app.add_option("--format", common.format, "record file format: jsonl | csv")
      ->check(CLI::IsMember({"jsonl", "csv"}))
      ->capture_default_str();

  std::function<int()> action;

  // solve-dyson
  std::string zeta_s = "0";
  double eta = 1.0, rho = 0.0, tol = 1e-12;
  auto* solve = app.add_subcommand("solve-dyson", "solve the 2x2 Dyson equation at (zeta, eta)");
  solve->add_option("--zeta", zeta_s, "spectral parameter, e.g. 0.3+0.2i")->required();
  solve->add_option("--eta", eta, "imaginary spectral parameter, > 0")->required();
  solve->add_option("--rho", rho, "entry correlation")->capture_default_str();
  solve->add_option("--tol", tol, "residual tolerance")->capture_default_str();
  solve->callback([&] {
    action = [&] {
      const EllipticParam p(rho);
      const SpectralPoint pt = SpectralPoint::make(parse_complex(zeta_s), eta);
      DysonOptions opt;
      opt.tol = tol;
      const DysonSolution s = solve_dyson(pt, p, opt);
      std::cout << solution_json(s, identity_residuals(s, pt, p)).dump(2) << '\n';
      return kPass;
    };
  });

  // stability
  auto* stab = app.add_subcommand("stability", "stability operator spectrum and inverse bound");
  stab->add_option("--zeta", zeta_s, "spectral parameter")->required();
  stab->add_option("--eta", eta, "imaginary spectral parameter, > 0")->required();
  stab->add_option("--rho", rho, "entry correlation")->capture_default_str();
  stab->callback([&] {
    action = [&] {
      const StabilityReport r = stability_analysis(SpectralPoint::make(parse_complex(zeta_s), eta), EllipticParam(rho));
      std::cout << json{{"s_spectrum", r.s_spectrum},
                        {"gap", r.gap},
                        {"inv_norm", r.inv_norm},
                        {"bound_rhs", r.bound_rhs},
                        {"ratio", r.inv_norm / r.bound_rhs},
                        {"e_minus_leak", r.e_minus_leak}}
                       .dump(2)
                << '\n';
      return kPass;
    };
  });

  // log-potential
  double lp_tol = 1e-10;
  auto* logp = app.add_subcommand("log-potential", "L(zeta) = -int_0^inf (v - 1/(1+eta)) d eta");
  logp->add_option("--zeta", zeta_s, "point in the plane")->required();
  logp->add_option("--rho", rho, "entry correlation")->capture_default_str();
  logp->add_option("--tol", lp_tol, "quadrature tolerance")->capture_default_str();
  logp->callback([&] {
    action = [&] {
      const LogPotential l = log_potential(parse_complex(zeta_s), EllipticParam(rho), lp_tol);
      std::cout << json{{"value", l.value}, {"error_bound", l.error_bound}, {"tail", l.tail}, {"evaluations", l.evaluations}}
                       .dump(2)
                << '\n';
      return kPass;
    };
  });

  // density
  int resolution = 128;
  std::string out_file;
  auto* dens = app.add_subcommand("density", "CSV field of the limiting density sigma_rho");
  dens->add_option("--rho", rho, "entry correlation")->capture_default_str();
  dens->add_option("--resolution", resolution, "grid cells per axis")->capture_default_str();
  dens->add_option("--out", out_file, "CSV path (default: <out-dir>/density_field.csv)");
  dens->callback([&] {
    action = [&] {
      const DensityMap d = density_field(rho, resolution);
      std::filesystem::create_directories(common.out_dir);
      const std::string path = out_file.empty() ? (std::filesystem::path(common.out_dir) / "density_field.csv").string() : out_file;
      std::ofstream out(path);
      if (!out) throw std::runtime_error("cannot write " + path);
      d.write_csv(out);
      const double cell = (d.box.x1 - d.box.x0) / d.nx;
      double mass = 0.0;
      for (double s : d.sigma) mass += s * cell * cell;
      std::cout << json{{"file", path}, {"mass", mass}}.dump(2) << '\n';
      return kPass;
    };
  });

  // sample
  EnsembleFlags ens;
  int n = 256;
  std::uint64_t trial = 0;
  auto* samp = app.add_subcommand("sample", "draw one matrix, dump it and report entry moments");
  samp->add_option("--n", n, "dimension")->capture_default_str();
  add_ensemble(samp, ens);
  samp->add_option("--trial", trial, "trial index")->capture_default_str();
  samp->add_option("--out", out_file, "dump path (default: <out-dir>/matrix.ellm)");
  samp->callback([&] {
    action = [&] {
      EnsembleSpec spec{n, ens.rho, ens.mu, parse_base(ens.base), common.seed};
      const EllipticMatrix m = sample(spec, trial, common.threads);
      std::filesystem::create_directories(common.out_dir);
      const std::string path = out_file.empty() ? (std::filesystem::path(common.out_dir) / "matrix.ellm").string() : out_file;
      write_matrix(path, m);
      const MomentReport r = moment_self_test(m);
      auto stat = [](const MomentStat& s) {
        return json{{"value", format_complex(s.value)}, {"target", format_complex(s.target)}, {"std_error", format_complex(s.std_error)}};
      };
      std::cout << json{{"file", path},
                        {"pairs", r.pairs},
                        {"mean_offdiag", stat(r.mean_offdiag)},
                        {"var_offdiag", stat(r.var_offdiag)},
                        {"cov_pair", stat(r.cov_pair)},
                        {"pseudo_cov", stat(r.pseudo_cov)},
                        {"conj_cov", stat(r.conj_cov)},
                        {"flagged", r.flagged}}
                       .dump(2)
                << '\n';
      return r.flagged.empty() ? kPass : kFail;
    };
  });

  // spectrum
  int histogram = 0;
  auto* spec_cmd = app.add_subcommand("spectrum", "eigenvalues of one matrix as CSV, optionally a histogram");
  spec_cmd->add_option("--n", n, "dimension")->capture_default_str();
  add_ensemble(spec_cmd, ens);
  spec_cmd->add_option("--trial", trial, "trial index")->capture_default_str();
  spec_cmd->add_option("--histogram", histogram, "also write a density map with this many cells per axis");
  spec_cmd->add_option("--out", out_file, "eigenvalue CSV path (default: <out-dir>/spectrum.csv)");
  spec_cmd->callback([&] {
    action = [&] {
      EnsembleSpec spec{n, ens.rho, ens.mu, parse_base(ens.base), common.seed};
      spec.validate();
      std::filesystem::create_directories(common.out_dir);
      const std::string path = out_file.empty() ? (std::filesystem::path(common.out_dir) / "spectrum.csv").string() : out_file;
      const GeneralEig eig = general_eig(CMatrix(sample(spec, trial, common.threads).entries), false);
      std::ofstream out(path);
      if (!out) throw std::runtime_error("cannot write " + path);
      out.precision(17);
      out << "re,im\n";
      for (Eigen::Index k = 0; k < eig.values.size(); ++k) out << eig.values(k).real() << ',' << eig.values(k).imag() << '\n';
      std::cout << "wrote " << path << '\n';
      if (histogram > 0) {
        const DensityMap d = density_map(spec, histogram, 1, common.threads);
        const std::string hp = (std::filesystem::path(common.out_dir) / "spectrum_density.csv").string();
        std::ofstream h(hp);
        d.write_csv(h);
        std::cout << "wrote " << hp << " (mass inside ellipse " << d.mass_inside_ellipse << ")\n";
      }
      return kPass;
    };
  });

  // grid experiments
  std::vector<int> n_values{256};
  std::vector<std::string> zetas{"0.3+0.2i"};
  std::vector<double> betas{0.75};
  ExperimentConfig exp;
  auto add_grid = [&](CLI::App* c, bool with_eta) {
    c->add_option("--n", n_values, "dimensions")->capture_default_str();
    c->add_option("--zeta", zetas, "bulk spectral parameters")->capture_default_str();
    if (with_eta) c->add_option("--beta", betas, "eta = n^-beta exponents")->capture_default_str();
    c->add_option("--trials", exp.trials, "trials per dimension")->capture_default_str();
    c->add_option("--delta", exp.delta, "bulk margin")->capture_default_str();
    add_ensemble(c, ens);
    add_thresholds(c, exp.thresholds);
  };
  auto grid_action = [&](const std::string& type) {
    return [&, type] {
      action = [&, type] {
        exp.type = type;
        exp.n_values = n_values;
        exp.zeta = parse_list(zetas);
        exp.beta = betas;
        return run_single(run_from(common, ens), exp);
      };
    };
  };

  auto* ll = app.add_subcommand("local-law", "averaged local law |<G> - iv| against n^eps/(n eta)");
  add_grid(ll, true);
  ll->callback(grid_action("averaged_local_law"));

  auto* iso = app.add_subcommand("iso-law", "isotropic local law over a probe family, plus test-matrix averages");
  add_grid(iso, true);
  iso->add_option("--probes", exp.random_probes, "random Haar probes added to the fixed ones")->capture_default_str();
  iso->add_option("--probe-seed", exp.probe_seed, "seed of the probe family")->capture_default_str();
  iso->callback(grid_action("isotropic_local_law"));

  auto* ssv = app.add_subcommand("ssv-scan", "dyadic small-singular-value counts count/(n eta)");
  add_grid(ssv, true);
  ssv->callback([&] {
    if (ssv->count("--beta") == 0) betas = {0.9};
    if (ssv->count("--constant") == 0) exp.thresholds.constant = 20.0;
    grid_action("small_singular_scan")();
  });

  auto* deloc = app.add_subcommand("deloc", "eigenvector delocalisation against fixed probes");
  deloc->add_option("--n", n_values, "dimensions")->capture_default_str();
  deloc->add_option("--trials", exp.trials, "trials")->capture_default_str();
  deloc->add_option("--delta", exp.delta, "bulk margin")->capture_default_str();
  deloc->add_option("--probes", exp.random_probes, "random Haar probes")->capture_default_str();
  deloc->add_option("--probe-seed", exp.probe_seed, "seed of the probe family")->capture_default_str();
  add_ensemble(deloc, ens);
  add_thresholds(deloc, exp.thresholds);
  deloc->callback(grid_action("delocalisation"));

  std::string center = "0.2+0.1i";
  auto add_function = [&](CLI::App* c) {
    c->add_option("--kind", exp.function_kind, "polynomial-bump | gaussian-bump")->capture_default_str();
    c->add_option("--center", center, "bump centre")->capture_default_str();
    c->add_option("--alpha", exp.alpha, "scale exponent in [0, 1/2)")->capture_default_str();
    c->add_option("--radius", exp.radius, "support radius of the unscaled bump")->capture_default_str();
  };
  auto* lin = app.add_subcommand("linstats", "mesoscopic linear statistics against the elliptic law");
  add_grid(lin, false);
  add_function(lin);
  lin->callback([&] {
    exp.center = parse_complex(center);
    grid_action("linear_statistics")();
  });

  auto* girko = app.add_subcommand("girko-check", "Girko's formula with exact log-determinants");
  girko->add_option("--n", n_values, "dimensions (<= 64 recommended)")->capture_default_str();
  girko->add_option("--trials", exp.trials, "matrices per dimension")->capture_default_str();
  girko->add_option("--tol", exp.quad_tol, "quadrature tolerance")->capture_default_str();
  girko->add_option("--max-difference", exp.tolerance, "pass threshold for |lhs - rhs|")->capture_default_str();
  add_ensemble(girko, ens);
  add_function(girko);
  girko->callback([&] {
    if (girko->count("--n") == 0) n_values = {16};
    exp.center = parse_complex(center);
    grid_action("girko")();
  });

  auto* mc = app.add_subcommand("mc-check", "Monte Carlo estimator coverage on an ellipse");
  mc->add_option("--m", exp.m, "samples per estimate")->capture_default_str();
  mc->add_option("--delta", exp.mc_delta, "failure probability of the bound")->capture_default_str();
  mc->add_option("--reps", exp.repetitions, "repetitions")->capture_default_str();
  mc->add_option("--region-delta", exp.delta, "margin of the region E_{rho,delta}")->capture_default_str();
  mc->add_option("--function", exp.mc_function, "quadratic | real-part | constant")->capture_default_str();
  add_ensemble(mc, ens);
  mc->callback(grid_action("monte_carlo"));

  std::string config_path;
  std::optional<std::uint64_t> seed_override;
  auto* ex = app.add_subcommand("experiment", "run every experiment of a JSON config");
  ex->add_option("--config", config_path, "config file")->required();
  ex->add_option("--seed-override", seed_override, "replace the ensemble seed of the config");
  ex->callback([&] {
    action = [&] {
      RunConfig run = load_config(config_path);
      if (seed_override) run.ensemble.seed = *seed_override;
      if (app.count("--seed")) run.ensemble.seed = common.seed;
      if (app.count("--out-dir") || std::getenv("ELLIPSE_OUT_DIR")) run.output_dir = common.out_dir;
      if (app.count("--threads")) run.threads = common.threads;
      if (app.count("--format")) run.format = common.format;
      bool pass = true;
      for (const auto& e : run.experiments) {
        const ExperimentOutcome o = run_experiment(run, e);
        print_outcome(o);
        pass = pass && o.pass;
      }
      std::cout << (pass ? "all experiments passed" : "some experiments failed") << '\n';
      return pass ? kPass : kFail;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kUsage;
  }
  try {
    return action();
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  }
}
