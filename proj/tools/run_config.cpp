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

#include "run_config.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <stdexcept>

namespace ellipse::cli {
namespace {

using nlohmann::json;

json nullable(double x) { return std::isnan(x) ? json(nullptr) : json(x); }

double read_nullable(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (j.at(key).is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.at(key).get<double>();
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::vector<std::string> complex_strings(const std::vector<Complex>& v) {
  std::vector<std::string> out;
  for (Complex z : v) out.push_back(format_complex(z));
  return out;
}

std::vector<Complex> parse_complex_list(const json& j) {
  std::vector<Complex> out;
  for (const auto& s : j) out.push_back(parse_complex(s.get<std::string>()));
  return out;
}

json thresholds_json(const Thresholds& t) {
  return {{"epsilon", t.epsilon},
          {"constant", t.constant},
          {"pass_fraction", t.pass_fraction},
          {"slope_min", nullable(t.slope_min)},
          {"slope_max", nullable(t.slope_max)},
          {"slope_against", t.slope_against}};
}

Thresholds thresholds_from(const json& j, Thresholds t) {
  read(j, "epsilon", t.epsilon);
  read(j, "constant", t.constant);
  read(j, "pass_fraction", t.pass_fraction);
  t.slope_min = read_nullable(j, "slope_min", t.slope_min);
  t.slope_max = read_nullable(j, "slope_max", t.slope_max);
  read(j, "slope_against", t.slope_against);
  if (t.slope_against != "n" && t.slope_against != "n_eta")
    throw std::invalid_argument("slope_against must be \"n\" or \"n_eta\"");
  if (!(t.pass_fraction >= 0.0 && t.pass_fraction <= 1.0))
    throw std::invalid_argument("pass_fraction must lie in [0, 1]");
  return t;
}

ExperimentGrid make_grid(const RunConfig& run, const ExperimentConfig& e) {
  ExperimentGrid g;
  g.ensemble = run.ensemble;
  g.n_values = e.n_values;
  g.zeta_points = e.zeta;
  g.betas = e.beta;
  g.trials = e.trials;
  g.delta = e.delta;
  g.threads = run.threads;
  g.thresholds = e.thresholds;
  return g;
}

TestFunction make_function(const ExperimentConfig& e) {
  return TestFunction(parse_bump(e.function_kind), e.center, e.alpha, e.radius);
}

EnsembleSpec first_spec(const RunConfig& run, const ExperimentConfig& e) {
  if (e.n_values.empty()) throw std::invalid_argument(e.type + " needs n_values");
  EnsembleSpec s = run.ensemble;
  s.n = e.n_values.front();
  s.validate();
  return s;
}

ExperimentRecord scalar_record(int n, int trial, const std::string& stat, double error,
                               double envelope) {
  ExperimentRecord r;
  r.n = n;
  r.trial = trial;
  r.statistic = stat;
  r.error = error;
  r.envelope = envelope;
  r.pass = error <= envelope;
  return r;
}

std::vector<ExperimentReport> dispatch(const RunConfig& run, const ExperimentConfig& e,
                                       std::vector<std::string>& extra_files) {
  const std::string& t = e.type;
  if (t == "averaged_local_law") return {averaged_local_law(make_grid(run, e))};
  if (t == "isotropic_local_law") {
    auto both = local_law_experiment(make_grid(run, e), {e.random_probes, e.probe_seed});
    return {both.averaged, both.isotropic};
  }
  if (t == "error_matrix") return {error_matrix_experiment(make_grid(run, e), {e.random_probes, e.probe_seed})};
  if (t == "small_singular_scan") return {small_singular_scan(make_grid(run, e))};
  if (t == "linear_statistics") return {linear_statistics(make_grid(run, e), make_function(e))};
  if (t == "delocalisation") {
    std::vector<ExperimentReport> out;
    for (int n : e.n_values) {
      EnsembleSpec s = run.ensemble;
      s.n = n;
      DelocalisationOptions opt;
      opt.trials = e.trials;
      opt.delta = e.delta;
      opt.threads = run.threads;
      opt.thresholds = e.thresholds;
      out.push_back(delocalisation_test(s, delocalisation_probes(n, e.random_probes, e.probe_seed), opt));
    }
    if (out.size() > 1) {
      for (std::size_t i = 1; i < out.size(); ++i)
        for (auto& r : out[i].records) out[0].records.push_back(r);
      out[0].finalize("median");
      out.resize(1);
    }
    return out;
  }
  if (t == "girko") {
    const TestFunction f = make_function(e);
    ExperimentReport rep;
    rep.experiment = "girko";
    rep.thresholds = e.thresholds;
    for (int n : e.n_values) {
      EnsembleSpec s = run.ensemble;
      s.n = n;
      s.validate();
      for (int k = 0; k < e.trials; ++k) {
        const GirkoResult g = girko_consistency(sample(s, k).entries, f, e.quad_tol);
        auto r = scalar_record(n, k, "girko-difference", g.difference, e.tolerance);
        r.zeta = e.center;
        r.metrics = {{"lhs", g.lhs},
                     {"rhs", g.rhs},
                     {"quadrature_error", g.quadrature_error},
                     {"evaluations", static_cast<double>(g.evaluations)}};
        rep.records.push_back(r);
      }
    }
    rep.finalize();
    return {rep};
  }
  if (t == "monte_carlo") {
    EllipseRegion omega(run.ensemble.rho, e.delta);
    const double a = omega.semi_axis_re(), b = omega.semi_axis_im();
    std::function<Complex(Complex)> f;
    Complex exact;
    if (e.mc_function == "quadratic") {
      f = [](Complex z) { return Complex(std::norm(z) + z.real(), 0.0); };
      exact = (a * a + b * b) / 4.0;
    } else if (e.mc_function == "real-part") {
      f = [](Complex z) { return Complex(z.real(), 0.0); };
      exact = 0.0;
    } else if (e.mc_function == "constant") {
      f = [](Complex) { return Complex(1.0, 0.0); };
      exact = 1.0;
    } else {
      throw std::invalid_argument("unknown monte_carlo function: " + e.mc_function);
    }
    const CoverageResult c =
        monte_carlo_coverage(f, exact, omega, e.m, e.mc_delta, e.repetitions, run.ensemble.seed);
    ExperimentReport rep;
    rep.experiment = "monte_carlo";
    rep.thresholds = e.thresholds;
    auto r = scalar_record(0, 0, "violation-frequency", c.frequency, e.mc_delta);
    r.metrics = {{"m", static_cast<double>(e.m)},
                 {"repetitions", static_cast<double>(c.repetitions)},
                 {"violations", static_cast<double>(c.violations)}};
    rep.records.push_back(r);
    rep.finalize();
    return {rep};
  }
  if (t == "density_map") {
    const EnsembleSpec s = first_spec(run, e);
    const DensityMap d = density_map(s, e.resolution, e.trials, run.threads);
    const std::string path = (std::filesystem::path(run.output_dir) /
                              ((e.name.empty() ? e.type : e.name) + ".csv")).string();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    d.write_csv(out);
    extra_files.push_back(path);
    ExperimentReport rep;
    rep.experiment = "density_map";
    rep.thresholds = e.thresholds;
    auto r = scalar_record(s.n, 0, "mass-outside-ellipse", 1.0 - d.mass_inside_ellipse,
                           1.0 - e.min_mass_inside);
    r.metrics = {{"total", static_cast<double>(d.total)},
                 {"outside_box", static_cast<double>(d.outside_box)},
                 {"angular_chi2", d.angular_chi2},
                 {"angular_p_value", d.angular_p_value}};
    rep.records.push_back(r);
    rep.finalize();
    return {rep};
  }
  throw std::invalid_argument("unknown experiment type: " + t);
}

}  // namespace

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = json{{"type", c.type},
           {"name", c.name},
           {"n_values", c.n_values},
           {"zeta", complex_strings(c.zeta)},
           {"beta", c.beta},
           {"trials", c.trials},
           {"delta", c.delta},
           {"thresholds", thresholds_json(c.thresholds)},
           {"random_probes", c.random_probes},
           {"probe_seed", c.probe_seed},
           {"function", {{"kind", c.function_kind},
                         {"center", format_complex(c.center)},
                         {"alpha", c.alpha},
                         {"radius", c.radius}}},
           {"quad_tol", c.quad_tol},
           {"tolerance", c.tolerance},
           {"mc_function", c.mc_function},
           {"m", c.m},
           {"mc_delta", c.mc_delta},
           {"repetitions", c.repetitions},
           {"resolution", c.resolution},
           {"min_mass_inside", c.min_mass_inside}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  if (!j.contains("type")) throw std::invalid_argument("experiment without a type");
  c.type = j.at("type").get<std::string>();
  read(j, "name", c.name);
  read(j, "n_values", c.n_values);
  if (j.contains("zeta")) c.zeta = parse_complex_list(j.at("zeta"));
  read(j, "beta", c.beta);
  read(j, "trials", c.trials);
  read(j, "delta", c.delta);
  if (j.contains("thresholds")) c.thresholds = thresholds_from(j.at("thresholds"), c.thresholds);
  read(j, "random_probes", c.random_probes);
  read(j, "probe_seed", c.probe_seed);
  if (j.contains("function")) {
    const auto& f = j.at("function");
    read(f, "kind", c.function_kind);
    if (f.contains("center")) c.center = parse_complex(f.at("center").get<std::string>());
    read(f, "alpha", c.alpha);
    read(f, "radius", c.radius);
  }
  read(j, "quad_tol", c.quad_tol);
  read(j, "tolerance", c.tolerance);
  read(j, "mc_function", c.mc_function);
  read(j, "m", c.m);
  read(j, "mc_delta", c.mc_delta);
  read(j, "repetitions", c.repetitions);
  read(j, "resolution", c.resolution);
  read(j, "min_mass_inside", c.min_mass_inside);
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = json{{"schema_version", c.schema_version},
           {"ensemble", {{"rho", c.ensemble.rho},
                         {"mu", c.ensemble.mu},
                         {"base", to_string(c.ensemble.base)},
                         {"seed", c.ensemble.seed}}},
           {"output_dir", c.output_dir},
           {"format", c.format},
           {"threads", c.threads},
           {"experiments", c.experiments}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  if (!j.contains("schema_version")) throw std::invalid_argument("config lacks schema_version");
  c.schema_version = j.at("schema_version").get<int>();
  if (c.schema_version != kSchemaVersion)
    throw std::invalid_argument("unsupported schema_version " + std::to_string(c.schema_version));
  if (j.contains("ensemble")) {
    const auto& e = j.at("ensemble");
    read(e, "rho", c.ensemble.rho);
    read(e, "mu", c.ensemble.mu);
    if (e.contains("base")) c.ensemble.base = parse_base(e.at("base").get<std::string>());
    read(e, "seed", c.ensemble.seed);
  }
  read(j, "output_dir", c.output_dir);
  read(j, "format", c.format);
  if (c.format != "jsonl" && c.format != "csv") throw std::invalid_argument("format must be jsonl or csv");
  read(j, "threads", c.threads);
  if (c.threads < 1) throw std::invalid_argument("threads must be >= 1");
  c.experiments.clear();
  if (j.contains("experiments"))
    for (const auto& e : j.at("experiments")) c.experiments.push_back(e.get<ExperimentConfig>());
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path);
  try {
    return json::parse(in).get<RunConfig>();
  } catch (const json::exception& e) {
    throw std::invalid_argument("malformed config " + path + ": " + e.what());
  }
}

std::string default_output_dir() {
  const char* env = std::getenv("ELLIPSE_OUT_DIR");
  return env && *env ? std::string(env) : std::string("ellipse_out");
}

void write_records_csv(std::ostream& out, const ExperimentReport& report) {
  out << "experiment,n,zeta,eta,trial,statistic,error,envelope,pass\n";
  out.precision(17);
  for (const auto& r : report.records)
    out << report.experiment << ',' << r.n << ',' << format_complex(r.zeta) << ',' << r.eta << ','
        << r.trial << ',' << r.statistic << ',' << r.error << ',' << r.envelope << ','
        << (r.pass ? "true" : "false") << '\n';
}

ExperimentOutcome run_experiment(const RunConfig& run, const ExperimentConfig& exp) {
  std::filesystem::create_directories(run.output_dir);
  ExperimentOutcome out;
  out.reports = dispatch(run, exp, out.files);
  const std::string stem = exp.name.empty() ? exp.type : exp.name;
  for (const auto& rep : out.reports) {
    const std::string base =
        (std::filesystem::path(run.output_dir) /
         (out.reports.size() > 1 ? stem + "." + rep.experiment : stem)).string();
    const std::string records = base + (run.format == "csv" ? ".records.csv" : ".jsonl");
    std::ofstream r(records);
    std::ofstream s(base + ".summary.json");
    if (!r || !s) throw std::runtime_error("cannot write reports under " + run.output_dir);
    if (run.format == "csv")
      write_records_csv(r, rep);
    else
      rep.write_jsonl(r);
    s << rep.summary_json() << '\n';
    out.files.push_back(records);
    out.files.push_back(base + ".summary.json");
    out.pass = out.pass && rep.summary.pass;
  }
  return out;
}

}  // namespace ellipse::cli
