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

#include "ellipse/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include <boost/math/distributions/chi_squared.hpp>

#include "ellipse/linalg.hpp"
#include "json.hpp"

namespace ellipse {
namespace {

using nlohmann::json;
constexpr double kPi = std::numbers::pi;

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size() / 2;
  return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

// Recovers beta from eta = n^{-beta}, rounded so that records of one series group together.
double beta_of(int n, double eta) {
  const double b = -std::log(eta) / std::log(static_cast<double>(n));
  return std::round(b * 1e6) / 1e6;
}

std::string label(const std::string& stat, Complex zeta, double beta) {
  std::ostringstream s;
  s << stat << " zeta=" << format_complex(zeta) << " beta=" << beta;
  return s.str();
}

EnsembleSpec at_dimension(EnsembleSpec spec, int n) {
  spec.n = n;
  spec.validate();
  return spec;
}

json metrics_json(const std::vector<std::pair<std::string, double>>& m) {
  json out = json::object();
  for (const auto& [k, v] : m) out[k] = v;
  return out;
}

// Task list over (n index, trial) in lexicographic order.
struct TaskIndex {
  std::size_t n_index;
  int trial;
};

std::vector<TaskIndex> tasks_for(const ExperimentGrid& grid) {
  std::vector<TaskIndex> t;
  for (std::size_t i = 0; i < grid.n_values.size(); ++i)
    for (int k = 0; k < grid.trials; ++k) t.push_back({i, k});
  return t;
}

std::vector<ExperimentRecord> merge(std::vector<std::vector<ExperimentRecord>>& parts) {
  std::vector<ExperimentRecord> out;
  for (auto& p : parts)
    for (auto& r : p) out.push_back(std::move(r));
  return out;
}

void require_positive_trials(int trials) {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
}

}  // namespace

double ExperimentGrid::eta(int n, double beta) {
  return std::pow(static_cast<double>(n), -beta);
}

void ExperimentGrid::validate(bool bulk) const {
  if (n_values.empty()) throw std::invalid_argument("grid needs at least one n");
  for (int n : n_values)
    if (n < 1 || n > kMaxDimension) throw std::invalid_argument("grid n out of range");
  require_positive_trials(trials);
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  if (!(delta >= 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in [0, 1)");
  for (double b : betas)
    if (!(b > 0.0 && b < 1.0)) throw std::invalid_argument("eta exponent beta must lie in (0, 1)");
  EnsembleSpec probe = ensemble;
  probe.n = n_values.front();
  probe.validate();
  if (bulk) {
    const EllipseRegion region(ensemble.rho, delta);
    for (Complex z : zeta_points)
      if (!region.contains(z))
        throw std::invalid_argument("zeta " + format_complex(z) + " is outside the bulk region");
  }
}

double ExperimentRecord::metric(const std::string& name) const {
  for (const auto& [k, v] : metrics)
    if (k == name) return v;
  return std::numeric_limits<double>::quiet_NaN();
}

void ExperimentReport::finalize(const std::string& central) {
  auto key = [](const ExperimentRecord& r) {
    return std::make_tuple(r.n, r.zeta.real(), r.zeta.imag(), r.eta, r.trial, r.statistic);
  };
  std::stable_sort(records.begin(), records.end(),
                   [&](const auto& a, const auto& b) { return key(a) < key(b); });

  ExperimentSummary s;
  s.values = summary.values;
  s.notes = summary.notes;
  s.records = static_cast<long>(records.size());

  using GroupKey = std::tuple<std::string, int, double, double, double>;
  std::map<GroupKey, std::vector<const ExperimentRecord*>> groups;
  std::map<std::string, std::pair<long, long>> per_stat;  // records, failures
  for (const auto& r : records) {
    if (!r.pass) ++s.failures;
    auto& ps = per_stat[r.statistic];
    ++ps.first;
    if (!r.pass) ++ps.second;
    if (r.envelope > 0.0) s.empirical_constant = std::max(s.empirical_constant, r.error / r.envelope);
    groups[{r.statistic, r.n, r.zeta.real(), r.zeta.imag(), r.eta}].push_back(&r);
  }

  // (statistic, zeta, beta) -> per-n points
  std::map<std::tuple<std::string, double, double, double>, std::vector<const GroupSummary*>> series;
  s.groups.reserve(groups.size());
  for (const auto& [k, rs] : groups) {
    GroupSummary g;
    g.statistic = std::get<0>(k);
    g.n = std::get<1>(k);
    g.zeta = {std::get<2>(k), std::get<3>(k)};
    g.eta = std::get<4>(k);
    g.records = static_cast<long>(rs.size());
    std::vector<double> errs;
    double sq = 0.0;
    for (const auto* r : rs) {
      errs.push_back(r->error);
      sq += r->error * r->error;
      g.max_error = std::max(g.max_error, r->error);
      if (!r->pass) ++g.failures;
    }
    g.median_error = median(errs);
    g.rms_error = std::sqrt(sq / static_cast<double>(rs.size()));
    g.envelope = rs.front()->envelope;
    s.groups.push_back(g);
  }
  for (const auto& g : s.groups) {
    const double beta = g.eta > 0.0 && g.n > 1 ? beta_of(g.n, g.eta) : 0.0;
    series[{g.statistic, g.zeta.real(), g.zeta.imag(), beta}].push_back(&g);
  }
  for (const auto& [k, gs] : series) {
    std::vector<double> ns, neta, ys;
    for (const auto* g : gs) {
      ns.push_back(g->n);
      neta.push_back(g->n * g->eta);
      ys.push_back(central == "rms" ? g->rms_error : g->median_error);
    }
    SlopeFit fit;
    fit.series = label(std::get<0>(k), {std::get<1>(k), std::get<2>(k)}, std::get<3>(k));
    fit.points = static_cast<int>(gs.size());
    if (gs.size() >= 2) {
      fit.slope_vs_n = log_log_slope(ns, ys);
      if (gs.front()->eta > 0.0) fit.slope_vs_n_eta = log_log_slope(neta, ys);
    }
    s.slopes.push_back(fit);
  }

  s.pass = true;
  for (const auto& [stat, rf] : per_stat) {
    const double allowed = (1.0 - thresholds.pass_fraction) * static_cast<double>(rf.first);
    if (static_cast<double>(rf.second) > allowed + 1e-9) {
      s.pass = false;
      s.notes.push_back(stat + ": " + std::to_string(rf.second) + " of " +
                        std::to_string(rf.first) + " records above envelope");
    }
  }
  for (const auto& f : s.slopes) {
    const double slope = thresholds.slope_against == "n_eta" ? f.slope_vs_n_eta : f.slope_vs_n;
    if (std::isnan(slope)) continue;
    const bool low = !std::isnan(thresholds.slope_min) && slope < thresholds.slope_min;
    const bool high = !std::isnan(thresholds.slope_max) && slope > thresholds.slope_max;
    if (low || high) {
      s.pass = false;
      s.notes.push_back(f.series + ": slope " + std::to_string(slope) + " outside window");
    }
  }
  summary = std::move(s);
}

void ExperimentReport::write_jsonl(std::ostream& out) const {
  for (const auto& r : records) {
    json j;
    j["experiment"] = experiment;
    j["n"] = r.n;
    j["zeta"] = format_complex(r.zeta);
    j["eta"] = r.eta;
    j["trial"] = r.trial;
    j["statistic"] = r.statistic;
    j["error"] = r.error;
    j["envelope"] = r.envelope;
    j["pass"] = r.pass;
    j["metrics"] = metrics_json(r.metrics);
    out << j.dump() << '\n';
  }
}

std::string ExperimentReport::summary_json() const {
  json j;
  j["experiment"] = experiment;
  j["records"] = summary.records;
  j["failures"] = summary.failures;
  j["empirical_constant"] = summary.empirical_constant;
  j["pass"] = summary.pass;
  j["thresholds"] = {{"epsilon", thresholds.epsilon},
                     {"constant", thresholds.constant},
                     {"pass_fraction", thresholds.pass_fraction},
                     {"slope_min", thresholds.slope_min},
                     {"slope_max", thresholds.slope_max},
                     {"slope_against", thresholds.slope_against}};
  json groups = json::array();
  for (const auto& g : summary.groups) {
    groups.push_back({{"statistic", g.statistic},
                      {"n", g.n},
                      {"zeta", format_complex(g.zeta)},
                      {"eta", g.eta},
                      {"records", g.records},
                      {"failures", g.failures},
                      {"median_error", g.median_error},
                      {"rms_error", g.rms_error},
                      {"max_error", g.max_error},
                      {"envelope", g.envelope}});
  }
  j["groups"] = groups;
  json slopes = json::array();
  for (const auto& f : summary.slopes)
    slopes.push_back({{"series", f.series},
                      {"points", f.points},
                      {"slope_vs_n", f.slope_vs_n},
                      {"slope_vs_n_eta", f.slope_vs_n_eta}});
  j["slopes"] = slopes;
  j["values"] = metrics_json(summary.values);
  j["notes"] = summary.notes;
  return j.dump(2);
}

void run_tasks(std::size_t count, int threads, const std::function<void(std::size_t)>& task) {
  const std::size_t workers = std::min<std::size_t>(std::max(threads, 1), std::max<std::size_t>(count, 1));
  std::vector<std::exception_ptr> errors(count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            task(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("slope fit needs >= 2 points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / sxx;
}

std::vector<std::pair<CVector, CVector>> probe_pairs(int n, int k_random, std::uint64_t seed) {
  const auto probes = standard_probes(n, k_random, seed);
  std::vector<std::pair<CVector, CVector>> out;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    out.emplace_back(probes[i], probes[i]);
    if (probes.size() > 1) out.emplace_back(probes[i], probes[(i + 1) % probes.size()]);
  }
  return out;
}

namespace {

LocalLawReports run_local_law(const ExperimentGrid& grid, const ProbeFamily* probes) {
  grid.validate(true);
  if (grid.betas.empty()) throw std::invalid_argument("local law needs at least one eta exponent");
  const bool iso = probes != nullptr;
  const EllipticParam param(grid.ensemble.rho);
  const double eps = grid.thresholds.epsilon;
  const double c = grid.thresholds.constant;
  const auto tasks = tasks_for(grid);
  std::vector<std::vector<ExperimentRecord>> avg_parts(tasks.size()), iso_parts(tasks.size());

  run_tasks(tasks.size(), grid.threads, [&](std::size_t t) {
    const int n = grid.n_values[tasks[t].n_index];
    const int trial = tasks[t].trial;
    const EnsembleSpec spec = at_dimension(grid.ensemble, n);
    const EllipticMatrix x = sample(spec, static_cast<std::uint64_t>(trial));
    std::vector<std::pair<CVector, CVector>> pairs;
    std::vector<TestMatrix> tests;
    if (iso) {
      pairs = probe_pairs(n, probes->k_random, probes->seed);
      tests = standard_test_matrices(n, probes->seed);
    }
    for (Complex zeta : grid.zeta_points) {
      const SpectralDecomposition dec = decompose_svd(x.entries, zeta, iso);
      std::vector<std::pair<CVector, CVector>> projected;
      std::vector<CVector> weights;
      if (iso) {
        for (const auto& [a, b] : pairs) projected.emplace_back(dec.project(a), dec.project(b));
        for (const auto& b : tests) weights.push_back(test_matrix_weights(dec, b));
      }
      for (double beta : grid.betas) {
        const double eta = ExperimentGrid::eta(n, beta);
        const DysonSolution m = solve_dyson(SpectralPoint::make(zeta, eta), param);
        const double neta = n * eta;
        const double ne = std::pow(static_cast<double>(n), eps);

        ExperimentRecord a;
        a.n = n;
        a.zeta = zeta;
        a.eta = eta;
        a.trial = trial;
        a.statistic = "avg";
        const Complex tr = resolvent_trace(dec, eta);
        a.error = std::abs(tr - kI * m.v);
        a.envelope = ne / neta;
        a.pass = a.error <= c * a.envelope;
        a.metrics = {{"v", m.v}, {"im_trace", tr.imag()}, {"n_eta", neta}};
        avg_parts[t].push_back(a);

        if (!iso) continue;
        double sup = 0.0;
        for (std::size_t p = 0; p < pairs.size(); ++p) {
          const Complex g = resolvent_isotropic_projected(dec, eta, projected[p].first,
                                                          projected[p].second);
          const Complex mm = pairs[p].first.dot(apply_m(m, pairs[p].second));
          sup = std::max(sup, std::abs(g - mm));
        }
        ExperimentRecord r = a;
        r.statistic = "probe-sup";
        r.error = sup;
        r.envelope = ne / std::sqrt(neta);
        r.pass = r.error <= c * r.envelope;
        r.metrics = {{"probe_pairs", static_cast<double>(pairs.size())},
                     {"avg_error", a.error},
                     {"n_eta", neta}};
        iso_parts[t].push_back(r);

        double bmax = 0.0;
        for (std::size_t b = 0; b < tests.size(); ++b)
          bmax = std::max(bmax, std::abs(averaged_functional(dec, eta, weights[b]) -
                                         averaged_functional(m, tests[b])));
        ExperimentRecord bt = a;
        bt.statistic = "avg-test";
        bt.error = bmax;
        bt.envelope = ne / neta;
        bt.pass = bt.error <= c * bt.envelope;
        bt.metrics = {{"test_matrices", static_cast<double>(tests.size())}, {"n_eta", neta}};
        iso_parts[t].push_back(bt);
      }
    }
  });

  LocalLawReports out;
  out.averaged.experiment = "averaged_local_law";
  out.averaged.thresholds = grid.thresholds;
  out.averaged.records = merge(avg_parts);
  out.averaged.finalize("median");
  if (iso) {
    out.isotropic.experiment = "isotropic_local_law";
    out.isotropic.thresholds = grid.thresholds;
    out.isotropic.records = merge(iso_parts);
    out.isotropic.summary.notes.push_back(
        "probe-sup is a maximum over a finite probe family and lower-bounds the isotropic norm");
    out.isotropic.finalize("median");
  }
  return out;
}

}  // namespace

ExperimentReport averaged_local_law(const ExperimentGrid& grid) {
  return run_local_law(grid, nullptr).averaged;
}

ExperimentReport isotropic_local_law(const ExperimentGrid& grid, const ProbeFamily& probes) {
  return run_local_law(grid, &probes).isotropic;
}

LocalLawReports local_law_experiment(const ExperimentGrid& grid, const ProbeFamily& probes) {
  return run_local_law(grid, &probes);
}

ExperimentReport error_matrix_experiment(const ExperimentGrid& grid, const ProbeFamily& probes) {
  grid.validate(true);
  if (grid.betas.empty()) throw std::invalid_argument("error matrix needs at least one eta exponent");
  const double eps = grid.thresholds.epsilon;
  const double c = grid.thresholds.constant;
  const auto tasks = tasks_for(grid);
  std::vector<std::vector<ExperimentRecord>> parts(tasks.size());

  run_tasks(tasks.size(), grid.threads, [&](std::size_t t) {
    const int n = grid.n_values[tasks[t].n_index];
    const int trial = tasks[t].trial;
    const EnsembleSpec spec = at_dimension(grid.ensemble, n);
    const EllipticMatrix x = sample(spec, static_cast<std::uint64_t>(trial));
    const auto pairs = probe_pairs(n, probes.k_random, probes.seed);
    const auto tests = standard_test_matrices(n, probes.seed);
    const SelfEnergyData se = SelfEnergyData::from_spec(spec);
    for (Complex zeta : grid.zeta_points) {
      const SpectralDecomposition dec = decompose_svd(x.entries, zeta, true);
      for (double beta : grid.betas) {
        const double eta = ExperimentGrid::eta(n, beta);
        const ErrorMatrixNorms d = error_matrix_norms(x.entries, dec, eta, spec.rho, se, pairs, tests);
        const double im_g = resolvent_trace(dec, eta).imag();
        const double neta = n * eta;
        const double ne = std::pow(static_cast<double>(n), eps);
        ExperimentRecord r;
        r.n = n;
        r.zeta = zeta;
        r.eta = eta;
        r.trial = trial;
        r.metrics = {{"im_trace", im_g}, {"n_eta", neta}};
        r.statistic = "iso";
        r.error = d.iso;
        r.envelope = ne * std::sqrt(im_g / neta);
        r.pass = r.error <= c * r.envelope;
        parts[t].push_back(r);
        r.statistic = "avg";
        r.error = d.avg;
        r.envelope = ne * im_g / neta;
        r.pass = r.error <= c * r.envelope;
        parts[t].push_back(r);
      }
    }
  });

  ExperimentReport out;
  out.experiment = "error_matrix";
  out.thresholds = grid.thresholds;
  out.records = merge(parts);
  out.summary.notes.push_back("iso is a maximum over a finite probe family");
  out.finalize("median");
  return out;
}

std::vector<NamedVector> delocalisation_probes(int n, int k_random, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("probe dimension must be positive");
  std::vector<NamedVector> out;
  const double s = 1.0 / std::sqrt(static_cast<double>(n));
  CVector e = CVector::Zero(n);
  e(0) = 1.0;
  out.push_back({"e1", e});
  out.push_back({"uniform", CVector::Constant(n, s)});
  CVector alt(n);
  for (int i = 0; i < n; ++i) alt(i) = i % 2 == 0 ? s : -s;
  out.push_back({"alternating", alt});
  for (int r = 0; r < k_random; ++r) {
    Substream st = rng_policy(seed, 1, domain_entry(StreamDomain::kProbe, r));
    CVector g(n);
    for (int i = 0; i < n; ++i) {
      const double re = st.normal();
      const double im = st.normal();
      g(i) = {re, im};
    }
    out.push_back({"haar" + std::to_string(r), g / g.norm()});
  }
  return out;
}

ExperimentReport delocalisation_test(const EnsembleSpec& spec, const std::vector<NamedVector>& w_probes,
                                     const DelocalisationOptions& options) {
  spec.validate();
  require_positive_trials(options.trials);
  if (!(options.delta >= 0.0 && options.delta < 1.0))
    throw std::invalid_argument("delta must lie in [0, 1)");
  for (const auto& w : w_probes)
    if (w.vector.size() != spec.n || w.vector.norm() == 0.0)
      throw std::invalid_argument("probe " + w.name + " has the wrong dimension or is zero");
  const int n = spec.n;
  const EllipseRegion bulk(spec.rho, options.delta);
  std::vector<std::vector<ExperimentRecord>> parts(options.trials);

  run_tasks(options.trials, options.threads, [&](std::size_t t) {
    const EllipticMatrix x = sample(spec, t);
    const CMatrix xc = x.entries;
    const GeneralEig eig = general_eig(xc, true);
    const CMatrix& u = eig.right_vectors;
    const CMatrix resid = xc * u - u * eig.values.asDiagonal();
    std::vector<int> keep;
    int flagged = 0;
    for (int k = 0; k < n; ++k) {
      const double un = u.col(k).norm();
      if (resid.col(k).norm() > options.residual_gate * un) {
        ++flagged;
        continue;
      }
      if (bulk.contains(eig.values(k))) keep.push_back(k);
    }
    for (const auto& w : w_probes) {
      const CVector wn = w.vector / w.vector.norm();
      double best = 0.0;
      for (int k : keep) best = std::max(best, std::abs(wn.dot(u.col(k))) / u.col(k).norm());
      ExperimentRecord r;
      r.n = n;
      r.trial = static_cast<int>(t);
      r.statistic = "overlap:" + w.name;
      r.error = std::sqrt(static_cast<double>(n)) * best;
      r.envelope = std::sqrt(std::log(static_cast<double>(n)));
      r.pass = r.error <= options.thresholds.constant * r.envelope;
      r.metrics = {{"bulk_eigenvectors", static_cast<double>(keep.size())},
                   {"flagged", static_cast<double>(flagged)}};
      parts[t].push_back(r);
    }
  });

  ExperimentReport out;
  out.experiment = "delocalisation";
  out.thresholds = options.thresholds;
  out.records = merge(parts);
  out.finalize("median");
  long flagged = 0;
  for (const auto& r : out.records)
    if (r.statistic == out.records.front().statistic) flagged += static_cast<long>(r.metric("flagged"));
  out.summary.values.push_back({"flagged_eigenvectors", static_cast<double>(flagged)});
  return out;
}

std::string to_string(BumpKind k) {
  return k == BumpKind::kGaussian ? "gaussian-bump" : "polynomial-bump";
}

BumpKind parse_bump(const std::string& name) {
  if (name == "gaussian-bump") return BumpKind::kGaussian;
  if (name == "polynomial-bump") return BumpKind::kPolynomial;
  throw std::invalid_argument("unknown test function kind: " + name);
}

TestFunction::TestFunction(BumpKind kind, Complex center, double alpha, double radius,
                           double amplitude)
    : kind_(kind), center_(center), alpha_(alpha), radius_(radius), amplitude_(amplitude) {
  if (!(alpha >= 0.0 && alpha < 0.5)) throw std::invalid_argument("alpha must lie in [0, 1/2)");
  if (!(radius > 0.0) || !std::isfinite(radius)) throw std::invalid_argument("radius must be positive");
  if (!std::isfinite(amplitude) || !std::isfinite(center.real()) || !std::isfinite(center.imag()))
    throw std::invalid_argument("test function parameters must be finite");
}

double TestFunction::g(double s) const {
  if (s >= 1.0) return 0.0;
  if (kind_ == BumpKind::kPolynomial) return (1.0 - s) * (1.0 - s) * (1.0 - s);
  return std::exp(1.0 - 1.0 / (1.0 - s));
}

double TestFunction::lap_profile(double s) const {
  if (s >= 1.0) return 0.0;
  const double t = 1.0 - s;
  if (kind_ == BumpKind::kPolynomial) return 3.0 * t * (3.0 * s - 1.0);
  const double gs = std::exp(1.0 - 1.0 / t);
  return gs * (s * (1.0 - 2.0 * t) / (t * t * t * t) - 1.0 / (t * t));
}

double TestFunction::base(Complex w) const {
  return amplitude_ * g(std::norm(w) / (radius_ * radius_));
}

double TestFunction::base_laplacian(Complex w) const {
  const double r2 = radius_ * radius_;
  return amplitude_ * 4.0 / r2 * lap_profile(std::norm(w) / r2);
}

double TestFunction::operator()(Complex zeta, int n) const {
  const double s = std::pow(static_cast<double>(n), alpha_);
  return s * s * base(s * (zeta - center_));
}

double TestFunction::laplacian(Complex zeta, int n) const {
  const double s = std::pow(static_cast<double>(n), alpha_);
  return s * s * s * s * base_laplacian(s * (zeta - center_));
}

double TestFunction::support_radius(int n) const {
  return radius_ * std::pow(static_cast<double>(n), -alpha_);
}

std::vector<double> TestFunction::profile_breaks() const {
  // sign changes of s g'' + g' on [0, 1], refined by bisection
  std::vector<double> breaks{0.0};
  constexpr int kScan = 512;
  for (int i = 0; i < kScan; ++i) {
    double a = static_cast<double>(i) / kScan, b = static_cast<double>(i + 1) / kScan;
    if (b >= 1.0) break;
    if ((lap_profile(a) > 0.0) == (lap_profile(b) > 0.0)) continue;
    const bool a_pos = lap_profile(a) > 0.0;
    for (int k = 0; k < 60; ++k) {
      const double m = 0.5 * (a + b);
      ((lap_profile(m) > 0.0) == a_pos ? a : b) = m;
    }
    breaks.push_back(0.5 * (a + b));
  }
  breaks.push_back(1.0);
  return breaks;
}

double TestFunction::profile_integral(const std::function<double(double)>& h) const {
  const auto breaks = profile_breaks();
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
    total += composite_gauss_legendre(h, breaks[i], breaks[i + 1], 64);
  return total;
}

double TestFunction::integral() const {
  // int f = pi R^2 int_0^1 g(s) ds
  const double r2 = radius_ * radius_;
  if (kind_ == BumpKind::kPolynomial) return amplitude_ * kPi * r2 / 4.0;
  return amplitude_ * kPi * r2 * profile_integral([&](double s) { return g(s); });
}

double TestFunction::laplacian_l1() const {
  // |Delta f|_1 = 4 pi int_0^1 |s g'' + g'| ds, independent of R
  if (kind_ == BumpKind::kPolynomial) return std::abs(amplitude_) * 32.0 * kPi / 9.0;
  return std::abs(amplitude_) * 4.0 * kPi *
         profile_integral([&](double s) { return std::abs(lap_profile(s)); });
}

double TestFunction::laplacian_lp(double p) const {
  if (!(p >= 1.0)) throw std::invalid_argument("p must be >= 1");
  const double r2 = radius_ * radius_;
  const double q =
      profile_integral([&](double s) { return std::pow(4.0 / r2 * std::abs(lap_profile(s)), p); });
  return std::abs(amplitude_) * std::pow(kPi * r2 * q, 1.0 / p);
}

bool TestFunction::norm_condition(int n, double a, int d) const {
  return laplacian_lp(2.0 + a) <= std::pow(static_cast<double>(n), d) * laplacian_l1();
}

double integrate_against_density(const TestFunction& tf, int n, double rho, double tol) {
  const EllipticParam param(rho);
  if (tf.amplitude() == 0.0) return 0.0;
  const double sigma = 1.0 / (kPi * (1.0 - rho * rho));
  const double ax = 1.0 + rho, by = 1.0 - rho;
  const double r = tf.support_radius(n);
  const Complex c = tf.center();
  const double x0 = std::max(c.real() - r, -ax), x1 = std::min(c.real() + r, ax);
  if (x0 >= x1) return 0.0;
  const double scale = std::abs(tf.integral());
  const double abs_tol = tol * scale;
  auto inner = [&](double x) {
    const double dx = x - c.real();
    const double hd = std::sqrt(std::max(0.0, r * r - dx * dx));
    const double ye = by * std::sqrt(std::max(0.0, 1.0 - (x / ax) * (x / ax)));
    const double y0 = std::max(c.imag() - hd, -ye), y1 = std::min(c.imag() + hd, ye);
    if (y0 >= y1) return 0.0;
    return adaptive_simpson([&](double y) { return tf(Complex(x, y), n); }, y0, y1,
                            0.1 * abs_tol / (x1 - x0), 30)
        .value;
  };
  // Kinks of the outer integrand sit where the two boundaries cross; split at the
  // support centre so that symmetric supports start on a node.
  double total = 0.0;
  const double xm = std::clamp(c.real(), x0, x1);
  if (xm > x0) total += adaptive_simpson(inner, x0, xm, 0.5 * abs_tol, 30).value;
  if (x1 > xm) total += adaptive_simpson(inner, xm, x1, 0.5 * abs_tol, 30).value;
  return sigma * total;
}

ExperimentReport linear_statistics(const ExperimentGrid& grid, const TestFunction& tf) {
  grid.validate(false);
  const EllipseRegion bulk(grid.ensemble.rho, grid.delta);
  if (!bulk.contains(tf.center()))
    throw std::invalid_argument("test function centre is outside the bulk region");
  const double l1 = tf.laplacian_l1();
  std::vector<double> integrals;
  for (int n : grid.n_values) {
    if (!tf.norm_condition(n, 1.0, 1))
      throw std::invalid_argument("test function violates the Laplacian norm condition");
    integrals.push_back(integrate_against_density(tf, n, grid.ensemble.rho));
  }
  const auto tasks = tasks_for(grid);
  std::vector<std::vector<ExperimentRecord>> parts(tasks.size());
  run_tasks(tasks.size(), grid.threads, [&](std::size_t t) {
    const int n = grid.n_values[tasks[t].n_index];
    const EnsembleSpec spec = at_dimension(grid.ensemble, n);
    const EllipticMatrix x = sample(spec, static_cast<std::uint64_t>(tasks[t].trial));
    const GeneralEig eig = general_eig(CMatrix(x.entries), false);
    double sum = 0.0;
    for (Eigen::Index k = 0; k < eig.values.size(); ++k) sum += tf(eig.values(k), n);
    const double stat = sum / n;
    const double integral = integrals[tasks[t].n_index];
    ExperimentRecord r;
    r.n = n;
    r.zeta = tf.center();
    r.trial = tasks[t].trial;
    r.statistic = "linear-statistic";
    r.error = std::abs(stat - integral);
    r.envelope = std::pow(static_cast<double>(n), -1.0 + 2.0 * tf.alpha() + grid.thresholds.epsilon) * l1;
    r.pass = r.error <= grid.thresholds.constant * r.envelope;
    r.metrics = {{"statistic", stat}, {"integral", integral}};
    parts[t].push_back(r);
  });
  ExperimentReport out;
  out.experiment = "linear_statistics";
  out.thresholds = grid.thresholds;
  out.records = merge(parts);
  out.summary.values = {{"alpha", tf.alpha()}, {"laplacian_l1", l1}};
  out.finalize("rms");
  return out;
}

GirkoResult girko_consistency(const RowMatrix& x, const TestFunction& tf, double quad_tol,
                              double exclusion_radius) {
  const int n = static_cast<int>(x.rows());
  if (n < 1 || x.cols() != n) throw std::invalid_argument("girko_consistency expects a square matrix");
  if (!(quad_tol > 0.0)) throw std::invalid_argument("quad_tol must be positive");
  const CMatrix xc = x;
  const Eigen::VectorXcd xi = general_eig(xc, false).values;
  GirkoResult out;
  for (Eigen::Index k = 0; k < xi.size(); ++k) out.lhs += tf(xi(k), n);
  out.lhs /= n;

  const double r = tf.support_radius(n);
  const Complex c = tf.center();
  const Box box{c.real() - r, c.real() + r, c.imag() - r, c.imag() + r};
  CubatureOptions opt;
  opt.abs_tol = quad_tol * 2.0 * kPi * n;
  opt.rule = CubatureRule::kGauss8;
  opt.min_depth = 3;
  opt.max_depth = 24;
  opt.refine_size = 8.0 * exclusion_radius;
  double disk_terms = 0.0;
  const double r0 = exclusion_radius;
  for (Eigen::Index k = 0; k < xi.size(); ++k) {
    if (std::abs(xi(k) - c) >= r + r0) continue;
    opt.refine_points.push_back(xi(k));
    opt.exclusions.push_back({xi(k), r0});
    ++out.excluded;
    // log|det(X - zeta)| = sum_j log|zeta - xi_j|: exact disk integral of the singular
    // term, mean value of the harmonic rest, midpoint value of Delta f.
    double rest = 0.0;
    for (Eigen::Index j = 0; j < xi.size(); ++j)
      if (j != k) rest += std::log(std::abs(xi(k) - xi(j)));
    disk_terms += tf.laplacian(xi(k), n) * kPi * r0 * r0 * (std::log(r0) - 0.5 + rest);
  }
  CMatrix buf(n, n);
  const auto q = adaptive_cubature(
      [&](double a, double b) {
        const Complex z(a, b);
        const double lap = tf.laplacian(z, n);
        if (lap == 0.0) return 0.0;
        buf = xc;
        buf.diagonal().array() -= z;
        return lap * log_abs_det(buf);
      },
      box, opt);
  out.rhs = (q.value + disk_terms) / (2.0 * kPi * n);
  out.quadrature_error = q.error / (2.0 * kPi * n);
  out.evaluations = q.evaluations;
  out.difference = std::abs(out.lhs - out.rhs);
  return out;
}

DistributionalCheck log_potential_distributional_check(const TestFunction& psi, double rho,
                                                       double quad_tol) {
  const EllipticParam param(rho);
  const EllipseRegion region(rho, 0.0);
  const double r = psi.radius();
  const Complex c = psi.center();
  // supp psi must lie inside the ellipse
  for (int k = 0; k < 64; ++k) {
    const double th = 2.0 * kPi * k / 64.0;
    if (!region.contains(c + r * Complex(std::cos(th), std::sin(th))))
      throw std::invalid_argument("bump support must lie inside the ellipse");
  }
  // Polar rule around the centre: Gauss-Legendre in r, trapezoid in the angle.
  constexpr int kAngles = 48;
  auto ring = [&](double rr) {
    double s = 0.0;
    for (int k = 0; k < kAngles; ++k) {
      const double th = 2.0 * kPi * (k + 0.5) / kAngles;
      const Complex z = c + rr * Complex(std::cos(th), std::sin(th));
      s += log_potential(z, param, quad_tol).value;
    }
    return s * 2.0 * kPi / kAngles;
  };
  const double lhs_int = composite_gauss_legendre(
      [&](double rr) { return psi.base_laplacian(Complex(rr, 0.0)) * rr * ring(rr); }, 0.0, r, 4);
  DistributionalCheck out;
  out.lhs = lhs_int / (2.0 * kPi);
  out.rhs = integrate_against_density(psi, 1, rho, 1e-12);
  out.relative_error = std::abs(out.lhs - out.rhs) / std::abs(out.rhs);
  return out;
}

Complex uniform_in_region(const EllipseRegion& region, Substream& stream) {
  const double rr = std::sqrt(stream.uniform());
  const double th = 2.0 * kPi * stream.uniform();
  return {region.semi_axis_re() * rr * std::cos(th), region.semi_axis_im() * rr * std::sin(th)};
}

MonteCarloEstimate monte_carlo_estimate(const std::function<Complex(Complex)>& f,
                                        const EllipseRegion& omega, int m, double delta,
                                        std::uint64_t seed, std::uint64_t repetition) {
  if (m < 1) throw std::invalid_argument("m must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  Substream stream = rng_policy(seed, repetition, domain_entry(StreamDomain::kMonteCarlo, 0));
  std::vector<Complex> values(m);
  Complex sum{};
  for (int i = 0; i < m; ++i) {
    values[i] = f(uniform_in_region(omega, stream));
    sum += values[i];
  }
  MonteCarloEstimate out;
  out.estimate = sum / static_cast<double>(m);
  double var = 0.0;
  for (const Complex& v : values) var += std::norm(v - out.estimate);
  out.variance = var / m;
  out.bound = std::sqrt(out.variance / (m * delta));
  return out;
}

CoverageResult monte_carlo_coverage(const std::function<Complex(Complex)>& f, Complex exact,
                                    const EllipseRegion& omega, int m, double delta, int repetitions,
                                    std::uint64_t seed) {
  if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
  CoverageResult out;
  out.repetitions = repetitions;
  for (int k = 0; k < repetitions; ++k) {
    const auto e = monte_carlo_estimate(f, omega, m, delta, seed, static_cast<std::uint64_t>(k));
    if (std::abs(e.estimate - exact) > e.bound) ++out.violations;
  }
  out.frequency = static_cast<double>(out.violations) / repetitions;
  return out;
}

ExperimentReport small_singular_scan(const ExperimentGrid& grid) {
  grid.validate(true);
  if (grid.betas.empty()) throw std::invalid_argument("scan needs a lower eta exponent");
  const auto tasks = tasks_for(grid);
  std::vector<std::vector<ExperimentRecord>> parts(tasks.size());
  run_tasks(tasks.size(), grid.threads, [&](std::size_t t) {
    const int n = grid.n_values[tasks[t].n_index];
    const EnsembleSpec spec = at_dimension(grid.ensemble, n);
    const EllipticMatrix x = sample(spec, static_cast<std::uint64_t>(tasks[t].trial));
    for (Complex zeta : grid.zeta_points) {
      const SpectralDecomposition dec = decompose_svd(x.entries, zeta, false);
      const double smin = smallest_singular_value(dec);
      for (double beta : grid.betas) {
        for (double eta = ExperimentGrid::eta(n, beta); eta <= 1.0; eta *= 2.0) {
          const long count = small_singular_count(dec, eta);
          ExperimentRecord r;
          r.n = n;
          r.zeta = zeta;
          r.eta = eta;
          r.trial = tasks[t].trial;
          r.statistic = "count/(n eta)";
          r.error = count / (n * eta);
          r.envelope = 1.0;
          r.pass = r.error <= grid.thresholds.constant;
          r.metrics = {{"count", static_cast<double>(count)}, {"s_min", smin}};
          parts[t].push_back(r);
        }
      }
    }
  });
  ExperimentReport out;
  out.experiment = "small_singular_scan";
  out.thresholds = grid.thresholds;
  out.records = merge(parts);
  double worst = 0.0, smin = std::numeric_limits<double>::infinity();
  for (const auto& r : out.records) {
    worst = std::max(worst, r.error);
    smin = std::min(smin, r.metric("s_min"));
  }
  out.summary.values = {{"max_count_ratio", worst}, {"min_smallest_singular_value", smin}};
  out.summary.notes.push_back("s_min is observed only; no bound is asserted on it here");
  // slopes across n are not meaningful for a dyadic scan
  out.finalize("median");
  out.summary.slopes.clear();
  return out;
}

double DensityMap::mass(int ix, int iy) const {
  return total > 0 ? static_cast<double>(counts[static_cast<std::size_t>(iy) * nx + ix]) / total : 0.0;
}

void DensityMap::write_csv(std::ostream& out) const {
  out << "x,y,count,mass,density,sigma\n";
  const double dx = (box.x1 - box.x0) / nx, dy = (box.y1 - box.y0) / ny;
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      const std::size_t k = static_cast<std::size_t>(iy) * nx + ix;
      const long cnt = counts.empty() ? 0 : counts[k];
      const double m = counts.empty() ? 0.0 : mass(ix, iy);
      out << box.x0 + (ix + 0.5) * dx << ',' << box.y0 + (iy + 0.5) * dy << ',' << cnt << ',' << m
          << ',' << m / (dx * dy) << ',' << sigma[k] << '\n';
    }
  }
}

namespace {

DensityMap empty_map(double rho, int resolution) {
  if (resolution < 1) throw std::invalid_argument("resolution must be >= 1");
  const EllipticParam param(rho);
  DensityMap d;
  const double h = 1.2 * (1.0 + std::abs(rho));
  d.box = {-h, h, -h, h};
  d.nx = d.ny = resolution;
  d.sigma.resize(static_cast<std::size_t>(resolution) * resolution);
  const double dx = 2.0 * h / resolution;
  for (int iy = 0; iy < resolution; ++iy)
    for (int ix = 0; ix < resolution; ++ix)
      d.sigma[static_cast<std::size_t>(iy) * resolution + ix] =
          elliptic_density({-h + (ix + 0.5) * dx, -h + (iy + 0.5) * dx}, param);
  return d;
}

}  // namespace

DensityMap density_field(double rho, int resolution) { return empty_map(rho, resolution); }

DensityMap density_map(const EnsembleSpec& spec, int resolution, int trials, int threads,
                       int angular_sectors) {
  spec.validate();
  require_positive_trials(trials);
  if (angular_sectors < 2) throw std::invalid_argument("need at least two angular sectors");
  DensityMap d = empty_map(spec.rho, resolution);
  d.counts.assign(d.sigma.size(), 0);
  std::vector<Eigen::VectorXcd> values(trials);
  run_tasks(trials, threads, [&](std::size_t t) {
    values[t] = general_eig(CMatrix(sample(spec, t).entries), false).values;
  });
  const EllipseRegion ellipse(spec.rho, 0.0);
  std::vector<long> sectors(angular_sectors, 0);
  long inside = 0;
  const double w = (d.box.x1 - d.box.x0) / resolution;
  for (const auto& v : values) {
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      const Complex z = v(k);
      ++d.total;
      if (ellipse.contains(z)) ++inside;
      double th = std::arg(z);
      if (th < 0.0) th += 2.0 * kPi;
      ++sectors[std::min(angular_sectors - 1, static_cast<int>(th / (2.0 * kPi) * angular_sectors))];
      const int ix = static_cast<int>(std::floor((z.real() - d.box.x0) / w));
      const int iy = static_cast<int>(std::floor((z.imag() - d.box.y0) / w));
      if (ix < 0 || iy < 0 || ix >= resolution || iy >= resolution) {
        ++d.outside_box;
        continue;
      }
      ++d.counts[static_cast<std::size_t>(iy) * resolution + ix];
    }
  }
  d.mass_inside_ellipse = static_cast<double>(inside) / d.total;
  const double expected = static_cast<double>(d.total) / angular_sectors;
  for (long s : sectors) d.angular_chi2 += (s - expected) * (s - expected) / expected;
  d.angular_sectors = angular_sectors;
  const boost::math::chi_squared dist(angular_sectors - 1);
  d.angular_p_value = boost::math::cdf(boost::math::complement(dist, d.angular_chi2));
  return d;
}

}  // namespace ellipse
