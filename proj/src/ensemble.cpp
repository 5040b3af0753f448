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

#include "ellipse/ensemble.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <thread>

#include "ellipse/rng.hpp"

namespace ellipse {
namespace {

constexpr char kMagic[4] = {'E', 'L', 'L', 'M'};
constexpr std::uint32_t kFlagComplexInterleaved = 1u;

static_assert(std::endian::native == std::endian::little,
              "matrix dump assumes a little-endian host");

struct PairDraw {
  Complex upper;  // x_ij, i < j
  Complex lower;  // x_ji
};

// Correlated pair of signs with E[s1 s2] = c.
std::pair<double, double> sign_pair(Substream& s, double c) {
  const double s1 = s.sign();
  const double s2 = s.uniform() < 0.5 * (1.0 + c) ? s1 : -s1;
  return {s1, s2};
}

PairDraw draw_pair(const EnsembleSpec& spec, Substream& s) {
  const double rho = spec.rho;
  const double a = std::sqrt(spec.mu);
  const double b = std::sqrt(1.0 - spec.mu);
  if (spec.base == BaseDistribution::kGaussian) {
    const double c = std::sqrt(1.0 - rho * rho);
    const double g1 = s.normal(), g2 = s.normal(), g3 = s.normal(), g4 = s.normal();
    return {{a * g1, b * g3}, {a * (rho * g1 + c * g2), b * (-rho * g3 + c * g4)}};
  }
  const auto [r1, r2] = sign_pair(s, rho);
  const auto [i1, i2] = sign_pair(s, -rho);
  return {{a * r1, b * i1}, {a * r2, b * i2}};
}

Complex draw_diagonal(const EnsembleSpec& spec, Substream& s) {
  const double a = std::sqrt(spec.mu);
  const double b = std::sqrt(1.0 - spec.mu);
  if (spec.base == BaseDistribution::kGaussian) {
    const double g1 = s.normal(), g2 = s.normal();
    return {a * g1, b * g2};
  }
  const double s1 = s.sign(), s2 = s.sign();
  return {a * s1, b * s2};
}

void fill_rows(const EnsembleSpec& spec, std::uint64_t trial, RowMatrix& x, int row_begin,
               int row_end) {
  const int n = spec.n;
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  // Row i owns x_ii and every pair (x_ij, x_ji) with j > i.
  for (int i = row_begin; i < row_end; ++i) {
    for (int j = i; j < n; ++j) {
      const std::uint64_t index = (static_cast<std::uint64_t>(n) << 32) |
                                  (static_cast<std::uint64_t>(i) * n + j);
      Substream s = rng_policy(spec.seed, trial, domain_entry(StreamDomain::kMatrix, index));
      if (i == j) {
        x(i, i) = scale * draw_diagonal(spec, s);
      } else {
        const PairDraw p = draw_pair(spec, s);
        x(i, j) = scale * p.upper;
        x(j, i) = scale * p.lower;
      }
    }
  }
}

}  // namespace

std::string to_string(BaseDistribution b) {
  return b == BaseDistribution::kGaussian ? "gaussian" : "rademacher-mixture";
}

BaseDistribution parse_base(const std::string& name) {
  if (name == "gaussian") return BaseDistribution::kGaussian;
  if (name == "rademacher-mixture") return BaseDistribution::kRademacherMixture;
  throw std::invalid_argument("unknown base distribution '" + name + "'");
}

void EnsembleSpec::validate() const {
  if (n < 1 || n > kMaxDimension)
    throw std::invalid_argument("n must lie in [1, " + std::to_string(kMaxDimension) + "]");
  if (!(std::abs(rho) < 1.0)) throw std::invalid_argument("rho must satisfy |rho| < 1");
  if (!(mu >= 0.0 && mu <= 1.0)) throw std::invalid_argument("mu must lie in [0, 1]");
  if (base == BaseDistribution::kRademacherMixture && mu != 0.0 && mu != 0.5 && mu != 1.0)
    throw std::invalid_argument("rademacher-mixture supports mu in {0, 1/2, 1} only");
}

EllipticMatrix sample(const EnsembleSpec& spec, std::uint64_t trial, int threads) {
  spec.validate();
  EllipticMatrix m{spec, trial, RowMatrix(spec.n, spec.n)};
  threads = std::clamp(threads, 1, spec.n);
  if (threads == 1) {
    fill_rows(spec, trial, m.entries, 0, spec.n);
    return m;
  }
  // Row i carries n - i draws; cut rows so every worker gets a similar share.
  const double total = 0.5 * spec.n * (spec.n + 1.0);
  std::vector<int> cuts{0};
  double acc = 0.0;
  for (int i = 0; i < spec.n; ++i) {
    acc += spec.n - i;
    if (acc >= total * cuts.size() / threads && static_cast<int>(cuts.size()) < threads)
      cuts.push_back(i + 1);
  }
  cuts.push_back(spec.n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w + 1 < cuts.size(); ++w)
    pool.emplace_back(fill_rows, std::cref(spec), trial, std::ref(m.entries), cuts[w], cuts[w + 1]);
  for (auto& t : pool) t.join();
  return m;
}

bool MomentStat::within(double k) const {
  // Summation slack for statistics that are deterministic (zero standard error).
  const double slack = 1e-9 * std::max(std::abs(value), std::abs(target));
  return std::abs(value.real() - target.real()) <= k * std_error.real() + slack &&
         std::abs(value.imag() - target.imag()) <= k * std_error.imag() + slack;
}

void MomentAccumulator::Running::push(Complex x) {
  ++count;
  sum += x;
  sum_sq_re += x.real() * x.real();
  sum_sq_im += x.imag() * x.imag();
}

MomentAccumulator::MomentAccumulator(const EnsembleSpec& spec) : spec_(spec) { spec_.validate(); }

void MomentAccumulator::add(const EllipticMatrix& m) {
  if (m.n() != spec_.n) throw std::invalid_argument("matrix dimension does not match spec");
  const int n = m.n();
  const auto& x = m.entries;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const Complex u = x(i, j);
      const Complex l = x(j, i);
      mean_.push(0.5 * (u + l));
      var_.push(0.5 * (std::norm(u) + std::norm(l)));
      cov_.push(u * l);
      pseudo_.push(0.5 * (u * u + l * l));
      conj_.push(u * std::conj(l));
    }
  }
}

MomentStat MomentAccumulator::finish(const Running& r, Complex target) const {
  MomentStat s;
  s.target = target;
  if (r.count < 2) return s;
  const double nn = static_cast<double>(r.count);
  s.value = r.sum / nn;
  const double var_re = std::max(0.0, (r.sum_sq_re - nn * std::pow(s.value.real(), 2)) / (nn - 1));
  const double var_im = std::max(0.0, (r.sum_sq_im - nn * std::pow(s.value.imag(), 2)) / (nn - 1));
  s.std_error = {std::sqrt(var_re / nn), std::sqrt(var_im / nn)};
  return s;
}

MomentReport MomentAccumulator::report(double k_sigma) const {
  const double n = spec_.n;
  const double t = 2.0 * spec_.mu - 1.0;
  MomentReport rep;
  rep.pairs = mean_.count;
  rep.mean_offdiag = finish(mean_, 0.0);
  rep.var_offdiag = finish(var_, 1.0 / n);
  rep.cov_pair = finish(cov_, spec_.rho / n);
  rep.pseudo_cov = finish(pseudo_, t / n);
  rep.conj_cov = finish(conj_, t * spec_.rho / n);
  const std::pair<const char*, const MomentStat*> all[] = {
      {"mean_offdiag", &rep.mean_offdiag}, {"var_offdiag", &rep.var_offdiag},
      {"cov_pair", &rep.cov_pair},         {"pseudo_cov", &rep.pseudo_cov},
      {"conj_cov", &rep.conj_cov}};
  for (const auto& [name, stat] : all)
    if (!stat->within(k_sigma)) rep.flagged.emplace_back(name);
  return rep;
}

MomentReport moment_self_test(const EllipticMatrix& matrix) {
  MomentAccumulator acc(matrix.spec);
  acc.add(matrix);
  return acc.report();
}

void write_matrix(const std::string& path, const EllipticMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  const std::uint64_t n = m.n();
  out.write(kMagic, 4);
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(&kFlagComplexInterleaved), sizeof kFlagComplexInterleaved);
  // std::complex<double> is layout-compatible with double[2].
  out.write(reinterpret_cast<const char*>(m.entries.data()),
            static_cast<std::streamsize>(n * n * sizeof(Complex)));
  if (!out) throw std::runtime_error("write to " + path + " failed");
}

RowMatrix read_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[4];
  std::uint64_t n = 0;
  std::uint32_t flags = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  in.read(reinterpret_cast<char*>(&flags), sizeof flags);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error(path + ": bad header");
  if (n == 0 || n > static_cast<std::uint64_t>(kMaxDimension))
    throw std::runtime_error(path + ": dimension out of range");
  if (flags != kFlagComplexInterleaved) throw std::runtime_error(path + ": unsupported flags");
  RowMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  in.read(reinterpret_cast<char*>(x.data()), static_cast<std::streamsize>(n * n * sizeof(Complex)));
  if (!in) throw std::runtime_error(path + ": truncated payload");
  return x;
}

}  // namespace ellipse
