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
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ellipse/common.hpp"

namespace ellipse {

using CMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;
using RowMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kMaxDimension = 8192;

enum class BaseDistribution { kGaussian, kRademacherMixture };

std::string to_string(BaseDistribution b);
BaseDistribution parse_base(const std::string& name);

struct EnsembleSpec {
  int n = 0;
  double rho = 0.0;
  double mu = 0.5;
  BaseDistribution base = BaseDistribution::kGaussian;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument when the parameters are not admissible.
  void validate() const;
};

struct EllipticMatrix {
  EnsembleSpec spec;
  std::uint64_t trial = 0;
  RowMatrix entries;

  int n() const { return static_cast<int>(entries.rows()); }
};

/// Draws trial `trial` of the ensemble. Entries are split across `threads` workers by
/// row ranges; the result does not depend on the thread count.
EllipticMatrix sample(const EnsembleSpec& spec, std::uint64_t trial = 0, int threads = 1);

struct MomentStat {
  Complex value{};
  Complex target{};
  Complex std_error{};  ///< per real/imaginary component
  bool within(double k) const;
};

struct MomentReport {
  long pairs = 0;
  MomentStat mean_offdiag;
  MomentStat var_offdiag;  ///< E|x_ij|^2 (real)
  MomentStat cov_pair;     ///< E x_ij x_ji
  MomentStat pseudo_cov;   ///< E x_ij^2
  MomentStat conj_cov;     ///< E x_ij conj(x_ji)
  std::vector<std::string> flagged;  ///< names of statistics beyond 5 standard errors
};

/// Accumulates per-pair moment statistics over one or more matrices drawn from the
/// same spec (dimension and parameters must agree).
class MomentAccumulator {
 public:
  explicit MomentAccumulator(const EnsembleSpec& spec);
  void add(const EllipticMatrix& m);
  MomentReport report(double k_sigma = 5.0) const;

 private:
  struct Running {
    long count = 0;
    Complex sum{};
    double sum_sq_re = 0.0;
    double sum_sq_im = 0.0;
    void push(Complex x);
  };
  MomentStat finish(const Running& r, Complex target) const;

  EnsembleSpec spec_;
  Running mean_, var_, cov_, pseudo_, conj_;
};

MomentReport moment_self_test(const EllipticMatrix& matrix);

/// Binary dump: 4-byte magic "ELLM", uint64 n, uint32 flags, then 2 n^2 doubles
/// (re, im) row-major; all little-endian.
void write_matrix(const std::string& path, const EllipticMatrix& m);
RowMatrix read_matrix(const std::string& path);

}  // namespace ellipse
