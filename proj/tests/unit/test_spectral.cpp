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

#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "ellipse/linalg.hpp"
#include "ellipse/rng.hpp"
#include "ellipse/spectral.hpp"

using namespace ellipse;

namespace {

RowMatrix random_matrix(int n, double rho, double mu, std::uint64_t seed) {
  return sample(EnsembleSpec{n, rho, mu, BaseDistribution::kGaussian, seed}).entries;
}

// Second moments of the entries of W = [[0, X], [X*, 0]] under the pair model.
struct Entry {
  bool zero;
  int i, j;
  bool conj;
};

Entry w_entry(int a, int b, int n) {
  if (a < n && b >= n) return {false, a, b - n, false};
  if (a >= n && b < n) return {false, b, a - n, true};  // (X*)_{a-n, b} = conj(x_{b, a-n})
  return {true, 0, 0, false};
}

Complex moment(const Entry& e, const Entry& f, int n, double rho, double mu) {
  if (e.zero || f.zero) return 0.0;
  const double p = (2.0 * mu - 1.0) * rho / n;
  const double q = (2.0 * mu - 1.0) / n;
  const double diag_sq = (2.0 * mu - 1.0) / n;
  const bool same = e.i == f.i && e.j == f.j;
  const bool swapped = e.i == f.j && e.j == f.i && e.i != e.j;
  if (e.conj == f.conj) {
    // E x x (or its conjugate; all values are real here)
    if (same) return e.i == e.j ? diag_sq : q;
    if (swapped) return rho / n;
    return 0.0;
  }
  if (same) return 1.0 / n;
  if (swapped) return p;
  return 0.0;
}

}  // namespace

TEST_CASE("hermitize and decompose the 1x1 zero matrix") {
  const RowMatrix x = RowMatrix::Zero(1, 1);
  const auto h = hermitize(x, 1.0);
  CHECK(h.matrix(0, 1) == Complex(-1.0, 0.0));
  CHECK(h.matrix(1, 0) == Complex(-1.0, 0.0));
  CHECK(h.matrix(0, 0) == Complex(0.0, 0.0));
  CHECK(h.matrix.adjoint() == h.matrix);
  for (const auto& dec : {decompose(h), decompose_svd(x, 1.0)}) {
    CHECK(dec.eigenvalues()(0) == doctest::Approx(-1.0));
    CHECK(dec.eigenvalues()(1) == doctest::Approx(1.0));
    CHECK(std::abs(resolvent_trace(dec, 1.0) - Complex(0.0, 0.5)) <= 1e-15);
    CHECK(small_singular_count(dec, 0.5) == 0);
    CHECK(smallest_singular_value(dec) == doctest::Approx(1.0));
    const auto ld = log_det_check(dec, 1e3);
    CHECK(std::abs(ld.lhs) <= 1e-15);
    CHECK(std::abs(ld.rhs) <= 1e-8);
  }
}

TEST_CASE("eigenvalues are +- singular values") {
  const RowMatrix x = random_matrix(8, 0.3, 0.5, 1);
  const Complex zeta(0.2, -0.1);
  const auto dec = decompose(hermitize(x, zeta));
  CMatrix a = x;
  a.diagonal().array() -= zeta;
  // Eigen's Jacobi SVD is independent of LAPACK.
  Eigen::VectorXd s = Eigen::JacobiSVD<CMatrix>(a).singularValues();
  std::vector<double> want;
  for (int j = 0; j < 8; ++j) {
    want.push_back(s(j));
    want.push_back(-s(j));
  }
  std::sort(want.begin(), want.end());
  for (int k = 0; k < 16; ++k) CHECK(std::abs(dec.eigenvalues()(k) - want[k]) <= 1e-12);
  CHECK(std::abs(smallest_singular_value(dec) - s(7)) <= 1e-12);
  CHECK(std::abs(smallest_singular_value(decompose_svd(x, zeta, false)) - s(7)) <= 1e-12);
}

TEST_CASE("decomposition invariants") {
  const int n = 24;
  const RowMatrix x = random_matrix(n, -0.4, 0.7, 2);
  const Complex zeta(0.5, 0.3);
  const auto h = hermitize(x, zeta);
  const double h_norm = h.matrix.cwiseAbs().maxCoeff();
  for (const auto& dec : {decompose(h), decompose_svd(x, zeta)}) {
    const auto& l = dec.eigenvalues();
    const CMatrix v = dec.eigenvector_matrix();
    CHECK((v.adjoint() * v - CMatrix::Identity(2 * n, 2 * n)).cwiseAbs().maxCoeff() <= 1e-12);
    const CMatrix rec = v * l.cast<Complex>().asDiagonal() * v.adjoint();
    CHECK((rec - h.matrix).cwiseAbs().maxCoeff() <= 1e-10 * h_norm);
    for (int k = 0; k < 2 * n; ++k) CHECK(std::abs(l(k) + l(2 * n - 1 - k)) <= 1e-9);
    for (int k = 1; k < 2 * n; ++k) CHECK(l(k) >= l(k - 1));
    CHECK(std::abs(l.sum()) <= 1e-9 * n);
    CMatrix a = x;
    a.diagonal().array() -= zeta;
    CHECK(l.squaredNorm() == doctest::Approx(2.0 * a.squaredNorm()).epsilon(1e-8));
  }
}

TEST_CASE("resolvent functionals agree across routes and with dense inversion") {
  const int n = 16;
  const RowMatrix x = random_matrix(n, 0.5, 0.5, 3);
  const Complex zeta(0.3, 0.2);
  const auto h = hermitize(x, zeta);
  const auto full = decompose(h);
  const auto fast = decompose_svd(x, zeta);
  const auto probes = standard_probes(n, 4, 17);
  for (double eta : {1e-3, 0.05, 1.0}) {
    const CMatrix g = dense_resolvent(h, eta);
    const Complex dense_trace = g.trace() / (2.0 * n);
    CHECK(std::abs(resolvent_trace(full, eta) - dense_trace) <= 1e-9);
    CHECK(std::abs(resolvent_trace(fast, eta) - dense_trace) <= 1e-9);
    CHECK(resolvent_trace(fast, eta).imag() > 0.0);

    const Mat2 pf = partial_trace(full, eta);
    const Mat2 ps = partial_trace(fast, eta);
    CHECK(std::abs(pf(0, 0) - pf(1, 1)) <= 1e-10);
    CHECK(std::abs(0.5 * (pf(0, 0) + pf(1, 1)) - dense_trace) <= 1e-10);
    CHECK(std::abs(pf(0, 1) - g.topRightCorner(n, n).trace() / double(n)) <= 1e-9);
    CHECK((pf - ps).cwiseAbs().maxCoeff() <= 1e-9);

    const auto blocks = resolvent_blocks(fast, eta);
    CHECK((blocks.b11 - g.topLeftCorner(n, n)).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((blocks.b12 - g.topRightCorner(n, n)).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((blocks.b21 - g.bottomLeftCorner(n, n)).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((blocks.b22 - g.bottomRightCorner(n, n)).cwiseAbs().maxCoeff() <= 1e-9);

    for (const auto& px : probes) {
      for (const auto& py : probes) {
        const Complex want = px.dot(g * py);
        CHECK(std::abs(resolvent_isotropic(fast, eta, px, py) - want) <= 1e-9 / eta);
        CHECK(std::abs(resolvent_isotropic(full, eta, px, py) - want) <= 1e-9 / eta);
        CHECK(std::abs(want) <= 1.0 / eta + 1e-12);
      }
      // Ward identity: eta |G x|^2 = Im <x, G x>
      const double lhs = eta * (g * px).squaredNorm();
      const double rhs = resolvent_isotropic(fast, eta, px, px).imag();
      CHECK(std::abs(lhs - rhs) <= 1e-9 * rhs);
    }
    Complex diag_sum = 0.0;
    for (int i = 0; i < 2 * n; ++i) {
      CVector e = CVector::Zero(2 * n);
      e(i) = 1.0;
      diag_sum += resolvent_isotropic(fast, eta, e, e);
    }
    CHECK(std::abs(diag_sum / (2.0 * n) - resolvent_trace(fast, eta)) <= 1e-12);
  }
  SUBCASE("large eta") {
    for (double eta : {1e3, 1e4}) {
      const Complex t = resolvent_trace(fast, eta) * Complex(0.0, -eta);
      CHECK(std::abs(t - 1.0) <= 10.0 / (eta * eta));
    }
  }
  SUBCASE("averaged test functionals") {
    const auto tests = standard_test_matrices(n, 5);
    const double eta = 0.1;
    const CMatrix g = dense_resolvent(h, eta);
    for (const auto& b : tests) {
      CMatrix bm = CMatrix::Zero(2 * n, 2 * n);
      bm.topLeftCorner(n, n) = b.d11.asDiagonal();
      bm.topRightCorner(n, n) = b.d12.asDiagonal();
      bm.bottomLeftCorner(n, n) = b.d21.asDiagonal();
      bm.bottomRightCorner(n, n) = b.d22.asDiagonal();
      const Complex want = (bm * g).trace() / (2.0 * n);
      CHECK(std::abs(averaged_functional(fast, eta, test_matrix_weights(fast, b)) - want) <= 1e-10);
      CHECK(std::abs(averaged_functional(full, eta, test_matrix_weights(full, b)) - want) <= 1e-10);
    }
  }
}

TEST_CASE("values-only decomposition") {
  const RowMatrix x = random_matrix(12, 0.0, 0.5, 4);
  const auto dec = decompose_svd(x, 0.1, false);
  CHECK_FALSE(dec.has_vectors());
  CHECK_THROWS_AS(dec.eigenvector(0), std::logic_error);
  CHECK_THROWS_AS(dec.block_weights(0, 1), std::logic_error);
  CHECK(std::abs(resolvent_trace(dec, 0.1) - resolvent_trace(decompose_svd(x, 0.1), 0.1)) <= 1e-14);
}

TEST_CASE("log-determinant identity") {
  for (int n : {16, 64}) {
    const RowMatrix x = random_matrix(n, 0.5, 0.5, 10 + n);
    const Complex zeta(0.1, 0.4);
    const auto dec = decompose_svd(x, zeta, false);
    CMatrix a = x;
    a.diagonal().array() -= zeta;
    const double lu = 2.0 * log_abs_det(a);
    for (double t : {1e2, 1e3}) {
      const auto ld = log_det_check(dec, t);
      CHECK(std::abs(ld.lhs - ld.rhs) <= 1e-6 * n);
      CHECK(std::abs(ld.lhs - lu) <= 1e-9 * n);
    }
  }
  CHECK_THROWS_AS(log_det_check(decompose_svd(RowMatrix::Zero(2, 2), 0.0, false), 10.0),
                  NumericalError);
  CHECK_THROWS_AS(log_det_check(decompose_svd(RowMatrix::Identity(2, 2), 0.0, false), 0.5),
                  std::invalid_argument);
}

TEST_CASE("small singular value counts") {
  const int n = 32;
  const auto dec = decompose_svd(random_matrix(n, 0.2, 0.5, 6), Complex(0.2, 0.1), false);
  const double top = dec.eigenvalues().cwiseAbs().maxCoeff();
  CHECK(small_singular_count(dec, top) == 2 * n);
  CHECK(small_singular_count(dec, 2.0 * top) == 2 * n);
  long prev = 0;
  for (double eta = 1e-4; eta < 4.0; eta *= 2.0) {
    const long c = small_singular_count(dec, eta);
    CHECK(c >= prev);
    CHECK(c % 2 == 0);
    prev = c;
  }
}

TEST_CASE("self-energy with Hadamard corrections matches E[W A W]") {
  const int n = 4;
  const double rho = 0.35, mu = 0.8;
  const SelfEnergyData se = SelfEnergyData::from_spec({n, rho, mu, BaseDistribution::kGaussian, 0});
  CHECK(se.p == Complex((2 * mu - 1) * rho / n, 0.0));
  CHECK(se.q == Complex((2 * mu - 1) / n, 0.0));
  Substream s = rng_policy(3, 0, 0);
  CMatrix a(2 * n, 2 * n);
  for (int i = 0; i < 2 * n; ++i)
    for (int j = 0; j < 2 * n; ++j) a(i, j) = {s.normal(), s.normal()};
  CMatrix brute = CMatrix::Zero(2 * n, 2 * n);
  for (int i = 0; i < 2 * n; ++i)
    for (int j = 0; j < 2 * n; ++j)
      for (int k = 0; k < 2 * n; ++k)
        for (int l = 0; l < 2 * n; ++l)
          brute(i, j) += moment(w_entry(i, k, n), w_entry(l, j, n), n, rho, mu) * a(k, l);
  const BlockMatrix ab{a.topLeftCorner(n, n), a.topRightCorner(n, n), a.bottomLeftCorner(n, n),
                       a.bottomRightCorner(n, n)};
  const BlockMatrix f = self_energy_hat(ab, rho, se);
  CMatrix formula(2 * n, 2 * n);
  formula << f.b11, f.b12, f.b21, f.b22;
  // The block-trace part treats the diagonal atoms as if E x_ii^2 were rho/n.
  CMatrix diag_atoms = CMatrix::Zero(2 * n, 2 * n);
  const double gap = rho / n - (2 * mu - 1) / n;
  for (int i = 0; i < n; ++i) {
    diag_atoms(i, n + i) = gap * a(n + i, i);
    diag_atoms(n + i, i) = gap * a(i, n + i);
  }
  CHECK((formula - (brute + diag_atoms)).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("error matrix") {
  SUBCASE("X = 0, zeta = 0 gives D = -I / eta^2") {
    const int n = 2;
    const RowMatrix x = RowMatrix::Zero(n, n);
    const double eta = 0.5;
    const SelfEnergyData se{0.1, -0.2, true};
    const auto dec = decompose_svd(x, 0.0);
    const auto probes = standard_probes(n, 2, 1);
    std::vector<std::pair<CVector, CVector>> pairs{{probes[0], probes[0]}};
    const auto tests = standard_test_matrices(n, 1);
    const auto d = error_matrix_norms(x, dec, eta, 0.5, se, pairs, {tests[0]});
    CHECK(d.iso == doctest::Approx(1.0 / (eta * eta)).epsilon(1e-12));
    CHECK(d.avg == doctest::Approx(1.0 / (eta * eta)).epsilon(1e-12));
    const auto off = error_matrix_norms(x, dec, eta, 0.5, se, {{probes[0], probes[1]}}, {tests[2]});
    CHECK(off.iso <= 1e-14);
    CHECK(off.avg <= 1e-14);
  }
  SUBCASE("fast route equals dense products") {
    const int n = 6;
    const double rho = 0.4, mu = 0.8;
    const EnsembleSpec spec{n, rho, mu, BaseDistribution::kGaussian, 12};
    const RowMatrix x = sample(spec).entries;
    const Complex zeta(0.2, -0.3);
    const auto se = SelfEnergyData::from_spec(spec);
    const auto probes = standard_probes(n, 6, 2);
    const auto tests = standard_test_matrices(n, 2);
    const auto dec = decompose_svd(x, zeta);
    for (std::size_t a = 0; a < probes.size(); ++a) {
      for (std::size_t b = 0; b < probes.size(); ++b) {
        const std::vector<std::pair<CVector, CVector>> pair{{probes[a], probes[b]}};
        const auto fast = error_matrix_norms(x, dec, 0.2, rho, se, pair, {});
        const auto dense = error_matrix_norms_dense(x, zeta, 0.2, rho, se, pair, {});
        CHECK(fast.iso == doctest::Approx(dense.iso).epsilon(1e-10));
      }
    }
    for (const auto& t : tests) {
      const auto fast = error_matrix_norms(x, dec, 0.2, rho, se, {}, {t});
      const auto dense = error_matrix_norms_dense(x, zeta, 0.2, rho, se, {}, {t});
      CAPTURE(t.name);
      CHECK(fast.avg == doctest::Approx(dense.avg).epsilon(1e-10));
    }
  }
}

TEST_CASE("probe family") {
  const auto p = standard_probes(5, 16, 9);
  REQUIRE(p.size() == 20);
  for (const auto& v : p) CHECK(v.norm() == doctest::Approx(1.0));
  CHECK(p[1](5) == Complex(1.0, 0.0));
  CHECK(standard_probes(5, 16, 9)[10] == p[10]);
  CHECK(standard_probes(5, 16, 8)[10] != p[10]);
}
