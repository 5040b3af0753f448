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

#include "ellipse/quadrature.hpp"

#include <array>
#include <cmath>
#include <queue>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

namespace ellipse {
namespace {

struct SimpsonState {
  const std::function<double(double)>& f;
  long evaluations = 0;
  bool converged = true;
  double error = 0.0;
};

double simpson_step(SimpsonState& s, double a, double b, double fa, double fm, double fb,
                    double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = s.f(lm);
  const double frm = s.f(rm);
  s.evaluations += 2;
  const double h = b - a;
  const double left = h / 12.0 * (fa + 4.0 * flm + fm);
  const double right = h / 12.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (std::abs(delta) <= 15.0 * tol || depth <= 0) {
    if (depth <= 0 && std::abs(delta) > 15.0 * tol) s.converged = false;
    s.error += std::abs(delta) / 15.0;
    return left + right + delta / 15.0;
  }
  return simpson_step(s, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(s, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

// Tensor rule nodes/weights on [-1, 1].
struct Rule1d {
  std::vector<double> x;
  std::vector<double> w;
};

const Rule1d& rule_1d(CubatureRule rule) {
  static const Rule1d simpson{{-1.0, 0.0, 1.0}, {1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0}};
  static const Rule1d gauss8 = [] {
    using G = boost::math::quadrature::gauss<double, 8>;
    Rule1d r;
    const auto& abscissa = G::abscissa();
    const auto& weights = G::weights();
    // Boost stores the non-negative half of the symmetric rule.
    for (std::size_t i = 0; i < abscissa.size(); ++i) {
      r.x.push_back(abscissa[i]);
      r.w.push_back(weights[i]);
      if (abscissa[i] != 0.0) {
        r.x.push_back(-abscissa[i]);
        r.w.push_back(weights[i]);
      }
    }
    return r;
  }();
  return rule == CubatureRule::kSimpson ? simpson : gauss8;
}

class Cubature {
 public:
  Cubature(const std::function<double(double, double)>& f, const Box& box,
           const CubatureOptions& options)
      : f_(f), box_(box), opt_(options), rule_(rule_1d(options.rule)) {}

  QuadratureResult run() {
    std::vector<Cell> stack{make_cell(box_, apply(box_), 0)};
    // Mandatory splits first: minimum depth and cells around refine points.
    while (!stack.empty()) {
      Cell c = std::move(stack.back());
      stack.pop_back();
      if ((c.depth < opt_.min_depth || forced(c.box)) && c.depth < opt_.max_depth) {
        split_into(c, stack);
      } else {
        total_error_ += c.error;
        queue_.push(std::move(c));
      }
    }
    while (total_error_ > opt_.abs_tol && !queue_.empty() && cells_ < opt_.max_cells) {
      Cell c = queue_.top();
      queue_.pop();
      total_error_ -= c.error;
      if (c.depth >= opt_.max_depth) {
        done_.push_back(std::move(c));
        continue;
      }
      std::vector<Cell> kids;
      split_into(c, kids);
      for (auto& k : kids) {
        total_error_ += k.error;
        queue_.push(std::move(k));
      }
    }
    double value = 0.0, error = 0.0;
    for (const auto& c : done_) {
      value += c.value;
      error += c.error;
    }
    while (!queue_.empty()) {
      value += queue_.top().value;
      error += queue_.top().error;
      queue_.pop();
    }
    result_.value = value;
    result_.error = error;
    result_.converged = error <= opt_.abs_tol;
    return result_;
  }

 private:
  struct Cell {
    Box box;
    std::array<double, 4> kids;  // rule applied to the four children
    double value;                 // sum of kids
    double error;                 // |value - rule on the whole cell|
    int depth;
    bool operator<(const Cell& o) const { return error < o.error; }
  };

  static std::array<Box, 4> quarters(const Box& c) {
    const double mx = 0.5 * (c.x0 + c.x1);
    const double my = 0.5 * (c.y0 + c.y1);
    return {Box{c.x0, mx, c.y0, my}, Box{mx, c.x1, c.y0, my}, Box{c.x0, mx, my, c.y1},
            Box{mx, c.x1, my, c.y1}};
  }

  Cell make_cell(const Box& b, double coarse, int depth) {
    ++cells_;
    Cell c{b, {}, 0.0, 0.0, depth};
    const auto q = quarters(b);
    for (int k = 0; k < 4; ++k) {
      c.kids[k] = apply(q[k]);
      c.value += c.kids[k];
    }
    c.error = std::abs(c.value - coarse);
    return c;
  }

  void split_into(const Cell& c, std::vector<Cell>& out) {
    const auto q = quarters(c.box);
    for (int k = 0; k < 4; ++k) out.push_back(make_cell(q[k], c.kids[k], c.depth + 1));
  }

  bool excluded(double x, double y) const {
    for (const auto& d : opt_.exclusions) {
      const double dx = x - d.center.real();
      const double dy = y - d.center.imag();
      if (dx * dx + dy * dy < d.radius * d.radius) return true;
    }
    return false;
  }

  double apply(const Box& c) {
    const double hx = 0.5 * (c.x1 - c.x0);
    const double hy = 0.5 * (c.y1 - c.y0);
    const double cx = 0.5 * (c.x0 + c.x1);
    const double cy = 0.5 * (c.y0 + c.y1);
    double sum = 0.0;
    for (std::size_t i = 0; i < rule_.x.size(); ++i) {
      const double x = cx + hx * rule_.x[i];
      double row = 0.0;
      for (std::size_t j = 0; j < rule_.x.size(); ++j) {
        const double y = cy + hy * rule_.x[j];
        if (!opt_.exclusions.empty() && excluded(x, y)) continue;
        row += rule_.w[j] * f_(x, y);
        ++result_.evaluations;
      }
      sum += rule_.w[i] * row;
    }
    return sum * hx * hy;
  }

  bool forced(const Box& c) const {
    const double size = std::max(c.x1 - c.x0, c.y1 - c.y0);
    if (size <= opt_.refine_size) return false;
    const double margin = 0.5 * size;
    for (const auto& p : opt_.refine_points) {
      if (p.real() >= c.x0 - margin && p.real() <= c.x1 + margin && p.imag() >= c.y0 - margin &&
          p.imag() <= c.y1 + margin)
        return true;
    }
    return false;
  }

  const std::function<double(double, double)>& f_;
  Box box_;
  const CubatureOptions& opt_;
  const Rule1d& rule_;
  QuadratureResult result_;
  std::priority_queue<Cell> queue_;
  std::vector<Cell> done_;
  double total_error_ = 0.0;
  long cells_ = 0;
};

}  // namespace

QuadratureResult adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                                  double abs_tol, int max_depth) {
  SimpsonState s{f};
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  s.evaluations = 3;
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  QuadratureResult r;
  r.value = simpson_step(s, a, b, fa, fm, fb, whole, abs_tol, max_depth);
  r.error = s.error;
  r.evaluations = s.evaluations;
  r.converged = s.converged;
  return r;
}

double composite_gauss_legendre(const std::function<double(double)>& f, double a, double b,
                                int panels) {
  using G = boost::math::quadrature::gauss<double, 8>;
  const double h = (b - a) / panels;
  double sum = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * h;
    sum += G::integrate(f, lo, lo + h);
  }
  return sum;
}

QuadratureResult adaptive_cubature(const std::function<double(double, double)>& f, const Box& box,
                                   const CubatureOptions& options) {
  return Cubature(f, box, options).run();
}

}  // namespace ellipse
