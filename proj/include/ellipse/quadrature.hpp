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

#include <functional>
#include <vector>

#include "ellipse/common.hpp"

namespace ellipse {

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;  ///< estimated absolute error
  long evaluations = 0;
  bool converged = true;
};

/// Adaptive Simpson rule with Richardson correction on [a, b].
QuadratureResult adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                                  double abs_tol, int max_depth = 40);

/// Composite 8-point Gauss-Legendre rule with `panels` equal panels on [a, b].
double composite_gauss_legendre(const std::function<double(double)>& f, double a, double b,
                                int panels);

struct Box {
  double x0, x1, y0, y1;
  double area() const { return (x1 - x0) * (y1 - y0); }
};

struct Disk {
  Complex center;
  double radius;
};

enum class CubatureRule { kSimpson, kGauss8 };

struct CubatureOptions {
  double abs_tol = 1e-8;
  CubatureRule rule = CubatureRule::kGauss8;
  int min_depth = 2;
  int max_depth = 16;
  /// Cells containing one of these points are split down to `refine_size`.
  std::vector<Complex> refine_points;
  double refine_size = 1e-3;
  /// Quadrature nodes inside these disks get zero weight.
  std::vector<Disk> exclusions;
  long max_cells = 200'000;
};

/// Globally adaptive quadtree cubature of f(x, y) over a box. The cell with the largest
/// local error |children - parent| is split until the summed error is below abs_tol.
QuadratureResult adaptive_cubature(const std::function<double(double, double)>& f, const Box& box,
                                   const CubatureOptions& options);

}  // namespace ellipse
