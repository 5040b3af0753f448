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

#include <complex>
#include <stdexcept>
#include <string>

namespace ellipse {

using Complex = std::complex<double>;

inline constexpr Complex kI{0.0, 1.0};

/// Raised when an iterative or quadrature routine cannot reach its tolerance,
/// or a LAPACK driver reports failure.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses "a+bi", "a-bi", "a", "bi", "i", "-2.5e-1+3e2i". Throws
/// std::invalid_argument on malformed input.
Complex parse_complex(const std::string& text);

/// Inverse of parse_complex, with full round-trip precision.
std::string format_complex(Complex z);

}  // namespace ellipse
