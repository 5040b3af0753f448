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

#include "ellipse/common.hpp"

#include <charconv>
#include <cmath>
#include <regex>

namespace ellipse {
namespace {

const std::string kNum = R"((?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)";

double to_double(const std::string& s) {
  // std::stod accepts every token the regexes let through.
  return s.empty() ? 1.0 : std::stod(s);
}

std::string shortest(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, end);
}

}  // namespace

Complex parse_complex(const std::string& text) {
  static const std::regex full("^([+-]?" + kNum + ")([+-])(" + kNum + ")?i$");
  static const std::regex imag("^([+-]?)(" + kNum + ")?i$");
  static const std::regex real("^[+-]?" + kNum + "$");
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
  std::smatch m;
  if (std::regex_match(s, m, real)) return {std::stod(s), 0.0};
  if (std::regex_match(s, m, full)) {
    const double im = to_double(m[3].str());
    return {std::stod(m[1].str()), m[2].str() == "-" ? -im : im};
  }
  if (std::regex_match(s, m, imag)) {
    const double im = to_double(m[2].str());
    return {0.0, m[1].str() == "-" ? -im : im};
  }
  throw std::invalid_argument("cannot parse complex number '" + text + "' (expected a+bi)");
}

std::string format_complex(Complex z) {
  const double im = z.imag();
  std::string out = shortest(z.real());
  out += std::signbit(im) ? "-" : "+";
  out += shortest(std::abs(im));
  out += "i";
  return out;
}

}  // namespace ellipse
