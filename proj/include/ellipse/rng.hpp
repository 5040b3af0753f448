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

#include <array>
#include <cstdint>

namespace ellipse {

/// Philox4x32-10 block function (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Stream of random numbers keyed by (seed, trial, entry). Draw k of the stream is
/// a pure function of those three values and k, so work can be split across
/// threads in any order without changing results.
class Substream {
 public:
  Substream(std::uint64_t seed, std::uint64_t trial, std::uint64_t entry);

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1), 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller.
  double normal();
  /// +1 or -1 with equal probability.
  int sign() { return (next_u64() >> 63) ? 1 : -1; }

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Entry-index namespaces, so that streams used for different purposes never collide.
enum class StreamDomain : std::uint64_t {
  kMatrix = 0,
  kProbe = 1,
  kMonteCarlo = 2,
  kTestMatrix = 3,
};

inline std::uint64_t domain_entry(StreamDomain d, std::uint64_t index) {
  return (static_cast<std::uint64_t>(d) << 56) | (index & ((std::uint64_t{1} << 56) - 1));
}

inline Substream rng_policy(std::uint64_t seed, std::uint64_t trial, std::uint64_t entry) {
  return Substream(seed, trial, entry);
}

}  // namespace ellipse
