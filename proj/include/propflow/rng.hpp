// Copyright 2026 The Propflow Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace propflow {

// SplitMix64. The constants are part of the fixture contract: seeded
// streams must be reproducible across platforms and languages.
//   increment 0x9E3779B97F4A7C15
//   mix1      0xBF58476D1CE4E5B9  (after z ^= z >> 30)
//   mix2      0x94D049BB133111EB  (after z ^= z >> 27)
//   final     z ^= z >> 31
class SplitMix64 {
  public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ULL;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    double next_range(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Uniform in [0, n); fixed-point multiply keeps the stream portable.
    uint64_t next_below(uint64_t n) {
        return static_cast<uint64_t>(next_double() * static_cast<double>(n));
    }

    // Box-Muller from two fresh uniforms; no state beyond the integer
    // stream, so draws stay aligned across implementations.
    double next_gaussian() {
        double u1 = next_double();
        const double u2 = next_double();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

  private:
    uint64_t state_;
};

} // namespace propflow
