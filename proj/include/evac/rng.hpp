/*
   Copyright 2026 The evacsim Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace evac {

/// SplitMix64 finalizer; used only to derive stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed for sub-stream `index` of `master`. Independent of how many workers
/// consume the streams.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return mix64(mix64(master) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/**
 * Single-owner random stream.
 *
 * mt19937_64 output is fully specified by the standard, and the conversions
 * below avoid the implementation-defined std distributions, so a seed gives
 * the same sample sequence on every platform.
 */
class RngStream {
public:
    explicit RngStream(std::uint64_t seed = 0) : engine_(seed) {}

    RngStream derive(std::uint64_t index) const { return RngStream(derive_seed(seed_of_(), index)); }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    /// Index drawn from a probability list (masses assumed to sum to 1).
    std::size_t discrete(std::span<const double> probs) {
        const double u = uniform();
        double acc = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc) return i;
        }
        // Rounding left u above the accumulated mass: take the last positive entry.
        for (std::size_t i = probs.size(); i-- > 0;)
            if (probs[i] > 0.0) return i;
        return 0;
    }

private:
    std::uint64_t seed_of_() const {
        // Derivation reads the engine state without advancing the stream.
        std::mt19937_64 copy = engine_;
        return copy();
    }
    std::mt19937_64 engine_;
};

}  // namespace evac
