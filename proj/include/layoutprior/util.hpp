#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>

namespace layoutprior {

using Rng = std::mt19937_64;

// Independent stream for (seed, index). Serial and parallel callers that derive
// per-item generators this way produce identical results.
[[nodiscard]] std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) noexcept;
[[nodiscard]] Rng stream_rng(std::uint64_t seed, std::uint64_t index);

[[nodiscard]] double standard_normal(Rng& rng);
[[nodiscard]] double uniform(Rng& rng, double lo, double hi);

// Worker count: LAYOUTPRIOR_THREADS when set (>= 1), else hardware concurrency.
[[nodiscard]] unsigned thread_cap();

// Runs body(i) for i in [0, n) on up to thread_cap() threads. body must not touch
// shared mutable state except through index-disjoint slots.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace layoutprior
