#pragma once

#include <cstdint>
#include <functional>

namespace msrom {

/// Runs fn(0..n-1) on up to `workers` threads. Results must be written to
/// per-index slots by the caller; the first thrown exception (lowest index)
/// is rethrown after all workers join, so failures are deterministic.
/// workers <= 1 runs serially on the calling thread.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

/// splitmix64 step; used to derive independent per-sample RNG seeds.
std::uint64_t splitmix64(std::uint64_t& state);

/// Seed for stream `stream` of a run seeded with `base`. Distinct (base,
/// stream) pairs give unrelated seeds, so ensembles are reproducible under
/// any parallel schedule.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace msrom
