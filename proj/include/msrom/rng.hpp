#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace msrom {

/// Standard normal draws from a seeded mt19937_64 stream via Box-Muller.
/// The distribution code is ours (not std::normal_distribution) so the
/// produced sequence is pinned for a given seed.
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : gen_(seed) {}

  double next();
  std::vector<double> draw(int n);

 private:
  double uniform_open();  // in (0, 1]

  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace msrom
