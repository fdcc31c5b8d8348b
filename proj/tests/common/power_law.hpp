#pragma once

// Inverse-CDF sampler for the discrete power law p(x) ~ x^-alpha, x >= x_min.
// The probability table is summed directly up to `table_size`; the rest of
// the tail is sampled from its continuous approximation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "strateval/random.hpp"

namespace fixtures {

class PowerLawSampler {
 public:
  PowerLawSampler(double alpha, std::uint64_t x_min, std::size_t table_size = 1'000'000)
      : alpha_(alpha), x_min_(x_min) {
    cdf_.reserve(table_size);
    double sum = 0.0;
    for (std::size_t k = 0; k < table_size; ++k) {
      sum += std::pow(static_cast<double>(x_min + k), -alpha);
      cdf_.push_back(sum);
    }
    const double last = static_cast<double>(x_min + table_size);
    // Euler-Maclaurin remainder of sum_{x >= last} x^-alpha.
    const double tail = std::pow(last, 1.0 - alpha) / (alpha - 1.0) + 0.5 * std::pow(last, -alpha);
    total_ = sum + tail;
    for (auto& c : cdf_) c /= total_;
    end_ = last;
  }

  std::uint64_t operator()(strateval::Rng& rng) const {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it != cdf_.end()) return x_min_ + static_cast<std::uint64_t>(it - cdf_.begin());
    const double v = (u - cdf_.back()) / (1.0 - cdf_.back());
    const double x = (end_ - 0.5) * std::pow(1.0 - v, -1.0 / (alpha_ - 1.0)) + 0.5;
    return static_cast<std::uint64_t>(std::min(x, 1e18));
  }

 private:
  double alpha_;
  std::uint64_t x_min_;
  std::vector<double> cdf_;
  double total_ = 0.0;
  double end_ = 0.0;
};

}  // namespace fixtures
