#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "wush/error.hpp"
#include "wush/parallel.hpp"
#include "wush/rng.hpp"

namespace wush {

// Samples are drawn in fixed chunks, chunk c from Rng::substream(seed, c), and
// reduced in chunk order, so estimates are identical for any worker count.
constexpr std::size_t kMonteCarloChunk = 4096;

struct Moments {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t n = 0;

  void add(double v) {
    sum += v;
    sum_sq += v * v;
    ++n;
  }
};

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};

// Calls body(rng) -> double once per sample and returns the sample mean with its
// standard error.
template <typename Body>
MeanEstimate chunked_mean(std::size_t n, std::uint64_t seed, std::size_t workers, Body&& body) {
  if (n < 2) throw Error(Errc::OutOfRange, "need at least 2 Monte Carlo samples");
  const std::size_t chunks = (n + kMonteCarloChunk - 1) / kMonteCarloChunk;
  std::vector<Moments> acc(chunks);
  parallel_for(chunks, workers, [&](std::size_t c) {
    Rng rng = Rng::substream(seed, c);
    const std::size_t count = std::min(kMonteCarloChunk, n - c * kMonteCarloChunk);
    for (std::size_t k = 0; k < count; ++k) acc[c].add(body(rng));
  });
  Moments total;
  for (const auto& c : acc) {
    total.sum += c.sum;
    total.sum_sq += c.sum_sq;
    total.n += c.n;
  }
  MeanEstimate e;
  e.n = total.n;
  e.mean = total.sum / static_cast<double>(total.n);
  const double var = (total.sum_sq - total.sum * e.mean) / static_cast<double>(total.n - 1);
  e.std_error = std::sqrt(std::max(var, 0.0) / static_cast<double>(total.n));
  return e;
}

}  // namespace wush
