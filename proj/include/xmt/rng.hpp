#pragma once

#include <cstdint>
#include <span>

namespace xmt {

/// Counter-based pseudo random stream.
///
/// Draw i of a stream with seed s is splitmix64(s + (i + 1) * 0x9E3779B97F4A7C15),
/// so the whole state is the pair (seed, counter) and identical states produce
/// identical sequences on every platform. Streams for sub-tasks are obtained with
/// derive(), which hashes (seed, stream id) into a fresh seed.
class RngStream {
 public:
  RngStream() = default;
  explicit RngStream(std::uint64_t seed, std::uint64_t counter = 0) : seed_(seed), counter_(counter) {}

  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();

  /// Standard normal via Box-Muller; consumes exactly two draws.
  double normal();

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  template <class T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  RngStream derive(std::uint64_t stream_id) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  friend bool operator==(const RngStream&, const RngStream&) = default;

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace xmt
