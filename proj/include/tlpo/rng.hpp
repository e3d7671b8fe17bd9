#pragma once

#include <cstdint>
#include <random>

namespace tlpo {

/// Deterministic random stream addressed by (master_seed, stream_id).
///
/// Every simulation draw in the library flows through one of these streams,
/// so a run is fully reproducible from the master seed alone, and parallel
/// replications can each own a private stream without sharing state.
class RngStream {
 public:
  explicit RngStream(std::uint64_t master_seed, std::uint64_t stream_id = 0)
      : master_seed_(master_seed), stream_id_(stream_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                      static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(stream_id),
                      static_cast<std::uint32_t>(stream_id >> 32)};
    engine_.seed(seq);
  }

  double normal() { return normal_(engine_); }

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace tlpo
