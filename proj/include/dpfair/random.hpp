#pragma once

#include <array>
#include <cstdint>

#include "dpfair/core.hpp"

namespace dpfair {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

/// Philox4x32-10 block function (Salmon et al., SC'11).
PhiloxCounter philox4x32(PhiloxCounter counter, PhiloxKey key) noexcept;

/// Counter-based random stream for one (master_seed, trial_index) pair.
///
/// The key is the master seed; the counter is (block, trial_index), so the
/// stream for a trial never depends on how many other trials ran before it
/// or on which thread runs it.
class CounterStream {
public:
  explicit CounterStream(StreamSeed seed) noexcept;

  std::uint64_t next_u64() noexcept;

  /// Uniform on the open interval (0, 1) with 53-bit resolution.
  double uniform_open() noexcept;

  /// Standard normal draw (Box-Muller, both outputs used).
  double standard_normal() noexcept;

private:
  void refill() noexcept;

  PhiloxKey key_;
  std::uint64_t trial_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace dpfair
