#pragma once

#include <array>
#include <cstdint>

namespace centroid {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
/// One call maps (counter, key) to four 32-bit words; no state is carried.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

/// Random stream owned by a single event. The key is the run seed and the
/// counter is (event index, block index), so the draws of event i never depend
/// on how events are distributed over workers.
class EventStream {
 public:
  EventStream(std::uint64_t seed, std::uint64_t event_index) noexcept;

  /// Uniform double in the open interval (0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Standard normal variate (Box-Muller; the second value of each pair is cached).
  double normal() noexcept;

 private:
  std::uint64_t next_u64() noexcept;

  std::array<std::uint32_t, 2> key_;
  std::uint64_t event_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffered_words_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace centroid
