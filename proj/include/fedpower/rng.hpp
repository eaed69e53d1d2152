#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "fedpower/linalg.hpp"

namespace fedpower {

/// Philox4x32-10 block function (Salmon et al., Random123).
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                            std::array<std::uint32_t, 2> key);

/// Where a random stream is consumed. The numeric values are part of the
/// trace format and must not be renumbered.
enum class StreamSite : std::uint8_t {
  init = 1,          // shared Z_0
  local_noise = 2,   // worker perturbation, round t, worker i
  server_noise = 3,  // server perturbation, round t
  sampling = 4,      // device sampling S_t, round t
  partition = 5,     // row shuffle
  synth_left = 6,    // synthetic U factor
  synth_right = 7,   // synthetic V factor
  sketch = 8,        // DR-SVD test matrix
  repeat = 9,        // per-repeat seed derivation, worker = repeat index
};

/// Identifies one stream under a root seed. Packed as
/// site << 56 | (round & 0xffffff) << 32 | worker.
struct StreamId {
  StreamSite site = StreamSite::init;
  std::uint32_t round = 0;
  std::uint32_t worker = 0;

  std::uint64_t packed() const noexcept {
    return (std::uint64_t(site) << 56) | (std::uint64_t(round & 0xffffffu) << 32) |
           std::uint64_t(worker);
  }
};

/// Human-readable description of the stream derivation, written into trace
/// headers so a run can be replayed elsewhere.
std::string stream_derivation_note();

/// Sequential reader over one Philox stream. The key is the root seed, the
/// counter is (block index lo, block index hi, stream id lo, stream id hi).
/// Two streams with different ids never share a counter value.
class NoiseStream {
 public:
  NoiseStream(std::uint64_t seed, StreamId id) noexcept;

  std::uint64_t next_u64() noexcept;
  /// Uniform on the open interval (0, 1), 53 bits.
  double uniform() noexcept;
  /// Standard normal via Box-Muller; both outputs of a pair are used.
  double normal() noexcept;
  /// Uniform integer in [0, bound), bound >= 1, without modulo bias.
  std::uint64_t below(std::uint64_t bound) noexcept;

 private:
  void refill() noexcept;

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Derive a child seed (e.g. per repeat) from a root seed.
std::uint64_t derive_seed(std::uint64_t seed, StreamId id) noexcept;

/// rows x cols matrix of i.i.d. N(0, scale^2) entries, filled column-major
/// from the given stream. scale == 0 yields exact zeros.
Matrix sample_noise(Index rows, Index cols, double scale, NoiseStream& stream);
Matrix sample_noise(Index rows, Index cols, double scale, std::uint64_t seed,
                    StreamId id);

/// Standard Gaussian matrix from a fresh stream.
Matrix gaussian_matrix(Index rows, Index cols, std::uint64_t seed, StreamId id);

}  // namespace fedpower
