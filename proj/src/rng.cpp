#include "fedpower/rng.hpp"

#include <cmath>
#include <numbers>

namespace fedpower {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo) noexcept {
  const std::uint64_t p = std::uint64_t(a) * std::uint64_t(b);
  hi = std::uint32_t(p >> 32);
  lo = std::uint32_t(p);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                            std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

std::string stream_derivation_note() {
  return "philox4x32-10; key=(seed lo32, seed hi32); counter=(block lo32, block hi32, "
         "stream lo32, stream hi32); stream=site<<56|round<<32|worker; "
         "sites: init=1 local_noise=2 server_noise=3 sampling=4 partition=5 "
         "synth_left=6 synth_right=7 sketch=8 repeat=9; "
         "normal=Box-Muller on 53-bit uniforms; repeat seed j = first u64 of "
         "stream(repeat,0,j) under the root seed";
}

NoiseStream::NoiseStream(std::uint64_t seed, StreamId id) noexcept
    : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)}, stream_(id.packed()) {}

void NoiseStream::refill() noexcept {
  buffer_ = philox4x32_10({std::uint32_t(block_), std::uint32_t(block_ >> 32),
                           std::uint32_t(stream_), std::uint32_t(stream_ >> 32)},
                          key_);
  ++block_;
  used_ = 0;
}

std::uint64_t NoiseStream::next_u64() noexcept {
  if (used_ > 2) refill();
  const std::uint64_t lo = buffer_[used_];
  const std::uint64_t hi = buffer_[used_ + 1];
  used_ += 2;
  return (hi << 32) | lo;
}

double NoiseStream::uniform() noexcept {
  return (double(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double NoiseStream::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::uint64_t NoiseStream::below(std::uint64_t bound) noexcept {
  // Rejection on the top of the range keeps every residue equally likely.
  const std::uint64_t limit = std::uint64_t(-1) - (std::uint64_t(-1) % bound);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % bound;
}

std::uint64_t derive_seed(std::uint64_t seed, StreamId id) noexcept {
  NoiseStream s(seed, id);
  return s.next_u64();
}

Matrix sample_noise(Index rows, Index cols, double scale, NoiseStream& stream) {
  if (!(scale >= 0.0)) throw InvalidArgument("noise scale must be nonnegative");
  Matrix out = Matrix::Zero(rows, cols);
  if (scale == 0.0) return out;
  double* p = out.data();
  for (Index i = 0; i < out.size(); ++i) p[i] = scale * stream.normal();
  return out;
}

Matrix sample_noise(Index rows, Index cols, double scale, std::uint64_t seed,
                    StreamId id) {
  NoiseStream stream(seed, id);
  return sample_noise(rows, cols, scale, stream);
}

Matrix gaussian_matrix(Index rows, Index cols, std::uint64_t seed, StreamId id) {
  return sample_noise(rows, cols, 1.0, seed, id);
}

}  // namespace fedpower
