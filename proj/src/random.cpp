#include "sdgd/random.hpp"

namespace sdgd {

namespace {

constexpr std::uint32_t kWeylA = 0x9E3779B9u;
constexpr std::uint32_t kWeylB = 0xBB67AE85u;
constexpr std::uint32_t kMulA = 0xD2511F53u;
constexpr std::uint32_t kMulB = 0xCD9E8D57u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  lo = static_cast<std::uint32_t>(p);
  hi = static_cast<std::uint32_t>(p >> 32);
}

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t lo0, hi0, lo1, hi1;
    mulhilo(kMulA, ctr[0], lo0, hi0);
    mulhilo(kMulB, ctr[2], lo1, hi1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeylA;
    key[1] += kWeylB;
  }
  return ctr;
}

RngStream::result_type RngStream::operator()() {
  if (have_) {
    have_ = false;
    return pending_;
  }
  // Counter: block index, low epoch word, substream. Key: seed mixed with
  // the purpose and the high epoch word.
  const std::array<std::uint32_t, 4> ctr = {
      static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
      static_cast<std::uint32_t>(epoch_), sub_};
  const std::uint64_t k =
      splitmix64(seed_ ^ splitmix64((static_cast<std::uint64_t>(purpose_) << 32) | (epoch_ >> 32)));
  const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(k),
                                            static_cast<std::uint32_t>(k >> 32)};
  const auto out = philox4x32(ctr, key);
  ++block_;
  pending_ = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
  have_ = true;
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

double RngStream::uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

}  // namespace sdgd
