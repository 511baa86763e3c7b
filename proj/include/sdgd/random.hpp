#pragma once

#include <array>
#include <cstdint>
#include <limits>

#include <Eigen/Dense>

namespace sdgd {

/// Independent purposes a stream can be drawn for. Streams that differ only
/// in purpose are statistically independent.
enum class Purpose : std::uint32_t {
  Init = 1,
  ProblemCoeffs = 2,
  ResidualPoints = 3,
  BackwardDims = 4,
  ForwardDims = 5,
  Adversarial = 6,
  TestSet = 7,
  Reference = 8,
  Monitor = 9,
  Analysis = 10,
};

/// Counter-based random stream (Philox4x32-10). The output is a pure
/// function of (seed, epoch, purpose, position), so a stream can be copied,
/// forked, and replayed without touching any other stream.
///
/// Satisfies UniformRandomBitGenerator.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream() = default;
  RngStream(std::uint64_t seed, std::uint64_t epoch, Purpose purpose, std::uint32_t sub = 0)
      : seed_(seed), epoch_(epoch), purpose_(static_cast<std::uint32_t>(purpose)), sub_(sub) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();

  /// Child stream with the same key and a distinct substream index. Used to
  /// give every residual point or worker its own stream.
  RngStream fork(std::uint32_t sub) const { return RngStream(seed_, epoch_, purpose(), sub); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t epoch() const { return epoch_; }
  Purpose purpose() const { return static_cast<Purpose>(purpose_); }
  /// Number of 64-bit draws consumed so far.
  std::uint64_t position() const { return block_ * 2 - (have_ ? 1 : 0); }

  friend bool operator==(const RngStream&, const RngStream&) = default;

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t epoch_ = 0;
  std::uint32_t purpose_ = 0;
  std::uint32_t sub_ = 0;
  std::uint64_t block_ = 0;
  std::uint64_t pending_ = 0;
  bool have_ = false;
};

/// One Philox4x32-10 block for the given 128-bit counter and 64-bit key.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// A residual/collocation point. `t` is used only by time-dependent problems.
struct Point {
  Eigen::VectorXd x;
  double t = 0.0;
};

}  // namespace sdgd
