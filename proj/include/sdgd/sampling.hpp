#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "sdgd/network.hpp"
#include "sdgd/pde.hpp"
#include "sdgd/random.hpp"

namespace sdgd {

/// n i.i.d. uniform points in the open unit ball of R^d.
std::vector<Point> sample_unit_ball(std::size_t d, std::size_t n, RngStream& stream);

/// x ~ N(0, I_d), t ~ U[0, 1].
std::vector<Point> sample_hjb_points(std::size_t d, std::size_t n, RngStream& stream);

/// Residual points for the problem's domain.
std::vector<Point> sample_points(const PdeProblem& problem, std::size_t n, RngStream& stream);

/// k indices from {0, ..., n_terms - 1}, returned sorted. Without
/// replacement: uniform k-subset via a partial Fisher-Yates shuffle. With
/// replacement: k i.i.d. uniform draws (repeats kept).
DimSet sample_dims(std::size_t n_terms, std::size_t k, bool replacement, RngStream& stream);

struct IndexBatch {
  DimSet backward;  // I
  DimSet forward;   // J
  bool replacement = false;
};

struct TestSet {
  std::vector<Point> points;
  std::vector<double> truth;
};

inline constexpr std::size_t kDefaultTestPoints = 20000;

/// Fixed evaluation points with reference values. HJB references use one
/// substream per point at `n_mc` samples.
TestSet make_test_set(const PdeProblem& problem, std::size_t n, std::uint64_t seed,
                      std::size_t n_mc = kDefaultReferenceSamples);

}  // namespace sdgd
