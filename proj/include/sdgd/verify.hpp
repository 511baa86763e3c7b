#pragma once

#include <string>
#include <vector>

#include "sdgd/network.hpp"
#include "sdgd/pde.hpp"
#include "sdgd/random.hpp"

namespace sdgd {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Small deterministic fixture: problem, biased tanh network of the given
/// hidden width, and `n_points` residual points from the problem domain.
struct Fixture {
  PdeProblem problem;
  NetworkParams params;
  std::vector<Point> points;
};

Fixture make_fixture(ProblemKind kind, std::size_t d, std::size_t n_points, std::uint64_t seed,
                     std::size_t hidden = 8, Activation activation = Activation::Tanh);

/// Random bias-free network whose weights are N(0, scale^2 / fan_in).
NetworkParams random_bias_free(const std::vector<std::size_t>& widths, Activation activation,
                               double scale, RngStream& stream);

/// Theory and engine checks on built-in fixtures: unbiasedness, variance
/// law, Algorithm-3 bias, derivative bounds, finite differences, estimator
/// endpoints and term accounting.
std::vector<CheckResult> run_verification();

std::string format_results(const std::vector<CheckResult>& results);

}  // namespace sdgd
