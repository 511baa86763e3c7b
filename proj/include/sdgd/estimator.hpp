#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sdgd/network.hpp"
#include "sdgd/pde.hpp"

namespace sdgd {

enum class Algorithm : std::uint8_t { Full, Algo1, Algo2, Algo3, Accumulated };

const char* to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& name);

struct EstimateMeta {
  Algorithm algorithm = Algorithm::Full;
  std::size_t batch = 0;     // |B|
  std::size_t backward = 0;  // |I|
  std::size_t forward = 0;   // |J|
  /// Wrapped second derivatives computed: sum over points of the number of
  /// distinct dimensions on that point's tape.
  std::size_t term_evals = 0;
  double wall_s = 0.0;
};

struct GradEstimate {
  ParamGrad grad;
  EstimateMeta meta;
};

struct EstimatorOptions {
  /// Per-point work is spread over this many threads; the reduction is
  /// always sequential in point order.
  std::size_t workers = 1;
};

/// (1 / (|B| N_L^2)) sum_n r_n dr_n/dtheta with every dimension in both passes.
GradEstimate full_grad(const PdeProblem& problem, const NetworkParams& params,
                       const std::vector<Point>& points, const EstimatorOptions& opts = {});

/// Exact (detached) residual, backward pass restricted to I.
GradEstimate grad_algo1(const PdeProblem& problem, const NetworkParams& params,
                        const std::vector<Point>& points, const DimSet& I,
                        const EstimatorOptions& opts = {});

/// Residual estimated from J, backward pass on I.
GradEstimate grad_algo2(const PdeProblem& problem, const NetworkParams& params,
                        const std::vector<Point>& points, const DimSet& I, const DimSet& J,
                        const EstimatorOptions& opts = {});

/// Same index set in both passes. Biased unless I covers every dimension.
GradEstimate grad_algo3(const PdeProblem& problem, const NetworkParams& params,
                        const std::vector<Point>& points, const DimSet& I,
                        const EstimatorOptions& opts = {});

/// Arithmetic mean of the gradients; counts and times are summed.
GradEstimate accumulate(const std::vector<GradEstimate>& grads);

/// Residual at one point estimated from the forward set J.
double point_residual(const PdeProblem& problem, const NetworkParams& params, const Point& p,
                      const DimSet& J);

/// Exact normalized loss (1 / (2 |B| N_L^2)) sum_n r_n^2.
double normalized_loss(const PdeProblem& problem, const NetworkParams& params,
                       const std::vector<Point>& points, const EstimatorOptions& opts = {});

/// Runs fn(k) for k in [0, n) on up to `workers` threads.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

/// All dimensions {0, ..., n - 1}.
DimSet all_dims(std::size_t n);

/// Sorted distinct union of two index sets.
DimSet dim_union(const DimSet& a, const DimSet& b);

}  // namespace sdgd
