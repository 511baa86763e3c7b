#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sdgd/estimator.hpp"
#include "sdgd/network.hpp"
#include "sdgd/pde.hpp"
#include "sdgd/trainer.hpp"

namespace sdgd {

inline constexpr double kEnumerationGuard = 1e6;

/// Every k-subset of {0, ..., n - 1} in lexicographic order.
std::vector<DimSet> all_subsets(std::size_t n, std::size_t k, double guard = kEnumerationGuard);

/// Every length-k sequence over {0, ..., n - 1} (with replacement), sorted
/// within each sequence, in odometer order.
std::vector<DimSet> all_sequences(std::size_t n, std::size_t k, double guard = kEnumerationGuard);

/// max |E[estimate] - full| / max |full| over parameter coordinates, where
/// E is the exact mean over all equally likely k-subsets (pairs of subsets
/// for algo2). Throws GuardError past `guard` combinations.
double unbiasedness_check(const PdeProblem& problem, const NetworkParams& params,
                          const std::vector<Point>& points, std::size_t k, Algorithm algorithm,
                          double guard = kEnumerationGuard);

/// |E[grad_algo3] - full_grad|_2 for each k, enumerated exactly.
std::vector<double> bias_profile_algo3(const PdeProblem& problem, const NetworkParams& params,
                                       const std::vector<Point>& points,
                                       const std::vector<std::size_t>& ks,
                                       double guard = kEnumerationGuard);

struct VarianceCell {
  std::size_t batch = 0;  // |B|
  std::size_t dims = 0;   // |I|
  double variance = 0.0;
  double std_error = 0.0;  // 0 when enumerated exactly
  bool exact = true;
};

struct VarianceFit {
  double c1 = 0.0, c2 = 0.0, c3 = 0.0;
  std::vector<VarianceCell> grid;
  double residual = 0.0;  // |fit - V|_2 / |V|_2

  double predict(std::size_t batch, std::size_t dims) const;
};

/// Variance (trace of the covariance) of the Algorithm-1 estimator when |B|
/// points are drawn from `pool` and |I| dimensions are drawn, with or
/// without replacement. The dimension set is shared by the batch. Exact
/// enumeration up to `guard` combinations, otherwise `mc_samples` draws.
VarianceCell estimator_variance(const PdeProblem& problem, const NetworkParams& params,
                                const std::vector<Point>& pool, std::size_t batch, std::size_t dims,
                                bool replacement, double guard = kEnumerationGuard,
                                std::size_t mc_samples = 100000, std::uint64_t seed = 0);

/// With-replacement variance on every grid cell and a least-squares fit of
/// V = C1/|B| + C2/|I| + C3/(|B||I|). Needs at least 4 cells.
VarianceFit variance_fit(const PdeProblem& problem, const NetworkParams& params,
                         const std::vector<Point>& pool,
                         const std::vector<std::pair<std::size_t, std::size_t>>& grid,
                         double guard = kEnumerationGuard);

struct BudgetChoice {
  std::size_t budget = 0;
  std::pair<std::size_t, std::size_t> fitted;      // (|B|, |I|) minimizing the fitted law
  std::pair<std::size_t, std::size_t> enumerated;  // (|B|, |I|) minimizing the measured variance
};

/// For each product |B||I| shared by two or more grid cells.
std::vector<BudgetChoice> budget_minimizers(const VarianceFit& fit);

struct BoundCheck {
  std::size_t order = 0;
  double norm = 0.0;        // coordinate sweep (hyper-dual numbers)
  double norm_engine = 0.0; // derivative engine on a lifted network
  double bound = 0.0;
  double margin = 0.0;      // bound - norm
};

struct LemmaCheck {
  BoundCheck input;  // |vec(d^n u / dx^n)|
  BoundCheck param;  // |vec(d/dtheta d^n u / dx^n)|
  bool holds() const { return input.margin >= 0.0 && param.margin >= 0.0; }
};

/// Both derivative bounds for a bias-free network at x, order n in {1, 2}.
/// Sin networks are used as is; tanh networks are rescaled by the constant
/// C_n that brings C_n tanh and its derivatives within the unit bounds.
LemmaCheck lemma_bound_check(const NetworkParams& params, const Vector& x, std::size_t n);

/// Spectral-norm factor max(|W|_2, 1).
double lemma_m(const RowMatrix& w);

struct FdReport {
  double first_rel = 0.0;   // input first derivatives, h = 1e-3
  double second_rel = 0.0;  // input second derivatives, h = 1e-3
  double second_abs = 0.0;
  double param_rel = 0.0;   // d/dtheta of the summed second derivatives, h = 1e-4
  double param_abs = 0.0;
};

/// Central differences against the derivative engine. Relative errors are
/// max |fd - exact| / max |exact| over the compared entries.
FdReport fd_check(const NetworkParams& params, const Vector& x, const DimSet& dims);

struct SweepRow {
  std::size_t dims = 0;   // |I|
  std::size_t batch = 0;  // |B|
  double rel_l2 = 0.0;
  double sec_per_iter = 0.0;
  double total_s = 0.0;
  std::size_t term_evals = 0;
  double sec_per_term = 0.0;
};

/// One training run per (|I|, |B|) cell of `grid`, sharing one test set.
std::vector<SweepRow> batch_sweep(const TrainConfig& base,
                                  const std::vector<std::pair<std::size_t, std::size_t>>& grid);

std::string sweep_table(const std::vector<SweepRow>& rows);

}  // namespace sdgd
