#include "sdgd/estimator.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <numeric>
#include <thread>

#include "sdgd/errors.hpp"

namespace sdgd {

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Full:
      return "full";
    case Algorithm::Algo1:
      return "algo1";
    case Algorithm::Algo2:
      return "algo2";
    case Algorithm::Algo3:
      return "algo3";
    case Algorithm::Accumulated:
      return "accumulated";
  }
  return "?";
}

Algorithm algorithm_from_string(const std::string& name) {
  for (auto a : {Algorithm::Full, Algorithm::Algo1, Algorithm::Algo2, Algorithm::Algo3}) {
    if (name == to_string(a)) return a;
  }
  throw ConfigError("unknown algorithm '" + name + "' (expected full, algo1, algo2 or algo3)");
}

DimSet all_dims(std::size_t n) {
  DimSet out(n);
  std::iota(out.begin(), out.end(), std::size_t{0});
  return out;
}

DimSet dim_union(const DimSet& a, const DimSet& b) {
  DimSet out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t k = w; k < n; k += workers) fn(k);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace {

void check_set(const PdeProblem& problem, const DimSet& s, const char* name) {
  if (s.empty()) throw ArgumentError(std::string(name) + " must not be empty");
  if (!std::is_sorted(s.begin(), s.end())) throw ArgumentError(std::string(name) + " must be sorted");
  if (s.back() >= problem.n_terms()) {
    throw IndexError(std::string(name) + " index " + std::to_string(s.back()) + " out of range");
  }
}

struct Contribution {
  double residual = 0.0;
  ParamGrad grad;
  std::size_t evals = 0;
};

// r_J(x) and d/dtheta of the I-restricted residual at one point.
Contribution point_contribution(const PdeProblem& problem, const NetworkParams& params,
                                const Point& p, const DimSet& I, const DimSet& J) {
  const DimSet second = dim_union(I, J);
  const Vector z = network_input(problem, p);
  const DerivativeTape tape(params, z, second, required_first_dims(problem, second));
  const AtomValues atoms = wrap_atoms(problem, tape.atoms());
  Contribution c;
  c.residual = residual_estimate(problem, residual_pieces(problem, atoms, J), J);
  c.grad = tape.pullback(residual_cotangents(problem, atoms, I)).params;
  c.evals = tape.second_evaluations();
  return c;
}

GradEstimate estimate(Algorithm tag, const PdeProblem& problem, const NetworkParams& params,
                      const std::vector<Point>& points, const DimSet& I, const DimSet& J,
                      const EstimatorOptions& opts) {
  if (points.empty()) throw ArgumentError("estimator needs at least one residual point");
  if (params.input_dim() != problem.input_dim()) {
    throw ShapeError("network input size does not match the problem");
  }
  check_set(problem, I, "backward index set I");
  check_set(problem, J, "forward index set J");
  const auto start = std::chrono::steady_clock::now();

  std::vector<Contribution> slots(points.size());
  parallel_for(points.size(), opts.workers, [&](std::size_t k) {
    slots[k] = point_contribution(problem, params, points[k], I, J);
  });

  GradEstimate out;
  out.grad = ParamGrad(params.size());
  for (const Contribution& c : slots) {
    out.grad.data += c.residual * c.grad.data;
    out.meta.term_evals += c.evals;
  }
  const double n = static_cast<double>(problem.n_terms());
  out.grad.data *= 1.0 / (static_cast<double>(points.size()) * n * n);

  out.meta.algorithm = tag;
  out.meta.batch = points.size();
  out.meta.backward = I.size();
  out.meta.forward = J.size();
  out.meta.wall_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace

GradEstimate full_grad(const PdeProblem& problem, const NetworkParams& params,
                       const std::vector<Point>& points, const EstimatorOptions& opts) {
  const DimSet all = all_dims(problem.n_terms());
  return estimate(Algorithm::Full, problem, params, points, all, all, opts);
}

GradEstimate grad_algo1(const PdeProblem& problem, const NetworkParams& params,
                        const std::vector<Point>& points, const DimSet& I,
                        const EstimatorOptions& opts) {
  return estimate(Algorithm::Algo1, problem, params, points, I, all_dims(problem.n_terms()), opts);
}

GradEstimate grad_algo2(const PdeProblem& problem, const NetworkParams& params,
                        const std::vector<Point>& points, const DimSet& I, const DimSet& J,
                        const EstimatorOptions& opts) {
  return estimate(Algorithm::Algo2, problem, params, points, I, J, opts);
}

GradEstimate grad_algo3(const PdeProblem& problem, const NetworkParams& params,
                        const std::vector<Point>& points, const DimSet& I,
                        const EstimatorOptions& opts) {
  return estimate(Algorithm::Algo3, problem, params, points, I, I, opts);
}

GradEstimate accumulate(const std::vector<GradEstimate>& grads) {
  if (grads.empty()) throw ArgumentError("accumulate needs at least one gradient");
  if (grads.size() == 1) return grads.front();
  GradEstimate out;
  out.grad = ParamGrad(grads.front().grad.size());
  out.meta.algorithm = Algorithm::Accumulated;
  for (const GradEstimate& g : grads) {
    if (g.grad.size() != out.grad.size()) {
      throw ContractError("accumulate: gradients have different parameter layouts");
    }
    out.grad.data += g.grad.data;
    out.meta.batch += g.meta.batch;
    out.meta.backward += g.meta.backward;
    out.meta.forward += g.meta.forward;
    out.meta.term_evals += g.meta.term_evals;
    out.meta.wall_s += g.meta.wall_s;
  }
  out.grad.data /= static_cast<double>(grads.size());
  return out;
}

double point_residual(const PdeProblem& problem, const NetworkParams& params, const Point& p,
                      const DimSet& J) {
  const AtomValues atoms = wrapped_atoms(problem, params, p, dim_union(J, {}));
  return residual_estimate(problem, residual_pieces(problem, atoms, J), J);
}

double normalized_loss(const PdeProblem& problem, const NetworkParams& params,
                       const std::vector<Point>& points, const EstimatorOptions& opts) {
  if (points.empty()) throw ArgumentError("loss needs at least one point");
  const DimSet all = all_dims(problem.n_terms());
  std::vector<double> r(points.size());
  parallel_for(points.size(), opts.workers,
               [&](std::size_t k) { r[k] = point_residual(problem, params, points[k], all); });
  double sum = 0.0;
  for (double v : r) sum += v * v;
  const double n = static_cast<double>(problem.n_terms());
  return sum / (2.0 * static_cast<double>(points.size()) * n * n);
}

}  // namespace sdgd
