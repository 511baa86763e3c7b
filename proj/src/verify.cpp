#include "sdgd/verify.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>

#include "sdgd/analysis.hpp"
#include "sdgd/estimator.hpp"
#include "sdgd/sampling.hpp"

namespace sdgd {

Fixture make_fixture(ProblemKind kind, std::size_t d, std::size_t n_points, std::uint64_t seed,
                     std::size_t hidden, Activation activation) {
  Fixture f;
  f.problem = make_problem(kind, d, seed);
  f.params = init_params({f.problem.input_dim(), hidden, hidden, 1}, activation, seed + 1, true);
  // Nonzero biases so no fixture is accidentally symmetric.
  RngStream rng(seed, 0, Purpose::Analysis, 1);
  std::normal_distribution<double> normal(0.0, 0.3);
  for (std::size_t l = 0; l < f.params.layers(); ++l) {
    for (Eigen::Index k = 0; k < f.params.bias(l).size(); ++k) f.params.bias(l)[k] = normal(rng);
  }
  RngStream pts(seed, 0, Purpose::ResidualPoints);
  f.points = sample_points(f.problem, n_points, pts);
  return f;
}

NetworkParams random_bias_free(const std::vector<std::size_t>& widths, Activation activation, double scale,
                               RngStream& stream) {
  NetworkParams p(widths, activation, false);
  std::normal_distribution<double> normal;
  for (std::size_t l = 0; l < p.layers(); ++l) {
    auto w = p.weights(l);
    const double s = scale / std::sqrt(static_cast<double>(w.cols()));
    for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = s * normal(stream);
  }
  return p;
}

namespace {

CheckResult timed(const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
  const auto start = std::chrono::steady_clock::now();
  CheckResult r;
  r.name = name;
  try {
    std::tie(r.passed, r.detail) = body();
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

}  // namespace

std::vector<CheckResult> run_verification() {
  std::vector<CheckResult> out;

  out.push_back(timed("unbiased_algo1_d6_k2", [] {
    double worst = 0.0;
    for (ProblemKind k : {ProblemKind::Poisson, ProblemKind::AllenCahn, ProblemKind::SineGordon, ProblemKind::HjbLog}) {
      const Fixture f = make_fixture(k, 6, 3, 11);
      worst = std::max(worst, unbiasedness_check(f.problem, f.params, f.points, 2, Algorithm::Algo1));
    }
    return std::make_pair(worst <= 1e-10, fmt("max relative deviation %.3e", worst));
  }));

  out.push_back(timed("unbiased_algo2_d4_k1", [] {
    double worst = 0.0;
    for (ProblemKind k : {ProblemKind::Poisson, ProblemKind::AllenCahn, ProblemKind::HjbRosenbrock}) {
      const Fixture f = make_fixture(k, 4, 3, 12);
      worst = std::max(worst, unbiasedness_check(f.problem, f.params, f.points, 1, Algorithm::Algo2));
    }
    return std::make_pair(worst <= 1e-10, fmt("max relative deviation %.3e", worst));
  }));

  out.push_back(timed("variance_law_grid_3x3", [] {
    const Fixture f = make_fixture(ProblemKind::AllenCahn, 4, 4, 13);
    std::vector<std::pair<std::size_t, std::size_t>> grid;
    for (std::size_t b = 1; b <= 3; ++b) {
      for (std::size_t i = 1; i <= 3; ++i) grid.emplace_back(b, i);
    }
    const VarianceFit fit = variance_fit(f.problem, f.params, f.points, grid);
    bool monotone = true;
    for (const VarianceCell& c : fit.grid) {
      for (const VarianceCell& o : fit.grid) {
        if ((o.batch == c.batch && o.dims > c.dims) || (o.dims == c.dims && o.batch > c.batch)) {
          monotone = monotone && o.variance <= c.variance;
        }
      }
    }
    bool minimizers = true;
    for (const BudgetChoice& b : budget_minimizers(fit)) minimizers = minimizers && b.fitted == b.enumerated;
    std::ostringstream msg;
    msg << "fit residual " << fmt("%.3e", fit.residual) << ", monotone " << monotone << ", minimizers match "
        << minimizers;
    return std::make_pair(fit.residual <= 1e-6 && monotone && minimizers, msg.str());
  }));

  out.push_back(timed("algo3_bias_profile", [] {
    const Fixture f = make_fixture(ProblemKind::AllenCahn, 4, 3, 14);
    const auto bias = bias_profile_algo3(f.problem, f.params, f.points, {1, 2, 3, 4});
    bool ok = bias[3] == 0.0 && bias[0] > 0.0;
    for (std::size_t k = 1; k < bias.size(); ++k) ok = ok && bias[k] <= bias[k - 1];
    return std::make_pair(ok, "bias(1) " + fmt("%.3e", bias[0]) + ", bias(d) " + fmt("%.3e", bias[3]));
  }));

  out.push_back(timed("full_index_endpoints_bitwise", [] {
    bool ok = true;
    for (ProblemKind k : {ProblemKind::SineGordon, ProblemKind::HjbLog}) {
      const Fixture f = make_fixture(k, 5, 4, 15);
      const DimSet all = all_dims(f.problem.n_terms());
      const Vector full = full_grad(f.problem, f.params, f.points).grad.data;
      ok = ok && grad_algo1(f.problem, f.params, f.points, all).grad.data == full;
      ok = ok && grad_algo2(f.problem, f.params, f.points, all, all).grad.data == full;
      ok = ok && grad_algo3(f.problem, f.params, f.points, all).grad.data == full;
    }
    return std::make_pair(ok, std::string(ok ? "identical" : "mismatch"));
  }));

  out.push_back(timed("accumulate_partition", [] {
    const Fixture f = make_fixture(ProblemKind::Poisson, 6, 4, 16);
    const Vector full = full_grad(f.problem, f.params, f.points).grad.data;
    std::vector<GradEstimate> parts;
    for (DimSet I : {DimSet{0, 1}, DimSet{2, 3}, DimSet{4, 5}}) parts.push_back(grad_algo1(f.problem, f.params, f.points, I));
    const double dev = (accumulate(parts).grad.data - full).cwiseAbs().maxCoeff() / full.cwiseAbs().maxCoeff();
    return std::make_pair(dev <= 1e-12, fmt("relative deviation %.3e", dev));
  }));

  out.push_back(timed("term_accounting", [] {
    const Fixture f = make_fixture(ProblemKind::Poisson, 8, 5, 17);
    const DimSet I{1, 3, 4};
    const DimSet J{0, 3, 7};
    const bool ok = full_grad(f.problem, f.params, f.points).meta.term_evals == 5 * 8 &&
                    grad_algo1(f.problem, f.params, f.points, I).meta.term_evals == 5 * 8 &&
                    grad_algo2(f.problem, f.params, f.points, I, J).meta.term_evals == 5 * 5 &&
                    grad_algo3(f.problem, f.params, f.points, I).meta.term_evals == 5 * 3;
    return std::make_pair(ok, std::string(ok ? "counts exact" : "count mismatch"));
  }));

  out.push_back(timed("lemma_bounds_sin_100", [] {
    RngStream rng(21, 0, Purpose::Analysis);
    std::size_t failures = 0;
    double route_gap = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t d = 2 + static_cast<std::size_t>(trial % 3);
      const std::size_t depth = 2 + static_cast<std::size_t>(trial % 3);
      std::vector<std::size_t> widths{d};
      for (std::size_t l = 1; l < depth; ++l) widths.push_back(3 + static_cast<std::size_t>((trial + l) % 4));
      widths.push_back(1);
      const NetworkParams p = random_bias_free(widths, Activation::Sin, 0.5 + 0.05 * (trial % 20), rng);
      Vector x(static_cast<Eigen::Index>(d));
      for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = 2.0 * rng.uniform() - 1.0;
      for (std::size_t n : {1u, 2u}) {
        const LemmaCheck c = lemma_bound_check(p, x, n);
        if (!c.holds()) ++failures;
        for (const BoundCheck* b : {&c.input, &c.param}) {
          const double s = std::max(b->norm, 1e-300);
          route_gap = std::max(route_gap, std::abs(b->norm - b->norm_engine) / s);
        }
      }
    }
    return std::make_pair(failures == 0 && route_gap <= 1e-12,
                          std::to_string(failures) + " violations, route gap " + fmt("%.3e", route_gap));
  }));

  out.push_back(timed("finite_differences", [] {
    const Fixture f = make_fixture(ProblemKind::Poisson, 5, 1, 18, 16);
    const FdReport r = fd_check(f.params, f.points.front().x, all_dims(5));
    const bool ok = r.second_rel <= 1e-5 && r.param_rel <= 1e-5;
    return std::make_pair(ok, "second " + fmt("%.3e", r.second_rel) + ", param " + fmt("%.3e", r.param_rel));
  }));

  return out;
}

std::string format_results(const std::vector<CheckResult>& results) {
  std::ostringstream out;
  for (const CheckResult& r : results) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "[%s] %-32s %7.2fs  ", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.seconds);
    out << buf << r.detail << "\n";
  }
  return out.str();
}

}  // namespace sdgd
