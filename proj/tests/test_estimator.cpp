#include <gtest/gtest.h>

#include <cmath>

#include "oracle.hpp"
#include "sdgd/errors.hpp"
#include "sdgd/estimator.hpp"
#include "sdgd/sampling.hpp"

using namespace sdgd;

namespace {

NetworkParams net_for(const PdeProblem& pr, std::uint64_t seed, std::size_t h = 8) {
  NetworkParams p = init_params({pr.input_dim(), h, h, 1}, Activation::Tanh, seed);
  RngStream rng(seed, 1, Purpose::Analysis);
  for (std::size_t l = 0; l < p.layers(); ++l)
    for (Eigen::Index k = 0; k < p.bias(l).size(); ++k) p.bias(l)[k] = rng.uniform() - 0.5;
  return p;
}

std::vector<Point> points_for(const PdeProblem& pr, std::size_t n, std::uint64_t seed) {
  RngStream rng(seed, 0, Purpose::ResidualPoints);
  return sample_points(pr, n, rng);
}

// All k-subsets of {0..n-1}.
std::vector<DimSet> subsets(std::size_t n, std::size_t k) {
  std::vector<DimSet> out;
  DimSet cur;
  std::function<void(std::size_t)> rec = [&](std::size_t from) {
    if (cur.size() == k) {
      out.push_back(cur);
      return;
    }
    for (std::size_t i = from; i < n; ++i) {
      cur.push_back(i);
      rec(i + 1);
      cur.pop_back();
    }
  };
  rec(0);
  return out;
}

constexpr ProblemKind kAll[] = {ProblemKind::Poisson, ProblemKind::AllenCahn, ProblemKind::SineGordon,
                                ProblemKind::HjbLog, ProblemKind::HjbRosenbrock};

}  // namespace

TEST(Algorithm, Names) {
  for (Algorithm a : {Algorithm::Full, Algorithm::Algo1, Algorithm::Algo2, Algorithm::Algo3})
    EXPECT_EQ(algorithm_from_string(to_string(a)), a);
  EXPECT_THROW(algorithm_from_string("algo4"), ConfigError);
}

TEST(FullGrad, MatchesMonolithicOracle) {
  for (ProblemKind k : kAll) {
    const PdeProblem pr = make_problem(k, 4, 1);
    const NetworkParams p = net_for(pr, 2);
    const auto pts = points_for(pr, 5, 3);
    const GradEstimate g = full_grad(pr, p, pts);
    EXPECT_LE(oracle::rel_err(g.grad.data, oracle::monolithic_grad(pr, p, pts)), 1e-10) << to_string(k);
    EXPECT_EQ(g.meta.term_evals, 5u * 4u);
    EXPECT_EQ(g.meta.algorithm, Algorithm::Full);
  }
}

TEST(FullGrad, ZeroNetworkGivesZeroGradient) {
  const PdeProblem pr = make_problem(ProblemKind::Poisson, 3, 0);
  const NetworkParams p({3, 5, 5, 1}, Activation::Tanh, false);
  const auto pts = points_for(pr, 4, 1);
  const GradEstimate g = full_grad(pr, p, pts);
  EXPECT_EQ(g.grad.data.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(oracle::monolithic_grad(pr, p, pts).cwiseAbs().maxCoeff(), 0.0);
}

TEST(FullGrad, FiniteDifferenceOfLoss) {
  for (ProblemKind k : kAll) {
    const PdeProblem pr = make_problem(k, 2, 4);
    const NetworkParams p = net_for(pr, 5, 6);
    const auto pts = points_for(pr, 1, 6);
    const Vector fd = oracle::fd_params([&](const NetworkParams& q) { return normalized_loss(pr, q, pts); }, p, 1e-4);
    EXPECT_LE(oracle::rel_err(full_grad(pr, p, pts).grad.data, fd), 1e-5) << to_string(k);
  }
}

TEST(FullGrad, DuplicatedPointsLeaveMeanUnchanged) {
  const PdeProblem pr = make_problem(ProblemKind::AllenCahn, 3, 0);
  const NetworkParams p = net_for(pr, 1);
  const auto one = points_for(pr, 1, 2);
  const std::vector<Point> three{one[0], one[0], one[0]};
  EXPECT_LE(oracle::rel_err(full_grad(pr, p, three).grad.data, full_grad(pr, p, one).grad.data), 1e-15);
}

TEST(Endpoints, FullIndexSetsAreBitwiseFull) {
  for (ProblemKind k : kAll) {
    const PdeProblem pr = make_problem(k, 5, 0);
    const NetworkParams p = net_for(pr, 1);
    const auto pts = points_for(pr, 3, 2);
    const DimSet all = all_dims(5);
    const Vector f = full_grad(pr, p, pts).grad.data;
    EXPECT_EQ(grad_algo1(pr, p, pts, all).grad.data, f);
    EXPECT_EQ(grad_algo2(pr, p, pts, all, all).grad.data, f);
    EXPECT_EQ(grad_algo3(pr, p, pts, all).grad.data, f);
  }
}

TEST(Algo1, InflationFactor) {
  // With one point and the cotangents linear in N_L/|I|, doubling |I| on a
  // set whose terms are identical halves nothing: check directly that grad
  // with I = {i} equals N_L times the single-dimension pullback.
  const PdeProblem pr = make_problem(ProblemKind::Poisson, 4, 0);
  const NetworkParams p = net_for(pr, 1);
  const auto pts = points_for(pr, 1, 2);
  const Vector z = network_input(pr, pts[0]);
  const AtomValues a = wrapped_atoms(pr, p, pts[0], all_dims(4));
  const double r = residual_estimate(pr, residual_pieces(pr, a, all_dims(4)), all_dims(4));
  AtomCotangents c;
  const double phi = 1.0 - pts[0].x.squaredNorm();
  c.value = -2.0;
  c.first[2] = -4.0 * pts[0].x[2];
  c.second[2] = phi;
  const Vector expect = r * 4.0 * param_pullback(p, z, c).data / 16.0;
  EXPECT_LE(oracle::rel_err(grad_algo1(pr, p, pts, {2}).grad.data, expect), 1e-14);
}

TEST(Unbiasedness, Algo1EnumerationMatchesFull) {
  for (ProblemKind k : kAll) {
    const PdeProblem pr = make_problem(k, 4, 2);
    const NetworkParams p = net_for(pr, 3);
    const auto pts = points_for(pr, 3, 4);
    const Vector f = full_grad(pr, p, pts).grad.data;
    for (std::size_t size : {1u, 2u, 3u}) {
      const auto sets = subsets(4, size);
      Vector mean = Vector::Zero(f.size());
      for (const DimSet& I : sets) mean += grad_algo1(pr, p, pts, I).grad.data;
      mean /= static_cast<double>(sets.size());
      EXPECT_LE(oracle::rel_err(mean, f), 1e-12) << to_string(k) << " |I|=" << size;
    }
  }
}

TEST(Unbiasedness, Algo2EnumerationMatchesFull) {
  for (ProblemKind k : kAll) {
    const PdeProblem pr = make_problem(k, 3, 5);
    const NetworkParams p = net_for(pr, 6);
    const auto pts = points_for(pr, 2, 7);
    const Vector f = full_grad(pr, p, pts).grad.data;
    for (std::size_t size : {1u, 2u}) {
      const auto sets = subsets(3, size);
      Vector mean = Vector::Zero(f.size());
      for (const DimSet& I : sets)
        for (const DimSet& J : sets) mean += grad_algo2(pr, p, pts, I, J).grad.data;
      mean /= static_cast<double>(sets.size() * sets.size());
      EXPECT_LE(oracle::rel_err(mean, f), 1e-12) << to_string(k);
    }
  }
}

TEST(Unbiasedness, Algo2TwoDimensionalPairs) {
  const PdeProblem pr = make_problem(ProblemKind::SineGordon, 2, 0);
  const NetworkParams p = net_for(pr, 1);
  const auto pts = points_for(pr, 2, 2);
  Vector mean = Vector::Zero(static_cast<Eigen::Index>(p.size()));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) mean += grad_algo2(pr, p, pts, {i}, {j}).grad.data / 4.0;
  EXPECT_LE(oracle::rel_err(mean, full_grad(pr, p, pts).grad.data), 1e-12);
}

TEST(Algo3, BiasedBelowFullIndexSet) {
  const PdeProblem pr = make_problem(ProblemKind::Poisson, 2, 0);
  const NetworkParams p = net_for(pr, 1);
  const auto pts = points_for(pr, 2, 2);
  const Vector mean = (grad_algo3(pr, p, pts, {0}).grad.data + grad_algo3(pr, p, pts, {1}).grad.data) / 2.0;
  const Vector f = full_grad(pr, p, pts).grad.data;
  const double bias = (mean - f).norm() / f.norm();
  RecordProperty("relative_bias", std::to_string(bias));
  EXPECT_GT(bias, 1e-6);
}

TEST(Accounting, TermEvaluations) {
  const PdeProblem pr = make_problem(ProblemKind::Poisson, 6, 0);
  const NetworkParams p = net_for(pr, 1);
  const auto pts = points_for(pr, 5, 2);
  const GradEstimate a1 = grad_algo1(pr, p, pts, {1, 4});
  EXPECT_EQ(a1.meta.term_evals, 5u * 6u);
  EXPECT_EQ(a1.meta.batch, 5u);
  EXPECT_EQ(a1.meta.backward, 2u);
  EXPECT_EQ(a1.meta.forward, 6u);
  const GradEstimate a2 = grad_algo2(pr, p, pts, {1, 4}, {0, 4});
  EXPECT_EQ(a2.meta.term_evals, 5u * 3u);
  const GradEstimate a3 = grad_algo3(pr, p, pts, {1, 4});
  EXPECT_EQ(a3.meta.term_evals, 5u * 2u);
  EXPECT_LT(a3.meta.term_evals, a2.meta.term_evals);
  EXPECT_EQ(a3.meta.algorithm, Algorithm::Algo3);
  EXPECT_GE(a3.meta.wall_s, 0.0);
}

TEST(Accumulate, IdentityCopiesAndPartition) {
  const PdeProblem pr = make_problem(ProblemKind::AllenCahn, 6, 0);
  const NetworkParams p = net_for(pr, 1);
  const auto pts = points_for(pr, 3, 2);
  const GradEstimate g = grad_algo1(pr, p, pts, {0, 3});
  EXPECT_EQ(accumulate({g}).grad.data, g.grad.data);
  const GradEstimate three = accumulate({g, g, g});
  EXPECT_LE(oracle::rel_err(three.grad.data, g.grad.data), 1e-15);
  EXPECT_EQ(three.meta.term_evals, 3 * g.meta.term_evals);
  EXPECT_EQ(three.meta.algorithm, Algorithm::Accumulated);

  const GradEstimate part = accumulate({grad_algo1(pr, p, pts, {0, 1}), grad_algo1(pr, p, pts, {2, 5}),
                                        grad_algo1(pr, p, pts, {3, 4})});
  EXPECT_LE(oracle::rel_err(part.grad.data, full_grad(pr, p, pts).grad.data), 1e-12);

  GradEstimate other = g;
  other.grad.data.resize(3);
  EXPECT_THROW(accumulate({g, other}), ContractError);
  EXPECT_THROW(accumulate({}), ArgumentError);
}

TEST(Parallel, WorkersDoNotChangeBits) {
  for (ProblemKind k : {ProblemKind::SineGordon, ProblemKind::HjbRosenbrock}) {
    const PdeProblem pr = make_problem(k, 5, 0);
    const NetworkParams p = net_for(pr, 1);
    const auto pts = points_for(pr, 11, 2);
    EstimatorOptions one, three;
    three.workers = 3;
    EXPECT_EQ(grad_algo2(pr, p, pts, {0, 2}, {1, 2}, one).grad.data,
              grad_algo2(pr, p, pts, {0, 2}, {1, 2}, three).grad.data);
    EXPECT_EQ(full_grad(pr, p, pts, one).grad.data, full_grad(pr, p, pts, three).grad.data);
    EXPECT_EQ(normalized_loss(pr, p, pts, one), normalized_loss(pr, p, pts, three));
  }
}

TEST(Parallel, ExceptionsPropagate) {
  EXPECT_THROW(parallel_for(8, 3, [](std::size_t k) { if (k == 5) throw IndexError("boom"); }), IndexError);
}

TEST(Errors, EmptyAndInvalidIndexSets) {
  const PdeProblem pr = make_problem(ProblemKind::Poisson, 3, 0);
  const NetworkParams p = net_for(pr, 1);
  const auto pts = points_for(pr, 2, 2);
  EXPECT_THROW(grad_algo1(pr, p, pts, {}), ArgumentError);
  EXPECT_THROW(grad_algo2(pr, p, pts, {0}, {}), ArgumentError);
  EXPECT_THROW(grad_algo2(pr, p, pts, {}, {0}), ArgumentError);
  EXPECT_THROW(grad_algo3(pr, p, pts, {}), ArgumentError);
  EXPECT_THROW(grad_algo1(pr, p, pts, {3}), IndexError);
  EXPECT_THROW(full_grad(pr, p, {}), ArgumentError);
}

TEST(Loss, NormalizedLossAndPointResidual) {
  const PdeProblem pr = make_problem(ProblemKind::HjbLog, 3, 0);
  const NetworkParams p = net_for(pr, 1);
  const auto pts = points_for(pr, 4, 2);
  double s = 0.0;
  for (const auto& pt : pts) {
    const double r = oracle::monolithic_residual(pr, p, network_input(pr, pt)).v;
    EXPECT_NEAR(point_residual(pr, p, pt, all_dims(3)), r, 1e-12 * (1 + std::abs(r)));
    s += r * r;
  }
  EXPECT_NEAR(normalized_loss(pr, p, pts), s / (2.0 * 4.0 * 9.0), 1e-12 * s);
}

TEST(Helpers, DimUnion) {
  EXPECT_EQ(dim_union({3, 1, 1}, {2, 3}), (DimSet{1, 2, 3}));
  EXPECT_EQ(all_dims(3), (DimSet{0, 1, 2}));
}
