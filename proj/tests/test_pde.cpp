#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracle.hpp"
#include "sdgd/errors.hpp"
#include "sdgd/pde.hpp"
#include "sdgd/sampling.hpp"

using namespace sdgd;

namespace {

constexpr ProblemKind kElliptic[] = {ProblemKind::Poisson, ProblemKind::AllenCahn, ProblemKind::SineGordon};
constexpr ProblemKind kAll[] = {ProblemKind::Poisson, ProblemKind::AllenCahn, ProblemKind::SineGordon,
                                ProblemKind::HjbLog, ProblemKind::HjbRosenbrock};

NetworkParams net_for(const PdeProblem& pr, std::uint64_t seed, std::size_t h = 12) {
  NetworkParams p = init_params({pr.input_dim(), h, h, 1}, Activation::Tanh, seed);
  RngStream rng(seed, 1, Purpose::Analysis);
  for (std::size_t l = 0; l < p.layers(); ++l)
    for (Eigen::Index k = 0; k < p.bias(l).size(); ++k) p.bias(l)[k] = rng.uniform() - 0.5;
  return p;
}

Point interior_point(const PdeProblem& pr, std::uint64_t seed) {
  RngStream rng(seed, 0, Purpose::Analysis, 5);
  return sample_points(pr, 1, rng)[0];
}

NetworkParams zero_net(const PdeProblem& pr) {
  return NetworkParams({pr.input_dim(), 6, 1}, Activation::Tanh, false);
}

}  // namespace

TEST(Problem, NamesRoundTrip) {
  for (ProblemKind k : kAll) EXPECT_EQ(problem_kind_from_string(to_string(k)), k);
  EXPECT_THROW(problem_kind_from_string("poison"), ConfigError);
}

TEST(Problem, DeterministicAndSized) {
  const PdeProblem a = make_problem(ProblemKind::Poisson, 10, 0);
  const PdeProblem b = make_problem(ProblemKind::Poisson, 10, 0);
  EXPECT_EQ(a.c, b.c);
  EXPECT_EQ(a.c.size(), 9u);
  EXPECT_NE(a.c, make_problem(ProblemKind::Poisson, 10, 1).c);
  EXPECT_EQ(a.input_dim(), 10u);
  EXPECT_EQ(make_problem(ProblemKind::HjbLog, 10, 0).input_dim(), 11u);
  EXPECT_THROW(make_problem(ProblemKind::Poisson, 1, 0), ConfigError);
}

TEST(Problem, CoefficientsAreStandardNormal) {
  std::vector<double> c;
  for (std::uint64_t s = 0; s < 10000; ++s) {
    const PdeProblem p = make_problem(ProblemKind::Poisson, 10, s);
    c.insert(c.end(), p.c.begin(), p.c.end());
  }
  const double n = static_cast<double>(c.size());
  double mean = std::accumulate(c.begin(), c.end(), 0.0) / n;
  double var = 0.0, within1 = 0.0, within2 = 0.0;
  for (double v : c) {
    var += (v - mean) * (v - mean);
    within1 += std::abs(v) < 1.0;
    within2 += std::abs(v) < 2.0;
  }
  var /= n - 1;
  EXPECT_LT(std::abs(mean), 5.0 / std::sqrt(n));
  EXPECT_LT(std::abs(var - 1.0), 5.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(within1 / n, 0.682689, 0.01);
  EXPECT_NEAR(within2 / n, 0.954500, 0.005);
}

TEST(Problem, RosenbrockCoefficientRange) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const PdeProblem p = make_problem(ProblemKind::HjbRosenbrock, 20, s);
    ASSERT_EQ(p.c1.size(), 19u);
    ASSERT_EQ(p.c2.size(), 19u);
    for (std::size_t i = 0; i < 19; ++i) {
      EXPECT_GE(p.c1[i], 0.5);
      EXPECT_LE(p.c1[i], 1.5);
      EXPECT_GE(p.c2[i], 0.5);
      EXPECT_LE(p.c2[i], 1.5);
    }
  }
}

TEST(ExactSolution, ClosedFormAndBoundary) {
  const PdeProblem pr = make_problem(ProblemKind::Poisson, 4, 3);
  const Vector x{{0.1, -0.3, 0.2, 0.4}};
  double s = 0.0;
  for (std::size_t i = 0; i < 3; ++i)
    s += pr.c[i] * std::sin(x[i] + std::cos(x[i + 1]) + x[i + 1] * std::cos(x[i]));
  EXPECT_NEAR(exact_solution(pr, {x, 0.0}), (1.0 - x.squaredNorm()) * s, 1e-15);

  for (Eigen::Index k = 0; k < 4; ++k) EXPECT_EQ(exact_solution(pr, {Vector::Unit(4, k), 0.0}), 0.0);
  const Vector u = x.normalized();
  EXPECT_NEAR(exact_solution(pr, {u, 0.0}), 0.0, 1e-15);
  EXPECT_THROW(exact_solution(pr, {Vector::Constant(4, 0.6), 0.0}), DomainError);
}

TEST(ExactSolution, ZeroCoefficients) {
  for (ProblemKind k : kElliptic) {
    PdeProblem pr = make_problem(k, 5, 0);
    std::fill(pr.c.begin(), pr.c.end(), 0.0);
    const Vector x{{0.1, 0.2, -0.3, 0.0, 0.5}};
    EXPECT_EQ(exact_solution(pr, {x, 0.0}), 0.0);
    EXPECT_EQ(forcing(pr, x), 0.0);
  }
}

TEST(ExactSolution, HjbTerminalTime) {
  for (ProblemKind k : {ProblemKind::HjbLog, ProblemKind::HjbRosenbrock}) {
    const PdeProblem pr = make_problem(k, 6, 1);
    const Vector x{{0.3, -1.2, 0.5, 2.0, 0.1, -0.7}};
    EXPECT_EQ(exact_solution(pr, {x, 1.0}), terminal_cost(pr, x));
  }
}

TEST(TerminalCost, ClosedFormDerivatives) {
  for (ProblemKind k : {ProblemKind::HjbLog, ProblemKind::HjbRosenbrock}) {
    const PdeProblem pr = make_problem(k, 5, 2);
    const Vector x{{0.3, -1.2, 0.5, 0.9, -0.4}};
    const auto g = [&](const Vector& y) { return terminal_cost(pr, y); };
    const Vector gr = terminal_cost_gradient(pr, x);
    const Vector he = terminal_cost_hessian_diag(pr, x);
    for (Eigen::Index i = 0; i < 5; ++i) {
      EXPECT_NEAR(gr[i], oracle::fd1(g, x, i, 1e-5), 1e-9);
      EXPECT_NEAR(he[i], oracle::fd2(g, x, i, 1e-4), 1e-6);
    }
  }
  EXPECT_NEAR(terminal_cost(make_problem(ProblemKind::HjbLog, 2, 0), Vector{{1.0, 2.0}}), std::log(3.0), 1e-15);
  EXPECT_THROW(terminal_cost(make_problem(ProblemKind::Poisson, 2, 0), Vector::Zero(2)), UnsupportedError);
}

TEST(Forcing, MatchesFiniteDifferenceLaplacian) {
  const PdeProblem pr = make_problem(ProblemKind::Poisson, 6, 4);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Vector x = interior_point(pr, s).x * 0.9;
    const auto u = [&](const Vector& y) { return exact_solution(pr, {y, 0.0}); };
    double lap = 0.0;
    for (Eigen::Index i = 0; i < 6; ++i) lap += oracle::fd2(u, x, i, 1e-4);
    const double r = forcing(pr, x);
    EXPECT_LE(std::abs(r - lap), 1e-5 * std::abs(r));
    EXPECT_NEAR(exact_laplacian(pr, x), r, 1e-15 * std::abs(r) + 1e-15);
  }
}

TEST(Forcing, NonlinearTermsAndHjb) {
  PdeProblem po = make_problem(ProblemKind::Poisson, 5, 7);
  PdeProblem ac = make_problem(ProblemKind::AllenCahn, 5, 7);
  PdeProblem sg = make_problem(ProblemKind::SineGordon, 5, 7);
  const Vector x = interior_point(po, 1).x;
  const double u = exact_solution(po, {x, 0.0});
  EXPECT_NEAR(forcing(ac, x) - forcing(po, x), u - u * u * u, 1e-14);
  EXPECT_NEAR(forcing(sg, x) - forcing(po, x), std::sin(u), 1e-14);
  EXPECT_EQ(forcing(make_problem(ProblemKind::HjbLog, 5, 0), x), 0.0);
}

TEST(Residual, ExactSolutionSatisfiesPde) {
  for (ProblemKind k : kElliptic) {
    const PdeProblem pr = make_problem(k, 5, 8);
    for (std::uint64_t s = 0; s < 4; ++s) {
      const Vector x = interior_point(pr, s + 10).x * 0.9;
      const auto f = [&](const Vector& y) { return exact_solution(pr, {y, 0.0}); };
      const double u = f(x);
      double r = 0.0;
      for (Eigen::Index i = 0; i < 5; ++i) r += oracle::fd2(f, x, i, 1e-4);
      if (k == ProblemKind::AllenCahn) r += u - u * u * u;
      if (k == ProblemKind::SineGordon) r += std::sin(u);
      r -= forcing(pr, x);
      EXPECT_LE(std::abs(r), 1e-5 * (1.0 + std::abs(forcing(pr, x))));
    }
  }
}

TEST(WrappedAtoms, ZeroNetwork) {
  for (ProblemKind k : kElliptic) {
    const PdeProblem pr = make_problem(k, 4, 0);
    const AtomValues a = wrapped_atoms(pr, zero_net(pr), interior_point(pr, 0), {0, 1, 2, 3});
    EXPECT_EQ(a.value, 0.0);
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_EQ(a.d1(i), 0.0);
      EXPECT_EQ(a.d2(i), 0.0);
    }
  }
  const PdeProblem pr = make_problem(ProblemKind::HjbLog, 4, 0);
  const Point p = interior_point(pr, 0);
  const AtomValues a = wrapped_atoms(pr, zero_net(pr), p, {0, 1, 2, 3});
  EXPECT_EQ(a.value, terminal_cost(pr, p.x));
  const Vector he = terminal_cost_hessian_diag(pr, p.x);
  const Vector gr = terminal_cost_gradient(pr, p.x);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(a.d2(i), he[static_cast<Eigen::Index>(i)]);
    EXPECT_EQ(a.d1(i), gr[static_cast<Eigen::Index>(i)]);
  }
  EXPECT_EQ(a.d1(pr.time_index()), 0.0);
}

TEST(WrappedAtoms, MatchFiniteDifferencesOfWrappedModel) {
  for (ProblemKind k : kAll) {
    const PdeProblem pr = make_problem(k, 4, 1);
    const NetworkParams p = net_for(pr, 2);
    const Point pt = interior_point(pr, 3);
    const Vector z = network_input(pr, pt);
    const AtomValues a = wrapped_atoms(pr, p, pt, {0, 1, 2, 3});
    const auto f = [&](const Vector& y) { return oracle::wrapped_value(pr, p, y); };
    EXPECT_NEAR(a.value, f(z), 1e-14);
    Vector d2(4), fd(4);
    for (std::size_t i = 0; i < 4; ++i) {
      d2[static_cast<Eigen::Index>(i)] = a.d2(i);
      fd[static_cast<Eigen::Index>(i)] = oracle::fd2(f, z, static_cast<Eigen::Index>(i), 1e-3);
    }
    EXPECT_LE(oracle::rel_err(d2, fd), 1e-5) << to_string(k);
    for (std::size_t i : a.first_dims) EXPECT_NEAR(a.d1(i), oracle::fd1(f, z, static_cast<Eigen::Index>(i), 1e-5), 1e-8);
  }
}

TEST(WrappedAtoms, ZeroOnBoundaryAndAtTerminalTime) {
  const PdeProblem pr = make_problem(ProblemKind::SineGordon, 3, 0);
  const NetworkParams p = net_for(pr, 1);
  EXPECT_EQ(wrapped_atoms(pr, p, {Vector::Unit(3, 1), 0.0}, {0}).value, 0.0);
  const PdeProblem hj = make_problem(ProblemKind::HjbRosenbrock, 3, 0);
  const Vector x{{0.4, -0.2, 1.1}};
  EXPECT_EQ(wrapped_atoms(hj, net_for(hj, 1), {x, 1.0}, {0}).value, terminal_cost(hj, x));
}

TEST(ResidualPieces, Remainders) {
  const PdeProblem po = make_problem(ProblemKind::Poisson, 4, 0);
  const NetworkParams p = net_for(po, 3);
  const Point pt = interior_point(po, 4);
  const AtomValues a = wrapped_atoms(po, p, pt, {1, 3});
  const ResidualPieces rp = residual_pieces(po, a, {1, 3});
  EXPECT_EQ(rp.remainder, 0.0);
  ASSERT_EQ(rp.sampled_terms.size(), 2u);
  EXPECT_EQ(rp.sampled_terms.at(1), a.d2(1));
  EXPECT_EQ(rp.sampled_terms.at(3), a.d2(3));
  EXPECT_EQ(rp.forcing, forcing(po, pt.x));

  const PdeProblem sg = make_problem(ProblemKind::SineGordon, 4, 0);
  const AtomValues b = wrapped_atoms(sg, p, pt, {0});
  EXPECT_EQ(residual_pieces(sg, b, {0}).remainder, std::sin(b.value));

  const PdeProblem ac = make_problem(ProblemKind::AllenCahn, 4, 0);
  const AtomValues c = wrapped_atoms(ac, p, pt, {0});
  EXPECT_NEAR(residual_pieces(ac, c, {0}).remainder, c.value - std::pow(c.value, 3), 1e-16);

  EXPECT_THROW(residual_pieces(po, a, {0}), ContractError);
  EXPECT_THROW(residual_pieces(po, a, {}), ContractError);
}

TEST(ResidualPieces, HjbMatchesMonolithicResidual) {
  for (ProblemKind k : {ProblemKind::HjbLog, ProblemKind::HjbRosenbrock}) {
    const PdeProblem pr = make_problem(k, 3, 5);
    const NetworkParams p = net_for(pr, 6);
    const Point pt = interior_point(pr, 7);
    const AtomValues a = wrapped_atoms(pr, p, pt, {0, 1, 2});
    const ResidualPieces rp = residual_pieces(pr, a, {0, 1, 2});
    double s = rp.remainder;
    for (const auto& [i, v] : rp.sampled_terms) s += v;
    const double mono = oracle::monolithic_residual(pr, p, network_input(pr, pt)).v;
    EXPECT_NEAR(s, mono, 1e-12 * (1.0 + std::abs(mono)));
    EXPECT_NEAR(residual_estimate(pr, rp, {0, 1, 2}), mono, 1e-12 * (1.0 + std::abs(mono)));
  }
}

TEST(ResidualEstimate, ZeroNetworkGivesMinusForcing) {
  for (ProblemKind k : kElliptic) {
    const PdeProblem pr = make_problem(k, 4, 2);
    const Point pt = interior_point(pr, 1);
    for (const DimSet& J : {DimSet{0}, DimSet{1, 2}, DimSet{0, 1, 2, 3}}) {
      const AtomValues a = wrapped_atoms(pr, zero_net(pr), pt, J);
      EXPECT_EQ(residual_estimate(pr, residual_pieces(pr, a, J), J), -forcing(pr, pt.x));
    }
  }
}

TEST(ResidualEstimate, SingletonsAverageToFullResidual) {
  for (ProblemKind k : kAll) {
    const PdeProblem pr = make_problem(k, 3, 3);
    const NetworkParams p = net_for(pr, 4);
    const Point pt = interior_point(pr, 5);
    const AtomValues a = wrapped_atoms(pr, p, pt, {0, 1, 2});
    const double full = residual_estimate(pr, residual_pieces(pr, a, {0, 1, 2}), {0, 1, 2});
    double mean = 0.0;
    for (std::size_t j = 0; j < 3; ++j) mean += residual_estimate(pr, residual_pieces(pr, a, {j}), {j}) / 3.0;
    EXPECT_NEAR(mean, full, 1e-13 * (1.0 + std::abs(full))) << to_string(k);
    const double mono = oracle::monolithic_residual(pr, p, network_input(pr, pt)).v;
    EXPECT_NEAR(full, mono, 1e-12 * (1.0 + std::abs(mono))) << to_string(k);
  }
}

TEST(ResidualEstimate, RepeatedIndicesCountPerOccurrence) {
  const PdeProblem pr = make_problem(ProblemKind::Poisson, 3, 3);
  const NetworkParams p = net_for(pr, 4);
  const AtomValues a = wrapped_atoms(pr, p, interior_point(pr, 5), {0, 1, 2});
  const DimSet J{1, 1};
  const double r = residual_estimate(pr, residual_pieces(pr, a, J), J);
  EXPECT_NEAR(r, 3.0 * a.d2(1) - forcing(pr, a.point), 1e-14);
}

TEST(ResidualCotangents, PoissonProductRuleWeights) {
  const PdeProblem pr = make_problem(ProblemKind::Poisson, 5, 0);
  const Point pt = interior_point(pr, 2);
  const AtomValues a = wrapped_atoms(pr, net_for(pr, 1), pt, {3});
  const AtomCotangents c = residual_cotangents(pr, a, {3});
  const double ds = 5.0;
  const double phi = 1.0 - pt.x.squaredNorm();
  EXPECT_NEAR(c.value, -2.0 * ds, 1e-15);
  ASSERT_EQ(c.first.size(), 1u);
  ASSERT_EQ(c.second.size(), 1u);
  EXPECT_NEAR(c.first.at(3), -4.0 * pt.x[3] * ds, 1e-14);
  EXPECT_NEAR(c.second.at(3), phi * ds, 1e-14);
}

TEST(ResidualCotangents, AllenCahnRemainderAtZero) {
  const PdeProblem po = make_problem(ProblemKind::Poisson, 4, 0);
  const PdeProblem ac = make_problem(ProblemKind::AllenCahn, 4, 0);
  const Point pt = interior_point(po, 2);
  const AtomValues a = wrapped_atoms(ac, zero_net(ac), pt, {1});
  const double diff = residual_cotangents(ac, a, {1}).value - residual_cotangents(po, a, {1}).value;
  EXPECT_NEAR(diff, 1.0 - pt.x.squaredNorm(), 1e-15);
}

TEST(ResidualCotangents, MatchFiniteDifferencesInParameters) {
  for (ProblemKind k : kAll) {
    const PdeProblem pr = make_problem(k, 4, 9);
    const NetworkParams p = net_for(pr, 10, 6);
    const Point pt = interior_point(pr, 11);
    for (const DimSet& I : {DimSet{2}, DimSet{0, 3}, DimSet{0, 1, 2, 3}}) {
      const AtomValues a = wrapped_atoms(pr, p, pt, I);
      const Vector g = param_pullback(p, network_input(pr, pt), residual_cotangents(pr, a, I)).data;
      const auto scalar = [&](const NetworkParams& q) {
        const AtomValues b = wrapped_atoms(pr, q, pt, I);
        return residual_estimate(pr, residual_pieces(pr, b, I), I);
      };
      EXPECT_LE(oracle::rel_err(g, oracle::fd_params(scalar, p, 1e-4)), 1e-5) << to_string(k);
    }
  }
}

TEST(ResidualCotangents, FullIndexMatchesMonolithicGradient) {
  for (ProblemKind k : kAll) {
    const PdeProblem pr = make_problem(k, 4, 12);
    const NetworkParams p = net_for(pr, 13, 7);
    const Point pt = interior_point(pr, 14);
    const DimSet all{0, 1, 2, 3};
    const AtomValues a = wrapped_atoms(pr, p, pt, all);
    const double r = residual_estimate(pr, residual_pieces(pr, a, all), all);
    const Vector g = r * param_pullback(p, network_input(pr, pt), residual_cotangents(pr, a, all)).data;
    const oracle::Jet mono = oracle::monolithic_residual(pr, p, network_input(pr, pt));
    EXPECT_LE(oracle::rel_err(g, mono.v * mono.g), 1e-10) << to_string(k);
  }
}

TEST(HjbReference, TerminalTimeAndErrors) {
  const PdeProblem pr = make_problem(ProblemKind::HjbLog, 3, 0);
  const Vector x{{0.5, -1.0, 2.0}};
  RngStream s(0, 0, Purpose::Reference);
  EXPECT_EQ(hjb_reference(pr, x, 1.0, 7, s), terminal_cost(pr, x));
  EXPECT_THROW(hjb_reference(pr, x, 1.5, 10, s), DomainError);
  EXPECT_THROW(hjb_reference(pr, x, -0.1, 10, s), DomainError);
  EXPECT_THROW(hjb_reference(pr, x, 0.5, 0, s), ArgumentError);
  EXPECT_EQ(hjb_reference(pr, x, 0.3, 100, s), hjb_reference(pr, x, 0.3, 100, s));
  EXPECT_EQ(kDefaultReferenceSamples, 100000u);
}

TEST(HjbReference, LargeCostDoesNotOverflow) {
  const PdeProblem pr = make_problem(ProblemKind::HjbRosenbrock, 4, 0);
  const Vector x = Vector::Constant(4, 1e3);
  const double v = hjb_reference(pr, x, 0.0, 1000, RngStream(1, 0, Purpose::Reference));
  EXPECT_TRUE(std::isfinite(v));
}

TEST(HjbReference, OneDimensionalQuadrature) {
  // g(x) = log((1 + x^2) / 2) in one dimension; the problem type forbids
  // d = 1 through make_problem, so build it by hand.
  PdeProblem pr;
  pr.kind = ProblemKind::HjbLog;
  pr.d = 1;
  const double x = 0.7, t = 0.2, s = std::sqrt(2.0 * (1.0 - t));
  double m1 = 0.0, m2 = 0.0;
  const double h = 1e-3;
  for (double y = -12.0; y <= 12.0; y += h) {
    const double w = std::exp(-0.5 * y * y) / std::sqrt(2.0 * M_PI) * h;
    const double e = 2.0 / (1.0 + (x - s * y) * (x - s * y));
    m1 += w * e;
    m2 += w * e * e;
  }
  const std::size_t n = 20000;
  const double se = std::sqrt((m2 - m1 * m1) / static_cast<double>(n)) / m1;
  const double v = hjb_reference(pr, Vector::Constant(1, x), t, n, RngStream(5, 0, Purpose::Reference));
  EXPECT_LE(std::abs(v + std::log(m1)), 3.0 * se);
}
