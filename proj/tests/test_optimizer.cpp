#include <gtest/gtest.h>

#include <cmath>

#include "sdgd/errors.hpp"
#include "sdgd/estimator.hpp"
#include "sdgd/optimizer.hpp"
#include "sdgd/sampling.hpp"

using namespace sdgd;

namespace {

// Plain scalar Adam, written out from the update equations.
struct ScalarAdam {
  double m = 0.0, v = 0.0;
  int t = 0;
  double step(double theta, double g, double lr) {
    ++t;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1.0 - std::pow(0.9, t));
    const double vh = v / (1.0 - std::pow(0.999, t));
    return theta - lr * mh / (std::sqrt(vh) + 1e-8);
  }
};

NetworkParams scalar_params(double theta) {
  NetworkParams p({1, 1}, Activation::Tanh, false);
  p.flat()[0] = theta;
  return p;
}

ParamGrad scalar_grad(double g) {
  ParamGrad out(1);
  out.data[0] = g;
  return out;
}

NetworkParams hjb_net(const PdeProblem& pr, std::uint64_t seed) {
  NetworkParams p = init_params({pr.input_dim(), 10, 10, 1}, Activation::Tanh, seed);
  RngStream rng(seed, 1, Purpose::Analysis);
  for (std::size_t l = 0; l < p.layers(); ++l)
    for (Eigen::Index k = 0; k < p.bias(l).size(); ++k) p.bias(l)[k] = rng.uniform() - 0.5;
  return p;
}

}  // namespace

TEST(Adam, ZeroGradientLeavesParams) {
  NetworkParams p = init_params({3, 4, 1}, Activation::Tanh, 0);
  const NetworkParams before = p;
  AdamState s(p.size());
  adam_step(s, p, ParamGrad(p.size()), 1e-3);
  EXPECT_TRUE(p == before);
  EXPECT_EQ(s.step, 1u);
}

TEST(Adam, FirstStepMagnitude) {
  NetworkParams p = scalar_params(0.0);
  AdamState s(1);
  adam_step(s, p, scalar_grad(1.0), 1e-3);
  EXPECT_NEAR(p.flat()[0], -1e-3 / (1.0 + 1e-8), 1e-18);
}

TEST(Adam, MatchesScalarReference) {
  NetworkParams p = scalar_params(0.3);
  AdamState s;
  ScalarAdam ref;
  double theta = 0.3;
  for (double g : {0.7, -2.0, 0.05}) {
    adam_step(s, p, scalar_grad(g), 1e-2);
    theta = ref.step(theta, g, 1e-2);
    EXPECT_NEAR(p.flat()[0], theta, 1e-15);
  }
}

TEST(Adam, UpdateBoundedByLearningRate) {
  // Worst case over sign changes is lr (1 - beta1) / sqrt(1 - beta2) ~ 3.16 lr.
  RngStream rng(1, 0, Purpose::Analysis);
  for (int trial = 0; trial < 50; ++trial) {
    NetworkParams p = scalar_params(0.0);
    AdamState s(1);
    double prev = 0.0;
    for (int k = 0; k < 20; ++k) {
      const double scale = std::pow(10.0, 12.0 * rng.uniform() - 6.0);
      adam_step(s, p, scalar_grad(scale * (rng.uniform() - 0.3)), 1e-3);
      EXPECT_LE(std::abs(p.flat()[0] - prev), 1e-3 * (1.0 + 1e-9) * 3.2);
      prev = p.flat()[0];
    }
  }
  // A constant-sign gradient of any magnitude moves by at most lr per step.
  for (double g : {1e-9, 1.0, 1e9}) {
    NetworkParams p = scalar_params(0.0);
    AdamState s(1);
    double prev = 0.0;
    for (int k = 0; k < 10; ++k) {
      adam_step(s, p, scalar_grad(g), 1e-3);
      EXPECT_LE(std::abs(p.flat()[0] - prev), 1e-3 * (1.0 + 1e-12));
      prev = p.flat()[0];
    }
  }
}

TEST(Adam, ShapeMismatch) {
  NetworkParams p = init_params({3, 4, 1}, Activation::Tanh, 0);
  AdamState s(p.size());
  EXPECT_THROW(adam_step(s, p, ParamGrad(3), 1e-3), ContractError);
  AdamState wrong(5);
  EXPECT_THROW(adam_step(wrong, p, ParamGrad(p.size()), 1e-3), ContractError);
}

TEST(Schedule, Endpoints) {
  const LrSchedule lin{ScheduleKind::LinearToZero, 1e-3, 100, 0.9995};
  EXPECT_EQ(lr_at(lin, 0), 1e-3);
  EXPECT_EQ(lr_at(lin, 100), 0.0);
  EXPECT_NEAR(lr_at(lin, 25), 0.75e-3, 1e-18);
  EXPECT_EQ(lr_at(lin, 500), 0.0);
  EXPECT_EQ(lr_at(lin, -3), 1e-3);
  const LrSchedule ex{ScheduleKind::Exponential, 1e-3, 1000, 0.9995};
  EXPECT_NEAR(lr_at(ex, 100), 1e-3 * std::pow(0.9995, 100), 1e-18);
  const LrSchedule co{ScheduleKind::Constant, 2e-3, 10, 0.5};
  EXPECT_EQ(lr_at(co, 7), 2e-3);
  for (ScheduleKind k : {ScheduleKind::LinearToZero, ScheduleKind::Exponential, ScheduleKind::Constant})
    EXPECT_EQ(schedule_from_string(to_string(k)), k);
  EXPECT_THROW(schedule_from_string("cosine"), ConfigError);
}

TEST(Schedule, NonIncreasing) {
  for (ScheduleKind k : {ScheduleKind::LinearToZero, ScheduleKind::Exponential}) {
    const LrSchedule s{k, 1e-3, 300, 0.99};
    for (std::int64_t t = 0; t < 320; ++t) EXPECT_LE(lr_at(s, t + 1), lr_at(s, t));
  }
}

TEST(InputGradient, MatchesFiniteDifferences) {
  for (ProblemKind k : {ProblemKind::HjbLog, ProblemKind::HjbRosenbrock}) {
    const PdeProblem pr = make_problem(k, 3, 0);
    const NetworkParams p = hjb_net(pr, 1);
    RngStream rng(2, 0, Purpose::ResidualPoints);
    const Point pt = sample_points(pr, 1, rng)[0];
    const DimSet I{0, 2};
    const Vector g = residual_sq_input_gradient(pr, p, pt, I);
    ASSERT_EQ(g.size(), 4);
    for (Eigen::Index c = 0; c < 4; ++c) {
      const double h = 1e-5;
      Point a = pt, b = pt;
      if (c < 3) {
        a.x[c] += h;
        b.x[c] -= h;
      } else {
        a.t += h;
        b.t -= h;
      }
      const double ra = point_residual(pr, p, a, I), rb = point_residual(pr, p, b, I);
      EXPECT_NEAR(g[c], (ra * ra - rb * rb) / (2 * h), 1e-6 * (1.0 + std::abs(g[c]))) << to_string(k);
    }
  }
}

TEST(Adversarial, ZeroStepsIsIdentity) {
  const PdeProblem pr = make_problem(ProblemKind::HjbLog, 4, 0);
  RngStream rng(3, 0, Purpose::ResidualPoints);
  const auto pts = sample_points(pr, 5, rng);
  const auto out = adversarial_ascend(pr, hjb_net(pr, 1), pts, 2, 0, 0.1, RngStream(0, 0, Purpose::Adversarial));
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_EQ(out[k].x, pts[k].x);
    EXPECT_EQ(out[k].t, pts[k].t);
  }
}

TEST(Adversarial, SmallStepDoesNotDecreaseResidual) {
  for (ProblemKind k : {ProblemKind::HjbLog, ProblemKind::HjbRosenbrock}) {
    const PdeProblem pr = make_problem(k, 4, 0);
    const NetworkParams p = hjb_net(pr, 2);
    RngStream rng(4, 0, Purpose::ResidualPoints);
    const auto pts = sample_points(pr, 20, rng);
    const auto out = adversarial_ascend(pr, p, pts, 4, 1, 1e-3, RngStream(0, 0, Purpose::Adversarial));
    const DimSet all = all_dims(4);
    double before = 0.0, after = 0.0;
    for (std::size_t n = 0; n < pts.size(); ++n) {
      before += std::pow(point_residual(pr, p, pts[n], all), 2);
      after += std::pow(point_residual(pr, p, out[n], all), 2);
    }
    EXPECT_GE(after, before) << to_string(k);
  }
}

TEST(Adversarial, TimeClampedAndWorkersDeterministic) {
  const PdeProblem pr = make_problem(ProblemKind::HjbRosenbrock, 5, 0);
  const NetworkParams p = hjb_net(pr, 3);
  RngStream rng(5, 0, Purpose::ResidualPoints);
  const auto pts = sample_points(pr, 12, rng);
  const RngStream adv(0, 0, Purpose::Adversarial);
  const auto a = adversarial_ascend(pr, p, pts, 2, 5, 0.5, adv, 1);
  const auto b = adversarial_ascend(pr, p, pts, 2, 5, 0.5, adv, 3);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    EXPECT_GE(a[k].t, 0.0);
    EXPECT_LE(a[k].t, 1.0);
    EXPECT_EQ(a[k].x, b[k].x);
    EXPECT_EQ(a[k].t, b[k].t);
  }
}

TEST(Adversarial, EllipticUnsupported) {
  const PdeProblem pr = make_problem(ProblemKind::Poisson, 3, 0);
  RngStream rng(6, 0, Purpose::ResidualPoints);
  const auto pts = sample_points(pr, 2, rng);
  const NetworkParams p = init_params({3, 4, 1}, Activation::Tanh, 0);
  EXPECT_THROW(adversarial_ascend(pr, p, pts, 1, 1, 1e-3, RngStream(0, 0, Purpose::Adversarial)), UnsupportedError);
}
