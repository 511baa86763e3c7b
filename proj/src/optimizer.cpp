#include "sdgd/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "sdgd/errors.hpp"
#include "sdgd/estimator.hpp"
#include "sdgd/sampling.hpp"

namespace sdgd {

bool operator==(const AdamState& a, const AdamState& b) {
  return a.step == b.step && a.beta1 == b.beta1 && a.beta2 == b.beta2 && a.eps == b.eps &&
         a.m.size() == b.m.size() && a.v.size() == b.v.size() && a.m == b.m && a.v == b.v;
}

void adam_step(AdamState& state, NetworkParams& params, const ParamGrad& grad, double lr) {
  const auto n = static_cast<Eigen::Index>(params.size());
  if (grad.data.size() != n) throw ContractError("adam_step: gradient size != parameter count");
  if (state.m.size() == 0 && state.v.size() == 0 && state.step == 0) {
    state.m = Vector::Zero(n);
    state.v = Vector::Zero(n);
  }
  if (state.m.size() != n || state.v.size() != n) {
    throw ContractError("adam_step: optimizer state does not match the parameters");
  }
  state.step += 1;
  const auto t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  Vector& theta = params.flat();
  for (Eigen::Index k = 0; k < n; ++k) {
    const double g = grad.data[k];
    state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g;
    state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * g * g;
    const double mhat = state.m[k] / c1;
    const double vhat = state.v[k] / c2;
    theta[k] -= lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

const char* to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::LinearToZero:
      return "linear";
    case ScheduleKind::Exponential:
      return "exponential";
    case ScheduleKind::Constant:
      return "constant";
  }
  return "?";
}

ScheduleKind schedule_from_string(const std::string& name) {
  for (auto k : {ScheduleKind::LinearToZero, ScheduleKind::Exponential, ScheduleKind::Constant}) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError("unknown schedule '" + name + "' (expected linear, exponential or constant)");
}

double lr_at(const LrSchedule& s, std::int64_t step) {
  const auto total = static_cast<std::int64_t>(s.total_steps);
  step = std::clamp<std::int64_t>(step, 0, total);
  switch (s.kind) {
    case ScheduleKind::LinearToZero:
      if (total == 0) return s.base_lr;
      if (step == total) return 0.0;
      return s.base_lr * (1.0 - static_cast<double>(step) / static_cast<double>(total));
    case ScheduleKind::Exponential:
      return s.base_lr * std::pow(s.decay, static_cast<double>(step));
    case ScheduleKind::Constant:
      return s.base_lr;
  }
  return s.base_lr;
}

namespace {

// Part of the HJB residual that depends on x only through g, with the raw
// network atoms held fixed.
double explicit_x_part(const PdeProblem& problem, const AtomValues& raw, const Vector& x, double s,
                       const DimSet& I) {
  const Vector g1 = terminal_cost_gradient(problem, x);
  const Vector g2 = terminal_cost_hessian_diag(problem, x);
  double out = 0.0;
  for (std::size_t i = 0; i < problem.d; ++i) {
    const double wi = s * raw.d1(i) + g1[static_cast<Eigen::Index>(i)];
    out -= wi * wi;
  }
  const double ds = static_cast<double>(problem.n_terms()) / static_cast<double>(I.size());
  for (std::size_t i : I) out += ds * g2[static_cast<Eigen::Index>(i)];
  return out;
}

}  // namespace

Vector residual_sq_input_gradient(const PdeProblem& problem, const NetworkParams& params,
                                  const Point& p, const DimSet& I) {
  if (!problem.is_hjb()) throw UnsupportedError("adversarial ascent is defined for HJB problems only");
  const DimSet dims = dim_union(I, {});
  const Vector z = network_input(problem, p);
  const DerivativeTape tape(params, z, dims, required_first_dims(problem, dims));
  const AtomValues& raw = tape.atoms();
  const AtomValues atoms = wrap_atoms(problem, raw);
  const double r = residual_estimate(problem, residual_pieces(problem, atoms, I), I);

  // Dependence through the network: exact input adjoint.
  Vector grad = tape.pullback(residual_cotangents(problem, atoms, I)).input;

  // Explicit dependence through the (1 - t) factors.
  const std::size_t ti = problem.time_index();
  const double s = 1.0 - p.t;
  const double ds = static_cast<double>(problem.n_terms()) / static_cast<double>(I.size());
  double dt = -raw.d1(ti);
  for (std::size_t i = 0; i < problem.d; ++i) dt += 2.0 * atoms.d1(i) * raw.d1(i);
  for (std::size_t i : I) dt -= ds * raw.d2(i);
  grad[static_cast<Eigen::Index>(ti)] += dt;

  // Explicit dependence through g, which would need its third derivatives.
  const double h = 1e-4;
  Vector xp = p.x;
  for (Eigen::Index k = 0; k < p.x.size(); ++k) {
    xp[k] = p.x[k] + h;
    const double fp = explicit_x_part(problem, raw, xp, s, I);
    xp[k] = p.x[k] - h;
    const double fm = explicit_x_part(problem, raw, xp, s, I);
    xp[k] = p.x[k];
    grad[k] += (fp - fm) / (2.0 * h);
  }
  return 2.0 * r * grad;
}

std::vector<Point> adversarial_ascend(const PdeProblem& problem, const NetworkParams& params,
                                      const std::vector<Point>& points, std::size_t dims_per_step,
                                      std::size_t steps, double step_size, const RngStream& stream,
                                      std::size_t workers) {
  if (!problem.is_hjb()) throw UnsupportedError("adversarial ascent is defined for HJB problems only");
  if (dims_per_step == 0 || dims_per_step > problem.n_terms()) {
    throw ArgumentError("adversarial dimension batch must lie in [1, d]");
  }
  std::vector<Point> out = points;
  if (steps == 0) return out;
  parallel_for(out.size(), workers, [&](std::size_t k) {
    RngStream local = stream.fork(static_cast<std::uint32_t>(k));
    Point& p = out[k];
    for (std::size_t step = 0; step < steps; ++step) {
      const DimSet I = sample_dims(problem.n_terms(), dims_per_step, false, local);
      const Vector g = residual_sq_input_gradient(problem, params, p, I);
      for (Eigen::Index i = 0; i < p.x.size(); ++i) {
        p.x[i] += step_size * static_cast<double>((g[i] > 0.0) - (g[i] < 0.0));
      }
      const double gt = g[static_cast<Eigen::Index>(problem.time_index())];
      p.t = std::clamp(p.t + step_size * static_cast<double>((gt > 0.0) - (gt < 0.0)), 0.0, 1.0);
    }
  });
  return out;
}

}  // namespace sdgd
