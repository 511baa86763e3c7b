#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sdgd/network.hpp"
#include "sdgd/pde.hpp"
#include "sdgd/random.hpp"

namespace sdgd {

struct AdamState {
  Vector m, v;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  explicit AdamState(std::size_t n)
      : m(Vector::Zero(static_cast<Eigen::Index>(n))), v(Vector::Zero(static_cast<Eigen::Index>(n))) {}

  friend bool operator==(const AdamState& a, const AdamState& b);
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(AdamState& state, NetworkParams& params, const ParamGrad& grad, double lr);

enum class ScheduleKind : std::uint8_t { LinearToZero, Exponential, Constant };

const char* to_string(ScheduleKind k);
ScheduleKind schedule_from_string(const std::string& name);

struct LrSchedule {
  ScheduleKind kind = ScheduleKind::LinearToZero;
  double base_lr = 1e-3;
  std::uint64_t total_steps = 10000;
  double decay = 0.9995;
};

/// Learning rate at `step`; steps outside [0, total_steps] are clamped.
double lr_at(const LrSchedule& schedule, std::int64_t step);

/// Gradient of r^2 with respect to the point coordinates (x, then t), where
/// r is the residual estimated with the same index set in both passes.
Vector residual_sq_input_gradient(const PdeProblem& problem, const NetworkParams& params,
                                  const Point& p, const DimSet& I);

/// Signed-gradient ascent of the squared residual on HJB residual points.
/// Each step redraws `dims_per_step` dimensions per point from a per-point
/// substream of `stream`. t is clamped to [0, 1].
std::vector<Point> adversarial_ascend(const PdeProblem& problem, const NetworkParams& params,
                                      const std::vector<Point>& points, std::size_t dims_per_step,
                                      std::size_t steps, double step_size, const RngStream& stream,
                                      std::size_t workers = 1);

}  // namespace sdgd
