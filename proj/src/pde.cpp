#include "sdgd/pde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "sdgd/errors.hpp"

namespace sdgd {

const char* to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::Poisson:
      return "poisson";
    case ProblemKind::AllenCahn:
      return "allen_cahn";
    case ProblemKind::SineGordon:
      return "sine_gordon";
    case ProblemKind::HjbLog:
      return "hjb_log";
    case ProblemKind::HjbRosenbrock:
      return "hjb_rosenbrock";
  }
  return "?";
}

ProblemKind problem_kind_from_string(const std::string& name) {
  for (auto k : {ProblemKind::Poisson, ProblemKind::AllenCahn, ProblemKind::SineGordon,
                 ProblemKind::HjbLog, ProblemKind::HjbRosenbrock}) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError("unknown problem '" + name +
                    "' (expected poisson, allen_cahn, sine_gordon, hjb_log or hjb_rosenbrock)");
}

PdeProblem make_problem(ProblemKind kind, std::size_t d, std::uint64_t seed) {
  if (d < 2) throw ConfigError("problem dimension must be at least 2, got " + std::to_string(d));
  PdeProblem p;
  p.kind = kind;
  p.d = d;
  p.seed = seed;
  RngStream rng(seed, 0, Purpose::ProblemCoeffs);
  if (p.is_elliptic()) {
    std::normal_distribution<double> normal;
    p.c.resize(d - 1);
    for (double& ci : p.c) ci = normal(rng);
  } else if (kind == ProblemKind::HjbRosenbrock) {
    p.c1.resize(d - 1);
    p.c2.resize(d - 1);
    for (std::size_t i = 0; i + 1 < d; ++i) {
      p.c1[i] = 0.5 + rng.uniform();
      p.c2[i] = 0.5 + rng.uniform();
    }
  }
  return p;
}

Vector network_input(const PdeProblem& problem, const Point& p) {
  if (static_cast<std::size_t>(p.x.size()) != problem.d) {
    throw ShapeError("point has " + std::to_string(p.x.size()) + " coordinates, problem has d = " +
                     std::to_string(problem.d));
  }
  if (!problem.is_hjb()) return p.x;
  Vector z(static_cast<Eigen::Index>(problem.d + 1));
  z.head(static_cast<Eigen::Index>(problem.d)) = p.x;
  z[static_cast<Eigen::Index>(problem.d)] = p.t;
  return z;
}

Point point_from_input(const PdeProblem& problem, const Vector& z) {
  if (static_cast<std::size_t>(z.size()) != problem.input_dim()) {
    throw ShapeError("network input size does not match the problem");
  }
  Point p;
  p.x = z.head(static_cast<Eigen::Index>(problem.d));
  if (problem.is_hjb()) p.t = z[static_cast<Eigen::Index>(problem.d)];
  return p;
}

// ---------------------------------------------------------------------------
// Elliptic exact solution

namespace {

void require_elliptic(const PdeProblem& problem, const char* what) {
  if (!problem.is_elliptic()) {
    throw UnsupportedError(std::string(what) + " is defined for elliptic problems only");
  }
}

void require_ball(const Vector& x) {
  // Points on the sphere computed in floating point may land a few ulps out.
  if (x.squaredNorm() > 1.0 + 1e-12) {
    throw DomainError("point with |x| = " + std::to_string(x.norm()) +
                      " lies outside the closed unit ball");
  }
}

struct SeriesTerms {
  double value = 0.0;  // S(x)
  double x_dot_grad = 0.0;  // x . grad S
  double laplacian = 0.0;  // Lap S
};

// S(x) = sum_i c_i sin(x_i + cos(x_{i+1}) + x_{i+1} cos(x_i)) and the pieces
// of its derivatives the Laplacian of (1 - |x|^2) S needs.
SeriesTerms series(const std::vector<double>& c, const Vector& x) {
  SeriesTerms out;
  const std::size_t n = c.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = x[static_cast<Eigen::Index>(i)];
    const double xj = x[static_cast<Eigen::Index>(i + 1)];
    const double arg = xi + std::cos(xj) + xj * std::cos(xi);
    const double s = std::sin(arg);
    const double co = std::cos(arg);
    const double a = 1.0 - xj * std::sin(xi);  // d arg / d x_i
    const double b = std::cos(xi) - std::sin(xj);  // d arg / d x_{i+1}
    const double aa = -xj * std::cos(xi);
    const double bb = -std::cos(xj);
    out.value += c[i] * s;
    out.x_dot_grad += c[i] * co * (a * xi + b * xj);
    out.laplacian += c[i] * (-s * a * a + co * aa - s * b * b + co * bb);
  }
  return out;
}

}  // namespace

double exact_laplacian(const PdeProblem& problem, const Vector& x) {
  require_elliptic(problem, "exact_laplacian");
  require_ball(x);
  const SeriesTerms s = series(problem.c, x);
  const double phi = 1.0 - x.squaredNorm();
  return -2.0 * static_cast<double>(problem.d) * s.value - 4.0 * s.x_dot_grad + phi * s.laplacian;
}

double exact_solution(const PdeProblem& problem, const Point& p) {
  if (problem.is_hjb()) {
    if (p.t == 1.0) return terminal_cost(problem, p.x);
    return hjb_reference(problem, p.x, p.t, kDefaultReferenceSamples,
                         RngStream(problem.seed, 0, Purpose::Reference));
  }
  require_ball(p.x);
  return (1.0 - p.x.squaredNorm()) * series(problem.c, p.x).value;
}

double forcing(const PdeProblem& problem, const Vector& x) {
  if (problem.is_hjb()) return 0.0;
  const double lap = exact_laplacian(problem, x);
  const double u = (1.0 - x.squaredNorm()) * series(problem.c, x).value;
  switch (problem.kind) {
    case ProblemKind::AllenCahn:
      return lap + u - u * u * u;
    case ProblemKind::SineGordon:
      return lap + std::sin(u);
    default:
      return lap;
  }
}

// ---------------------------------------------------------------------------
// HJB terminal costs

namespace {

void require_hjb(const PdeProblem& problem, const char* what) {
  if (!problem.is_hjb()) throw UnsupportedError(std::string(what) + " is defined for HJB problems only");
}

double rosenbrock_q(const PdeProblem& p, const Vector& x) {
  double q = 1.0;
  for (std::size_t i = 0; i + 1 < p.d; ++i) {
    const double a = x[static_cast<Eigen::Index>(i)];
    const double b = x[static_cast<Eigen::Index>(i + 1)];
    q += p.c1[i] * (a - b) * (a - b) + p.c2[i] * b * b;
  }
  return q;
}

}  // namespace

double terminal_cost(const PdeProblem& problem, const Vector& x) {
  require_hjb(problem, "terminal_cost");
  if (problem.kind == ProblemKind::HjbLog) return std::log(0.5 * (1.0 + x.squaredNorm()));
  return std::log(0.5 * rosenbrock_q(problem, x));
}

Vector terminal_cost_gradient(const PdeProblem& problem, const Vector& x) {
  require_hjb(problem, "terminal_cost_gradient");
  if (problem.kind == ProblemKind::HjbLog) return 2.0 * x / (1.0 + x.squaredNorm());
  const double q = rosenbrock_q(problem, x);
  Vector grad = Vector::Zero(x.size());
  for (std::size_t i = 0; i + 1 < problem.d; ++i) {
    const auto a = static_cast<Eigen::Index>(i);
    const double diff = x[a] - x[a + 1];
    grad[a] += 2.0 * problem.c1[i] * diff;
    grad[a + 1] += -2.0 * problem.c1[i] * diff + 2.0 * problem.c2[i] * x[a + 1];
  }
  return grad / q;
}

Vector terminal_cost_hessian_diag(const PdeProblem& problem, const Vector& x) {
  require_hjb(problem, "terminal_cost_hessian_diag");
  if (problem.kind == ProblemKind::HjbLog) {
    const double q = 1.0 + x.squaredNorm();
    return (2.0 / q - 4.0 * x.array().square() / (q * q)).matrix();
  }
  const double q = rosenbrock_q(problem, x);
  Vector qk = Vector::Zero(x.size());
  Vector qkk = Vector::Zero(x.size());
  for (std::size_t i = 0; i + 1 < problem.d; ++i) {
    const auto a = static_cast<Eigen::Index>(i);
    const double diff = x[a] - x[a + 1];
    qk[a] += 2.0 * problem.c1[i] * diff;
    qk[a + 1] += -2.0 * problem.c1[i] * diff + 2.0 * problem.c2[i] * x[a + 1];
    qkk[a] += 2.0 * problem.c1[i];
    qkk[a + 1] += 2.0 * problem.c1[i] + 2.0 * problem.c2[i];
  }
  return (qkk.array() / q - qk.array().square() / (q * q)).matrix();
}

// ---------------------------------------------------------------------------
// Hard-constraint wrappers

DimSet required_first_dims(const PdeProblem& problem, const DimSet& second_dims) {
  if (!problem.is_hjb()) return second_dims;
  DimSet all(problem.d + 1);
  for (std::size_t i = 0; i <= problem.d; ++i) all[i] = i;
  return all;
}

AtomValues wrap_atoms(const PdeProblem& problem, const AtomValues& raw) {
  if (static_cast<std::size_t>(raw.point.size()) != problem.input_dim()) {
    throw ShapeError("atoms were computed for a different input size");
  }
  AtomValues w = raw;
  if (problem.is_elliptic()) {
    const Vector& x = raw.point;
    const double phi = 1.0 - x.squaredNorm();
    const double u = raw.value;
    w.value = phi * u;
    for (std::size_t k = 0; k < raw.first_dims.size(); ++k) {
      const auto i = static_cast<Eigen::Index>(raw.first_dims[k]);
      w.first[k] = -2.0 * x[i] * u + phi * raw.first[k];
    }
    for (std::size_t k = 0; k < raw.second_dims.size(); ++k) {
      const std::size_t i = raw.second_dims[k];
      w.second[k] =
          -2.0 * u - 4.0 * x[static_cast<Eigen::Index>(i)] * raw.d1(i) + phi * raw.second[k];
    }
    return w;
  }

  const Point p = point_from_input(problem, raw.point);
  const double s = 1.0 - p.t;
  const std::size_t ti = problem.time_index();
  const Vector g1 = terminal_cost_gradient(problem, p.x);
  const Vector g2 = terminal_cost_hessian_diag(problem, p.x);
  w.value = s * raw.value + terminal_cost(problem, p.x);
  for (std::size_t k = 0; k < raw.first_dims.size(); ++k) {
    const std::size_t i = raw.first_dims[k];
    w.first[k] = i == ti ? -raw.value + s * raw.first[k]
                         : s * raw.first[k] + g1[static_cast<Eigen::Index>(i)];
  }
  for (std::size_t k = 0; k < raw.second_dims.size(); ++k) {
    const std::size_t i = raw.second_dims[k];
    w.second[k] = i == ti ? -2.0 * raw.d1(ti) + s * raw.second[k]
                          : s * raw.second[k] + g2[static_cast<Eigen::Index>(i)];
  }
  return w;
}

AtomValues wrapped_atoms(const PdeProblem& problem, const NetworkParams& params, const Point& p,
                         const DimSet& second_dims) {
  const Vector z = network_input(problem, p);
  return wrap_atoms(problem,
                    derivative_bundle(params, z, second_dims, required_first_dims(problem, second_dims)));
}

// ---------------------------------------------------------------------------
// Residual decomposition

namespace {

double remainder(const PdeProblem& problem, const AtomValues& atoms) {
  switch (problem.kind) {
    case ProblemKind::Poisson:
      return 0.0;
    case ProblemKind::AllenCahn:
      return atoms.value - atoms.value * atoms.value * atoms.value;
    case ProblemKind::SineGordon:
      return std::sin(atoms.value);
    case ProblemKind::HjbLog:
    case ProblemKind::HjbRosenbrock: {
      double grad_sq = 0.0;
      for (std::size_t i = 0; i < problem.d; ++i) {
        const double gi = atoms.d1(i);
        grad_sq += gi * gi;
      }
      return atoms.d1(problem.time_index()) - grad_sq;
    }
  }
  return 0.0;
}

void check_dims(const PdeProblem& problem, const DimSet& dims, const char* name) {
  if (dims.empty()) throw ContractError(std::string(name) + " index set is empty");
  for (std::size_t i : dims) {
    if (i >= problem.n_terms()) {
      throw IndexError(std::string(name) + " index " + std::to_string(i) + " out of range");
    }
  }
}

}  // namespace

ResidualPieces residual_pieces(const PdeProblem& problem, const AtomValues& atoms,
                               const DimSet& forward_dims) {
  check_dims(problem, forward_dims, "forward");
  ResidualPieces pieces;
  pieces.remainder = remainder(problem, atoms);
  for (std::size_t j : forward_dims) pieces.sampled_terms[j] = atoms.d2(j);
  pieces.forcing = problem.is_hjb()
                       ? 0.0
                       : forcing(problem, atoms.point.head(static_cast<Eigen::Index>(problem.d)));
  return pieces;
}

double residual_estimate(const PdeProblem& problem, const ResidualPieces& pieces,
                         const DimSet& forward_dims) {
  check_dims(problem, forward_dims, "forward");
  double sum = 0.0;
  for (std::size_t j : forward_dims) {
    const auto it = pieces.sampled_terms.find(j);
    if (it == pieces.sampled_terms.end()) {
      throw ContractError("sampled term " + std::to_string(j) + " missing from residual pieces");
    }
    sum += it->second;
  }
  const double scale =
      static_cast<double>(problem.n_terms()) / static_cast<double>(forward_dims.size());
  return pieces.remainder + scale * sum - pieces.forcing;
}

AtomCotangents residual_cotangents(const PdeProblem& problem, const AtomValues& atoms,
                                   const DimSet& backward_dims) {
  check_dims(problem, backward_dims, "backward");
  const double ds =
      static_cast<double>(problem.n_terms()) / static_cast<double>(backward_dims.size());
  AtomCotangents cot;

  if (problem.is_elliptic()) {
    const Vector& x = atoms.point;
    const double phi = 1.0 - x.squaredNorm();
    const double u = atoms.value;
    if (problem.kind == ProblemKind::AllenCahn) cot.value += (1.0 - 3.0 * u * u) * phi;
    if (problem.kind == ProblemKind::SineGordon) cot.value += std::cos(u) * phi;
    for (std::size_t i : backward_dims) {
      if (!atoms.has_second(i)) {
        throw ContractError("second derivative atom " + std::to_string(i) + " not computed");
      }
      cot.value += -2.0 * ds;
      cot.first[i] += -4.0 * x[static_cast<Eigen::Index>(i)] * ds;
      cot.second[i] += phi * ds;
    }
    return cot;
  }

  const std::size_t ti = problem.time_index();
  const double s = 1.0 - atoms.point[static_cast<Eigen::Index>(ti)];
  cot.value += -1.0;
  cot.first[ti] += s;
  for (std::size_t i = 0; i < problem.d; ++i) cot.first[i] += -2.0 * atoms.d1(i) * s;
  for (std::size_t i : backward_dims) {
    if (!atoms.has_second(i)) {
      throw ContractError("second derivative atom " + std::to_string(i) + " not computed");
    }
    cot.second[i] += s * ds;
  }
  return cot;
}

// ---------------------------------------------------------------------------
// HJB Monte Carlo reference

double hjb_reference(const PdeProblem& problem, const Vector& x, double t, std::size_t n_mc,
                     RngStream stream) {
  require_hjb(problem, "hjb_reference");
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("time must lie in [0, 1]");
  if (n_mc == 0) throw ArgumentError("hjb_reference needs at least one sample");
  if (static_cast<std::size_t>(x.size()) != problem.d) throw ShapeError("point size != d");
  if (t == 1.0) return terminal_cost(problem, x);

  const double scale = std::sqrt(2.0 * (1.0 - t));
  std::normal_distribution<double> normal;
  Vector y(x.size());
  // Streaming log-sum-exp of -g over the samples.
  double m = -std::numeric_limits<double>::infinity();
  double acc = 0.0;
  for (std::size_t k = 0; k < n_mc; ++k) {
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = x[i] - scale * normal(stream);
    const double v = -terminal_cost(problem, y);
    if (v > m) {
      acc = acc * std::exp(m - v) + 1.0;
      m = v;
    } else {
      acc += std::exp(v - m);
    }
  }
  return -(m + std::log(acc) - std::log(static_cast<double>(n_mc)));
}

}  // namespace sdgd
