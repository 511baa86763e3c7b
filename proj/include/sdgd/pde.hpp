#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sdgd/network.hpp"
#include "sdgd/random.hpp"

namespace sdgd {

enum class ProblemKind : std::uint8_t { Poisson, AllenCahn, SineGordon, HjbLog, HjbRosenbrock };

const char* to_string(ProblemKind k);
ProblemKind problem_kind_from_string(const std::string& name);

/// A PDE whose residual splits as  A(x) + sum_i s_i(x) - R(x):
/// an exactly evaluated remainder A, one sampled term per spatial dimension
/// (the wrapped second derivatives), and a forcing R.
///
/// Elliptic kinds live on the unit ball with a zero boundary condition
/// enforced by the wrapper (1 - |x|^2) u_theta(x).  HJB kinds take the
/// network input (x, t) with t stored last, and the terminal condition is
/// enforced by (1 - t) u_theta(x, t) + g(x).
struct PdeProblem {
  ProblemKind kind = ProblemKind::Poisson;
  std::size_t d = 2;
  std::uint64_t seed = 0;
  /// Elliptic exact-solution coefficients c_i ~ N(0, 1), length d - 1.
  std::vector<double> c;
  /// Rosenbrock cost coefficients ~ U[0.5, 1.5], length d - 1.
  std::vector<double> c1, c2;

  bool is_hjb() const { return kind == ProblemKind::HjbLog || kind == ProblemKind::HjbRosenbrock; }
  bool is_elliptic() const { return !is_hjb(); }
  /// Network input size: d, or d + 1 for HJB (time is the last input).
  std::size_t input_dim() const { return is_hjb() ? d + 1 : d; }
  /// Size of the sampled term family N_L.
  std::size_t n_terms() const { return d; }
  /// Index of the time coordinate in the network input (HJB only).
  std::size_t time_index() const { return d; }
};

PdeProblem make_problem(ProblemKind kind, std::size_t d, std::uint64_t seed);

/// Network input for a point: x for elliptic problems, (x, t) for HJB.
Vector network_input(const PdeProblem& problem, const Point& p);
Point point_from_input(const PdeProblem& problem, const Vector& z);

/// Default Monte Carlo fidelity of HJB references.
inline constexpr std::size_t kDefaultReferenceSamples = 100000;

/// Exact solution. Elliptic: closed form (throws DomainError outside the
/// closed unit ball). HJB: g(x) at t = 1, otherwise hjb_reference with the
/// default fidelity and a stream keyed by the problem seed.
double exact_solution(const PdeProblem& problem, const Point& p);

/// Closed-form Laplacian of the elliptic exact solution.
double exact_laplacian(const PdeProblem& problem, const Vector& x);

/// R(x): Laplacian of the exact solution plus the problem nonlinearity
/// evaluated at the exact solution. Zero for HJB.
double forcing(const PdeProblem& problem, const Vector& x);

/// Terminal cost g and its gradient / Hessian diagonal (HJB only).
double terminal_cost(const PdeProblem& problem, const Vector& x);
Vector terminal_cost_gradient(const PdeProblem& problem, const Vector& x);
Vector terminal_cost_hessian_diag(const PdeProblem& problem, const Vector& x);

/// Atoms of the hard-constrained model built from raw network atoms.
/// Index convention matches the network input (time last for HJB).
AtomValues wrap_atoms(const PdeProblem& problem, const AtomValues& raw);

/// First-derivative dimensions the wrapper and remainder need when the
/// second-derivative set is `second_dims`.
DimSet required_first_dims(const PdeProblem& problem, const DimSet& second_dims);

AtomValues wrapped_atoms(const PdeProblem& problem, const NetworkParams& params, const Point& p,
                         const DimSet& second_dims);

struct ResidualPieces {
  double remainder = 0.0;
  std::map<std::size_t, double> sampled_terms;
  double forcing = 0.0;
};

/// `atoms` are wrapped atoms; `forward_dims` is the forward index set J.
ResidualPieces residual_pieces(const PdeProblem& problem, const AtomValues& atoms,
                               const DimSet& forward_dims);

/// A + (N_L / |J|) * sum_{j in J} s_j - R. Repeated indices in J count once
/// per occurrence.
double residual_estimate(const PdeProblem& problem, const ResidualPieces& pieces,
                         const DimSet& forward_dims);

/// Chain-rule coefficients, over raw network atoms, of
/// A + (N_L / |I|) * sum_{i in I} s_i.  `atoms` are wrapped atoms.
AtomCotangents residual_cotangents(const PdeProblem& problem, const AtomValues& atoms,
                                   const DimSet& backward_dims);

/// -log of the sample mean of exp(-g(x - sqrt(2(1-t)) y)), y ~ N(0, I),
/// evaluated in log-sum-exp form.
double hjb_reference(const PdeProblem& problem, const Vector& x, double t, std::size_t n_mc,
                     RngStream stream);

}  // namespace sdgd
