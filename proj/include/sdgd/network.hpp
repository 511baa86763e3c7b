#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sdgd {

using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Sorted list of 0-based input dimensions. May contain repeats when it
/// comes from with-replacement sampling; the network only ever sees the
/// distinct entries.
using DimSet = std::vector<std::size_t>;

enum class Activation : std::uint8_t { Tanh = 0, Sin = 1 };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& name);

/// Weights and biases of the MLP surrogate, stored flat in canonical order:
/// layer by layer, each layer's weight matrix row-major, followed by that
/// layer's bias (when biases are enabled).
class NetworkParams {
 public:
  NetworkParams() = default;
  NetworkParams(std::vector<std::size_t> widths, Activation activation, bool bias);

  const std::vector<std::size_t>& widths() const { return widths_; }
  Activation activation() const { return activation_; }
  bool has_bias() const { return bias_; }
  std::size_t input_dim() const { return widths_.front(); }
  /// Number of affine layers L.
  std::size_t layers() const { return widths_.size() - 1; }
  std::size_t size() const { return static_cast<std::size_t>(theta_.size()); }

  /// Layer l in [0, L): matrix of shape widths[l+1] x widths[l].
  Eigen::Map<const RowMatrix> weights(std::size_t l) const;
  Eigen::Map<RowMatrix> weights(std::size_t l);
  /// Empty map when biases are disabled.
  Eigen::Map<const Vector> bias(std::size_t l) const;
  Eigen::Map<Vector> bias(std::size_t l);

  std::size_t weight_offset(std::size_t l) const { return offsets_[l]; }
  std::size_t bias_offset(std::size_t l) const;

  const Vector& flat() const { return theta_; }
  Vector& flat() { return theta_; }

  bool same_layout(const NetworkParams& other) const;

  /// Bitwise equality of layout and every parameter value.
  friend bool operator==(const NetworkParams& a, const NetworkParams& b);

 private:
  std::vector<std::size_t> widths_;
  Activation activation_ = Activation::Tanh;
  bool bias_ = true;
  std::vector<std::size_t> offsets_;
  Vector theta_;
};

/// Flat parameter-space vector in the canonical order of NetworkParams.
struct ParamGrad {
  Vector data;

  ParamGrad() = default;
  explicit ParamGrad(std::size_t n) : data(Vector::Zero(static_cast<Eigen::Index>(n))) {}
  explicit ParamGrad(Vector v) : data(std::move(v)) {}

  std::size_t size() const { return static_cast<std::size_t>(data.size()); }
};

/// Derivatives of the network output at one point.
struct AtomValues {
  Vector point;
  double value = 0.0;
  DimSet first_dims;  ///< sorted, distinct
  std::vector<double> first;
  DimSet second_dims;  ///< sorted, distinct
  std::vector<double> second;

  bool has_first(std::size_t i) const;
  bool has_second(std::size_t i) const;
  /// Throws ContractError when the atom was not computed.
  double d1(std::size_t i) const;
  double d2(std::size_t i) const;
};

/// Coefficients of a linear combination of derivative atoms:
/// value * u + sum_i first[i] * du/dx_i + sum_i second[i] * d2u/dx_i^2.
struct AtomCotangents {
  double value = 0.0;
  std::map<std::size_t, double> first;
  std::map<std::size_t, double> second;

  AtomCotangents& operator*=(double s);
  AtomCotangents& operator+=(const AtomCotangents& o);
};

AtomCotangents operator*(double s, AtomCotangents c);
AtomCotangents operator+(AtomCotangents a, const AtomCotangents& b);

/// Result of one reverse sweep: gradient with respect to the parameters and
/// with respect to the input point (directions held fixed).
struct Pullback {
  ParamGrad params;
  Vector input;
};

/// Forward record of a single point: per-layer activations, their
/// derivative diagonals, and the first/second-order tangent chains for the
/// requested dimensions. Computed once, shared across all dimensions, and
/// consumed by any number of reverse sweeps.
class DerivativeTape {
 public:
  DerivativeTape(const NetworkParams& params, const Vector& x, const DimSet& second_dims,
                 const DimSet& first_dims);

  const AtomValues& atoms() const { return atoms_; }
  /// Number of distinct dimensions whose second derivative was evaluated.
  std::size_t second_evaluations() const { return second_.size(); }

  /// Parameter and input gradients of the cotangent-weighted atom
  /// combination. Only the columns referenced by `cot` are traversed.
  Pullback pullback(const AtomCotangents& cot) const;

 private:
  struct Layer {
    Vector z, act, d1, d2, d3;
    RowMatrix zt;   // first-order pre-activation tangents, one column per dim in cols_
    RowMatrix ztt;  // second-order pre-activation, one column per dim in second_
    RowMatrix t;    // post-activation tangents
    RowMatrix s;    // post-activation second-order terms
  };

  const NetworkParams* params_;
  Vector x_;
  DimSet cols_;    // second dims first, then first-only dims
  DimSet second_;  // == cols_[0, second_.size())
  std::vector<Layer> layers_;  // hidden layers 1..L-1
  AtomValues atoms_;
};

/// Xavier-uniform weights, zero biases. Deterministic in (widths, seed).
NetworkParams init_params(const std::vector<std::size_t>& widths, Activation activation,
                          std::uint64_t seed, bool bias = true);

double forward(const NetworkParams& params, const Vector& x);

AtomValues derivative_bundle(const NetworkParams& params, const Vector& x,
                             const DimSet& second_dims, const DimSet& first_dims = {});

ParamGrad param_pullback(const NetworkParams& params, const Vector& x,
                         const AtomCotangents& cot);

/// Payload: format version, widths, activation, bias flag, parameter count,
/// then parameters as little-endian float64 in canonical order.
void write_params(std::ostream& out, const NetworkParams& params);
NetworkParams read_params(std::istream& in);

inline constexpr std::uint32_t kParamsFormatVersion = 1;

}  // namespace sdgd
