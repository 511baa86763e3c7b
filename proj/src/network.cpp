#include "sdgd/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "sdgd/errors.hpp"
#include "sdgd/random.hpp"

namespace sdgd {

static_assert(std::endian::native == std::endian::little,
              "parameter payloads are written as raw little-endian doubles");

const char* to_string(Activation a) {
  switch (a) {
    case Activation::Tanh:
      return "tanh";
    case Activation::Sin:
      return "sin";
  }
  return "?";
}

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "sin") return Activation::Sin;
  throw ConfigError("unknown activation '" + name + "' (expected tanh or sin)");
}

// ---------------------------------------------------------------------------
// NetworkParams

NetworkParams::NetworkParams(std::vector<std::size_t> widths, Activation activation, bool bias)
    : widths_(std::move(widths)), activation_(activation), bias_(bias) {
  if (widths_.size() < 2) {
    throw ConfigError("network needs at least two widths (input and output), got " +
                      std::to_string(widths_.size()));
  }
  if (widths_.back() != 1) {
    throw ConfigError("network output width must be 1, got " + std::to_string(widths_.back()));
  }
  for (std::size_t w : widths_) {
    if (w == 0) throw ConfigError("network widths must be positive");
  }
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    offsets_.push_back(off);
    off += widths_[l + 1] * widths_[l] + (bias_ ? widths_[l + 1] : 0);
  }
  theta_ = Vector::Zero(static_cast<Eigen::Index>(off));
}

Eigen::Map<const RowMatrix> NetworkParams::weights(std::size_t l) const {
  return {theta_.data() + offsets_[l], static_cast<Eigen::Index>(widths_[l + 1]),
          static_cast<Eigen::Index>(widths_[l])};
}

Eigen::Map<RowMatrix> NetworkParams::weights(std::size_t l) {
  return {theta_.data() + offsets_[l], static_cast<Eigen::Index>(widths_[l + 1]),
          static_cast<Eigen::Index>(widths_[l])};
}

std::size_t NetworkParams::bias_offset(std::size_t l) const {
  return offsets_[l] + widths_[l + 1] * widths_[l];
}

Eigen::Map<const Vector> NetworkParams::bias(std::size_t l) const {
  return {theta_.data() + bias_offset(l), bias_ ? static_cast<Eigen::Index>(widths_[l + 1]) : 0};
}

Eigen::Map<Vector> NetworkParams::bias(std::size_t l) {
  return {theta_.data() + bias_offset(l), bias_ ? static_cast<Eigen::Index>(widths_[l + 1]) : 0};
}

bool NetworkParams::same_layout(const NetworkParams& other) const {
  return widths_ == other.widths_ && bias_ == other.bias_;
}

bool operator==(const NetworkParams& a, const NetworkParams& b) {
  if (!a.same_layout(b) || a.activation_ != b.activation_) return false;
  return std::memcmp(a.theta_.data(), b.theta_.data(), a.size() * sizeof(double)) == 0;
}

// ---------------------------------------------------------------------------
// Atoms and cotangents

namespace {

std::ptrdiff_t find_dim(const DimSet& dims, std::size_t i) {
  auto it = std::lower_bound(dims.begin(), dims.end(), i);
  if (it == dims.end() || *it != i) return -1;
  return it - dims.begin();
}

DimSet distinct_sorted(DimSet dims) {
  std::sort(dims.begin(), dims.end());
  dims.erase(std::unique(dims.begin(), dims.end()), dims.end());
  return dims;
}

void check_range(const DimSet& dims, std::size_t d_in) {
  for (std::size_t i : dims) {
    if (i >= d_in) {
      throw IndexError("dimension index " + std::to_string(i) + " out of range for input size " +
                       std::to_string(d_in));
    }
  }
}

}  // namespace

bool AtomValues::has_first(std::size_t i) const { return find_dim(first_dims, i) >= 0; }
bool AtomValues::has_second(std::size_t i) const { return find_dim(second_dims, i) >= 0; }

double AtomValues::d1(std::size_t i) const {
  const auto k = find_dim(first_dims, i);
  if (k < 0) throw ContractError("first derivative atom " + std::to_string(i) + " not computed");
  return first[static_cast<std::size_t>(k)];
}

double AtomValues::d2(std::size_t i) const {
  const auto k = find_dim(second_dims, i);
  if (k < 0) throw ContractError("second derivative atom " + std::to_string(i) + " not computed");
  return second[static_cast<std::size_t>(k)];
}

AtomCotangents& AtomCotangents::operator*=(double s) {
  value *= s;
  for (auto& [_, v] : first) v *= s;
  for (auto& [_, v] : second) v *= s;
  return *this;
}

AtomCotangents& AtomCotangents::operator+=(const AtomCotangents& o) {
  value += o.value;
  for (const auto& [k, v] : o.first) first[k] += v;
  for (const auto& [k, v] : o.second) second[k] += v;
  return *this;
}

AtomCotangents operator*(double s, AtomCotangents c) { return c *= s; }
AtomCotangents operator+(AtomCotangents a, const AtomCotangents& b) { return a += b; }

// ---------------------------------------------------------------------------
// Derivative tape

namespace {

void activate(Activation kind, const Vector& z, Vector& a, Vector& d1, Vector& d2, Vector& d3) {
  const auto n = z.size();
  a.resize(n);
  d1.resize(n);
  d2.resize(n);
  d3.resize(n);
  if (kind == Activation::Tanh) {
    for (Eigen::Index k = 0; k < n; ++k) {
      const double t = std::tanh(z[k]);
      const double s = 1.0 - t * t;
      a[k] = t;
      d1[k] = s;
      d2[k] = -2.0 * t * s;
      d3[k] = -2.0 * s * (1.0 - 3.0 * t * t);
    }
  } else {
    for (Eigen::Index k = 0; k < n; ++k) {
      const double s = std::sin(z[k]);
      const double c = std::cos(z[k]);
      a[k] = s;
      d1[k] = c;
      d2[k] = -s;
      d3[k] = -c;
    }
  }
}

std::vector<Eigen::Index> to_index(const DimSet& dims) {
  return {dims.begin(), dims.end()};
}

}  // namespace

DerivativeTape::DerivativeTape(const NetworkParams& params, const Vector& x,
                               const DimSet& second_dims, const DimSet& first_dims)
    : params_(&params), x_(x) {
  const std::size_t d_in = params.input_dim();
  if (static_cast<std::size_t>(x.size()) != d_in) {
    throw ShapeError("input has " + std::to_string(x.size()) + " entries, network expects " +
                     std::to_string(d_in));
  }
  check_range(second_dims, d_in);
  check_range(first_dims, d_in);
  second_ = distinct_sorted(second_dims);
  cols_ = second_;
  for (std::size_t i : distinct_sorted(first_dims)) {
    if (find_dim(second_, i) < 0) cols_.push_back(i);
  }
  const auto n1 = static_cast<Eigen::Index>(cols_.size());
  const auto n2 = static_cast<Eigen::Index>(second_.size());
  const std::size_t L = params.layers();

  atoms_.point = x;
  atoms_.second_dims = second_;
  atoms_.second.assign(second_.size(), 0.0);
  atoms_.first_dims = distinct_sorted(cols_);

  Vector out_t = Vector::Zero(n1);
  Vector out_s = Vector::Zero(n2);

  if (L == 1) {
    const auto W = params.weights(0);
    double u = W.row(0).dot(x);
    if (params.has_bias()) u += params.bias(0)[0];
    atoms_.value = u;
    for (Eigen::Index k = 0; k < n1; ++k) out_t[k] = W(0, static_cast<Eigen::Index>(cols_[k]));
  } else {
    layers_.resize(L - 1);
    const auto idx = to_index(cols_);
    for (std::size_t l = 0; l + 1 < L; ++l) {
      const auto W = params.weights(l);
      Layer& cur = layers_[l];
      if (l == 0) {
        cur.z = W * x;
        cur.zt = W(Eigen::all, idx);
        cur.ztt = RowMatrix::Zero(W.rows(), n2);
      } else {
        const Layer& prev = layers_[l - 1];
        cur.z = W * prev.act;
        cur.zt = W * prev.t;
        cur.ztt = W * prev.s;
      }
      if (params.has_bias()) cur.z += params.bias(l);
      activate(params.activation(), cur.z, cur.act, cur.d1, cur.d2, cur.d3);
      cur.t = cur.d1.asDiagonal() * cur.zt;
      cur.s = cur.d1.asDiagonal() * cur.ztt;
      cur.s += cur.d2.asDiagonal() * cur.zt.leftCols(n2).cwiseAbs2();
    }
    const auto W = params.weights(L - 1);
    const Layer& last = layers_.back();
    double u = W.row(0).dot(last.act);
    if (params.has_bias()) u += params.bias(L - 1)[0];
    atoms_.value = u;
    out_t = (W.row(0) * last.t).transpose();
    out_s = (W.row(0) * last.s).transpose();
  }

  atoms_.first.assign(atoms_.first_dims.size(), 0.0);
  for (Eigen::Index k = 0; k < n1; ++k) {
    const auto pos = find_dim(atoms_.first_dims, cols_[static_cast<std::size_t>(k)]);
    atoms_.first[static_cast<std::size_t>(pos)] = out_t[k];
  }
  for (Eigen::Index k = 0; k < n2; ++k) atoms_.second[static_cast<std::size_t>(k)] = out_s[k];
}

Pullback DerivativeTape::pullback(const AtomCotangents& cot) const {
  const NetworkParams& params = *params_;
  const std::size_t d_in = params.input_dim();
  const std::size_t L = params.layers();

  // Column selections: sel1 indexes cols_ (tangent chains touched by the
  // reverse sweep), sel2 indexes second_ (second-order chains touched).
  std::vector<Eigen::Index> sel1, sel2, sel2_in1;
  std::vector<double> bcoef, ccoef;
  for (const auto& [i, _] : cot.first) {
    if (i >= d_in) throw IndexError("cotangent index " + std::to_string(i) + " out of range");
  }
  for (const auto& [i, _] : cot.second) {
    if (i >= d_in) throw IndexError("cotangent index " + std::to_string(i) + " out of range");
  }
  for (std::size_t k = 0; k < cols_.size(); ++k) {
    const std::size_t dim = cols_[k];
    const auto b = cot.first.find(dim);
    const auto c = k < second_.size() ? cot.second.find(dim) : cot.second.end();
    const bool has_b = b != cot.first.end();
    const bool has_c = c != cot.second.end();
    if (!has_b && !has_c) continue;
    if (has_c) {
      sel2.push_back(static_cast<Eigen::Index>(k));
      sel2_in1.push_back(static_cast<Eigen::Index>(sel1.size()));
      ccoef.push_back(c->second);
    }
    sel1.push_back(static_cast<Eigen::Index>(k));
    bcoef.push_back(has_b ? b->second : 0.0);
  }
  for (const auto& [i, _] : cot.first) {
    if (std::find(cols_.begin(), cols_.end(), i) == cols_.end()) {
      throw ContractError("first derivative atom " + std::to_string(i) + " not on the tape");
    }
  }
  for (const auto& [i, _] : cot.second) {
    if (find_dim(second_, i) < 0) {
      throw ContractError("second derivative atom " + std::to_string(i) + " not on the tape");
    }
  }

  const auto n1 = static_cast<Eigen::Index>(sel1.size());
  const auto n2 = static_cast<Eigen::Index>(sel2.size());
  const Eigen::Map<const Vector> bvec(bcoef.data(), n1);
  const Eigen::Map<const Vector> cvec(ccoef.data(), n2);

  Pullback out{ParamGrad(params.size()), Vector::Zero(static_cast<Eigen::Index>(d_in))};
  Vector& g = out.params.data;
  auto grad_w = [&](std::size_t l) {
    return Eigen::Map<RowMatrix>(g.data() + params.weight_offset(l),
                                 static_cast<Eigen::Index>(params.widths()[l + 1]),
                                 static_cast<Eigen::Index>(params.widths()[l]));
  };
  auto grad_b = [&](std::size_t l) {
    return Eigen::Map<Vector>(g.data() + params.bias_offset(l),
                              static_cast<Eigen::Index>(params.widths()[l + 1]));
  };

  if (L == 1) {
    auto gW = grad_w(0);
    gW.row(0) = cot.value * x_.transpose();
    for (Eigen::Index k = 0; k < n1; ++k) {
      gW(0, static_cast<Eigen::Index>(cols_[static_cast<std::size_t>(sel1[k])])) += bvec[k];
    }
    if (params.has_bias()) grad_b(0)[0] = cot.value;
    out.input = cot.value * params.weights(0).row(0).transpose();
    return out;
  }

  // Output layer.
  const Layer& last = layers_.back();
  {
    auto gW = grad_w(L - 1);
    gW.row(0) = cot.value * last.act.transpose();
    if (n1 > 0) gW.row(0) += (last.t(Eigen::all, sel1) * bvec).transpose();
    if (n2 > 0) gW.row(0) += (last.s(Eigen::all, sel2) * cvec).transpose();
    if (params.has_bias()) grad_b(L - 1)[0] = cot.value;
  }
  const Vector w_out = params.weights(L - 1).row(0).transpose();
  Vector hbar = cot.value * w_out;
  RowMatrix tbar = w_out * bvec.transpose();
  RowMatrix sbar = w_out * cvec.transpose();

  for (std::size_t l = L - 1; l-- > 0;) {
    const Layer& cur = layers_[l];
    const RowMatrix zt1 = cur.zt(Eigen::all, sel1);
    const RowMatrix zt2 = cur.zt(Eigen::all, sel2);
    const RowMatrix ztt2 = cur.ztt(Eigen::all, sel2);

    // s = d2 * zt^2 + d1 * ztt ; t = d1 * zt ; h = act(z)
    Vector zbar = hbar.cwiseProduct(cur.d1);
    if (n1 > 0) zbar += (tbar.cwiseProduct(zt1)).rowwise().sum().cwiseProduct(cur.d2);
    if (n2 > 0) {
      zbar += (sbar.cwiseProduct(zt2.cwiseAbs2())).rowwise().sum().cwiseProduct(cur.d3);
      zbar += (sbar.cwiseProduct(ztt2)).rowwise().sum().cwiseProduct(cur.d2);
    }
    RowMatrix ztbar = cur.d1.asDiagonal() * tbar;
    const RowMatrix twice_d2_zt2 = (2.0 * cur.d2).asDiagonal() * zt2;
    for (Eigen::Index j = 0; j < n2; ++j) {
      ztbar.col(sel2_in1[static_cast<std::size_t>(j)]) += sbar.col(j).cwiseProduct(twice_d2_zt2.col(j));
    }
    const RowMatrix zttbar = cur.d1.asDiagonal() * sbar;

    auto gW = grad_w(l);
    if (params.has_bias()) grad_b(l) = zbar;
    const auto W = params.weights(l);
    if (l == 0) {
      gW.noalias() = zbar * x_.transpose();
      for (Eigen::Index k = 0; k < n1; ++k) {
        gW.col(static_cast<Eigen::Index>(cols_[static_cast<std::size_t>(sel1[k])])) += ztbar.col(k);
      }
      out.input = W.transpose() * zbar;
    } else {
      const Layer& prev = layers_[l - 1];
      gW.noalias() = zbar * prev.act.transpose();
      if (n1 > 0) gW.noalias() += ztbar * prev.t(Eigen::all, sel1).transpose();
      if (n2 > 0) gW.noalias() += zttbar * prev.s(Eigen::all, sel2).transpose();
      hbar = W.transpose() * zbar;
      tbar = W.transpose() * ztbar;
      sbar = W.transpose() * zttbar;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Free functions

NetworkParams init_params(const std::vector<std::size_t>& widths, Activation activation,
                          std::uint64_t seed, bool bias) {
  NetworkParams p(widths, activation, bias);
  RngStream rng(seed, 0, Purpose::Init);
  for (std::size_t l = 0; l < p.layers(); ++l) {
    const double fan_in = static_cast<double>(widths[l]);
    const double fan_out = static_cast<double>(widths[l + 1]);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    auto W = p.weights(l);
    for (Eigen::Index r = 0; r < W.rows(); ++r) {
      for (Eigen::Index c = 0; c < W.cols(); ++c) {
        W(r, c) = bound * (2.0 * rng.uniform() - 1.0);
      }
    }
  }
  return p;
}

double forward(const NetworkParams& params, const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != params.input_dim()) {
    throw ShapeError("input has " + std::to_string(x.size()) + " entries, network expects " +
                     std::to_string(params.input_dim()));
  }
  Vector h = x;
  const std::size_t L = params.layers();
  for (std::size_t l = 0; l < L; ++l) {
    Vector z = params.weights(l) * h;
    if (params.has_bias()) z += params.bias(l);
    if (l + 1 == L) return z[0];
    h = params.activation() == Activation::Tanh ? Vector(z.array().tanh())
                                                : Vector(z.array().sin());
  }
  return h[0];
}

AtomValues derivative_bundle(const NetworkParams& params, const Vector& x,
                             const DimSet& second_dims, const DimSet& first_dims) {
  return DerivativeTape(params, x, second_dims, first_dims).atoms();
}

ParamGrad param_pullback(const NetworkParams& params, const Vector& x,
                         const AtomCotangents& cot) {
  DimSet second, first;
  for (const auto& [i, _] : cot.second) second.push_back(i);
  for (const auto& [i, _] : cot.first) first.push_back(i);
  return DerivativeTape(params, x, second, first).pullback(cot).params;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr char kParamsMagic[8] = {'S', 'D', 'G', 'D', 'N', 'E', 'T', '1'};

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in, const char* what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw IoError(std::string("truncated parameter payload while reading ") + what);
  }
  return v;
}

}  // namespace

void write_params(std::ostream& out, const NetworkParams& params) {
  out.write(kParamsMagic, sizeof(kParamsMagic));
  put<std::uint32_t>(out, kParamsFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.widths().size()));
  for (std::size_t w : params.widths()) put<std::uint64_t>(out, w);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(params.activation()));
  put<std::uint8_t>(out, params.has_bias() ? 1 : 0);
  put<std::uint64_t>(out, params.size());
  out.write(reinterpret_cast<const char*>(params.flat().data()),
            static_cast<std::streamsize>(params.size() * sizeof(double)));
  if (!out) throw IoError("failed to write parameter payload");
}

NetworkParams read_params(std::istream& in) {
  char magic[sizeof(kParamsMagic)];
  if (!in.read(magic, sizeof(magic))) throw IoError("truncated parameter payload (magic)");
  if (std::memcmp(magic, kParamsMagic, sizeof(magic)) != 0) {
    throw IoError("not a parameter payload (bad magic)");
  }
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kParamsFormatVersion) {
    throw IoError("unsupported parameter format version " + std::to_string(version) +
                  " (expected " + std::to_string(kParamsFormatVersion) + ")");
  }
  const auto n_widths = get<std::uint32_t>(in, "width count");
  if (n_widths < 2 || n_widths > 1024) throw IoError("implausible width count in payload");
  std::vector<std::size_t> widths(n_widths);
  for (auto& w : widths) w = static_cast<std::size_t>(get<std::uint64_t>(in, "widths"));
  const auto act = get<std::uint8_t>(in, "activation");
  if (act > 1) throw IoError("unknown activation code in payload");
  const auto bias = get<std::uint8_t>(in, "bias flag");
  NetworkParams p;
  try {
    p = NetworkParams(widths, static_cast<Activation>(act), bias != 0);
  } catch (const ConfigError& e) {
    throw IoError(std::string("invalid widths in payload: ") + e.what());
  }
  const auto count = get<std::uint64_t>(in, "parameter count");
  if (count != p.size()) throw IoError("parameter count does not match widths");
  Vector theta(static_cast<Eigen::Index>(count));
  if (!in.read(reinterpret_cast<char*>(theta.data()),
               static_cast<std::streamsize>(count * sizeof(double)))) {
    throw IoError("truncated parameter payload (values)");
  }
  p.flat() = std::move(theta);
  return p;
}

}  // namespace sdgd
