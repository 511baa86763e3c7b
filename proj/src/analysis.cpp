#include "sdgd/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <type_traits>

#include <Eigen/SVD>

#include "sdgd/errors.hpp"
#include "sdgd/random.hpp"
#include "sdgd/sampling.hpp"

namespace sdgd {

// ---------------------------------------------------------------------------
// Enumeration

namespace {

double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  double c = 1.0;
  for (std::size_t i = 0; i < k; ++i) c = c * static_cast<double>(n - i) / static_cast<double>(i + 1);
  return std::round(c);
}

void guard_count(double count, double guard) {
  if (count > guard) {
    throw GuardError("enumeration of " + std::to_string(count) + " combinations exceeds the guard of " +
                     std::to_string(guard));
  }
}

}  // namespace

std::vector<DimSet> all_subsets(std::size_t n, std::size_t k, double guard) {
  if (k == 0 || k > n) throw ArgumentError("subset size must lie in [1, n]");
  guard_count(binomial(n, k), guard);
  std::vector<DimSet> out;
  DimSet cur(k);
  std::iota(cur.begin(), cur.end(), std::size_t{0});
  for (;;) {
    out.push_back(cur);
    std::size_t i = k;
    while (i > 0 && cur[i - 1] == n - k + (i - 1)) --i;
    if (i == 0) break;
    ++cur[i - 1];
    for (std::size_t j = i; j < k; ++j) cur[j] = cur[j - 1] + 1;
  }
  return out;
}

std::vector<DimSet> all_sequences(std::size_t n, std::size_t k, double guard) {
  if (k == 0 || n == 0) throw ArgumentError("sequence length and alphabet must be positive");
  guard_count(std::pow(static_cast<double>(n), static_cast<double>(k)), guard);
  std::vector<DimSet> out;
  DimSet cur(k, 0);
  for (;;) {
    DimSet sorted = cur;
    std::sort(sorted.begin(), sorted.end());
    out.push_back(std::move(sorted));
    std::size_t i = 0;
    while (i < k && ++cur[i] == n) cur[i++] = 0;
    if (i == k) break;
  }
  return out;
}

namespace {

Vector enumerated_mean(const PdeProblem& problem, const NetworkParams& params,
                       const std::vector<Point>& points, std::size_t k, Algorithm algorithm,
                       double guard) {
  const std::size_t n = problem.n_terms();
  Vector sum = Vector::Zero(static_cast<Eigen::Index>(params.size()));
  double count = 0.0;
  switch (algorithm) {
    case Algorithm::Full:
      return full_grad(problem, params, points).grad.data;
    case Algorithm::Algo1:
      for (const DimSet& I : all_subsets(n, k, guard)) {
        sum += grad_algo1(problem, params, points, I).grad.data;
        count += 1.0;
      }
      break;
    case Algorithm::Algo2: {
      guard_count(binomial(n, k) * binomial(n, k), guard);
      const auto sets = all_subsets(n, k, guard);
      for (const DimSet& I : sets) {
        for (const DimSet& J : sets) {
          sum += grad_algo2(problem, params, points, I, J).grad.data;
          count += 1.0;
        }
      }
      break;
    }
    case Algorithm::Algo3:
      for (const DimSet& I : all_subsets(n, k, guard)) {
        sum += grad_algo3(problem, params, points, I).grad.data;
        count += 1.0;
      }
      break;
    case Algorithm::Accumulated:
      throw ArgumentError("enumeration is defined for full, algo1, algo2 and algo3");
  }
  return sum / count;
}

}  // namespace

double unbiasedness_check(const PdeProblem& problem, const NetworkParams& params,
                          const std::vector<Point>& points, std::size_t k, Algorithm algorithm,
                          double guard) {
  const Vector full = full_grad(problem, params, points).grad.data;
  const Vector mean = enumerated_mean(problem, params, points, k, algorithm, guard);
  const double dev = (mean - full).cwiseAbs().maxCoeff();
  const double scale = full.cwiseAbs().maxCoeff();
  return scale > 0.0 ? dev / scale : dev;
}

std::vector<double> bias_profile_algo3(const PdeProblem& problem, const NetworkParams& params,
                                       const std::vector<Point>& points,
                                       const std::vector<std::size_t>& ks, double guard) {
  const Vector full = full_grad(problem, params, points).grad.data;
  std::vector<double> out;
  out.reserve(ks.size());
  for (std::size_t k : ks) {
    out.push_back((enumerated_mean(problem, params, points, k, Algorithm::Algo3, guard) - full).norm());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Variance law

double VarianceFit::predict(std::size_t batch, std::size_t dims) const {
  const double b = static_cast<double>(batch);
  const double i = static_cast<double>(dims);
  return c1 / b + c2 / i + c3 / (b * i);
}

namespace {

// Coordinatewise Welford accumulator.
struct Moments {
  Vector mean, m2;
  double count = 0.0;

  explicit Moments(std::size_t n)
      : mean(Vector::Zero(static_cast<Eigen::Index>(n))), m2(Vector::Zero(static_cast<Eigen::Index>(n))) {}

  void add(const Vector& g) {
    count += 1.0;
    const Vector delta = g - mean;
    mean += delta / count;
    m2.array() += delta.array() * (g - mean).array();
  }
};

std::vector<Point> pick(const std::vector<Point>& pool, const DimSet& idx) {
  std::vector<Point> out;
  out.reserve(idx.size());
  for (std::size_t k : idx) out.push_back(pool[k]);
  return out;
}

}  // namespace

VarianceCell estimator_variance(const PdeProblem& problem, const NetworkParams& params,
                                const std::vector<Point>& pool, std::size_t batch, std::size_t dims,
                                bool replacement, double guard, std::size_t mc_samples,
                                std::uint64_t seed) {
  if (pool.empty() || batch == 0 || dims == 0) throw ArgumentError("empty variance cell");
  const std::size_t nr = pool.size();
  const std::size_t nl = problem.n_terms();
  if (!replacement && (batch > nr || dims > nl)) throw ArgumentError("cell exceeds population without replacement");

  VarianceCell cell;
  cell.batch = batch;
  cell.dims = dims;
  Moments mom(params.size());

  const double combos = replacement
                            ? std::pow(static_cast<double>(nr), static_cast<double>(batch)) *
                                  std::pow(static_cast<double>(nl), static_cast<double>(dims))
                            : binomial(nr, batch) * binomial(nl, dims);
  if (combos <= guard) {
    const auto point_sets = replacement ? all_sequences(nr, batch, guard) : all_subsets(nr, batch, guard);
    const auto dim_sets = replacement ? all_sequences(nl, dims, guard) : all_subsets(nl, dims, guard);
    for (const DimSet& b : point_sets) {
      const std::vector<Point> pts = pick(pool, b);
      for (const DimSet& I : dim_sets) mom.add(grad_algo1(problem, params, pts, I).grad.data);
    }
    cell.variance = mom.m2.sum() / mom.count;
    cell.exact = true;
    return cell;
  }

  RngStream rng(seed, 0, Purpose::Analysis, static_cast<std::uint32_t>(batch * 1000 + dims));
  for (std::size_t s = 0; s < mc_samples; ++s) {
    const DimSet b = sample_dims(nr, batch, replacement, rng);
    const DimSet I = sample_dims(nl, dims, replacement, rng);
    mom.add(grad_algo1(problem, params, pick(pool, b), I).grad.data);
  }
  const double n = mom.count;
  cell.variance = mom.m2.sum() / (n - 1.0);
  cell.std_error = cell.variance * std::sqrt(2.0 / (n - 1.0));
  cell.exact = false;
  return cell;
}

VarianceFit variance_fit(const PdeProblem& problem, const NetworkParams& params,
                         const std::vector<Point>& pool,
                         const std::vector<std::pair<std::size_t, std::size_t>>& grid, double guard) {
  if (grid.size() < 4) throw ArgumentError("variance fit needs at least 4 grid cells for 3 constants");
  VarianceFit fit;
  Eigen::MatrixXd a(static_cast<Eigen::Index>(grid.size()), 3);
  Vector v(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto [b, i] = grid[k];
    fit.grid.push_back(estimator_variance(problem, params, pool, b, i, true, guard));
    const double bd = static_cast<double>(b);
    const double id = static_cast<double>(i);
    const auto r = static_cast<Eigen::Index>(k);
    a(r, 0) = 1.0 / bd;
    a(r, 1) = 1.0 / id;
    a(r, 2) = 1.0 / (bd * id);
    v[r] = fit.grid.back().variance;
  }
  const Eigen::Vector3d c = a.colPivHouseholderQr().solve(v);
  fit.c1 = c[0];
  fit.c2 = c[1];
  fit.c3 = c[2];
  const double scale = v.norm();
  fit.residual = scale > 0.0 ? (a * c - v).norm() / scale : (a * c - v).norm();
  return fit;
}

std::vector<BudgetChoice> budget_minimizers(const VarianceFit& fit) {
  std::map<std::size_t, std::vector<const VarianceCell*>> groups;
  for (const VarianceCell& cell : fit.grid) groups[cell.batch * cell.dims].push_back(&cell);
  std::vector<BudgetChoice> out;
  for (const auto& [budget, cells] : groups) {
    if (cells.size() < 2) continue;
    const VarianceCell* best_fit = cells.front();
    const VarianceCell* best_enum = cells.front();
    for (const VarianceCell* c : cells) {
      if (fit.predict(c->batch, c->dims) < fit.predict(best_fit->batch, best_fit->dims)) best_fit = c;
      if (c->variance < best_enum->variance) best_enum = c;
    }
    out.push_back({budget, {best_fit->batch, best_fit->dims}, {best_enum->batch, best_enum->dims}});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Derivative bounds

double lemma_m(const RowMatrix& w) {
  if (w.rows() == 1 || w.cols() == 1) return std::max(w.norm(), 1.0);
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(w);
  return std::max(svd.singularValues().size() > 0 ? svd.singularValues()[0] : 0.0, 1.0);
}

namespace {

double act_derivative(Activation a, double z, int k) {
  if (a == Activation::Sin) {
    switch (k & 3) {
      case 0:
        return std::sin(z);
      case 1:
        return std::cos(z);
      case 2:
        return -std::sin(z);
      default:
        return -std::cos(z);
    }
  }
  const double t = std::tanh(z);
  const double s = 1.0 - t * t;
  switch (k) {
    case 0:
      return t;
    case 1:
      return s;
    case 2:
      return -2.0 * t * s;
    case 3:
      return -2.0 * s * (1.0 - 3.0 * t * t);
    default:
      throw ArgumentError("activation derivative order above 3");
  }
}

// Value plus gradient with respect to every network parameter. An empty
// gradient stands for zero.
struct ParamDual {
  double v = 0.0;
  Vector g;
};

ParamDual operator+(const ParamDual& a, const ParamDual& b) {
  if (a.g.size() == 0) return {a.v + b.v, b.g};
  if (b.g.size() == 0) return {a.v + b.v, a.g};
  return {a.v + b.v, a.g + b.g};
}

ParamDual operator*(const ParamDual& a, const ParamDual& b) {
  ParamDual out{a.v * b.v, {}};
  if (a.g.size() && b.g.size()) {
    out.g = b.v * a.g + a.v * b.g;
  } else if (a.g.size()) {
    out.g = b.v * a.g;
  } else if (b.g.size()) {
    out.g = a.v * b.g;
  }
  return out;
}

ParamDual act(Activation kind, const ParamDual& z, int k) {
  ParamDual out{act_derivative(kind, z.v, k), {}};
  if (z.g.size()) out.g = act_derivative(kind, z.v, k + 1) * z.g;
  return out;
}
double act(Activation kind, double z, int k) { return act_derivative(kind, z, k); }

// f(x + a e1 + b e2) with e1^2 = e2^2 = 0.
template <class T>
struct HyperDual {
  T v{}, a{}, b{}, ab{};
};

template <class T>
HyperDual<T> add(const HyperDual<T>& x, const HyperDual<T>& y) {
  return {x.v + y.v, x.a + y.a, x.b + y.b, x.ab + y.ab};
}

template <class T>
HyperDual<T> mul(const T& w, const HyperDual<T>& x) {
  return {w * x.v, w * x.a, w * x.b, w * x.ab};
}

template <class T>
HyperDual<T> activate(Activation kind, const HyperDual<T>& x) {
  const T f1 = act(kind, x.v, 1);
  return {act(kind, x.v, 0), f1 * x.a, f1 * x.b, act(kind, x.v, 2) * (x.a * x.b) + f1 * x.ab};
}

// Definition-1 network (no biases) on hyper-dual inputs. The ParamDual
// overload gives every weight its unit parameter tangent.
HyperDual<double> sweep(const NetworkParams& params, const std::vector<HyperDual<double>>& input) {
  std::vector<HyperDual<double>> h = input;
  for (std::size_t l = 0; l < params.layers(); ++l) {
    const auto w = params.weights(l);
    std::vector<HyperDual<double>> next(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        next[static_cast<std::size_t>(r)] = add(next[static_cast<std::size_t>(r)], mul(w(r, c), h[static_cast<std::size_t>(c)]));
      }
    }
    if (l + 1 < params.layers()) {
      for (auto& z : next) z = activate(params.activation(), z);
    }
    h = std::move(next);
  }
  return h.front();
}

HyperDual<ParamDual> sweep(const NetworkParams& params, const std::vector<HyperDual<ParamDual>>& input) {
  const auto n = static_cast<Eigen::Index>(params.size());
  std::vector<HyperDual<ParamDual>> h = input;
  for (std::size_t l = 0; l < params.layers(); ++l) {
    const auto w = params.weights(l);
    const std::size_t off = params.weight_offset(l);
    std::vector<HyperDual<ParamDual>> next(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        ParamDual wd{w(r, c), Vector::Zero(n)};
        wd.g[static_cast<Eigen::Index>(off) + r * w.cols() + c] = 1.0;
        next[static_cast<std::size_t>(r)] = add(next[static_cast<std::size_t>(r)], mul(wd, h[static_cast<std::size_t>(c)]));
      }
    }
    if (l + 1 < params.layers()) {
      for (auto& z : next) z = activate(params.activation(), z);
    }
    h = std::move(next);
  }
  return h.front();
}

template <class T>
T constant(double v) {
  if constexpr (std::is_same_v<T, double>) {
    return v;
  } else {
    return T{v, Vector()};
  }
}

template <class T>
std::vector<HyperDual<T>> seed_input(const Vector& x, std::size_t i, std::size_t j, bool second) {
  std::vector<HyperDual<T>> in(static_cast<std::size_t>(x.size()));
  for (std::size_t k = 0; k < in.size(); ++k) {
    in[k].v = constant<T>(x[static_cast<Eigen::Index>(k)]);
    in[k].a = constant<T>(k == i ? 1.0 : 0.0);
    in[k].b = constant<T>(second && k == j ? 1.0 : 0.0);
    in[k].ab = constant<T>(0.0);
  }
  return in;
}

// Squared norms of the n-th input derivative tensor and of its parameter
// Jacobian, swept coordinate by coordinate.
std::pair<double, double> sweep_norms(const NetworkParams& params, const Vector& x, std::size_t n) {
  const std::size_t d = static_cast<std::size_t>(x.size());
  double in2 = 0.0;
  double pa2 = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < (n == 1 ? 1 : d); ++j) {
      const auto hd = sweep(params, seed_input<double>(x, i, j, n == 2));
      const auto hp = sweep(params, seed_input<ParamDual>(x, i, j, n == 2));
      const double val = n == 1 ? hd.a : hd.ab;
      const ParamDual& pd = n == 1 ? hp.a : hp.ab;
      in2 += val * val;
      if (pd.g.size()) pa2 += pd.g.squaredNorm();
    }
  }
  return {in2, pa2};
}

// Same norms through the derivative engine. Mixed second derivatives come
// from a lifted network whose first layer is W_1 M, where the columns of M
// are the directions e_i and e_i + e_j, by polarization.
std::pair<double, double> engine_norms(const NetworkParams& params, const Vector& x, std::size_t n) {
  const std::size_t d = static_cast<std::size_t>(x.size());
  if (n == 1) {
    const DimSet dims = all_dims(d);
    const DerivativeTape tape(params, x, {}, dims);
    double in2 = 0.0;
    double pa2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      in2 += tape.atoms().first[i] * tape.atoms().first[i];
      AtomCotangents cot;
      cot.first[i] = 1.0;
      pa2 += tape.pullback(cot).params.data.squaredNorm();
    }
    return {in2, pa2};
  }

  const std::size_t m = d + d * (d - 1) / 2;
  Eigen::MatrixXd dirs = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(m));
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < d; ++i) dirs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 1.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) {
      const auto col = static_cast<Eigen::Index>(d + pairs.size());
      dirs(static_cast<Eigen::Index>(i), col) = 1.0;
      dirs(static_cast<Eigen::Index>(j), col) = 1.0;
      pairs.emplace_back(i, j);
    }
  }

  std::vector<std::size_t> widths = params.widths();
  widths[0] = m;
  NetworkParams lifted(widths, params.activation(), false);
  lifted.weights(0) = params.weights(0) * dirs;
  for (std::size_t l = 1; l < params.layers(); ++l) lifted.weights(l) = params.weights(l);
  Vector y = Vector::Zero(static_cast<Eigen::Index>(m));
  y.head(static_cast<Eigen::Index>(d)) = x;

  const DerivativeTape tape(lifted, y, all_dims(m), {});
  const auto& dd = tape.atoms().second;
  const auto w0 = static_cast<Eigen::Index>(params.weights(0).size());
  const auto rows0 = params.weights(0).rows();

  // Parameter gradient of the k-th directional second derivative, mapped
  // back to the original parameter layout.
  auto back = [&](std::size_t k) {
    AtomCotangents cot;
    cot.second[k] = 1.0;
    const Vector gl = tape.pullback(cot).params.data;
    Vector g(static_cast<Eigen::Index>(params.size()));
    const Eigen::Map<const RowMatrix> g0(gl.data(), rows0, static_cast<Eigen::Index>(m));
    Eigen::Map<RowMatrix>(g.data(), rows0, static_cast<Eigen::Index>(d)) = g0 * dirs.transpose();
    g.tail(g.size() - w0) = gl.tail(gl.size() - g0.size());
    return g;
  };

  std::vector<Vector> diag(d);
  double in2 = 0.0;
  double pa2 = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    diag[i] = back(i);
    in2 += dd[i] * dd[i];
    pa2 += diag[i].squaredNorm();
  }
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [i, j] = pairs[p];
    const double hij = 0.5 * (dd[d + p] - dd[i] - dd[j]);
    in2 += 2.0 * hij * hij;
    pa2 += 2.0 * (0.5 * (back(d + p) - diag[i] - diag[j])).squaredNorm();
  }
  return {in2, pa2};
}

double factorial(std::size_t n) {
  double f = 1.0;
  for (std::size_t k = 2; k <= n; ++k) f *= static_cast<double>(k);
  return f;
}

}  // namespace

LemmaCheck lemma_bound_check(const NetworkParams& params, const Vector& x, std::size_t n) {
  if (params.has_bias()) throw UnsupportedError("derivative bounds assume a bias-free network");
  if (n < 1 || n > 2) throw ArgumentError("derivative order must be 1 or 2");
  if (static_cast<std::size_t>(x.size()) != params.input_dim()) throw ShapeError("point size != input size");

  // C_n tanh has all derivatives up to order n + 1 within [-1, 1]; the
  // constant moves into the weights of layers 2..L.
  const double cn = params.activation() == Activation::Sin ? 1.0 : (n == 1 ? 1.0 : 0.5);
  const std::size_t L = params.layers();
  std::vector<double> m(L);
  for (std::size_t l = 0; l < L; ++l) {
    const RowMatrix w = params.weights(l);
    m[l] = lemma_m(l == 0 ? w : RowMatrix(w / cn));
  }
  const double d = static_cast<double>(params.input_dim());
  const double h = static_cast<double>(*std::max_element(params.widths().begin(), params.widths().end()));
  const double nd = static_cast<double>(n);
  const double depth = static_cast<double>(L - 1);
  double prod_n = 1.0;
  double prod_n1 = 1.0;
  for (std::size_t l = 0; l + 1 < L; ++l) {
    prod_n *= std::pow(m[l], nd);
    prod_n1 *= std::pow(m[l], nd + 1.0);
  }

  const auto swept = sweep_norms(params, x, n);
  const auto engine = engine_norms(params, x, n);

  LemmaCheck out;
  out.input.order = n;
  out.input.norm = std::sqrt(swept.first);
  out.input.norm_engine = std::sqrt(engine.first);
  out.input.bound = factorial(n - 1) * std::pow(d, nd - 1.0) * std::pow(depth, nd - 1.0) * m[L - 1] * prod_n;
  out.input.margin = out.input.bound - out.input.norm;

  out.param.order = n;
  out.param.norm = std::sqrt(swept.second);
  out.param.norm_engine = std::sqrt(engine.second);
  out.param.bound = h * h * factorial(n) * std::pow(d, nd) * std::pow(depth, nd) * m[L - 1] * prod_n1 *
                    std::max(x.norm(), 1.0);
  out.param.margin = out.param.bound - out.param.norm;
  return out;
}

// ---------------------------------------------------------------------------
// Finite differences

FdReport fd_check(const NetworkParams& params, const Vector& x, const DimSet& dims) {
  const double hx = 1e-3;
  const double ht = 1e-4;
  const DimSet sorted = dim_union(dims, {});
  const DerivativeTape tape(params, x, sorted, sorted);
  const AtomValues& atoms = tape.atoms();
  const double u0 = atoms.value;

  double e1 = 0.0, s1 = 0.0, e2 = 0.0, s2 = 0.0;
  Vector xp = x;
  for (std::size_t i : sorted) {
    const auto k = static_cast<Eigen::Index>(i);
    xp[k] = x[k] + hx;
    const double up = forward(params, xp);
    xp[k] = x[k] - hx;
    const double um = forward(params, xp);
    xp[k] = x[k];
    e1 = std::max(e1, std::abs((up - um) / (2.0 * hx) - atoms.d1(i)));
    s1 = std::max(s1, std::abs(atoms.d1(i)));
    e2 = std::max(e2, std::abs((up - 2.0 * u0 + um) / (hx * hx) - atoms.d2(i)));
    s2 = std::max(s2, std::abs(atoms.d2(i)));
  }

  AtomCotangents cot;
  for (std::size_t i : sorted) cot.second[i] = 1.0;
  const Vector exact = tape.pullback(cot).params.data;
  auto summed = [&](const NetworkParams& p) {
    const AtomValues a = derivative_bundle(p, x, sorted);
    return std::accumulate(a.second.begin(), a.second.end(), 0.0);
  };
  NetworkParams work = params;
  double ep = 0.0;
  for (Eigen::Index k = 0; k < work.flat().size(); ++k) {
    const double keep = work.flat()[k];
    work.flat()[k] = keep + ht;
    const double fp = summed(work);
    work.flat()[k] = keep - ht;
    const double fm = summed(work);
    work.flat()[k] = keep;
    ep = std::max(ep, std::abs((fp - fm) / (2.0 * ht) - exact[k]));
  }
  const double sp = exact.size() ? exact.cwiseAbs().maxCoeff() : 0.0;

  FdReport r;
  r.first_rel = s1 > 0.0 ? e1 / s1 : e1;
  r.second_abs = e2;
  r.second_rel = s2 > 0.0 ? e2 / s2 : e2;
  r.param_abs = ep;
  r.param_rel = sp > 0.0 ? ep / sp : ep;
  return r;
}

// ---------------------------------------------------------------------------
// Batch-size sweep

std::vector<SweepRow> batch_sweep(const TrainConfig& base,
                                  const std::vector<std::pair<std::size_t, std::size_t>>& grid) {
  if (grid.empty()) throw ArgumentError("empty sweep grid");
  std::vector<TrainConfig> cells;
  for (const auto& [dims, batch] : grid) {
    TrainConfig c = base;
    c.backward_dims = dims;
    c.batch_points = batch;
    c.eval_interval = std::max<std::size_t>(c.epochs, 1);
    validate(c);
    cells.push_back(c);
  }
  const PdeProblem problem = make_problem(base);
  const TestSet test_set = make_test_set(base, problem);
  std::vector<SweepRow> rows;
  for (const TrainConfig& c : cells) {
    const std::size_t dims = c.backward_dims, batch = c.batch_points;
    const RunReport rep = train(c, test_set);
    if (rep.diverged) throw Error("sweep cell (" + std::to_string(dims) + ", " + std::to_string(batch) + ") diverged: " + rep.diagnostic);
    SweepRow row;
    row.dims = dims;
    row.batch = batch;
    row.rel_l2 = rep.final_record().rel_l2;
    row.total_s = rep.final_record().wall_s;
    row.sec_per_iter = c.epochs ? row.total_s / static_cast<double>(c.epochs) : 0.0;
    row.term_evals = rep.final_record().term_evals;
    row.sec_per_term = row.term_evals ? row.total_s / static_cast<double>(row.term_evals) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_table(const std::vector<SweepRow>& rows) {
  std::string out = "dims,batch,rel_l2,sec_per_iter,total_s,term_evals,sec_per_term\n";
  char line[256];
  for (const SweepRow& r : rows) {
    std::snprintf(line, sizeof(line), "%zu,%zu,%.9g,%.9g,%.9g,%zu,%.9g\n", r.dims, r.batch, r.rel_l2,
                  r.sec_per_iter, r.total_s, r.term_evals, r.sec_per_term);
    out += line;
  }
  return out;
}

}  // namespace sdgd
