#include "sdgd/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "sdgd/errors.hpp"

namespace sdgd {

std::vector<Point> sample_unit_ball(std::size_t d, std::size_t n, RngStream& stream) {
  if (d == 0 || n == 0) throw ArgumentError("sample_unit_ball needs d >= 1 and n >= 1");
  std::normal_distribution<double> normal;
  std::vector<Point> out(n);
  const double inv_d = 1.0 / static_cast<double>(d);
  for (Point& p : out) {
    p.x.resize(static_cast<Eigen::Index>(d));
    for (;;) {
      double norm = 0.0;
      do {
        for (Eigen::Index i = 0; i < p.x.size(); ++i) p.x[i] = normal(stream);
        norm = p.x.norm();
      } while (norm == 0.0);
      const double r = std::pow(stream.uniform(), inv_d);
      p.x *= r / norm;
      if (p.x.squaredNorm() < 1.0) break;
    }
  }
  return out;
}

std::vector<Point> sample_hjb_points(std::size_t d, std::size_t n, RngStream& stream) {
  if (d == 0 || n == 0) throw ArgumentError("sample_hjb_points needs d >= 1 and n >= 1");
  std::normal_distribution<double> normal;
  std::vector<Point> out(n);
  for (Point& p : out) {
    p.x.resize(static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < p.x.size(); ++i) p.x[i] = normal(stream);
    p.t = stream.uniform();
  }
  return out;
}

std::vector<Point> sample_points(const PdeProblem& problem, std::size_t n, RngStream& stream) {
  return problem.is_hjb() ? sample_hjb_points(problem.d, n, stream)
                          : sample_unit_ball(problem.d, n, stream);
}

namespace {

std::size_t below(std::size_t n, RngStream& stream) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(stream);
}

}  // namespace

DimSet sample_dims(std::size_t n_terms, std::size_t k, bool replacement, RngStream& stream) {
  if (k == 0) throw ArgumentError("dimension batch size must be at least 1");
  if (n_terms == 0) throw ArgumentError("no terms to sample from");
  DimSet out;
  if (replacement) {
    out.resize(k);
    for (std::size_t& i : out) i = below(n_terms, stream);
  } else {
    if (k > n_terms) {
      throw ArgumentError("cannot draw " + std::to_string(k) + " distinct indices from " +
                          std::to_string(n_terms));
    }
    DimSet pool(n_terms);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
      std::swap(pool[i], pool[i + below(n_terms - i, stream)]);
    }
    out.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
  }
  std::sort(out.begin(), out.end());
  return out;
}

TestSet make_test_set(const PdeProblem& problem, std::size_t n, std::uint64_t seed,
                      std::size_t n_mc) {
  RngStream stream(seed, 0, Purpose::TestSet);
  TestSet set;
  set.points = sample_points(problem, n, stream);
  set.truth.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Point& p = set.points[k];
    if (problem.is_hjb()) {
      set.truth[k] = hjb_reference(problem, p.x, p.t, n_mc,
                                   RngStream(seed, 0, Purpose::Reference, static_cast<std::uint32_t>(k)));
    } else {
      set.truth[k] = exact_solution(problem, p);
    }
  }
  return set;
}

}  // namespace sdgd
