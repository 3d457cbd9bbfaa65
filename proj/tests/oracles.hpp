#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance runner.

#include <cmath>
#include <vector>

#include "vwb/heat.hpp"

namespace oracle {

// Symbol of the charge-free spatial operator at lattice eigenvalue lam.
inline double tower_symbol(double lam, double beta, int n_max) {
  double a = lam / beta;
  for (int n = 2; n <= n_max + 1; ++n) a += std::pow(beta, -0.5 * n) * std::pow(lam, n) / beta;
  return a;
}

// Explicit Euler heat kernel on the torus of side N by Fourier sums:
// N^{-d} sum_k (1 - dt a(k))^m cos(2 pi k.(x - y) / N). Scalar, the
// operator is diagonal in the components.
inline std::vector<double> periodic_euler_kernel(int d, int L, double beta, int n_max, double dt, int m) {
  const int N = 2 * L + 1;
  std::int64_t total = 1;
  for (int i = 0; i < d; ++i) total *= N;
  std::vector<double> mult(total);
  std::vector<int> k(d, 0);
  for (std::int64_t idx = 0; idx < total; ++idx) {
    double lam = 0.0;
    std::int64_t r = idx;
    for (int i = d - 1; i >= 0; --i) {
      k[i] = static_cast<int>(r % N);
      r /= N;
      lam += 2.0 - 2.0 * std::cos(2.0 * M_PI * k[i] / N);
    }
    mult[idx] = std::pow(1.0 - dt * tower_symbol(lam, beta, n_max), m);
  }
  // separable cosine transform, one axis at a time
  std::vector<double> cur = mult, next(total);
  std::int64_t stride = 1;
  for (int axis = d - 1; axis >= 0; --axis) {
    for (std::int64_t idx = 0; idx < total; ++idx) {
      const std::int64_t digit = (idx / stride) % N;
      const std::int64_t base = idx - digit * stride;
      double acc = 0.0;
      for (int kk = 0; kk < N; ++kk) acc += cur[base + kk * stride] * std::cos(2.0 * M_PI * kk * digit / N);
      next[idx] = acc / N;
    }
    std::swap(cur, next);
    stride *= N;
  }
  // cur indexed by displacement digits 0..N-1 per axis
  return cur;
}

// Conjugate gradients for the (symmetric, positive) spatial operator.
inline std::vector<double> solve(const vwb::SpatialOperator& op, const std::vector<double>& rhs, double tol = 1e-13,
                                 int max_iter = 100000) {
  std::vector<double> x(rhs.size(), 0.0), r = rhs, p = rhs, ap;
  double rr = 0.0, bb = 0.0;
  for (double v : rhs) bb += v * v;
  rr = bb;
  for (int it = 0; it < max_iter && rr > tol * tol * bb; ++it) {
    op.apply(p, ap);
    double pap = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) pap += p[i] * ap[i];
    const double alpha = rr / pap;
    double rr_new = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
      rr_new += r[i] * r[i];
    }
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = r[i] + (rr_new / rr) * p[i];
    rr = rr_new;
  }
  return x;
}

}  // namespace oracle
