#include "vwb/sums.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "vwb/fft.hpp"

namespace vwb {

double plus_norm(const Site& x) {
  double s = 0.0;
  for (int v : x) s += static_cast<double>(v) * v;
  return std::sqrt(s) + 1.0;
}

namespace {

// (ln t)^p with 0^0 = 1
double log_pow(double t, double p) { return p == 0.0 ? 1.0 : std::pow(std::log(t), p); }

double euclid(const Site& x) { return plus_norm(x) - 1.0; }

double sphere_area(int d) { return 2.0 * std::pow(M_PI, d / 2.0) / std::tgamma(d / 2.0); }

// Integral of area(d) (r + sqrt d)^{d-1} g(r) dr over r >= r0, taken in log r.
double radial_tail(int d, double r0, double decay, const std::function<double(double)>& g) {
  if (decay <= 0.0) return std::numeric_limits<double>::infinity();
  const double U = std::min(700.0, 80.0 / decay);
  const int n = 40000;
  const double h = U / n;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double r = r0 * std::exp(i * h);
    const double f = std::pow(r + std::sqrt(static_cast<double>(d)), d - 1) * g(r) * r;
    s += f * (i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0));
  }
  return sphere_area(d) * s * h / 3.0;
}

void walk_box(int d, int R, const std::function<void(const Site&)>& f) {
  Site y(d, -R);
  while (true) {
    f(y);
    int k = d - 1;
    while (k >= 0 && y[k] == R) y[k--] = -R;
    if (k < 0) return;
    ++y[k];
  }
}

}  // namespace

double convolution_bound_shape(const SumSpec& s, const Site& x) {
  const double xp = plus_norm(x);
  const double dd = s.d;
  if (s.alpha > 0.0 && s.alpha < dd && s.gamma > 0.0 && s.gamma < dd)
    return log_pow(xp, s.a + s.c) / std::pow(xp, s.alpha + s.gamma - dd);
  if (s.alpha > 0.0 && s.alpha <= dd && s.gamma == dd) return log_pow(xp, s.a + s.c + 1.0) / std::pow(xp, s.alpha);
  if (s.gamma > dd && s.alpha < s.gamma) return log_pow(xp, s.a) / std::pow(xp, s.alpha);
  throw InvalidArgument("convolution_bound_shape: exponents outside the covered regimes");
}

SumResult convolution_sum(const SumSpec& s, const Site& x) {
  if (static_cast<int>(x.size()) != s.d) throw InvalidArgument("convolution_sum: dimension mismatch");
  if (s.alpha < 0 || s.gamma < 0 || s.a < 0 || s.c < 0) throw InvalidArgument("convolution_sum: negative exponent");
  if (s.radius < 4.0 * euclid(x) || s.radius < 1)
    throw InvalidArgument("convolution_sum: summation radius must be at least 4|x|");
  SumResult r;
  walk_box(s.d, s.radius, [&](const Site& y) {
    const double p = plus_norm(sub(y, x)), q = plus_norm(y);
    r.value += log_pow(p, s.a) / std::pow(p, s.alpha) * log_pow(q, s.c) / std::pow(q, s.gamma);
  });
  const double xn = euclid(x);
  r.tail_bound = radial_tail(s.d, s.radius, s.alpha + s.gamma - s.d, [&](double t) {
    const double p = std::max(t - xn, 0.0) + 1.0, q = t + 1.0;
    return log_pow(t + xn + 1.0, s.a) / std::pow(p, s.alpha) * log_pow(q, s.c) / std::pow(q, s.gamma);
  });
  try {
    r.bound_shape = convolution_bound_shape(s, x);
    r.ratio = r.value / r.bound_shape;
  } catch (const InvalidArgument&) {
    r.bound_shape = 0.0;
    r.ratio = 0.0;
  }
  return r;
}

DoubleSumResult double_sum_check(const Site& x, double a, int radius, std::int64_t max_points) {
  const int d = static_cast<int>(x.size());
  if (d < 3) throw InvalidArgument("double_sum_check: d >= 3 required");
  if (a < 0) throw InvalidArgument("double_sum_check: a must be non-negative");
  int axis = -1, nonzero = 0;
  for (int k = 0; k < d; ++k)
    if (x[k] != 0) {
      axis = k;
      ++nonzero;
    }
  if (nonzero > 1 || (axis >= 0 && x[axis] % 2 != 0))
    throw InvalidArgument("double_sum_check: x must lie on an axis with an even coordinate");
  if (radius < 4.0 * euclid(x) || radius < 1)
    throw InvalidArgument("double_sum_check: summation radius must be at least 4|x|");
  const int N = 2 * radius + 1;  // offsets 0..2R from the centre, period 4R
  std::int64_t total = 1;
  for (int k = 0; k < d; ++k) {
    total *= N;
    if (total > max_points) throw ResourceLimit("double_sum_check: grid exceeds the memory budget");
  }
  Site centre(d, 0);
  if (axis >= 0) centre[axis] = x[axis] / 2;
  std::vector<double> F(static_cast<std::size_t>(total)), K(static_cast<std::size_t>(total));
  Site u(d, 0);
  for (std::int64_t i = 0; i < total; ++i) {
    double w2 = 0.0;
    bool inside = true;
    for (int k = 0; k < d; ++k) {
      w2 += static_cast<double>(u[k]) * u[k];
      inside = inside && u[k] <= radius;
    }
    const double wp = std::sqrt(w2) + 1.0;
    K[i] = log_pow(wp, a) / std::pow(wp, d);
    if (inside) {
      Site z = add(centre, u);
      F[i] = 1.0 / std::pow(plus_norm(z) * plus_norm(sub(z, x)), d - 1);
    } else {
      F[i] = 0.0;
    }
    for (int k = d - 1; k >= 0; --k) {
      if (++u[k] < N) break;
      u[k] = 0;
    }
  }
  std::vector<int> dims(d, N);
  dct1(F, dims);
  dct1(K, dims);
  double acc = 0.0;
  std::fill(u.begin(), u.end(), 0);
  for (std::int64_t i = 0; i < total; ++i) {
    double w = 1.0;
    for (int k = 0; k < d; ++k) w *= (u[k] == 0 || u[k] == N - 1) ? 1.0 : 2.0;
    acc += w * F[i] * F[i] * K[i];
    for (int k = d - 1; k >= 0; --k) {
      if (++u[k] < N) break;
      u[k] = 0;
    }
  }
  DoubleSumResult r;
  r.lhs = acc / std::pow(4.0 * radius, d);
  r.ratio = r.lhs * std::pow(plus_norm(x), 2 * d - 2);
  return r;
}

SumResult two_point_kernel_sum(const Site& y1, const Site& y2, double a, double c, int radius) {
  const int d = static_cast<int>(y1.size());
  if (d < 3 || static_cast<int>(y2.size()) != d) throw InvalidArgument("two_point_kernel_sum: dimension mismatch");
  if (a < 0 || c < 0) throw InvalidArgument("two_point_kernel_sum: negative exponent");
  const double far = std::max(euclid(y1), euclid(y2));
  if (radius < 4.0 * far || radius < 1) throw InvalidArgument("two_point_kernel_sum: summation radius must be at least 4 max|y|");
  SumResult r;
  walk_box(d, radius, [&](const Site& z) {
    const double p1 = plus_norm(sub(y1, z)), p2 = plus_norm(sub(y2, z)), q = plus_norm(z);
    r.value += log_pow(p1 + p2, a) / (std::pow(p1, 2 * d + 1) + std::pow(p2, 2 * d + 1)) * log_pow(q, c) /
               std::pow(q, d - 1);
  });
  r.tail_bound = radial_tail(d, radius, 2.0 * d + 1.0, [&](double t) {
    const double p = std::max(t - far, 0.0) + 1.0, q = t + 1.0;
    return log_pow(2.0 * (t + far + 1.0), a) / (2.0 * std::pow(p, 2 * d + 1)) * log_pow(q, c) / std::pow(q, d - 1);
  });
  const double n1 = plus_norm(y1), n2 = plus_norm(y2);
  r.bound_shape = log_pow(n1 + n2, a + c) / ((std::pow(n1, d - 1) + std::pow(n2, d - 1)) *
                                            std::pow(plus_norm(sub(y1, y2)), d + 1));
  r.ratio = r.value / r.bound_shape;
  return r;
}

}  // namespace vwb
