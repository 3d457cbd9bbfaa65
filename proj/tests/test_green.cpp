#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "vwb/green.hpp"

using namespace vwb;

namespace {

// G(0) = int_0^inf (e^{-2t} I_0(2t))^d dt, since e^{t Lap} = prod_k e^{-2t} I_{x_k}(2t).
double origin_value_oracle(int d) {
  auto scaled_i0 = [](double x) {
    if (x < 200.0) return std::exp(-x) * std::cyl_bessel_i(0.0, x);
    double s = 1.0, term = 1.0;
    for (int k = 1; k < 8; ++k) {
      term *= (2.0 * k - 1) * (2.0 * k - 1) / (8.0 * k * x);
      s += term;
    }
    return s / std::sqrt(2.0 * M_PI * x);
  };
  auto f = [&](double t) { return std::pow(scaled_i0(2.0 * t), d); };
  auto simpson = [](auto&& g, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = g(a) + g(b);
    for (int i = 1; i < n; ++i) s += g(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
  };
  const double T = 100.0;
  double head = simpson(f, 0.0, 1.0, 2000) + simpson(f, 1.0, T, 200000);
  // t = T / s^2 maps the tail onto s in (0, 1]
  // near s = 0 the integrand tends to 2T (4 pi T)^{-d/2} s^{d-3}
  const double limit = d == 3 ? 2.0 * T * std::pow(4.0 * M_PI * T, -1.5) : 0.0;
  auto tail = [&](double s) { return s == 0.0 ? limit : f(T / (s * s)) * 2.0 * T / (s * s * s); };
  return head + simpson(tail, 0.0, 1.0, 20000);
}

}  // namespace

TEST_CASE("origin value oracle is the known constant") {
  CHECK(origin_value_oracle(3) == doctest::Approx(0.2527310098).epsilon(1e-8));
}

TEST_CASE("Dirichlet solver inverts the Laplacian") {
  LatticeBox b(3, 5);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  std::vector<double> f(b.num_sites());
  for (auto& v : f) v = g(rng);
  auto u = dirichlet_solve(b, f);
  double worst = 0.0;
  for (std::int64_t s = 0; s < b.num_sites(); ++s) {
    Site x = b.site_at(s);
    if (!b.interior(x)) {
      CHECK(u[s] == 0.0);
      continue;
    }
    double lap = -6.0 * u[s];
    for (int k = 0; k < 3; ++k) lap += u[s + b.stride(k)] + u[s - b.stride(k)];
    worst = std::max(worst, std::abs(-lap - f[s]));
  }
  CHECK(worst < 1e-12);
  auto col = dirichlet_green_column(b, {1, -2, 0});
  auto col2 = dirichlet_green_column(b, {0, 3, 1});
  CHECK(col[b.site_index({0, 3, 1})] == doctest::Approx(col2[b.site_index({1, -2, 0})]).epsilon(1e-12));
  CHECK_THROWS_AS(dirichlet_green_column(b, {5, 0, 0}), InvalidArgument);
}

TEST_CASE("infinite-volume Green's function") {
  auto G = compute_green(3, 8, 1e-8);
  CHECK(G.residual < 1e-12);
  CHECK(G({0, 0, 0}) - G({1, 0, 0}) == doctest::Approx(1.0 / 6.0).epsilon(1e-10));
  const double oracle = origin_value_oracle(3);
  CHECK(std::abs(G({0, 0, 0}) - oracle) < 1e-8);
  CHECK(G.accuracy < 2e-4);
  // octahedral symmetry
  LatticeBox inner(3, 8);
  std::vector<int> perm{0, 1, 2};
  double worst = 0.0;
  for (std::int64_t s = 0; s < inner.num_sites(); ++s) {
    Site x = inner.site_at(s);
    do {
      for (int signs = 0; signs < 8; ++signs) {
        Site y(3);
        for (int k = 0; k < 3; ++k) y[k] = x[perm[k]] * ((signs >> k & 1) ? -1 : 1);
        worst = std::max(worst, std::abs(G(x) - G(y)));
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  CHECK(worst < 1e-14);
  CHECK_THROWS_AS(compute_green(2, 8, 1e-8), InvalidArgument);
  CHECK_THROWS_AS(compute_green(3, 0, 1e-8), InvalidArgument);
  CHECK_THROWS_AS(compute_green(3, 40, 1e-8, GreenMethod::kDirichletExtrapolation, 1000), ResourceLimit);
}

TEST_CASE("torus method agrees with extrapolation") {
  auto a = compute_green(3, 10, 1e-8);
  auto b = compute_green(3, 10, 1e-8, GreenMethod::kTorus);
  CHECK(b.residual < 1e-10);
  double worst = 0.0;
  for (const Site& x : std::vector<Site>{{1, 0, 0}, {2, 1, 0}, {3, 3, 3}, {5, 0, 2}, {4, -4, 1}})
    worst = std::max(worst, std::abs(a(x) - b(x)) / a(x));
  CHECK(worst < 1e-4);
}

TEST_CASE("gradient and decay tables") {
  auto G = compute_green(3, 8, 1e-8);
  auto grad = green_gradient(G);
  double s = 0.0;
  for (int i = 0; i < 3; ++i) s += grad.value({0, 0, 0}, i) - grad.value(unit(3, i, -1), i);
  CHECK(s == doctest::Approx(-1.0).epsilon(1e-12));
  // point reflection: grad_i G(x) = -grad_i G(-x - e_i)
  for (const Site& x : std::vector<Site>{{1, 2, 3}, {0, 0, 0}, {-3, 1, 4}})
    for (int i = 0; i < 3; ++i) {
      Site y = sub(Site{0, 0, 0}, add(x, unit(3, i)));
      CHECK(grad.value(x, i) == doctest::Approx(-grad.value(y, i)).epsilon(1e-12));
    }
  auto raw = decay_ratio_table(G, 0.0);
  for (const auto& r : raw) CHECK(r.ratio == r.value);
  auto wrong = decay_ratio_table(G, 3.0);
  std::vector<double> axis;
  for (const auto& r : wrong)
    if (r.x[1] == 0) axis.push_back(r.ratio);
  for (std::size_t i = 3; i < axis.size(); ++i) CHECK(axis[i] > axis[i - 1]);
  CHECK_THROWS_AS(decay_ratio_table(G, -1.0), InvalidArgument);
}
