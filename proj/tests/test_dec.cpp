#include <random>
#include <sstream>

#include "doctest.h"
#include "vwb/form.hpp"

using namespace vwb;

namespace {

RealForm random_form(const LatticeBox& b, int k, std::mt19937_64& rng) {
  RealForm f(b, k);
  std::normal_distribution<double> g;
  for (auto& v : f.data()) v = g(rng);
  return f;
}

IntForm random_int_form(const LatticeBox& b, int k, std::mt19937_64& rng) {
  IntForm f(b, k);
  std::uniform_int_distribution<int> u(-5, 5);
  for (auto& v : f.data()) v = u(rng);
  return f;
}

}  // namespace

TEST_CASE("gradient") {
  LatticeBox b(3, 3);
  RealForm u(b, 0);
  for (auto& v : u.data()) v = 5.0;
  auto g = gradient(u);
  // constant in the interior has zero gradient away from the box edge
  for (std::int64_t s = 0; s < b.num_sites(); ++s) {
    Site x = b.site_at(s);
    for (int i = 0; i < 3; ++i)
      if (x[i] < b.L) CHECK(g.at(s, i) == 0.0);
  }
  RealForm delta(b, 0);
  delta.at(b.site_index({0, 0, 0}), 0) = 1.0;
  auto gd = gradient(delta);
  for (int i = 0; i < 3; ++i) {
    CHECK(gd.value({0, 0, 0}, i) == -1.0);
    CHECK(gd.value(unit(3, i, -1), i) == 1.0);
  }
  CHECK(inner_product(gd, gd) == 6.0);
  CHECK_THROWS_AS(gradient(gd), InvalidArgument);
}

TEST_CASE("laplacian powers") {
  LatticeBox b(3, 4);
  RealForm delta(b, 0);
  delta.at(b.site_index({0, 0, 0}), 0) = 1.0;
  CHECK(laplacian_power(delta, 1).value({0, 0, 0}, 0) == -6.0);
  // independent expansion: Lap(delta)(y) is -6 at 0, 1 at the 6 neighbours
  auto lap = [](const Site& y) {
    int n = std::abs(y[0]) + std::abs(y[1]) + std::abs(y[2]);
    return n == 0 ? -6.0 : (n == 1 ? 1.0 : 0.0);
  };
  double oracle = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int s : {-1, 1}) oracle += lap(unit(3, i, s)) - lap({0, 0, 0});
  CHECK(oracle == 42.0);
  CHECK(laplacian_power(delta, 2).value({0, 0, 0}, 0) == oracle);

  RealForm c(b, 0);
  for (auto& v : c.data()) v = 1.0;
  auto lc = laplacian_power(c, 1);
  for (std::int64_t s = 0; s < b.num_sites(); ++s) {
    Site x = b.site_at(s);
    if (b.interior(x))
      CHECK(lc.at(s, 0) == 0.0);
    else
      CHECK(lc.at(s, 0) != 0.0);
  }
  CHECK_THROWS_AS(laplacian_power(c, 0), InvalidArgument);
}

TEST_CASE("exterior derivative") {
  std::mt19937_64 rng(7);
  LatticeBox b(3, 4);
  auto u = random_int_form(b, 0, rng);
  auto du = gradient(u);
  auto ddu = exterior_d(du);
  // faces whose edges stay in the box see a closed form
  for (std::int64_t s = 0; s < b.num_sites(); ++s) {
    Site x = b.site_at(s);
    bool inner = true;
    for (int v : x) inner = inner && v < b.L - 1;
    if (inner)
      for (int c = 0; c < 3; ++c) CHECK(ddu.at(s, c) == 0);
  }
  RealForm h(b, 1);
  h.at(b.site_index({0, 0, 0}), 0) = 1.0;
  CHECK(exterior_d(h).value({0, 0, 0}, 0) == 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    auto n = random_int_form(b, 1, rng);
    auto dd = exterior_d(exterior_d(n));
    for (auto v : dd.data()) CHECK(v == 0);
  }
  CHECK_THROWS_AS(exterior_d(u), InvalidArgument);
}

TEST_CASE("codifferential and adjointness") {
  LatticeBox b(3, 4);
  RealForm k(b, 2);
  k.at(b.site_index({0, 0, 0}), 0) = 1.0;
  CHECK(codifferential_d_star(k).value({0, 0, 0}, 0) == 1.0);
  RealForm h(b, 1);
  h.at(b.site_index({0, 0, 0}), 0) = 1.0;
  CHECK(inner_product(exterior_d(h), k) == 1.0);
  CHECK(inner_product(h, codifferential_d_star(k)) == 1.0);

  std::mt19937_64 rng(11);
  double worst = 0.0;
  for (int rep = 0; rep < 500; ++rep) {
    auto hh = random_form(b, 1, rng);
    auto kk = random_form(b, 2, rng);
    worst = std::max(worst, std::abs(inner_product(exterior_d(hh), kk) - inner_product(hh, codifferential_d_star(kk))));
  }
  CHECK(worst < 1e-12);
  CHECK_THROWS_AS(codifferential_d_star(RealForm(b, 0)), InvalidArgument);
}

TEST_CASE("d* d on 0-forms is minus the Laplacian away from the lower boundary") {
  std::mt19937_64 rng(3);
  LatticeBox b(3, 4);
  for (int rep = 0; rep < 20; ++rep) {
    auto u = random_form(b, 0, rng);
    auto lhs = codifferential_d_star(gradient(u));
    auto lap = laplacian_power(u, 1);
    for (std::int64_t s = 0; s < b.num_sites(); ++s) {
      Site x = b.site_at(s);
      bool ok = true;
      for (int v : x) ok = ok && v > -b.L;
      if (ok) CHECK(lhs.at(s, 0) == doctest::Approx(-lap.at(s, 0)).epsilon(1e-12));
    }
  }
}

TEST_CASE("inner products and norms") {
  LatticeBox b(3, 3);
  RealForm f(b, 2);
  f.at(5, 1) = 1.0;
  CHECK(inner_product(f, f) == 1.0);
  RealForm h(b, 1);
  h.at(b.site_index({0, 0, 0}), 0) = 1.0;
  auto q = exterior_d(h);
  CHECK(norm_l1(q) == 4.0);
  CHECK(norm_linf(q) == 1.0);
  // per-site Euclidean variant: the two faces at the base site share a vector
  CHECK(site_norm_l1(q) == doctest::Approx(2.0 + std::sqrt(2.0)));
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    auto a = random_form(b, 2, rng);
    auto c = random_form(b, 2, rng);
    CHECK(std::abs(inner_product(a, c)) <= norm_l2(a) * norm_l2(c) + 1e-12);
    CHECK(norm_l2(a) * norm_l2(a) == doctest::Approx(inner_product(a, a)).epsilon(1e-14));
  }
  CHECK_THROWS_AS(inner_product(f, h), InvalidArgument);
}

TEST_CASE("tensor product") {
  LatticeBox b(3, 2);
  RealForm k(b, 2), l(b, 2);
  k.at(b.site_index({0, 0, 0}), 0) = 1.0;
  l.at(b.site_index({0, 0, 0}), 0) = 1.0;
  auto m = tensor_product(k, l)({0, 0, 0}, {0, 0, 0});
  int nonzero = 0;
  for (double v : m) nonzero += v != 0.0;
  CHECK(nonzero == 1);
  CHECK(m[0] == 1.0);

  std::mt19937_64 rng(9);
  RealForm a(b, 2), c(b, 2);
  std::uniform_int_distribution<std::int64_t> pick(0, static_cast<std::int64_t>(a.size()) - 1);
  std::normal_distribution<double> g;
  for (int i = 0; i < 10; ++i) {
    a.data()[pick(rng)] = g(rng);
    c.data()[pick(rng)] = g(rng);
  }
  auto ac = tensor_product(a, c);
  auto ca = tensor_product(c, a);
  for (std::int64_t s = 0; s < b.num_sites(); s += 7) {
    for (std::int64_t t = 0; t < b.num_sites(); t += 5) {
      Site x = b.site_at(s), y = b.site_at(t);
      auto m1 = ac(x, y);
      auto m2 = ca(y, x);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          CHECK(m1[i * 3 + j] == m2[j * 3 + i]);
          CHECK(m1[i * 3 + j] == a.data()[s * 3 + i] * c.data()[t * 3 + j]);
        }
    }
  }
}

TEST_CASE("form serialization round trip") {
  std::mt19937_64 rng(1);
  LatticeBox b(3, 2);
  auto f = random_form(b, 2, rng);
  std::stringstream ss;
  write_form(ss, f);
  CHECK(read_real_form(ss) == f);
  auto n = random_int_form(b, 1, rng);
  std::stringstream si;
  write_form(si, n);
  CHECK(read_int_form(si) == n);
  std::stringstream bad("garbage-bytes-here");
  CHECK_THROWS_AS(read_real_form(bad), Corruption);
  CHECK(dump_form(f).find("# degree 2") == 0);
}
