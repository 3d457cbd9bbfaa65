#include <cmath>

#include "doctest.h"
#include "vwb/green.hpp"
#include "vwb/spin.hpp"

using namespace vwb;

namespace {

// Dual (Fourier) form of the periodised Gaussian.
double villain_dual(double theta, double beta) {
  double s = 1.0;
  for (int n = 1; n <= 60; ++n) s += 2.0 * std::exp(-0.5 * n * n / beta) * std::cos(n * theta);
  return s / std::sqrt(2.0 * M_PI * beta);
}

double bessel_ratio(double k) { return std::cyl_bessel_i(1.0, k) / std::cyl_bessel_i(0.0, k); }

}  // namespace

TEST_CASE("villain weight") {
  for (double beta : {0.5, 1.0, 2.0, 4.0})
    for (double t : {-3.0, -1.0, 0.0, 0.3, 2.5}) {
      CHECK(villain_weight(t, beta) == doctest::Approx(villain_weight(-t, beta)).epsilon(1e-14));
      CHECK(villain_weight(t, beta) == doctest::Approx(villain_weight(t + 2.0 * M_PI, beta)).epsilon(1e-12));
      CHECK(villain_weight(t, beta) == doctest::Approx(villain_dual(t, beta)).epsilon(1e-12));
    }
  const double beta = 1.0;
  for (int M : {1, 2, 3}) {
    const double err = std::abs(villain_weight(0.5, beta, M) / villain_weight(0.5, beta, 20) - 1.0);
    CHECK(err <= villain_truncation_bound(beta, M));
  }
  CHECK_THROWS_AS(villain_weight(0.0, 1.0, 0), InvalidArgument);
  CHECK(wrap_angle(M_PI) == doctest::Approx(-M_PI));
  CHECK(wrap_angle(7.0) == doctest::Approx(7.0 - 2.0 * M_PI));
}

TEST_CASE("tabulated edge weight matches the exact one") {
  EdgeLogWeight exact(SpinModel::kVillain, 2.0, 10, false), tab(SpinModel::kVillain, 2.0, 10, true);
  double worst = 0.0;
  for (int i = 0; i < 5000; ++i) {
    const double t = -7.0 + 14.0 * i / 4999.0;
    worst = std::max(worst, std::abs(exact(t) - tab(t)));
  }
  CHECK(worst < 1e-9);
  EdgeLogWeight xy(SpinModel::kXY, 1.5);
  CHECK(xy(0.4) == doctest::Approx(1.5 * std::cos(0.4)));
}

TEST_CASE("graphs") {
  auto m = build_metric_graph(triangle_graph(), 4);
  CHECK(m.num_vertices == 3 + 3 * 3);
  CHECK(m.edges.size() == 12);
  CHECK(m.subdivision == 4);
  validate_graph(m);
  CHECK(build_metric_graph(single_edge_graph(), 1).edges.size() == 1);
  CHECK_THROWS_AS(validate_graph(RootedGraph{3, {{0, 1}}, 0, 3, 1}), InvalidArgument);
  CHECK_THROWS_AS(validate_graph(RootedGraph{2, {{0, 1}}, 5, 2, 1}), InvalidArgument);
  CHECK_THROWS_AS(build_metric_graph(single_edge_graph(), 0), InvalidArgument);
  CHECK(star_graph(2).num_vertices == 4);
  CHECK(chain_graph(3).edges.size() == 3);
}

TEST_CASE("quadrature against closed forms") {
  for (double beta : {0.5, 1.0, 2.0}) {
    auto v = graph_quadrature(single_edge_graph(), SpinModel::kVillain, beta, 1, 1);
    CHECK(v.cx == doctest::Approx(std::exp(-0.5 / beta)).epsilon(1e-9));
    CHECK(std::abs(v.sx) < 1e-12);
    auto x = graph_quadrature(single_edge_graph(), SpinModel::kXY, beta, 1, 1);
    CHECK(x.cx == doctest::Approx(bessel_ratio(beta)).epsilon(1e-9));
    // chain: the angle differences are independent
    auto c = graph_quadrature(chain_graph(2), SpinModel::kXY, beta, 1, 2);
    CHECK(c.cy == doctest::Approx(std::pow(bessel_ratio(beta), 2)).epsilon(1e-8));
    for (int n : {1, 2, 4}) {
      auto mg = metric_graph_quadrature(single_edge_graph(), beta, n, 1, 1);
      CHECK(mg.cx == doctest::Approx(std::pow(bessel_ratio(n * beta), n)).epsilon(1e-8));
    }
  }
  RootedGraph big{5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}}, 0, 5, 1};
  CHECK_THROWS_AS(graph_quadrature(big, SpinModel::kXY, 1.0, 1, 2), ResourceLimit);
}

TEST_CASE("metric graph approaches the Villain model") {
  auto rows = metric_graph_convergence(triangle_graph(), 1.0, 1, 2, {1, 2, 4, 8});
  REQUIRE(rows.size() == 4);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].gap_cc < rows[i - 1].gap_cc);
  double prev = 10.0;
  for (int n : {1, 2, 4, 8, 16}) {
    const double g = semigroup_l1_gap(1.0, n);
    CHECK(g < prev);
    prev = g;
  }
}

TEST_CASE("ginibre-type inequality on the triangle") {
  for (SpinModel m : {SpinModel::kXY, SpinModel::kVillain})
    for (double beta : {0.3, 1.0, 3.0}) {
      auto e = graph_quadrature(triangle_graph(), m, beta, 1, 2);
      const double p = e.cx * e.cy;
      CHECK((e.cc - p) * (e.cc + p) - e.ss * e.ss >= -1e-10);
      CHECK(e.cc - p >= -1e-10);
    }
}

TEST_CASE("metropolis") {
  SpinSystem sys = spin_system(single_edge_graph());
  ChainParams p;
  p.beta = 0.0;
  p.sweeps = 200;
  p.burn_in = 0;
  auto r0 = run_metropolis_chain(sys, p, {PairGroup{{{1, 1}}, 0.0}});
  CHECK(r0.acceptance == 1.0);

  p.beta = 1.0;
  p.sweeps = 100000;
  p.burn_in = 1000;
  p.width = M_PI;
  SpinConfig fin;
  auto a = run_metropolis_chain(sys, p, {PairGroup{{{1, 1}}, 0.0}}, true, &fin);
  CHECK(fin.theta[0] == 0.0);
  p.seed = 2;
  auto b = run_metropolis_chain(sys, p, {PairGroup{{{1, 1}}, 0.0}});
  auto est = estimate_correlations(a, b);
  const double exact = std::exp(-0.5);
  CHECK(std::abs(est[0].cx.mean - exact) < 4.0 * est[0].cx.se + 1e-3);
  CHECK(std::abs(est[0].sx.mean) < 4.0 * est[0].sx.se + 1e-3);
  // sin^2 + cos^2 = 1 for a site paired with itself
  CHECK(est[0].cc.mean + est[0].ss.mean == doctest::Approx(1.0).epsilon(1e-12));

  ChainParams bad;
  bad.width = 0.0;
  CHECK_THROWS_AS(validate(bad), InvalidArgument);
}

TEST_CASE("metropolis on a two-site chain matches quadrature") {
  SpinSystem sys = spin_system(chain_graph(2));
  ChainParams p;
  p.beta = 1.0;
  p.model = SpinModel::kXY;
  p.sweeps = 100000;
  p.burn_in = 1000;
  std::vector<PairGroup> g{PairGroup{{{1, 2}}, 1.0}};
  auto a = run_metropolis_chain(sys, p, g);
  p.seed = 9;
  auto b = run_metropolis_chain(sys, p, g);
  auto est = estimate_correlations(a, b);
  auto q = graph_quadrature(chain_graph(2), SpinModel::kXY, 1.0, 1, 2);
  CHECK(std::abs(est[0].cc.mean - q.cc) < 4.0 * est[0].cc.se + 2e-3);
  CHECK(std::abs(est[0].ss.mean - q.ss) < 4.0 * est[0].ss.se + 2e-3);
  CHECK(std::abs(est[0].cy.mean - q.cy) < 4.0 * est[0].cy.se + 2e-3);
}

TEST_CASE("augmented sampler agrees with metropolis") {
  LatticeBox box(3, 2);
  const auto o = box.site_index({0, 0, 0}), x = box.site_index({1, 0, 0}), y = box.site_index({1, 1, 0});
  std::vector<PairGroup> g{PairGroup{{{static_cast<int>(o), static_cast<int>(x)}}, 1.0},
                           PairGroup{{{static_cast<int>(o), static_cast<int>(y)}}, std::sqrt(2.0)}};
  ChainParams p;
  p.beta = 1.0;
  p.sweeps = 20000;
  p.burn_in = 500;
  auto a = run_augmented_chain(box, p, g);
  p.seed = 5;
  auto b = run_augmented_chain(box, p, g);
  auto aug = estimate_correlations(a, b);

  p.sweeps = 60000;
  p.width = 2.0;
  auto sys = spin_system(box);
  auto c = run_metropolis_chain(sys, p, g);
  p.seed = 6;
  auto d = run_metropolis_chain(sys, p, g);
  auto met = estimate_correlations(c, d);
  for (int i = 0; i < 2; ++i) {
    const double se = std::hypot(aug[i].cc.se, met[i].cc.se);
    CHECK(std::abs(aug[i].cc.mean - met[i].cc.mean) < 4.0 * se + 2e-3);
    const double se1 = std::hypot(aug[i].cx.se, met[i].cx.se);
    CHECK(std::abs(aug[i].cx.mean - met[i].cx.mean) < 4.0 * se1 + 2e-3);
  }
}

TEST_CASE("augmented sampler conditional mean solves the Poisson problem") {
  LatticeBox box(3, 3);
  AugmentedVillainSampler s(box, 0.7, 3);
  for (int i = 0; i < 5; ++i) s.sweep();
  // with no currents the angles are a centred Gaussian field; record must be
  // consistent with the Green's function at the centre
  ChainRecord rec;
  const int c = static_cast<int>(box.site_index({0, 0, 0}));
  rec.groups = {PairGroup{{{c, c}}, 0.0}};
  s.record(rec);
  REQUIRE(rec.rows.size() == kNumPairObs);
  // cc + ss = <cos(0)> given currents = 1
  CHECK(rec.rows[kObsCC] + rec.rows[kObsSS] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rec.rows[kObsCosMinus] == doctest::Approx(1.0).epsilon(1e-12));
  const double gcc = dirichlet_green_column(box, {0, 0, 0})[c];
  CHECK(std::hypot(rec.rows[kObsCX], rec.rows[kObsSX]) == doctest::Approx(std::exp(-0.5 * gcc / 0.7)).epsilon(1e-12));
  CHECK_THROWS_AS(AugmentedVillainSampler(box, 0.0, 1), InvalidArgument);
}

TEST_CASE("decay fits") {
  std::vector<DecayPoint> pts;
  for (int r = 2; r <= 10; ++r) pts.push_back({double(r), 3.0 * std::pow(r, -1.5), 0.01 * 3.0 * std::pow(r, -1.5)});
  auto f = fit_decay(pts, DecayModel::kPower);
  CHECK(f.exponent == doctest::Approx(1.5).epsilon(1e-10));
  CHECK(f.amplitude == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(f.ci_low < 1.5);
  CHECK(f.ci_high > 1.5);
  CHECK(f.ci_high - f.ci_low < 0.1);

  std::vector<DecayPoint> lg;
  for (int r = 2; r <= 40; ++r) lg.push_back({double(r), std::pow(r, -1.0) * std::pow(std::log(r), 0.5), 0.0});
  auto fl = fit_decay(lg, DecayModel::kPowerLog);
  CHECK(fl.exponent == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(fl.kappa == doctest::Approx(0.5).epsilon(1e-8));

  auto with_bad = pts;
  with_bad.push_back({11.0, -1e-4, 1e-3});
  auto fw = fit_decay(with_bad, DecayModel::kPower);
  CHECK(fw.warnings.size() == 1);
  CHECK(fw.used_points == 9);
  std::vector<DecayPoint> few(pts.begin(), pts.begin() + 3);
  CHECK_THROWS_AS(fit_decay(few, DecayModel::kPower), InsufficientData);
}
