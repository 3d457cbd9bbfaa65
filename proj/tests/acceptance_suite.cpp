#include "acceptance_suite.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <memory>
#include <random>
#include <sstream>

#include <sys/wait.h>

#include "oracles.hpp"
#include "vwb/charges.hpp"
#include "vwb/form.hpp"
#include "vwb/green.hpp"
#include "vwb/heat.hpp"
#include "vwb/interface.hpp"
#include "vwb/spin.hpp"
#include "vwb/sums.hpp"

namespace vwb::acceptance {

namespace {

namespace fs = std::filesystem;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}
std::string g3(double v) { return fmt("%.3g", v); }
std::string g4(double v) { return fmt("%.4g", v); }

double variation(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi / *lo;
}

// ------------------------------------------------------------------ 1

template <class T>
Form<T> random_form(const LatticeBox& box, int degree, std::mt19937_64& rng) {
  Form<T> f(box, degree);
  if constexpr (std::is_integral_v<T>) {
    std::uniform_int_distribution<int> u(-5, 5);
    for (auto& v : f.data()) v = u(rng);
  } else {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& v : f.data()) v = u(rng);
  }
  return f;
}

template <class T>
void dec_round(const LatticeBox& box, int kind, std::mt19937_64& rng, double& dd, double& adj) {
  if (kind == 0) {
    auto u = random_form<T>(box, 0, rng);
    auto h = random_form<T>(box, 1, rng);
    dd = std::max(dd, norm_linf(exterior_d(gradient(u))));
    adj = std::max(adj, std::abs(inner_product(gradient(u), h) - inner_product(u, codifferential_d_star(h))));
  } else {
    auto h = random_form<T>(box, 1, rng);
    auto k = random_form<T>(box, 2, rng);
    dd = std::max(dd, norm_linf(exterior_d(exterior_d(h))));
    dd = std::max(dd, norm_linf(codifferential_d_star(codifferential_d_star(k))));
    adj = std::max(adj, std::abs(inner_product(exterior_d(h), k) - inner_product(h, codifferential_d_star(k))));
  }
}

Result dec_identities(const Options&) {
  Result r;
  r.name = "exterior calculus identities";
  LatticeBox box(3, 4);
  std::mt19937_64 rng(101);
  double dd = 0.0, adj = 0.0;
  for (int i = 0; i < 1000; ++i) {
    if (i % 2 == 0)
      dec_round<std::int64_t>(box, (i / 2) % 2, rng, dd, adj);
    else
      dec_round<double>(box, (i / 2) % 2, rng, dd, adj);
  }
  r.pass = dd < 1e-12 && adj < 1e-12;
  r.detail = "1000 forms, max |dd| " + g3(dd) + ", max adjoint gap " + g3(adj);
  return r;
}

// ------------------------------------------------------------------ 2

Result poincare(const Options&) {
  Result r;
  r.name = "Poincare primitives";
  auto pool = enumerate_charges(LatticeBox(3, 3), 6);
  auto rep = poincare_sweep(pool);
  r.pass = rep.failures == 0 && rep.checked == pool.size() && !pool.empty();
  r.detail = std::to_string(rep.checked) + " charges, " + std::to_string(rep.failures) + " failures, sup constant " +
             g4(rep.sup_constant);
  return r;
}

// ------------------------------------------------------------------ 3

Result green(const Options&) {
  Result r;
  r.name = "lattice Green's function";
  auto g = compute_green(3, 30, 1e-8);
  auto t = compute_green(3, 30, 1e-8, GreenMethod::kTorus);
  const double step = g({0, 0, 0}) - g({1, 0, 0});
  const double origin_err = std::abs(g({0, 0, 0}) - 0.2527310098586);

  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> u(-30, 30);
  double agree = 0.0;
  for (int i = 0; i < 20; ++i) {
    Site x{u(rng), u(rng), u(rng)};
    agree = std::max(agree, std::abs(g(x) - t(x)) / std::abs(g(x)));
  }
  std::vector<double> ratios;
  for (const auto& row : decay_ratio_table(g, 1.0))
    if (row.norm >= 10.0 && row.norm <= 15.0) ratios.push_back(row.ratio);
  const double var = variation(ratios);

  r.pass = g.residual <= 1e-8 && std::abs(step - 1.0 / 6.0) <= 1e-8 && agree <= 1e-4 && var < 2.0 &&
           origin_err <= 1e-8;
  r.detail = "residual " + g3(g.residual) + ", G(0)-G(e1)-1/6 " + g3(step - 1.0 / 6.0) + ", two-method gap " +
             g3(agree) + ", G|x| variation " + g4(var) + ", G(0) error " + g3(origin_err);
  return r;
}

// ------------------------------------------------------------------ 4

Result activity(const Options&) {
  Result r;
  r.name = "activity decay constant";
  ChargePool pool(enumerate_charges(LatticeBox(3, 2), 6), 6);
  std::vector<double> c;
  for (double beta : {16.0, 64.0, 256.0}) c.push_back(fitted_activity_constant(pool, beta, 2));
  const bool positive = std::all_of(c.begin(), c.end(), [](double v) { return v > 0.0; });
  const double var = positive ? variation(c) : 0.0;
  r.pass = positive && var <= 1.25;
  r.detail = std::to_string(pool.size()) + " charges, c = " + g4(c[0]) + ", " + g4(c[1]) + ", " + g4(c[2]) +
             ", variation " + g4(var);
  return r;
}

// ------------------------------------------------------------------ 5

Result quadrature_vs_mc(const Options&) {
  Result r;
  r.name = "quadrature against Monte Carlo";
  struct Case {
    std::string name;
    RootedGraph g;
    int x, y;
  };
  std::vector<Case> cases{{"chain:1", chain_graph(1), 1, 1},
                          {"chain:2", chain_graph(2), 1, 2},
                          {"chain:3", chain_graph(3), 1, 3},
                          {"star:2", star_graph(2), 2, 3},
                          {"triangle", triangle_graph(), 1, 2}};
  int checks = 0, misses = 0;
  double worst = 0.0;
  std::string failed;
  std::uint64_t seed = 500;
  for (const auto& cs : cases) {
    for (SpinModel model : {SpinModel::kVillain, SpinModel::kXY}) {
      auto exact = graph_quadrature(cs.g, model, 1.0, cs.x, cs.y, 1e-8);
      auto sys = spin_system(cs.g);
      ChainParams p;
      p.beta = 1.0;
      p.model = model;
      p.sweeps = 100000;
      p.burn_in = 1000;
      p.width = 2.0;
      std::vector<PairGroup> groups{PairGroup{{{cs.x, cs.y}}, 1.0}};
      p.seed = ++seed;
      auto a = run_metropolis_chain(sys, p, groups);
      p.seed = ++seed;
      auto b = run_metropolis_chain(sys, p, groups);
      auto est = estimate_correlations(a, b).front();
      const std::pair<const Estimate*, double> obs[] = {
          {&est.cc, exact.cc}, {&est.cx, exact.cx}, {&est.cy, exact.cy}, {&est.ss, exact.ss}};
      for (const auto& [e, ref] : obs) {
        ++checks;
        const double z = std::abs(e->mean - ref) / std::max(e->se, 1e-300);
        if (std::abs(e->mean - ref) > 3.0 * e->se + 1e-8) {
          ++misses;
          failed += " " + cs.name + "/" + to_string(model);
        }
        if (e->se > 0) worst = std::max(worst, z);
      }
    }
  }
  r.pass = misses == 0;
  r.detail = std::to_string(checks) + " comparisons, largest deviation " + g3(worst) + " SE";
  if (misses) r.detail += ", outside 3 SE:" + failed;
  return r;
}

// ------------------------------------------------------------------ 6

std::vector<PairGroup> axis_groups(const LatticeBox& box, int r_min, int r_max) {
  const int c = static_cast<int>(box.site_index(Site(box.d, 0)));
  std::vector<PairGroup> groups;
  for (int r = r_min; r <= r_max; ++r) {
    PairGroup g;
    g.separation = r;
    for (int k = 0; k < box.d; ++k)
      for (int s : {-1, 1}) g.pairs.push_back({c, static_cast<int>(box.site_index(unit(box.d, k, s * r)))});
    groups.push_back(g);
  }
  return groups;
}

Result decay_exponents(const Options&) {
  Result r;
  r.name = "decay exponents";
  LatticeBox box(3, 24);
  auto groups = axis_groups(box, 2, 10);
  ChainParams p;
  p.beta = 2.0;
  p.sweeps = 3000;
  p.burn_in = 300;
  p.seed = 11;
  auto a = run_augmented_chain(box, p, groups);
  p.seed = 12;
  auto b = run_augmented_chain(box, p, groups);
  std::vector<DecayPoint> ss, tr;
  for (const auto& e : estimate_correlations(a, b)) {
    ss.push_back({e.separation, e.ss.mean, e.ss.se});
    tr.push_back({e.separation, e.truncated.mean, e.truncated.se});
  }
  auto fs_ = fit_decay(ss, DecayModel::kPower, 3);
  auto ft = fit_decay(tr, DecayModel::kPower, 4);
  const bool ss_ok = fs_.exponent >= 0.7 && fs_.exponent <= 1.3;
  const bool tr_ok = ft.exponent >= fs_.exponent && ft.exponent >= 1.3 && ft.exponent <= 2.7;
  r.pass = ss_ok && tr_ok;
  r.detail = "sin-sin exponent " + g4(fs_.exponent) + " [" + g3(fs_.ci_low) + ", " + g3(fs_.ci_high) +
             "], truncated cos-cos exponent " + g4(ft.exponent) + " [" + g3(ft.ci_low) + ", " + g3(ft.ci_high) + "]";
  return r;
}

// ------------------------------------------------------------------ 7

Result dunlop_newman(const Options&) {
  Result r;
  r.name = "Dunlop-Newman inequality";
  LatticeBox box(3, 8);
  auto sys = spin_system(box);
  auto groups = axis_groups(box, 1, 6);
  ChainParams p;
  p.beta = 1.0;
  p.model = SpinModel::kVillain;
  p.sweeps = 20000;
  p.burn_in = 500;
  p.width = 2.0;
  p.seed = 71;
  auto a = run_metropolis_chain(sys, p, groups);
  p.seed = 72;
  auto b = run_metropolis_chain(sys, p, groups);
  int bad = 0;
  double worst_z = 1e300;
  for (const auto& e : estimate_correlations(a, b)) {
    auto dn = dunlop_newman_check(e.cc, e.product, e.ss);
    if (dn.residual < -3.0 * dn.se - 1e-12) ++bad;
    if (dn.se > 0) worst_z = std::min(worst_z, dn.residual / dn.se);
  }
  double quad = 1e300;
  for (double beta : {0.5, 1.0, 2.0}) {
    auto e = graph_quadrature(triangle_graph(), SpinModel::kXY, beta, 1, 2, 1e-10);
    const double pr = e.cx * e.cy;
    quad = std::min(quad, (e.cc - pr) * (e.cc + pr) - e.ss * e.ss);
  }
  auto mg = metric_graph_quadrature(triangle_graph(), 1.0, 16, 1, 2, 1e-10);
  const double pr = mg.cx * mg.cy;
  const double metric = (mg.cc - pr) * (mg.cc + pr) - mg.ss * mg.ss;
  r.pass = bad == 0 && quad >= -1e-8 && metric >= -1e-8;
  r.detail = "Monte Carlo pairs below -3 SE: " + std::to_string(bad) + " (smallest residual/SE " + g3(worst_z) +
             "), triangle XY min " + g3(quad) + ", metric graph n=16 " + g3(metric);
  return r;
}

// ------------------------------------------------------------------ 8

Result metric_graph(const Options&) {
  Result r;
  r.name = "metric-graph convergence";
  auto rows = metric_graph_convergence(single_edge_graph(), 1.0, 0, 1, {1, 2, 4, 8, 16}, 1e-10);
  bool monotone = true;
  for (std::size_t i = 1; i < rows.size(); ++i) monotone = monotone && rows[i].gap_cc < rows[i - 1].gap_cc;
  const double last = rows.back().gap_cc;
  r.pass = monotone && last < 1e-3;
  r.detail = std::string("gaps");
  for (const auto& row : rows) r.detail += " " + g3(row.gap_cc);
  r.detail += monotone ? ", monotone" : ", not monotone";
  r.detail += ", n=16 gap " + g3(last) + (last < 1e-3 ? " < 1e-3" : " >= 1e-3");
  return r;
}

// ------------------------------------------------------------------ 9

Result gaussian_interface(const Options&) {
  Result r;
  r.name = "Gaussian interface covariance";
  PotentialSpec spec;
  spec.beta = 3.0;
  spec.n_max = 0;
  spec.charges = false;
  LatticeBox box(3, 6);
  InterfaceModel m(box, spec);
  const double dt = 0.02;
  const std::int64_t burn = 20000, steps = 300000;
  const int thin = 5, nc = m.ncomp(), r_max = 2;
  // pairs (x, x + r e) for x in the central unit cube, per distance r
  std::vector<std::vector<std::pair<std::int64_t, std::int64_t>>> pairs(r_max + 1);
  std::vector<double> reference(r_max + 1, 0.0);
  LatticeBox cube(3, 1);
  for (std::int64_t c = 0; c < cube.num_sites(); ++c) {
    const Site x = cube.site_at(c);
    const auto col = dirichlet_green_column(box, x);
    for (int dist = 0; dist <= r_max; ++dist)
      for (int k = 0; k < 3; ++k)
        for (int sg : {-1, 1}) {
          if (dist == 0 && (k > 0 || sg < 0)) continue;
          const Site y = add(x, unit(3, k, sg * dist));
          pairs[dist].push_back({box.site_index(x), box.site_index(y)});
          reference[dist] += spec.beta * col[box.site_index(y)];
        }
  }
  for (int dist = 0; dist <= r_max; ++dist) reference[dist] /= static_cast<double>(pairs[dist].size());

  std::vector<std::vector<double>> series(r_max + 1);
  std::vector<double> wick_a, wick_b;
  const std::int64_t o = box.site_index(Site{0, 0, 0}), e1 = box.site_index(Site{1, 0, 0});
  RealForm phi = m.zero();
  std::mt19937_64 rng(2024);
  for (std::int64_t i = 0; i < burn; ++i) m.langevin_step(phi, dt, rng);
  for (std::int64_t i = 0; i < steps; ++i) {
    m.langevin_step(phi, dt, rng);
    if (i % thin) continue;
    for (int dist = 0; dist <= r_max; ++dist) {
      double acc = 0.0;
      for (const auto& [a, b] : pairs[dist])
        for (int c = 0; c < nc; ++c) acc += phi.at(a, c) * phi.at(b, c);
      series[dist].push_back(acc / static_cast<double>(pairs[dist].size() * nc));
    }
    wick_a.push_back(phi.at(o, 0));
    wick_b.push_back(phi.at(e1, 0));
  }
  double worst = 0.0;
  std::string table;
  for (int dist = 0; dist <= r_max; ++dist) {
    auto est = batch_mean_estimate(series[dist], 32);
    const double rel = std::abs(est.mean / reference[dist] - 1.0);
    worst = std::max(worst, rel);
    table += " r=" + std::to_string(dist) + ": " + g4(est.mean) + " +- " + g3(est.se) + " vs " + g4(reference[dist]);
  }
  auto w = wick_square_covariance(wick_a, wick_b, 32);
  const bool wick_ok = std::abs(w.ratio.mean - 1.0) <= 3.0 * w.ratio.se;
  r.pass = worst <= 0.05 && wick_ok;
  r.detail = "covariance against beta G_Dir," + table + ", worst relative gap " + g3(worst) + "; Wick ratio " +
             g4(w.ratio.mean) + " +- " + g3(w.ratio.se);
  return r;
}

// ------------------------------------------------------------------ 10

Result hessian_smallness(const Options&) {
  Result r;
  r.name = "Hessian term ratios";
  LatticeBox box(3, 4);
  auto pool = std::make_shared<ChargePool>(enumerate_charges(box, 4), 4);
  const std::vector<double> betas{4.0, 16.0, 64.0};
  std::mt19937_64 rng(10);
  std::normal_distribution<double> n01;
  std::vector<RealForm> psis;
  for (int i = 0; i < 5; ++i) {
    RealForm psi(box, 2);
    for (std::int64_t s = 0; s < box.num_sites(); ++s)
      if (box.interior(box.site_at(s)))
        for (int c = 0; c < 3; ++c) psi.at(s, c) = n01(rng);
    psis.push_back(psi);
  }
  double var_worst = 0.0;
  bool h3_decreasing = true;
  std::vector<double> scaled_first, h3_first;
  for (std::size_t i = 0; i < psis.size(); ++i) {
    std::vector<double> scaled, h3;
    for (double beta : betas) {
      PotentialSpec spec;
      spec.beta = beta;
      spec.n_max = 2;
      spec.activity_order = 2;
      InterfaceModel m(box, spec, pool);
      const RealForm phi = m.zero();
      const double h1 = m.hessian_form(EnergyPart::kH1, phi, psis[i]);
      const double h2 = m.hessian_form(EnergyPart::kH2, phi, psis[i]);
      const double h3v = std::abs(m.hessian_form(EnergyPart::kH3, phi, psis[i]));
      scaled.push_back(h2 / h1 * std::sqrt(beta));
      h3.push_back(h3v / h1);
    }
    var_worst = std::max(var_worst, variation(scaled));
    for (std::size_t k = 1; k < h3.size(); ++k) h3_decreasing = h3_decreasing && h3[k] < h3[k - 1];
    if (i == 0) scaled_first = scaled, h3_first = h3;
  }
  r.pass = var_worst <= 2.0 && h3_decreasing;
  r.detail = "sqrt(beta) H2/H1 = " + g4(scaled_first[0]) + ", " + g4(scaled_first[1]) + ", " + g4(scaled_first[2]) +
             " (worst variation " + g4(var_worst) + "); H3/H1 = " + g3(h3_first[0]) + ", " + g3(h3_first[1]) + ", " +
             g3(h3_first[2]) + (h3_decreasing ? ", decreasing" : ", not decreasing");
  return r;
}

// ------------------------------------------------------------------ 11

double spectral_match() {
  PotentialSpec spec;
  spec.beta = 4.0;
  spec.n_max = 2;
  spec.charges = false;
  const int L = 4, d = 3, steps = 60;
  LatticeBox box(d, L);
  InterfaceModel m(box, spec);
  SpatialOperator op(m, KernelDomain::kPeriodic, false);
  const double dt = op.default_dt();
  Site y{2, -1, 0};
  auto slices = evolve_kernel(op, frozen_trajectory(m.zero(), dt, steps), y, {steps / 3, steps});
  const int N = box.side();
  double worst = 0.0;
  for (std::size_t i = 0; i < slices.size(); ++i) {
    auto ref = oracle::periodic_euler_kernel(d, L, spec.beta, spec.n_max, dt, i == 0 ? steps / 3 : steps);
    for (std::int64_t s = 0; s < box.num_sites(); ++s) {
      Site x = box.site_at(s);
      std::int64_t idx = 0;
      for (int k = 0; k < d; ++k) idx = idx * N + (((x[k] - y[k]) % N) + N) % N;
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
          worst = std::max(worst, std::abs(slices[i].entry(s, a, b) - (a == b ? ref[idx] : 0.0)));
    }
  }
  return worst;
}

NashAronsonReport on_diagonal(std::string& info) {
  LatticeBox box(3, 12);
  auto pool = std::make_shared<ChargePool>(enumerate_charges(box, 4), 4);
  PotentialSpec spec;
  spec.beta = 16.0;
  spec.n_max = 2;
  spec.activity_order = 1;
  InterfaceModel m(box, spec, pool);
  SpatialOperator op(m, KernelDomain::kPeriodic);
  const double dt = 1.0 / std::ceil(1.0 / std::min(op.default_dt(), m.default_dt()));
  RealForm phi = m.zero();
  std::mt19937_64 rng(1111);
  for (int i = 0; i < 200; ++i) m.langevin_step(phi, dt, rng);
  LangevinStream stream(m, phi, dt, 1112);
  std::vector<int> rec;
  for (int t = 1; t <= 64; t *= 2) rec.push_back(static_cast<int>(std::lround(t / dt)));
  auto slices = evolve_kernel(op, SnapshotFn(std::ref(stream)), dt, Site{0, 0, 0}, rec);
  info = std::to_string(m.charges().size()) + " charges, dt " + g3(dt);
  return nash_aronson_check(slices, box);
}

double reversal_gap() {
  auto pool = std::make_shared<ChargePool>(enumerate_charges(LatticeBox(3, 3), 4), 4);
  PotentialSpec spec;
  spec.beta = 4.0;
  spec.n_max = 1;
  LatticeBox box(3, 3);
  InterfaceModel m(box, spec, pool);
  double worst = 0.0;
  for (auto domain : {KernelDomain::kDirichlet, KernelDomain::kPeriodic}) {
    SpatialOperator op(m, domain);
    const int steps = 40;
    auto traj = langevin_trajectory(m, m.zero(), m.default_dt(), steps, 31);
    auto rev = reversed(traj);
    const std::vector<std::pair<Site, Site>> pairs{{{1, 0, -1}, {-1, 1, 0}}, {{0, 0, 0}, {1, 1, 1}}, {{2, 0, 0}, {0, 0, 0}}};
    for (const auto& [x, y] : pairs) {
      auto fwd = evolve_kernel(op, traj, y, {steps}).front();
      auto bwd = evolve_kernel(op, rev, x, {steps}).front();
      const std::int64_t xs = box.site_index(x), ys = box.site_index(y);
      double scale = 0.0, gap = 0.0;
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
          gap = std::max(gap, std::abs(fwd.entry(xs, a, b) - bwd.entry(ys, b, a)));
          scale = std::max(scale, std::abs(fwd.entry(xs, a, b)));
        }
      worst = std::max(worst, gap / std::max(scale, 1e-300));
    }
  }
  return worst;
}

double factorization_gap() {
  LatticeBox box(3, 2);
  auto pool = std::make_shared<ChargePool>(enumerate_charges(box, 4), 4);
  PotentialSpec spec;
  spec.beta = 2.0;
  spec.n_max = 1;
  InterfaceModel m(box, spec, pool);
  SpatialOperator op(m, KernelDomain::kPeriodic);
  auto traj = langevin_trajectory(m, m.zero(), m.default_dt(), 100, 41);
  const auto& qs = m.charges();
  if (qs.size() < 2) return 1e300;
  return factorization_check(op, traj, qs.front(), qs[qs.size() / 2], 4096, 42).max_residual;
}

Result heat_kernel(const Options&) {
  Result r;
  r.name = "heat kernel";
  const double spectral = spectral_match();
  std::string info;
  auto na = on_diagonal(info);
  const double rev = reversal_gap();
  const double fac = factorization_gap();
  r.pass = spectral < 1e-10 && na.on_diagonal_bounded && rev < 1e-12 && fac < 1e-8;
  std::string diag;
  for (double v : na.on_diagonal) diag += " " + g4(v);
  r.detail = "spectral gap " + g3(spectral) + "; |P(t,0;0)| t^{3/2} over t = 1..64:" + diag + " (" + info +
             ", upper-half growth exponent " + g3(na.growth_exponent) +
             (na.on_diagonal_bounded ? ", bounded" : ", growing") + "); reversal gap " + g3(rev) +
             "; factorization residual " + g3(fac);
  return r;
}

// ------------------------------------------------------------------ 12

Result lattice_sums(const Options&) {
  Result r;
  r.name = "lattice sum tables";
  std::vector<double> conv, dbl, two;
  for (int m : {10, 20, 40}) conv.push_back(convolution_sum(SumSpec{2, 2, 0, 0, 3, 4 * m}, Site{m, 0, 0}).ratio);
  for (int m : {8, 16, 32}) dbl.push_back(double_sum_check(Site{m, 0, 0}, 0.0, 4 * m).ratio);
  for (const auto& [y1, y2] : two_point_grid()) two.push_back(two_point_kernel_sum(y1, y2, 0.0, 0.0, 72).ratio);
  const double vc = variation(conv), vd = variation(dbl), vt = variation(two);
  r.pass = vc < 2.0 && vd < 2.0 && vt < 2.0;
  r.detail = "convolution variation " + g4(vc) + (vc < 2 ? "" : " (fails)") + ", double sum variation " + g4(vd) +
             (vd < 2 ? "" : " (fails)") + ", two-point variation " + g4(vt) + (vt < 2 ? "" : " (fails)");
  return r;
}

// ------------------------------------------------------------------ 13

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

int run_cli(const Options& opt, const std::string& args, const fs::path& log) {
  const std::string cmd = "\"" + opt.cli_path + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// files of a run directory, by name
std::map<std::string, std::string> contents(const fs::path& dir) {
  std::map<std::string, std::string> m;
  if (!fs::exists(dir)) return m;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) m[e.path().filename().string()] = slurp(e.path());
  return m;
}

Result reproducibility(const Options& opt) {
  Result r;
  r.name = "reproducible outputs";
  if (opt.cli_path.empty() || !fs::exists(opt.cli_path)) {
    r.detail = "command-line tool not found";
    return r;
  }
  const fs::path root = opt.work_dir / "reproducibility";
  fs::remove_all(root);
  fs::create_directories(root);
  struct Job {
    std::string sub, config;
  };
  const std::vector<Job> jobs{
      {"green", "d = 3\nradius = 6\ntol = 1e-8\n"},
      {"charges", "d = 3\nL = 2\ncap = 4\nbetas = 16,64\n"},
      {"verify-sums", "table = convolution\npoints = 2,4\n"},
      {"simulate-spin", "model = villain\nbeta = 1\nsweeps = 1000\nburn_in = 100\nL = 6\n"},
      {"simulate-spin", "model = xy\nbeta = 1\nsweeps = 2000\nburn_in = 100\nlattice = graph\ngraph = triangle\n"},
      {"simulate-interface", "beta = 3\nL = 3\nsteps = 2000\nburn_in = 100\n"},
      {"metric-graph", "graph = single-edge\nbeta = 1\nn_list = 1,2,4\n"},
      {"heat-kernel", "beta = 4\nL = 2\nladder = 0.5,1\ntrajectory = langevin\ncharges = true\n"},
  };
  int identical = 0, differing = 0, errors = 0;
  std::string notes;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const fs::path cfg = root / ("job" + std::to_string(j) + ".conf");
    std::ofstream(cfg) << jobs[j].config;
    std::map<std::string, std::string> outs[2];
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path dir = root / ("job" + std::to_string(j) + "_" + std::to_string(rep));
      const int st = run_cli(opt, jobs[j].sub + " --config \"" + cfg.string() + "\" --seed 7 --threads 1 --reproducible --out-dir \"" +
                                      dir.string() + "\"",
                             root / ("job" + std::to_string(j) + "_" + std::to_string(rep) + ".log"));
      if (st != 0) {
        ++errors;
        notes += " " + jobs[j].sub + " exited " + std::to_string(st);
      }
      outs[rep] = contents(dir);
    }
    if (!outs[0].empty() && outs[0] == outs[1])
      ++identical;
    else {
      ++differing;
      notes += " " + jobs[j].sub + " differs";
    }
  }
  // fit-decay on a spin estimate table
  {
    const fs::path input = root / "job3_0" / "estimates.csv";
    const fs::path cfg = root / "fit.conf";
    std::ofstream(cfg) << "input = " << input.string() << "\nobservable = ss\nbootstrap = 200\n";
    std::map<std::string, std::string> outs[2];
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path dir = root / ("fit_" + std::to_string(rep));
      run_cli(opt, "fit-decay --config \"" + cfg.string() + "\" --seed 7 --reproducible --out-dir \"" + dir.string() + "\"",
              root / "fit.log");
      outs[rep] = contents(dir);
    }
    if (!outs[0].empty() && outs[0] == outs[1])
      ++identical;
    else {
      ++differing;
      notes += " fit-decay differs";
    }
  }
  // stop and resume against one uninterrupted run
  bool resume_ok = false, reject_ok = false;
  {
    const fs::path cfg = root / "resume.conf";
    const std::string base = "model = villain\nbeta = 1\nsweeps = 1500\nburn_in = 100\nL = 3\ncheckpoint_every = 200\n";
    std::ofstream(cfg) << base;
    const fs::path full = root / "resume_full", part = root / "resume_part";
    const std::string common = " --seed 9 --threads 1 --reproducible";
    run_cli(opt, "simulate-spin --config \"" + cfg.string() + "\"" + common + " --out-dir \"" + full.string() + "\"",
            root / "resume_full.log");
    run_cli(opt,
            "simulate-spin --config \"" + cfg.string() + "\"" + common + " --stop-after 700 --out-dir \"" +
                part.string() + "\"",
            root / "resume_stop.log");
    const int st = run_cli(opt,
                           "simulate-spin --config \"" + cfg.string() + "\"" + common + " --resume \"" +
                               (part / "checkpoint.bin").string() + "\" --out-dir \"" + part.string() + "\"",
                           root / "resume_cont.log");
    const std::string a = slurp(full / "estimates.csv"), b = slurp(part / "estimates.csv");
    resume_ok = st == 0 && !a.empty() && a == b;
    const fs::path changed = root / "resume_changed.conf";
    std::string alt = base;
    alt.replace(alt.find("beta = 1"), 8, "beta = 2");
    std::ofstream(changed) << alt;
    const int rej = run_cli(opt,
                            "simulate-spin --config \"" + changed.string() + "\"" + common + " --resume \"" +
                                (part / "checkpoint.bin").string() + "\" --out-dir \"" + (root / "resume_rej").string() +
                                "\"",
                            root / "resume_rej.log");
    reject_ok = rej != 0 && slurp(root / "resume_rej.log").find("beta") != std::string::npos;
  }
  r.pass = differing == 0 && errors == 0 && resume_ok && reject_ok;
  r.detail = std::to_string(identical) + " subcommand runs bit-identical, " + std::to_string(differing) +
             " differing, " + std::to_string(errors) + " errors; resume " + (resume_ok ? "matches" : "differs") +
             "; changed config " + (reject_ok ? "rejected" : "not rejected") + notes;
  return r;
}

struct Entry {
  const char* name;
  Result (*fn)(const Options&);
};

const Entry kCriteria[] = {
    {"exterior calculus identities", dec_identities},
    {"Poincare primitives", poincare},
    {"lattice Green's function", green},
    {"activity decay constant", activity},
    {"quadrature against Monte Carlo", quadrature_vs_mc},
    {"decay exponents", decay_exponents},
    {"Dunlop-Newman inequality", dunlop_newman},
    {"metric-graph convergence", metric_graph},
    {"Gaussian interface covariance", gaussian_interface},
    {"Hessian term ratios", hessian_smallness},
    {"heat kernel", heat_kernel},
    {"lattice sum tables", lattice_sums},
    {"reproducible outputs", reproducibility},
};

}  // namespace

int criterion_count() { return static_cast<int>(std::size(kCriteria)); }

Result run_criterion(int id, const Options& opt) {
  if (id < 1 || id > criterion_count()) throw InvalidArgument("no acceptance criterion " + std::to_string(id));
  const auto start = std::chrono::steady_clock::now();
  Result r;
  try {
    r = kCriteria[id - 1].fn(opt);
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail = std::string("error: ") + e.what();
  }
  r.id = id;
  r.name = kCriteria[id - 1].name;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::string format_line(const Result& r) {
  char head[96];
  std::snprintf(head, sizeof head, "%s %2d  %-32s %7.1fs  ", r.pass ? "PASS" : "FAIL", r.id, r.name.c_str(), r.seconds);
  return head + r.detail;
}

std::vector<std::pair<Site, Site>> two_point_grid() {
  const int targets[3][3] = {{8, 8, 4}, {16, 8, 12}, {16, 16, 24}};
  std::vector<std::pair<Site, Site>> out;
  for (const auto& t : targets) {
    Site y1{t[0], 0, 0}, best;
    double best_err = 1e300;
    for (int a = -t[1] - 1; a <= t[1] + 1; ++a)
      for (int b = 0; b <= t[1] + 1; ++b) {
        Site y2{a, b, 0};
        const double n2 = std::hypot(a, b), n12 = std::hypot(t[0] - a, b);
        const double err = std::pow(n2 - t[1], 2) + std::pow(n12 - t[2], 2);
        if (err < best_err) best_err = err, best = y2;
      }
    out.push_back({y1, best});
  }
  return out;
}

}  // namespace vwb::acceptance
