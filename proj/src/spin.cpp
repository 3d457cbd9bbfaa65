#include "vwb/spin.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>

#include "vwb/fft.hpp"
#include "vwb/green.hpp"

namespace vwb {

std::string to_string(SpinModel m) { return m == SpinModel::kXY ? "xy" : "villain"; }

SpinModel parse_spin_model(const std::string& s) {
  if (s == "xy" || s == "XY") return SpinModel::kXY;
  if (s == "villain" || s == "Villain") return SpinModel::kVillain;
  throw InvalidArgument("unknown spin model '" + s + "'");
}

double villain_weight(double theta, double beta, int M) {
  if (M < 1) throw InvalidArgument("villain_weight: M must be at least 1");
  double s = 0.0;
  for (int m = -M; m <= M; ++m) {
    const double t = theta + 2.0 * M_PI * m;
    s += std::exp(-0.5 * beta * t * t);
  }
  return s;
}

double villain_truncation_bound(double beta, int M) { return std::exp(-2.0 * M_PI * M_PI * beta * M); }

double wrap_angle(double theta) {
  double t = std::fmod(theta + M_PI, 2.0 * M_PI);
  if (t < 0.0) t += 2.0 * M_PI;
  t -= M_PI;
  return t >= M_PI ? -M_PI : t;
}

// ---------------------------------------------------------------- graphs

void validate_graph(const RootedGraph& g) {
  if (g.num_vertices < 1) throw InvalidArgument("graph: no vertices");
  if (g.root < 0 || g.root >= g.num_vertices) throw InvalidArgument("graph: root not present");
  std::vector<std::vector<int>> adj(g.num_vertices);
  for (auto [a, b] : g.edges) {
    if (a < 0 || b < 0 || a >= g.num_vertices || b >= g.num_vertices || a == b)
      throw InvalidArgument("graph: bad edge");
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<char> seen(g.num_vertices, 0);
  std::deque<int> todo{g.root};
  seen[g.root] = 1;
  int count = 1;
  while (!todo.empty()) {
    int v = todo.front();
    todo.pop_front();
    for (int w : adj[v])
      if (!seen[w]) {
        seen[w] = 1;
        ++count;
        todo.push_back(w);
      }
  }
  if (count != g.num_vertices) throw InvalidArgument("graph: not connected");
}

RootedGraph single_edge_graph() { return RootedGraph{2, {{0, 1}}, 0, 2, 1}; }

RootedGraph chain_graph(int free_vertices) {
  if (free_vertices < 1) throw InvalidArgument("chain_graph: need a free vertex");
  RootedGraph g{free_vertices + 1, {}, 0, free_vertices + 1, 1};
  for (int i = 0; i < free_vertices; ++i) g.edges.push_back({i, i + 1});
  return g;
}

RootedGraph star_graph(int leaves) {
  if (leaves < 1) throw InvalidArgument("star_graph: need a leaf");
  RootedGraph g{leaves + 2, {{0, 1}}, 0, leaves + 2, 1};
  for (int i = 0; i < leaves; ++i) g.edges.push_back({1, i + 2});
  return g;
}

RootedGraph triangle_graph() { return RootedGraph{3, {{0, 1}, {1, 2}, {0, 2}}, 0, 3, 1}; }

RootedGraph build_metric_graph(const RootedGraph& g, int n) {
  if (n < 1) throw InvalidArgument("build_metric_graph: n must be at least 1");
  validate_graph(g);
  RootedGraph out{g.num_vertices, {}, g.root, g.num_vertices, g.subdivision * n};
  for (auto [a, b] : g.edges) {
    int prev = a;
    for (int i = 1; i < n; ++i) {
      const int v = out.num_vertices++;
      out.edges.push_back({prev, v});
      prev = v;
    }
    out.edges.push_back({prev, b});
  }
  return out;
}

// ---------------------------------------------------------------- weights

EdgeLogWeight::EdgeLogWeight(SpinModel model, double beta, int wrap_M, bool tabulated)
    : model_(model), beta_(beta), M_(wrap_M), tab_(tabulated && model == SpinModel::kVillain) {
  if (!(beta >= 0.0)) throw InvalidArgument("EdgeLogWeight: beta must be non-negative");
  if (wrap_M < 1) throw InvalidArgument("EdgeLogWeight: M must be at least 1");
  if (tab_) {
    const int N = 4096;
    h_ = 2.0 * M_PI / N;
    f_.resize(N + 1);
    df_.resize(N + 1);
    for (int i = 0; i <= N; ++i) {
      const double t = -M_PI + i * h_;
      double v = 0.0, dv = 0.0;
      for (int m = -M_; m <= M_; ++m) {
        const double u = t + 2.0 * M_PI * m;
        const double e = std::exp(-0.5 * beta_ * u * u);
        v += e;
        dv += -beta_ * u * e;
      }
      f_[i] = std::log(v);
      df_[i] = dv / v;
    }
  }
}

double EdgeLogWeight::exact(double diff) const {
  if (model_ == SpinModel::kXY) return beta_ * std::cos(diff);
  return std::log(villain_weight(wrap_angle(diff), beta_, M_));
}

double EdgeLogWeight::operator()(double diff) const {
  if (!tab_) return exact(diff);
  const double t = wrap_angle(diff) + M_PI;
  int i = static_cast<int>(t / h_);
  if (i >= static_cast<int>(f_.size()) - 1) i = static_cast<int>(f_.size()) - 2;
  const double s = t / h_ - i;
  // cubic Hermite
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * f_[i] + (s3 - 2 * s2 + s) * h_ * df_[i] + (-2 * s3 + 3 * s2) * f_[i + 1] +
         (s3 - s2) * h_ * df_[i + 1];
}

// ---------------------------------------------------------------- systems

SpinSystem spin_system(const RootedGraph& g) {
  validate_graph(g);
  SpinSystem s;
  s.n = g.num_vertices;
  s.nbrs.assign(s.n, {});
  s.frozen.assign(s.n, 0);
  s.frozen[g.root] = 1;
  for (auto [a, b] : g.edges) {
    s.nbrs[a].push_back(b);
    s.nbrs[b].push_back(a);
  }
  return s;
}

SpinSystem spin_system(const LatticeBox& box) {
  SpinSystem s;
  s.n = static_cast<int>(box.num_sites());
  s.nbrs.assign(s.n, {});
  s.frozen.assign(s.n, 0);
  for (int i = 0; i < s.n; ++i) {
    Site x = box.site_at(i);
    s.frozen[i] = box.on_boundary(x);
    for (int k = 0; k < box.d; ++k)
      for (int st : {-1, 1}) {
        const int v = x[k] + st;
        if (v >= -box.L && v <= box.L) s.nbrs[i].push_back(i + st * static_cast<int>(box.stride(k)));
      }
  }
  return s;
}

void validate(const ChainParams& p) {
  if (!(p.beta >= 0.0)) throw InvalidArgument("chain: beta must be non-negative");
  if (p.wrap_M < 1) throw InvalidArgument("chain: wrap truncation must be at least 1");
  if (!(p.width > 0.0 && p.width <= M_PI)) throw InvalidArgument("chain: proposal width must lie in (0, pi]");
  if (p.sweeps < 1 || p.burn_in < 0 || p.thin < 1) throw InvalidArgument("chain: bad sweep counts");
}

double metropolis_sweep(const SpinSystem& sys, SpinConfig& cfg, const EdgeLogWeight& w, double width, Rng& rng) {
  std::uniform_real_distribution<double> step(-width, width), unif(0.0, 1.0);
  std::int64_t tried = 0, accepted = 0;
  for (int i = 0; i < sys.n; ++i) {
    if (sys.frozen[i]) continue;
    const double old = cfg.theta[i];
    const double prop = wrap_angle(old + step(rng));
    double delta = 0.0;
    for (int j : sys.nbrs[i]) delta += w(prop - cfg.theta[j]) - w(old - cfg.theta[j]);
    const double u = unif(rng);
    ++tried;
    if (delta >= 0.0 || u < std::exp(delta)) {
      cfg.theta[i] = prop;
      ++accepted;
    }
  }
  return tried ? static_cast<double>(accepted) / tried : 1.0;
}

std::int64_t ChainRecord::count() const {
  const std::size_t row = groups.size() * kNumPairObs;
  return row ? static_cast<std::int64_t>(rows.size() / row) : 0;
}

void record_raw_sample(const SpinConfig& cfg, ChainRecord& rec) {
  for (const auto& g : rec.groups) {
    double v[kNumPairObs] = {};
    for (auto [a, b] : g.pairs) {
      const double ta = cfg.theta[a], tb = cfg.theta[b];
      const double ca = std::cos(ta), cb = std::cos(tb), sa = std::sin(ta), sb = std::sin(tb);
      v[kObsCC] += ca * cb;
      v[kObsCX] += ca;
      v[kObsCY] += cb;
      v[kObsSS] += sa * sb;
      v[kObsCosMinus] += std::cos(ta - tb);
      v[kObsCosPlus] += std::cos(ta + tb);
      v[kObsSX] += sa;
      v[kObsSY] += sb;
    }
    for (double x : v) rec.rows.push_back(x / static_cast<double>(g.pairs.size()));
  }
}

ChainRecord run_metropolis_chain(const SpinSystem& sys, const ChainParams& p, const std::vector<PairGroup>& groups,
                                 bool tabulated_weights, SpinConfig* final_config) {
  validate(p);
  EdgeLogWeight w(p.model, p.beta, p.wrap_M, tabulated_weights);
  Rng rng(p.seed);
  SpinConfig cfg;
  if (final_config && static_cast<int>(final_config->theta.size()) == sys.n)
    cfg = *final_config;  // resume
  else
    cfg.theta.assign(sys.n, 0.0);
  for (int i = 0; i < sys.n; ++i)
    if (sys.frozen[i]) cfg.theta[i] = 0.0;
  ChainRecord rec;
  rec.groups = groups;
  for (std::int64_t s = 0; s < p.burn_in; ++s) metropolis_sweep(sys, cfg, w, p.width, rng);
  double acc = 0.0;
  for (std::int64_t s = 0; s < p.sweeps; ++s) {
    acc += metropolis_sweep(sys, cfg, w, p.width, rng);
    if ((s + 1) % p.thin == 0) record_raw_sample(cfg, rec);
  }
  rec.acceptance = acc / static_cast<double>(p.sweeps);
  if (final_config) *final_config = cfg;
  return rec;
}

// ---------------------------------------------------------------- augmented Villain sampler

AugmentedVillainSampler::AugmentedVillainSampler(const LatticeBox& box, double beta, std::uint64_t seed)
    : box_(box), beta_(beta), rng_(seed) {
  if (!(beta > 0.0)) throw InvalidArgument("AugmentedVillainSampler: beta must be positive");
  if (box.L < 2) throw InvalidArgument("AugmentedVillainSampler: need L >= 2");
  const int d = box.d;
  n_ = 2 * box.L - 1;
  const std::int64_t N = box.num_sites();
  box_to_interior_.assign(N, -1);
  for (std::int64_t s = 0; s < N; ++s) {
    if (box.interior(box.site_at(s))) {
      box_to_interior_[s] = static_cast<int>(interior_.size());
      interior_.push_back(s);  // row-major order of the interior matches the transform layout
    }
  }
  std::vector<double> eig(n_);
  for (int k = 0; k < n_; ++k) eig[k] = 2.0 * (1.0 - std::cos(M_PI * (k + 1) / (n_ + 1)));
  lambda_.resize(interior_.size());
  std::vector<int> c(d, 0);
  for (std::size_t i = 0; i < interior_.size(); ++i) {
    double l = 0.0;
    for (int k = 0; k < d; ++k) l += eig[c[k]];
    lambda_[i] = l;
    for (int k = d - 1; k >= 0; --k) {
      if (++c[k] < n_) break;
      c[k] = 0;
    }
  }
  theta_.assign(N, 0.0);
  mu_.assign(N, 0.0);
  current_.assign(N * d, 0);
  const int bins = 1024;
  skip_bound_.resize(bins);
  for (int b = 0; b < bins; ++b) {
    const double r = M_PI * (b + 1) / bins;
    double s = 0.0;
    for (int j = 1; j <= 6; ++j) s += 2.0 * std::exp(-beta_ * (2.0 * M_PI * M_PI * j * j - 2.0 * M_PI * j * r));
    skip_bound_[b] = s;
  }
}

void AugmentedVillainSampler::update_currents() {
  const int d = box_.d;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int J = std::max(4, static_cast<int>(std::ceil(2.0 / (M_PI * std::sqrt(beta_)))) + 2);
  std::vector<double> p(2 * J + 1);
  const std::int64_t N = box_.num_sites();
  std::vector<std::int64_t> stride(d);
  for (int k = 0; k < d; ++k) stride[k] = box_.stride(k);
  std::vector<int> x(d, -box_.L);
  for (std::int64_t s = 0; s < N; ++s) {
    if (s > 0)
      for (int k = d - 1; k >= 0; --k) {
        if (++x[k] <= box_.L) break;
        x[k] = -box_.L;
      }
    const bool xb = box_to_interior_[s] < 0;
    for (int k = 0; k < d; ++k) {
      if (x[k] == box_.L) continue;
      const std::int64_t t = s + stride[k];
      if (xb && box_to_interior_[t] < 0) continue;
      const double a = theta_[t] - theta_[s];
      const long m0 = std::lround(-a / (2.0 * M_PI));
      const double r = a + 2.0 * M_PI * m0;
      const double u = unif(rng_);
      int bin = static_cast<int>(std::abs(r) / M_PI * 1024.0);
      bin = std::min(bin, 1023);
      const double B = skip_bound_[bin];
      long m = m0;
      if (!(B < 1.0 && u >= B)) {
        double S = 0.0;
        for (int j = -J; j <= J; ++j) {
          if (j == 0) {
            p[J] = 0.0;
            continue;
          }
          const double q = r + 2.0 * M_PI * j;
          p[j + J] = std::exp(-0.5 * beta_ * (q * q - r * r));
          S += p[j + J];
        }
        double keep;
        if (B < 1.0)
          keep = (1.0 / (1.0 + S) - (1.0 - B)) / B;  // u < B already happened
        else
          keep = 1.0 / (1.0 + S);
        const double v = unif(rng_);
        if (v >= keep) {
          double w = unif(rng_) * S;
          int j = -J;
          for (; j < J; ++j) {
            if (j == 0) continue;
            w -= p[j + J];
            if (w < 0.0) break;
          }
          if (j == 0) j = 1;
          m = m0 + j;
        }
      }
      current_[s * d + k] = static_cast<int>(m);
    }
  }
}

void AugmentedVillainSampler::update_angles() {
  const int d = box_.d;
  const std::size_t n = interior_.size();
  std::vector<double> buf(n), noise(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::int64_t s = interior_[i];
    double r = 0.0;
    for (int k = 0; k < d; ++k) r += current_[s * d + k] - current_[(s - box_.stride(k)) * d + k];
    buf[i] = 2.0 * M_PI * r;
  }
  std::vector<int> dims(d, n_);
  const double c = std::pow(2.0 * (n_ + 1), -0.5 * d);
  dst1(buf, dims);
  for (std::size_t i = 0; i < n; ++i) buf[i] *= c * c / lambda_[i];
  dst1(buf, dims);
  std::normal_distribution<double> gauss;
  for (std::size_t i = 0; i < n; ++i) noise[i] = gauss(rng_) * c / std::sqrt(beta_ * lambda_[i]);
  dst1(noise, dims);
  for (std::size_t i = 0; i < n; ++i) {
    const std::int64_t s = interior_[i];
    mu_[s] = buf[i];
    theta_[s] = wrap_angle(buf[i] + noise[i]);
  }
}

void AugmentedVillainSampler::sweep() {
  update_currents();
  update_angles();
}

SpinConfig AugmentedVillainSampler::config() const { return SpinConfig{theta_}; }

void AugmentedVillainSampler::set_config(const SpinConfig& cfg) {
  if (cfg.theta.size() != theta_.size()) throw InvalidArgument("AugmentedVillainSampler: config size mismatch");
  for (std::size_t s = 0; s < theta_.size(); ++s) theta_[s] = box_to_interior_[s] < 0 ? 0.0 : wrap_angle(cfg.theta[s]);
}

void AugmentedVillainSampler::prepare_green(const std::vector<PairGroup>& groups) const {
  std::set<std::int64_t> sites;
  for (const auto& g : groups)
    for (auto [a, b] : g.pairs) {
      sites.insert(a);
      sites.insert(b);
    }
  for (std::int64_t s : sites) {
    if (box_to_interior_[s] < 0) continue;
    if (green_.count({s, s})) continue;
    auto col = dirichlet_green_column(box_, box_.site_at(s));
    for (std::int64_t t : sites) {
      green_[{s, t}] = col[t];
      green_[{t, s}] = col[t];
    }
  }
}

double AugmentedVillainSampler::green(std::int64_t a, std::int64_t b) const {
  if (box_to_interior_[a] < 0 || box_to_interior_[b] < 0) return 0.0;
  return green_.at({a, b});
}

void AugmentedVillainSampler::record(ChainRecord& rec) const {
  if (green_.empty()) prepare_green(rec.groups);
  for (const auto& g : rec.groups) {
    double v[kNumPairObs] = {};
    for (auto [a, b] : g.pairs) {
      const double gaa = green(a, a), gbb = green(b, b), gab = green(a, b);
      const double vm = (gaa + gbb - 2.0 * gab) / beta_, vp = (gaa + gbb + 2.0 * gab) / beta_;
      const double ma = mu_[a], mb = mu_[b];
      const double cm = std::exp(-0.5 * vm) * std::cos(ma - mb);
      const double cp = std::exp(-0.5 * vp) * std::cos(ma + mb);
      const double ea = std::exp(-0.5 * gaa / beta_), eb = std::exp(-0.5 * gbb / beta_);
      v[kObsCC] += 0.5 * (cm + cp);
      v[kObsSS] += 0.5 * (cm - cp);
      v[kObsCosMinus] += cm;
      v[kObsCosPlus] += cp;
      v[kObsCX] += ea * std::cos(ma);
      v[kObsCY] += eb * std::cos(mb);
      v[kObsSX] += ea * std::sin(ma);
      v[kObsSY] += eb * std::sin(mb);
    }
    for (double x : v) rec.rows.push_back(x / static_cast<double>(g.pairs.size()));
  }
}

ChainRecord run_augmented_chain(const LatticeBox& box, const ChainParams& p, const std::vector<PairGroup>& groups,
                                SpinConfig* final_config) {
  validate(p);
  if (p.model != SpinModel::kVillain) throw InvalidArgument("run_augmented_chain: Villain model only");
  AugmentedVillainSampler smp(box, p.beta, p.seed);
  if (final_config && final_config->theta.size() == static_cast<std::size_t>(box.num_sites()))
    smp.set_config(*final_config);
  ChainRecord rec;
  rec.groups = groups;
  for (std::int64_t s = 0; s < p.burn_in; ++s) smp.sweep();
  for (std::int64_t s = 0; s < p.sweeps; ++s) {
    smp.sweep();
    if ((s + 1) % p.thin == 0) smp.record(rec);
  }
  rec.acceptance = 1.0;
  if (final_config) *final_config = smp.config();
  return rec;
}

// ---------------------------------------------------------------- estimators

std::vector<PairEstimate> estimate_correlations(const ChainRecord& a, const ChainRecord& b, int batches) {
  if (a.groups.size() != b.groups.size()) throw InvalidArgument("estimate_correlations: chains record different pairs");
  if (a.count() < 100 || b.count() < 100) throw InsufficientData("estimate_correlations: need at least 100 samples per chain");
  const int ng = static_cast<int>(a.groups.size());
  const int cols = ng * kNumPairObs;
  std::vector<PairEstimate> out;
  for (int g = 0; g < ng; ++g) {
    std::vector<std::vector<double>> vars;
    for (const ChainRecord* r : {&a, &b})
      for (int o = 0; o < kNumPairObs; ++o) vars.push_back(column_batch_means(r->rows, cols, g * kNumPairObs + o, batches));
    auto A = [](const std::vector<double>& m, int o) { return m[o]; };
    auto B = [](const std::vector<double>& m, int o) { return m[kNumPairObs + o]; };
    auto avg = [&](int o) { return [&, o](const std::vector<double>& m) { return 0.5 * (A(m, o) + B(m, o)); }; };
    auto product = [&](const std::vector<double>& m) {
      return 0.5 * (A(m, kObsCX) * B(m, kObsCY) + B(m, kObsCX) * A(m, kObsCY));
    };
    PairEstimate e;
    e.separation = a.groups[g].separation;
    e.cc = jackknife(vars, avg(kObsCC));
    e.cx = jackknife(vars, avg(kObsCX));
    e.cy = jackknife(vars, avg(kObsCY));
    e.ss = jackknife(vars, avg(kObsSS));
    e.cos_minus = jackknife(vars, avg(kObsCosMinus));
    e.cos_plus = jackknife(vars, avg(kObsCosPlus));
    e.sx = jackknife(vars, avg(kObsSX));
    e.product = jackknife(vars, product);
    e.truncated = jackknife(vars, [&](const std::vector<double>& m) { return avg(kObsCC)(m) - product(m); });
    e.dn_residual = jackknife(vars, [&](const std::vector<double>& m) {
      const double cc = avg(kObsCC)(m), p = product(m), ss = avg(kObsSS)(m);
      return (cc - p) * (cc + p) - ss * ss;
    });
    for (Estimate* x : {&e.cc, &e.cx, &e.cy, &e.ss, &e.cos_minus, &e.cos_plus, &e.sx, &e.product, &e.truncated,
                        &e.dn_residual}) {
      x->samples = a.count() + b.count();
      x->batch_size = std::min(a.count(), b.count()) / batches;
    }
    out.push_back(e);
  }
  return out;
}

DunlopNewman dunlop_newman_check(const Estimate& cc, const Estimate& product, const Estimate& ss) {
  DunlopNewman r;
  const double c = cc.mean, p = product.mean, s = ss.mean;
  r.residual = (c - p) * (c + p) - s * s;
  r.se = std::sqrt(std::pow(2.0 * c * cc.se, 2) + std::pow(2.0 * p * product.se, 2) + std::pow(2.0 * s * ss.se, 2));
  return r;
}

// ---------------------------------------------------------------- quadrature

namespace {

// kernel tables indexed by the grid difference (i - j) mod N, one per edge
ExactCorrelations quadrature_on_grid(const RootedGraph& g, const std::vector<std::vector<double>>& kernels, int N,
                                     int x, int y) {
  std::vector<int> free;
  for (int v = 0; v < g.num_vertices; ++v)
    if (v != g.root) free.push_back(v);
  const int f = static_cast<int>(free.size());
  std::vector<double> cs(N), sn(N);
  for (int i = 0; i < N; ++i) {
    cs[i] = std::cos(2.0 * M_PI * i / N);
    sn[i] = std::sin(2.0 * M_PI * i / N);
  }
  std::vector<int> idx(g.num_vertices, 0);
  double Z = 0, cc = 0, cx = 0, cy = 0, ss = 0, sx = 0;
  std::int64_t total = 1;
  for (int k = 0; k < f; ++k) total *= N;
  std::vector<int> c(f, 0);
  for (std::int64_t t = 0; t < total; ++t) {
    for (int k = 0; k < f; ++k) idx[free[k]] = c[k];
    double w = 1.0;
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
      const int di = ((idx[g.edges[e].first] - idx[g.edges[e].second]) % N + N) % N;
      w *= kernels[e][di];
    }
    const int ix = idx[x], iy = idx[y];
    Z += w;
    cc += w * cs[ix] * cs[iy];
    cx += w * cs[ix];
    cy += w * cs[iy];
    ss += w * sn[ix] * sn[iy];
    sx += w * sn[ix];
    for (int k = f - 1; k >= 0; --k) {
      if (++c[k] < N) break;
      c[k] = 0;
    }
  }
  ExactCorrelations r;
  r.cc = cc / Z;
  r.cx = cx / Z;
  r.cy = cy / Z;
  r.ss = ss / Z;
  r.sx = sx / Z;
  r.cos_minus = r.cc + r.ss;
  r.cos_plus = r.cc - r.ss;
  r.grid = N;
  return r;
}

double max_change(const ExactCorrelations& a, const ExactCorrelations& b) {
  return std::max({std::abs(a.cc - b.cc), std::abs(a.cx - b.cx), std::abs(a.cy - b.cy), std::abs(a.ss - b.ss),
                   std::abs(a.sx - b.sx)});
}

template <class KernelFn>
ExactCorrelations converge(const RootedGraph& g, int x, int y, double tol, KernelFn kernels_for) {
  validate_graph(g);
  if (x < 0 || y < 0 || x >= g.num_vertices || y >= g.num_vertices) throw InvalidArgument("quadrature: bad vertex");
  if (g.num_vertices - 1 > 3) throw ResourceLimit("quadrature: more than three free vertices");
  const int f = g.num_vertices - 1;
  ExactCorrelations prev;
  bool have = false;
  for (int N = 32;; N *= 2) {
    if (std::pow(static_cast<double>(N), f) > 3e8) break;
    auto cur = quadrature_on_grid(g, kernels_for(N), N, x, y);
    if (have) {
      cur.change = max_change(cur, prev);
      if (cur.change <= tol) return cur;
    }
    prev = cur;
    have = true;
  }
  throw AccuracyError("quadrature: grid refinement did not reach the tolerance", prev.change);
}

std::vector<double> xy_kernel(double kappa, int N) {
  std::vector<double> t(N);
  for (int i = 0; i < N; ++i) t[i] = std::exp(kappa * (std::cos(2.0 * M_PI * i / N) - 1.0));
  return t;
}

std::vector<double> convolution_power(const std::vector<double>& k, int n) {
  const int N = static_cast<int>(k.size());
  std::vector<double> acc = k, next(N);
  for (int step = 1; step < n; ++step) {
    double mx = 0.0;
    for (int i = 0; i < N; ++i) {
      double s = 0.0;
      for (int l = 0; l < N; ++l) s += acc[l] * k[(i - l + N) % N];
      next[i] = s;
      mx = std::max(mx, s);
    }
    for (int i = 0; i < N; ++i) acc[i] = next[i] / mx;
  }
  return acc;
}

}  // namespace

ExactCorrelations graph_quadrature(const RootedGraph& g, SpinModel model, double beta, int x, int y, double tol) {
  if (!(beta >= 0.0)) throw InvalidArgument("graph_quadrature: beta must be non-negative");
  return converge(g, x, y, tol, [&](int N) {
    std::vector<double> t(N);
    for (int i = 0; i < N; ++i) {
      const double th = wrap_angle(2.0 * M_PI * i / N);
      t[i] = model == SpinModel::kXY ? std::exp(beta * (std::cos(th) - 1.0)) : villain_weight(th, beta, 10);
    }
    return std::vector<std::vector<double>>(g.edges.size(), t);
  });
}

ExactCorrelations metric_graph_quadrature(const RootedGraph& g, double beta, int n, int x, int y, double tol) {
  if (n < 1) throw InvalidArgument("metric_graph_quadrature: n must be at least 1");
  if (!(beta >= 0.0)) throw InvalidArgument("metric_graph_quadrature: beta must be non-negative");
  return converge(g, x, y, tol, [&](int N) {
    auto t = convolution_power(xy_kernel(n * beta, N), n);
    return std::vector<std::vector<double>>(g.edges.size(), t);
  });
}

std::vector<MetricGraphRow> metric_graph_convergence(const RootedGraph& g, double beta, int x, int y,
                                                     const std::vector<int>& n_list, double tol) {
  auto vil = graph_quadrature(g, SpinModel::kVillain, beta, x, y, tol);
  std::vector<MetricGraphRow> rows;
  for (int n : n_list) {
    auto xy = metric_graph_quadrature(g, beta, n, x, y, tol);
    MetricGraphRow r;
    r.n = n;
    r.xy_cc = xy.cc;
    r.villain_cc = vil.cc;
    r.gap_cc = std::abs(xy.cc - vil.cc);
    r.xy_ss = xy.ss;
    r.villain_ss = vil.ss;
    r.gap_ss = std::abs(xy.ss - vil.ss);
    rows.push_back(r);
  }
  return rows;
}

double semigroup_l1_gap(double beta, int n, int grid) {
  if (n < 1 || grid < 8) throw InvalidArgument("semigroup_l1_gap: bad arguments");
  auto p = convolution_power(xy_kernel(n * beta, grid), n);
  std::vector<double> q(grid);
  for (int i = 0; i < grid; ++i) q[i] = villain_weight(wrap_angle(2.0 * M_PI * i / grid), beta, 10);
  const double h = 2.0 * M_PI / grid;
  double sp = 0, sq = 0;
  for (int i = 0; i < grid; ++i) {
    sp += p[i] * h;
    sq += q[i] * h;
  }
  double l1 = 0.0;
  for (int i = 0; i < grid; ++i) l1 += std::abs(p[i] / sp - q[i] / sq) * h;
  return l1;
}

// ---------------------------------------------------------------- decay fits

namespace {

// weighted least squares for ln y = c0 - p ln r (+ kappa ln ln r)
std::vector<double> wls(const std::vector<double>& lr, const std::vector<double>& llr, const std::vector<double>& ly,
                        const std::vector<double>& w, bool with_log) {
  const int k = with_log ? 3 : 2;
  double A[3][4] = {};
  for (std::size_t i = 0; i < lr.size(); ++i) {
    const double row[3] = {1.0, -lr[i], with_log ? llr[i] : 0.0};
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b < k; ++b) A[a][b] += w[i] * row[a] * row[b];
      A[a][3] += w[i] * row[a] * ly[i];
    }
  }
  for (int c = 0; c < k; ++c) {
    int piv = c;
    for (int r = c + 1; r < k; ++r)
      if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
    for (int j = 0; j < 4; ++j) std::swap(A[c][j], A[piv][j]);
    if (std::abs(A[c][c]) < 1e-300) throw InsufficientData("fit_decay: singular design");
    for (int r = 0; r < k; ++r) {
      if (r == c) continue;
      const double f = A[r][c] / A[c][c];
      for (int j = c; j < 4; ++j) A[r][j] -= f * A[c][j];
    }
  }
  std::vector<double> sol(3, 0.0);
  for (int c = 0; c < k; ++c) sol[c] = A[c][3] / A[c][c];
  return sol;
}

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1);
  const std::size_t i = static_cast<std::size_t>(pos);
  const double f = pos - i;
  return i + 1 < v.size() ? v[i] * (1 - f) + v[i + 1] * f : v.back();
}

}  // namespace

DecayFit fit_decay(const std::vector<DecayPoint>& pts, DecayModel model, std::uint64_t seed, int bootstrap) {
  DecayFit fit;
  const bool with_log = model == DecayModel::kPowerLog;
  std::vector<DecayPoint> use;
  for (const auto& p : pts) {
    if (!(p.mean > 0.0)) {
      fit.warnings.push_back("dropped point at r = " + std::to_string(p.r) + " with nonpositive mean");
      continue;
    }
    if (!(p.r > (with_log ? 1.0 : 0.0))) {
      fit.warnings.push_back("dropped point at r = " + std::to_string(p.r) + " outside the model domain");
      continue;
    }
    use.push_back(p);
  }
  std::set<double> distinct;
  for (const auto& p : use) distinct.insert(p.r);
  if (distinct.size() < 4) throw InsufficientData("fit_decay: fewer than four usable separations");
  bool weighted = true;
  for (const auto& p : use) weighted = weighted && p.se > 0.0;
  std::vector<double> lr, llr, ly, w;
  for (const auto& p : use) {
    lr.push_back(std::log(p.r));
    llr.push_back(with_log ? std::log(std::log(p.r)) : 0.0);
    ly.push_back(std::log(p.mean));
    w.push_back(weighted ? std::pow(p.mean / p.se, 2) : 1.0);
  }
  auto sol = wls(lr, llr, ly, w, with_log);
  fit.amplitude = std::exp(sol[0]);
  fit.exponent = sol[1];
  fit.kappa = sol[2];
  fit.used_points = static_cast<int>(use.size());
  fit.ci_low = fit.ci_high = fit.exponent;
  fit.kappa_ci_low = fit.kappa_ci_high = fit.kappa;
  if (weighted && bootstrap > 0) {
    Rng rng(seed);
    std::normal_distribution<double> gauss;
    std::vector<double> ps, ks;
    std::vector<double> yb(use.size());
    for (int b = 0; b < bootstrap; ++b) {
      bool ok = true;
      for (std::size_t i = 0; i < use.size(); ++i) {
        const double v = use[i].mean + use[i].se * gauss(rng);
        if (v <= 0.0) ok = false;
        yb[i] = ok ? std::log(v) : 0.0;
      }
      if (!ok) continue;
      auto s = wls(lr, llr, yb, w, with_log);
      ps.push_back(s[1]);
      ks.push_back(s[2]);
    }
    if (ps.size() >= 10) {
      fit.ci_low = percentile(ps, 0.025);
      fit.ci_high = percentile(ps, 0.975);
      fit.kappa_ci_low = percentile(ks, 0.025);
      fit.kappa_ci_high = percentile(ks, 0.975);
    } else {
      fit.warnings.push_back("bootstrap produced too few positive resamples for an interval");
    }
  }
  return fit;
}

}  // namespace vwb
