#include "vwb/green.hpp"

#include <algorithm>
#include <cmath>

#include "vwb/fft.hpp"

namespace vwb {

namespace {

std::int64_t ipow(std::int64_t b, int e) {
  std::int64_t r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

// Multi-index walk over a row-major grid of equal sides.
struct Odometer {
  std::vector<int> c;
  int n;
  Odometer(int d, int side) : c(d, 0), n(side) {}
  void next() {
    for (int k = static_cast<int>(c.size()) - 1; k >= 0; --k) {
      if (++c[k] < n) return;
      c[k] = 0;
    }
  }
};

}  // namespace

std::vector<double> dirichlet_solve(const LatticeBox& box, const std::vector<double>& f) {
  if (static_cast<std::int64_t>(f.size()) != box.num_sites()) throw InvalidArgument("dirichlet_solve: size mismatch");
  std::vector<double> u(f.size(), 0.0);
  if (box.L < 1) return u;
  const int d = box.d, n = 2 * box.L - 1, side = box.side();
  const std::int64_t m = ipow(n, d);
  std::vector<double> buf(static_cast<std::size_t>(m));
  std::vector<std::int64_t> outer(static_cast<std::size_t>(m));
  {
    Odometer it(d, n);
    for (std::int64_t i = 0; i < m; ++i, it.next()) {
      std::int64_t s = 0;
      for (int k = 0; k < d; ++k) s = s * side + (it.c[k] + 1);
      outer[i] = s;
      buf[i] = f[s];
    }
  }
  std::vector<int> dims(d, n);
  dst1(buf, dims);
  std::vector<double> eig(n);
  for (int k = 0; k < n; ++k) eig[k] = 2.0 * (1.0 - std::cos(M_PI * (k + 1) / (n + 1)));
  {
    Odometer it(d, n);
    for (std::int64_t i = 0; i < m; ++i, it.next()) {
      double lam = 0.0;
      for (int k = 0; k < d; ++k) lam += eig[it.c[k]];
      buf[i] /= lam;
    }
  }
  dst1(buf, dims);
  const double scale = std::pow(2.0 * (n + 1), -d);
  for (std::int64_t i = 0; i < m; ++i) u[outer[i]] = buf[i] * scale;
  return u;
}

std::vector<double> dirichlet_green_column(const LatticeBox& box, const Site& y) {
  if (!box.interior(y)) throw InvalidArgument("dirichlet_green_column: source must be an interior site");
  std::vector<double> f(static_cast<std::size_t>(box.num_sites()), 0.0);
  f[box.site_index(y)] = 1.0;
  return dirichlet_solve(box, f);
}

double GreenField::operator()(const Site& x) const {
  if (!box.contains(x)) throw InvalidArgument("GreenField: site outside the stored range");
  return values[box.site_index(x)];
}

double green_residual(const GreenField& g) {
  LatticeBox inner(g.d, g.radius);
  double worst = 0.0;
  for (std::int64_t s = 0; s < inner.num_sites(); ++s) {
    Site x = inner.site_at(s);
    const std::int64_t t = g.box.site_index(x);
    double lap = -2.0 * g.d * g.values[t];
    for (int k = 0; k < g.d; ++k) lap += g.values[t + g.box.stride(k)] + g.values[t - g.box.stride(k)];
    bool origin = std::all_of(x.begin(), x.end(), [](int v) { return v == 0; });
    worst = std::max(worst, std::abs(-lap - (origin ? 1.0 : 0.0)));
  }
  return worst;
}

namespace {

// Weights w with sum_i w_i = 1 and sum_i w_i M_i^{-(p + 2j)} = 0 for j < n - 1.
std::vector<double> extrapolation_weights(const std::vector<int>& sizes, double p) {
  const int n = static_cast<int>(sizes.size());
  std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
  for (int i = 0; i < n; ++i) {
    a[0][i] = 1.0;
    for (int j = 1; j < n; ++j) a[j][i] = std::pow(sizes[i], -(p + 2.0 * (j - 1)));
  }
  a[0][n] = 1.0;
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    for (int r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a[r][c] / a[c][c];
      for (int k = c; k <= n; ++k) a[r][k] -= f * a[c][k];
    }
  }
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = a[i][n] / a[i][i];
  return w;
}

GreenField dirichlet_extrapolated(int d, int radius, std::int64_t max_sites) {
  const int base = std::max(radius, 4);
  const std::vector<int> sizes{2 * base, 3 * base, 4 * base, 5 * base, 6 * base};
  if (ipow(2 * sizes.back() - 1, d) > max_sites)
    throw ResourceLimit("compute_green: Dirichlet boxes exceed the site budget");
  GreenField g;
  g.d = d;
  g.radius = radius;
  g.box = LatticeBox(d, radius + 1);
  g.method = GreenMethod::kDirichletExtrapolation;
  std::vector<std::vector<double>> fields;
  for (int M : sizes) {
    LatticeBox big(d, M);
    auto col = dirichlet_green_column(big, Site(d, 0));
    std::vector<double> small(static_cast<std::size_t>(g.box.num_sites()));
    for (std::int64_t s = 0; s < g.box.num_sites(); ++s) small[s] = col[big.site_index(g.box.site_at(s))];
    fields.push_back(std::move(small));
  }
  // G_M = G + sum_j c_j(x) M^{-(p + 2j)} with p = d - 2; the x dependence
  // enters at j = 2 through the harmonic remainder of the box
  const double p = d - 2.0;
  const auto w = extrapolation_weights(sizes, p);
  const auto w3 = extrapolation_weights({sizes[1], sizes[2], sizes[3], sizes[4]}, p);
  g.values.assign(fields[0].size(), 0.0);
  LatticeBox inner(d, radius);
  for (std::size_t s = 0; s < g.values.size(); ++s)
    for (std::size_t i = 0; i < sizes.size(); ++i) g.values[s] += w[i] * fields[i][s];
  for (std::int64_t s = 0; s < inner.num_sites(); ++s) {
    const auto t = g.box.site_index(inner.site_at(s));
    double three = 0.0;
    for (std::size_t i = 0; i < w3.size(); ++i) three += w3[i] * fields[i + 1][t];
    g.accuracy = std::max(g.accuracy, std::abs(three - g.values[t]));
  }
  return g;
}

// Zero-mode-free Green's function of the torus of side N on the box of half
// side radius + 1, with the uniform background's quadratic part removed.
std::vector<double> torus_field(int d, int N, const LatticeBox& box, std::int64_t max_sites) {
  const int h = N / 2 + 1;
  if (ipow(h, d) > max_sites) throw ResourceLimit("compute_green: torus exceeds the site budget");
  const std::int64_t m = ipow(h, d);
  std::vector<double> buf(static_cast<std::size_t>(m));
  std::vector<double> eig(h);
  for (int k = 0; k < h; ++k) eig[k] = 2.0 * (1.0 - std::cos(2.0 * M_PI * k / N));
  {
    Odometer it(d, h);
    for (std::int64_t i = 0; i < m; ++i, it.next()) {
      double lam = 0.0;
      for (int k = 0; k < d; ++k) lam += eig[it.c[k]];
      buf[i] = i == 0 ? 0.0 : 1.0 / lam;
    }
  }
  dct1(buf, std::vector<int>(d, h));
  const double vol = std::pow(static_cast<double>(N), d);
  std::vector<double> out(static_cast<std::size_t>(box.num_sites()));
  for (std::int64_t s = 0; s < box.num_sites(); ++s) {
    Site x = box.site_at(s);
    std::int64_t idx = 0;
    double r2 = 0.0;
    for (int k = 0; k < d; ++k) {
      idx = idx * h + std::abs(x[k]);
      r2 += static_cast<double>(x[k]) * x[k];
    }
    out[s] = buf[idx] / vol - r2 / (2.0 * d * vol);
  }
  return out;
}

GreenField torus_spectral(int d, int radius, std::int64_t max_sites) {
  GreenField g;
  g.d = d;
  g.radius = radius;
  g.box = LatticeBox(d, radius + 1);
  g.method = GreenMethod::kTorus;
  GreenField ref = dirichlet_extrapolated(d, std::min(radius, 8), max_sites);
  const double at0 = ref.values[ref.box.site_index(Site(d, 0))];
  const std::int64_t origin = g.box.site_index(Site(d, 0));
  // the image sums leave a harmonic remainder of order |x|^4 / N^(d+2); two
  // sizes cancel it
  const int n1 = 2 * std::max(4 * radius, 8), n2 = 3 * std::max(4 * radius, 8);
  auto f1 = torus_field(d, n1, g.box, max_sites);
  auto f2 = torus_field(d, n2, g.box, max_sites);
  const double s1 = at0 - f1[origin], s2 = at0 - f2[origin];
  const double w1 = std::pow(static_cast<double>(n1), d + 2), w2 = std::pow(static_cast<double>(n2), d + 2);
  g.values.resize(f1.size());
  double gap = 0.0;
  for (std::size_t s = 0; s < f1.size(); ++s) {
    const double a = f1[s] + s1, b = f2[s] + s2;
    g.values[s] = (w2 * b - w1 * a) / (w2 - w1);
    gap = std::max(gap, std::abs(g.values[s] - b));
  }
  g.accuracy = ref.accuracy + gap * std::pow(static_cast<double>(n1) / n2, 2);
  return g;
}

}  // namespace

GreenField compute_green(int d, int radius, double tol, GreenMethod method, std::int64_t max_sites) {
  if (d < 3 || d > kMaxDim) throw InvalidArgument("compute_green: need 3 <= d <= 6");
  if (radius < 1) throw InvalidArgument("compute_green: radius must be at least 1");
  if (!(tol > 0.0)) throw InvalidArgument("compute_green: tol must be positive");
  GreenField g = method == GreenMethod::kTorus ? torus_spectral(d, radius, max_sites)
                                               : dirichlet_extrapolated(d, radius, max_sites);
  g.residual = green_residual(g);
  if (g.residual > tol) throw AccuracyError("compute_green: residual above tolerance", g.residual);
  return g;
}

RealForm green_gradient(const GreenField& g) {
  LatticeBox inner(g.d, g.radius);
  RealForm out(inner, 1);
  for (std::int64_t s = 0; s < inner.num_sites(); ++s) {
    const auto t = g.box.site_index(inner.site_at(s));
    for (int k = 0; k < g.d; ++k) out.at(s, k) = g.values[t + g.box.stride(k)] - g.values[t];
  }
  return out;
}

namespace {

std::vector<Site> ray_sites(int d, int radius) {
  std::vector<Site> out;
  for (int r = 1; r <= radius; ++r)
    for (int m : {1, 2, d}) {
      Site x(d, 0);
      for (int k = 0; k < m; ++k) x[k] = r;
      out.push_back(x);
    }
  auto norm2 = [](const Site& x) {
    double s = 0.0;
    for (int v : x) s += static_cast<double>(v) * v;
    return s;
  };
  std::stable_sort(out.begin(), out.end(), [&](const Site& a, const Site& b) { return norm2(a) < norm2(b); });
  return out;
}

double euclid(const Site& x) {
  double s = 0.0;
  for (int v : x) s += static_cast<double>(v) * v;
  return std::sqrt(s);
}

}  // namespace

std::vector<DecayRow> decay_ratio_table(const GreenField& g, double exponent) {
  if (!(exponent >= 0.0)) throw InvalidArgument("decay_ratio_table: exponent must be non-negative");
  std::vector<DecayRow> rows;
  for (const auto& x : ray_sites(g.d, g.radius)) {
    DecayRow r{x, euclid(x), g(x), 0.0};
    r.ratio = r.value * std::pow(r.norm, exponent);
    rows.push_back(r);
  }
  return rows;
}

std::vector<DecayRow> gradient_decay_table(const GreenField& g, double exponent) {
  if (!(exponent >= 0.0)) throw InvalidArgument("gradient_decay_table: exponent must be non-negative");
  auto grad = green_gradient(g);
  std::vector<DecayRow> rows;
  for (const auto& x : ray_sites(g.d, g.radius)) {
    double s = 0.0;
    for (int k = 0; k < g.d; ++k) s += grad.value(x, k) * grad.value(x, k);
    DecayRow r{x, euclid(x), std::sqrt(s), 0.0};
    r.ratio = r.value * std::pow(r.norm, exponent);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace vwb
