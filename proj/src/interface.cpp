#include "vwb/interface.hpp"

#include <cmath>
#include <map>

namespace vwb {

void validate(const PotentialSpec& spec) {
  if (!(spec.beta > 1.0)) throw InvalidArgument("interface: beta must exceed 1");
  if (spec.n_max < 0 || spec.n_max > 6) throw InvalidArgument("interface: n_max must lie in [0, 6]");
  if (spec.activity_order < 1 || spec.activity_order > 4) throw InvalidArgument("interface: activity order must lie in [1, 4]");
}

InterfaceModel::InterfaceModel(const LatticeBox& box, const PotentialSpec& spec, std::shared_ptr<const ChargePool> pool)
    : box_(box), spec_(spec), ncomp_(binomial(box.d, 2)) {
  validate(spec);
  if (box.d < 2) throw InvalidArgument("interface: dimension must be at least 2");
  if (box.L < 1) throw InvalidArgument("interface: box too small");
  const std::int64_t N = box.num_sites();
  free_.assign(N, 0);
  for (std::int64_t s = 0; s < N; ++s) free_[s] = box.interior(box.site_at(s));

  pad_ = LatticeBox(box.d, box.L + spec.n_max + 2);
  to_pad_.resize(N);
  for (std::int64_t s = 0; s < N; ++s) to_pad_[s] = pad_.site_index(box.site_at(s));
  pad_inner_.resize(pad_.num_sites());
  for (std::int64_t s = 0; s < pad_.num_sites(); ++s) pad_inner_[s] = pad_.interior(pad_.site_at(s));
  for (int k = 0; k < box.d; ++k) pad_stride_.push_back(pad_.stride(k));

  if (spec.charges) {
    if (!pool) throw InvalidArgument("interface: charges requested without a charge pool");
    for (std::size_t i = 0; i < pool->size(); ++i) {
      const Charge& c = pool->charges()[i];
      if (c.d != box.d) throw InvalidArgument("interface: charge dimension mismatch");
      PlacedCharge pc;
      pc.pool_index = i;
      bool fits = true;
      for (const auto& e : c.q) {
        if (!box.contains(e.base)) {
          fits = false;
          break;
        }
        pc.cells.push_back(box.site_index(e.base) * ncomp_ + e.pair);
        pc.values.push_back(static_cast<double>(e.value));
      }
      if (!fits) continue;
      pc.z = pool->activity(spec.beta, i, spec.activity_order);
      pc.primitive = c.primitive;
      charges_.push_back(std::move(pc));
    }
  }
  norm_ = compute_norm_bound();
}

double InterfaceModel::pair(const RealForm& f, const PlacedCharge& q) const {
  double s = 0.0;
  for (std::size_t k = 0; k < q.cells.size(); ++k) s += f.data()[q.cells[k]] * q.values[k];
  return s;
}

void InterfaceModel::embed(const RealForm& f, std::vector<double>& out) const {
  if (f.box() != box_ || f.degree() != 2) throw InvalidArgument("interface: configuration does not match the box");
  out.assign(static_cast<std::size_t>(pad_.num_sites()) * ncomp_, 0.0);
  for (std::int64_t s = 0; s < box_.num_sites(); ++s)
    for (int c = 0; c < ncomp_; ++c) out[to_pad_[s] * ncomp_ + c] = f.at(s, c);
}

void InterfaceModel::apply_neg_lap_padded(const std::vector<double>& in, std::vector<double>& out) const {
  out.assign(in.size(), 0.0);
  const int d = box_.d;
  const std::int64_t N = pad_.num_sites();
  for (std::int64_t s = 0; s < N; ++s) {
    if (!pad_inner_[s]) continue;
    for (int c = 0; c < ncomp_; ++c) {
      double acc = 2.0 * d * in[s * ncomp_ + c];
      for (int k = 0; k < d; ++k) acc -= in[(s + pad_stride_[k]) * ncomp_ + c] + in[(s - pad_stride_[k]) * ncomp_ + c];
      out[s * ncomp_ + c] = acc;
    }
  }
}

RealForm InterfaceModel::neg_laplacian_power(const RealForm& f, int n) const {
  if (n < 1 || n > spec_.n_max + 1) throw InvalidArgument("neg_laplacian_power: power outside the padded range");
  std::vector<double> a, b;
  embed(f, a);
  for (int k = 0; k < n; ++k) {
    apply_neg_lap_padded(a, b);
    std::swap(a, b);
  }
  RealForm out(box_, 2);
  for (std::int64_t s = 0; s < box_.num_sites(); ++s)
    for (int c = 0; c < ncomp_; ++c) out.at(s, c) = a[to_pad_[s] * ncomp_ + c];
  return out;
}

EnergyParts InterfaceModel::energy_parts(const RealForm& phi) const {
  EnergyParts e;
  const double beta = spec_.beta;
  std::vector<double> v, w, t;
  embed(phi, v);
  w = v;
  for (int n = 1; n <= spec_.n_max + 1; ++n) {
    apply_neg_lap_padded(w, t);
    std::swap(w, t);
    double ip = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) ip += v[i] * w[i];
    if (n == 1)
      e.h1 = ip / (2.0 * beta);
    else
      e.h2 += ip / (2.0 * beta) * std::pow(beta, -0.5 * n);
  }
  for (const auto& q : charges_) e.h3 += q.z * std::cos(2.0 * M_PI * pair(phi, q));
  return e;
}

RealForm InterfaceModel::energy_gradient(const RealForm& phi) const {
  const double beta = spec_.beta;
  std::vector<double> w, t, acc;
  embed(phi, w);
  acc.assign(w.size(), 0.0);
  for (int n = 1; n <= spec_.n_max + 1; ++n) {
    apply_neg_lap_padded(w, t);
    std::swap(w, t);
    const double coef = n == 1 ? 1.0 / beta : std::pow(beta, -0.5 * n) / beta;
    for (std::size_t i = 0; i < w.size(); ++i) acc[i] += coef * w[i];
  }
  RealForm g(box_, 2);
  for (std::int64_t s = 0; s < box_.num_sites(); ++s)
    for (int c = 0; c < ncomp_; ++c) g.at(s, c) = acc[to_pad_[s] * ncomp_ + c];
  for (const auto& q : charges_) {
    const double f = 2.0 * M_PI * q.z * std::sin(2.0 * M_PI * pair(phi, q));
    for (std::size_t k = 0; k < q.cells.size(); ++k) g.data()[q.cells[k]] += f * q.values[k];
  }
  for (std::int64_t s = 0; s < box_.num_sites(); ++s)
    if (!free_[s])
      for (int c = 0; c < ncomp_; ++c) g.at(s, c) = 0.0;
  return g;
}

double InterfaceModel::hessian_form(EnergyPart part, const RealForm& phi, const RealForm& psi) const {
  const double beta = spec_.beta;
  if (part == EnergyPart::kH3) {
    double s = 0.0;
    for (const auto& q : charges_) {
      const double p = pair(psi, q);
      s += q.z * std::cos(2.0 * M_PI * pair(phi, q)) * p * p;
    }
    return -4.0 * M_PI * M_PI * s;
  }
  std::vector<double> v, w, t;
  embed(psi, v);
  w = v;
  double out = 0.0;
  const int top = part == EnergyPart::kH1 ? 1 : spec_.n_max + 1;
  for (int n = 1; n <= top; ++n) {
    apply_neg_lap_padded(w, t);
    std::swap(w, t);
    double ip = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) ip += v[i] * w[i];
    if (part == EnergyPart::kH1) out = ip / beta;
    if (part == EnergyPart::kH2 && n >= 2) out += ip / beta * std::pow(beta, -0.5 * n);
  }
  return out;
}

double InterfaceModel::compute_norm_bound() const {
  const double beta = spec_.beta;
  const double lap = 4.0 * box_.d;
  double b = lap / beta;
  for (int n = 2; n <= spec_.n_max + 1; ++n) b += std::pow(beta, -0.5 * n) * std::pow(lap, n) / beta;
  // Gershgorin row sums of the charge part
  std::map<std::int64_t, double> rows;
  for (const auto& q : charges_) {
    double l1 = 0.0;
    for (double v : q.values) l1 += std::abs(v);
    for (std::size_t k = 0; k < q.cells.size(); ++k)
      rows[q.cells[k]] += 4.0 * M_PI * M_PI * std::abs(q.z) * std::abs(q.values[k]) * l1;
  }
  double worst = 0.0;
  for (const auto& [cell, r] : rows) worst = std::max(worst, r);
  return b + worst;
}

void InterfaceModel::langevin_step(RealForm& phi, double dt, std::mt19937_64& rng, double noise_scale) const {
  if (!(dt > 0.0)) throw InvalidArgument("langevin_step: dt must be positive");
  if (dt > max_dt()) throw StabilityError("langevin_step: dt exceeds the explicit stability bound");
  RealForm g = energy_gradient(phi);
  std::normal_distribution<double> gauss;
  const double amp = std::sqrt(2.0 * dt) * noise_scale;
  for (std::int64_t s = 0; s < box_.num_sites(); ++s) {
    if (!free_[s]) continue;
    for (int c = 0; c < ncomp_; ++c) {
      const double xi = noise_scale != 0.0 ? gauss(rng) : 0.0;
      phi.at(s, c) += -dt * g.at(s, c) + amp * xi;
    }
  }
}

void run_interface_chain(const InterfaceModel& model, const InterfaceChainParams& p, RealForm& phi,
                         const std::function<void(const RealForm&)>& record) {
  if (p.steps < 1 || p.burn_in < 0 || p.thin < 1) throw InvalidArgument("interface chain: bad step counts");
  const double dt = p.dt > 0.0 ? p.dt : model.default_dt();
  if (phi.size() == 0) phi = model.zero();
  std::mt19937_64 rng(p.seed);
  for (std::int64_t s = 0; s < p.burn_in; ++s) model.langevin_step(phi, dt, rng);
  for (std::int64_t s = 0; s < p.steps; ++s) {
    model.langevin_step(phi, dt, rng);
    if ((s + 1) % p.thin == 0) record(phi);
  }
}

double green_pairing(const std::function<double(const Site&)>& green, const Site& x,
                     const std::vector<EdgeEntry>& primitive) {
  double s = 0.0;
  for (const auto& e : primitive) {
    Site a = sub(e.base, x);
    Site b = a;
    b[e.dir] += 1;
    s += static_cast<double>(e.value) * (green(b) - green(a));
  }
  return s;
}

ObservableSet::ObservableSet(const InterfaceModel& model, const std::function<double(const Site&)>& green,
                             const std::vector<Site>& targets)
    : model_(model), targets_(targets) {
  const Site origin(model.box().d, 0);
  for (const auto& q : model.charges()) g0_.push_back(vwb::green_pairing(green, origin, q.primitive));
  for (const auto& x : targets) {
    std::vector<double> row;
    for (const auto& q : model.charges()) row.push_back(vwb::green_pairing(green, x, q.primitive));
    gx_.push_back(std::move(row));
  }
}

UValues ObservableSet::evaluate(const RealForm& phi, int target) const {
  UValues u;
  const auto& qs = model_.charges();
  for (std::size_t i = 0; i < qs.size(); ++i) {
    const double ang = 2.0 * M_PI * model_.pair(phi, qs[i]);
    const double s = std::sin(ang), c = std::cos(ang);
    const double a = 2.0 * M_PI * g0_[i], b = 2.0 * M_PI * gx_[target][i];
    const double sa = std::sin(a), ca = std::cos(a) - 1.0, sb = std::sin(b), cb = std::cos(b) - 1.0;
    const double z = qs[i].z;
    u.u += z * s * sb;
    u.u_cos += z * c * cb;
    u.u_sin_cos += z * s * sa * cb;
    u.u_cos_sin += z * s * ca * sb;
    u.u_cos_cos += z * c * ca * cb;
    u.u_sin_sin += z * c * sa * sb;
  }
  return u;
}

std::vector<double> ObservableSet::derivative(const RealForm& phi, int target, const Site& y) const {
  const int nc = model_.ncomp();
  std::vector<double> out(nc, 0.0);
  if (!model_.box().contains(y)) return out;
  const std::int64_t base = model_.box().site_index(y) * nc;
  const auto& qs = model_.charges();
  for (std::size_t i = 0; i < qs.size(); ++i) {
    double f = 0.0;
    bool computed = false;
    for (std::size_t k = 0; k < qs[i].cells.size(); ++k) {
      const std::int64_t cell = qs[i].cells[k];
      if (cell < base || cell >= base + nc) continue;
      if (!computed) {
        f = 2.0 * M_PI * qs[i].z * std::cos(2.0 * M_PI * model_.pair(phi, qs[i])) *
            std::sin(2.0 * M_PI * gx_[target][i]);
        computed = true;
      }
      out[cell - base] += f * qs[i].values[k];
    }
  }
  return out;
}

double trig_expansion_residual(double a, double b) {
  const double A = 2.0 * M_PI * a, B = 2.0 * M_PI * b;
  const double sa = std::sin(A), sb = std::sin(B), ca = std::cos(A) - 1.0, cb = std::cos(B) - 1.0;
  const double sin_lhs = std::sin(A - B);
  const double sin_rhs = sa - sb + cb * sa - ca * sb;
  const double cos_lhs = std::cos(A - B) - 1.0;
  const double cos_rhs = ca * cb + ca + cb + sa * sb;
  return std::max(std::abs(sin_lhs - sin_rhs), std::abs(cos_lhs - cos_rhs));
}

double ObservableSet::trig_expansion_check(int target) const {
  double worst = 0.0;
  for (std::size_t i = 0; i < g0_.size(); ++i) worst = std::max(worst, trig_expansion_residual(g0_[i], gx_[target][i]));
  return worst;
}

double duality_exponent(const UValues& a, const UValues& x, DualityVariant v) {
  const double base = a.u + a.u_cos;
  switch (v) {
    case DualityVariant::kSingle:
      return base;
    case DualityVariant::kMinus:
      return base - (x.u - x.u_cos) + x.u_sin_cos - x.u_cos_sin + x.u_cos_cos + x.u_sin_sin;
    case DualityVariant::kPlus:
      return base + (x.u + x.u_cos) + x.u_sin_cos + x.u_cos_sin + x.u_cos_cos - x.u_sin_sin;
  }
  return base;
}

WickEstimate wick_square_covariance(const std::vector<double>& a, const std::vector<double>& b, int batches) {
  if (a.size() != b.size()) throw InvalidArgument("wick_square_covariance: series lengths differ");
  if (a.size() < 100) throw InsufficientData("wick_square_covariance: need at least 100 samples");
  std::vector<double> rows;
  rows.reserve(a.size() * 6);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i], y = b[i];
    for (double v : {x, y, x * y, x * x, y * y, x * x * y * y}) rows.push_back(v);
  }
  std::vector<std::vector<double>> vars;
  for (int c = 0; c < 6; ++c) vars.push_back(column_batch_means(rows, 6, c, batches));
  auto cov = [](const std::vector<double>& m) { return m[2] - m[0] * m[1]; };
  // the field is centred, so the squares are taken about zero
  auto lhs = [](const std::vector<double>& m) { return m[5] - m[3] * m[4]; };
  WickEstimate w;
  w.covariance = jackknife(vars, cov);
  w.lhs = jackknife(vars, lhs);
  w.rhs = jackknife(vars, [&](const std::vector<double>& m) { return 2.0 * cov(m) * cov(m); });
  w.ratio = jackknife(vars, [&](const std::vector<double>& m) { return lhs(m) / (2.0 * cov(m) * cov(m)); });
  return w;
}

}  // namespace vwb
