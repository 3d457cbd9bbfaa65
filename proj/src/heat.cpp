#include "vwb/heat.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace vwb {

SpatialOperator::SpatialOperator(const InterfaceModel& model, KernelDomain domain, bool with_charges,
                                 TowerScale scale)
    : model_(model),
      domain_(domain),
      with_charges_(with_charges),
      tower_factor_(scale == TowerScale::kHalf ? 0.5 : 1.0),
      box_(model.box()), d_(box_.d), nc_(model.ncomp()) {
  const std::int64_t N = box_.num_sites();
  active_.assign(N, 1);
  if (domain == KernelDomain::kDirichlet) {
    grid_ = LatticeBox(d_, box_.L + model.spec().n_max + 2);
    for (std::int64_t s = 0; s < N; ++s) active_[s] = model.free_site(s);
  } else {
    grid_ = box_;
  }
  to_grid_.resize(N);
  for (std::int64_t s = 0; s < N; ++s) to_grid_[s] = grid_.site_index(box_.site_at(s));
  const std::int64_t G = grid_.num_sites();
  grid_inner_.assign(G, 1);
  nbr_.assign(G * 2 * d_, -1);
  const int side = grid_.side();
  for (std::int64_t s = 0; s < G; ++s) {
    Site x = grid_.site_at(s);
    if (domain == KernelDomain::kDirichlet) grid_inner_[s] = grid_.interior(x);
    for (int k = 0; k < d_; ++k)
      for (int dir = 0; dir < 2; ++dir) {
        Site y = x;
        y[k] += dir == 0 ? 1 : -1;
        if (domain == KernelDomain::kPeriodic) {
          if (y[k] > grid_.L) y[k] -= side;
          if (y[k] < -grid_.L) y[k] += side;
        } else if (!grid_.contains(y)) {
          continue;
        }
        nbr_[s * 2 * d_ + 2 * k + dir] = grid_.site_index(y);
      }
  }
  coef_.assign(model.charges().size(), 0.0);
  set_configuration(model.zero());
  const double beta = model.spec().beta;
  const double lap = 4.0 * d_;
  double tower = lap / beta;
  for (int n = 2; n <= model.spec().n_max + 1; ++n) tower += std::pow(beta, -0.5 * n) * std::pow(lap, n) / beta;
  norm_ = tower_factor_ * tower;
  // the model's bound is the full tower plus the charge rows
  if (with_charges) norm_ += model.operator_norm_bound() - tower;
}

void SpatialOperator::set_configuration(const RealForm& phi) {
  const auto& qs = model_.charges();
  for (std::size_t i = 0; i < qs.size(); ++i)
    coef_[i] = 4.0 * M_PI * M_PI * qs[i].z * std::cos(2.0 * M_PI * model_.pair(phi, qs[i]));
}

void SpatialOperator::neg_lap(const std::vector<double>& in, std::vector<double>& out) const {
  const std::int64_t G = grid_.num_sites();
  out.assign(in.size(), 0.0);
  for (std::int64_t s = 0; s < G; ++s) {
    if (!grid_inner_[s]) continue;
    const std::int64_t* nb = &nbr_[s * 2 * d_];
    for (int c = 0; c < nc_; ++c) {
      double acc = 2.0 * d_ * in[s * nc_ + c];
      for (int j = 0; j < 2 * d_; ++j) acc -= in[nb[j] * nc_ + c];
      out[s * nc_ + c] = acc;
    }
  }
}

void SpatialOperator::apply(const std::vector<double>& f, std::vector<double>& out) const {
  if (f.size() != size()) throw InvalidArgument("SpatialOperator: field size mismatch");
  const std::int64_t N = box_.num_sites();
  const std::size_t gsize = static_cast<std::size_t>(grid_.num_sites()) * nc_;
  w_.assign(gsize, 0.0);
  for (std::int64_t s = 0; s < N; ++s)
    if (active_[s])
      for (int c = 0; c < nc_; ++c) w_[to_grid_[s] * nc_ + c] = f[s * nc_ + c];
  acc_.assign(gsize, 0.0);
  const double beta = model_.spec().beta;
  for (int n = 1; n <= model_.spec().n_max + 1; ++n) {
    neg_lap(w_, t_);
    std::swap(w_, t_);
    const double coef = tower_factor_ * (n == 1 ? 1.0 / beta : std::pow(beta, -0.5 * n) / beta);
    for (std::size_t i = 0; i < gsize; ++i) acc_[i] += coef * w_[i];
  }
  out.assign(size(), 0.0);
  for (std::int64_t s = 0; s < N; ++s)
    if (active_[s])
      for (int c = 0; c < nc_; ++c) out[s * nc_ + c] = acc_[to_grid_[s] * nc_ + c];
  if (!with_charges_) return;
  const auto& qs = model_.charges();
  for (std::size_t i = 0; i < qs.size(); ++i) {
    double p = 0.0;
    for (std::size_t k = 0; k < qs[i].cells.size(); ++k)
      if (active_[qs[i].cells[k] / nc_]) p += f[qs[i].cells[k]] * qs[i].values[k];
    if (p == 0.0) continue;
    const double g = coef_[i] * p;
    for (std::size_t k = 0; k < qs[i].cells.size(); ++k)
      if (active_[qs[i].cells[k] / nc_]) out[qs[i].cells[k]] += g * qs[i].values[k];
  }
}

double SpatialOperator::inner(const std::vector<double>& a, const std::vector<double>& b) const {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

TrajectorySegment frozen_trajectory(const RealForm& phi, double dt, int steps) {
  if (steps < 0 || !(dt > 0.0)) throw InvalidArgument("frozen_trajectory: bad grid");
  TrajectorySegment t;
  t.dt = dt;
  t.snapshots.assign(steps + 1, phi);
  return t;
}

TrajectorySegment langevin_trajectory(const InterfaceModel& model, RealForm phi0, double dt, int steps,
                                      std::uint64_t seed) {
  if (steps < 0 || !(dt > 0.0)) throw InvalidArgument("langevin_trajectory: bad grid");
  if (phi0.size() == 0) phi0 = model.zero();
  TrajectorySegment t;
  t.dt = dt;
  t.snapshots.reserve(steps + 1);
  t.snapshots.push_back(phi0);
  std::mt19937_64 rng(seed);
  for (int k = 0; k < steps; ++k) {
    model.langevin_step(phi0, dt, rng);
    t.snapshots.push_back(phi0);
  }
  return t;
}

TrajectorySegment reversed(const TrajectorySegment& traj) {
  TrajectorySegment r;
  r.dt = traj.dt;
  r.snapshots.assign(traj.snapshots.rbegin(), traj.snapshots.rend());
  // step k of the reversed kernel uses snapshot m-1-k of the original
  if (!r.snapshots.empty()) {
    r.snapshots.erase(r.snapshots.begin());
    r.snapshots.push_back(traj.snapshots.back());
  }
  return r;
}

std::vector<std::vector<std::vector<double>>> evolve_columns(SpatialOperator& op, const SnapshotFn& snapshot,
                                                           double dt, std::vector<std::vector<double>> cols,
                                                           const std::vector<int>& record_steps) {
  if (!(dt > 0.0)) throw InvalidArgument("evolve_columns: dt must be positive");
  if (dt > op.max_dt()) throw StabilityError("evolve_columns: dt exceeds the explicit stability bound");
  for (std::size_t i = 1; i < record_steps.size(); ++i)
    if (record_steps[i] < record_steps[i - 1]) throw InvalidArgument("evolve_columns: record steps must ascend");
  if (!record_steps.empty() && record_steps.front() < 0) throw InvalidArgument("evolve_columns: negative record step");
  const int nc = op.ncomp();
  std::vector<double> limit(cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c) {
    auto& u = cols[c];
    if (u.size() != op.size()) throw InvalidArgument("evolve_columns: initial field size mismatch");
    // the frozen boundary carries no field
    for (std::size_t i = 0; i < u.size(); ++i)
      if (!op.active(static_cast<std::int64_t>(i) / nc)) u[i] = 0.0;
    double start = 0.0;
    for (double v : u) start = std::max(start, std::abs(v));
    limit[c] = 1e6 * std::max(start, 1e-300);
  }
  std::vector<std::vector<std::vector<double>>> out;
  std::vector<double> au;
  std::size_t next = 0;
  for (int k = 0;; ++k) {
    while (next < record_steps.size() && record_steps[next] == k) {
      out.push_back(cols);
      ++next;
    }
    if (next == record_steps.size()) break;
    op.set_configuration(snapshot(k));
    for (std::size_t c = 0; c < cols.size(); ++c) {
      auto& u = cols[c];
      op.apply(u, au);
      double mx = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) {
        u[i] -= dt * au[i];
        mx = std::max(mx, std::abs(u[i]));
      }
      if (!std::isfinite(mx) || mx > limit[c])
        throw StabilityError("evolve_columns: kernel growth beyond the stability bound");
    }
  }
  return out;
}

SnapshotFn snapshots_of(const TrajectorySegment& traj) {
  return [&traj](int k) -> const RealForm& {
    if (k < 0 || k >= static_cast<int>(traj.snapshots.size()))
      throw InvalidArgument("trajectory: step beyond the stored snapshots");
    return traj.snapshots[k];
  };
}

LangevinStream::LangevinStream(const InterfaceModel& model, RealForm phi0, double dt, std::uint64_t seed)
    : model_(model), phi_(phi0.size() == 0 ? model.zero() : std::move(phi0)), dt_(dt), rng_(seed) {
  if (!(dt > 0.0)) throw InvalidArgument("LangevinStream: dt must be positive");
}

const RealForm& LangevinStream::operator()(int k) {
  if (k < step_) throw InvalidArgument("LangevinStream: snapshots are produced in order");
  while (step_ < k) {
    model_.langevin_step(phi_, dt_, rng_);
    ++step_;
  }
  return phi_;
}

std::vector<std::vector<double>> evolve_field(SpatialOperator& op, const TrajectorySegment& traj,
                                              std::vector<double> u, const std::vector<int>& record_steps) {
  if (traj.snapshots.empty()) throw InvalidArgument("evolve_field: empty trajectory");
  if (!record_steps.empty() && record_steps.back() > traj.steps())
    throw InvalidArgument("evolve_field: record step beyond the trajectory");
  auto all = evolve_columns(op, snapshots_of(traj), traj.dt, {std::move(u)}, record_steps);
  std::vector<std::vector<double>> out;
  for (auto& r : all) out.push_back(std::move(r.front()));
  return out;
}

double HeatKernelSlice::frobenius(std::int64_t x) const {
  double s = 0.0;
  for (int a = 0; a < ncomp; ++a)
    for (int b = 0; b < ncomp; ++b) s += entry(x, a, b) * entry(x, a, b);
  return std::sqrt(s);
}

std::vector<HeatKernelSlice> evolve_kernel(SpatialOperator& op, const SnapshotFn& snapshot, double dt, const Site& y,
                                           const std::vector<int>& record_steps) {
  const auto& box = op.box();
  if (!box.contains(y)) throw InvalidArgument("evolve_kernel: source outside the box");
  const std::int64_t ys = box.site_index(y);
  if (!op.active(ys)) throw InvalidArgument("evolve_kernel: source on the frozen boundary");
  const int nc = op.ncomp();
  std::vector<std::vector<double>> cols(nc, std::vector<double>(op.size(), 0.0));
  for (int b = 0; b < nc; ++b) cols[b][ys * nc + b] = 1.0;
  auto rec = evolve_columns(op, snapshot, dt, std::move(cols), record_steps);
  std::vector<HeatKernelSlice> slices(record_steps.size());
  for (std::size_t r = 0; r < record_steps.size(); ++r) {
    slices[r].t = record_steps[r] * dt;
    slices[r].source = y;
    slices[r].ncomp = nc;
    slices[r].values.assign(static_cast<std::size_t>(box.num_sites()) * nc * nc, 0.0);
    for (int b = 0; b < nc; ++b)
      for (std::int64_t x = 0; x < box.num_sites(); ++x)
        for (int a = 0; a < nc; ++a) slices[r].values[(x * nc + a) * nc + b] = rec[r][b][x * nc + a];
  }
  return slices;
}

std::vector<HeatKernelSlice> evolve_kernel(SpatialOperator& op, const TrajectorySegment& traj, const Site& y,
                                           const std::vector<int>& record_steps) {
  if (traj.snapshots.empty()) throw InvalidArgument("evolve_kernel: empty trajectory");
  if (!record_steps.empty() && record_steps.back() > traj.steps())
    throw InvalidArgument("evolve_kernel: record step beyond the trajectory");
  return evolve_kernel(op, snapshots_of(traj), traj.dt, y, record_steps);
}

std::vector<double> charge_field(const SpatialOperator& op, const PlacedCharge& q) {
  std::vector<double> u(op.size(), 0.0);
  for (std::size_t k = 0; k < q.cells.size(); ++k)
    if (op.active(q.cells[k] / op.ncomp())) u[q.cells[k]] += q.values[k];
  return u;
}

std::vector<std::vector<double>> charge_kernel(SpatialOperator& op, const TrajectorySegment& traj,
                                               const PlacedCharge& q, const std::vector<int>& record_steps) {
  return evolve_field(op, traj, charge_field(op, q), record_steps);
}

NashAronsonReport nash_aronson_check(const std::vector<HeatKernelSlice>& slices, const LatticeBox& box) {
  NashAronsonReport r;
  if (slices.empty()) throw InsufficientData("nash_aronson_check: no slices");
  const int d = box.d;
  const std::int64_t o = box.site_index(Site(d, 0));
  for (const auto& s : slices) {
    const double tp = std::max(1.0, s.t);
    r.times.push_back(s.t);
    r.on_diagonal.push_back(s.frobenius(o) * std::pow(tp, 0.5 * d));
  }
  r.on_diagonal_constant = *std::max_element(r.on_diagonal.begin(), r.on_diagonal.end());
  // least-squares slope of log(|P| t^{d/2}) against log t over the upper half
  const std::size_t n = r.on_diagonal.size(), first = n / 2;
  if (n - first >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = first; i < n; ++i) {
      const double lx = std::log(std::max(1.0, r.times[i])), ly = std::log(r.on_diagonal[i]);
      sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
    }
    const double m = static_cast<double>(n - first);
    const double den = m * sxx - sx * sx;
    r.growth_exponent = den > 0 ? (m * sxy - sx * sy) / den : 0.0;
  }
  r.on_diagonal_bounded = r.growth_exponent <= 0.1 * 0.5 * d;

  r.profile_decreasing = true;
  for (const auto& s : slices) {
    double prev = s.frobenius(o);
    for (int k = 1; k <= box.L; ++k) {
      Site x(d, 0);
      x[0] = k;
      const double v = s.frobenius(box.site_index(x));
      if (!(v < prev)) r.profile_decreasing = false;
      prev = v;
    }
  }
  // smallest admissible constant by bisection; the bound grows with C
  auto violations = [&](double C) {
    int bad = 0;
    for (const auto& s : slices) {
      const double tp = std::max(1.0, s.t);
      for (std::int64_t x = 0; x < box.num_sites(); ++x) {
        const double v = s.frobenius(x);
        if (v == 0.0) continue;
        Site xs = box.site_at(x);
        double norm = 0.0;
        for (int c : xs) norm += static_cast<double>(c) * c;
        norm = std::sqrt(norm);
        const double bound = C * std::pow(tp, -0.5 * d) * std::exp(-norm / (C * std::sqrt(tp)));
        if (v > bound) ++bad;
      }
    }
    return bad;
  };
  double lo = 1e-6, hi = 1.0;
  while (violations(hi) > 0 && hi < 1e12) hi *= 2.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = std::sqrt(lo * hi);
    (violations(mid) > 0 ? lo : hi) = mid;
  }
  r.fitted_constant = hi;
  r.violations = violations(hi);
  return r;
}

MatrixEstimate hs_green_estimate(SpatialOperator& op, const std::function<double(const RealForm&)>& f, const Site& x,
                                 const Site& y, const std::vector<TrajectorySegment>& ensemble) {
  if (ensemble.size() < 2) throw InsufficientData("hs_green_estimate: need at least two trajectories");
  const auto& box = op.box();
  const int nc = op.ncomp();
  if (!box.contains(x) || !box.contains(y)) throw InvalidArgument("hs_green_estimate: sites outside the box");
  const std::int64_t xs = box.site_index(x), ys = box.site_index(y);
  std::vector<std::vector<double>> per(ensemble.size(), std::vector<double>(nc * nc, 0.0));
  for (std::size_t e = 0; e < ensemble.size(); ++e) {
    const auto& traj = ensemble[e];
    if (traj.dt > op.max_dt()) throw StabilityError("hs_green_estimate: dt exceeds the explicit stability bound");
    std::vector<std::vector<double>> cols(nc, std::vector<double>(op.size(), 0.0));
    for (int b = 0; b < nc; ++b) cols[b][xs * nc + b] = 1.0;
    std::vector<double> au;
    // left Riemann sum over [0, T)
    for (int k = 0; k < traj.steps(); ++k) {
      const double fk = f(traj.snapshots[k]);
      op.set_configuration(traj.snapshots[k]);
      for (int b = 0; b < nc; ++b) {
        auto& u = cols[b];
        for (int a = 0; a < nc; ++a) per[e][b * nc + a] += traj.dt * fk * u[ys * nc + a];
        op.apply(u, au);
        for (std::size_t i = 0; i < u.size(); ++i) u[i] -= traj.dt * au[i];
      }
    }
    for (const auto& u : cols)
      for (double v : u)
        if (!std::isfinite(v)) throw StabilityError("hs_green_estimate: non-finite kernel");
  }
  MatrixEstimate m;
  m.ncomp = nc;
  m.trajectories = static_cast<int>(ensemble.size());
  m.mean.assign(nc * nc, 0.0);
  m.se.assign(nc * nc, 0.0);
  const double n = static_cast<double>(ensemble.size());
  for (int i = 0; i < nc * nc; ++i) {
    double s = 0.0, ss = 0.0;
    for (const auto& p : per) s += p[i];
    const double mean = s / n;
    for (const auto& p : per) ss += (p[i] - mean) * (p[i] - mean);
    m.mean[i] = mean;
    m.se[i] = std::sqrt(ss / (n - 1.0) / n);
  }
  return m;
}

FactorizationReport factorization_check(SpatialOperator& op, const TrajectorySegment& traj, const PlacedCharge& q1,
                                        const PlacedCharge& q2, int sample_pairs, std::uint64_t seed,
                                        std::size_t max_entries) {
  const std::size_t M = op.size();
  if (M * M > max_entries) throw ResourceLimit("factorization_check: pair space too large");
  if (traj.dt > op.max_dt()) throw StabilityError("factorization_check: dt exceeds the explicit stability bound");
  const int T = traj.steps();
  auto p1 = charge_kernel(op, traj, q1, {T}).front();
  auto p2 = charge_kernel(op, traj, q2, {T}).front();
  auto u1 = charge_field(op, q1), u2 = charge_field(op, q2);
  std::vector<double> K(M * M);
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = 0; j < M; ++j) K[i * M + j] = u1[i] * u2[j];
  std::vector<double> col(M), acol;
  for (int k = 0; k < T; ++k) {
    op.set_configuration(traj.snapshots[k]);
    // first variable
    for (std::size_t j = 0; j < M; ++j) {
      bool any = false;
      for (std::size_t i = 0; i < M; ++i) {
        col[i] = K[i * M + j];
        any = any || col[i] != 0.0;
      }
      if (!any) continue;
      op.apply(col, acol);
      for (std::size_t i = 0; i < M; ++i) K[i * M + j] -= traj.dt * acol[i];
    }
    // second variable
    for (std::size_t i = 0; i < M; ++i) {
      std::vector<double> row(K.begin() + i * M, K.begin() + (i + 1) * M);
      bool any = false;
      for (double v : row) any = any || v != 0.0;
      if (!any) continue;
      op.apply(row, acol);
      for (std::size_t j = 0; j < M; ++j) K[i * M + j] -= traj.dt * acol[j];
    }
  }
  FactorizationReport r;
  const int nc = op.ncomp();
  const std::int64_t N = op.box().num_sites();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> pick(0, N - 1);
  double scale = 0.0;
  for (double v : K) scale = std::max(scale, std::abs(v));
  for (int s = 0; s < sample_pairs; ++s) {
    const std::int64_t y = pick(rng), z = pick(rng);
    for (int a = 0; a < nc; ++a)
      for (int b = 0; b < nc; ++b) {
        const std::size_t i = y * nc + a, j = z * nc + b;
        r.max_residual = std::max(r.max_residual, std::abs(K[i * M + j] - p1[i] * p2[j]));
      }
    ++r.pairs_checked;
  }
  return r;
}

}  // namespace vwb
