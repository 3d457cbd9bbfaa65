#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "vwb/interface.hpp"
#include "vwb/stats.hpp"

namespace vwb {

enum class KernelDomain { kPeriodic, kDirichlet };
// kHessian: the tower enters with the energy's second derivative, (1/beta)(-Delta) + ...
// kHalf: the tower halved, (1/2beta)(-Delta) + ...; the charge term is unchanged
enum class TowerScale { kHessian, kHalf };

// Hessian of the interface energy at a frozen configuration, acting on
// 2-form fields. Periodic mode lives on the torus of the box's side; Dirichlet
// mode keeps fields zero on the box boundary and applies the tower with zero
// extension. Fields use the box layout (site * ncomp + comp).
class SpatialOperator {
 public:
  SpatialOperator(const InterfaceModel& model, KernelDomain domain, bool with_charges = true,
                  TowerScale scale = TowerScale::kHessian);

  void set_configuration(const RealForm& phi);
  void apply(const std::vector<double>& f, std::vector<double>& out) const;
  double inner(const std::vector<double>& a, const std::vector<double>& b) const;

  std::size_t size() const { return static_cast<std::size_t>(box_.num_sites()) * nc_; }
  const LatticeBox& box() const { return box_; }
  int ncomp() const { return nc_; }
  KernelDomain domain() const { return domain_; }
  bool with_charges() const { return with_charges_; }
  double norm_bound() const { return norm_; }
  double max_dt() const { return 2.0 / norm_; }
  double default_dt() const { return 0.5 / norm_; }
  bool active(std::int64_t site) const { return active_[site] != 0; }
  const InterfaceModel& model() const { return model_; }

 private:
  const InterfaceModel& model_;
  KernelDomain domain_;
  bool with_charges_;
  double tower_factor_;
  LatticeBox box_, grid_;
  int d_, nc_;
  std::vector<std::int64_t> to_grid_;
  std::vector<char> active_;
  std::vector<char> grid_inner_;
  std::vector<std::int64_t> nbr_;  // 2d neighbours per grid site, -1 when absent
  std::vector<double> coef_;       // per charge 4 pi^2 z cos(2 pi (phi, q))
  double norm_ = 0.0;
  mutable std::vector<double> w_, t_, acc_;
  void neg_lap(const std::vector<double>& in, std::vector<double>& out) const;
};

struct TrajectorySegment {
  double dt = 0.0;
  std::vector<RealForm> snapshots;  // snapshot k sits at time k dt
  int steps() const { return static_cast<int>(snapshots.size()) - 1; }
};
TrajectorySegment frozen_trajectory(const RealForm& phi, double dt, int steps);
TrajectorySegment langevin_trajectory(const InterfaceModel& model, RealForm phi0, double dt, int steps,
                                      std::uint64_t seed);
TrajectorySegment reversed(const TrajectorySegment& traj);

// Snapshot k of a trajectory; called with k = 0, 1, 2, ... in order.
using SnapshotFn = std::function<const RealForm&(int)>;
SnapshotFn snapshots_of(const TrajectorySegment& traj);

// Produces a Langevin trajectory step by step without storing it.
class LangevinStream {
 public:
  LangevinStream(const InterfaceModel& model, RealForm phi0, double dt, std::uint64_t seed);
  const RealForm& operator()(int k);

 private:
  const InterfaceModel& model_;
  RealForm phi_;
  double dt_;
  std::mt19937_64 rng_;
  int step_ = 0;
};

// Explicit Euler for d/dt u = -A(phi_t) u, all columns in one pass over the
// trajectory. Result: per requested step (ascending), the columns.
std::vector<std::vector<std::vector<double>>> evolve_columns(SpatialOperator& op, const SnapshotFn& snapshot,
                                                           double dt, std::vector<std::vector<double>> cols,
                                                           const std::vector<int>& record_steps);
// single field along a stored trajectory
std::vector<std::vector<double>> evolve_field(SpatialOperator& op, const TrajectorySegment& traj,
                                              std::vector<double> initial, const std::vector<int>& record_steps);

struct HeatKernelSlice {
  double t = 0.0;
  Site source;
  int ncomp = 0;
  // P(t, x; y)[a][b] at values[(x * ncomp + a) * ncomp + b], b the source component
  std::vector<double> values;
  double entry(std::int64_t x, int a, int b) const { return values[(x * ncomp + a) * ncomp + b]; }
  double frobenius(std::int64_t x) const;
};

std::vector<HeatKernelSlice> evolve_kernel(SpatialOperator& op, const TrajectorySegment& traj, const Site& y,
                                           const std::vector<int>& record_steps);
std::vector<HeatKernelSlice> evolve_kernel(SpatialOperator& op, const SnapshotFn& snapshot, double dt, const Site& y,
                                           const std::vector<int>& record_steps);
// the same evolution started from a charge
std::vector<std::vector<double>> charge_kernel(SpatialOperator& op, const TrajectorySegment& traj,
                                               const PlacedCharge& q, const std::vector<int>& record_steps);
std::vector<double> charge_field(const SpatialOperator& op, const PlacedCharge& q);

struct NashAronsonReport {
  std::vector<double> times;
  std::vector<double> on_diagonal;  // |P(t,0;0)| t_+^{d/2}
  double on_diagonal_constant = 0.0;
  double growth_exponent = 0.0;      // log-log slope of on_diagonal over the upper half of the ladder
  bool on_diagonal_bounded = false;  // growth exponent at most a tenth of d/2
  bool profile_decreasing = false;   // along the first axis, for every t
  double fitted_constant = 0.0;      // smallest C in |P| <= C t^{-d/2} exp(-|x| / (C sqrt t))
  int violations = 0;                // at the fitted constant, always 0 unless fitting failed
};
// slices share the source 0 (the box centre) and come in increasing time
NashAronsonReport nash_aronson_check(const std::vector<HeatKernelSlice>& slices, const LatticeBox& box);

struct MatrixEstimate {
  int ncomp = 0;
  std::vector<double> mean, se;  // row-major ncomp x ncomp
  int trajectories = 0;
};
// Monte Carlo mean of int_0^T f(phi_t) P(t, y; x)^T dt over trajectories
MatrixEstimate hs_green_estimate(SpatialOperator& op, const std::function<double(const RealForm&)>& f,
                                 const Site& x, const Site& y, const std::vector<TrajectorySegment>& ensemble);

struct FactorizationReport {
  double max_residual = 0.0;
  std::size_t pairs_checked = 0;
};
// Evolves the two-charge kernel on the pair space with the operator acting
// in each variable in turn and compares it with the product of the single
// charge kernels on sampled site pairs.
FactorizationReport factorization_check(SpatialOperator& op, const TrajectorySegment& traj, const PlacedCharge& q1,
                                        const PlacedCharge& q2, int sample_pairs, std::uint64_t seed,
                                        std::size_t max_entries = 20'000'000);

}  // namespace vwb
