#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "vwb/charges.hpp"
#include "vwb/form.hpp"
#include "vwb/stats.hpp"

namespace vwb {

struct PotentialSpec {
  double beta = 3.0;
  int n_max = 2;  // gradient tower terms n = 2 .. n_max + 1
  bool charges = true;
  int activity_order = 2;
};
void validate(const PotentialSpec& spec);

// A pool charge placed in the box: flat indices into a 2-form's data.
struct PlacedCharge {
  std::size_t pool_index = 0;
  double z = 0.0;
  std::vector<std::int64_t> cells;
  std::vector<double> values;
  std::vector<EdgeEntry> primitive;
};

struct EnergyParts {
  double h1 = 0.0, h2 = 0.0, h3 = 0.0;
  // exponent of the Gibbs weight is -(h1 + h2) + h3
  double total() const { return h1 + h2 - h3; }
};

enum class EnergyPart { kH1, kH2, kH3 };

// Interface configurations are real 2-forms on the box, zero on its boundary.
class InterfaceModel {
 public:
  InterfaceModel(const LatticeBox& box, const PotentialSpec& spec, std::shared_ptr<const ChargePool> pool = nullptr);

  const LatticeBox& box() const { return box_; }
  const PotentialSpec& spec() const { return spec_; }
  const std::vector<PlacedCharge>& charges() const { return charges_; }
  int ncomp() const { return ncomp_; }
  bool free_site(std::int64_t s) const { return free_[s] != 0; }

  RealForm zero() const { return RealForm(box_, 2); }
  double pair(const RealForm& f, const PlacedCharge& q) const;  // (f, q)

  EnergyParts energy_parts(const RealForm& phi) const;
  // gradient of h1 + h2 - h3, zero on the boundary
  RealForm energy_gradient(const RealForm& phi) const;
  // second derivative of one part in direction psi
  double hessian_form(EnergyPart part, const RealForm& phi, const RealForm& psi) const;

  // (-Delta)^n f on the whole lattice with f extended by zero, restricted to the box
  RealForm neg_laplacian_power(const RealForm& f, int n) const;

  double operator_norm_bound() const { return norm_; }
  double default_dt() const { return 0.5 / operator_norm_bound(); }
  double max_dt() const { return 2.0 / operator_norm_bound(); }

  // Euler-Maruyama; noise_scale = 0 gives plain gradient descent
  void langevin_step(RealForm& phi, double dt, std::mt19937_64& rng, double noise_scale = 1.0) const;

 private:
  LatticeBox box_;
  PotentialSpec spec_;
  int ncomp_;
  std::vector<char> free_;
  std::vector<PlacedCharge> charges_;
  // padded work grid
  LatticeBox pad_;
  std::vector<std::int64_t> to_pad_;
  std::vector<char> pad_inner_;
  std::vector<std::int64_t> pad_stride_;
  double norm_ = 0.0;
  double compute_norm_bound() const;
  void embed(const RealForm& f, std::vector<double>& out) const;
  void apply_neg_lap_padded(const std::vector<double>& in, std::vector<double>& out) const;
};

struct InterfaceChainParams {
  double dt = 0.0;  // 0 selects the default step
  std::int64_t steps = 1000;
  std::int64_t burn_in = 100;
  std::int64_t thin = 1;
  std::uint64_t seed = 1;
};

// Runs a chain from phi (zero if empty) and calls record on retained samples.
void run_interface_chain(const InterfaceModel& model, const InterfaceChainParams& p, RealForm& phi,
                         const std::function<void(const RealForm&)>& record);

struct UValues {
  double u = 0, u_cos = 0, u_sin_cos = 0, u_cos_sin = 0, u_cos_cos = 0, u_sin_sin = 0;
};

// Pairings of the charge primitives with Green's function gradients.
class ObservableSet {
 public:
  ObservableSet(const InterfaceModel& model, const std::function<double(const Site&)>& green,
                const std::vector<Site>& targets);
  const std::vector<Site>& targets() const { return targets_; }
  // (grad G_x, n_q) for target t, charge i; (grad G, n_q) is at_origin(i)
  double green_pairing(int t, std::size_t i) const { return gx_[t][i]; }
  double at_origin(std::size_t i) const { return g0_[i]; }

  UValues evaluate(const RealForm& phi, int target) const;
  // derivative of U_x in phi at site y, one entry per face direction
  std::vector<double> derivative(const RealForm& phi, int target, const Site& y) const;
  double trig_expansion_check(int target) const;

 private:
  const InterfaceModel& model_;
  std::vector<Site> targets_;
  std::vector<double> g0_;
  std::vector<std::vector<double>> gx_;
};

double green_pairing(const std::function<double(const Site&)>& green, const Site& x,
                     const std::vector<EdgeEntry>& primitive);

// max residual of the sine and cosine expansions of 2 pi (a - b)
double trig_expansion_residual(double a, double b);

enum class DualityVariant { kSingle, kMinus, kPlus };
// exponent of the requested right-hand side, built from U at the origin and at x
double duality_exponent(const UValues& at0, const UValues& atx, DualityVariant v);

struct WickEstimate {
  Estimate lhs, rhs, ratio, covariance;
};
// cov(A^2, B^2) against 2 cov(A, B)^2 for paired series
WickEstimate wick_square_covariance(const std::vector<double>& a, const std::vector<double>& b, int batches = 32);

}  // namespace vwb
