#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "vwb/lattice.hpp"
#include "vwb/stats.hpp"

namespace vwb {

enum class SpinModel { kXY, kVillain };
std::string to_string(SpinModel m);
SpinModel parse_spin_model(const std::string& s);

using Rng = std::mt19937_64;

// sum_{m=-M}^{M} exp(-beta/2 (theta + 2 pi m)^2)
double villain_weight(double theta, double beta, int M = 10);
// bound on the relative error of the truncated sum
double villain_truncation_bound(double beta, int M);

double wrap_angle(double theta);  // into [-pi, pi)

struct RootedGraph {
  int num_vertices = 0;
  std::vector<std::pair<int, int>> edges;
  int root = 0;
  int base_vertices = 0;  // vertex count before subdivision; originals keep their ids
  int subdivision = 1;
};
void validate_graph(const RootedGraph& g);
RootedGraph single_edge_graph();
RootedGraph chain_graph(int free_vertices);  // root - 1 - 2 - ...
RootedGraph star_graph(int leaves);          // root - 1, and 1 - leaf for each leaf
RootedGraph triangle_graph();                // root, 1, 2 pairwise joined
RootedGraph build_metric_graph(const RootedGraph& g, int n);

// log of the edge weight as a function of the angle difference
class EdgeLogWeight {
 public:
  EdgeLogWeight(SpinModel model, double beta, int wrap_M = 10, bool tabulated = false);
  double operator()(double diff) const;
  SpinModel model() const { return model_; }
  double beta() const { return beta_; }

 private:
  double exact(double diff) const;
  SpinModel model_;
  double beta_;
  int M_;
  bool tab_;
  double h_ = 0.0;
  std::vector<double> f_, df_;
};

// Graph or box with frozen sites pinned at angle 0.
struct SpinSystem {
  int n = 0;
  std::vector<std::vector<int>> nbrs;
  std::vector<char> frozen;
};
SpinSystem spin_system(const RootedGraph& g);
SpinSystem spin_system(const LatticeBox& box);  // boundary frozen

struct SpinConfig {
  std::vector<double> theta;
};

struct ChainParams {
  double beta = 2.0;
  SpinModel model = SpinModel::kVillain;
  int wrap_M = 10;
  std::int64_t sweeps = 1000;
  std::int64_t burn_in = 100;
  std::int64_t thin = 1;
  std::uint64_t seed = 1;
  double width = 1.0;
};
void validate(const ChainParams& p);

// One pass of single-site Metropolis updates over the free sites in index
// order. Returns the acceptance rate.
double metropolis_sweep(const SpinSystem& sys, SpinConfig& cfg, const EdgeLogWeight& w, double width, Rng& rng);

// Groups of site pairs whose observables are averaged per sample.
struct PairGroup {
  std::vector<std::pair<int, int>> pairs;
  double separation = 0.0;
};

enum PairObservable { kObsCC, kObsCX, kObsCY, kObsSS, kObsCosMinus, kObsCosPlus, kObsSX, kObsSY, kNumPairObs };

// Per-sample observable values, row-major: sample x group x observable.
struct ChainRecord {
  std::vector<PairGroup> groups;
  std::vector<double> rows;
  double acceptance = 0.0;
  std::int64_t count() const;
};

void record_raw_sample(const SpinConfig& cfg, ChainRecord& rec);

ChainRecord run_metropolis_chain(const SpinSystem& sys, const ChainParams& p, const std::vector<PairGroup>& groups,
                                 bool tabulated_weights = true, SpinConfig* final_config = nullptr);

// Villain sampler on a box that alternates exact Gaussian updates of the
// unwrapped angles given integer edge currents with independent updates of the
// currents. Records conditional expectations given the currents.
class AugmentedVillainSampler {
 public:
  AugmentedVillainSampler(const LatticeBox& box, double beta, std::uint64_t seed);
  void sweep();
  // E[observable | currents] for each group
  void record(ChainRecord& rec) const;
  SpinConfig config() const;  // wrapped angles on the whole box
  const LatticeBox& box() const { return box_; }
  Rng& rng() { return rng_; }
  void set_config(const SpinConfig& cfg);

 private:
  void update_currents();
  void update_angles();
  LatticeBox box_;
  double beta_;
  int n_;  // interior side
  std::vector<std::int64_t> interior_;  // interior position -> box site
  std::vector<int> box_to_interior_;    // -1 on the boundary
  std::vector<double> lambda_;
  std::vector<double> theta_;  // wrapped, per box site
  std::vector<double> mu_;     // conditional mean, per box site
  std::vector<int> current_;   // per box site and direction
  std::vector<double> skip_bound_;
  // Dirichlet Green's function entries between recorded sites
  mutable std::map<std::pair<std::int64_t, std::int64_t>, double> green_;
  double green(std::int64_t a, std::int64_t b) const;
  void prepare_green(const std::vector<PairGroup>& groups) const;
  Rng rng_;
};

ChainRecord run_augmented_chain(const LatticeBox& box, const ChainParams& p, const std::vector<PairGroup>& groups,
                                SpinConfig* final_config = nullptr);

struct PairEstimate {
  double separation = 0.0;
  Estimate cc, cx, cy, product, truncated, ss, cos_minus, cos_plus, sx, dn_residual;
};

// Two independent chains; the product of one-point functions pairs the chains.
std::vector<PairEstimate> estimate_correlations(const ChainRecord& a, const ChainRecord& b, int batches = 32);

struct DunlopNewman {
  double residual = 0.0;
  double se = 0.0;
};
// (cc - p)(cc + p) - ss^2 with p = <cos x><cos y>, delta-method error
DunlopNewman dunlop_newman_check(const Estimate& cc, const Estimate& product, const Estimate& ss);

struct ExactCorrelations {
  double cc = 0, cx = 0, cy = 0, ss = 0, cos_minus = 0, cos_plus = 0, sx = 0;
  double change = 0.0;  // difference to the previous grid
  int grid = 0;
};
// Trapezoid quadrature on a periodic grid; at most three free vertices.
ExactCorrelations graph_quadrature(const RootedGraph& g, SpinModel model, double beta, int x, int y, double tol = 1e-8);
// XY at n beta on the n-fold subdivision, with interior chain vertices integrated out.
ExactCorrelations metric_graph_quadrature(const RootedGraph& g, double beta, int n, int x, int y, double tol = 1e-8);

struct MetricGraphRow {
  int n = 1;
  double xy_cc = 0, villain_cc = 0, gap_cc = 0;
  double xy_ss = 0, villain_ss = 0, gap_ss = 0;
};
std::vector<MetricGraphRow> metric_graph_convergence(const RootedGraph& g, double beta, int x, int y,
                                                     const std::vector<int>& n_list, double tol = 1e-10);
// L1 distance on the circle between the n-fold convolution of the normalised
// kernel exp(n beta cos) and the normalised Villain weight.
double semigroup_l1_gap(double beta, int n, int grid = 1024);

enum class DecayModel { kPower, kPowerLog };
struct DecayPoint {
  double r = 0.0;
  double mean = 0.0;
  double se = 0.0;
};
struct DecayFit {
  double exponent = 0.0;
  double kappa = 0.0;
  double amplitude = 0.0;
  double ci_low = 0.0, ci_high = 0.0;
  double kappa_ci_low = 0.0, kappa_ci_high = 0.0;
  int used_points = 0;
  std::vector<std::string> warnings;
};
// y ~ A r^{-p} (ln r)^kappa by weighted least squares in log space
DecayFit fit_decay(const std::vector<DecayPoint>& pts, DecayModel model, std::uint64_t seed = 1, int bootstrap = 1000);

}  // namespace vwb
