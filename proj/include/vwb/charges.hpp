#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vwb/form.hpp"
#include "vwb/lattice.hpp"

namespace vwb {

struct FaceEntry {
  Site base;
  int pair = 0;  // id of the direction pair, see direction_tuples(d, 2)
  std::int64_t value = 0;
};

struct EdgeEntry {
  Site base;
  int dir = 0;
  std::int64_t value = 0;
};

// Packs a face (or edge, with pair = dir) into one integer. Coordinates must
// lie in [-512, 511] and d <= 5.
std::int64_t pack_cell(const Site& base, int id);

// A closed integer 2-form with connected support, stored sparsely.
struct Charge {
  int d = 3;
  std::vector<FaceEntry> q;  // sorted by (base, pair)
  Site anchor;               // lexicographically smallest vertex of the support
  Site lo, hi;               // corners of the bounding box of the support
  std::vector<EdgeEntry> primitive;
  int l1 = 0;
  int diameter = 0;  // largest side of the bounding box

  IntForm to_form(const LatticeBox& box) const;
  std::vector<std::int64_t> key() const;  // packed cells interleaved with values
  Charge negated() const;
};

// Builds a charge from sparse entries: sorts, drops zeros, fills anchor,
// bounding box, l1 and diameter, and computes the primitive.
Charge make_charge(int d, std::vector<FaceEntry> entries);
std::vector<FaceEntry> faces_of(const IntForm& q);

// d of a sparse 2-form, evaluated on every cube touching its support.
std::map<std::pair<Site, int>, std::int64_t> sparse_exterior_d(int d, const std::vector<FaceEntry>& q);
bool is_closed(int d, const std::vector<FaceEntry>& q);
// squared Euclidean distance between two unit faces viewed as closed squares
int face_distance_sq(const Site& a, const std::vector<int>& da, const Site& b, const std::vector<int>& db);
bool support_connected(int d, const std::vector<FaceEntry>& q);
bool supports_touch(const Charge& a, const Charge& b);

struct EnumerationOptions {
  std::int64_t max_charges = 5'000'000;
  std::int64_t max_nodes = 500'000'000;
};

// Every closed integer 2-form with connected support (faces at distance <= 1
// count as adjacent), base sites in the box and l1 <= cap. Both q and -q are
// listed.
std::vector<Charge> enumerate_charges(const LatticeBox& box, int l1_cap, const EnumerationOptions& opt = {});

// Integer 1-form n with dn = q and support inside the bounding box of q.
std::vector<EdgeEntry> poincare_primitive(int d, const std::vector<FaceEntry>& q);
// sparse d of a 1-form, zero entries removed
std::vector<FaceEntry> sparse_d_of_edges(int d, const std::vector<EdgeEntry>& n);

struct PoincareReport {
  std::size_t checked = 0;
  std::size_t failures = 0;
  double sup_constant = 0.0;       // max ||n||_inf / ||q||_1
  double diameter_constant = 0.0;  // max diam / ||q||_1
};
PoincareReport poincare_sweep(const std::vector<Charge>& pool);

struct SimpleGraph {
  int n = 0;
  std::vector<std::pair<int, int>> edges;
};
bool graph_connected(const SimpleGraph& g);
// sum over connected spanning subgraphs of (-1)^{#edges}
std::int64_t mayer_coefficient(const SimpleGraph& g);

// The pool of candidate parts for cluster decompositions, with an activity cache.
class ChargePool {
 public:
  ChargePool(std::vector<Charge> charges, int l1_cap);
  const std::vector<Charge>& charges() const { return charges_; }
  std::size_t size() const { return charges_.size(); }
  int l1_cap() const { return cap_; }
  // index of the charge with the given key, or -1
  std::int64_t find(const std::vector<std::int64_t>& key) const;

  // Cluster series truncated at n <= n_max parts.
  double activity(double beta, const Charge& q, int n_max) const;
  double activity(double beta, std::size_t index, int n_max) const;

 private:
  std::vector<Charge> charges_;
  int cap_;
  struct KeyHash {
    std::size_t operator()(const std::vector<std::int64_t>& k) const;
  };
  std::unordered_map<std::vector<std::int64_t>, std::size_t, KeyHash> index_;
  std::map<Site, std::vector<std::size_t>> by_anchor_;
  mutable std::mutex cache_mu_;
  mutable std::map<std::tuple<double, std::size_t, int>, double> cache_;
};

struct WeightedSum {
  double value = 0.0;      // sum_q |z(beta,q)| ||q||_1^k h(z_q)
  double reference = 0.0;  // sum_z h(z) over the box
  double ratio = 0.0;
};
WeightedSum weighted_charge_sum(const std::function<double(const Site&)>& h, int k, double beta,
                                const ChargePool& pool, const LatticeBox& box, int n_max = 2);

// min over the pool of -ln|z| / (sqrt(beta) ||q||_1)
double fitted_activity_constant(const ChargePool& pool, double beta, int n_max = 2);

}  // namespace vwb
