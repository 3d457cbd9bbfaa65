#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "vwb/errors.hpp"

namespace vwb {

using Site = std::vector<int>;

constexpr int kMaxDim = 6;

// The box {-L,...,L}^d. Sites are numbered row-major with the first
// coordinate most significant.
struct LatticeBox {
  int d = 3;
  int L = 1;

  LatticeBox() = default;
  LatticeBox(int dim, int half_side);

  int side() const { return 2 * L + 1; }
  std::int64_t num_sites() const;
  bool contains(const Site& x) const;
  bool on_boundary(const Site& x) const;
  bool interior(const Site& x) const { return contains(x) && !on_boundary(x); }
  std::int64_t site_index(const Site& x) const;
  Site site_at(std::int64_t idx) const;
  // index increment when coordinate `axis` (0-based) grows by one
  std::int64_t stride(int axis) const;

  bool operator==(const LatticeBox& o) const { return d == o.d && L == o.L; }
  bool operator!=(const LatticeBox& o) const { return !(*this == o); }
};

// Increasing direction tuples of length k out of {0..d-1}, in lexicographic
// order. The position of a tuple in this list is its id.
const std::vector<std::vector<int>>& direction_tuples(int d, int k);
int tuple_id(int d, const std::vector<int>& dirs);
int binomial(int n, int k);

struct OrientedCell {
  int degree = 0;
  Site base;
  std::vector<int> dirs;  // 0-based, strictly increasing
  int sign = 1;

  bool same_geometry(const OrientedCell& o) const { return degree == o.degree && base == o.base && dirs == o.dirs; }
  bool operator==(const OrientedCell& o) const { return same_geometry(o) && sign == o.sign; }
};

std::vector<OrientedCell> enumerate_cells(const LatticeBox& box, int degree);

// Cubical boundary: d[x; i1..ik] = sum_j (-1)^j ([x + e_ij; I \ ij] - [x; I \ ij]), j counted from 0.
std::vector<OrientedCell> cell_boundary(const OrientedCell& cell);

// Faces containing an edge, each positively oriented, with the sign the edge
// carries inside the face boundary.
std::vector<std::pair<OrientedCell, int>> cofaces(const OrientedCell& edge);

Site unit(int d, int axis, int amount = 1);
Site add(const Site& a, const Site& b);
Site sub(const Site& a, const Site& b);

}  // namespace vwb
