#include "vwb/lattice.hpp"

#include <map>
#include <mutex>

namespace vwb {

LatticeBox::LatticeBox(int dim, int half_side) : d(dim), L(half_side) {
  require(dim >= 3 && dim <= kMaxDim, "LatticeBox: dimension must be in [3, 6]");
  require(half_side >= 0, "LatticeBox: half side must be nonnegative");
}

std::int64_t LatticeBox::num_sites() const {
  std::int64_t n = 1;
  for (int i = 0; i < d; ++i) n *= side();
  return n;
}

bool LatticeBox::contains(const Site& x) const {
  if (static_cast<int>(x.size()) != d) return false;
  for (int v : x)
    if (v < -L || v > L) return false;
  return true;
}

bool LatticeBox::on_boundary(const Site& x) const {
  if (!contains(x)) return false;
  for (int v : x)
    if (v == -L || v == L) return true;
  return false;
}

std::int64_t LatticeBox::site_index(const Site& x) const {
  std::int64_t idx = 0;
  for (int i = 0; i < d; ++i) idx = idx * side() + (x[i] + L);
  return idx;
}

Site LatticeBox::site_at(std::int64_t idx) const {
  Site x(d);
  for (int i = d - 1; i >= 0; --i) {
    x[i] = static_cast<int>(idx % side()) - L;
    idx /= side();
  }
  return x;
}

std::int64_t LatticeBox::stride(int axis) const {
  std::int64_t s = 1;
  for (int i = axis + 1; i < d; ++i) s *= side();
  return s;
}

int binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  int r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

namespace {

void build_tuples(int d, int k, int start, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == k) {
    out.push_back(cur);
    return;
  }
  for (int i = start; i < d; ++i) {
    cur.push_back(i);
    build_tuples(d, k, i + 1, cur, out);
    cur.pop_back();
  }
}

}  // namespace

const std::vector<std::vector<int>>& direction_tuples(int d, int k) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::vector<std::vector<int>>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_pair(d, k);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  build_tuples(d, k, 0, cur, out);
  return cache.emplace(key, std::move(out)).first->second;
}

int tuple_id(int d, const std::vector<int>& dirs) {
  const auto& t = direction_tuples(d, static_cast<int>(dirs.size()));
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i] == dirs) return static_cast<int>(i);
  throw InvalidArgument("tuple_id: directions not strictly increasing or out of range");
}

std::vector<OrientedCell> enumerate_cells(const LatticeBox& box, int degree) {
  if (degree < 0 || degree > 3 || degree > box.d) throw InvalidArgument("enumerate_cells: degree out of range");
  const auto& tuples = direction_tuples(box.d, degree);
  std::vector<OrientedCell> out;
  out.reserve(static_cast<std::size_t>(box.num_sites()) * tuples.size());
  for (std::int64_t s = 0; s < box.num_sites(); ++s) {
    Site x = box.site_at(s);
    for (const auto& t : tuples) out.push_back(OrientedCell{degree, x, t, 1});
  }
  return out;
}

Site unit(int d, int axis, int amount) {
  Site e(d, 0);
  e[axis] = amount;
  return e;
}

Site add(const Site& a, const Site& b) {
  Site r(a);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += b[i];
  return r;
}

Site sub(const Site& a, const Site& b) {
  Site r(a);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
  return r;
}

std::vector<OrientedCell> cell_boundary(const OrientedCell& cell) {
  if (cell.degree < 1) throw InvalidArgument("cell_boundary: degree must be at least 1");
  const int d = static_cast<int>(cell.base.size());
  std::vector<OrientedCell> out;
  out.reserve(2 * cell.degree);
  for (int j = 0; j < cell.degree; ++j) {
    std::vector<int> rest;
    for (int m = 0; m < cell.degree; ++m)
      if (m != j) rest.push_back(cell.dirs[m]);
    const int s = ((j % 2) == 0 ? 1 : -1) * cell.sign;
    out.push_back(OrientedCell{cell.degree - 1, add(cell.base, unit(d, cell.dirs[j])), rest, s});
    out.push_back(OrientedCell{cell.degree - 1, cell.base, rest, -s});
  }
  return out;
}

std::vector<std::pair<OrientedCell, int>> cofaces(const OrientedCell& edge) {
  if (edge.degree != 1) throw InvalidArgument("cofaces: expected an edge");
  const int d = static_cast<int>(edge.base.size());
  const int i = edge.dirs[0];
  std::vector<std::pair<OrientedCell, int>> out;
  out.reserve(2 * (d - 1));
  for (int j = 0; j < d; ++j) {
    if (j == i) continue;
    std::vector<int> dirs = i < j ? std::vector<int>{i, j} : std::vector<int>{j, i};
    // the edge sits at the base of one face and at base + e_j of the other
    const int at_base = (i < j ? 1 : -1) * edge.sign;
    out.push_back({OrientedCell{2, edge.base, dirs, 1}, at_base});
    out.push_back({OrientedCell{2, sub(edge.base, unit(d, j)), dirs, 1}, -at_base});
  }
  return out;
}

}  // namespace vwb
