#include "vwb/charges.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <set>

namespace vwb {

std::int64_t pack_cell(const Site& base, int id) {
  std::int64_t k = 0;
  for (int v : base) {
    if (v < -512 || v > 511) throw InvalidArgument("pack_cell: coordinate out of range");
    k = (k << 10) | static_cast<std::int64_t>(v + 512);
  }
  return (k << 4) | id;
}

namespace {

bool face_less(const FaceEntry& a, const FaceEntry& b) {
  if (a.base != b.base) return a.base < b.base;
  return a.pair < b.pair;
}

const std::vector<int>& pair_dirs(int d, int pair) { return direction_tuples(d, 2)[pair]; }

}  // namespace

IntForm Charge::to_form(const LatticeBox& box) const {
  IntForm f(box, 2);
  for (const auto& e : q) {
    if (!box.contains(e.base)) throw InvalidArgument("Charge::to_form: support leaves the box");
    f.at(box.site_index(e.base), e.pair) = e.value;
  }
  return f;
}

std::vector<std::int64_t> Charge::key() const {
  std::vector<std::int64_t> k;
  k.reserve(2 * q.size());
  for (const auto& e : q) {
    k.push_back(pack_cell(e.base, e.pair));
    k.push_back(e.value);
  }
  return k;
}

Charge Charge::negated() const {
  Charge c = *this;
  for (auto& e : c.q) e.value = -e.value;
  for (auto& e : c.primitive) e.value = -e.value;
  return c;
}

std::vector<FaceEntry> faces_of(const IntForm& q) {
  if (q.degree() != 2) throw InvalidArgument("faces_of: expected a 2-form");
  std::vector<FaceEntry> out;
  for (std::int64_t s = 0; s < q.box().num_sites(); ++s)
    for (int c = 0; c < q.ncomp(); ++c)
      if (q.at(s, c) != 0) out.push_back(FaceEntry{q.box().site_at(s), c, q.at(s, c)});
  return out;
}

std::map<std::pair<Site, int>, std::int64_t> sparse_exterior_d(int d, const std::vector<FaceEntry>& q) {
  std::map<std::pair<Site, int>, std::int64_t> out;
  for (const auto& e : q) {
    const auto& ij = pair_dirs(d, e.pair);
    for (int k = 0; k < d; ++k) {
      if (k == ij[0] || k == ij[1]) continue;
      std::vector<int> t{ij[0], ij[1], k};
      std::sort(t.begin(), t.end());
      const int p = static_cast<int>(std::find(t.begin(), t.end(), k) - t.begin());
      const int tid = tuple_id(d, t);
      const std::int64_t s = (p % 2 == 0) ? 1 : -1;
      out[{e.base, tid}] += -s * e.value;
      out[{sub(e.base, unit(d, k)), tid}] += s * e.value;
    }
  }
  return out;
}

bool is_closed(int d, const std::vector<FaceEntry>& q) {
  for (const auto& [cube, v] : sparse_exterior_d(d, q))
    if (v != 0) return false;
  return true;
}

int face_distance_sq(const Site& a, const std::vector<int>& da, const Site& b, const std::vector<int>& db) {
  int acc = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const int alo = a[k], ahi = a[k] + (std::find(da.begin(), da.end(), static_cast<int>(k)) != da.end() ? 1 : 0);
    const int blo = b[k], bhi = b[k] + (std::find(db.begin(), db.end(), static_cast<int>(k)) != db.end() ? 1 : 0);
    const int gap = std::max({0, blo - ahi, alo - bhi});
    acc += gap * gap;
  }
  return acc;
}

bool support_connected(int d, const std::vector<FaceEntry>& q) {
  if (q.empty()) return false;
  std::vector<int> seen(q.size(), 0);
  std::deque<std::size_t> todo{0};
  seen[0] = 1;
  std::size_t count = 1;
  while (!todo.empty()) {
    auto i = todo.front();
    todo.pop_front();
    for (std::size_t j = 0; j < q.size(); ++j) {
      if (seen[j]) continue;
      if (face_distance_sq(q[i].base, pair_dirs(d, q[i].pair), q[j].base, pair_dirs(d, q[j].pair)) <= 1) {
        seen[j] = 1;
        ++count;
        todo.push_back(j);
      }
    }
  }
  return count == q.size();
}

bool supports_touch(const Charge& a, const Charge& b) {
  // bounding boxes first
  for (int k = 0; k < a.d; ++k)
    if (a.lo[k] > b.hi[k] + 1 || b.lo[k] > a.hi[k] + 1) return false;
  for (const auto& x : a.q)
    for (const auto& y : b.q)
      if (face_distance_sq(x.base, pair_dirs(a.d, x.pair), y.base, pair_dirs(a.d, y.pair)) <= 1) return true;
  return false;
}

std::vector<FaceEntry> sparse_d_of_edges(int d, const std::vector<EdgeEntry>& n) {
  std::map<std::pair<Site, int>, std::int64_t> acc;
  for (const auto& e : n) {
    for (const auto& [face, sign] : cofaces(OrientedCell{1, e.base, {e.dir}, 1}))
      acc[{face.base, tuple_id(d, face.dirs)}] += sign * e.value;
  }
  std::vector<FaceEntry> out;
  for (const auto& [k, v] : acc)
    if (v != 0) out.push_back(FaceEntry{k.first, k.second, v});
  return out;
}

std::vector<EdgeEntry> poincare_primitive(int d, const std::vector<FaceEntry>& qin) {
  std::vector<FaceEntry> q;
  for (const auto& e : qin)
    if (e.value != 0) q.push_back(e);
  if (q.empty()) return {};
  if (!is_closed(d, q)) throw NotClosed("poincare_primitive: dq != 0");

  Site lo = q[0].base, hi = q[0].base;
  for (const auto& e : q) {
    const auto& ij = pair_dirs(d, e.pair);
    for (int k = 0; k < d; ++k) {
      lo[k] = std::min(lo[k], e.base[k]);
      const int top = e.base[k] + ((k == ij[0] || k == ij[1]) ? 1 : 0);
      hi[k] = std::max(hi[k], top);
    }
  }
  // vertices of the bounding box, row-major
  std::vector<int> w(d);
  std::int64_t nv = 1;
  for (int k = 0; k < d; ++k) {
    w[k] = hi[k] - lo[k] + 1;
    nv *= w[k];
  }
  std::vector<std::int64_t> str(d, 1);
  for (int k = d - 2; k >= 0; --k) str[k] = str[k + 1] * w[k + 1];
  auto coords = [&](std::int64_t v) {
    Site x(d);
    for (int k = d - 1; k >= 0; --k) {
      x[k] = lo[k] + static_cast<int>(v % w[k]);
      v /= w[k];
    }
    return x;
  };

  std::map<std::pair<Site, int>, std::int64_t> qmap;
  for (const auto& e : q) qmap[{e.base, e.pair}] = e.value;

  // axial gauge: n_0 = 0, n_j(x) = sum_{s < x_0} q_{0j}(s, x')
  std::vector<std::int64_t> n(static_cast<std::size_t>(nv) * d, 0);
  for (std::int64_t v = 0; v < nv; ++v) {
    Site x = coords(v);
    for (int j = 1; j < d; ++j) {
      if (x[j] == hi[j]) continue;  // edge would leave the box
      const int pid = tuple_id(d, {0, j});
      std::int64_t acc = 0;
      Site y = x;
      for (int s = lo[0]; s < x[0]; ++s) {
        y[0] = s;
        auto it = qmap.find({y, pid});
        if (it != qmap.end()) acc += it->second;
      }
      n[v * d + j] = acc;
    }
  }

  // Gauge away the values on the surface of the box so that the zero extension
  // outside stays a primitive.
  auto on_surface = [&](const Site& x) {
    for (int k = 0; k < d; ++k)
      if (x[k] == lo[k] || x[k] == hi[k]) return true;
    return false;
  };
  auto surface_edge = [&](const Site& x, int j) {
    if (x[j] == hi[j]) return false;
    for (int k = 0; k < d; ++k)
      if (k != j && (x[k] == lo[k] || x[k] == hi[k])) return true;
    return false;
  };
  std::vector<std::int64_t> g(nv, 0);
  std::vector<char> done(nv, 0);
  std::deque<std::int64_t> todo;
  done[0] = 1;  // the corner lo is on the surface
  todo.push_back(0);
  while (!todo.empty()) {
    auto v = todo.front();
    todo.pop_front();
    Site x = coords(v);
    for (int j = 0; j < d; ++j) {
      if (surface_edge(x, j)) {
        auto u = v + str[j];
        if (!done[u]) {
          done[u] = 1;
          g[u] = g[v] + n[v * d + j];
          todo.push_back(u);
        }
      }
      if (x[j] > lo[j]) {
        Site y = x;
        --y[j];
        if (surface_edge(y, j)) {
          auto u = v - str[j];
          if (!done[u]) {
            done[u] = 1;
            g[u] = g[v] - n[u * d + j];
            todo.push_back(u);
          }
        }
      }
    }
  }
  std::vector<EdgeEntry> out;
  for (std::int64_t v = 0; v < nv; ++v) {
    Site x = coords(v);
    if (!on_surface(x)) g[v] = 0;
  }
  for (std::int64_t v = 0; v < nv; ++v) {
    Site x = coords(v);
    for (int j = 0; j < d; ++j) {
      if (x[j] == hi[j]) continue;
      const std::int64_t val = n[v * d + j] - (g[v + str[j]] - g[v]);
      if (val != 0) out.push_back(EdgeEntry{x, j, val});
    }
  }
  return out;
}

Charge make_charge(int d, std::vector<FaceEntry> entries) {
  Charge c;
  c.d = d;
  for (auto& e : entries)
    if (e.value != 0) c.q.push_back(e);
  std::sort(c.q.begin(), c.q.end(), face_less);
  if (c.q.empty()) {
    c.anchor = Site(d, 0);
    c.lo = c.hi = Site(d, 0);
    return c;
  }
  c.anchor = c.q.front().base;
  c.lo = c.q.front().base;
  c.hi = c.q.front().base;
  c.l1 = 0;
  for (const auto& e : c.q) {
    const auto& ij = pair_dirs(d, e.pair);
    c.l1 += static_cast<int>(std::llabs(e.value));
    for (int k = 0; k < d; ++k) {
      c.lo[k] = std::min(c.lo[k], e.base[k]);
      c.hi[k] = std::max(c.hi[k], e.base[k] + ((k == ij[0] || k == ij[1]) ? 1 : 0));
    }
  }
  c.diameter = 0;
  for (int k = 0; k < d; ++k) c.diameter = std::max(c.diameter, c.hi[k] - c.lo[k]);
  c.primitive = poincare_primitive(d, c.q);
  return c;
}

namespace {

// Exhaustive growth of cube-connected closed integer 2-forms.
class Enumerator {
 public:
  Enumerator(const LatticeBox& box, int cap, const EnumerationOptions& opt)
      : box_(box), d_(box.d), cap_(cap), opt_(opt), ext_(box.d, box.L + 1) {
    P_ = binomial(d_, 2);
    T_ = binomial(d_, 3);
    nfaces_ = box_.num_sites() * P_;
    ncubes_ = ext_.num_sites() * T_;
    per_face_ = 2 * (d_ - 2);
    face_cube_.assign(static_cast<std::size_t>(nfaces_) * per_face_, -1);
    face_sign_.assign(static_cast<std::size_t>(nfaces_) * per_face_, 0);
    cube_face_.assign(static_cast<std::size_t>(ncubes_) * 6, -1);
    const auto& pairs = direction_tuples(d_, 2);
    const auto& triples = direction_tuples(d_, 3);
    for (std::int64_t s = 0; s < box_.num_sites(); ++s) {
      Site x = box_.site_at(s);
      for (int p = 0; p < P_; ++p) {
        const std::int64_t f = s * P_ + p;
        int m = 0;
        for (int k = 0; k < d_; ++k) {
          if (k == pairs[p][0] || k == pairs[p][1]) continue;
          std::vector<int> t{pairs[p][0], pairs[p][1], k};
          std::sort(t.begin(), t.end());
          const int pos = static_cast<int>(std::find(t.begin(), t.end(), k) - t.begin());
          const int tid = tuple_id(d_, t);
          const int sg = (pos % 2 == 0) ? 1 : -1;
          face_cube_[f * per_face_ + m] = ext_.site_index(x) * T_ + tid;
          face_sign_[f * per_face_ + m] = -sg;
          ++m;
          face_cube_[f * per_face_ + m] = ext_.site_index(sub(x, unit(d_, k))) * T_ + tid;
          face_sign_[f * per_face_ + m] = sg;
          ++m;
        }
      }
    }
    for (std::int64_t s = 0; s < ext_.num_sites(); ++s) {
      Site y = ext_.site_at(s);
      for (int t = 0; t < T_; ++t) {
        int m = 0;
        for (int pos = 0; pos < 3; ++pos) {
          std::vector<int> rest;
          for (int r = 0; r < 3; ++r)
            if (r != pos) rest.push_back(triples[t][r]);
          const int pid = tuple_id(d_, rest);
          for (const Site& b : {add(y, unit(d_, triples[t][pos])), y}) {
            if (box_.contains(b)) cube_face_[(s * T_ + t) * 6 + m] = box_.site_index(b) * P_ + pid;
            ++m;
          }
        }
      }
    }
    val_.assign(nfaces_, 0);
    reached_.assign(nfaces_, 0);
    div_.assign(ncubes_, 0);
  }

  std::vector<Charge> run() {
    for (std::int64_t root = 0; root < nfaces_; ++root) {
      root_ = root;
      reached_[root] = 1;
      std::vector<int> added;
      std::vector<std::int64_t> untried;
      add_neighbours(root, untried, added);
      members_.push_back(root);
      for (int v : value_order(cap_)) {
        apply(root, v);
        if (feasible()) {
          if (total_div_ == 0) emit();
          rec(untried);
        }
        apply(root, -v);
      }
      members_.pop_back();
      for (auto a : added) reached_[a] = 0;
      reached_[root] = 0;
    }
    return std::move(out_);
  }

 private:
  static std::vector<int> value_order(int m) {
    std::vector<int> v;
    for (int a = 1; a <= m; ++a) {
      v.push_back(a);
      v.push_back(-a);
    }
    return v;
  }

  void apply(std::int64_t f, int v) {
    val_[f] += v;
    l1_ += std::abs(val_[f]) - std::abs(val_[f] - v);
    for (int m = 0; m < per_face_; ++m) {
      const auto c = face_cube_[f * per_face_ + m];
      const int before = std::abs(div_[c]);
      div_[c] += face_sign_[f * per_face_ + m] * v;
      total_div_ += std::abs(div_[c]) - before;
    }
  }

  bool feasible() const { return total_div_ <= static_cast<std::int64_t>(per_face_) * (cap_ - l1_); }

  void add_neighbours(std::int64_t f, std::vector<std::int64_t>& untried, std::vector<int>& added) {
    for (int m = 0; m < per_face_; ++m) {
      const auto c = face_cube_[f * per_face_ + m];
      for (int r = 0; r < 6; ++r) {
        const auto g = cube_face_[c * 6 + r];
        if (g < 0 || g <= root_ || reached_[g]) continue;
        reached_[g] = 1;
        added.push_back(static_cast<int>(g));
        untried.push_back(g);
      }
    }
  }

  std::int64_t defective_cube() const {
    for (auto f : members_)
      for (int m = 0; m < per_face_; ++m) {
        const auto c = face_cube_[f * per_face_ + m];
        if (div_[c] != 0) return c;
      }
    return -1;
  }

  void rec(const std::vector<std::int64_t>& untried) {
    if (++nodes_ > opt_.max_nodes)
      throw ResourceLimit("enumerate_charges: node budget exhausted after " + std::to_string(out_.size()) + " charges");
    const int remaining = cap_ - l1_;
    std::size_t pick = untried.size();
    if (total_div_ > 0) {
      const auto c = defective_cube();
      for (std::size_t i = 0; i < untried.size() && pick == untried.size(); ++i)
        for (int r = 0; r < 6; ++r)
          if (cube_face_[c * 6 + r] == untried[i]) {
            pick = i;
            break;
          }
      if (pick == untried.size()) return;
    } else {
      if (untried.empty() || remaining <= 0) return;
      pick = 0;
    }
    const auto f = untried[pick];
    std::vector<std::int64_t> rest;
    rest.reserve(untried.size() + 8);
    for (std::size_t i = 0; i < untried.size(); ++i)
      if (i != pick) rest.push_back(untried[i]);

    if (remaining >= 1) {
      std::vector<std::int64_t> grown = rest;
      std::vector<int> added;
      add_neighbours(f, grown, added);
      members_.push_back(f);
      for (int v : value_order(remaining)) {
        apply(f, v);
        if (feasible()) {
          if (total_div_ == 0) emit();
          rec(grown);
        }
        apply(f, -v);
      }
      members_.pop_back();
      for (auto a : added) reached_[a] = 0;
    }
    rec(rest);
  }

  void emit() {
    if (static_cast<std::int64_t>(out_.size()) >= opt_.max_charges)
      throw ResourceLimit("enumerate_charges: charge budget exceeded at " + std::to_string(out_.size()) + " charges");
    std::vector<FaceEntry> e;
    for (auto f : members_) e.push_back(FaceEntry{box_.site_at(f / P_), static_cast<int>(f % P_), val_[f]});
    out_.push_back(make_charge(d_, std::move(e)));
  }

  LatticeBox box_;
  int d_, cap_;
  EnumerationOptions opt_;
  LatticeBox ext_;
  int P_ = 0, T_ = 0, per_face_ = 0;
  std::int64_t nfaces_ = 0, ncubes_ = 0;
  std::vector<std::int64_t> face_cube_;
  std::vector<int> face_sign_;
  std::vector<std::int64_t> cube_face_;
  std::vector<int> val_;
  std::vector<char> reached_;
  std::vector<int> div_;
  std::vector<std::int64_t> members_;
  std::int64_t root_ = 0;
  std::int64_t total_div_ = 0;
  int l1_ = 0;
  std::int64_t nodes_ = 0;
  std::vector<Charge> out_;
};

bool share_cube(int d, const Charge& a, const Charge& b) {
  auto ca = sparse_exterior_d(d, a.q);
  for (const auto& [cube, v] : sparse_exterior_d(d, b.q))
    if (ca.count(cube)) return true;
  return false;
}

// Unions of at least two cube-connected blocks that are connected only
// through faces at distance <= 1.
void add_unions(int d, int cap, const std::vector<Charge>& blocks, std::vector<Charge>& out) {
  int min_l1 = cap + 1;
  for (const auto& b : blocks) min_l1 = std::min(min_l1, b.l1);
  if (2 * min_l1 > cap) return;
  std::vector<std::size_t> chosen;
  std::set<std::vector<std::int64_t>> seen;
  std::function<void(std::size_t, int)> grow = [&](std::size_t from, int used) {
    if (chosen.size() >= 2) {
      std::vector<FaceEntry> u;
      for (auto i : chosen) u.insert(u.end(), blocks[i].q.begin(), blocks[i].q.end());
      if (support_connected(d, u)) {
        Charge c = make_charge(d, u);
        if (seen.insert(c.key()).second) out.push_back(std::move(c));
      }
    }
    for (std::size_t j = from; j < blocks.size(); ++j) {
      if (used + blocks[j].l1 > cap) continue;
      bool ok = true, near = chosen.empty();
      for (auto i : chosen) {
        if (share_cube(d, blocks[i], blocks[j])) {
          ok = false;
          break;
        }
        near = near || supports_touch(blocks[i], blocks[j]);
      }
      if (!ok || !near) continue;
      chosen.push_back(j);
      grow(j + 1, used + blocks[j].l1);
      chosen.pop_back();
    }
  };
  grow(0, 0);
}

}  // namespace

std::vector<Charge> enumerate_charges(const LatticeBox& box, int l1_cap, const EnumerationOptions& opt) {
  if (l1_cap < 1) throw InvalidArgument("enumerate_charges: l1_cap must be at least 1");
  if (box.d > 5) throw InvalidArgument("enumerate_charges: d <= 5 supported");
  Enumerator en(box, l1_cap, opt);
  std::vector<Charge> blocks = en.run();
  std::vector<Charge> out = blocks;
  add_unions(box.d, l1_cap, blocks, out);
  if (static_cast<std::int64_t>(out.size()) > opt.max_charges)
    throw ResourceLimit("enumerate_charges: charge budget exceeded with " + std::to_string(out.size()) + " charges");
  return out;
}

PoincareReport poincare_sweep(const std::vector<Charge>& pool) {
  PoincareReport r;
  for (const auto& c : pool) {
    ++r.checked;
    auto dn = sparse_d_of_edges(c.d, c.primitive);
    std::sort(dn.begin(), dn.end(), face_less);
    bool ok = dn.size() == c.q.size();
    for (std::size_t i = 0; ok && i < dn.size(); ++i)
      ok = dn[i].base == c.q[i].base && dn[i].pair == c.q[i].pair && dn[i].value == c.q[i].value;
    std::int64_t sup = 0;
    for (const auto& e : c.primitive) {
      sup = std::max<std::int64_t>(sup, std::llabs(e.value));
      for (int k = 0; k < c.d && ok; ++k) {
        const int top = e.base[k] + (k == e.dir ? 1 : 0);
        ok = e.base[k] >= c.lo[k] && top <= c.hi[k];
      }
    }
    if (!ok) ++r.failures;
    if (c.l1 > 0) {
      r.sup_constant = std::max(r.sup_constant, static_cast<double>(sup) / c.l1);
      r.diameter_constant = std::max(r.diameter_constant, static_cast<double>(c.diameter) / c.l1);
    }
  }
  return r;
}

bool graph_connected(const SimpleGraph& g) {
  if (g.n <= 1) return g.n == 1;
  std::vector<int> parent(g.n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int a) { return parent[a] == a ? a : parent[a] = find(parent[a]); };
  int comps = g.n;
  for (auto [a, b] : g.edges) {
    int ra = find(a), rb = find(b);
    if (ra != rb) {
      parent[ra] = rb;
      --comps;
    }
  }
  return comps == 1;
}

std::int64_t mayer_coefficient(const SimpleGraph& g) {
  if (!graph_connected(g)) throw InvalidArgument("mayer_coefficient: graph must be connected");
  const std::size_t m = g.edges.size();
  if (m > 30) throw ResourceLimit("mayer_coefficient: too many edges for subset enumeration");
  std::int64_t total = 0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
    SimpleGraph h{g.n, {}};
    for (std::size_t e = 0; e < m; ++e)
      if (mask >> e & 1) h.edges.push_back(g.edges[e]);
    if (graph_connected(h)) total += (h.edges.size() % 2 == 0) ? 1 : -1;
  }
  return total;
}

std::size_t ChargePool::KeyHash::operator()(const std::vector<std::int64_t>& k) const {
  std::uint64_t h = 1469598103934665603ull;
  for (auto v : k) {
    h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  }
  return static_cast<std::size_t>(h);
}

ChargePool::ChargePool(std::vector<Charge> charges, int l1_cap) : charges_(std::move(charges)), cap_(l1_cap) {
  for (std::size_t i = 0; i < charges_.size(); ++i) {
    index_.emplace(charges_[i].key(), i);
    by_anchor_[charges_[i].anchor].push_back(i);
  }
}

std::int64_t ChargePool::find(const std::vector<std::int64_t>& key) const {
  auto it = index_.find(key);
  return it == index_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

namespace {

bool inside(const Charge& part, const Charge& whole) {
  for (int k = 0; k < whole.d; ++k)
    if (part.lo[k] < whole.lo[k] || part.hi[k] > whole.hi[k]) return false;
  return true;
}

double self_inner(const Charge& c) {
  double s = 0.0;
  for (const auto& e : c.q) s += static_cast<double>(e.value) * static_cast<double>(e.value);
  return s;
}

std::vector<FaceEntry> difference(const std::vector<FaceEntry>& a, const std::vector<FaceEntry>& b) {
  std::map<std::pair<Site, int>, std::int64_t> m;
  for (const auto& e : a) m[{e.base, e.pair}] += e.value;
  for (const auto& e : b) m[{e.base, e.pair}] -= e.value;
  std::vector<FaceEntry> out;
  for (const auto& [k, v] : m)
    if (v != 0) out.push_back(FaceEntry{k.first, k.second, v});
  return out;
}

std::vector<std::int64_t> key_of(const std::vector<FaceEntry>& q) {
  std::vector<std::int64_t> k;
  for (const auto& e : q) {
    k.push_back(pack_cell(e.base, e.pair));
    k.push_back(e.value);
  }
  return k;
}

}  // namespace

double ChargePool::activity(double beta, const Charge& q, int n_max) const {
  if (!(beta > 0.0)) throw InvalidArgument("activity: beta must be positive");
  if (n_max < 1) throw InvalidArgument("activity: n_max must be at least 1");
  if (n_max > 4) throw ResourceLimit("activity: decompositions beyond 4 parts are not supported");
  if (q.l1 > cap_) throw ResourceLimit("activity: charge exceeds the pool cap, decomposition pool insufficient");
  const double sb = std::sqrt(beta);
  double z = std::exp(-0.5 * sb * self_inner(q));
  if (n_max == 1) return z;

  // a part inside the bounding box of q has its anchor there too
  std::vector<std::size_t> local;
  Site a = q.lo;
  while (true) {
    auto it = by_anchor_.find(a);
    if (it != by_anchor_.end())
      for (auto i : it->second)
        if (inside(charges_[i], q)) local.push_back(i);
    int k = q.d - 1;
    for (; k >= 0; --k) {
      if (++a[k] <= q.hi[k]) break;
      a[k] = q.lo[k];
    }
    if (k < 0) break;
  }
  std::sort(local.begin(), local.end());

  // ordered tuples of parts summing to q
  std::vector<std::size_t> parts;
  double factorial = 1.0;
  std::vector<double> sums(n_max + 1, 0.0);
  std::function<void(const std::vector<FaceEntry>&, int)> rec = [&](const std::vector<FaceEntry>& rest, int left) {
    if (left == 1) {
      auto j = find(key_of(rest));
      if (j < 0 || !inside(charges_[j], q)) return;
      parts.push_back(static_cast<std::size_t>(j));
      SimpleGraph g{static_cast<int>(parts.size()), {}};
      for (std::size_t a = 0; a < parts.size(); ++a)
        for (std::size_t b = a + 1; b < parts.size(); ++b)
          if (supports_touch(charges_[parts[a]], charges_[parts[b]]))
            g.edges.push_back({static_cast<int>(a), static_cast<int>(b)});
      if (graph_connected(g)) {
        double e = 0.0;
        for (auto p : parts) e += self_inner(charges_[p]);
        sums[parts.size()] += static_cast<double>(mayer_coefficient(g)) * std::exp(-0.5 * sb * e);
      }
      parts.pop_back();
      return;
    }
    for (auto i : local) {
      parts.push_back(i);
      rec(difference(rest, charges_[i].q), left - 1);
      parts.pop_back();
    }
  };
  for (int n = 2; n <= n_max; ++n) {
    factorial *= n;
    rec(q.q, n);
    z += sums[n] / factorial;
  }
  return z;
}

double ChargePool::activity(double beta, std::size_t index, int n_max) const {
  const auto key = std::make_tuple(beta, index, n_max);
  {
    std::lock_guard<std::mutex> lock(cache_mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  const double z = activity(beta, charges_.at(index), n_max);
  std::lock_guard<std::mutex> lock(cache_mu_);
  cache_[key] = z;
  return z;
}

WeightedSum weighted_charge_sum(const std::function<double(const Site&)>& h, int k, double beta,
                                const ChargePool& pool, const LatticeBox& box, int n_max) {
  WeightedSum r;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& c = pool.charges()[i];
    const double hv = h(c.anchor);
    if (hv == 0.0) continue;
    r.value += std::abs(pool.activity(beta, i, n_max)) * std::pow(static_cast<double>(c.l1), k) * hv;
  }
  for (std::int64_t s = 0; s < box.num_sites(); ++s) r.reference += h(box.site_at(s));
  r.ratio = r.reference > 0.0 ? r.value / r.reference : 0.0;
  return r;
}

double fitted_activity_constant(const ChargePool& pool, double beta, int n_max) {
  double c = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& q = pool.charges()[i];
    const double z = std::abs(pool.activity(beta, i, n_max));
    if (z <= 0.0) continue;
    c = std::min(c, -std::log(z) / (std::sqrt(beta) * q.l1));
  }
  return c;
}

}  // namespace vwb
