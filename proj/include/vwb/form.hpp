#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <type_traits>
#include <vector>

#include "vwb/lattice.hpp"

namespace vwb {

// A k-form on a box: one value per positively oriented k-cell whose base site
// lies in the box. Values outside the box are zero.
template <class T>
class Form {
 public:
  Form() = default;
  Form(const LatticeBox& box, int degree) : box_(box), degree_(degree) {
    if (degree < 0 || degree > 3 || degree > box.d) throw InvalidArgument("Form: degree out of range");
    ncomp_ = binomial(box.d, degree);
    values_.assign(static_cast<std::size_t>(box.num_sites()) * ncomp_, T{});
  }

  const LatticeBox& box() const { return box_; }
  int degree() const { return degree_; }
  int ncomp() const { return ncomp_; }
  std::size_t size() const { return values_.size(); }

  T& at(std::int64_t site, int comp) { return values_[static_cast<std::size_t>(site) * ncomp_ + comp]; }
  T at(std::int64_t site, int comp) const { return values_[static_cast<std::size_t>(site) * ncomp_ + comp]; }

  T value(const Site& x, int comp) const {
    if (!box_.contains(x)) return T{};
    return at(box_.site_index(x), comp);
  }
  T value(const OrientedCell& c) const {
    if (c.degree != degree_) throw InvalidArgument("Form::value: degree mismatch");
    return static_cast<T>(c.sign) * value(c.base, tuple_id(box_.d, c.dirs));
  }
  // Stores v on the cell, i.e. -v on the positive orientation when c.sign < 0.
  // Cells outside the box are ignored.
  void set(const OrientedCell& c, T v) {
    if (c.degree != degree_) throw InvalidArgument("Form::set: degree mismatch");
    if (!box_.contains(c.base)) return;
    at(box_.site_index(c.base), tuple_id(box_.d, c.dirs)) = static_cast<T>(c.sign) * v;
  }

  std::vector<T>& data() { return values_; }
  const std::vector<T>& data() const { return values_; }

  bool operator==(const Form& o) const { return box_ == o.box_ && degree_ == o.degree_ && values_ == o.values_; }

 private:
  LatticeBox box_;
  int degree_ = 0;
  int ncomp_ = 1;
  std::vector<T> values_;
};

using RealForm = Form<double>;
using IntForm = Form<std::int64_t>;

namespace detail {

inline void check_same(int da, int db, const LatticeBox& a, const LatticeBox& b, const char* who) {
  if (da != db || a != b) throw InvalidArgument(std::string(who) + ": degree or box mismatch");
}

// Neighbour index or -1 when it leaves the box.
inline std::int64_t shifted(const LatticeBox& box, std::int64_t s, const Site& x, int axis, int step) {
  const int v = x[axis] + step;
  if (v < -box.L || v > box.L) return -1;
  return s + step * box.stride(axis);
}

}  // namespace detail

template <class T>
Form<T> gradient(const Form<T>& u) {
  if (u.degree() != 0) throw InvalidArgument("gradient: expected a 0-form");
  const auto& box = u.box();
  Form<T> out(box, 1);
  for (std::int64_t s = 0; s < box.num_sites(); ++s) {
    Site x = box.site_at(s);
    for (int i = 0; i < box.d; ++i) {
      auto n = detail::shifted(box, s, x, i, 1);
      out.at(s, i) = (n >= 0 ? u.at(n, 0) : T{}) - u.at(s, 0);
    }
  }
  return out;
}

// n-fold application of the sum-of-differences Laplacian, componentwise,
// with zero values outside the box between applications.
template <class T>
Form<T> laplacian_power(const Form<T>& f, int n) {
  if (n < 1) throw InvalidArgument("laplacian_power: n must be at least 1");
  const auto& box = f.box();
  Form<T> cur = f;
  Form<T> next(box, f.degree());
  for (int rep = 0; rep < n; ++rep) {
    for (std::int64_t s = 0; s < box.num_sites(); ++s) {
      Site x = box.site_at(s);
      for (int c = 0; c < f.ncomp(); ++c) {
        T acc{};
        const T here = cur.at(s, c);
        for (int i = 0; i < box.d; ++i) {
          for (int step : {-1, 1}) {
            auto nb = detail::shifted(box, s, x, i, step);
            acc += (nb >= 0 ? cur.at(nb, c) : T{}) - here;
          }
        }
        next.at(s, c) = acc;
      }
    }
    std::swap(cur, next);
  }
  return cur;
}

// (df)(c) = sum over the boundary of c of f with induced signs.
template <class T>
Form<T> exterior_d(const Form<T>& f) {
  if (f.degree() != 1 && f.degree() != 2) throw InvalidArgument("exterior_d: degree must be 1 or 2");
  const auto& box = f.box();
  const int k = f.degree() + 1;
  if (k > box.d) throw InvalidArgument("exterior_d: degree exceeds dimension");
  Form<T> out(box, k);
  const auto& tuples = direction_tuples(box.d, k);
  std::vector<std::vector<int>> rest_id(tuples.size(), std::vector<int>(k));
  for (std::size_t t = 0; t < tuples.size(); ++t) {
    for (int j = 0; j < k; ++j) {
      std::vector<int> rest;
      for (int m = 0; m < k; ++m)
        if (m != j) rest.push_back(tuples[t][m]);
      rest_id[t][j] = tuple_id(box.d, rest);
    }
  }
  for (std::int64_t s = 0; s < box.num_sites(); ++s) {
    Site x = box.site_at(s);
    for (std::size_t t = 0; t < tuples.size(); ++t) {
      T acc{};
      for (int j = 0; j < k; ++j) {
        const T sign = (j % 2 == 0) ? T(1) : T(-1);
        auto up = detail::shifted(box, s, x, tuples[t][j], 1);
        const T hi = up >= 0 ? f.at(up, rest_id[t][j]) : T{};
        acc += sign * (hi - f.at(s, rest_id[t][j]));
      }
      out.at(s, static_cast<int>(t)) = acc;
    }
  }
  return out;
}

// Adjoint of d. For a 2-form: (d*f)(e) = sum over faces f' containing e of
// the incidence sign times f(f'). For a 1-form it is the divergence
// (d*h)(x) = sum_i h(x - e_i, i) - h(x, i).
template <class T>
Form<T> codifferential_d_star(const Form<T>& f) {
  const auto& box = f.box();
  if (f.degree() == 1) {
    Form<T> out(box, 0);
    for (std::int64_t s = 0; s < box.num_sites(); ++s) {
      Site x = box.site_at(s);
      T acc{};
      for (int i = 0; i < box.d; ++i) {
        auto dn = detail::shifted(box, s, x, i, -1);
        acc += (dn >= 0 ? f.at(dn, i) : T{}) - f.at(s, i);
      }
      out.at(s, 0) = acc;
    }
    return out;
  }
  if (f.degree() != 2) throw InvalidArgument("codifferential_d_star: degree must be 2 (or 1)");
  Form<T> out(box, 1);
  const int d = box.d;
  std::vector<int> face_of(d * d, -1);
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) face_of[i * d + j] = face_of[j * d + i] = tuple_id(d, {i, j});
  for (std::int64_t s = 0; s < box.num_sites(); ++s) {
    Site x = box.site_at(s);
    for (int i = 0; i < d; ++i) {
      T acc{};
      for (int j = 0; j < d; ++j) {
        if (j == i) continue;
        const int fid = face_of[i * d + j];
        const T at_base = i < j ? T(1) : T(-1);
        auto dn = detail::shifted(box, s, x, j, -1);
        acc += at_base * f.at(s, fid);
        if (dn >= 0) acc -= at_base * f.at(dn, fid);
      }
      out.at(s, i) = acc;
    }
  }
  return out;
}

template <class T>
double inner_product(const Form<T>& f, const Form<T>& g) {
  detail::check_same(f.degree(), g.degree(), f.box(), g.box(), "inner_product");
  double acc = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) acc += static_cast<double>(f.data()[i]) * static_cast<double>(g.data()[i]);
  return acc;
}

// Cellwise norms: every oriented cell counts once.
template <class T>
double norm_l1(const Form<T>& f) {
  double acc = 0.0;
  for (auto v : f.data()) acc += std::abs(static_cast<double>(v));
  return acc;
}
template <class T>
double norm_l2(const Form<T>& f) {
  return std::sqrt(inner_product(f, f));
}
template <class T>
double norm_linf(const Form<T>& f) {
  double m = 0.0;
  for (auto v : f.data()) m = std::max(m, std::abs(static_cast<double>(v)));
  return m;
}

// Site norms: the components at a site form a vector in R^{C(d,k)} measured
// with its Euclidean length.
template <class T>
double site_norm_l1(const Form<T>& f) {
  double acc = 0.0;
  for (std::int64_t s = 0; s < f.box().num_sites(); ++s) {
    double sq = 0.0;
    for (int c = 0; c < f.ncomp(); ++c) sq += static_cast<double>(f.at(s, c)) * static_cast<double>(f.at(s, c));
    acc += std::sqrt(sq);
  }
  return acc;
}
template <class T>
double site_norm_linf(const Form<T>& f) {
  double m = 0.0;
  for (std::int64_t s = 0; s < f.box().num_sites(); ++s) {
    double sq = 0.0;
    for (int c = 0; c < f.ncomp(); ++c) sq += static_cast<double>(f.at(s, c)) * static_cast<double>(f.at(s, c));
    m = std::max(m, std::sqrt(sq));
  }
  return m;
}

// k (x) l evaluated lazily at a pair of sites.
template <class T>
class TensorProduct {
 public:
  TensorProduct(const Form<T>& k, const Form<T>& l) : k_(k), l_(l) {
    if (k.degree() != 2 || l.degree() != 2) throw InvalidArgument("tensor_product: expected 2-forms");
    if (k.box() != l.box()) throw InvalidArgument("tensor_product: box mismatch");
  }
  int dim() const { return k_.ncomp(); }
  // row-major ncomp x ncomp matrix
  std::vector<T> operator()(const Site& x, const Site& y) const {
    const int n = k_.ncomp();
    std::vector<T> m(static_cast<std::size_t>(n) * n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) m[a * n + b] = k_.value(x, a) * l_.value(y, b);
    return m;
  }
  T entry(const Site& x, int a, const Site& y, int b) const { return k_.value(x, a) * l_.value(y, b); }

 private:
  const Form<T>& k_;
  const Form<T>& l_;
};

template <class T>
TensorProduct<T> tensor_product(const Form<T>& k, const Form<T>& l) {
  return TensorProduct<T>(k, l);
}

// Binary layout: magic "VWBFORM1", int32 degree, d, L, int32 scalar tag
// (0 real, 1 integer), then values in canonical order.
void write_form(std::ostream& os, const RealForm& f);
void write_form(std::ostream& os, const IntForm& f);
RealForm read_real_form(std::istream& is);
IntForm read_int_form(std::istream& is);
std::string dump_form(const RealForm& f);

}  // namespace vwb
