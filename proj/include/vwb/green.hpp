#pragma once

#include <cstdint>
#include <vector>

#include "vwb/form.hpp"
#include "vwb/lattice.hpp"

namespace vwb {

// Solves -Lap u = f for u vanishing on the boundary of the box and outside it.
// f and the result are indexed over the whole box; boundary entries of f are
// ignored and the result is zero there.
std::vector<double> dirichlet_solve(const LatticeBox& box, const std::vector<double>& f);
// The Dirichlet Green's function column with source y.
std::vector<double> dirichlet_green_column(const LatticeBox& box, const Site& y);

enum class GreenMethod { kDirichletExtrapolation, kTorus };

// Infinite-volume G = (-Lap)^{-1} delta_0 on the box of half side radius + 1,
// so that forward differences are available on the whole radius box.
struct GreenField {
  int d = 3;
  int radius = 0;
  LatticeBox box;
  std::vector<double> values;
  GreenMethod method = GreenMethod::kDirichletExtrapolation;
  double accuracy = 0.0;  // estimated sup error over the radius box
  double residual = 0.0;  // sup |Lap G + delta_0| over the radius box

  double operator()(const Site& x) const;
};

GreenField compute_green(int d, int radius, double tol, GreenMethod method = GreenMethod::kDirichletExtrapolation,
                         std::int64_t max_sites = 150'000'000);
double green_residual(const GreenField& g);

// forward differences on the radius box
RealForm green_gradient(const GreenField& g);

struct DecayRow {
  Site x;
  double norm = 0.0;
  double value = 0.0;
  double ratio = 0.0;  // value * norm^exponent
};
// Sites along the axis, face diagonal and body diagonal rays, by increasing norm.
std::vector<DecayRow> decay_ratio_table(const GreenField& g, double exponent);
// same rays for the Euclidean norm of the gradient
std::vector<DecayRow> gradient_decay_table(const GreenField& g, double exponent);

}  // namespace vwb
