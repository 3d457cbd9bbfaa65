#pragma once

#include <cstdint>

#include "vwb/lattice.hpp"

namespace vwb {

// |x|_+ = |x| + 1 with the Euclidean norm
double plus_norm(const Site& x);

struct SumSpec {
  double alpha = 2.0;
  double gamma = 2.0;
  double a = 0.0;  // log power on the |y - x| factor
  double c = 0.0;  // log power on the |y| factor
  int d = 3;
  int radius = 0;  // half side of the summation cube centred at 0
};

struct SumResult {
  double value = 0.0;
  double tail_bound = 0.0;   // estimate of the mass outside the summation box
  double bound_shape = 0.0;  // right-hand side without its constant
  double ratio = 0.0;        // value / bound_shape
};

// sum_y (ln|y-x|_+)^a / |y-x|_+^alpha * (ln|y|_+)^c / |y|_+^gamma
SumResult convolution_sum(const SumSpec& spec, const Site& x);
// decay shape in |x|_+ for the regime selected by alpha and gamma
double convolution_bound_shape(const SumSpec& spec, const Site& x);

struct DoubleSumResult {
  double lhs = 0.0;
  double ratio = 0.0;  // lhs * |x|_+^{2d-2}
};
// sum_{z,z'} F(z) F(z') K(z - z') with F(z) = 1/(|z|_+^{d-1} |z-x|_+^{d-1}) and
// K(w) = (ln|w|_+)^a / |w|_+^d, over the cube of half side radius centred at x/2.
// x must lie on a coordinate axis with an even coordinate.
DoubleSumResult double_sum_check(const Site& x, double a, int radius, std::int64_t max_points = 40'000'000);

// sum_z (ln(|y1-z|_+ + |y2-z|_+))^a / (|y1-z|_+^{2d+1} + |y2-z|_+^{2d+1}) * (ln|z|_+)^c / |z|_+^{d-1}
// compared with (ln(|y1|_+ + |y2|_+))^{a+c} / ((|y1|_+^{d-1} + |y2|_+^{d-1}) |y1-y2|_+^{d+1}).
SumResult two_point_kernel_sum(const Site& y1, const Site& y2, double a, double c, int radius);

}  // namespace vwb
