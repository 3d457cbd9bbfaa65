#pragma once

#include <vector>

namespace vwb {

// In-place multidimensional real-to-real transforms (FFTW conventions, no
// normalisation). dims are row-major, first dimension slowest.
//   dst1: RODFT00, Y_k = 2 sum_j X_j sin(pi (j+1)(k+1) / (n+1))
//   dct1: REDFT00, Y_k = X_0 + (-1)^k X_{n-1} + 2 sum_{j=1}^{n-2} X_j cos(pi j k / (n-1))
void dst1(std::vector<double>& data, const std::vector<int>& dims);
void dct1(std::vector<double>& data, const std::vector<int>& dims);

}  // namespace vwb
