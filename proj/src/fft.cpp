#include "vwb/fft.hpp"

#include <fftw3.h>

#include <mutex>

#include "vwb/errors.hpp"

namespace vwb {

namespace {

std::mutex planner_mu;  // the FFTW planner is not thread safe

void r2r(std::vector<double>& data, const std::vector<int>& dims, fftw_r2r_kind kind) {
  std::size_t total = 1;
  for (int n : dims) {
    if (n < 1 || (kind == FFTW_REDFT00 && n < 2)) throw InvalidArgument("r2r transform: bad dimension");
    total *= static_cast<std::size_t>(n);
  }
  if (total != data.size()) throw InvalidArgument("r2r transform: size mismatch");
  std::vector<fftw_r2r_kind> kinds(dims.size(), kind);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mu);
    plan = fftw_plan_r2r(static_cast<int>(dims.size()), dims.data(), data.data(), data.data(), kinds.data(),
                         FFTW_ESTIMATE);
  }
  if (!plan) throw ResourceLimit("r2r transform: planner failed");
  fftw_execute(plan);
  std::lock_guard<std::mutex> lock(planner_mu);
  fftw_destroy_plan(plan);
}

}  // namespace

void dst1(std::vector<double>& data, const std::vector<int>& dims) { r2r(data, dims, FFTW_RODFT00); }
void dct1(std::vector<double>& data, const std::vector<int>& dims) { r2r(data, dims, FFTW_REDFT00); }

}  // namespace vwb
