#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace vwb {

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
  std::int64_t samples = 0;
  int batches = 0;
  std::int64_t batch_size = 0;
};

// Non-overlapping batch means; a trailing partial batch is dropped.
Estimate batch_mean_estimate(const std::vector<double>& series, int batches = 32);

// Batch means of one column of a row-major sample matrix.
std::vector<double> column_batch_means(const std::vector<double>& rows, int ncols, int col, int batches);

// Delete-one-batch jackknife of f evaluated on variable means.
// batch_values[v][b] is the mean of variable v over batch b; all variables
// share the same batch count.
Estimate jackknife(const std::vector<std::vector<double>>& batch_values,
                   const std::function<double(const std::vector<double>&)>& f);

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace vwb
