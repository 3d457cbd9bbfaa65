#include "vwb/stats.hpp"

#include <cmath>

#include "vwb/errors.hpp"

namespace vwb {

Estimate batch_mean_estimate(const std::vector<double>& series, int batches) {
  if (batches < 2) throw InvalidArgument("batch_mean_estimate: need at least two batches");
  const std::int64_t n = static_cast<std::int64_t>(series.size());
  if (n < batches) throw InsufficientData("batch_mean_estimate: fewer samples than batches");
  const std::int64_t bs = n / batches;
  std::vector<double> m(batches, 0.0);
  for (int b = 0; b < batches; ++b) {
    for (std::int64_t i = 0; i < bs; ++i) m[b] += series[b * bs + i];
    m[b] /= static_cast<double>(bs);
  }
  Estimate e;
  for (double v : m) e.mean += v;
  e.mean /= batches;
  double var = 0.0;
  for (double v : m) var += (v - e.mean) * (v - e.mean);
  e.se = std::sqrt(var / (batches - 1) / batches);
  e.samples = bs * batches;
  e.batches = batches;
  e.batch_size = bs;
  return e;
}

std::vector<double> column_batch_means(const std::vector<double>& rows, int ncols, int col, int batches) {
  const std::int64_t n = static_cast<std::int64_t>(rows.size()) / ncols;
  if (n < batches) throw InsufficientData("column_batch_means: fewer samples than batches");
  const std::int64_t bs = n / batches;
  std::vector<double> m(batches, 0.0);
  for (int b = 0; b < batches; ++b) {
    for (std::int64_t i = 0; i < bs; ++i) m[b] += rows[(b * bs + i) * ncols + col];
    m[b] /= static_cast<double>(bs);
  }
  return m;
}

Estimate jackknife(const std::vector<std::vector<double>>& batch_values,
                   const std::function<double(const std::vector<double>&)>& f) {
  if (batch_values.empty()) throw InvalidArgument("jackknife: no variables");
  const int nb = static_cast<int>(batch_values[0].size());
  if (nb < 2) throw InsufficientData("jackknife: need at least two batches");
  const int nv = static_cast<int>(batch_values.size());
  std::vector<double> total(nv, 0.0);
  for (int v = 0; v < nv; ++v) {
    if (static_cast<int>(batch_values[v].size()) != nb) throw InvalidArgument("jackknife: ragged batches");
    for (double x : batch_values[v]) total[v] += x;
  }
  std::vector<double> full(nv);
  for (int v = 0; v < nv; ++v) full[v] = total[v] / nb;
  std::vector<double> loo(nb);
  std::vector<double> means(nv);
  double avg = 0.0;
  for (int b = 0; b < nb; ++b) {
    for (int v = 0; v < nv; ++v) means[v] = (total[v] - batch_values[v][b]) / (nb - 1);
    loo[b] = f(means);
    avg += loo[b];
  }
  avg /= nb;
  double s = 0.0;
  for (double x : loo) s += (x - avg) * (x - avg);
  Estimate e;
  e.mean = f(full);
  e.se = std::sqrt(s * (nb - 1) / nb);
  e.batches = nb;
  return e;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace vwb
