#include "hidvfs/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hidvfs::analysis {

double lastk_avg(std::span<const double> series, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > series.size())
    throw std::domain_error("lastk_avg: need 1 <= k <= series length");
  const auto tail = series.subspan(series.size() - static_cast<std::size_t>(k));
  return std::accumulate(tail.begin(), tail.end(), 0.0) / k;
}

double hf_rate(std::span<const int> levels, int threshold) {
  if (levels.empty()) throw std::domain_error("hf_rate: empty level list");
  const auto hi = std::count_if(levels.begin(), levels.end(), [&](int l) { return l >= threshold; });
  return 100.0 * static_cast<double>(hi) / static_cast<double>(levels.size());
}

double cores_rate(std::span<const int> cores, int min_cores) {
  if (cores.empty()) throw std::domain_error("cores_rate: empty core-count list");
  const auto hi = std::count_if(cores.begin(), cores.end(), [&](int c) { return c >= min_cores; });
  return 100.0 * static_cast<double>(hi) / static_cast<double>(cores.size());
}

int convergence_epoch(std::span<const double> m) {
  constexpr std::size_t kInit = 5;
  constexpr std::size_t kWindow = 10;
  if (m.size() < kInit + kWindow) throw std::domain_error("convergence_epoch: need at least 15 epochs");
  const double base = std::accumulate(m.begin(), m.begin() + kInit, 0.0) / kInit;
  for (std::size_t e = 0; e + kWindow <= m.size(); ++e) {
    const auto [lo, hi] = std::minmax_element(m.begin() + static_cast<std::ptrdiff_t>(e),
                                              m.begin() + static_cast<std::ptrdiff_t>(e + kWindow));
    if (*hi - *lo < 0.15 * base) return static_cast<int>(e);
  }
  return static_cast<int>(m.size());
}

namespace {

std::vector<double> midranks(const std::vector<double>& pooled) {
  const std::size_t n = pooled.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

MannWhitney mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::domain_error("mann_whitney_u: empty sample");
  const std::size_t n1 = a.size();
  const std::size_t n2 = b.size();
  const std::size_t n = n1 + n2;
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto rank = midranks(pooled);
  const double base = static_cast<double>(n1) * static_cast<double>(n1 + 1) / 2.0;
  double ra = 0.0;
  for (std::size_t i = 0; i < n1; ++i) ra += rank[i];
  MannWhitney out;
  out.u = ra - base;
  const double mu = static_cast<double>(n1) * static_cast<double>(n2) / 2.0;
  const double dev = std::abs(out.u - mu);

  if (n <= 12) {
    out.exact = true;
    // Every way of choosing which n1 pooled ranks belong to the first sample.
    std::vector<int> pick(n, 0);
    std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(n1), 1);
    std::sort(pick.begin(), pick.end());
    std::size_t total = 0;
    std::size_t extreme = 0;
    do {
      double r = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (pick[i]) r += rank[i];
      ++total;
      if (std::abs(r - base - mu) >= dev - 1e-9) ++extreme;
    } while (std::next_permutation(pick.begin(), pick.end()));
    out.p = static_cast<double>(extreme) / static_cast<double>(total);
    return out;
  }

  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  const double nd = static_cast<double>(n);
  const double var = static_cast<double>(n1) * static_cast<double>(n2) / 12.0 *
                     ((nd + 1.0) - tie_term / (nd * (nd - 1.0)));
  if (!(var > 0.0)) {
    out.p = 1.0;
    return out;
  }
  const double z = std::max(0.0, dev - 0.5) / std::sqrt(var);
  out.p = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return out;
}

MeanStd aggregate_seeds(std::span<const double> v) {
  if (v.size() < 2) throw std::domain_error("aggregate_seeds: need at least two seeds");
  MeanStd out;
  out.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - out.mean) * (x - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return out;
}

std::vector<double> column_makespan(std::span<const EpochMetrics> rows) {
  std::vector<double> v;
  for (const auto& r : rows) v.push_back(r.makespan);
  return v;
}

std::vector<double> column_energy(std::span<const EpochMetrics> rows) {
  std::vector<double> v;
  for (const auto& r : rows) v.push_back(r.energy);
  return v;
}

std::vector<int> column_level(std::span<const EpochMetrics> rows) {
  std::vector<int> v;
  for (const auto& r : rows) v.push_back(r.freq_level);
  return v;
}

std::vector<int> column_cores(std::span<const EpochMetrics> rows) {
  std::vector<int> v;
  for (const auto& r : rows) v.push_back(r.core_count);
  return v;
}

Summary summarize(std::span<const EpochMetrics> rows) {
  if (rows.empty()) throw std::domain_error("summarize: no epochs");
  Summary s;
  const auto ms = column_makespan(rows);
  const auto en = column_energy(rows);
  const int n = static_cast<int>(rows.size());
  s.epochs = n;
  s.l10 = lastk_avg(ms, std::min(10, n));
  s.l20 = lastk_avg(ms, std::min(20, n));
  s.hf_percent = hf_rate(column_level(rows));
  s.cores5_percent = cores_rate(column_cores(rows));
  s.convergence = n >= 15 ? convergence_epoch(ms) : n;
  s.total_energy = std::accumulate(en.begin(), en.end(), 0.0);
  s.total_makespan = std::accumulate(ms.begin(), ms.end(), 0.0);
  return s;
}

SplitTest median_split_test(std::string feature, std::string metric,
                            std::span<const double> fv, std::span<const double> mv) {
  if (fv.size() != mv.size() || fv.empty())
    throw std::domain_error("median_split_test: feature and metric columns differ or are empty");
  std::vector<double> sorted(fv.begin(), fv.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double med = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  std::vector<double> lo, hi;
  for (std::size_t i = 0; i < fv.size(); ++i) {
    if (fv[i] < med) lo.push_back(mv[i]);
    else if (fv[i] > med) hi.push_back(mv[i]);
  }
  if (lo.empty() || hi.empty())
    throw std::domain_error("median_split_test: feature '" + feature + "' has no spread");
  SplitTest t;
  t.feature = std::move(feature);
  t.metric = std::move(metric);
  t.n_low = lo.size();
  t.n_high = hi.size();
  t.low_mean = std::accumulate(lo.begin(), lo.end(), 0.0) / static_cast<double>(lo.size());
  t.high_mean = std::accumulate(hi.begin(), hi.end(), 0.0) / static_cast<double>(hi.size());
  t.test = mann_whitney_u(lo, hi);
  return t;
}

}  // namespace hidvfs::analysis
