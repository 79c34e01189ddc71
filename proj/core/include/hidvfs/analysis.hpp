#pragma once

// Per-epoch metrics, run summaries and the statistics used to compare policies.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hidvfs::analysis {

struct EpochMetrics {
  std::string phase;  // "train" or "finetune"
  int epoch = 0;      // index within the phase
  double makespan = 0.0;
  double energy = 0.0;
  double temp_avg = 0.0;  // mean over available cores of the epoch-average temperature
  double temp_max = 0.0;  // hottest core at epoch end
  std::int64_t branch_misses = 0;
  std::int64_t cache_misses = 0;
  int freq_level = 0;
  int core_count = 0;
  std::string cores;       // chosen subset, ';'-separated ids
  std::string priorities;  // per application, ';'-separated
  double epsilon = 0.0;
  double r_profiler = 0.0;
  double r_thermal = 0.0;
  double r_priority = 0.0;
  double rs_profiler = 0.0;  // mean shaped reward of this epoch's model transitions
  double rs_thermal = 0.0;
  double rs_priority = 0.0;
};

// Mean of the last k entries. std::domain_error unless 1 <= k <= size.
double lastk_avg(std::span<const double> series, int k);
// Percentage of entries >= threshold (default 9). std::domain_error on empty input.
double hf_rate(std::span<const int> levels, int threshold = 9);
// Percentage of entries >= min_cores.
double cores_rate(std::span<const int> cores, int min_cores = 5);
// First e whose window [e, e+9] spreads less than 0.15 x mean(first 5); size() if none.
// std::domain_error when fewer than 15 entries.
int convergence_epoch(std::span<const double> makespans);

struct MannWhitney {
  double u = 0.0;  // statistic of the first sample
  double p = 1.0;  // two-sided
  bool exact = false;
};

// Midrank U; exact enumeration when |a| + |b| <= 12, otherwise the normal approximation with
// tie and continuity correction. std::domain_error on an empty sample.
MannWhitney mann_whitney_u(std::span<const double> a, std::span<const double> b);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample (n - 1)
};

// std::domain_error with fewer than two values.
MeanStd aggregate_seeds(std::span<const double> values);

struct Summary {
  double l10 = 0.0;
  double l20 = 0.0;
  double hf_percent = 0.0;
  double cores5_percent = 0.0;
  int convergence = 0;
  double total_energy = 0.0;
  double total_makespan = 0.0;
  int epochs = 0;
};

// Summary of one phase's rows. Requires at least 20 rows for L20 and 15 for convergence;
// shorter phases report L20 over all rows and convergence as the row count.
Summary summarize(std::span<const EpochMetrics> rows);

std::vector<double> column_makespan(std::span<const EpochMetrics> rows);
std::vector<double> column_energy(std::span<const EpochMetrics> rows);
std::vector<int> column_level(std::span<const EpochMetrics> rows);
std::vector<int> column_cores(std::span<const EpochMetrics> rows);

// Below-median vs above-median split of `metric` by `feature` (ties with the median dropped),
// tested with mann_whitney_u.
struct SplitTest {
  std::string feature;
  std::string metric;
  double low_mean = 0.0;
  double high_mean = 0.0;
  std::size_t n_low = 0;
  std::size_t n_high = 0;
  MannWhitney test;
};

SplitTest median_split_test(std::string feature, std::string metric,
                            std::span<const double> feature_values,
                            std::span<const double> metric_values);

}  // namespace hidvfs::analysis
