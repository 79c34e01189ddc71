#pragma once

// Synthetic BOTS-like DAG workloads and the execution-time / hardware-counter models.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hidvfs/platform.hpp"
#include "hidvfs/rng.hpp"

namespace hidvfs::workload {

enum class Binding { tied, untied };
enum class Variant { serial, tied, untied };

const char* to_string(Variant v);
const char* to_string(Binding b);

struct Subtask {
  int id = 0;
  double work = 0.0;      // kilocycles; duration at f kHz is work / f seconds
  std::vector<int> deps;  // predecessor ids, all smaller than id
  Binding binding = Binding::untied;
};

struct DagTask {
  int id = 0;
  std::string benchmark;
  Variant variant = Variant::serial;
  int priority = 80;  // 1..99
  std::vector<Subtask> subtasks;

  double total_work() const;
};

struct WorkloadModelParams {
  double kappa_tied = 0.08;    // duration inflation per extra core
  double kappa_untied = 0.02;
  double jitter_sigma = 0.05;  // lognormal sigma for serial subtasks
  double parallel_jitter_factor = 3.0;

  // Miss-count model: log-linear in priority, core count and frequency level around the
  // base rates. Ratios are high/low expectations between the reference points.
  double branch_base = 1.8e7;
  double cache_base = 3.4e7;
  int priority_low = 70;
  int priority_high = 90;
  double branch_priority_ratio = 2.25 / 1.72;
  double cache_priority_ratio = 4.28 / 3.42;
  int cores_low = 1;
  int cores_high = 5;
  double branch_cores_ratio = 2.08 / 1.86;
  double cache_cores_ratio = 4.56 / 3.35;
  double branch_freq_ratio = 1.0;          // level n-1 vs level 0
  double cache_freq_ratio = 3.68 / 3.82;
  double miss_sigma = 0.1;
  double serial_miss_scale = 0.8;
  double tied_miss_scale = 1.1;
  double untied_miss_scale = 1.0;

  double kappa(Variant v) const;
  double sigma(Variant v) const;
};

// Benchmarks understood by generate_suite.
const std::vector<std::string>& benchmark_catalog();
bool is_known_benchmark(const std::string& name);

// Three instances (serial, tied, untied) per name, in input order. Deterministic per seed.
// Throws hidvfs::ConfigError for unknown names or scale < 1.
std::vector<DagTask> generate_suite(std::span<const std::string> names, int scale,
                                    std::uint64_t seed);

// Kahn order; throws std::domain_error on a cycle or dangling dependency.
std::vector<int> topological_order(const DagTask& task);
bool is_acyclic(const DagTask& task);

// Seconds on a speed-1.0 core: (work / f) * (1 + kappa * (k - 1)) * lognormal jitter.
double subtask_duration(const Subtask& sub, int k_allocated, int level, Variant variant,
                        const platform::FrequencyLadder& ladder, const WorkloadModelParams& params,
                        Rng& rng);

struct MissCounts {
  std::int64_t branch = 0;
  std::int64_t cache = 0;
};

double expected_branch_misses(const DagTask& task, int cores, int level, int priority,
                              int n_levels, const WorkloadModelParams& params);
double expected_cache_misses(const DagTask& task, int cores, int level, int priority,
                             int n_levels, const WorkloadModelParams& params);

// One draw per counter, lognormal around the expectation (mean preserving).
MissCounts miss_counts(const DagTask& task, int cores, int level, int priority, int n_levels,
                       const WorkloadModelParams& params, Rng& rng);

}  // namespace hidvfs::workload
