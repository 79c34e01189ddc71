#pragma once

// Machine model: frequency ladder, core/cluster topology, power and thermal dynamics.

#include <cstdint>
#include <span>
#include <vector>

namespace hidvfs::platform {

using CoreId = int;
using FreqKhz = std::int64_t;

class FrequencyLadder {
 public:
  FrequencyLadder() = default;
  // Levels must be non-empty and strictly increasing.
  explicit FrequencyLadder(std::vector<FreqKhz> levels);

  // n evenly spaced levels between lo and hi inclusive. Requires (hi - lo) divisible by n - 1.
  static FrequencyLadder linear(FreqKhz lo, FreqKhz hi, int n);
  // Jetson TX2 style ladder: 12 steps from 345600 to 2035200 kHz.
  static FrequencyLadder tx2();

  int size() const { return static_cast<int>(levels_.size()); }
  FreqKhz min() const { return levels_.front(); }
  FreqKhz max() const { return levels_.back(); }
  const std::vector<FreqKhz>& levels() const { return levels_; }

 private:
  std::vector<FreqKhz> levels_;
};

// Throws std::domain_error when level is outside [0, n).
FreqKhz freq_of_level(const FrequencyLadder& ladder, int level);
// Inverse of freq_of_level; throws std::domain_error when f is not a ladder entry.
int level_of_freq(const FrequencyLadder& ladder, FreqKhz f);

enum class ClusterClass { efficiency, performance };

struct Cluster {
  int id = 0;
  ClusterClass cls = ClusterClass::efficiency;
  std::vector<CoreId> cores;
  double speed_scale = 1.0;  // subtask progress rate relative to the efficiency class
};

class Topology {
 public:
  Topology() = default;
  // Cores are numbered 0..n-1 and every core belongs to exactly one cluster.
  Topology(std::vector<Cluster> clusters, std::vector<CoreId> reserved);

  // Six cores: cores 1-2 high-performance (1.3x speed), cores 0,3,4,5 efficiency; core 0 reserved.
  static Topology tx2();
  // n identical efficiency cores in one cluster, optionally reserving core 0.
  static Topology homogeneous(int n, bool reserve_core0);

  int core_count() const { return static_cast<int>(cluster_of_.size()); }
  int cluster_count() const { return static_cast<int>(clusters_.size()); }
  const std::vector<Cluster>& clusters() const { return clusters_; }
  const std::vector<CoreId>& reserved() const { return reserved_; }
  // Index into clusters() for a core.
  int cluster_of(CoreId core) const;
  bool is_reserved(CoreId core) const;
  double speed_scale(CoreId core) const;
  // Non-reserved cores in ascending id order.
  const std::vector<CoreId>& available() const { return available_; }

 private:
  std::vector<Cluster> clusters_;
  std::vector<CoreId> reserved_;
  std::vector<int> cluster_of_;
  std::vector<CoreId> available_;
};

struct PowerParams {
  double dyn_coeff = 1.514;           // W per core at f = f_max, efficiency class
  double leak_base = 0.35;            // W per core at ambient
  double leak_temp_coeff = 0.025;     // 1/degC
  double idle_power = 0.3;            // W, whole chip, shared by cores pro rata
  double perf_scale_efficiency = 1.0;
  double perf_scale_performance = 1.5;

  double perf_class_scale(ClusterClass cls) const {
    return cls == ClusterClass::performance ? perf_scale_performance : perf_scale_efficiency;
  }
};

struct ThermalParams {
  double ambient = 30.0;  // degC
  double r_th = 4.0;      // degC/W per cluster
  double tau = 2.0;       // s per cluster
  double core_r_th = 0.5; // degC/W per-core offset over the cluster temperature
};

struct ThermalState {
  std::vector<double> temp_per_core;
  std::vector<double> cluster_temp;
  double ambient = 30.0;
  std::vector<double> r_th;  // per cluster
  std::vector<double> tau;   // per cluster
  double core_r_th = 0.5;

  // All cores and clusters at `start` (defaults to ambient).
  static ThermalState uniform(const Topology& topo, const ThermalParams& params);
  static ThermalState uniform(const Topology& topo, const ThermalParams& params, double start);

  double max_temp() const;
};

struct PowerBreakdown {
  std::vector<double> per_cluster;   // W
  std::vector<double> core_dynamic;  // W, per core
  double total() const;
};

// core_levels[c] is the frequency level of core c, or -1 when the core is idle.
// Throws std::domain_error on a size mismatch or invalid level.
PowerBreakdown power_draw(const Topology& topo, std::span<const int> core_levels,
                          const ThermalState& thermal, const PowerParams& params,
                          const FrequencyLadder& ladder);

// Forward-Euler RC update per cluster; per-core temperatures sit on top of their cluster
// with an offset proportional to the core's dynamic power. dt must be positive.
ThermalState thermal_step(const ThermalState& thermal, const Topology& topo,
                          const PowerBreakdown& power, double dt);

// Everything the simulator needs to know about the machine.
struct Platform {
  FrequencyLadder ladder = FrequencyLadder::tx2();
  Topology topology = Topology::tx2();
  PowerParams power;
  ThermalParams thermal;
  double dvfs_switch_s = 0.0003;  // fixed cost per core frequency change

  static Platform tx2_default() { return Platform{}; }
  ThermalState initial_thermal() const { return ThermalState::uniform(topology, thermal); }
  ThermalState initial_thermal(double start) const {
    return ThermalState::uniform(topology, thermal, start);
  }
};

}  // namespace hidvfs::platform
