#include "hidvfs/platform.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hidvfs::platform {

FrequencyLadder::FrequencyLadder(std::vector<FreqKhz> levels) : levels_(std::move(levels)) {
  if (levels_.empty()) throw std::domain_error("frequency ladder must not be empty");
  for (std::size_t i = 1; i < levels_.size(); ++i) {
    if (levels_[i] <= levels_[i - 1])
      throw std::domain_error("frequency ladder must be strictly increasing");
  }
  if (levels_.front() <= 0) throw std::domain_error("frequencies must be positive");
}

FrequencyLadder FrequencyLadder::linear(FreqKhz lo, FreqKhz hi, int n) {
  if (n < 1) throw std::domain_error("ladder needs at least one level");
  if (n == 1) return FrequencyLadder({lo});
  if ((hi - lo) % (n - 1) != 0) throw std::domain_error("ladder span not divisible by step count");
  const FreqKhz step = (hi - lo) / (n - 1);
  std::vector<FreqKhz> levels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) levels[static_cast<std::size_t>(i)] = lo + step * i;
  return FrequencyLadder(std::move(levels));
}

FrequencyLadder FrequencyLadder::tx2() { return linear(345600, 2035200, 12); }

FreqKhz freq_of_level(const FrequencyLadder& ladder, int level) {
  if (level < 0 || level >= ladder.size())
    throw std::domain_error("frequency level " + std::to_string(level) + " out of range");
  return ladder.levels()[static_cast<std::size_t>(level)];
}

int level_of_freq(const FrequencyLadder& ladder, FreqKhz f) {
  const auto& lv = ladder.levels();
  auto it = std::lower_bound(lv.begin(), lv.end(), f);
  if (it == lv.end() || *it != f)
    throw std::domain_error("frequency " + std::to_string(f) + " kHz is not on the ladder");
  return static_cast<int>(it - lv.begin());
}

Topology::Topology(std::vector<Cluster> clusters, std::vector<CoreId> reserved)
    : clusters_(std::move(clusters)), reserved_(std::move(reserved)) {
  int n = 0;
  for (const auto& c : clusters_) n += static_cast<int>(c.cores.size());
  if (n == 0) throw std::domain_error("topology has no cores");
  cluster_of_.assign(static_cast<std::size_t>(n), -1);
  for (std::size_t ci = 0; ci < clusters_.size(); ++ci) {
    if (clusters_[ci].speed_scale <= 0.0) throw std::domain_error("cluster speed_scale must be > 0");
    for (CoreId core : clusters_[ci].cores) {
      if (core < 0 || core >= n) throw std::domain_error("core ids must be 0..n-1");
      if (cluster_of_[static_cast<std::size_t>(core)] != -1)
        throw std::domain_error("core " + std::to_string(core) + " is in two clusters");
      cluster_of_[static_cast<std::size_t>(core)] = static_cast<int>(ci);
    }
  }
  std::sort(reserved_.begin(), reserved_.end());
  reserved_.erase(std::unique(reserved_.begin(), reserved_.end()), reserved_.end());
  for (CoreId core : reserved_) {
    if (core < 0 || core >= n) throw std::domain_error("reserved core not in topology");
  }
  for (CoreId core = 0; core < n; ++core) {
    if (!is_reserved(core)) available_.push_back(core);
  }
  if (available_.empty()) throw std::domain_error("topology reserves every core");
}

Topology Topology::tx2() {
  return Topology({Cluster{0, ClusterClass::efficiency, {0, 3, 4, 5}, 1.0},
                   Cluster{1, ClusterClass::performance, {1, 2}, 1.3}},
                  {0});
}

Topology Topology::homogeneous(int n, bool reserve_core0) {
  Cluster c{0, ClusterClass::efficiency, {}, 1.0};
  for (int i = 0; i < n; ++i) c.cores.push_back(i);
  std::vector<CoreId> reserved;
  if (reserve_core0) reserved.push_back(0);
  return Topology({c}, reserved);
}

int Topology::cluster_of(CoreId core) const {
  if (core < 0 || core >= core_count()) throw std::domain_error("core id out of range");
  return cluster_of_[static_cast<std::size_t>(core)];
}

bool Topology::is_reserved(CoreId core) const {
  return std::binary_search(reserved_.begin(), reserved_.end(), core);
}

double Topology::speed_scale(CoreId core) const {
  return clusters_[static_cast<std::size_t>(cluster_of(core))].speed_scale;
}

ThermalState ThermalState::uniform(const Topology& topo, const ThermalParams& params) {
  return uniform(topo, params, params.ambient);
}

ThermalState ThermalState::uniform(const Topology& topo, const ThermalParams& params, double start) {
  ThermalState s;
  s.temp_per_core.assign(static_cast<std::size_t>(topo.core_count()), start);
  s.cluster_temp.assign(static_cast<std::size_t>(topo.cluster_count()), start);
  s.ambient = params.ambient;
  s.r_th.assign(static_cast<std::size_t>(topo.cluster_count()), params.r_th);
  s.tau.assign(static_cast<std::size_t>(topo.cluster_count()), params.tau);
  s.core_r_th = params.core_r_th;
  return s;
}

double ThermalState::max_temp() const {
  return *std::max_element(temp_per_core.begin(), temp_per_core.end());
}

double PowerBreakdown::total() const {
  double t = 0.0;
  for (double p : per_cluster) t += p;
  return t;
}

PowerBreakdown power_draw(const Topology& topo, std::span<const int> core_levels,
                          const ThermalState& thermal, const PowerParams& params,
                          const FrequencyLadder& ladder) {
  const int n = topo.core_count();
  if (static_cast<int>(core_levels.size()) != n ||
      static_cast<int>(thermal.temp_per_core.size()) != n)
    throw std::domain_error("power_draw: per-core vectors do not match topology");

  PowerBreakdown out;
  out.per_cluster.assign(static_cast<std::size_t>(topo.cluster_count()), 0.0);
  out.core_dynamic.assign(static_cast<std::size_t>(n), 0.0);
  const double f_max = static_cast<double>(ladder.max());
  const double idle_share = params.idle_power / n;

  for (CoreId c = 0; c < n; ++c) {
    const auto ci = static_cast<std::size_t>(topo.cluster_of(c));
    const auto& cluster = topo.clusters()[ci];
    const int level = core_levels[static_cast<std::size_t>(c)];
    double dyn = 0.0;
    if (level >= 0) {
      const double fn = static_cast<double>(freq_of_level(ladder, level)) / f_max;
      dyn = params.dyn_coeff * params.perf_class_scale(cluster.cls) * fn * fn * fn;
    } else if (level != -1) {
      throw std::domain_error("power_draw: negative level other than idle marker");
    }
    const double dT = thermal.temp_per_core[static_cast<std::size_t>(c)] - thermal.ambient;
    const double leak = params.leak_base * std::exp(params.leak_temp_coeff * dT);
    out.core_dynamic[static_cast<std::size_t>(c)] = dyn;
    out.per_cluster[ci] += dyn + leak + idle_share;
  }
  return out;
}

ThermalState thermal_step(const ThermalState& thermal, const Topology& topo,
                          const PowerBreakdown& power, double dt) {
  if (!(dt > 0.0)) throw std::domain_error("thermal_step: dt must be positive");
  ThermalState next = thermal;
  for (std::size_t ci = 0; ci < next.cluster_temp.size(); ++ci) {
    const double steady = thermal.ambient + thermal.r_th[ci] * power.per_cluster[ci];
    next.cluster_temp[ci] += (dt / thermal.tau[ci]) * (steady - thermal.cluster_temp[ci]);
  }
  for (CoreId c = 0; c < topo.core_count(); ++c) {
    const auto ci = static_cast<std::size_t>(topo.cluster_of(c));
    next.temp_per_core[static_cast<std::size_t>(c)] =
        next.cluster_temp[ci] + thermal.core_r_th * power.core_dynamic[static_cast<std::size_t>(c)];
  }
  return next;
}

}  // namespace hidvfs::platform
