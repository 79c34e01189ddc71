#include "hidvfs/baselines.hpp"

#include <algorithm>
#include <numeric>

namespace hidvfs::baselines {

const char* to_string(GovernorKind k) {
  switch (k) {
    case GovernorKind::performance: return "performance";
    case GovernorKind::powersave: return "powersave";
    case GovernorKind::ondemand: return "ondemand";
    case GovernorKind::random: return "random";
  }
  return "?";
}

std::optional<GovernorKind> governor_from_string(const std::string& s) {
  for (auto k : {GovernorKind::performance, GovernorKind::powersave, GovernorKind::ondemand,
                 GovernorKind::random})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

namespace {

std::vector<platform::CoreId> random_subset(std::span<const platform::CoreId> avail, int k, Rng& rng) {
  std::vector<platform::CoreId> pool(avail.begin(), avail.end());
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, static_cast<int>(pool.size()) - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
  }
  pool.resize(static_cast<std::size_t>(k));
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

sim::ScheduleDecision governor_decide(GovernorKind kind, const sim::Observation* prev,
                                      const platform::Platform& platform, std::span<const int> lops,
                                      Rng& rng, const OndemandParams& od) {
  const auto& avail = platform.topology.available();
  const int n = platform.ladder.size();
  std::vector<int> prios(lops.size(), 80);
  switch (kind) {
    case GovernorKind::performance:
      return sim::build_decision(avail, n - 1, prios, lops, "performance");
    case GovernorKind::powersave:
      return sim::build_decision(avail, 0, prios, lops, "powersave");
    case GovernorKind::ondemand: {
      int level = od.start_level >= 0 ? od.start_level : n / 2;
      if (prev) {
        level = prev->freq_level;
        const double u = prev->mean_utilization(avail);
        if (u > od.up_threshold) level += od.step;
        else if (u < od.down_threshold) level -= od.step;
      }
      return sim::build_decision(avail, std::clamp(level, 0, n - 1), prios, lops, "ondemand");
    }
    case GovernorKind::random: {
      std::uniform_int_distribution<int> kd(1, static_cast<int>(avail.size()));
      std::uniform_int_distribution<int> ld(0, n - 1);
      const int k = kd(rng);
      const int level = ld(rng);
      return sim::build_decision(random_subset(avail, k, rng), level, prios, lops, "random");
    }
  }
  return {};
}

GovernorRunner::GovernorRunner(GovernorKind kind, sim::Environment env, std::uint64_t seed,
                               agents::RewardParams reward, double t_target,
                               OndemandParams ondemand)
    : kind_(kind), env_(std::move(env)), rng_(make_rng(seed, 20)), reward_(reward),
      ondemand_(ondemand) {
  targets_ = agents::compute_targets(env_.suite(), env_.platform(), env_.workload_params(),
                                     env_.engine_params(), t_target);
}

analysis::EpochMetrics GovernorRunner::step(Phase phase, int epoch, int) {
  const auto& avail = env_.platform().topology.available();
  const auto start_temps = env_.state().thermal.temp_per_core;
  const auto d = governor_decide(kind_, prev_ ? &*prev_ : nullptr, env_.platform(), env_.lops(), rng_,
                                ondemand_);
  const auto& obs = env_.step(d).obs;
  const auto used = d.core_union();
  double t_prev = 0.0, t_avg = 0.0;
  for (auto c : used) {
    t_prev += start_temps[static_cast<std::size_t>(c)];
    t_avg += obs.temp_end[static_cast<std::size_t>(c)];
  }
  t_prev /= static_cast<double>(used.size());
  t_avg /= static_cast<double>(used.size());
  auto row = metrics_from(obs, avail, phase, epoch);
  row.r_profiler = row.rs_profiler = agents::reward_profiler(obs.makespan, obs.energy, targets_, reward_);
  row.r_thermal = row.rs_thermal = agents::reward_thermal(t_avg, t_prev, targets_, reward_);
  row.r_priority = row.rs_priority = agents::reward_priority(obs.makespan, targets_);
  prev_ = obs;
  return row;
}

StatsSamples random_policy_samples(std::vector<workload::DagTask> suite,
                                   const platform::Platform& platform,
                                   const workload::WorkloadModelParams& wparams,
                                   const sim::EngineParams& eparams, int epochs,
                                   std::uint64_t seed) {
  sim::Environment env(std::move(suite), platform, wparams, eparams, derive_seed(seed, 1));
  Rng rng = make_rng(seed, 21);
  const auto& avail = platform.topology.available();
  const int n = platform.ladder.size();
  std::uniform_int_distribution<int> kd(1, static_cast<int>(avail.size()));
  std::uniform_int_distribution<int> ld(0, n - 1);
  std::uniform_int_distribution<int> cd(0, static_cast<int>(agents::priority_catalog().size()) - 1);
  StatsSamples s;
  for (int e = 0; e < epochs; ++e) {
    const int k = kd(rng);
    const int level = ld(rng);
    const auto subset = random_subset(avail, k, rng);
    const auto prios = agents::priorities_for(cd(rng), env.suite().size());
    const auto& obs = env.step(env.decide(subset, level, prios, "random-joint")).obs;
    s.level.push_back(level);
    s.cores.push_back(k);
    s.makespan.push_back(obs.makespan);
    s.energy.push_back(obs.energy);
    s.branch_misses.push_back(static_cast<double>(obs.branch_misses));
    s.cache_misses.push_back(static_cast<double>(obs.cache_misses));
    double ta = 0.0;
    for (auto c : avail) ta += obs.temp_avg[static_cast<std::size_t>(c)];
    s.temp_avg.push_back(ta / static_cast<double>(avail.size()));
    for (const auto& a : obs.apps) {
      s.app_priority.push_back(a.priority);
      s.app_makespan.push_back(a.makespan);
      s.app_branch_misses.push_back(static_cast<double>(a.branch_misses));
      s.app_cache_misses.push_back(static_cast<double>(a.cache_misses));
    }
  }
  return s;
}

void append(StatsSamples& into, const StatsSamples& from) {
  auto cat = [](std::vector<double>& a, const std::vector<double>& b) { a.insert(a.end(), b.begin(), b.end()); };
  cat(into.level, from.level);
  cat(into.cores, from.cores);
  cat(into.makespan, from.makespan);
  cat(into.energy, from.energy);
  cat(into.branch_misses, from.branch_misses);
  cat(into.cache_misses, from.cache_misses);
  cat(into.temp_avg, from.temp_avg);
  cat(into.app_priority, from.app_priority);
  cat(into.app_makespan, from.app_makespan);
  cat(into.app_branch_misses, from.app_branch_misses);
  cat(into.app_cache_misses, from.app_cache_misses);
}

}  // namespace hidvfs::baselines
