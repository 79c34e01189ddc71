#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "hidvfs/agents.hpp"
#include "hidvfs/errors.hpp"

namespace hidvfs {

const char* to_string(Phase p) { return p == Phase::train ? "train" : "finetune"; }

analysis::EpochMetrics metrics_from(const sim::Observation& obs,
                                    std::span<const platform::CoreId> available, Phase phase,
                                    int epoch) {
  analysis::EpochMetrics m;
  m.phase = to_string(phase);
  m.epoch = epoch;
  m.makespan = obs.makespan;
  m.energy = obs.energy;
  double tsum = 0.0;
  for (auto c : available) tsum += obs.temp_avg.at(static_cast<std::size_t>(c));
  m.temp_avg = available.empty() ? 0.0 : tsum / static_cast<double>(available.size());
  m.temp_max = *std::max_element(obs.temp_end.begin(), obs.temp_end.end());
  m.branch_misses = obs.branch_misses;
  m.cache_misses = obs.cache_misses;
  m.freq_level = obs.freq_level;
  m.core_count = obs.core_count;
  const auto cores = obs.decision.core_union();
  for (std::size_t i = 0; i < cores.size(); ++i) m.cores += (i ? ";" : "") + std::to_string(cores[i]);
  for (std::size_t i = 0; i < obs.decision.apps.size(); ++i)
    m.priorities += (i ? ";" : "") + std::to_string(obs.decision.apps[i].priority);
  return m;
}

}  // namespace hidvfs

namespace hidvfs::agents {

void RewardParams::validate() const {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("reward.beta: must lie in [0, 1]");
  if (!(eps > 0.0)) throw ConfigError("reward.eps: must be positive");
  if (!(above_penalty >= 0.0)) throw ConfigError("reward.above_penalty: must be >= 0");
  if (!(below_bonus >= 0.0)) throw ConfigError("reward.below_bonus: must be >= 0");
  if (!(crossing_penalty >= 0.0)) throw ConfigError("reward.crossing_penalty: must be >= 0");
}

double reward_profiler(double makespan, double energy, const Targets& t, const RewardParams& p) {
  const double m_term = t.m_target / (makespan + p.eps);
  if (p.beta == 1.0) return m_term;
  return p.beta * m_term + (1.0 - p.beta) * (t.e_target / (energy + p.eps));
}

double reward_thermal(double t_avg, double t_prev, const Targets& t, const RewardParams& p) {
  double r = 0.0;
  if (t_avg <= t.t_target) {
    r = std::min(1.0, 1.0 - p.below_bonus * std::abs(t_avg - t.t_target));
  } else {
    r = 1.0 - p.above_penalty * (t_avg - t.t_target);
    if (t_prev <= t.t_target) r -= p.crossing_penalty;
  }
  return r;
}

double reward_priority(double makespan, const Targets& t) { return 1.0 - makespan / t.m_target; }

std::vector<ScenarioRun> target_scenarios(std::span<const workload::DagTask> suite,
                                          const platform::Platform& platform,
                                          const workload::WorkloadModelParams& wparams,
                                          const sim::EngineParams& eparams) {
  if (suite.empty()) throw std::domain_error("compute_targets: empty suite");
  auto wp = wparams;
  wp.jitter_sigma = 0.0;
  auto ep = eparams;
  ep.record_trace = false;
  const auto& avail = platform.topology.available();
  const int lo = 0;
  const int hi = platform.ladder.size() - 1;
  struct Spec {
    const char* name;
    int level;
    bool all;
  };
  const Spec specs[] = {{"min_freq_all_cores", lo, true},
                        {"min_freq_one_core", lo, false},
                        {"max_freq_all_cores", hi, true},
                        {"max_freq_one_core", hi, false}};
  std::vector<ScenarioRun> out;
  for (const auto& s : specs) {
    ScenarioRun run;
    run.name = s.name;
    run.level = s.level;
    run.cores = s.all ? avail : std::vector<CoreId>{avail.front()};
    sim::ScheduleDecision d;
    d.policy = "targets";
    for (std::size_t i = 0; i < suite.size(); ++i)
      d.apps.push_back(sim::AppDecision{run.cores, s.level, 80});
    Rng rng(0);
    const auto r = sim::run_epoch(suite, d, platform, sim::PlatformState::initial(platform), wp, ep, rng);
    run.makespan = r.obs.makespan;
    run.energy = r.obs.energy;
    out.push_back(std::move(run));
  }
  return out;
}

Targets compute_targets(std::span<const workload::DagTask> suite, const platform::Platform& platform,
                        const workload::WorkloadModelParams& wparams,
                        const sim::EngineParams& eparams, double t_target) {
  const auto runs = target_scenarios(suite, platform, wparams, eparams);
  Targets t;
  t.t_target = t_target;
  t.m_target = runs.front().makespan;
  t.e_target = runs.front().energy;
  for (const auto& r : runs) {
    t.m_target = std::min(t.m_target, r.makespan);
    t.e_target = std::min(t.e_target, r.energy);
  }
  return t;
}

std::vector<CoreId> thermal_select_cores(int k, std::span<const CoreId> available,
                                         std::span<const double> temps,
                                         std::span<const double> q_values, SelectMode mode) {
  const int m = static_cast<int>(available.size());
  if (k < 1 || k > m)
    throw std::domain_error("thermal_select_cores: k=" + std::to_string(k) + " with " +
                            std::to_string(m) + " available cores");
  std::vector<int> pos;
  if (mode == SelectMode::greedy) {
    if (static_cast<int>(temps.size()) != m)
      throw std::domain_error("thermal_select_cores: one temperature per available core required");
    std::vector<double> neg(temps.size());
    for (std::size_t i = 0; i < temps.size(); ++i) neg[i] = -temps[i];
    pos = rl::top_k(neg, k);
  } else {
    if (static_cast<int>(q_values.size()) != m)
      throw std::domain_error("thermal_select_cores: one score per available core required");
    // The mean-score argmax over k-subsets is the set of the k best individual scores.
    pos = rl::top_k(q_values, k);
  }
  std::vector<CoreId> out;
  for (int p : pos) out.push_back(available[static_cast<std::size_t>(p)]);
  std::sort(out.begin(), out.end());
  return out;
}

const std::vector<std::array<int, 3>>& priority_catalog() {
  static const std::vector<std::array<int, 3>> c = {
      {90, 80, 70}, {90, 70, 80}, {80, 90, 70}, {80, 70, 90}, {70, 90, 80}, {70, 80, 90}};
  return c;
}

std::vector<int> priorities_for(int combo, std::size_t n_apps) {
  const auto& cat = priority_catalog();
  if (combo < 0 || combo >= static_cast<int>(cat.size()))
    throw std::domain_error("priority combination index out of range");
  std::vector<int> p(n_apps);
  for (std::size_t i = 0; i < n_apps; ++i) p[i] = cat[static_cast<std::size_t>(combo)][i % 3];
  return p;
}

int profiler_action_count(int m, int n) {
  if (m < 1 || n < 1) throw std::domain_error("profiler_action_count: empty dimension");
  return m * n;
}

ProfilerAction decode_profiler_action(int index, int m, int n) {
  if (index < 0 || index >= profiler_action_count(m, n))
    throw std::domain_error("profiler action index out of range");
  return ProfilerAction{index / n + 1, index % n};
}

int encode_profiler_action(const ProfilerAction& a, int m, int n) {
  if (a.cores < 1 || a.cores > m || a.level < 0 || a.level >= n)
    throw std::domain_error("profiler action out of range");
  return (a.cores - 1) * n + a.level;
}

std::vector<double> profiler_state(const sim::Observation* prev, const Targets& t,
                                   std::span<const CoreId> available, double eps) {
  if (!prev) return {0.0, 0.0, 0.0};
  return {prev->mean_utilization(available), t.m_target / (prev->makespan + eps),
          t.e_target / (prev->energy + eps)};
}

std::vector<double> thermal_state(std::span<const double> temps, double ambient, double t_target) {
  std::vector<double> s(temps.size());
  const double span = t_target - ambient;
  if (!(span > 0.0)) throw std::domain_error("thermal_state: target must exceed ambient");
  for (std::size_t i = 0; i < temps.size(); ++i) s[i] = (temps[i] - ambient) / span;
  return s;
}

std::vector<double> priority_state(const sim::Observation* prev, const Targets& t) {
  std::vector<double> s(4, 0.0);
  if (!prev) return s;
  s[0] = t.m_target / prev->makespan;
  for (std::size_t i = 0; i < 3 && i < prev->apps.size(); ++i)
    s[i + 1] = prev->apps[i].makespan > 0.0 ? t.m_target / prev->apps[i].makespan : 0.0;
  return s;
}

void AgentConfig::validate() const {
  train.validate();
  reward.validate();
  if (!(t_target > 0.0)) throw ConfigError("reward.t_target: must be positive");
  if (!(dyna_fraction >= 0.0 && dyna_fraction <= 1.0))
    throw ConfigError("model.dyna_fraction: must lie in [0, 1]");
  if (model.hidden.empty()) throw ConfigError("model.hidden: needs at least one layer");
  if (!(model.lr > 0.0)) throw ConfigError("model.lr: must be positive");
  if (model.batch_size < 1) throw ConfigError("model.batch_size: must be >= 1");
  if (model.fit_steps < 0) throw ConfigError("model.fit_steps: must be >= 0");
  if (model.window < 1) throw ConfigError("model.window: must be >= 1");
  if (!(spike_prob >= 0.0 && spike_prob <= 1.0)) throw ConfigError("spike_prob: must lie in [0, 1]");
}

}  // namespace hidvfs::agents
