#pragma once

// Rewards, targets and the learned schedulers: the three-agent hierarchy and its
// single-agent counterpart.

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hidvfs/envmodel.hpp"
#include "hidvfs/rlcore.hpp"
#include "hidvfs/runner.hpp"
#include "hidvfs/simengine.hpp"

namespace hidvfs::agents {

using platform::CoreId;

struct Targets {
  double m_target = 1.0;   // s
  double e_target = 1.0;   // J
  double t_target = 50.0;  // degC
};

struct RewardParams {
  double beta = 1.0;
  double eps = 1e-3;
  double above_penalty = 0.5;
  double below_bonus = 0.05;
  double crossing_penalty = 1.0;

  void validate() const;  // hidvfs::ConfigError naming the field
};

// beta * M_t / (M + eps) + (1 - beta) * E_t / (E + eps)
double reward_profiler(double makespan, double energy, const Targets& t, const RewardParams& p);
// Below target: min(1, 1 - below_bonus * |T - T_t|); above: 1 - above_penalty * (T - T_t);
// minus crossing_penalty when T_prev <= T_t < T.
double reward_thermal(double t_avg, double t_prev, const Targets& t, const RewardParams& p);
// (M_t - M) / M_t
double reward_priority(double makespan, const Targets& t);

struct ScenarioRun {
  std::string name;
  int level = 0;
  std::vector<CoreId> cores;
  double makespan = 0.0;
  double energy = 0.0;
};

// The four jitter-free reference runs: {min, max} level x {all available cores, one core}.
// Every application may use the whole scenario core set at priority 80, and each run starts
// from ambient temperature.
std::vector<ScenarioRun> target_scenarios(std::span<const workload::DagTask> suite,
                                          const platform::Platform& platform,
                                          const workload::WorkloadModelParams& wparams,
                                          const sim::EngineParams& eparams);
// Minimum makespan and minimum energy over target_scenarios.
Targets compute_targets(std::span<const workload::DagTask> suite, const platform::Platform& platform,
                        const workload::WorkloadModelParams& wparams,
                        const sim::EngineParams& eparams, double t_target = 50.0);

enum class SelectMode { greedy, learned };

// temps and q_values are indexed like `available`. Greedy: the k coolest cores. Learned: the
// k-subset maximizing the mean member score. Ties go to lower ids. Result ascending.
// std::domain_error unless 1 <= k <= available.size().
std::vector<CoreId> thermal_select_cores(int k, std::span<const CoreId> available,
                                         std::span<const double> temps,
                                         std::span<const double> q_values, SelectMode mode);

// Six orderings of {90, 80, 70}; application i receives entry i % 3.
const std::vector<std::array<int, 3>>& priority_catalog();
std::vector<int> priorities_for(int combo, std::size_t n_apps);

struct ProfilerAction {
  int cores = 1;  // 1..m
  int level = 0;  // 0..n-1
};

// m * n joint (count, level) actions, index = (cores - 1) * n + level.
int profiler_action_count(int m, int n);
ProfilerAction decode_profiler_action(int index, int m, int n);
int encode_profiler_action(const ProfilerAction& a, int m, int n);

// [mean utilization of available cores, M_t / (M + eps), E_t / (E + eps)]; zeros before the
// first epoch.
std::vector<double> profiler_state(const sim::Observation* prev, const Targets& t,
                                   std::span<const CoreId> available, double eps);
// (T - ambient) / (T_t - ambient) per available core.
std::vector<double> thermal_state(std::span<const double> temps, double ambient, double t_target);
// [M_t / M, M_t / M_i for the first three applications]; zeros before the first epoch.
std::vector<double> priority_state(const sim::Observation* prev, const Targets& t);

struct AgentConfig {
  rl::TrainConfig train;
  envmodel::ModelConfig model;
  RewardParams reward;
  double t_target = 50.0;
  bool use_model = true;
  double dyna_fraction = 0.5;  // share of planned transitions that try a random action
  SelectMode thermal_mode = SelectMode::learned;
  double spike_prob = 0.0;  // synthetic reward spikes added to the profiler reward
  double spike_value = 100.0;

  void validate() const;
};

struct TrainResult {
  std::vector<analysis::EpochMetrics> rows;
  nlohmann::json snapshot;
  double max_abs_target = 0.0;
  double max_abs_q = 0.0;
};

class HierarchicalRunner : public Runner {
 public:
  enum class Kind { hidvfs, sarb };

  HierarchicalRunner(Kind kind, AgentConfig cfg, sim::Environment env, std::uint64_t seed);
  ~HierarchicalRunner() override;

  analysis::EpochMetrics step(Phase phase, int epoch, int phase_epochs) override;
  bool has_policy() const override { return true; }
  nlohmann::json snapshot() const override;
  const sim::Environment& environment() const override { return env_; }

  // Scripted-scenario hooks.
  void pin_profiler(std::optional<ProfilerAction> a) { pinned_ = a; }
  void set_epsilon_override(std::optional<double> eps) { eps_override_ = eps; }
  // Sets every core and cluster to `temp`; `ambient` optionally moves the heat sink too.
  void reset_temperature(double temp, std::optional<double> ambient = std::nullopt);

  const Targets& targets() const { return targets_; }
  const std::vector<CoreId>& last_subset() const { return last_subset_; }
  // Mean selected-core temperature at epoch start / end of the last epoch.
  double last_t_prev() const { return last_t_prev_; }
  double last_t_avg() const { return last_t_avg_; }
  double max_abs_target() const { return max_abs_target_; }
  double max_abs_q() const { return max_abs_q_; }
  rl::DqnAgent& profiler();
  rl::DqnAgent* thermal();
  rl::DqnAgent* priority();
  const rl::ReplayBuffer& real_buffer(int agent) const;
  const rl::ReplayBuffer& model_buffer(int agent) const;

 private:
  struct Learner;

  Kind kind_;
  AgentConfig cfg_;
  sim::Environment env_;
  Targets targets_;
  std::vector<std::unique_ptr<Learner>> learners_;  // profiler, thermal, priority
  Rng plan_rng_;
  Rng spike_rng_;
  Rng explore_rng_;  // one exploration coin per epoch, shared by all agents
  std::optional<sim::Observation> prev_;
  std::optional<ProfilerAction> pinned_;
  std::optional<double> eps_override_;
  std::vector<CoreId> last_subset_;
  double last_t_prev_ = 0.0;
  double last_t_avg_ = 0.0;
  double max_abs_target_ = 0.0;
  double max_abs_q_ = 0.0;

  double plan(Learner& l);
  void learn(Learner& l);
};

TrainResult hidvfs_train(const AgentConfig& cfg, std::vector<workload::DagTask> suite,
                         const platform::Platform& platform,
                         const workload::WorkloadModelParams& wparams,
                         const sim::EngineParams& eparams, std::uint64_t seed, int epochs);
TrainResult sarb_train(const AgentConfig& cfg, std::vector<workload::DagTask> suite,
                       const platform::Platform& platform,
                       const workload::WorkloadModelParams& wparams,
                       const sim::EngineParams& eparams, std::uint64_t seed, int epochs);

struct HotStartResult {
  int crossing_epoch = -1;  // first epoch whose selected cores cross the limit, -1 if none
  bool corrected = false;   // subset changed within the following three epochs
  std::vector<std::vector<CoreId>> subsets;
  std::vector<double> t_avg;
};

// Trains a hierarchy for `warmup_epochs` from ambient, then restarts the machine at
// `start_temp`, pins the profiler to (3 cores, top level) and runs the thermal agent greedily
// (eps = 0) while it keeps learning. The ambient is raised to `hot_ambient` for the hot phase
// so that the pinned load can push the selected cores over the limit.
HotStartResult hot_start_scenario(const AgentConfig& cfg, std::vector<workload::DagTask> suite,
                                  const platform::Platform& platform,
                                  const workload::WorkloadModelParams& wparams,
                                  const sim::EngineParams& eparams, std::uint64_t seed,
                                  int warmup_epochs = 20, int max_epochs = 12,
                                  double start_temp = 49.5, double hot_ambient = 38.0);

struct StressResult {
  bool diverged = false;  // non-finite values or max |Q| above 1e3
  double max_abs_q = 0.0;
  double max_abs_target = 0.0;
  int epochs_run = 0;
};

// Single-agent training with reward spikes of +spike_value at rate spike_prob, gradient
// clipping disabled and gamma 0.99, with or without target clamping to [-10, 10].
StressResult spike_stress(bool q_clip, std::vector<workload::DagTask> suite,
                          const platform::Platform& platform, std::uint64_t seed, int epochs = 300,
                          double spike_prob = 0.2, double spike_value = 100.0);

}  // namespace hidvfs::agents
