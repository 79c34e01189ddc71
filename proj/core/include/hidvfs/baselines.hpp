#pragma once

// Non-learning schedulers: Linux-style governors and random policies.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hidvfs/agents.hpp"
#include "hidvfs/runner.hpp"
#include "hidvfs/simengine.hpp"

namespace hidvfs::baselines {

enum class GovernorKind { performance, powersave, ondemand, random };

const char* to_string(GovernorKind k);
std::optional<GovernorKind> governor_from_string(const std::string& s);

struct OndemandParams {
  double up_threshold = 0.8;
  double down_threshold = 0.3;
  int step = 2;
  int start_level = -1;  // -1: middle of the ladder
};

// performance / powersave: every available core at the top / bottom level. ondemand: every
// available core, level moved by +-step from the previous epoch's level according to its mean
// utilization. random: uniform core count, level and core subset. All use priority 80.
sim::ScheduleDecision governor_decide(GovernorKind kind, const sim::Observation* prev,
                                      const platform::Platform& platform, std::span<const int> lops,
                                      Rng& rng, const OndemandParams& od = {});

class GovernorRunner : public Runner {
 public:
  GovernorRunner(GovernorKind kind, sim::Environment env, std::uint64_t seed,
                 agents::RewardParams reward = {}, double t_target = 50.0,
                 OndemandParams ondemand = {});

  analysis::EpochMetrics step(Phase phase, int epoch, int phase_epochs) override;
  bool has_policy() const override { return false; }
  nlohmann::json snapshot() const override { return nlohmann::json::object(); }
  const sim::Environment& environment() const override { return env_; }
  const agents::Targets& targets() const { return targets_; }

 private:
  GovernorKind kind_;
  sim::Environment env_;
  Rng rng_;
  agents::RewardParams reward_;
  agents::Targets targets_;
  OndemandParams ondemand_;
  std::optional<sim::Observation> prev_;
};

// Samples for the feature-effect analysis: per epoch a uniformly random core count, level,
// core subset and priority combination.
struct StatsSamples {
  // per epoch
  std::vector<double> level, cores, makespan, energy, branch_misses, cache_misses, temp_avg;
  // per application and epoch
  std::vector<double> app_priority, app_makespan, app_branch_misses, app_cache_misses;
};

StatsSamples random_policy_samples(std::vector<workload::DagTask> suite,
                                   const platform::Platform& platform,
                                   const workload::WorkloadModelParams& wparams,
                                   const sim::EngineParams& eparams, int epochs,
                                   std::uint64_t seed);
void append(StatsSamples& into, const StatsSamples& from);

}  // namespace hidvfs::baselines
