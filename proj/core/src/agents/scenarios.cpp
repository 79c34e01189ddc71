#include <cmath>
#include <limits>

#include "hidvfs/agents.hpp"
#include "hidvfs/errors.hpp"

namespace hidvfs::agents {

HotStartResult hot_start_scenario(const AgentConfig& cfg, std::vector<workload::DagTask> suite,
                                  const platform::Platform& platform,
                                  const workload::WorkloadModelParams& wparams,
                                  const sim::EngineParams& eparams, std::uint64_t seed,
                                  int warmup_epochs, int max_epochs, double start_temp,
                                  double hot_ambient) {
  sim::Environment env(std::move(suite), platform, wparams, eparams, derive_seed(seed, 1));
  HierarchicalRunner runner(HierarchicalRunner::Kind::hidvfs, cfg, std::move(env), seed);
  for (int e = 0; e < warmup_epochs; ++e) runner.step(Phase::train, e, warmup_epochs);

  runner.reset_temperature(start_temp, hot_ambient);
  runner.pin_profiler(ProfilerAction{3, platform.ladder.size() - 1});
  runner.set_epsilon_override(0.0);
  const double limit = runner.targets().t_target;

  HotStartResult out;
  for (int e = 0; e < max_epochs; ++e) {
    runner.step(Phase::finetune, e, max_epochs);
    out.subsets.push_back(runner.last_subset());
    out.t_avg.push_back(runner.last_t_avg());
    if (out.crossing_epoch < 0 && runner.last_t_prev() <= limit && runner.last_t_avg() > limit)
      out.crossing_epoch = e;
    if (out.crossing_epoch >= 0 && e > out.crossing_epoch &&
        out.subsets.back() != out.subsets[static_cast<std::size_t>(out.crossing_epoch)]) {
      out.corrected = true;
      break;
    }
    if (out.crossing_epoch >= 0 && e >= out.crossing_epoch + 3) break;
  }
  return out;
}

StressResult spike_stress(bool q_clip, std::vector<workload::DagTask> suite,
                          const platform::Platform& platform, std::uint64_t seed, int epochs,
                          double spike_prob, double spike_value) {
  AgentConfig cfg;
  cfg.train.gamma = 0.99;
  cfg.train.grad_clip = 1e12;
  cfg.train.q_clip = q_clip ? std::optional<double>(10.0) : std::nullopt;
  cfg.spike_prob = spike_prob;
  cfg.spike_value = spike_value;
  sim::Environment env(std::move(suite), platform, workload::WorkloadModelParams{},
                       sim::EngineParams{}, derive_seed(seed, 1));
  HierarchicalRunner runner(HierarchicalRunner::Kind::sarb, cfg, std::move(env), seed);
  StressResult out;
  for (int e = 0; e < epochs; ++e) {
    try {
      runner.step(Phase::train, e, epochs);
    } catch (const TrainingError&) {
      out.diverged = true;
      out.max_abs_q = std::numeric_limits<double>::infinity();
      out.epochs_run = e + 1;
      return out;
    }
    out.epochs_run = e + 1;
    out.max_abs_q = runner.max_abs_q();
    out.max_abs_target = runner.max_abs_target();
    if (!std::isfinite(out.max_abs_q) || out.max_abs_q > 1e3) {
      out.diverged = true;
      return out;
    }
  }
  return out;
}

}  // namespace hidvfs::agents
