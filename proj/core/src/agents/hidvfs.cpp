#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "hidvfs/agents.hpp"
#include "hidvfs/errors.hpp"

namespace hidvfs::agents {

namespace {
enum AgentIndex { kProfiler = 0, kThermal = 1, kPriority = 2 };
}

struct HierarchicalRunner::Learner {
  rl::DqnAgent agent;
  envmodel::DynamicsModel model;
  rl::ReplayBuffer real;
  rl::ReplayBuffer planned;
  // Random action for planning, and the greedy policy used inside model rollouts.
  std::function<envmodel::Action(const rl::Transition&, Rng&)> random_action;
  std::function<envmodel::Action(std::span<const double>, int)> greedy;
  double last_shaped = 0.0;
};

HierarchicalRunner::HierarchicalRunner(Kind kind, AgentConfig cfg, sim::Environment env,
                                       std::uint64_t seed)
    : kind_(kind),
      cfg_(std::move(cfg)),
      env_(std::move(env)),
      plan_rng_(make_rng(seed, 8)),
      spike_rng_(make_rng(seed, 9)),
      explore_rng_(make_rng(seed, 5)) {
  cfg_.validate();
  targets_ = compute_targets(env_.suite(), env_.platform(), env_.workload_params(),
                             env_.engine_params(), cfg_.t_target);
  const int m = static_cast<int>(env_.platform().topology.available().size());
  const int n = env_.platform().ladder.size();
  const std::size_t cap = cfg_.train.replay_capacity;

  auto profiler_enc = [m, n](const envmodel::Action& a) {
    const auto p = decode_profiler_action(a.index, m, n);
    return std::vector<double>{static_cast<double>(p.cores) / m,
                               static_cast<double>(p.level) / std::max(1, n - 1)};
  };
  auto make = [&](int state_dim, int n_actions, int action_dim, envmodel::ActionEncoder enc,
                  std::uint64_t tag) {
    return std::make_unique<Learner>(Learner{
        rl::DqnAgent(state_dim, n_actions, cfg_.train, derive_seed(seed, tag)),
        enc ? envmodel::DynamicsModel(state_dim, action_dim, std::move(enc), cfg_.model,
                                      derive_seed(seed, tag + 10))
            : envmodel::DynamicsModel(state_dim, n_actions, cfg_.model, derive_seed(seed, tag + 10)),
        rl::ReplayBuffer(cap), rl::ReplayBuffer(cap), nullptr, nullptr, 0.0});
  };

  learners_.push_back(make(3, profiler_action_count(m, n), 2, profiler_enc, 3));
  {
    auto& l = *learners_.back();
    const int na = l.agent.online().n_actions();
    l.random_action = [na](const rl::Transition&, Rng& rng) {
      std::uniform_int_distribution<int> u(0, na - 1);
      return envmodel::Action{u(rng), {}};
    };
    rl::DqnAgent* ag = &l.agent;
    l.greedy = [ag](std::span<const double> s, int) {
      return envmodel::Action{rl::argmax(ag->q_values(s)), {}};
    };
  }
  if (kind_ == Kind::hidvfs) {
    learners_.push_back(make(m, m, m, nullptr, 2));
    {
      auto& l = *learners_.back();
      l.random_action = [m](const rl::Transition& t, Rng& rng) {
        std::vector<int> idx(static_cast<std::size_t>(m));
        std::iota(idx.begin(), idx.end(), 0);
        const int k = t.set_size();
        for (int i = 0; i < k; ++i) {
          std::uniform_int_distribution<int> pick(i, m - 1);
          std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
        }
        idx.resize(static_cast<std::size_t>(k));
        std::sort(idx.begin(), idx.end());
        return envmodel::Action{idx.front(), idx};
      };
      rl::DqnAgent* ag = &l.agent;
      l.greedy = [ag](std::span<const double> s, int k) {
        auto set = rl::top_k(ag->q_values(s), k);
        return envmodel::Action{set.front(), set};
      };
    }
    const auto n_combo = static_cast<int>(priority_catalog().size());
    auto prio_enc = [](const envmodel::Action& a) {
      const auto& c = priority_catalog()[static_cast<std::size_t>(a.index)];
      return std::vector<double>{(c[0] - 80) / 10.0, (c[1] - 80) / 10.0, (c[2] - 80) / 10.0};
    };
    learners_.push_back(make(4, n_combo, 3, prio_enc, 4));
    {
      auto& l = *learners_.back();
      l.random_action = [n_combo](const rl::Transition&, Rng& rng) {
        std::uniform_int_distribution<int> u(0, n_combo - 1);
        return envmodel::Action{u(rng), {}};
      };
      rl::DqnAgent* ag = &l.agent;
      l.greedy = [ag](std::span<const double> s, int) {
        return envmodel::Action{rl::argmax(ag->q_values(s)), {}};
      };
    }
  }
}

HierarchicalRunner::~HierarchicalRunner() = default;

rl::DqnAgent& HierarchicalRunner::profiler() { return learners_[kProfiler]->agent; }
rl::DqnAgent* HierarchicalRunner::thermal() {
  return learners_.size() > kThermal ? &learners_[kThermal]->agent : nullptr;
}
rl::DqnAgent* HierarchicalRunner::priority() {
  return learners_.size() > kPriority ? &learners_[kPriority]->agent : nullptr;
}
const rl::ReplayBuffer& HierarchicalRunner::real_buffer(int agent) const {
  return learners_.at(static_cast<std::size_t>(agent))->real;
}
const rl::ReplayBuffer& HierarchicalRunner::model_buffer(int agent) const {
  return learners_.at(static_cast<std::size_t>(agent))->planned;
}

void HierarchicalRunner::reset_temperature(double temp, std::optional<double> ambient) {
  auto st = env_.state();
  st.thermal = env_.platform().initial_thermal(temp);
  if (ambient) st.thermal.ambient = *ambient;
  env_.set_state(std::move(st));
  prev_.reset();
}

double HierarchicalRunner::plan(Learner& l) {
  const auto& tc = cfg_.train;
  if (!cfg_.use_model || tc.plan_count == 0 ||
      l.real.size() < static_cast<std::size_t>(tc.batch_size)) {
    return l.real.empty() ? 0.0 : l.real.at(l.real.size() - 1).reward;
  }
  std::uniform_int_distribution<std::size_t> pick(0, l.real.size() - 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double sum = 0.0;
  for (int i = 0; i < tc.plan_count; ++i) {
    rl::Transition t = l.real.at(pick(plan_rng_));
    if (u(plan_rng_) < cfg_.dyna_fraction) {
      const auto a = l.random_action(t, plan_rng_);
      const auto p = l.model.predict(t.state, a);
      t.action = a.index;
      t.action_set = a.set;
      t.reward = p.reward;
      t.next_state = p.next_state;
    }
    const int k = t.set_size();
    envmodel::Policy pol = [&l, k](std::span<const double> s) { return l.greedy(s, k); };
    t.reward = envmodel::shaped_reward(t, l.model, pol, tc.horizon, tc.gamma, tc.reward_averaging);
    t.source = rl::Source::model;
    sum += t.reward;
    l.planned.push(std::move(t));
  }
  return sum / tc.plan_count;
}

void HierarchicalRunner::learn(Learner& l) {
  if (cfg_.use_model && cfg_.model.fit_steps > 0 && !l.real.empty()) {
    const auto recent = l.real.recent(cfg_.model.window);
    l.model.fit(recent, cfg_.model.fit_steps);
  }
  l.last_shaped = plan(l);
  for (int s = 0; s < cfg_.train.train_steps_per_epoch; ++s) {
    const auto st = l.agent.train(l.real, &l.planned);
    if (!st) break;
    max_abs_target_ = std::max(max_abs_target_, st->max_abs_target);
    max_abs_q_ = std::max(max_abs_q_, st->max_abs_q);
  }
}

analysis::EpochMetrics HierarchicalRunner::step(Phase phase, int epoch, int phase_epochs) {
  const auto& topo = env_.platform().topology;
  const auto& avail = topo.available();
  const int m = static_cast<int>(avail.size());
  const int n = env_.platform().ladder.size();
  const double ambient = env_.platform().thermal.ambient;
  const double eps_sched = eps_override_ ? *eps_override_
                          : phase == Phase::train ? cfg_.train.epsilon(epoch, phase_epochs)
                                                  : cfg_.train.eps_end;
  // The joint action is epsilon-greedy as a whole: either every agent explores or none does.
  const bool explore = std::uniform_real_distribution<double>(0.0, 1.0)(explore_rng_) < eps_sched;
  const double eps = explore ? 1.0 : 0.0;

  std::vector<double> temps_start(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i)
    temps_start[static_cast<std::size_t>(i)] =
        env_.state().thermal.temp_per_core[static_cast<std::size_t>(avail[static_cast<std::size_t>(i)])];
  const sim::Observation* prev = prev_ ? &*prev_ : nullptr;
  const auto s_prof = profiler_state(prev, targets_, avail, cfg_.reward.eps);
  const auto s_therm = thermal_state(temps_start, ambient, targets_.t_target);
  const auto s_prio = priority_state(prev, targets_);

  // Thermal scores come first; the concrete subset materializes once the count is known.
  Learner* th = kind_ == Kind::hidvfs ? learners_[kThermal].get() : nullptr;
  Learner* pr = kind_ == Kind::hidvfs ? learners_[kPriority].get() : nullptr;
  std::vector<double> q_therm;
  if (th) q_therm = th->agent.q_values(s_therm);

  auto& prof = *learners_[kProfiler];
  const int a_prof = pinned_ ? encode_profiler_action(*pinned_, m, n) : prof.agent.act(s_prof, eps);
  const auto pa = decode_profiler_action(a_prof, m, n);

  std::vector<int> positions;
  if (th && cfg_.thermal_mode == SelectMode::learned) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (eps > 0.0 && u(th->agent.rng()) < eps) {
      std::vector<int> idx(static_cast<std::size_t>(m));
      std::iota(idx.begin(), idx.end(), 0);
      for (int i = 0; i < pa.cores; ++i) {
        std::uniform_int_distribution<int> pick(i, m - 1);
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(th->agent.rng()))]);
      }
      idx.resize(static_cast<std::size_t>(pa.cores));
      std::sort(idx.begin(), idx.end());
      positions = idx;
    } else {
      positions = rl::top_k(q_therm, pa.cores);
    }
  } else {
    std::vector<double> neg(temps_start.size());
    for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = -temps_start[i];
    positions = rl::top_k(neg, pa.cores);
  }
  std::vector<CoreId> subset;
  for (int p : positions) subset.push_back(avail[static_cast<std::size_t>(p)]);

  int combo = -1;
  std::vector<int> prios(env_.suite().size(), 80);
  if (pr) {
    combo = pr->agent.act(s_prio, eps);
    prios = priorities_for(combo, env_.suite().size());
  }

  const auto decision = env_.decide(subset, pa.level, prios, kind_ == Kind::hidvfs ? "hidvfs" : "sarb");
  const auto& res = env_.step(decision);
  const auto& obs = res.obs;

  double t_prev = 0.0, t_avg = 0.0;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    t_prev += temps_start[static_cast<std::size_t>(positions[i])];
    t_avg += obs.temp_end[static_cast<std::size_t>(subset[i])];
  }
  t_prev /= static_cast<double>(positions.size());
  t_avg /= static_cast<double>(positions.size());

  double r1 = reward_profiler(obs.makespan, obs.energy, targets_, cfg_.reward);
  if (cfg_.spike_prob > 0.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (u(spike_rng_) < cfg_.spike_prob) r1 += cfg_.spike_value;
  }
  const double r2 = reward_thermal(t_avg, t_prev, targets_, cfg_.reward);
  const double r3 = reward_priority(obs.makespan, targets_);

  std::vector<double> temps_end(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i)
    temps_end[static_cast<std::size_t>(i)] = obs.temp_end[static_cast<std::size_t>(avail[static_cast<std::size_t>(i)])];

  prof.real.push(rl::Transition{s_prof, a_prof, {}, r1,
                                profiler_state(&obs, targets_, avail, cfg_.reward.eps), false,
                                rl::Source::real});
  if (th)
    th->real.push(rl::Transition{s_therm, positions.front(), positions, r2,
                                 thermal_state(temps_end, ambient, targets_.t_target), false,
                                 rl::Source::real});
  if (pr)
    pr->real.push(rl::Transition{s_prio, combo, {}, r3, priority_state(&obs, targets_), false,
                                 rl::Source::real});

  for (auto& l : learners_) learn(*l);

  auto row = metrics_from(obs, avail, phase, epoch);
  row.epsilon = eps_sched;
  row.r_profiler = r1;
  row.r_thermal = r2;
  row.r_priority = r3;
  row.rs_profiler = prof.last_shaped;
  row.rs_thermal = th ? th->last_shaped : r2;
  row.rs_priority = pr ? pr->last_shaped : r3;

  last_subset_ = subset;
  last_t_prev_ = t_prev;
  last_t_avg_ = t_avg;
  prev_ = obs;
  return row;
}

nlohmann::json HierarchicalRunner::snapshot() const {
  static const char* names[] = {"profiler", "thermal", "priority"};
  nlohmann::json agents = nlohmann::json::object();
  nlohmann::json models = nlohmann::json::object();
  for (std::size_t i = 0; i < learners_.size(); ++i) {
    agents[names[i]] = learners_[i]->agent.snapshot();
    models[names[i]] = learners_[i]->model.snapshot();
  }
  return nlohmann::json{{"schema", "hidvfs.policy.v1"},
                        {"kind", kind_ == Kind::hidvfs ? "hidvfs" : "sarb"},
                        {"targets", {{"m_target", targets_.m_target},
                                     {"e_target", targets_.e_target},
                                     {"t_target", targets_.t_target}}},
                        {"agents", agents},
                        {"models", models}};
}

namespace {

TrainResult train_with(HierarchicalRunner::Kind kind, const AgentConfig& cfg,
                       std::vector<workload::DagTask> suite, const platform::Platform& platform,
                       const workload::WorkloadModelParams& wparams,
                       const sim::EngineParams& eparams, std::uint64_t seed, int epochs) {
  sim::Environment env(std::move(suite), platform, wparams, eparams, derive_seed(seed, 1));
  HierarchicalRunner runner(kind, cfg, std::move(env), seed);
  TrainResult out;
  for (int e = 0; e < epochs; ++e) {
    try {
      out.rows.push_back(runner.step(Phase::train, e, epochs));
    } catch (const std::exception& ex) {
      throw TrainingError("epoch " + std::to_string(e) + ": " + ex.what());
    }
  }
  out.snapshot = runner.snapshot();
  out.max_abs_target = runner.max_abs_target();
  out.max_abs_q = runner.max_abs_q();
  return out;
}

}  // namespace

TrainResult hidvfs_train(const AgentConfig& cfg, std::vector<workload::DagTask> suite,
                         const platform::Platform& platform,
                         const workload::WorkloadModelParams& wparams,
                         const sim::EngineParams& eparams, std::uint64_t seed, int epochs) {
  return train_with(HierarchicalRunner::Kind::hidvfs, cfg, std::move(suite), platform, wparams,
                    eparams, seed, epochs);
}

TrainResult sarb_train(const AgentConfig& cfg, std::vector<workload::DagTask> suite,
                       const platform::Platform& platform,
                       const workload::WorkloadModelParams& wparams,
                       const sim::EngineParams& eparams, std::uint64_t seed, int epochs) {
  return train_with(HierarchicalRunner::Kind::sarb, cfg, std::move(suite), platform, wparams,
                    eparams, seed, epochs);
}

}  // namespace hidvfs::agents
