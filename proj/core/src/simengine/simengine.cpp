#include "hidvfs/simengine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "hidvfs/errors.hpp"

namespace hidvfs::sim {

using platform::Platform;
using workload::DagTask;
using workload::Variant;

std::vector<CoreId> ScheduleDecision::core_union() const {
  std::vector<CoreId> out;
  for (const auto& a : apps) out.insert(out.end(), a.cores.begin(), a.cores.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

int ScheduleDecision::max_level() const {
  int l = 0;
  for (const auto& a : apps) l = std::max(l, a.freq_level);
  return l;
}

double Observation::mean_utilization(std::span<const CoreId> cores) const {
  if (cores.empty()) return 0.0;
  double s = 0.0;
  for (CoreId c : cores) s += utilization.at(static_cast<std::size_t>(c));
  return s / static_cast<double>(cores.size());
}

double Observation::mean_temp_end(std::span<const CoreId> cores) const {
  if (cores.empty()) return 0.0;
  double s = 0.0;
  for (CoreId c : cores) s += temp_end.at(static_cast<std::size_t>(c));
  return s / static_cast<double>(cores.size());
}

PlatformState PlatformState::initial(const Platform& p) {
  return initial(p, p.thermal.ambient);
}

PlatformState PlatformState::initial(const Platform& p, double start_temp) {
  PlatformState s;
  s.thermal = p.initial_thermal(start_temp);
  s.core_levels.assign(static_cast<std::size_t>(p.topology.core_count()), -1);
  return s;
}

namespace {

enum class SubState { blocked, ready, running, done };

struct SubRun {
  SubState state = SubState::blocked;
  int pending_deps = 0;
  bool started = false;
  double remaining = 0.0;  // reference seconds left on a speed-1.0 core
  double duration = 0.0;
  double ready_since = 0.0;
  CoreId bound = -1;
};

struct AppRun {
  std::vector<CoreId> allowed;
  std::vector<SubRun> subs;
  std::vector<std::vector<int>> succ;
  std::vector<int> ready;  // subtask ids, kept ordered by (ready_since, id)
  int remaining_subs = 0;
  double finish = 0.0;
};

struct CoreRun {
  int app = -1;
  int sub = -1;
  double seg_start = 0.0;
  double busy = 0.0;
};

void validate(std::span<const DagTask> suite, const ScheduleDecision& d, const Platform& p) {
  if (d.apps.size() != suite.size())
    throw SchedulingError("decision has " + std::to_string(d.apps.size()) +
                          " application entries for a suite of " + std::to_string(suite.size()));
  const auto& topo = p.topology;
  for (std::size_t i = 0; i < d.apps.size(); ++i) {
    const auto& a = d.apps[i];
    const std::string who = "application " + std::to_string(i);
    if (a.cores.empty() && !suite[i].subtasks.empty())
      throw SchedulingError(who + " has no cores");
    std::vector<CoreId> sorted = a.cores;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw SchedulingError(who + " lists a core twice");
    for (CoreId c : a.cores) {
      if (c < 0 || c >= topo.core_count())
        throw SchedulingError(who + ": core " + std::to_string(c) + " does not exist");
      if (topo.is_reserved(c))
        throw SchedulingError(who + ": core " + std::to_string(c) + " is reserved");
    }
    if (a.freq_level < 0 || a.freq_level >= p.ladder.size())
      throw SchedulingError(who + ": invalid frequency level " + std::to_string(a.freq_level));
    if (a.priority < 1 || a.priority > 99)
      throw SchedulingError(who + ": priority " + std::to_string(a.priority) + " outside 1..99");
  }
}

}  // namespace

EpochResult run_epoch(std::span<const DagTask> suite, const ScheduleDecision& decision,
                      const Platform& platform, const PlatformState& state,
                      const workload::WorkloadModelParams& wparams, const EngineParams& eparams,
                      Rng& rng) {
  validate(suite, decision, platform);
  if (!(eparams.max_substep > 0.0)) throw std::domain_error("max_substep must be positive");
  const auto& topo = platform.topology;
  const int n_cores = topo.core_count();
  const std::size_t n_apps = suite.size();

  std::vector<int> rank(n_apps);
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(), [&](int a, int b) {
    return decision.apps[static_cast<std::size_t>(a)].priority >
           decision.apps[static_cast<std::size_t>(b)].priority;
  });

  EpochResult res;
  res.state = state;
  if (static_cast<int>(res.state.core_levels.size()) != n_cores)
    res.state.core_levels.assign(static_cast<std::size_t>(n_cores), -1);

  // Frequency switches: each core takes the level of the highest-ranked app that may use it.
  int switches = 0;
  {
    std::vector<int> new_level(static_cast<std::size_t>(n_cores), -1);
    for (int a : rank) {
      for (CoreId c : decision.apps[static_cast<std::size_t>(a)].cores) {
        auto& l = new_level[static_cast<std::size_t>(c)];
        if (l < 0) l = decision.apps[static_cast<std::size_t>(a)].freq_level;
      }
    }
    for (int c = 0; c < n_cores; ++c) {
      const int l = new_level[static_cast<std::size_t>(c)];
      if (l >= 0 && l != res.state.core_levels[static_cast<std::size_t>(c)]) {
        ++switches;
        res.state.core_levels[static_cast<std::size_t>(c)] = l;
      }
    }
  }
  const double origin = eparams.decision_overhead + switches * platform.dvfs_switch_s;
  res.origin = origin;

  std::vector<AppRun> apps(n_apps);
  int total_remaining = 0;
  for (std::size_t i = 0; i < n_apps; ++i) {
    const auto& task = suite[i];
    auto& ar = apps[i];
    const auto& cores = decision.apps[i].cores;
    if (task.variant == Variant::serial && !cores.empty()) {
      ar.allowed = {cores.front()};
    } else {
      ar.allowed = cores;
    }
    const auto n = task.subtasks.size();
    ar.subs.resize(n);
    ar.succ.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      const auto& st = task.subtasks[j];
      if (st.id != static_cast<int>(j)) throw SchedulingError("subtask ids must equal their index");
      for (int d : st.deps) {
        if (d < 0 || static_cast<std::size_t>(d) >= n) throw SchedulingError("dangling dependency");
        ar.succ[static_cast<std::size_t>(d)].push_back(static_cast<int>(j));
      }
      ar.subs[j].pending_deps = static_cast<int>(st.deps.size());
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (ar.subs[j].pending_deps == 0) {
        ar.subs[j].state = SubState::ready;
        ar.subs[j].ready_since = origin;
        ar.ready.push_back(static_cast<int>(j));
      }
    }
    ar.remaining_subs = static_cast<int>(n);
    ar.finish = origin;
    total_remaining += static_cast<int>(n);
  }

  std::vector<CoreRun> cores(static_cast<std::size_t>(n_cores));
  std::vector<int> levels(static_cast<std::size_t>(n_cores), -1);
  std::vector<double> temp_integral(static_cast<std::size_t>(n_cores), 0.0);
  platform::ThermalState thermal = state.thermal;
  double energy = 0.0;

  auto integrate = [&](double t0, double t1) {
    if (!(t1 > t0)) return;
    const double span = t1 - t0;
    const auto steps = static_cast<long>(std::ceil(span / eparams.max_substep));
    const double dt = span / static_cast<double>(std::max(1L, steps));
    for (long s = 0; s < std::max(1L, steps); ++s) {
      const auto pw = platform::power_draw(topo, levels, thermal, platform.power, platform.ladder);
      energy += pw.total() * dt;
      for (std::size_t c = 0; c < temp_integral.size(); ++c)
        temp_integral[c] += thermal.temp_per_core[c] * dt;
      thermal = platform::thermal_step(thermal, topo, pw, dt);
    }
  };

  auto record = [&](CoreId c, double t_end) {
    auto& cr = cores[static_cast<std::size_t>(c)];
    cr.busy += t_end - cr.seg_start;
    if (eparams.record_trace && t_end > cr.seg_start)
      res.trace.push_back(JobRecord{c, cr.app, cr.sub, cr.seg_start, t_end});
  };

  auto sort_ready = [&](AppRun& ar) {
    std::sort(ar.ready.begin(), ar.ready.end(), [&](int a, int b) {
      const double ra = ar.subs[static_cast<std::size_t>(a)].ready_since;
      const double rb = ar.subs[static_cast<std::size_t>(b)].ready_since;
      return ra != rb ? ra < rb : a < b;
    });
  };

  auto start = [&](int app, int sub, CoreId c, double t) {
    auto& ar = apps[static_cast<std::size_t>(app)];
    auto& sr = ar.subs[static_cast<std::size_t>(sub)];
    const auto& task = suite[static_cast<std::size_t>(app)];
    const auto& ad = decision.apps[static_cast<std::size_t>(app)];
    if (!sr.started) {
      sr.duration = workload::subtask_duration(task.subtasks[static_cast<std::size_t>(sub)],
                                               static_cast<int>(ar.allowed.size()), ad.freq_level,
                                               task.variant, platform.ladder, wparams, rng);
      sr.remaining = sr.duration;
      sr.started = true;
      if (task.subtasks[static_cast<std::size_t>(sub)].binding == workload::Binding::tied)
        sr.bound = c;
    }
    sr.state = SubState::running;
    ar.ready.erase(std::find(ar.ready.begin(), ar.ready.end(), sub));
    auto& cr = cores[static_cast<std::size_t>(c)];
    cr.app = app;
    cr.sub = sub;
    cr.seg_start = t;
    levels[static_cast<std::size_t>(c)] = ad.freq_level;
  };

  auto preempt = [&](CoreId c, double t) {
    auto& cr = cores[static_cast<std::size_t>(c)];
    record(c, t);
    auto& ar = apps[static_cast<std::size_t>(cr.app)];
    ar.subs[static_cast<std::size_t>(cr.sub)].state = SubState::ready;
    ar.ready.push_back(cr.sub);
    sort_ready(ar);
    cr.app = -1;
    cr.sub = -1;
    levels[static_cast<std::size_t>(c)] = -1;
  };

  auto dispatch = [&](double t) {
    for (;;) {
      bool placed = false;
      for (int app : rank) {
        auto& ar = apps[static_cast<std::size_t>(app)];
        const int prio = decision.apps[static_cast<std::size_t>(app)].priority;
        for (int sub : ar.ready) {
          const auto& sr = ar.subs[static_cast<std::size_t>(sub)];
          std::span<const CoreId> cand = ar.allowed;
          if (sr.bound >= 0) cand = std::span<const CoreId>(&sr.bound, 1);
          CoreId idle = -1;
          for (CoreId c : cand) {
            const auto& cr = cores[static_cast<std::size_t>(c)];
            if (cr.app >= 0) continue;
            if (idle < 0 || cr.busy < cores[static_cast<std::size_t>(idle)].busy ||
                (cr.busy == cores[static_cast<std::size_t>(idle)].busy && c < idle))
              idle = c;
          }
          if (idle >= 0) {
            start(app, sub, idle, t);
            placed = true;
            break;
          }
          // Evict the lowest-priority strictly-lower job, lowest core id on ties.
          CoreId victim = -1;
          int victim_prio = prio;
          for (CoreId c : cand) {
            const auto& cr = cores[static_cast<std::size_t>(c)];
            const int p = decision.apps[static_cast<std::size_t>(cr.app)].priority;
            if (p >= prio) continue;
            if (victim < 0 || p < victim_prio || (p == victim_prio && c < victim)) {
              victim = c;
              victim_prio = p;
            }
          }
          if (victim >= 0) {
            preempt(victim, t);
            start(app, sub, victim, t);
            placed = true;
            break;
          }
        }
        if (placed) break;
      }
      if (!placed) return;
    }
  };

  integrate(0.0, origin);
  double t = origin;
  while (total_remaining > 0) {
    dispatch(t);
    double t_next = std::numeric_limits<double>::infinity();
    CoreId first = -1;
    for (int c = 0; c < n_cores; ++c) {
      const auto& cr = cores[static_cast<std::size_t>(c)];
      if (cr.app < 0) continue;
      const auto& sr = apps[static_cast<std::size_t>(cr.app)].subs[static_cast<std::size_t>(cr.sub)];
      const double tc = t + sr.remaining / topo.speed_scale(c);
      if (tc < t_next) {
        t_next = tc;
        first = c;
      }
    }
    if (first < 0) throw SchedulingError("no runnable work while subtasks remain");
    integrate(t, t_next);
    for (int c = 0; c < n_cores; ++c) {
      auto& cr = cores[static_cast<std::size_t>(c)];
      if (cr.app < 0) continue;
      auto& sr = apps[static_cast<std::size_t>(cr.app)].subs[static_cast<std::size_t>(cr.sub)];
      sr.remaining = c == first ? 0.0 : sr.remaining - topo.speed_scale(c) * (t_next - t);
    }
    t = t_next;
    for (int c = 0; c < n_cores; ++c) {
      auto& cr = cores[static_cast<std::size_t>(c)];
      if (cr.app < 0) continue;
      auto& ar = apps[static_cast<std::size_t>(cr.app)];
      auto& sr = ar.subs[static_cast<std::size_t>(cr.sub)];
      if (sr.remaining > 1e-9 * sr.duration) continue;
      sr.remaining = 0.0;
      sr.state = SubState::done;
      record(c, t);
      for (int s : ar.succ[static_cast<std::size_t>(cr.sub)]) {
        auto& ss = ar.subs[static_cast<std::size_t>(s)];
        if (--ss.pending_deps == 0) {
          ss.state = SubState::ready;
          ss.ready_since = t;
          ar.ready.push_back(s);
        }
      }
      sort_ready(ar);
      if (--ar.remaining_subs == 0) ar.finish = t;
      --total_remaining;
      cr.app = -1;
      cr.sub = -1;
      levels[static_cast<std::size_t>(c)] = -1;
    }
  }

  auto& obs = res.obs;
  obs.makespan = t;
  obs.energy = energy;
  obs.temp_end = thermal.temp_per_core;
  obs.temp_avg.resize(static_cast<std::size_t>(n_cores));
  obs.utilization.resize(static_cast<std::size_t>(n_cores));
  for (std::size_t c = 0; c < static_cast<std::size_t>(n_cores); ++c) {
    obs.temp_avg[c] = t > 0.0 ? temp_integral[c] / t : thermal.temp_per_core[c];
    obs.utilization[c] = t > 0.0 ? std::clamp(cores[c].busy / t, 0.0, 1.0) : 0.0;
  }
  for (std::size_t i = 0; i < n_apps; ++i) {
    const auto& ad = decision.apps[i];
    AppObservation ao;
    ao.makespan = apps[i].finish;
    ao.priority = ad.priority;
    ao.cores = static_cast<int>(apps[i].allowed.size());
    ao.freq_level = ad.freq_level;
    const auto mc = workload::miss_counts(suite[i], std::max(1, ao.cores), ad.freq_level,
                                          ad.priority, platform.ladder.size(), wparams, rng);
    ao.branch_misses = mc.branch;
    ao.cache_misses = mc.cache;
    obs.branch_misses += mc.branch;
    obs.cache_misses += mc.cache;
    obs.apps.push_back(ao);
  }
  obs.decision = decision;
  obs.core_count = static_cast<int>(decision.core_union().size());
  obs.freq_level = decision.max_level();
  res.state.thermal = std::move(thermal);
  return res;
}

int level_of_parallelism(double m_one, double m_all, int m_avail) {
  if (!(m_one > 0.0) || !(m_all > 0.0))
    throw std::domain_error("level_of_parallelism: makespans must be positive");
  if (m_avail < 1) throw std::domain_error("level_of_parallelism: no cores available");
  const long r = std::lround(m_one / m_all);
  return static_cast<int>(std::clamp<long>(r, 1, m_avail));
}

Allocation allocate_cores(std::span<const AppRequest> apps, int available) {
  if (available < 1) throw std::domain_error("allocate_cores: available must be >= 1");
  Allocation out;
  out.cores.assign(apps.size(), 0);
  out.order.resize(apps.size());
  std::iota(out.order.begin(), out.order.end(), 0);
  std::stable_sort(out.order.begin(), out.order.end(), [&](int a, int b) {
    return apps[static_cast<std::size_t>(a)].priority > apps[static_cast<std::size_t>(b)].priority;
  });
  int remaining = available;
  for (int i : out.order) {
    const int want = std::max(0, apps[static_cast<std::size_t>(i)].lop);
    const int got = std::min(want, remaining);
    out.cores[static_cast<std::size_t>(i)] = got;
    remaining -= got;
    if (got < want) out.shortages.push_back(Shortage{i, want, got});
  }
  return out;
}

ScheduleDecision build_decision(std::span<const CoreId> subset, int level,
                                std::span<const int> priorities, std::span<const int> lops,
                                std::string policy) {
  if (priorities.size() != lops.size())
    throw std::domain_error("build_decision: priorities and lops differ in length");
  std::vector<CoreId> cores(subset.begin(), subset.end());
  std::sort(cores.begin(), cores.end());
  std::vector<AppRequest> req;
  for (std::size_t i = 0; i < lops.size(); ++i) req.push_back(AppRequest{priorities[i], lops[i]});
  const auto alloc = allocate_cores(req, static_cast<int>(cores.size()));
  ScheduleDecision d;
  d.policy = std::move(policy);
  d.apps.resize(lops.size());
  std::size_t cursor = 0;
  for (int i : alloc.order) {
    auto& a = d.apps[static_cast<std::size_t>(i)];
    a.freq_level = level;
    a.priority = priorities[static_cast<std::size_t>(i)];
    const auto n = static_cast<std::size_t>(alloc.cores[static_cast<std::size_t>(i)]);
    if (static_cast<int>(n) < std::max(1, lops[static_cast<std::size_t>(i)])) {
      a.cores = cores;
      cursor += n;
    } else {
      a.cores.assign(cores.begin() + static_cast<std::ptrdiff_t>(cursor),
                     cores.begin() + static_cast<std::ptrdiff_t>(cursor + n));
      cursor += n;
    }
  }
  return d;
}

std::vector<int> compute_lops(std::span<const DagTask> suite, const Platform& platform,
                              const workload::WorkloadModelParams& wparams) {
  auto wp = wparams;
  wp.jitter_sigma = 0.0;
  EngineParams ep;
  ep.decision_overhead = 0.0;
  ep.max_substep = 1.0;
  Platform probe = platform;
  probe.dvfs_switch_s = 0.0;
  const auto& avail = platform.topology.available();
  const int top = platform.ladder.size() - 1;
  std::vector<int> out;
  for (const auto& task : suite) {
    DagTask t = task;
    t.id = 0;
    std::vector<DagTask> one{t};
    auto run = [&](std::vector<CoreId> cores) {
      ScheduleDecision d;
      d.apps.push_back(AppDecision{std::move(cores), top, 80});
      Rng rng(0);
      return run_epoch(one, d, probe, PlatformState::initial(probe), wp, ep, rng).obs.makespan;
    };
    if (t.subtasks.empty()) {
      out.push_back(1);
      continue;
    }
    const double m_one = run({avail.front()});
    const double m_all = run(avail);
    out.push_back(level_of_parallelism(m_one, m_all, static_cast<int>(avail.size())));
  }
  return out;
}

Environment::Environment(std::vector<DagTask> suite, Platform platform,
                         workload::WorkloadModelParams wparams, EngineParams eparams,
                         std::uint64_t seed, std::optional<double> start_temp)
    : suite_(std::move(suite)),
      platform_(std::move(platform)),
      wparams_(wparams),
      eparams_(eparams),
      state_(start_temp ? PlatformState::initial(platform_, *start_temp)
                        : PlatformState::initial(platform_)),
      lops_(compute_lops(suite_, platform_, wparams_)),
      rng_(make_rng(seed, 0xE57)) {}

const EpochResult& Environment::step(const ScheduleDecision& decision) {
  EpochResult r = run_epoch(suite_, decision, platform_, state_, wparams_, eparams_, rng_);
  state_ = r.state;
  last_ = std::move(r);
  return *last_;
}

ScheduleDecision Environment::decide(std::span<const CoreId> subset, int level,
                                     std::span<const int> priorities, std::string policy) const {
  return build_decision(subset, level, priorities, lops_, std::move(policy));
}

}  // namespace hidvfs::sim
