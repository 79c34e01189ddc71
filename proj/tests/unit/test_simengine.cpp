#include <doctest.h>

#include <cmath>
#include <sstream>

#include "hidvfs/errors.hpp"
#include "hidvfs/simengine.hpp"

using namespace hidvfs;
using namespace hidvfs::sim;
using workload::Binding;
using workload::DagTask;
using workload::Subtask;
using workload::Variant;

namespace {

constexpr double kTop = 2035200.0;

// Platform and parameters with no overhead, no jitter and no core-count inflation.
struct Exact {
  platform::Platform p;
  workload::WorkloadModelParams wp;
  EngineParams ep;

  Exact() {
    p.dvfs_switch_s = 0.0;
    wp.jitter_sigma = 0.0;
    wp.kappa_tied = 0.0;
    wp.kappa_untied = 0.0;
    ep.decision_overhead = 0.0;
    ep.record_trace = true;
  }
};

DagTask single(int id, double seconds_at_top, Variant v = Variant::untied) {
  DagTask t;
  t.id = id;
  t.variant = v;
  t.subtasks = {Subtask{0, seconds_at_top * kTop, {}, v == Variant::untied ? Binding::untied : Binding::tied}};
  return t;
}

std::vector<DagTask> random_suite(std::uint64_t seed) {
  const std::vector<std::string> names{"fft", "fib", "sort"};
  return workload::generate_suite(names, 1, seed);
}

ScheduleDecision random_decision(const std::vector<DagTask>& suite, Rng& rng) {
  const auto avail = platform::Topology::tx2().available();
  std::uniform_int_distribution<int> lvl(0, 11), prio(70, 95), bit(0, 1);
  ScheduleDecision d;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    AppDecision a;
    for (auto c : avail)
      if (bit(rng)) a.cores.push_back(c);
    if (a.cores.empty()) a.cores.push_back(avail[i % avail.size()]);
    a.freq_level = lvl(rng);
    a.priority = prio(rng);
    d.apps.push_back(a);
  }
  return d;
}

}  // namespace

TEST_CASE("level of parallelism examples") {
  CHECK(level_of_parallelism(8.0, 2.0, 5) == 4);
  CHECK(level_of_parallelism(3.0, 3.0, 5) == 1);
  CHECK(level_of_parallelism(20.0, 2.0, 5) == 5);
  CHECK(level_of_parallelism(1.0, 4.0, 5) == 1);
  CHECK_THROWS_AS(level_of_parallelism(0.0, 1.0, 5), std::domain_error);
  CHECK_THROWS_AS(level_of_parallelism(1.0, -1.0, 5), std::domain_error);
}

TEST_CASE("core allocation examples") {
  {
    const std::vector<AppRequest> r{{90, 3}, {80, 2}};
    const auto a = allocate_cores(r, 5);
    CHECK(a.cores == std::vector<int>{3, 2});
    CHECK(a.shortages.empty());
  }
  {
    const std::vector<AppRequest> r{{90, 4}, {80, 3}};
    const auto a = allocate_cores(r, 5);
    CHECK(a.cores == std::vector<int>{4, 1});
    REQUIRE(a.shortages.size() == 1);
    CHECK(a.shortages[0].app == 1);
    CHECK(a.shortages[0].requested - a.shortages[0].granted == 2);
  }
  {
    const std::vector<AppRequest> r{{80, 3}, {80, 3}};
    const auto a = allocate_cores(r, 5);
    CHECK(a.cores == std::vector<int>{3, 2});
    CHECK(a.order == std::vector<int>{0, 1});
  }
  {
    // lower priority listed first is served second
    const std::vector<AppRequest> r{{70, 3}, {95, 4}};
    const auto a = allocate_cores(r, 5);
    CHECK(a.cores == std::vector<int>{1, 4});
  }
}

TEST_CASE("allocation invariants over random requests") {
  Rng rng(17);
  std::uniform_int_distribution<int> prio(1, 99), lop(0, 6), avail(1, 8), n(1, 9);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<AppRequest> r(static_cast<std::size_t>(n(rng)));
    for (auto& x : r) x = AppRequest{prio(rng), lop(rng)};
    const int m = avail(rng);
    const auto a = allocate_cores(r, m);
    int total = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      CHECK(a.cores[i] >= 0);
      CHECK(a.cores[i] <= std::max(0, r[i].lop));
      total += a.cores[i];
    }
    CHECK(total <= m);
    // a shortage means everything was handed out
    if (!a.shortages.empty()) CHECK(total == m);
    // strictly higher priority is never worse served relative to its request
    for (std::size_t i = 0; i < r.size(); ++i)
      for (std::size_t j = 0; j < r.size(); ++j)
        if (r[i].priority > r[j].priority && a.cores[j] > 0) CHECK(a.cores[i] == std::max(0, r[i].lop));
  }
  const std::vector<AppRequest> none{{80, 1}};
  CHECK_THROWS_AS(allocate_cores(none, 0), std::domain_error);
}

TEST_CASE("build_decision slices the subset in priority order") {
  const std::vector<CoreId> subset{5, 1, 3, 2, 4};
  const std::vector<int> prios{80, 90};
  const std::vector<int> lops{2, 3};
  const auto d = build_decision(subset, 7, prios, lops, "t");
  CHECK(d.apps[1].cores == std::vector<CoreId>{1, 2, 3});
  CHECK(d.apps[0].cores == std::vector<CoreId>{4, 5});
  CHECK(d.apps[0].freq_level == 7);
  CHECK(d.core_union() == std::vector<CoreId>{1, 2, 3, 4, 5});

  // a short app shares the whole subset
  const std::vector<int> big{4, 3};
  const std::vector<int> prios2{90, 80};
  const auto s = build_decision(subset, 0, prios2, big);
  CHECK(s.apps[0].cores.size() == 4);
  CHECK(s.apps[1].cores == std::vector<CoreId>{1, 2, 3, 4, 5});
}

TEST_CASE("strict priority on a shared core") {
  Exact ex;
  std::vector<DagTask> suite{single(0, 2.0), single(1, 3.0)};
  ScheduleDecision d;
  d.apps = {AppDecision{{3}, 11, 90}, AppDecision{{3}, 11, 80}};
  Rng rng(1);
  const auto r = run_epoch(suite, d, ex.p, PlatformState::initial(ex.p), ex.wp, ex.ep, rng);
  CHECK(r.obs.apps[0].makespan == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(r.obs.apps[1].makespan == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(r.obs.makespan == doctest::Approx(5.0).epsilon(1e-12));

  // Oracle: the two possible orders; strict priority picks the one finishing the 90 app first.
  const double order_hi_first[2] = {2.0, 5.0};
  const double order_lo_first[2] = {5.0, 3.0};
  CHECK(r.obs.apps[0].makespan < order_lo_first[0]);
  CHECK(r.obs.apps[0].makespan == doctest::Approx(order_hi_first[0]));
  CHECK(r.obs.apps[1].makespan == doctest::Approx(order_hi_first[1]));

  // swapping priorities swaps the order
  d.apps[0].priority = 70;
  Rng rng2(1);
  const auto s = run_epoch(suite, d, ex.p, PlatformState::initial(ex.p), ex.wp, ex.ep, rng2);
  CHECK(s.obs.apps[1].makespan == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(s.obs.apps[0].makespan == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("a fork-join DAG with enough cores finishes at its critical path") {
  Exact ex;
  ex.p.topology = platform::Topology::homogeneous(6, true);
  DagTask t;
  t.variant = Variant::untied;
  const double w[5] = {0.3, 1.0, 1.7, 0.6, 0.4};
  t.subtasks = {Subtask{0, w[0] * kTop, {}}, Subtask{1, w[1] * kTop, {0}}, Subtask{2, w[2] * kTop, {0}},
                Subtask{3, w[3] * kTop, {0}}, Subtask{4, w[4] * kTop, {1, 2, 3}}};
  std::vector<DagTask> suite{t};
  ScheduleDecision d;
  d.apps = {AppDecision{{1, 2, 3, 4}, 11, 80}};
  Rng rng(1);
  const auto r = run_epoch(suite, d, ex.p, PlatformState::initial(ex.p), ex.wp, ex.ep, rng);
  CHECK(r.obs.makespan == doctest::Approx(w[0] + w[2] + w[4]).epsilon(1e-12));
  CHECK(check_trace(suite, d, r.trace, r.origin).ok());
}

TEST_CASE("performance cores run faster") {
  Exact ex;
  std::vector<DagTask> suite{single(0, 1.3)};
  ScheduleDecision d;
  d.apps = {AppDecision{{1}, 11, 80}};
  Rng rng(1);
  const auto r = run_epoch(suite, d, ex.p, PlatformState::initial(ex.p), ex.wp, ex.ep, rng);
  CHECK(r.obs.makespan == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("constant power integrates to power times time") {
  Exact ex;
  ex.p.power.leak_temp_coeff = 0.0;
  std::vector<DagTask> suite{single(0, 2.0)};
  ScheduleDecision d;
  d.apps = {AppDecision{{4}, 11, 80}};
  Rng rng(1);
  const auto state = PlatformState::initial(ex.p);
  const auto r = run_epoch(suite, d, ex.p, state, ex.wp, ex.ep, rng);
  std::vector<int> lv(6, -1);
  lv[4] = 11;
  const double watts = platform::power_draw(ex.p.topology, lv, state.thermal, ex.p.power, ex.p.ladder).total();
  CHECK(std::abs(r.obs.energy - watts * 2.0) <= 1e-9 * watts * 2.0);
}

TEST_CASE("decision overhead delays the epoch once") {
  Exact ex;
  ex.ep.decision_overhead = 0.002;
  std::vector<DagTask> suite{single(0, 1.0), single(1, 1.0)};
  ScheduleDecision d;
  d.apps = {AppDecision{{2}, 11, 80}, AppDecision{{3}, 11, 80}};
  Rng rng(1);
  const auto r = run_epoch(suite, d, ex.p, PlatformState::initial(ex.p), ex.wp, ex.ep, rng);
  CHECK(r.origin == doctest::Approx(0.002));
  CHECK(r.obs.makespan == doctest::Approx(1.002).epsilon(1e-12));
}

TEST_CASE("tied subtasks never migrate") {
  Exact ex;
  // Long tied job at low priority gets preempted by a burst of high-priority work on its core
  // and must resume on the same core even though another one frees up earlier.
  DagTask lo = single(0, 2.0, Variant::tied);
  DagTask hi;
  hi.id = 1;
  hi.variant = Variant::untied;
  hi.subtasks = {Subtask{0, 0.5 * kTop, {}}, Subtask{1, 1.5 * kTop, {}}};
  std::vector<DagTask> suite{lo, hi};
  ScheduleDecision d;
  d.apps = {AppDecision{{3, 4}, 11, 70}, AppDecision{{3, 4}, 11, 90}};
  Rng rng(1);
  const auto r = run_epoch(suite, d, ex.p, PlatformState::initial(ex.p), ex.wp, ex.ep, rng);
  CHECK(check_trace(suite, d, r.trace, r.origin).ok());
  CHECK(check_tied_binding(suite, r.trace).ok());
}

TEST_CASE("engine traces satisfy every scheduling invariant") {
  Rng drng(23);
  platform::Platform p;
  workload::WorkloadModelParams wp;
  EngineParams ep;
  ep.record_trace = true;
  for (std::uint64_t seed = 1; seed <= 15; ++seed) {
    const auto suite = random_suite(seed);
    const auto d = random_decision(suite, drng);
    Rng rng(seed);
    const auto r = run_epoch(suite, d, p, PlatformState::initial(p), wp, ep, rng);
    const auto check = check_trace(suite, d, r.trace, r.origin);
    for (const auto& v : check.violations) MESSAGE(v);
    CHECK(check.ok());
    CHECK(r.obs.makespan > 0.0);
    CHECK(r.obs.energy >= 0.0);
    for (double u : r.obs.utilization) {
      CHECK(u >= 0.0);
      CHECK(u <= 1.0);
    }
    for (const auto& a : r.obs.apps) CHECK(a.makespan <= r.obs.makespan);
  }
}

TEST_CASE("trace checkers flag broken schedules") {
  Exact ex;
  DagTask t;
  t.variant = Variant::tied;
  t.subtasks = {Subtask{0, kTop, {}, Binding::tied}, Subtask{1, kTop, {0}, Binding::tied}};
  std::vector<DagTask> suite{t};
  ScheduleDecision d;
  d.apps = {AppDecision{{3, 4}, 11, 80}};

  const std::vector<JobRecord> early{{3, 0, 0, 0.0, 1.0}, {4, 0, 1, 0.5, 1.5}};
  CHECK_FALSE(check_dependencies(suite, early, 0.0).ok());

  const std::vector<JobRecord> migrated{{3, 0, 0, 0.0, 0.5}, {4, 0, 0, 0.5, 1.0}, {3, 0, 1, 1.0, 2.0}};
  CHECK_FALSE(check_tied_binding(suite, migrated).ok());

  const std::vector<JobRecord> lazy{{3, 0, 0, 0.5, 1.5}, {3, 0, 1, 1.5, 2.5}};
  CHECK_FALSE(check_work_conservation(suite, d, lazy, 0.0).ok());

  const std::vector<JobRecord> good{{3, 0, 0, 0.0, 1.0}, {3, 0, 1, 1.0, 2.0}};
  CHECK(check_trace(suite, d, good, 0.0).ok());

  // priority inversion on a shared core
  std::vector<DagTask> two{single(0, 1.0), single(1, 1.0)};
  ScheduleDecision d2;
  d2.apps = {AppDecision{{3}, 11, 90}, AppDecision{{3}, 11, 80}};
  const std::vector<JobRecord> inverted{{3, 1, 0, 0.0, 1.0}, {3, 0, 0, 1.0, 2.0}};
  CHECK_FALSE(check_priority(two, d2, inverted, 0.0).ok());
}

TEST_CASE("trace files round trip") {
  platform::Platform p;
  workload::WorkloadModelParams wp;
  EngineParams ep;
  ep.record_trace = true;
  const auto suite = random_suite(4);
  Rng drng(2);
  const auto d = random_decision(suite, drng);
  Rng rng(4);
  const auto r = run_epoch(suite, d, p, PlatformState::initial(p), wp, ep, rng);
  std::stringstream ss;
  write_trace_jsonl(ss, suite, d, r.trace, r.origin);
  CHECK(ss.str().find("hidvfs.trace.v1") != std::string::npos);
  const auto back = read_trace_jsonl(ss);
  REQUIRE(back.trace.size() == r.trace.size());
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    CHECK(back.trace[i].core == r.trace[i].core);
    CHECK(back.trace[i].start == r.trace[i].start);
    CHECK(back.trace[i].end == r.trace[i].end);
  }
  CHECK(back.origin == r.origin);
  CHECK(back.suite.size() == suite.size());
  CHECK(check_trace(back.suite, back.decision, back.trace, back.origin).ok());
}

TEST_CASE("identical inputs give identical observations") {
  platform::Platform p;
  workload::WorkloadModelParams wp;
  EngineParams ep;
  const auto suite = random_suite(8);
  Rng drng(8);
  const auto d = random_decision(suite, drng);
  Rng a(99), b(99);
  const auto ra = run_epoch(suite, d, p, PlatformState::initial(p), wp, ep, a);
  const auto rb = run_epoch(suite, d, p, PlatformState::initial(p), wp, ep, b);
  CHECK(ra.obs.makespan == rb.obs.makespan);
  CHECK(ra.obs.energy == rb.obs.energy);
  CHECK(ra.obs.temp_end == rb.obs.temp_end);
  CHECK(ra.obs.utilization == rb.obs.utilization);
  CHECK(ra.obs.branch_misses == rb.obs.branch_misses);
  CHECK(ra.obs.cache_misses == rb.obs.cache_misses);
}

TEST_CASE("infeasible decisions are scheduling errors") {
  platform::Platform p;
  workload::WorkloadModelParams wp;
  EngineParams ep;
  std::vector<DagTask> suite{single(0, 1.0)};
  Rng rng(1);
  auto run = [&](AppDecision a) {
    ScheduleDecision d;
    d.apps = {a};
    return run_epoch(suite, d, p, PlatformState::initial(p), wp, ep, rng);
  };
  CHECK_THROWS_AS(run(AppDecision{{}, 5, 80}), SchedulingError);
  CHECK_THROWS_AS(run(AppDecision{{0}, 5, 80}), SchedulingError);  // reserved
  CHECK_THROWS_AS(run(AppDecision{{9}, 5, 80}), SchedulingError);
  CHECK_THROWS_AS(run(AppDecision{{2, 2}, 5, 80}), SchedulingError);
  CHECK_THROWS_AS(run(AppDecision{{2}, 12, 80}), SchedulingError);
  CHECK_THROWS_AS(run(AppDecision{{2}, 5, 100}), SchedulingError);
  ScheduleDecision wrong;
  CHECK_THROWS_AS(run_epoch(suite, wrong, p, PlatformState::initial(p), wp, ep, rng), SchedulingError);
}

TEST_CASE("environment carries machine state across epochs") {
  platform::Platform p;
  Environment env(random_suite(3), p, {}, {}, 7);
  CHECK(env.lops().size() == 9);
  for (int l : env.lops()) {
    CHECK(l >= 1);
    CHECK(l <= 5);
  }
  // serial variants gain nothing from more cores
  CHECK(env.lops()[0] == 1);
  const std::vector<int> prios(9, 80);
  const auto avail = p.topology.available();
  const auto d = env.decide(avail, 11, prios);
  const double t0 = env.state().thermal.max_temp();
  env.step(d);
  CHECK(env.state().thermal.max_temp() > t0);
  CHECK(env.state().core_levels[1] == 11);
  REQUIRE(env.last().has_value());
  CHECK(env.last()->obs.core_count == 5);
}
