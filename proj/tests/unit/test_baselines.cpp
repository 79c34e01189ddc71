#include <doctest.h>

#include <array>

#include "hidvfs/baselines.hpp"

using namespace hidvfs;
using namespace hidvfs::baselines;

namespace {

const std::vector<int> kLops{1, 3, 2};

sim::Observation with_utilization(int level, double u) {
  sim::Observation obs;
  obs.freq_level = level;
  obs.utilization.assign(6, u);
  return obs;
}

std::vector<workload::DagTask> fft_suite() {
  const std::vector<std::string> names{"fft"};
  return workload::generate_suite(names, 1, 42);
}

}  // namespace

TEST_CASE("performance and powersave use every available core at a fixed level") {
  const platform::Platform p;
  Rng rng(1);
  for (int i = 0; i < 5; ++i) {
    const auto perf = governor_decide(GovernorKind::performance, nullptr, p, kLops, rng);
    const auto save = governor_decide(GovernorKind::powersave, nullptr, p, kLops, rng);
    for (const auto& a : perf.apps) {
      CHECK(a.freq_level == 11);
      CHECK(a.priority == 80);
    }
    for (const auto& a : save.apps) CHECK(a.freq_level == 0);
    CHECK(perf.core_union() == p.topology.available());
    CHECK(save.core_union() == p.topology.available());
  }
}

TEST_CASE("ondemand steps by two around the thresholds") {
  const platform::Platform p;
  Rng rng(1);
  auto level_after = [&](int level, double u) {
    const auto obs = with_utilization(level, u);
    return governor_decide(GovernorKind::ondemand, &obs, p, kLops, rng).max_level();
  };
  CHECK(level_after(5, 0.9) == 7);
  CHECK(level_after(5, 0.2) == 3);
  CHECK(level_after(5, 0.5) == 5);
  CHECK(level_after(11, 0.95) == 11);
  CHECK(level_after(1, 0.0) == 0);
  CHECK(governor_decide(GovernorKind::ondemand, nullptr, p, kLops, rng).max_level() == 6);
  OndemandParams od;
  od.start_level = 2;
  od.step = 3;
  CHECK(governor_decide(GovernorKind::ondemand, nullptr, p, kLops, rng, od).max_level() == 2);
  const auto obs = with_utilization(2, 0.99);
  CHECK(governor_decide(GovernorKind::ondemand, &obs, p, kLops, rng, od).max_level() == 5);
}

TEST_CASE("no baseline selects a reserved core") {
  const platform::Platform p;
  Rng rng(3);
  for (auto kind : {GovernorKind::performance, GovernorKind::powersave, GovernorKind::ondemand,
                    GovernorKind::random}) {
    for (int i = 0; i < 200; ++i) {
      const auto obs = with_utilization(i % 12, (i % 10) / 10.0);
      const auto d = governor_decide(kind, i % 2 ? &obs : nullptr, p, kLops, rng);
      REQUIRE(d.apps.size() == kLops.size());
      for (const auto& a : d.apps) {
        CHECK_FALSE(a.cores.empty());
        for (auto c : a.cores) CHECK_FALSE(p.topology.is_reserved(c));
      }
    }
  }
}

TEST_CASE("deterministic governors ignore the random stream") {
  const platform::Platform p;
  Rng a(1), b(999);
  const auto obs = with_utilization(4, 0.85);
  for (auto kind : {GovernorKind::performance, GovernorKind::powersave, GovernorKind::ondemand}) {
    const auto da = governor_decide(kind, &obs, p, kLops, a);
    const auto db = governor_decide(kind, &obs, p, kLops, b);
    for (std::size_t i = 0; i < da.apps.size(); ++i) {
      CHECK(da.apps[i].cores == db.apps[i].cores);
      CHECK(da.apps[i].freq_level == db.apps[i].freq_level);
    }
  }
}

TEST_CASE("random governor covers the decomposed action space uniformly") {
  const platform::Platform p;
  Rng rng(5);
  std::array<int, 12> levels{};
  std::array<int, 6> counts{};
  const int n = 12000;
  for (int i = 0; i < n; ++i) {
    const auto d = governor_decide(GovernorKind::random, nullptr, p, kLops, rng);
    ++levels[static_cast<std::size_t>(d.max_level())];
    ++counts[d.core_union().size()];
  }
  for (int l : levels) CHECK(std::abs(l / static_cast<double>(n) - 1.0 / 12) < 0.01);
  CHECK(counts[0] == 0);
  for (std::size_t k = 1; k <= 5; ++k) CHECK(std::abs(counts[k] / static_cast<double>(n) - 0.2) < 0.015);
  Rng r1(9), r2(9);
  for (int i = 0; i < 20; ++i) {
    const auto a = governor_decide(GovernorKind::random, nullptr, p, kLops, r1);
    const auto b = governor_decide(GovernorKind::random, nullptr, p, kLops, r2);
    CHECK(a.core_union() == b.core_union());
    CHECK(a.max_level() == b.max_level());
  }
}

TEST_CASE("governor names round trip") {
  for (auto kind : {GovernorKind::performance, GovernorKind::powersave, GovernorKind::ondemand,
                    GovernorKind::random})
    CHECK(governor_from_string(to_string(kind)) == kind);
  CHECK_FALSE(governor_from_string("schedutil").has_value());
}

TEST_CASE("governor runner rows") {
  const platform::Platform p;
  sim::Environment env(fft_suite(), p, {}, {}, 1);
  GovernorRunner perf(GovernorKind::performance, std::move(env), 1);
  CHECK_FALSE(perf.has_policy());
  CHECK(perf.snapshot().empty());
  for (int e = 0; e < 5; ++e) {
    const auto row = perf.step(Phase::train, e, 5);
    CHECK(row.freq_level == 11);
    CHECK(row.core_count == 5);
    CHECK(row.cores == "1;2;3;4;5");
    CHECK(row.priorities == "80;80;80");
    CHECK(row.r_profiler == agents::reward_profiler(row.makespan, row.energy, perf.targets(), {}));
    CHECK(row.r_priority == agents::reward_priority(row.makespan, perf.targets()));
  }
}

TEST_CASE("random policy samples have one entry per epoch and per application") {
  const platform::Platform p;
  const auto s = random_policy_samples(fft_suite(), p, {}, {}, 40, 3);
  CHECK(s.level.size() == 40);
  CHECK(s.makespan.size() == 40);
  CHECK(s.app_priority.size() == 120);
  CHECK(s.app_cache_misses.size() == 120);
  for (double pr : s.app_priority) CHECK((pr == 70 || pr == 80 || pr == 90));
  StatsSamples all;
  append(all, s);
  append(all, s);
  CHECK(all.energy.size() == 80);
}
