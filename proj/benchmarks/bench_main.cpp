#include <benchmark/benchmark.h>

#include "hidvfs/agents.hpp"
#include "hidvfs/analysis.hpp"
#include "hidvfs/harness.hpp"

using namespace hidvfs;

namespace {

std::vector<workload::DagTask> suite(int scale) {
  const std::vector<std::string> names{"fft", "sort", "fib"};
  return workload::generate_suite(names, scale, 42);
}

void BM_EnvironmentEpoch(benchmark::State& state) {
  const platform::Platform p;
  const auto tasks = suite(static_cast<int>(state.range(0)));
  sim::Environment env(tasks, p, {}, {}, 1);
  const auto avail = p.topology.available();
  sim::ScheduleDecision d;
  for (std::size_t i = 0; i < tasks.size(); ++i) d.apps.push_back(sim::AppDecision{avail, 11, 80});
  for (auto _ : state) benchmark::DoNotOptimize(env.step(d).obs.makespan);
}
BENCHMARK(BM_EnvironmentEpoch)->Arg(1)->Arg(4);

void BM_QNetworkForward(benchmark::State& state) {
  Rng rng(1);
  const rl::QNetwork q(3, 60, {64, 64}, true, rng);
  const std::vector<double> s{0.4, 0.9, 0.8};
  for (auto _ : state) benchmark::DoNotOptimize(q.q(s));
}
BENCHMARK(BM_QNetworkForward);

void BM_DqnTrainStep(benchmark::State& state) {
  rl::TrainConfig cfg;
  rl::DqnAgent agent(3, 60, cfg, 1);
  rl::ReplayBuffer buf(2000);
  Rng rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i)
    buf.push(rl::Transition{{u(rng), u(rng), u(rng)}, i % 60, {}, u(rng), {u(rng), u(rng), u(rng)}, false,
                            rl::Source::real});
  for (auto _ : state) benchmark::DoNotOptimize(agent.train(buf, nullptr));
}
BENCHMARK(BM_DqnTrainStep);

void BM_HierarchyEpoch(benchmark::State& state) {
  harness::ExperimentConfig cfg;
  auto runner = harness::make_runner(cfg, 42);
  int e = 0;
  for (auto _ : state) benchmark::DoNotOptimize(runner->step(Phase::train, e++ % 100, 100));
}
BENCHMARK(BM_HierarchyEpoch);

void BM_MannWhitney(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> a(n), b(n);
  for (auto& x : a) x = z(rng);
  for (auto& x : b) x = z(rng);
  for (auto _ : state) benchmark::DoNotOptimize(analysis::mann_whitney_u(a, b).p);
}
BENCHMARK(BM_MannWhitney)->Arg(6)->Arg(900);

}  // namespace
BENCHMARK_MAIN();
