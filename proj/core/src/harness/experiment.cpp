#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <thread>

#include "hidvfs/errors.hpp"
#include "hidvfs/harness.hpp"

namespace hidvfs::harness {

namespace fs = std::filesystem;
using nlohmann::json;

bool ExperimentResult::ok() const {
  return std::none_of(seeds.begin(), seeds.end(), [](const SeedResult& s) { return s.error.has_value(); });
}

std::unique_ptr<Runner> make_runner(const ExperimentConfig& cfg, std::uint64_t seed) {
  auto suite = workload::generate_suite(cfg.benchmarks, cfg.scale, seed);
  sim::EngineParams eparams = cfg.engine;
  eparams.record_trace = cfg.write_trace;
  sim::Environment env(std::move(suite), cfg.platform, cfg.workload, eparams, derive_seed(seed, 1));
  switch (cfg.algorithm) {
    case Algorithm::hidvfs:
    case Algorithm::hidvfs_s:
      return std::make_unique<agents::HierarchicalRunner>(agents::HierarchicalRunner::Kind::hidvfs,
                                                          cfg.agent, std::move(env), seed);
    case Algorithm::sarb:
      return std::make_unique<agents::HierarchicalRunner>(agents::HierarchicalRunner::Kind::sarb,
                                                          cfg.agent, std::move(env), seed);
    case Algorithm::performance:
    case Algorithm::powersave:
    case Algorithm::ondemand:
    case Algorithm::random: {
      const auto kind = baselines::governor_from_string(to_string(cfg.algorithm));
      return std::make_unique<baselines::GovernorRunner>(*kind, std::move(env), seed, cfg.agent.reward,
                                                         cfg.agent.t_target, cfg.ondemand);
    }
  }
  throw ConfigError("algorithm: unsupported");
}

namespace {

void write_json(const fs::path& file, const json& j) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << j.dump(2) << '\n';
}

void write_seed_artifacts(const ExperimentConfig& cfg, const SeedResult& r,
                          const std::optional<sim::EpochResult>& last_epoch,
                          const std::vector<workload::DagTask>& suite, const std::string& fail_phase,
                          int fail_epoch) {
  fs::create_directories(r.dir);
  {
    std::ofstream csv(r.dir / "epochs.csv");
    if (!csv) throw std::runtime_error("cannot write " + (r.dir / "epochs.csv").string());
    write_epochs_csv(csv, r.rows);
  }
  json phases = json::object();
  for (const auto& [name, s] : r.summaries) phases[name] = to_json(s);
  json policies = json::object();
  for (const auto& [name, snap] : r.snapshots) {
    const std::string file = "policy_" + name + ".json";
    write_json(r.dir / file, snap);
    policies[name] = file;
  }
  write_json(r.dir / "summary.json",
             json{{"schema", kSummarySchema},
                  {"algorithm", to_string(cfg.algorithm)},
                  {"seed", r.seed},
                  {"phases", phases},
                  {"policy", policies.empty() ? json(nullptr) : policies}});
  if (cfg.write_trace && last_epoch) {
    std::ofstream tr(r.dir / "trace.jsonl");
    sim::write_trace_jsonl(tr, suite, last_epoch->obs.decision, last_epoch->trace, last_epoch->origin);
  }
  if (r.error) {
    write_json(r.dir / "error.json", json{{"schema", kErrorSchema},
                                          {"seed", r.seed},
                                          {"phase", fail_phase},
                                          {"epoch", fail_epoch},
                                          {"message", *r.error}});
  }
}

}  // namespace

SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                    const std::optional<fs::path>& dir) {
  SeedResult res;
  res.seed = seed;
  if (dir) res.dir = *dir;
  std::unique_ptr<Runner> runner;
  std::string phase_name;
  int epoch = -1;
  try {
    runner = make_runner(cfg, seed);
    for (Phase phase : cfg.phases) {
      phase_name = to_string(phase);
      for (epoch = 0; epoch < cfg.epochs; ++epoch) res.rows.push_back(runner->step(phase, epoch, cfg.epochs));
      const auto rows = rows_of(res.rows, phase_name);
      res.summaries[phase_name] = analysis::summarize(rows);
      if (runner->has_policy()) res.snapshots[phase_name] = runner->snapshot();
    }
  } catch (const std::exception& e) {
    res.error = phase_name.empty() ? std::string(e.what())
                                   : phase_name + " epoch " + std::to_string(epoch) + ": " + e.what();
  }
  if (dir) {
    std::optional<sim::EpochResult> last;
    std::vector<workload::DagTask> suite;
    if (runner) {
      last = runner->environment().last();
      suite = runner->environment().suite();
    }
    write_seed_artifacts(cfg, res, last, suite, phase_name, epoch);
  }
  return res;
}

json aggregate(const std::vector<SeedResult>& seeds) {
  json completed = json::array(), failed = json::array();
  std::map<std::string, std::vector<const analysis::Summary*>> by_phase;
  for (const auto& s : seeds) {
    if (s.error) {
      failed.push_back(s.seed);
      continue;
    }
    completed.push_back(s.seed);
    for (const auto& [name, sum] : s.summaries) by_phase[name].push_back(&sum);
  }
  auto stat = [](const std::vector<double>& v) {
    if (v.size() == 1) return json{{"mean", v.front()}, {"std", 0.0}};
    const auto ms = analysis::aggregate_seeds(v);
    return json{{"mean", ms.mean}, {"std", ms.std}};
  };
  json phases = json::object();
  for (const auto& [name, sums] : by_phase) {
    auto col = [&](auto field) {
      std::vector<double> v;
      for (const auto* s : sums) v.push_back(static_cast<double>(field(*s)));
      return stat(v);
    };
    phases[name] = json{
        {"l10", col([](const analysis::Summary& s) { return s.l10; })},
        {"l20", col([](const analysis::Summary& s) { return s.l20; })},
        {"hf_percent", col([](const analysis::Summary& s) { return s.hf_percent; })},
        {"cores5_percent", col([](const analysis::Summary& s) { return s.cores5_percent; })},
        {"convergence_epoch", col([](const analysis::Summary& s) { return s.convergence; })},
        {"total_energy", col([](const analysis::Summary& s) { return s.total_energy; })},
        {"total_makespan", col([](const analysis::Summary& s) { return s.total_makespan; })}};
  }
  return json{{"schema", kAggregateSchema}, {"seeds", completed}, {"failed", failed}, {"phases", phases}};
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  fs::create_directories(out_dir);
  write_json(out_dir / "config.json", to_json(cfg));

  ExperimentResult result;
  result.dir = out_dir;
  result.seeds.resize(cfg.seeds.size());
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers =
      std::min<std::size_t>(cfg.seeds.size(), cfg.threads > 0 ? static_cast<std::size_t>(cfg.threads) : hw);

  // Seeds are independent; each worker writes only into its own slot and directory.
  std::atomic<std::size_t> next{0};
  std::mutex io_error_mu;
  std::exception_ptr io_error;
  auto work = [&] {
    for (std::size_t i = next++; i < cfg.seeds.size(); i = next++) {
      const auto seed = cfg.seeds[i];
      try {
        result.seeds[i] = run_seed(cfg, seed, out_dir / ("seed_" + std::to_string(seed)));
      } catch (...) {
        std::lock_guard<std::mutex> lock(io_error_mu);
        if (!io_error) io_error = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (io_error) std::rethrow_exception(io_error);

  result.aggregate = aggregate(result.seeds);
  result.aggregate["algorithm"] = to_string(cfg.algorithm);
  write_json(out_dir / "aggregate.json", result.aggregate);
  return result;
}

}  // namespace hidvfs::harness
