// hidvfs: run experiments, emit plot tables, validate configs and check schedule traces.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 runtime failure,
// 4 trace with violations.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "hidvfs/errors.hpp"
#include "hidvfs/harness.hpp"

namespace {

namespace fs = std::filesystem;
using namespace hidvfs;

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;
constexpr int kTraceViolations = 4;

struct RunOptions {
  std::string config;
  std::string algorithm;
  int epochs = 0;
  std::vector<std::uint64_t> seeds;
  std::string output_dir;
  bool trace = false;
  int threads = -1;
};

harness::ExperimentConfig load(const RunOptions& o) {
  harness::ExperimentConfig cfg = o.config.empty() ? harness::ExperimentConfig{} : harness::load_config(o.config);
  if (!o.algorithm.empty()) {
    const auto a = harness::algorithm_from_string(o.algorithm);
    if (!a) throw ConfigError("algorithm: unknown algorithm '" + o.algorithm + "'");
    if (*a == harness::Algorithm::hidvfs_s) {
      cfg.agent.train.dueling = false;
      cfg.agent.train.double_q = false;
    }
    cfg.algorithm = *a;
  }
  if (o.epochs > 0) cfg.epochs = o.epochs;
  if (!o.seeds.empty()) cfg.seeds = o.seeds;
  if (o.trace) cfg.write_trace = true;
  if (o.threads >= 0) cfg.threads = o.threads;
  cfg.validate();
  return cfg;
}

void print_summary(const harness::ExperimentResult& r) {
  for (const auto& s : r.seeds) {
    if (s.error) {
      std::printf("seed %llu  FAILED: %s\n", static_cast<unsigned long long>(s.seed), s.error->c_str());
      continue;
    }
    for (const auto& [phase, sum] : s.summaries)
      std::printf("seed %-6llu %-9s L10 %7.3f s  L20 %7.3f s  HF %5.1f%%  conv %3d  E %9.1f J\n",
                  static_cast<unsigned long long>(s.seed), phase.c_str(), sum.l10, sum.l20,
                  sum.hf_percent, sum.convergence, sum.total_energy);
  }
  std::printf("artifacts in %s\n", r.dir.string().c_str());
}

int cmd_run(const RunOptions& o) {
  const auto cfg = load(o);
  fs::path out = harness::resolve_output_dir(cfg);
  if (!o.output_dir.empty()) out = o.output_dir;
  const auto result = harness::run_experiment(cfg, out);
  print_summary(result);
  return result.ok() ? kOk : kRuntimeError;
}

int cmd_validate(const std::string& file) {
  const auto cfg = harness::load_config(file);
  std::cout << harness::to_json(cfg).dump(2) << '\n';
  return kOk;
}

int cmd_plotdata(const std::string& run_dir, const std::string& kind, std::string out) {
  std::vector<harness::PlotKind> kinds;
  if (kind == "all") {
    kinds = {harness::PlotKind::makespan, harness::PlotKind::energy, harness::PlotKind::freq,
             harness::PlotKind::cores};
  } else {
    const auto k = harness::plot_kind_from_string(kind);
    if (!k) throw ConfigError("kind: expected makespan, energy, freq, cores or all");
    kinds.push_back(*k);
  }
  if (out.empty()) out = (fs::path(run_dir) / "plots").string();
  for (auto k : kinds) harness::emit_plotdata(run_dir, k, out);
  std::printf("plot tables in %s\n", out.c_str());
  return kOk;
}

int cmd_replay(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open trace " + file);
  const auto t = sim::read_trace_jsonl(in);
  const auto check = sim::check_trace(t.suite, t.decision, t.trace, t.origin);
  double end = t.origin;
  for (const auto& j : t.trace) end = std::max(end, j.end);
  std::printf("%zu jobs, %zu tasks, makespan %.6f s, policy '%s'\n", t.trace.size(), t.suite.size(),
              end - t.origin, t.decision.policy.c_str());
  for (const auto& v : check.violations) std::printf("violation: %s\n", v.c_str());
  std::printf("%s\n", check.ok() ? "trace OK" : "trace has violations");
  return check.ok() ? kOk : kTraceViolations;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical DVFS scheduling simulator and experiment harness"};
  app.require_subcommand(1);

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment over all configured seeds");
  run_cmd->add_option("-c,--config", run.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  run_cmd->add_option("-a,--algorithm", run.algorithm,
                      "hidvfs, hidvfs_s, sarb, performance, powersave, ondemand or random");
  run_cmd->add_option("-e,--epochs", run.epochs, "Epochs per phase");
  run_cmd->add_option("-s,--seeds", run.seeds, "Seeds")->delimiter(',');
  run_cmd->add_option("-o,--output-dir", run.output_dir, "Output directory (overrides config and env)");
  run_cmd->add_flag("--trace", run.trace, "Write the last epoch's schedule trace per seed");
  run_cmd->add_option("-j,--threads", run.threads, "Seed worker threads (0: automatic)");

  std::string validate_file;
  auto* val_cmd = app.add_subcommand("validate-config", "Parse a config and print it fully resolved");
  val_cmd->add_option("config", validate_file, "Config file")->required();

  std::string plot_dir, plot_kind = "all", plot_out;
  auto* plot_cmd = app.add_subcommand("plotdata", "Long and band tables from a finished run");
  plot_cmd->add_option("run_dir", plot_dir, "Experiment output directory")->required();
  plot_cmd->add_option("-k,--kind", plot_kind, "makespan, energy, freq, cores or all");
  plot_cmd->add_option("-o,--out", plot_out, "Destination (default <run_dir>/plots)");

  std::string trace_file;
  auto* replay_cmd = app.add_subcommand("replay-trace", "Check a schedule trace against the scheduling rules");
  replay_cmd->add_option("trace", trace_file, "trace.jsonl")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*val_cmd) return cmd_validate(validate_file);
    if (*plot_cmd) return cmd_plotdata(plot_dir, plot_kind, plot_out);
    if (*replay_cmd) return cmd_replay(trace_file);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntimeError;
  }
  return kOk;
}
