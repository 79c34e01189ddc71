#pragma once

// Experiment configuration, multi-seed orchestration and artifact files.
//
// Layout of an experiment directory:
//   config.json             resolved configuration (schema hidvfs.config.v1)
//   aggregate.json          mean/std over seeds per phase (hidvfs.aggregate.v1)
//   seed_<s>/epochs.csv     one row per epoch (hidvfs.epochs.v1)
//   seed_<s>/summary.json   per-phase summaries (hidvfs.summary.v1)
//   seed_<s>/policy_<phase>.json   learned policies only
//   seed_<s>/trace.jsonl    last epoch's schedule when traces are enabled
//   seed_<s>/error.json     only when the run failed (hidvfs.error.v1)

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hidvfs/agents.hpp"
#include "hidvfs/analysis.hpp"
#include "hidvfs/baselines.hpp"
#include "hidvfs/platform.hpp"
#include "hidvfs/runner.hpp"
#include "hidvfs/simengine.hpp"
#include "hidvfs/workload.hpp"

namespace hidvfs::harness {

inline constexpr const char* kConfigSchema = "hidvfs.config.v1";
inline constexpr const char* kEpochsSchema = "hidvfs.epochs.v1";
inline constexpr const char* kSummarySchema = "hidvfs.summary.v1";
inline constexpr const char* kAggregateSchema = "hidvfs.aggregate.v1";
inline constexpr const char* kErrorSchema = "hidvfs.error.v1";
inline constexpr const char* kPlotSchema = "hidvfs.plot.v1";
// Environment variable that replaces the configured output directory.
inline constexpr const char* kOutputDirEnv = "HIDVFS_OUTPUT_DIR";

// hidvfs_s is the hierarchy with dueling and double Q-learning switched off.
enum class Algorithm { hidvfs, hidvfs_s, sarb, performance, powersave, ondemand, random };

const char* to_string(Algorithm a);
std::optional<Algorithm> algorithm_from_string(const std::string& s);
bool is_learned(Algorithm a);

struct ExperimentConfig {
  Algorithm algorithm = Algorithm::hidvfs;
  std::vector<std::string> benchmarks{"fft"};
  int scale = 1;
  int epochs = 100;  // per phase
  std::vector<Phase> phases{Phase::train, Phase::finetune};
  std::vector<std::uint64_t> seeds{42, 123, 456};
  platform::Platform platform = platform::Platform::tx2_default();
  workload::WorkloadModelParams workload;
  sim::EngineParams engine;
  agents::AgentConfig agent;
  baselines::OndemandParams ondemand;
  std::string output_dir = "runs";
  bool write_trace = false;
  int threads = 0;  // 0: one per seed, capped by the hardware

  // hidvfs::ConfigError naming the offending field.
  void validate() const;
};

// Keys absent from j keep their defaults; unknown keys are errors. The result is validated.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& cfg);
// ConfigError when the file cannot be read or parsed.
ExperimentConfig load_config(const std::filesystem::path& file);
// HIDVFS_OUTPUT_DIR when set and non-empty, otherwise cfg.output_dir.
std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg);

// Fixed column order; doubles are written in shortest round-trip form.
const std::vector<std::string>& epochs_csv_columns();
void write_epochs_csv(std::ostream& os, const std::vector<analysis::EpochMetrics>& rows);
// ConfigError on a schema, header or field mismatch.
std::vector<analysis::EpochMetrics> read_epochs_csv(std::istream& is);

nlohmann::json to_json(const analysis::Summary& s);
analysis::Summary summary_from_json(const nlohmann::json& j);

// Rows of one phase, in file order.
std::vector<analysis::EpochMetrics> rows_of(const std::vector<analysis::EpochMetrics>& rows,
                                            const std::string& phase);

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<analysis::EpochMetrics> rows;
  std::map<std::string, analysis::Summary> summaries;  // by phase name
  std::map<std::string, nlohmann::json> snapshots;      // by phase name, learned only
  std::optional<std::string> error;
  std::filesystem::path dir;
};

struct ExperimentResult {
  std::vector<SeedResult> seeds;  // config order
  nlohmann::json aggregate;
  std::filesystem::path dir;
  bool ok() const;
};

// Builds the scheduler for one seed. The suite, the environment and the agents all derive
// their randomness from `seed`.
std::unique_ptr<Runner> make_runner(const ExperimentConfig& cfg, std::uint64_t seed);

// Runs every phase for one seed in memory. When `dir` is given the artifacts are written
// there, including error.json and the partial CSV if a phase throws.
SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                    const std::optional<std::filesystem::path>& dir);

// All seeds (in parallel up to cfg.threads), then aggregate.json.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

// Per phase and summary field: mean and sample std over the seeds that completed.
nlohmann::json aggregate(const std::vector<SeedResult>& seeds);

enum class PlotKind { makespan, energy, freq, cores };

const char* to_string(PlotKind k);
std::optional<PlotKind> plot_kind_from_string(const std::string& s);

struct LongRow {
  std::uint64_t seed = 0;
  std::string phase;
  int epoch = 0;
  double value = 0.0;
};

struct BandRow {
  std::string phase;
  int epoch = 0;
  double mean = 0.0;
  double half_width = 0.0;  // sample std across seeds, 0 for a single seed
  int n = 0;
};

std::vector<LongRow> long_rows(const std::map<std::uint64_t, std::vector<analysis::EpochMetrics>>& runs,
                               PlotKind kind);
std::vector<BandRow> band_rows(const std::vector<LongRow>& rows);

// Reads seed_*/epochs.csv under run_dir and writes <kind>_long.csv and <kind>_band.csv to
// out_dir. std::runtime_error when no seed directory has an epochs.csv.
void emit_plotdata(const std::filesystem::path& run_dir, PlotKind kind,
                   const std::filesystem::path& out_dir);

}  // namespace hidvfs::harness
