#pragma once

// Priority-preemptive discrete-event execution of DAG tasks on the platform model.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hidvfs/platform.hpp"
#include "hidvfs/rng.hpp"
#include "hidvfs/workload.hpp"

namespace hidvfs::sim {

using platform::CoreId;

struct AppDecision {
  std::vector<CoreId> cores;  // allowed cores; serial tasks use only the first
  int freq_level = 0;
  int priority = 80;  // 1..99, higher preempts lower
};

struct ScheduleDecision {
  std::vector<AppDecision> apps;  // one per suite entry, same order
  std::string policy;

  // Union of all app core sets, ascending.
  std::vector<CoreId> core_union() const;
  int max_level() const;
};

// One contiguous execution segment of a subtask on a core (the job J_{k,i,j}).
struct JobRecord {
  CoreId core = 0;
  int dag = 0;
  int subtask = 0;
  double start = 0.0;
  double end = 0.0;
};

struct AppObservation {
  double makespan = 0.0;  // completion time from epoch start, includes the decision overhead
  int priority = 0;
  int cores = 0;  // cores the task could actually use
  int freq_level = 0;
  std::int64_t branch_misses = 0;
  std::int64_t cache_misses = 0;
};

struct Observation {
  double makespan = 0.0;  // s, whole epoch
  double energy = 0.0;    // J
  std::vector<double> temp_end;     // degC per core at epoch end
  std::vector<double> temp_avg;     // degC per core, time average over the epoch
  std::vector<double> utilization;  // busy fraction per core
  std::int64_t branch_misses = 0;
  std::int64_t cache_misses = 0;
  std::vector<AppObservation> apps;
  ScheduleDecision decision;  // actions echoed back
  int core_count = 0;
  int freq_level = 0;

  // Mean utilization over the given cores.
  double mean_utilization(std::span<const CoreId> cores) const;
  double mean_temp_end(std::span<const CoreId> cores) const;
};

struct EngineParams {
  double max_substep = 0.05;         // s, thermal/energy integration step bound
  double decision_overhead = 0.002;  // s, once per epoch
  bool record_trace = false;
};

struct PlatformState {
  platform::ThermalState thermal;
  std::vector<int> core_levels;  // level each core was last set to, -1 if never

  static PlatformState initial(const platform::Platform& p);
  static PlatformState initial(const platform::Platform& p, double start_temp);
};

struct EpochResult {
  Observation obs;
  PlatformState state;
  std::vector<JobRecord> trace;  // empty unless EngineParams::record_trace
  double origin = 0.0;           // time at which root subtasks become ready
};

// Throws hidvfs::SchedulingError for a decision that does not fit the suite/topology,
// including an empty core set for a non-empty task.
EpochResult run_epoch(std::span<const workload::DagTask> suite, const ScheduleDecision& decision,
                      const platform::Platform& platform, const PlatformState& state,
                      const workload::WorkloadModelParams& wparams, const EngineParams& eparams,
                      Rng& rng);

// round(m_one / m_all) clamped to [1, m_avail]; std::domain_error on nonpositive makespans.
int level_of_parallelism(double m_one, double m_all, int m_avail);

struct AppRequest {
  int priority = 80;
  int lop = 1;
};

struct Shortage {
  int app = 0;
  int requested = 0;
  int granted = 0;
};

struct Allocation {
  std::vector<int> cores;  // granted per app, input order
  std::vector<Shortage> shortages;
  std::vector<int> order;  // app indices in allocation order
};

// Descending priority, FCFS among equal priorities; each app takes min(lop, remaining).
Allocation allocate_cores(std::span<const AppRequest> apps, int available);

// Splits `subset` (ascending ids) into per-app slices following allocate_cores. An app granted
// fewer cores than its lop shares the whole subset and runs where higher-priority work leaves
// cores free.
ScheduleDecision build_decision(std::span<const CoreId> subset, int level,
                                std::span<const int> priorities, std::span<const int> lops,
                                std::string policy = {});

// Level of parallelism per suite entry from two jitter-free probes at the top level:
// the task alone on one core vs alone on every available core.
std::vector<int> compute_lops(std::span<const workload::DagTask> suite,
                              const platform::Platform& platform,
                              const workload::WorkloadModelParams& wparams);

// Stateful wrapper: owns the suite, the machine state carried across epochs and the
// environment random stream.
class Environment {
 public:
  Environment(std::vector<workload::DagTask> suite, platform::Platform platform,
              workload::WorkloadModelParams wparams, EngineParams eparams, std::uint64_t seed,
              std::optional<double> start_temp = std::nullopt);

  const EpochResult& step(const ScheduleDecision& decision);

  ScheduleDecision decide(std::span<const CoreId> subset, int level,
                          std::span<const int> priorities, std::string policy = {}) const;

  const std::vector<workload::DagTask>& suite() const { return suite_; }
  const platform::Platform& platform() const { return platform_; }
  const workload::WorkloadModelParams& workload_params() const { return wparams_; }
  const EngineParams& engine_params() const { return eparams_; }
  const PlatformState& state() const { return state_; }
  const std::vector<int>& lops() const { return lops_; }
  const std::optional<EpochResult>& last() const { return last_; }
  EngineParams& engine_params_mut() { return eparams_; }
  void set_state(PlatformState s) { state_ = std::move(s); }

 private:
  std::vector<workload::DagTask> suite_;
  platform::Platform platform_;
  workload::WorkloadModelParams wparams_;
  EngineParams eparams_;
  PlatformState state_;
  std::vector<int> lops_;
  Rng rng_;
  std::optional<EpochResult> last_;
};

// ---- schedule traces -------------------------------------------------------------------

struct TraceCheck {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

TraceCheck check_dependencies(std::span<const workload::DagTask> suite,
                              std::span<const JobRecord> trace, double origin);
TraceCheck check_tied_binding(std::span<const workload::DagTask> suite,
                              std::span<const JobRecord> trace);
// No lower-priority job runs on a core a waiting higher-priority subtask could use.
TraceCheck check_priority(std::span<const workload::DagTask> suite,
                          const ScheduleDecision& decision, std::span<const JobRecord> trace,
                          double origin);
// No core allowed to an application idles while that application has runnable work.
TraceCheck check_work_conservation(std::span<const workload::DagTask> suite,
                                   const ScheduleDecision& decision,
                                   std::span<const JobRecord> trace, double origin);
TraceCheck check_trace(std::span<const workload::DagTask> suite, const ScheduleDecision& decision,
                       std::span<const JobRecord> trace, double origin);

struct TraceFile {
  std::vector<workload::DagTask> suite;
  ScheduleDecision decision;
  std::vector<JobRecord> trace;
  double origin = 0.0;
};

// JSON lines, first line carries the schema string "hidvfs.trace.v1".
void write_trace_jsonl(std::ostream& os, std::span<const workload::DagTask> suite,
                       const ScheduleDecision& decision, std::span<const JobRecord> trace,
                       double origin);
TraceFile read_trace_jsonl(std::istream& is);

}  // namespace hidvfs::sim
