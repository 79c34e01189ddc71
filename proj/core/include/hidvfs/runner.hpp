#pragma once

// Common driver interface for learned and heuristic schedulers.

#include <nlohmann/json.hpp>

#include "hidvfs/analysis.hpp"
#include "hidvfs/simengine.hpp"

namespace hidvfs {

enum class Phase { train, finetune };

const char* to_string(Phase p);

class Runner {
 public:
  virtual ~Runner() = default;

  // Decide, execute and learn from one epoch. `epoch` counts within the phase and
  // `phase_epochs` is the phase length used by exploration schedules.
  virtual analysis::EpochMetrics step(Phase phase, int epoch, int phase_epochs) = 0;
  virtual bool has_policy() const = 0;
  // Versioned JSON document; empty object for policies without learned state.
  virtual nlohmann::json snapshot() const = 0;
  virtual const sim::Environment& environment() const = 0;
};

// Fills the observation-derived fields of a metrics row.
analysis::EpochMetrics metrics_from(const sim::Observation& obs,
                                    std::span<const platform::CoreId> available, Phase phase,
                                    int epoch);

}  // namespace hidvfs
