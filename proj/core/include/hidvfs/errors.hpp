#pragma once

#include <stdexcept>
#include <string>

namespace hidvfs {

// Invalid experiment/platform/workload configuration. The message names the field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A schedule decision the engine cannot execute.
class SchedulingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite loss or parameters during learning.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hidvfs
