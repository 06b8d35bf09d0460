#pragma once

// Pipeline configuration: INI-style key=value file with [section] headers,
// SI and degrees on the boundary.

#include "pontryagus/datagen.hpp"
#include "pontryagus/mission.hpp"
#include "pontryagus/network.hpp"
#include "pontryagus/nominal.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pontryagus {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string output_dir = "run";
  std::uint64_t seed = 42;  // one seed for the multistart, the walks and training
  int threads = 0;
  MissionSpec mission;
  int max_restarts = 500;
  double costate_box = 1.0;
  WalkConfig walk;
  HomotopyConfig homotopy;
  TrainConfig training;
  int checkpoint_every = 10;  // epochs; 0 disables checkpoints
  int eval_transfers = 4;
  double rollout_update_fraction = 1e-3;  // hold length as a fraction of the nominal time of flight

  /// Throws ConfigError naming the offending key.
  void validate() const;
  NominalConfig nominal_config() const;
};

/// Reads `path`; unknown sections or keys are errors. A non-null `seed_override`
/// (the PONTRYAGUS_SEED environment variable) replaces [run] seed.
RunConfig load_run_config(const std::string& path, const char* seed_override = nullptr);

/// Fills the unit fields of dataset metadata from the mission.
void stamp_units(DatasetInfo& info, const MissionSpec& mission);

}  // namespace pontryagus
