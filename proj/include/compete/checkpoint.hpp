#ifndef COMPETE_CHECKPOINT_HPP_
#define COMPETE_CHECKPOINT_HPP_

#include <string>

#include "compete/env.hpp"
#include "compete/nn.hpp"

namespace compete {

// Evaluation-time context stored next to the parameters so a checkpoint can
// be run standalone (auto-padding needs the training-time layout).
struct CheckpointMeta {
  EnvKind env_kind = EnvKind::PointRacer;
  AuxKind aux_obs = AuxKind::none;
  int n_train = 1;
  std::string mode;
};

void save_checkpoint(const std::string& path, const ParamSet& params,
                     const CheckpointMeta& meta);

struct LoadedCheckpoint {
  ParamSet params;
  CheckpointMeta meta;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace compete

#endif  // COMPETE_CHECKPOINT_HPP_
