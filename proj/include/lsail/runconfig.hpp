#pragma once

#include "lsail/trainer.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>

namespace lsail {

/// Everything a training or evaluation run needs, with desk-scale
/// defaults. A config file overrides fields selectively; the canonical
/// snapshot (all fields, sorted keys) is hashed into checkpoints.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string dataset_path;
  std::string out_dir;
  int threads = 1;

  EnvConfig env;
  DiscriminatorKind discriminator = DiscriminatorKind::kGan;
  bool cat_enabled = false;
  std::vector<ConstraintDef> constraints{ConstraintDef{}};

  LowLevelConfig low;
  HighLevelConfig high;
  int checkpoint_every = 50;
  int eval_episodes = 256;

  /// Pushes the shared fields (seed, env, cat, constraints, kind) into
  /// the per-stage configs.
  void sync();

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::string& path);
  void save(const std::string& path) const;

  /// FNV-1a hash of the canonical serialized form, as 16 hex digits.
  std::string hash() const;
};

}  // namespace lsail
