#pragma once

#include "lsail/diffdisc.hpp"
#include "lsail/numkit.hpp"
#include "lsail/policy.hpp"
#include "lsail/skills.hpp"
#include "lsail/trainer.hpp"

#include <json.hpp>

#include <string>

namespace lsail {

/// Plain-text checkpoint: one component per file, flattened parameters
/// with layer shape metadata, full round-trip precision.
struct Checkpoint {
  int version = 1;
  std::string component;  // policy | value | gan | diffusion | encoder | high-level
  int epoch = 0;
  std::string config_hash;
  nlohmann::json hyperparameters = nlohmann::json::object();
  FeedForwardNet net;
  nlohmann::json extra = nlohmann::json::object();
};

nlohmann::json net_to_json(const FeedForwardNet& net);
FeedForwardNet net_from_json(const nlohmann::json& j);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Component wrappers. Loaders validate the component tag and dimensions.
Checkpoint make_policy_checkpoint(const GaussianPolicy& policy, const std::string& component,
                                  int epoch, const std::string& config_hash);
GaussianPolicy policy_from_checkpoint(const Checkpoint& ckpt, const std::string& component);

Checkpoint make_value_checkpoint(const FeedForwardNet& net, int epoch,
                                 const std::string& config_hash);
Checkpoint make_gan_checkpoint(const GanDiscriminator& d, int epoch,
                               const std::string& config_hash);
GanDiscriminator gan_from_checkpoint(const Checkpoint& ckpt);
Checkpoint make_diffusion_checkpoint(const DiffusionDiscriminator& d, int epoch,
                                     const std::string& config_hash);
DiffusionDiscriminator diffusion_from_checkpoint(const Checkpoint& ckpt);
Checkpoint make_encoder_checkpoint(const SkillEncoder& enc, int epoch,
                                   const std::string& config_hash);
SkillEncoder encoder_from_checkpoint(const Checkpoint& ckpt);

}  // namespace lsail
