#pragma once

#include "lsail/numkit.hpp"
#include "lsail/policy.hpp"

#include <Eigen/Dense>

#include <random>
#include <vector>

namespace lsail {

inline constexpr int kDefaultLatentDim = 7;

/// Unit-norm point on the skill hypersphere.
class SkillLatent {
 public:
  explicit SkillLatent(Eigen::VectorXd z);

  /// Normalizes an arbitrary vector; throws if the norm is below 1e-12.
  static SkillLatent normalized(const Eigen::VectorXd& raw);

  const Eigen::VectorXd& vec() const { return z_; }
  int dim() const { return static_cast<int>(z_.size()); }

 private:
  Eigen::VectorXd z_;
};

/// Draws z_bar ~ N(0, I) and normalizes. Degenerate draws are repeated.
SkillLatent sample_latent(std::mt19937_64& rng, int dim = kDefaultLatentDim);

/// Hypersphere projection for raw high-level outputs. A near-zero input
/// keeps the previously held latent and warns on stderr.
SkillLatent project_latent(const Eigen::VectorXd& raw, const SkillLatent& held);

/// Cosine distance 0.5 * (1 - z1.z2); 0 for equal, 1 for antipodal units.
double cosine_distance(const Eigen::VectorXd& z1, const Eigen::VectorXd& z2);

/// von Mises-Fisher transition encoder. The network output is normalized
/// to unit length inside the head, so mean_directions() columns always
/// have norm 1.
struct SkillEncoder {
  FeedForwardNet mu_net;  // transition features (2F) -> latent dim
  double kappa = 5.0;

  static SkillEncoder init(int transition_dim, const std::vector<int>& hidden, int latent_dim,
                           double kappa, std::mt19937_64& rng);

  int latent_dim() const { return mu_net.output_dim(); }
  Eigen::MatrixXd mean_directions(const Eigen::MatrixXd& transitions) const;
};

/// vMF log-density up to its constant: kappa * mu_q(transition)^T z.
double skill_reward(const SkillEncoder& encoder, const Eigen::VectorXd& transition,
                    const SkillLatent& z);

/// Column-wise rewards for paired (transition, latent) batches.
Eigen::VectorXd skill_reward_batch(const SkillEncoder& encoder,
                                   const Eigen::MatrixXd& transitions,
                                   const Eigen::MatrixXd& latents);

struct EncoderLossResult {
  double loss = 0.0;
  Eigen::VectorXd grad;  // flat mu_net gradient
};

/// -mean(kappa * mu_q^T z) over the batch, with exact gradients through
/// the unit-norm head.
EncoderLossResult encoder_loss(SkillEncoder& encoder, const Eigen::MatrixXd& transitions,
                               const Eigen::MatrixXd& latents);

struct DiversityLossResult {
  double loss = 0.0;
  Eigen::VectorXd policy_grad;  // flat: [mean_net params; log_std]
  int pairs_kept = 0;
  bool all_skipped = false;
};

/// mean(((KL(pi(.|s,z1) || pi(.|s,z2)) / D_z(z1,z2)) - 1)^2) over kept
/// pairs. Pairs with D_z < 1e-3 are skipped; if all are skipped the loss
/// is 0 with a warning.
DiversityLossResult diversity_loss(GaussianPolicy& policy, const Eigen::MatrixXd& observations,
                                   const Eigen::MatrixXd& z1, const Eigen::MatrixXd& z2);

}  // namespace lsail
