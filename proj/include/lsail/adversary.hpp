#pragma once

#include "lsail/numkit.hpp"

#include <Eigen/Dense>

#include <random>
#include <vector>

namespace lsail {

/// Classifier scores are clamped into [kScoreClamp, 1 - kScoreClamp]
/// before any logarithm so losses and rewards stay finite.
inline constexpr double kScoreClamp = 1e-7;

double clamp_score(double d);

/// Imitation reward from a classifier score: -log(1 - clamp(d)).
/// Nonnegative, finite, strictly increasing in d.
double reward_from_score(double d);

/// Binary classifier over feature transitions, sigmoid at the readout.
struct GanDiscriminator {
  FeedForwardNet net;  // transition features (2F) -> 1 logit
  double weight_decay = 1e-4;

  static GanDiscriminator init(int transition_dim, const std::vector<int>& hidden,
                               double weight_decay, std::mt19937_64& rng);
};

double discriminate(const GanDiscriminator& d, const Eigen::VectorXd& transition);
Eigen::VectorXd discriminate_batch(const GanDiscriminator& d, const Eigen::MatrixXd& transitions);

struct GanLossResult {
  double loss = 0.0;
  Eigen::VectorXd grad;  // flat net gradient, including the decay term
};

/// -E_dataset[log D] - E_policy[log(1-D)] + weight decay on the weights.
GanLossResult gan_loss(GanDiscriminator& d, const Eigen::MatrixXd& dataset_batch,
                       const Eigen::MatrixXd& policy_batch);

double gan_reward(const GanDiscriminator& d, const Eigen::VectorXd& transition);
Eigen::VectorXd gan_reward_batch(const GanDiscriminator& d, const Eigen::MatrixXd& transitions);

}  // namespace lsail
