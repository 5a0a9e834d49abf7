#pragma once

#include "lsail/numkit.hpp"

#include <Eigen/Dense>

#include <random>
#include <vector>

namespace lsail {

/// Diagonal Gaussian policy: network-predicted mean plus a learned,
/// state-independent log standard deviation per action dimension.
struct GaussianPolicy {
  FeedForwardNet mean_net;
  Eigen::VectorXd log_std;

  static GaussianPolicy init(int input_dim, const std::vector<int>& hidden, int action_dim,
                             std::mt19937_64& rng);

  int input_dim() const { return mean_net.input_dim(); }
  int action_dim() const { return mean_net.output_dim(); }

  Eigen::MatrixXd mean(const Eigen::MatrixXd& inputs) const { return mean_net.evaluate(inputs); }

  /// Flat layout: [mean_net parameters; log_std].
  int parameter_count() const;
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& flat);
};

Eigen::VectorXd sample_action(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_std,
                              std::mt19937_64& rng);

double gaussian_log_prob(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_std,
                         const Eigen::VectorXd& action);

/// Column-wise log probabilities for a batch of (mean, action) pairs.
Eigen::VectorXd gaussian_log_prob_batch(const Eigen::MatrixXd& means,
                                        const Eigen::VectorXd& log_std,
                                        const Eigen::MatrixXd& actions);

double gaussian_entropy(const Eigen::VectorXd& log_std);

/// KL(N(m1, S) || N(m2, S)) for diagonal Gaussians sharing one log_std.
double gaussian_kl_shared_std(const Eigen::VectorXd& mean1, const Eigen::VectorXd& mean2,
                              const Eigen::VectorXd& log_std);

}  // namespace lsail
