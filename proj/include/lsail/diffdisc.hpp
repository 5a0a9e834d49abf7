#pragma once

#include "lsail/motion.hpp"
#include "lsail/numkit.hpp"

#include <Eigen/Dense>

#include <functional>
#include <random>
#include <vector>

namespace lsail {

struct DiffusionSchedule {
  Eigen::VectorXd beta;       // index t-1 for timestep t in [1, steps()]
  Eigen::VectorXd alpha_bar;  // cumulative product of (1 - beta)

  static DiffusionSchedule linear(int steps = 100, double beta_start = 1e-4,
                                  double beta_end = 0.02);
  static DiffusionSchedule from_betas(const Eigen::VectorXd& betas);

  int steps() const { return static_cast<int>(beta.size()); }
  /// alpha_bar for timestep t in [1, steps()]; out of range is a hard error.
  double alpha_bar_at(int t) const;
};

/// One-hot condition label channel.
Eigen::Vector2d label_encoding(TransitionSource source);

/// Forward diffusion: sqrt(alpha_bar_t) x + sqrt(1 - alpha_bar_t) eps.
Eigen::VectorXd noise_transition(const DiffusionSchedule& schedule, const Eigen::VectorXd& x,
                                 int t, const Eigen::VectorXd& eps);

/// A sampled (timestep, noise) pair shared across label evaluations.
struct NoiseDraw {
  int t = 1;
  Eigen::VectorXd eps;
};

/// k draws with timesteps stratified over [1, steps] and fresh Gaussian
/// noise of the given dimension.
std::vector<NoiseDraw> sample_noise_draws(const DiffusionSchedule& schedule, int k, int dim,
                                          std::mt19937_64& rng);

/// Conditional noise-prediction discriminator. The network input is
/// [x (2F); noised x (2F); t / T (1); label one-hot (2)] and the output
/// is the predicted noise (2F).
struct DiffusionDiscriminator {
  FeedForwardNet eps_net;
  DiffusionSchedule schedule;
  int timestep_samples = 4;  // draws averaged per loss evaluation
  int transition_dim = 0;    // 2F

  static DiffusionDiscriminator init(int transition_dim, const std::vector<int>& hidden,
                                     const DiffusionSchedule& schedule, int timestep_samples,
                                     std::mt19937_64& rng);

  Eigen::VectorXd net_input(const Eigen::VectorXd& x, const Eigen::VectorXd& noised,
                            double t_frac, const Eigen::Vector2d& label) const;
};

/// Test hook: any callable that predicts the applied noise.
using NoisePredictor = std::function<Eigen::VectorXd(
    const Eigen::VectorXd& x, const Eigen::VectorXd& noised, double t_frac,
    const Eigen::Vector2d& label)>;

/// Mean over the draws of ||predict(...) - eps||^2.
double diffusion_loss_with_draws(const NoisePredictor& predictor,
                                 const DiffusionSchedule& schedule, const Eigen::VectorXd& x,
                                 const Eigen::Vector2d& label,
                                 const std::vector<NoiseDraw>& draws);

double diffusion_loss(const DiffusionDiscriminator& d, const Eigen::VectorXd& x,
                      TransitionSource label, std::mt19937_64& rng);

/// L_diff under the policy label minus L_diff under the dataset label,
/// both on the same draws (common random numbers). The encodings are
/// explicit so label symmetry can be exercised.
double diffusion_logit_with_draws(const DiffusionDiscriminator& d, const Eigen::VectorXd& x,
                                  const std::vector<NoiseDraw>& draws,
                                  const Eigen::Vector2d& policy_label,
                                  const Eigen::Vector2d& dataset_label);

double diffusion_discriminate_with_draws(const DiffusionDiscriminator& d,
                                         const Eigen::VectorXd& x,
                                         const std::vector<NoiseDraw>& draws);

double diffusion_discriminate(const DiffusionDiscriminator& d, const Eigen::VectorXd& x,
                              std::mt19937_64& rng);

double diffusion_reward(const DiffusionDiscriminator& d, const Eigen::VectorXd& x,
                        std::mt19937_64& rng);

/// Column-wise classifier scores; each column gets its own draws, shared
/// between the two label evaluations of that column.
Eigen::VectorXd diffusion_score_batch(const DiffusionDiscriminator& d,
                                      const Eigen::MatrixXd& transitions,
                                      std::mt19937_64& rng);

struct DiffusionTrainResult {
  double loss = 0.0;       // mean per-row binary cross-entropy
  Eigen::VectorXd grad;    // flat eps_net gradient
};

/// BCE of the classifier with target 1 for dataset columns and 0 for
/// policy columns, differentiated through both diffusion-loss branches.
/// Draws are taken from `draws_rng` per column (frozen draws make the
/// objective deterministic for gradient checking).
DiffusionTrainResult train_diffusion_discriminator(DiffusionDiscriminator& d,
                                                   const Eigen::MatrixXd& dataset_batch,
                                                   const Eigen::MatrixXd& policy_batch,
                                                   std::mt19937_64& draws_rng);

DiffusionTrainResult train_diffusion_discriminator_with_draws(
    DiffusionDiscriminator& d, const Eigen::MatrixXd& dataset_batch,
    const Eigen::MatrixXd& policy_batch,
    const std::vector<std::vector<NoiseDraw>>& draws_per_column);

}  // namespace lsail
