#pragma once

#include "lsail/adversary.hpp"
#include "lsail/cat.hpp"
#include "lsail/diffdisc.hpp"
#include "lsail/motion.hpp"
#include "lsail/policy.hpp"
#include "lsail/skills.hpp"
#include "lsail/toyenv.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace lsail {

struct PpoConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  int epochs_per_batch = 4;
  int minibatch = 1024;
  double learning_rate = 3e-4;
  double entropy_bonus = 0.0;
  int rollout_steps = 64;
  int num_envs = 128;
  double skill_reward_beta = 0.5;   // weight on the skill-discovery reward
  double diversity_weight = 0.01;
  int diversity_subsample = 256;
  double kl_abort = 1.0;
};

struct TaskSpec {
  double annulus_min = 1.0;  // target sampling radii around the start [m]
  double annulus_max = 2.0;
  int episode_steps = 500;   // low-level steps per episode
  int latent_period = 5;     // low-level steps per high-level decision
};

/// End-effector tracking reward: exp(-10 ||x_eef - x_d||), in (0, 1].
double task_reward(const Eigen::Vector2d& eef, const Eigen::Vector2d& target);

/// Named constraint wiring exposed through run configs.
struct ConstraintDef {
  std::string name = "base_accel";
  double limit = 2.5;
  double final_pmax = 0.2;
  double ramp_start_fraction = 0.7;
};

std::vector<ConstraintSpec> build_constraints(const std::vector<ConstraintDef>& defs,
                                              const EnvConfig& env);
std::vector<CatConstraintConfig> cat_configs(const std::vector<ConstraintDef>& defs);

struct GaeResult {
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
};

/// GAE with the per-step discount gamma_t = gamma * (1 - delta_t).
/// `done` (1 at an episode boundary after that step) zeroes both the
/// bootstrap and the advantage recursion across the boundary.
GaeResult compute_gae(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values,
                      double bootstrap_value, const Eigen::VectorXd& deltas,
                      const Eigen::VectorXd& done, double gamma, double lambda);

/// Rectangular on-policy buffer; column index = step * num_envs + env.
struct RolloutBuffer {
  int num_envs = 0;
  int steps = 0;
  Eigen::MatrixXd full_state;     // 8 x (T*N)
  Eigen::MatrixXd policy_input;   // policy input incl. any latent
  Eigen::MatrixXd transition;     // [phi(s_t); phi(s_t+1)], 2F x (T*N)
  Eigen::MatrixXd action;
  Eigen::MatrixXd latent;         // applied latent (empty at high level)
  Eigen::VectorXd log_prob;
  Eigen::VectorXd value;
  Eigen::VectorXd reward_imitation;  // r_D
  Eigen::VectorXd reward_skill;      // r_E
  Eigen::VectorXd reward_task;       // r_g
  Eigen::VectorXd delta;             // termination probability per step
  Eigen::MatrixXd violation;         // positive parts c+, I x (T*N)
  Eigen::VectorXd done;
  Eigen::VectorXd bootstrap_value;   // per env

  int col(int t, int env) const { return t * num_envs + env; }
  int size() const { return num_envs * steps; }
};

/// Per-sample clipped surrogate -min(ratio * A, clip(ratio) * A) and its
/// derivative in the ratio (zero where the clipped branch is active).
std::pair<double, double> clipped_surrogate(double ratio, double advantage, double clip);

struct PpoStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double diversity_loss = 0.0;
  double approx_kl = 0.0;
  int minibatches = 0;
  bool aborted = false;
};

/// Clipped-surrogate PPO update over the buffer with rewards `rewards`.
/// Advantages are normalized over the whole batch. `obs_dim` > 0 with a
/// nonzero diversity weight enables the latent diversity term (low level
/// only). A minibatch whose approximate KL exceeds cfg.kl_abort aborts
/// the remaining updates without applying that minibatch.
PpoStats ppo_update(GaussianPolicy& policy, AdamState& policy_opt, FeedForwardNet& value_net,
                    AdamState& value_opt, const RolloutBuffer& buffer,
                    const Eigen::VectorXd& rewards, const PpoConfig& cfg, int obs_dim,
                    std::mt19937_64& shuffle_rng, std::mt19937_64& diversity_rng);

/// Policy observation: discriminator features plus the previous action.
Eigen::VectorXd policy_observation(const EnvState& state, const Eigen::Vector4d& last_action);
inline constexpr int kPolicyObsDim = 10;

enum class DiscriminatorKind { kGan, kDiffusion };

DiscriminatorKind discriminator_kind_from_string(const std::string& name);
std::string to_string(DiscriminatorKind kind);

/// Either discriminator behind one scoring surface.
struct AdversaryModel {
  DiscriminatorKind kind = DiscriminatorKind::kGan;
  GanDiscriminator gan;
  DiffusionDiscriminator diffusion;

  Eigen::VectorXd scores(const Eigen::MatrixXd& transitions, std::mt19937_64& rng) const;
  int parameter_count() const;
  FeedForwardNet& net();
  const FeedForwardNet& net() const;
};

/// One row of the training metrics file.
struct EpochMetrics {
  int epoch = 0;
  double mean_rd = 0.0;
  double mean_re = 0.0;
  double diversity_loss = 0.0;
  double disc_loss = 0.0;
  double disc_score_policy = 0.0;
  double disc_score_dataset = 0.0;
  double mean_delta = 0.0;
  double violation_frac = 0.0;
  double episode_return = 0.0;
  double eef_error_eval = 0.0;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const EpochMetrics& m);

struct LowLevelConfig {
  EnvConfig env;
  PpoConfig ppo;
  int latent_dim = kDefaultLatentDim;
  double kappa = 5.0;
  int latent_resample_steps = 150;
  std::vector<int> policy_hidden{256, 128};
  std::vector<int> value_hidden{256, 128};
  std::vector<int> encoder_hidden{256, 128};
  std::vector<int> disc_hidden{256, 256};
  DiscriminatorKind discriminator = DiscriminatorKind::kGan;
  double disc_learning_rate = 3e-4;
  double disc_weight_decay = 1e-4;
  int disc_passes = 2;
  int disc_batch = 512;
  int encoder_passes = 2;
  int encoder_batch = 512;
  double encoder_learning_rate = 3e-4;
  bool cat_enabled = false;
  std::vector<ConstraintDef> constraints{ConstraintDef{}};
  int epochs = 400;
  std::uint64_t seed = 0;
};

struct LowLevelDiagnostics {
  double disc_score_policy = 0.0;
  double encoder_alignment_true = 0.0;
  double encoder_alignment_shuffled = 0.0;
};

/// Latent-conditioned imitation training: rollouts against the frozen
/// models, reward labeling, discriminator and encoder updates, PPO with
/// the diversity term, and the CaT schedule.
class LowLevelTrainer {
 public:
  LowLevelTrainer(LowLevelConfig cfg, MotionDataset dataset);

  EpochMetrics run_epoch();
  int epoch() const { return epoch_; }
  const LowLevelConfig& config() const { return cfg_; }

  GaussianPolicy& policy() { return policy_; }
  FeedForwardNet& value_net() { return value_; }
  SkillEncoder& encoder() { return encoder_; }
  AdversaryModel& adversary() { return adversary_; }
  const CatState& cat() const { return cat_; }
  void set_epoch(int epoch) { epoch_ = epoch; }

  /// Alignment and confusion measured on the most recent rollout.
  LowLevelDiagnostics diagnostics();

 private:
  void collect_rollout();

  LowLevelConfig cfg_;
  MotionDataset dataset_;
  std::vector<ConstraintSpec> constraint_specs_;
  GaussianPolicy policy_;
  FeedForwardNet value_;
  SkillEncoder encoder_;
  AdversaryModel adversary_;
  AdamState policy_opt_, value_opt_, encoder_opt_, adversary_opt_;
  CatState cat_;
  int epoch_ = 0;

  // Vectorized environments.
  std::vector<EnvState> env_state_;
  std::vector<int> episode_step_;
  std::vector<Eigen::VectorXd> env_latent_;
  std::vector<Eigen::Vector4d> last_action_;
  std::vector<std::mt19937_64> env_rng_;

  std::mt19937_64 dataset_rng_, shuffle_rng_, label_rng_, diversity_rng_;
  RolloutBuffer buffer_;

  void reset_env(int i);
};

struct HighLevelConfig {
  EnvConfig env;
  PpoConfig ppo;
  TaskSpec task;
  int latent_dim = kDefaultLatentDim;
  std::vector<int> policy_hidden{256, 128};
  std::vector<int> value_hidden{256, 128};
  int epochs = 300;
  std::uint64_t seed = 0;
};

inline constexpr int kHighLevelObsExtra = 4;  // target-relative vectors

/// Task training over a frozen low-level policy: the high-level policy
/// emits an unnormalized latent every `latent_period` steps, projected to
/// the hypersphere before conditioning the low-level policy.
class HighLevelTrainer {
 public:
  HighLevelTrainer(HighLevelConfig cfg, GaussianPolicy low_level_policy);

  EpochMetrics run_epoch();
  int epoch() const { return epoch_; }
  const HighLevelConfig& config() const { return cfg_; }

  GaussianPolicy& policy() { return policy_; }
  FeedForwardNet& value_net() { return value_; }
  const GaussianPolicy& low_level_policy() const { return low_policy_; }
  const std::vector<Eigen::VectorXd>& current_latents() const { return env_latent_; }
  void set_epoch(int epoch) { epoch_ = epoch; }

 private:
  void reset_env(int i);
  Eigen::VectorXd high_observation(int i) const;

  HighLevelConfig cfg_;
  GaussianPolicy low_policy_;  // frozen
  GaussianPolicy policy_;
  FeedForwardNet value_;
  AdamState policy_opt_, value_opt_;
  ConstraintDef constraint_;
  std::vector<ConstraintSpec> constraint_specs_;
  int epoch_ = 0;

  std::vector<EnvState> env_state_;
  std::vector<int> episode_step_;
  std::vector<Eigen::Vector2d> target_;
  std::vector<Eigen::VectorXd> env_latent_;
  std::vector<Eigen::Vector4d> last_action_;
  std::vector<std::mt19937_64> env_rng_;
  std::mt19937_64 shuffle_rng_, unused_rng_;
};

/// Episode-level controller interface for evaluation.
class ReachController {
 public:
  virtual ~ReachController() = default;
  virtual void reset(const Eigen::Vector2d& target) = 0;
  virtual Eigen::Vector4d act(const EnvState& state, int step) = 0;
};

/// Frozen hierarchy: high-level mean output projected to the sphere every
/// latent_period steps, low-level mean actions in between.
class HierarchicalController : public ReachController {
 public:
  HierarchicalController(GaussianPolicy low, GaussianPolicy high, EnvConfig env, TaskSpec task);
  void reset(const Eigen::Vector2d& target) override;
  Eigen::Vector4d act(const EnvState& state, int step) override;

 private:
  GaussianPolicy low_, high_;
  EnvConfig env_;
  TaskSpec task_;
  Eigen::Vector2d target_ = Eigen::Vector2d::Zero();
  Eigen::VectorXd latent_;
  Eigen::Vector4d last_action_ = Eigen::Vector4d::Zero();
};

struct EvalEpisode {
  double final_error = 0.0;
  double violation_frac = 0.0;
  bool fall = false;
};

struct EvalReport {
  std::vector<EvalEpisode> episodes;
  double mean_error = 0.0;
  double std_error = 0.0;
  double violation_percent = 0.0;  // percent of steps in violation
  double fall_percent = 0.0;       // percent of episodes with a fall event

  double success_fraction(double threshold) const;
};

/// Runs N deterministic episodes (per-episode target streams derived from
/// the seed). A "fall" is base speed saturation lasting longer than 0.5 s.
EvalReport evaluate(ReachController& controller, const EnvConfig& env, const TaskSpec& task,
                    const std::vector<ConstraintDef>& constraints, int episodes,
                    std::uint64_t seed);

}  // namespace lsail
