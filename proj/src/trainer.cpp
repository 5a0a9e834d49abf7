#include "lsail/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace lsail {

double task_reward(const Eigen::Vector2d& eef, const Eigen::Vector2d& target) {
  return std::exp(-10.0 * (eef - target).norm());
}

std::vector<ConstraintSpec> build_constraints(const std::vector<ConstraintDef>& defs,
                                              const EnvConfig& env) {
  std::vector<ConstraintSpec> specs;
  for (const ConstraintDef& def : defs) {
    if (def.name != "base_accel")
      throw std::invalid_argument("unknown constraint '" + def.name + "'");
    ConstraintSpec spec;
    spec.name = def.name;
    spec.ramp_start_fraction = def.ramp_start_fraction;
    spec.final_pmax = def.final_pmax;
    EnvConfig limited = env;
    limited.accel_limit = def.limit;
    spec.evaluate = [limited](const EnvState& s, const Eigen::Vector4d& a) {
      return contact_force_analog(s, a, limited);
    };
    specs.push_back(std::move(spec));
  }
  return specs;
}

std::vector<CatConstraintConfig> cat_configs(const std::vector<ConstraintDef>& defs) {
  std::vector<CatConstraintConfig> configs;
  for (const ConstraintDef& def : defs)
    configs.push_back({def.name, def.final_pmax, def.ramp_start_fraction});
  return configs;
}

GaeResult compute_gae(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values,
                      double bootstrap_value, const Eigen::VectorXd& deltas,
                      const Eigen::VectorXd& done, double gamma, double lambda) {
  const Eigen::Index horizon = rewards.size();
  if (values.size() != horizon || deltas.size() != horizon || done.size() != horizon)
    throw std::invalid_argument("compute_gae: sequence length mismatch");

  GaeResult out;
  out.advantages.resize(horizon);
  double adv_next = 0.0;
  for (Eigen::Index t = horizon - 1; t >= 0; --t) {
    const double discount = effective_discount(deltas[t], gamma);
    const double live = 1.0 - done[t];
    const double value_next = (t == horizon - 1) ? bootstrap_value : values[t + 1];
    const double td = rewards[t] + discount * live * value_next - values[t];
    adv_next = td + discount * lambda * live * adv_next;
    out.advantages[t] = adv_next;
  }
  out.returns = out.advantages + values;
  return out;
}

Eigen::VectorXd policy_observation(const EnvState& state, const Eigen::Vector4d& last_action) {
  Eigen::VectorXd obs(kPolicyObsDim);
  obs << state.base_vel, state.joint_pos, state.joint_vel, last_action;
  return obs;
}

DiscriminatorKind discriminator_kind_from_string(const std::string& name) {
  if (name == "gan") return DiscriminatorKind::kGan;
  if (name == "diffusion") return DiscriminatorKind::kDiffusion;
  throw std::invalid_argument("unknown discriminator kind '" + name + "'");
}

std::string to_string(DiscriminatorKind kind) {
  return kind == DiscriminatorKind::kGan ? "gan" : "diffusion";
}

Eigen::VectorXd AdversaryModel::scores(const Eigen::MatrixXd& transitions,
                                       std::mt19937_64& rng) const {
  if (kind == DiscriminatorKind::kGan) return discriminate_batch(gan, transitions);
  return diffusion_score_batch(diffusion, transitions, rng);
}

int AdversaryModel::parameter_count() const {
  return kind == DiscriminatorKind::kGan ? gan.net.parameter_count()
                                         : diffusion.eps_net.parameter_count();
}

FeedForwardNet& AdversaryModel::net() {
  return kind == DiscriminatorKind::kGan ? gan.net : diffusion.eps_net;
}

const FeedForwardNet& AdversaryModel::net() const {
  return kind == DiscriminatorKind::kGan ? gan.net : diffusion.eps_net;
}

std::string metrics_csv_header() {
  return "epoch,mean_rD,mean_rE,diversity_loss,disc_loss,disc_score_policy,"
         "disc_score_dataset,mean_delta,violation_frac,episode_return,eef_error_eval";
}

std::string metrics_csv_row(const EpochMetrics& m) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", m.epoch,
                m.mean_rd, m.mean_re, m.diversity_loss, m.disc_loss, m.disc_score_policy,
                m.disc_score_dataset, m.mean_delta, m.violation_frac, m.episode_return,
                m.eef_error_eval);
  return buf;
}

// ---------------------------------------------------------------------------
// PPO update

std::pair<double, double> clipped_surrogate(double ratio, double advantage, double clip) {
  const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
  const double u1 = ratio * advantage;
  const double u2 = clipped * advantage;
  if (u1 <= u2) return {-u1, -advantage};
  return {-u2, 0.0};
}

PpoStats ppo_update(GaussianPolicy& policy, AdamState& policy_opt, FeedForwardNet& value_net,
                    AdamState& value_opt, const RolloutBuffer& buffer,
                    const Eigen::VectorXd& rewards, const PpoConfig& cfg, int obs_dim,
                    std::mt19937_64& shuffle_rng, std::mt19937_64& diversity_rng) {
  const int total = buffer.size();
  if (rewards.size() != total) throw std::invalid_argument("ppo_update: reward size mismatch");

  // Advantages and returns per environment sequence.
  Eigen::VectorXd advantages(total), returns(total);
  Eigen::VectorXd r(buffer.steps), v(buffer.steps), d(buffer.steps), dn(buffer.steps);
  for (int i = 0; i < buffer.num_envs; ++i) {
    for (int t = 0; t < buffer.steps; ++t) {
      const int c = buffer.col(t, i);
      r[t] = rewards[c];
      v[t] = buffer.value[c];
      d[t] = buffer.delta[c];
      dn[t] = buffer.done[c];
    }
    const GaeResult g = compute_gae(r, v, buffer.bootstrap_value[i], d, dn, cfg.gamma,
                                    cfg.gae_lambda);
    for (int t = 0; t < buffer.steps; ++t) {
      const int c = buffer.col(t, i);
      advantages[c] = g.advantages[t];
      returns[c] = g.returns[t];
    }
  }
  const double adv_mean = advantages.mean();
  const double adv_std = std::sqrt((advantages.array() - adv_mean).square().mean());
  const Eigen::VectorXd adv_norm = (advantages.array() - adv_mean) / (adv_std + 1e-8);

  const bool use_diversity =
      obs_dim > 0 && cfg.diversity_weight > 0.0 && buffer.latent.rows() > 0;
  const Eigen::ArrayXd var = (2.0 * policy.log_std.array()).exp();

  PpoStats stats;
  std::vector<int> order(total);
  std::iota(order.begin(), order.end(), 0);

  for (int pass = 0; pass < cfg.epochs_per_batch && !stats.aborted; ++pass) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (int start = 0; start < total; start += cfg.minibatch) {
      const int m = std::min(cfg.minibatch, total - start);

      Eigen::MatrixXd x(buffer.policy_input.rows(), m);
      Eigen::MatrixXd act(buffer.action.rows(), m);
      Eigen::VectorXd logp_old(m), adv(m), ret(m);
      for (int j = 0; j < m; ++j) {
        const int c = order[start + j];
        x.col(j) = buffer.policy_input.col(c);
        act.col(j) = buffer.action.col(c);
        logp_old[j] = buffer.log_prob[c];
        adv[j] = adv_norm[c];
        ret[j] = returns[c];
      }

      const Eigen::MatrixXd means = policy.mean_net.forward(x);
      const Eigen::VectorXd logp_new = gaussian_log_prob_batch(means, policy.log_std, act);
      const double approx_kl = (logp_old - logp_new).mean();
      if (approx_kl > cfg.kl_abort) {
        stats.aborted = true;
        break;
      }

      // Clipped surrogate and its gradient through log-prob.
      Eigen::MatrixXd mean_upstream(means.rows(), m);
      Eigen::VectorXd log_std_grad = Eigen::VectorXd::Zero(policy.log_std.size());
      double policy_loss = 0.0;
      for (int j = 0; j < m; ++j) {
        const double ratio = std::exp(logp_new[j] - logp_old[j]);
        const auto [loss_j, dloss_dratio] = clipped_surrogate(ratio, adv[j], cfg.clip);
        policy_loss += loss_j / m;
        const double dl_dlogp = dloss_dratio * ratio / m;
        const Eigen::ArrayXd z = (act.col(j) - means.col(j)).array();
        mean_upstream.col(j) = dl_dlogp * (z / var).matrix();
        log_std_grad.array() += dl_dlogp * (z.square() / var - 1.0);
      }
      if (cfg.entropy_bonus > 0.0) {
        policy_loss -= cfg.entropy_bonus * gaussian_entropy(policy.log_std);
        log_std_grad.array() -= cfg.entropy_bonus;
      }

      const NetGradients net_grads = policy.mean_net.backward(mean_upstream);
      Eigen::VectorXd flat(policy.parameter_count());
      flat.head(policy.mean_net.parameter_count()) = policy.mean_net.flatten(net_grads);
      flat.tail(policy.log_std.size()) = log_std_grad;

      if (use_diversity) {
        const int n = std::min(cfg.diversity_subsample, m);
        Eigen::MatrixXd obs(obs_dim, n);
        Eigen::MatrixXd z1(buffer.latent.rows(), n), z2(buffer.latent.rows(), n);
        for (int j = 0; j < n; ++j) {
          const int c = order[start + j];
          obs.col(j) = buffer.policy_input.col(c).head(obs_dim);
          z1.col(j) = buffer.latent.col(c);
          z2.col(j) = sample_latent(diversity_rng, static_cast<int>(z1.rows())).vec();
        }
        const DiversityLossResult div = diversity_loss(policy, obs, z1, z2);
        flat += cfg.diversity_weight * div.policy_grad;
        stats.diversity_loss += div.loss;
      }

      Eigen::VectorXd params = policy.parameters();
      policy_opt.step(params, flat);
      policy.set_parameters(params);

      // Value regression on the same minibatch.
      const Eigen::MatrixXd values = value_net.forward(x);
      const Eigen::MatrixXd residual = values - ret.transpose();
      const double value_loss = residual.array().square().mean();
      apply_gradients(value_net, value_net.backward(2.0 * residual / m), value_opt);

      stats.policy_loss += policy_loss;
      stats.value_loss += value_loss;
      stats.approx_kl += approx_kl;
      ++stats.minibatches;
    }
  }
  if (stats.minibatches > 0) {
    stats.policy_loss /= stats.minibatches;
    stats.value_loss /= stats.minibatches;
    stats.diversity_loss /= stats.minibatches;
    stats.approx_kl /= stats.minibatches;
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Low-level trainer

namespace {

Eigen::VectorXd noisy_observation(Eigen::VectorXd obs, const EnvConfig& env,
                                  std::mt19937_64& rng) {
  if (env.observation_noise) {
    std::uniform_real_distribution<double> dist(-env.observation_noise_mag,
                                                env.observation_noise_mag);
    for (Eigen::Index i = 0; i < obs.size(); ++i) obs[i] += dist(rng);
  }
  return obs;
}

std::vector<int> build_dims(int input, const std::vector<int>& hidden, int output) {
  std::vector<int> dims;
  dims.push_back(input);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(output);
  return dims;
}

}  // namespace

LowLevelTrainer::LowLevelTrainer(LowLevelConfig cfg, MotionDataset dataset)
    : cfg_(std::move(cfg)), dataset_(std::move(dataset)) {
  dataset_.validate();
  const int feat = discriminator_feature_dim(dataset_.robot);
  const int transition_dim = 2 * feat;
  const int input_dim = kPolicyObsDim + cfg_.latent_dim;

  std::mt19937_64 init_rng = make_stream(cfg_.seed, 0);
  policy_ = GaussianPolicy::init(input_dim, cfg_.policy_hidden, 4, init_rng);
  value_ = FeedForwardNet::init(build_dims(input_dim, cfg_.value_hidden, 1), Activation::kTanh,
                                Activation::kIdentity, init_rng);
  adversary_.kind = cfg_.discriminator;
  if (cfg_.discriminator == DiscriminatorKind::kGan) {
    adversary_.gan = GanDiscriminator::init(transition_dim, cfg_.disc_hidden,
                                            cfg_.disc_weight_decay, init_rng);
  } else {
    adversary_.diffusion = DiffusionDiscriminator::init(
        transition_dim, cfg_.disc_hidden, DiffusionSchedule::linear(), 4, init_rng);
  }
  encoder_ = SkillEncoder::init(transition_dim, cfg_.encoder_hidden, cfg_.latent_dim,
                                cfg_.kappa, init_rng);

  AdamConfig pcfg;
  pcfg.learning_rate = cfg_.ppo.learning_rate;
  policy_opt_ = AdamState(policy_.parameter_count(), pcfg);
  value_opt_ = AdamState(value_.parameter_count(), pcfg);
  AdamConfig dcfg;
  dcfg.learning_rate = cfg_.disc_learning_rate;
  adversary_opt_ = AdamState(adversary_.parameter_count(), dcfg);
  AdamConfig ecfg;
  ecfg.learning_rate = cfg_.encoder_learning_rate;
  encoder_opt_ = AdamState(encoder_.mu_net.parameter_count(), ecfg);

  constraint_specs_ = build_constraints(cfg_.constraints, cfg_.env);
  cat_ = CatState(cat_configs(cfg_.constraints));

  const int n = cfg_.ppo.num_envs;
  env_state_.resize(n);
  episode_step_.assign(n, 0);
  env_latent_.resize(n);
  last_action_.assign(n, Eigen::Vector4d::Zero());
  env_rng_.reserve(n);
  for (int i = 0; i < n; ++i) env_rng_.push_back(make_stream(cfg_.seed, 1, i));
  for (int i = 0; i < n; ++i) reset_env(i);

  dataset_rng_ = make_stream(cfg_.seed, 2);
  shuffle_rng_ = make_stream(cfg_.seed, 3);
  label_rng_ = make_stream(cfg_.seed, 4);
  diversity_rng_ = make_stream(cfg_.seed, 5);
}

void LowLevelTrainer::reset_env(int i) {
  // Reference-state initialization: episodes start from a random dataset
  // frame (base position dropped; the policy never observes it).
  std::int64_t frames = 0;
  for (const MotionClip& clip : dataset_.clips) frames += clip.frames.size();
  std::uniform_int_distribution<std::int64_t> pick(0, frames - 1);
  std::int64_t idx = pick(env_rng_[i]);
  for (const MotionClip& clip : dataset_.clips) {
    if (idx < static_cast<std::int64_t>(clip.frames.size())) {
      EnvState s = EnvState::from_vector(clip.frames[idx]);
      s.base_pos.setZero();
      env_state_[i] = s;
      break;
    }
    idx -= clip.frames.size();
  }
  episode_step_[i] = 0;
  env_latent_[i] = sample_latent(env_rng_[i], cfg_.latent_dim).vec();
  last_action_[i] = Eigen::Vector4d::Zero();
}

void LowLevelTrainer::collect_rollout() {
  const int n = cfg_.ppo.num_envs;
  const int horizon = cfg_.ppo.rollout_steps;
  const int feat = discriminator_feature_dim(dataset_.robot);
  const int input_dim = kPolicyObsDim + cfg_.latent_dim;
  const int constraints = static_cast<int>(constraint_specs_.size());

  buffer_.num_envs = n;
  buffer_.steps = horizon;
  const int total = n * horizon;
  buffer_.full_state.resize(8, total);
  buffer_.policy_input.resize(input_dim, total);
  buffer_.transition.resize(2 * feat, total);
  buffer_.action.resize(4, total);
  buffer_.latent.resize(cfg_.latent_dim, total);
  buffer_.log_prob.resize(total);
  buffer_.value.resize(total);
  buffer_.reward_imitation = Eigen::VectorXd::Zero(total);
  buffer_.reward_skill = Eigen::VectorXd::Zero(total);
  buffer_.reward_task = Eigen::VectorXd::Zero(total);
  buffer_.delta.resize(total);
  buffer_.violation.resize(constraints, total);
  buffer_.done.resize(total);
  buffer_.bootstrap_value.resize(n);

  Eigen::MatrixXd input(input_dim, n);
  Eigen::VectorXd violations(constraints);
  for (int t = 0; t < horizon; ++t) {
    for (int i = 0; i < n; ++i) {
      input.col(i).head(kPolicyObsDim) = noisy_observation(
          policy_observation(env_state_[i], last_action_[i]), cfg_.env, env_rng_[i]);
      input.col(i).tail(cfg_.latent_dim) = env_latent_[i];
    }
    const Eigen::MatrixXd means = policy_.mean_net.evaluate(input);
    const Eigen::MatrixXd values = value_.evaluate(input);

    for (int i = 0; i < n; ++i) {
      const int c = buffer_.col(t, i);
      const Eigen::Vector4d action =
          sample_action(means.col(i), policy_.log_std, env_rng_[i]);
      if (!action.allFinite())
        throw std::runtime_error("collect_rollout: non-finite action in env " +
                                 std::to_string(i));

      buffer_.full_state.col(c) = env_state_[i].to_vector();
      buffer_.policy_input.col(c) = input.col(i);
      buffer_.action.col(c) = action;
      buffer_.latent.col(c) = env_latent_[i];
      buffer_.log_prob[c] = gaussian_log_prob(means.col(i), policy_.log_std, action);
      buffer_.value[c] = values(0, i);

      for (int k = 0; k < constraints; ++k)
        violations[k] = std::max(0.0, constraint_specs_[k].evaluate(env_state_[i], action));
      buffer_.violation.col(c) = violations;
      buffer_.delta[c] = cfg_.cat_enabled ? cat_.delta(violations) : 0.0;

      const EnvState next = step(env_state_[i], action, cfg_.env);
      buffer_.transition.col(c).head(feat) =
          discriminator_features(env_state_[i].to_vector(), dataset_.robot);
      buffer_.transition.col(c).tail(feat) =
          discriminator_features(next.to_vector(), dataset_.robot);

      env_state_[i] = next;
      last_action_[i] = action;
      ++episode_step_[i];
      if (episode_step_[i] >= cfg_.env.episode_steps) {
        buffer_.done[c] = 1.0;
        reset_env(i);
      } else {
        buffer_.done[c] = 0.0;
        if (cfg_.latent_resample_steps > 0 &&
            episode_step_[i] % cfg_.latent_resample_steps == 0)
          env_latent_[i] = sample_latent(env_rng_[i], cfg_.latent_dim).vec();
      }
    }
  }

  for (int i = 0; i < n; ++i) {
    input.col(i).head(kPolicyObsDim) = policy_observation(env_state_[i], last_action_[i]);
    input.col(i).tail(cfg_.latent_dim) = env_latent_[i];
  }
  buffer_.bootstrap_value = value_.evaluate(input).row(0);
}

EpochMetrics LowLevelTrainer::run_epoch() {
  ++epoch_;
  if (cfg_.cat_enabled) cat_.schedule_pmax(epoch_, cfg_.epochs);

  collect_rollout();
  const int total = buffer_.size();

  // Reward labeling in one batched pass over the fresh rollout.
  const Eigen::VectorXd policy_scores = adversary_.scores(buffer_.transition, label_rng_);
  for (int c = 0; c < total; ++c)
    buffer_.reward_imitation[c] = reward_from_score(policy_scores[c]);
  buffer_.reward_skill = skill_reward_batch(encoder_, buffer_.transition, buffer_.latent);
  const Eigen::VectorXd rewards =
      buffer_.reward_imitation + cfg_.ppo.skill_reward_beta * buffer_.reward_skill;

  const TransitionBatch dataset_probe =
      sample_dataset_transitions(dataset_, 1024, dataset_rng_);
  const double dataset_score = adversary_.scores(dataset_probe.features, label_rng_).mean();

  // Discriminator: fixed passes over the freshest rollout, balanced
  // against fresh dataset samples.
  double disc_loss = 0.0;
  int disc_steps = 0;
  std::vector<int> order(total);
  std::iota(order.begin(), order.end(), 0);
  for (int pass = 0; pass < cfg_.disc_passes; ++pass) {
    std::shuffle(order.begin(), order.end(), shuffle_rng_);
    for (int start = 0; start < total; start += cfg_.disc_batch) {
      const int m = std::min(cfg_.disc_batch, total - start);
      Eigen::MatrixXd policy_batch(buffer_.transition.rows(), m);
      for (int j = 0; j < m; ++j) policy_batch.col(j) = buffer_.transition.col(order[start + j]);
      const Eigen::MatrixXd dataset_batch =
          sample_dataset_transitions(dataset_, m, dataset_rng_).features;

      if (adversary_.kind == DiscriminatorKind::kGan) {
        const GanLossResult r = gan_loss(adversary_.gan, dataset_batch, policy_batch);
        Eigen::VectorXd params = adversary_.gan.net.parameters();
        adversary_opt_.step(params, r.grad);
        adversary_.gan.net.set_parameters(params);
        disc_loss += r.loss;
      } else {
        const DiffusionTrainResult r = train_diffusion_discriminator(
            adversary_.diffusion, dataset_batch, policy_batch, label_rng_);
        Eigen::VectorXd params = adversary_.diffusion.eps_net.parameters();
        adversary_opt_.step(params, r.grad);
        adversary_.diffusion.eps_net.set_parameters(params);
        disc_loss += r.loss;
      }
      ++disc_steps;
    }
  }
  disc_loss /= std::max(1, disc_steps);

  // Skill encoder on the rollout's (transition, latent) pairs.
  for (int pass = 0; pass < cfg_.encoder_passes; ++pass) {
    std::shuffle(order.begin(), order.end(), shuffle_rng_);
    for (int start = 0; start < total; start += cfg_.encoder_batch) {
      const int m = std::min(cfg_.encoder_batch, total - start);
      Eigen::MatrixXd transitions(buffer_.transition.rows(), m);
      Eigen::MatrixXd latents(cfg_.latent_dim, m);
      for (int j = 0; j < m; ++j) {
        transitions.col(j) = buffer_.transition.col(order[start + j]);
        latents.col(j) = buffer_.latent.col(order[start + j]);
      }
      const EncoderLossResult r = encoder_loss(encoder_, transitions, latents);
      Eigen::VectorXd params = encoder_.mu_net.parameters();
      encoder_opt_.step(params, r.grad);
      encoder_.mu_net.set_parameters(params);
    }
  }

  const PpoStats ppo = ppo_update(policy_, policy_opt_, value_, value_opt_, buffer_, rewards,
                                  cfg_.ppo, kPolicyObsDim, shuffle_rng_, diversity_rng_);

  if (cfg_.cat_enabled) cat_.update_cmax(buffer_.violation);

  EpochMetrics m;
  m.epoch = epoch_;
  m.mean_rd = buffer_.reward_imitation.mean();
  m.mean_re = buffer_.reward_skill.mean();
  m.diversity_loss = ppo.diversity_loss;
  m.disc_loss = disc_loss;
  m.disc_score_policy = policy_scores.mean();
  m.disc_score_dataset = dataset_score;
  m.mean_delta = buffer_.delta.mean();
  int violated = 0;
  for (int c = 0; c < total; ++c)
    if (buffer_.violation.col(c).maxCoeff() > 0.0) ++violated;
  m.violation_frac = static_cast<double>(violated) / total;
  m.episode_return = rewards.sum() / cfg_.ppo.num_envs;
  m.eef_error_eval = std::numeric_limits<double>::quiet_NaN();
  return m;
}

LowLevelDiagnostics LowLevelTrainer::diagnostics() {
  if (buffer_.size() == 0)
    throw std::runtime_error("LowLevelTrainer::diagnostics: no rollout collected yet");
  LowLevelDiagnostics diag;
  std::mt19937_64 score_rng = make_stream(cfg_.seed, 6);
  diag.disc_score_policy = adversary_.scores(buffer_.transition, score_rng).mean();
  diag.encoder_alignment_true =
      skill_reward_batch(encoder_, buffer_.transition, buffer_.latent).mean();

  std::mt19937_64 pair_rng = make_stream(cfg_.seed, 7);
  std::vector<int> perm(buffer_.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), pair_rng);
  Eigen::MatrixXd shuffled(buffer_.latent.rows(), buffer_.size());
  for (int c = 0; c < buffer_.size(); ++c) shuffled.col(c) = buffer_.latent.col(perm[c]);
  diag.encoder_alignment_shuffled =
      skill_reward_batch(encoder_, buffer_.transition, shuffled).mean();
  return diag;
}

// ---------------------------------------------------------------------------
// High-level trainer

HighLevelTrainer::HighLevelTrainer(HighLevelConfig cfg, GaussianPolicy low_level_policy)
    : cfg_(std::move(cfg)), low_policy_(std::move(low_level_policy)) {
  if (low_policy_.input_dim() != kPolicyObsDim + cfg_.latent_dim)
    throw std::invalid_argument(
        "HighLevelTrainer: low-level policy input does not match obs + latent dims");

  const int obs_dim = kPolicyObsDim + kHighLevelObsExtra;
  std::mt19937_64 init_rng = make_stream(cfg_.seed, 10);
  policy_ = GaussianPolicy::init(obs_dim, cfg_.policy_hidden, cfg_.latent_dim, init_rng);
  value_ = FeedForwardNet::init(build_dims(obs_dim, cfg_.value_hidden, 1), Activation::kTanh,
                                Activation::kIdentity, init_rng);
  AdamConfig acfg;
  acfg.learning_rate = cfg_.ppo.learning_rate;
  policy_opt_ = AdamState(policy_.parameter_count(), acfg);
  value_opt_ = AdamState(value_.parameter_count(), acfg);

  constraint_specs_ = build_constraints({constraint_}, cfg_.env);

  const int n = cfg_.ppo.num_envs;
  env_state_.resize(n);
  episode_step_.assign(n, 0);
  target_.assign(n, Eigen::Vector2d::Zero());
  env_latent_.assign(n, Eigen::VectorXd::Unit(cfg_.latent_dim, 0));
  last_action_.assign(n, Eigen::Vector4d::Zero());
  env_rng_.reserve(n);
  for (int i = 0; i < n; ++i) env_rng_.push_back(make_stream(cfg_.seed, 11, i));
  for (int i = 0; i < n; ++i) reset_env(i);
  shuffle_rng_ = make_stream(cfg_.seed, 13);
  unused_rng_ = make_stream(cfg_.seed, 14);
}

void HighLevelTrainer::reset_env(int i) {
  EnvState s;
  s.joint_pos = cfg_.env.joint_neutral;
  env_state_[i] = s;
  episode_step_[i] = 0;
  std::uniform_real_distribution<double> radius(cfg_.task.annulus_min, cfg_.task.annulus_max);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
  const double r = radius(env_rng_[i]);
  const double a = angle(env_rng_[i]);
  target_[i] = Eigen::Vector2d(r * std::cos(a), r * std::sin(a));
  env_latent_[i] = Eigen::VectorXd::Unit(cfg_.latent_dim, 0);
  last_action_[i] = Eigen::Vector4d::Zero();
}

Eigen::VectorXd HighLevelTrainer::high_observation(int i) const {
  Eigen::VectorXd obs(kPolicyObsDim + kHighLevelObsExtra);
  obs.head(kPolicyObsDim) = policy_observation(env_state_[i], last_action_[i]);
  obs.segment<2>(kPolicyObsDim) = target_[i] - env_state_[i].base_pos;
  obs.segment<2>(kPolicyObsDim + 2) = target_[i] - end_effector(env_state_[i], cfg_.env);
  return obs;
}

EpochMetrics HighLevelTrainer::run_epoch() {
  ++epoch_;
  const int n = cfg_.ppo.num_envs;
  const int horizon = cfg_.ppo.rollout_steps;
  const int obs_dim = kPolicyObsDim + kHighLevelObsExtra;
  const int period = cfg_.task.latent_period;
  const int total = n * horizon;
  const int constraints = static_cast<int>(constraint_specs_.size());

  RolloutBuffer buf;
  buf.num_envs = n;
  buf.steps = horizon;
  buf.full_state.resize(8, total);
  buf.policy_input.resize(obs_dim, total);
  buf.transition.resize(0, total);
  buf.action.resize(cfg_.latent_dim, total);
  buf.latent.resize(0, total);
  buf.log_prob.resize(total);
  buf.value.resize(total);
  buf.reward_imitation = Eigen::VectorXd::Zero(total);
  buf.reward_skill = Eigen::VectorXd::Zero(total);
  buf.reward_task.resize(total);
  buf.delta = Eigen::VectorXd::Zero(total);
  buf.violation.resize(constraints, total);
  buf.done.resize(total);
  buf.bootstrap_value.resize(n);

  std::int64_t violated_low_steps = 0, low_steps = 0;
  double final_error_sum = 0.0;
  int episodes_done = 0;

  Eigen::MatrixXd obs(obs_dim, n);
  Eigen::MatrixXd low_input(low_policy_.input_dim(), n);
  for (int t = 0; t < horizon; ++t) {
    for (int i = 0; i < n; ++i)
      obs.col(i) = noisy_observation(high_observation(i), cfg_.env, env_rng_[i]);
    const Eigen::MatrixXd means = policy_.mean_net.evaluate(obs);
    const Eigen::MatrixXd values = value_.evaluate(obs);

    // Emit a latent per environment, then run one high-level period.
    for (int i = 0; i < n; ++i) {
      const int c = buf.col(t, i);
      const Eigen::VectorXd raw = sample_action(means.col(i), policy_.log_std, env_rng_[i]);
      buf.full_state.col(c) = env_state_[i].to_vector();
      buf.policy_input.col(c) = obs.col(i);
      buf.action.col(c) = raw;
      buf.log_prob[c] = gaussian_log_prob(means.col(i), policy_.log_std, raw);
      buf.value[c] = values(0, i);
      env_latent_[i] = project_latent(raw, SkillLatent(env_latent_[i])).vec();
      buf.violation.col(c).setZero();
    }

    for (int sub = 0; sub < period; ++sub) {
      for (int i = 0; i < n; ++i) {
        low_input.col(i).head(kPolicyObsDim) = noisy_observation(
            policy_observation(env_state_[i], last_action_[i]), cfg_.env, env_rng_[i]);
        low_input.col(i).tail(cfg_.latent_dim) = env_latent_[i];
      }
      const Eigen::MatrixXd low_means = low_policy_.mean_net.evaluate(low_input);
      for (int i = 0; i < n; ++i) {
        const int c = buf.col(t, i);
        const Eigen::Vector4d action = low_means.col(i);
        for (int k = 0; k < constraints; ++k) {
          const double cplus =
              std::max(0.0, constraint_specs_[k].evaluate(env_state_[i], action));
          buf.violation(k, c) = std::max(buf.violation(k, c), cplus);
          if (cplus > 0.0) ++violated_low_steps;
        }
        ++low_steps;
        env_state_[i] = step(env_state_[i], action, cfg_.env);
        last_action_[i] = action;
        buf.reward_task[c] +=
            task_reward(end_effector(env_state_[i], cfg_.env), target_[i]) / period;
      }
    }

    for (int i = 0; i < n; ++i) {
      const int c = buf.col(t, i);
      episode_step_[i] += period;
      if (episode_step_[i] >= cfg_.task.episode_steps) {
        buf.done[c] = 1.0;
        final_error_sum +=
            (end_effector(env_state_[i], cfg_.env) - target_[i]).norm();
        ++episodes_done;
        reset_env(i);
      } else {
        buf.done[c] = 0.0;
      }
    }
  }

  for (int i = 0; i < n; ++i) obs.col(i) = high_observation(i);
  buf.bootstrap_value = value_.evaluate(obs).row(0);

  const PpoStats ppo = ppo_update(policy_, policy_opt_, value_, value_opt_, buf,
                                  buf.reward_task, cfg_.ppo, 0, shuffle_rng_, unused_rng_);

  EpochMetrics m;
  m.epoch = epoch_;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  m.mean_rd = nan;
  m.mean_re = nan;
  m.diversity_loss = ppo.diversity_loss;
  m.disc_loss = nan;
  m.disc_score_policy = nan;
  m.disc_score_dataset = nan;
  m.mean_delta = 0.0;
  m.violation_frac = low_steps > 0 ? static_cast<double>(violated_low_steps) / low_steps : 0.0;
  m.episode_return = buf.reward_task.sum() / n;
  m.eef_error_eval = episodes_done > 0 ? final_error_sum / episodes_done : nan;
  return m;
}

// ---------------------------------------------------------------------------
// Evaluation

HierarchicalController::HierarchicalController(GaussianPolicy low, GaussianPolicy high,
                                               EnvConfig env, TaskSpec task)
    : low_(std::move(low)), high_(std::move(high)), env_(std::move(env)),
      task_(std::move(task)) {
  latent_ = Eigen::VectorXd::Unit(low_.input_dim() - kPolicyObsDim, 0);
}

void HierarchicalController::reset(const Eigen::Vector2d& target) {
  target_ = target;
  latent_ = Eigen::VectorXd::Unit(latent_.size(), 0);
  last_action_ = Eigen::Vector4d::Zero();
}

Eigen::Vector4d HierarchicalController::act(const EnvState& state, int step) {
  if (step % task_.latent_period == 0) {
    Eigen::VectorXd obs(kPolicyObsDim + kHighLevelObsExtra);
    obs.head(kPolicyObsDim) = policy_observation(state, last_action_);
    obs.segment<2>(kPolicyObsDim) = target_ - state.base_pos;
    obs.segment<2>(kPolicyObsDim + 2) = target_ - end_effector(state, env_);
    const Eigen::VectorXd raw = high_.mean_net.evaluate(obs);
    latent_ = project_latent(raw, SkillLatent(latent_)).vec();
  }
  Eigen::VectorXd input(low_.input_dim());
  input.head(kPolicyObsDim) = policy_observation(state, last_action_);
  input.tail(latent_.size()) = latent_;
  const Eigen::Vector4d action = low_.mean_net.evaluate(input);
  last_action_ = action;
  return action;
}

double EvalReport::success_fraction(double threshold) const {
  if (episodes.empty()) return 0.0;
  int ok = 0;
  for (const EvalEpisode& e : episodes)
    if (e.final_error <= threshold) ++ok;
  return static_cast<double>(ok) / episodes.size();
}

EvalReport evaluate(ReachController& controller, const EnvConfig& env, const TaskSpec& task,
                    const std::vector<ConstraintDef>& constraints, int episodes,
                    std::uint64_t seed) {
  const std::vector<ConstraintSpec> specs = build_constraints(constraints, env);
  const int saturation_steps = std::max(1, static_cast<int>(std::llround(0.5 / env.dt)));

  EvalReport report;
  report.episodes.reserve(episodes);
  std::int64_t violated = 0, steps = 0;
  int falls = 0;

  for (int e = 0; e < episodes; ++e) {
    std::mt19937_64 rng = make_stream(seed, 1000, e);
    std::uniform_real_distribution<double> radius(task.annulus_min, task.annulus_max);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
    const double r = radius(rng);
    const double a = angle(rng);
    const Eigen::Vector2d target(r * std::cos(a), r * std::sin(a));

    EnvState state;
    state.joint_pos = env.joint_neutral;
    controller.reset(target);

    EvalEpisode ep;
    int episode_violations = 0;
    int consecutive_saturated = 0;
    for (int t = 0; t < task.episode_steps; ++t) {
      const Eigen::Vector4d action = controller.act(state, t);
      bool any = false;
      for (const ConstraintSpec& spec : specs)
        if (spec.evaluate(state, action) > 0.0) any = true;
      if (any) {
        ++episode_violations;
        ++violated;
      }
      ++steps;
      state = step(state, action, env);
      if (state.base_vel.norm() >= env.base_speed_max - 1e-9) {
        if (++consecutive_saturated >= saturation_steps) ep.fall = true;
      } else {
        consecutive_saturated = 0;
      }
    }
    ep.final_error = (end_effector(state, env) - target).norm();
    ep.violation_frac = static_cast<double>(episode_violations) / task.episode_steps;
    if (ep.fall) ++falls;
    report.episodes.push_back(ep);
  }

  double mean = 0.0;
  for (const EvalEpisode& ep : report.episodes) mean += ep.final_error;
  mean /= std::max<std::size_t>(1, report.episodes.size());
  double var = 0.0;
  for (const EvalEpisode& ep : report.episodes)
    var += (ep.final_error - mean) * (ep.final_error - mean);
  var /= std::max<std::size_t>(1, report.episodes.size());

  report.mean_error = mean;
  report.std_error = std::sqrt(var);
  report.violation_percent = steps > 0 ? 100.0 * violated / steps : 0.0;
  report.fall_percent = episodes > 0 ? 100.0 * falls / episodes : 0.0;
  return report;
}

}  // namespace lsail
