#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lsail/trainer.hpp"

#include <cmath>
#include <random>

using namespace lsail;

namespace {

// Brute-force GAE oracle: direct double-loop expansion of the definition
// A_t = sum_l (prod of lambda * gamma_k * live_k) td_{t+l}, with the
// per-step discount gamma_t = gamma (1 - delta_t) and boundaries cutting
// the product. Independent of the implementation's backward recursion.
Eigen::VectorXd gae_oracle(const Eigen::VectorXd& r, const Eigen::VectorXd& v,
                           double bootstrap, const Eigen::VectorXd& deltas,
                           const Eigen::VectorXd& done, double gamma, double lambda) {
  const int horizon = static_cast<int>(r.size());
  Eigen::VectorXd td(horizon);
  for (int t = 0; t < horizon; ++t) {
    const double g = gamma * (1.0 - deltas[t]);
    const double vnext = (t == horizon - 1) ? bootstrap : v[t + 1];
    td[t] = r[t] + g * (1.0 - done[t]) * vnext - v[t];
  }
  Eigen::VectorXd adv(horizon);
  for (int t = 0; t < horizon; ++t) {
    double acc = 0.0;
    double weight = 1.0;
    for (int l = t; l < horizon; ++l) {
      acc += weight * td[l];
      weight *= lambda * gamma * (1.0 - deltas[l]) * (1.0 - done[l]);
      if (weight == 0.0) break;
    }
    adv[t] = acc;
  }
  return adv;
}

LowLevelConfig tiny_low_config(std::uint64_t seed) {
  LowLevelConfig cfg;
  cfg.seed = seed;
  cfg.ppo.num_envs = 8;
  cfg.ppo.rollout_steps = 16;
  cfg.ppo.minibatch = 64;
  cfg.ppo.epochs_per_batch = 2;
  cfg.ppo.diversity_subsample = 32;
  cfg.policy_hidden = {32};
  cfg.value_hidden = {32};
  cfg.encoder_hidden = {32};
  cfg.disc_hidden = {32};
  cfg.disc_batch = 64;
  cfg.encoder_batch = 64;
  cfg.env.episode_steps = 40;
  cfg.latent_resample_steps = 20;
  cfg.epochs = 5;
  return cfg;
}

MotionDataset tiny_dataset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  EnvConfig env;
  return generate_dataset(rng, env, 3, 2, 1.0);
}

}  // namespace

TEST_CASE("compute_gae: one-step identity") {
  Eigen::VectorXd r(1), v(1), d(1), dn(1);
  r << 1.0;
  v << 0.0;
  d << 0.0;
  dn << 0.0;
  const GaeResult g = compute_gae(r, v, 0.0, d, dn, 0.99, 0.95);
  CHECK(g.advantages[0] == 1.0);
  CHECK(g.returns[0] == 1.0);
}

TEST_CASE("compute_gae: delta = 1 stops credit flowing backward") {
  Eigen::VectorXd r(3), v(3), d(3), dn(3);
  r << 0.0, 5.0, 100.0;
  v << 0.0, 3.0, 7.0;
  d << 0.0, 1.0, 0.0;
  dn.setZero();
  const GaeResult g = compute_gae(r, v, 50.0, d, dn, 0.99, 0.95);
  // At t=1 the effective discount is zero: nothing at t=2 contributes.
  CHECK(g.advantages[1] == doctest::Approx(5.0 - 3.0).epsilon(1e-15));
}

TEST_CASE("compute_gae: three-step sequence equals brute-force expansion") {
  Eigen::VectorXd r(3), v(3), d(3), dn(3);
  r << 1.0, -0.5, 2.0;
  v << 0.3, 0.7, -0.2;
  d << 0.0, 0.1, 0.05;
  dn << 0.0, 0.0, 0.0;
  const GaeResult g = compute_gae(r, v, 0.9, d, dn, 0.99, 0.95);
  const Eigen::VectorXd expect = gae_oracle(r, v, 0.9, d, dn, 0.99, 0.95);
  CHECK((g.advantages - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("compute_gae: matches the oracle on random sequences with boundaries") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::uniform_real_distribution<double> prob(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int horizon = 1 + static_cast<int>(prob(rng) * 20);
    Eigen::VectorXd r(horizon), v(horizon), d(horizon), dn(horizon);
    for (int t = 0; t < horizon; ++t) {
      r[t] = dist(rng);
      v[t] = dist(rng);
      d[t] = prob(rng) < 0.3 ? prob(rng) : 0.0;
      dn[t] = prob(rng) < 0.15 ? 1.0 : 0.0;
    }
    const double bootstrap = dist(rng);
    const GaeResult g = compute_gae(r, v, bootstrap, d, dn, 0.99, 0.95);
    const Eigen::VectorXd expect = gae_oracle(r, v, bootstrap, d, dn, 0.99, 0.95);
    CHECK((g.advantages - expect).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("task_reward: pinned values") {
  const Eigen::Vector2d origin(0.0, 0.0);
  CHECK(task_reward(origin, origin) == 1.0);
  CHECK(task_reward(Eigen::Vector2d(0.1, 0.0), origin) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(task_reward(Eigen::Vector2d(0.0, 0.0693), origin) ==
        doctest::Approx(std::exp(-0.693)).epsilon(1e-15));
  CHECK(task_reward(Eigen::Vector2d(0.0, 0.0693), origin) == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("task_reward: in (0,1], 1 only at the target, decreasing in distance") {
  const Eigen::Vector2d target(0.3, -0.4);
  double prev = 2.0;
  for (double dist = 0.0; dist < 3.0; dist += 0.01) {
    const double r = task_reward(target + Eigen::Vector2d(dist, 0.0), target);
    CHECK(r > 0.0);
    CHECK(r <= 1.0);
    if (dist > 0.0) CHECK(r < prev);
    prev = r;
  }
}

TEST_CASE("clipped_surrogate: clipping engages above 1 + clip") {
  // Active branch below the clip boundary.
  auto [l1, g1] = clipped_surrogate(1.1, 1.0, 0.2);
  CHECK(l1 == doctest::Approx(-1.1).epsilon(1e-15));
  CHECK(g1 == -1.0);
  // Clipped above it: constant loss, zero gradient.
  auto [l2, g2] = clipped_surrogate(1.3, 1.0, 0.2);
  CHECK(l2 == doctest::Approx(-1.2).epsilon(1e-15));
  CHECK(g2 == 0.0);
  // Negative advantage keeps the unclipped branch at high ratio.
  auto [l3, g3] = clipped_surrogate(1.3, -1.0, 0.2);
  CHECK(l3 == doctest::Approx(1.3).epsilon(1e-15));
  CHECK(g3 == 1.0);
  // Negative advantage clips below 1 - clip.
  auto [l4, g4] = clipped_surrogate(0.5, -1.0, 0.2);
  CHECK(l4 == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(g4 == 0.0);
}

TEST_CASE("rollout: zero-weight GAN discriminator labels every reward log 2") {
  LowLevelConfig cfg = tiny_low_config(5);
  LowLevelTrainer trainer(cfg, tiny_dataset(5));
  for (auto& l : trainer.adversary().gan.net.layers()) {
    l.weight.setZero();
    l.bias.setZero();
  }
  const EpochMetrics m = trainer.run_epoch();
  CHECK(m.mean_rd == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(m.disc_score_policy == 0.5);
}

TEST_CASE("rollout: identical seeds give identical metrics") {
  LowLevelConfig cfg = tiny_low_config(17);
  LowLevelTrainer a(cfg, tiny_dataset(3));
  LowLevelTrainer b(cfg, tiny_dataset(3));
  for (int e = 0; e < 2; ++e) {
    const std::string ra = metrics_csv_row(a.run_epoch());
    const std::string rb = metrics_csv_row(b.run_epoch());
    CHECK(ra == rb);
  }
  CHECK(a.policy().parameters() == b.policy().parameters());
}

TEST_CASE("rollout: cat disabled keeps the delta column at zero") {
  LowLevelConfig cfg = tiny_low_config(7);
  cfg.cat_enabled = false;
  LowLevelTrainer trainer(cfg, tiny_dataset(7));
  const EpochMetrics m = trainer.run_epoch();
  CHECK(m.mean_delta == 0.0);
}

TEST_CASE("ppo_update: constant advantages move parameters only via diversity") {
  std::mt19937_64 rng(41);
  GaussianPolicy policy = GaussianPolicy::init(kPolicyObsDim + 7, {16}, 4, rng);
  FeedForwardNet value = FeedForwardNet::init({kPolicyObsDim + 7, 16, 1}, Activation::kTanh,
                                              Activation::kIdentity, rng);

  PpoConfig cfg;
  cfg.num_envs = 4;
  cfg.rollout_steps = 8;
  cfg.minibatch = 32;
  cfg.epochs_per_batch = 1;
  cfg.diversity_weight = 0.0;  // isolates the surrogate term

  RolloutBuffer buf;
  buf.num_envs = 4;
  buf.steps = 8;
  const int total = 32;
  buf.policy_input = Eigen::MatrixXd::Random(kPolicyObsDim + 7, total);
  buf.action = Eigen::MatrixXd::Random(4, total);
  buf.latent = Eigen::MatrixXd::Zero(7, total);
  for (int c = 0; c < total; ++c)
    buf.latent.col(c) = Eigen::VectorXd::Unit(7, c % 7);
  buf.value = Eigen::VectorXd::Zero(total);
  buf.delta = Eigen::VectorXd::Zero(total);
  buf.done = Eigen::VectorXd::Ones(total);  // each step its own episode
  buf.bootstrap_value = Eigen::VectorXd::Zero(4);
  buf.log_prob.resize(total);
  for (int c = 0; c < total; ++c) {
    const Eigen::VectorXd mean = policy.mean_net.evaluate(Eigen::VectorXd(buf.policy_input.col(c)));
    buf.log_prob[c] = gaussian_log_prob(mean, policy.log_std, buf.action.col(c));
  }
  // Constant rewards + zero values + per-step episodes: every advantage
  // equals the same constant, so normalization yields exact zeros.
  const Eigen::VectorXd rewards = Eigen::VectorXd::Constant(total, 0.7);

  AdamState popt(policy.parameter_count(), AdamConfig{});
  AdamState vopt(value.parameter_count(), AdamConfig{});
  const Eigen::VectorXd before = policy.parameters();
  std::mt19937_64 shuffle(1), div(2);
  ppo_update(policy, popt, value, vopt, buf, rewards, cfg, kPolicyObsDim, shuffle, div);
  CHECK(policy.parameters() == before);  // bitwise: zero gradient, zero Adam step

  // Re-enable diversity: now parameters must move.
  cfg.diversity_weight = 0.01;
  ppo_update(policy, popt, value, vopt, buf, rewards, cfg, kPolicyObsDim, shuffle, div);
  CHECK(policy.parameters() != before);
}

TEST_CASE("ppo_update: value loss decreases over repeated updates on a fixed buffer") {
  std::mt19937_64 rng(43);
  GaussianPolicy policy = GaussianPolicy::init(6, {16}, 2, rng);
  FeedForwardNet value =
      FeedForwardNet::init({6, 32, 1}, Activation::kTanh, Activation::kIdentity, rng);

  PpoConfig cfg;
  cfg.num_envs = 4;
  cfg.rollout_steps = 16;
  cfg.minibatch = 64;
  cfg.epochs_per_batch = 1;
  cfg.diversity_weight = 0.0;
  cfg.learning_rate = 1e-2;

  RolloutBuffer buf;
  buf.num_envs = 4;
  buf.steps = 16;
  const int total = 64;
  buf.policy_input = Eigen::MatrixXd::Random(6, total);
  buf.action = Eigen::MatrixXd::Random(2, total);
  buf.latent = Eigen::MatrixXd::Zero(0, total);
  buf.value = Eigen::VectorXd::Zero(total);
  buf.delta = Eigen::VectorXd::Zero(total);
  buf.done = Eigen::VectorXd::Zero(total);
  buf.bootstrap_value = Eigen::VectorXd::Zero(4);
  buf.log_prob.resize(total);
  for (int c = 0; c < total; ++c) {
    const Eigen::VectorXd mean = policy.mean_net.evaluate(Eigen::VectorXd(buf.policy_input.col(c)));
    buf.log_prob[c] = gaussian_log_prob(mean, policy.log_std, buf.action.col(c));
  }
  Eigen::VectorXd rewards(total);
  for (int c = 0; c < total; ++c) rewards[c] = std::sin(0.3 * c);

  AdamState popt(policy.parameter_count(), AdamConfig{});
  AdamConfig vcfg;
  vcfg.learning_rate = 1e-2;
  AdamState vopt(value.parameter_count(), vcfg);
  std::mt19937_64 shuffle(1), div(2);
  double first = 0.0, last = 0.0;
  for (int it = 0; it < 30; ++it) {
    const PpoStats stats =
        ppo_update(policy, popt, value, vopt, buf, rewards, cfg, 0, shuffle, div);
    if (it == 0) first = stats.value_loss;
    last = stats.value_loss;
  }
  CHECK(last < first);
}

TEST_CASE("low-level smoke: five epochs produce well-formed metrics") {
  LowLevelConfig cfg = tiny_low_config(23);
  cfg.cat_enabled = true;
  LowLevelTrainer trainer(cfg, tiny_dataset(23));
  for (int e = 1; e <= 5; ++e) {
    const EpochMetrics m = trainer.run_epoch();
    CHECK(m.epoch == e);
    CHECK(std::isfinite(m.mean_rd));
    CHECK(std::isfinite(m.mean_re));
    CHECK(std::isfinite(m.disc_loss));
    CHECK(m.disc_score_policy > 0.0);
    CHECK(m.disc_score_policy < 1.0);
    CHECK(m.violation_frac >= 0.0);
    CHECK(m.violation_frac <= 1.0);
    const std::string row = metrics_csv_row(m);
    CHECK(row.find("epoch") == std::string::npos);
    CHECK(std::count(row.begin(), row.end(), ',') == 10);
  }
  const LowLevelDiagnostics diag = trainer.diagnostics();
  CHECK(std::isfinite(diag.encoder_alignment_true));
  CHECK(std::isfinite(diag.encoder_alignment_shuffled));
}

TEST_CASE("high-level training: frozen low-level parameters stay bitwise equal") {
  LowLevelConfig low_cfg = tiny_low_config(29);
  LowLevelTrainer low(low_cfg, tiny_dataset(29));
  low.run_epoch();

  HighLevelConfig cfg;
  cfg.seed = 30;
  cfg.ppo.num_envs = 8;
  cfg.ppo.rollout_steps = 8;
  cfg.ppo.minibatch = 64;
  cfg.ppo.epochs_per_batch = 2;
  cfg.policy_hidden = {32};
  cfg.value_hidden = {32};
  cfg.task.episode_steps = 40;

  const Eigen::VectorXd frozen = low.policy().parameters();
  HighLevelTrainer high(cfg, low.policy());
  for (int e = 0; e < 2; ++e) {
    const EpochMetrics m = high.run_epoch();
    CHECK(std::isfinite(m.episode_return));
    CHECK(m.mean_delta == 0.0);
  }
  CHECK(high.low_level_policy().parameters() == frozen);
  for (const Eigen::VectorXd& z : high.current_latents())
    CHECK(std::abs(z.norm() - 1.0) < 1e-9);
}

namespace {

// Scripted PD controller: drives the base to a comfortable arm radius from
// the target, then tracks the closed-form IK solution.
class PdOracleController : public ReachController {
 public:
  explicit PdOracleController(const EnvConfig& env) : env_(env) {}

  void reset(const Eigen::Vector2d& target) override { target_ = target; }

  Eigen::Vector4d act(const EnvState& state, int /*step*/) override {
    // Approach from -x so the settled arm pose is far from joint limits.
    const Eigen::Vector2d base_goal = target_ - Eigen::Vector2d(0.6, 0.0);

    Eigen::Vector4d action;
    action.head<2>() =
        (3.0 * (base_goal - state.base_pos) - 3.5 * state.base_vel) / env_.base_accel_scale;

    const Eigen::Vector2d arm_target = target_ - state.base_pos;
    auto [ok, q] = two_link_ik(arm_target, env_);
    if (!ok) q = env_.joint_neutral;
    action.tail<2>() =
        (60.0 * (q - state.joint_pos) - 8.0 * state.joint_vel) / env_.joint_accel_scale;
    return action.cwiseMax(-1.0).cwiseMin(1.0);
  }

 private:
  EnvConfig env_;
  Eigen::Vector2d target_ = Eigen::Vector2d::Zero();
};

}  // namespace

TEST_CASE("evaluate: scripted oracle controller validates the metric") {
  EnvConfig env;
  TaskSpec task;
  PdOracleController oracle(env);
  const EvalReport report = evaluate(oracle, env, task, {ConstraintDef{}}, 16, 99);
  REQUIRE(report.episodes.size() == 16);
  for (const EvalEpisode& ep : report.episodes) CHECK(ep.final_error < 0.05);
  CHECK(report.mean_error < 0.05);
  CHECK(report.success_fraction(0.1) == 1.0);
}

TEST_CASE("evaluate: deterministic and correctly sized") {
  EnvConfig env;
  TaskSpec task;
  PdOracleController oracle(env);
  const EvalReport a = evaluate(oracle, env, task, {ConstraintDef{}}, 4, 7);
  const EvalReport b = evaluate(oracle, env, task, {ConstraintDef{}}, 4, 7);
  REQUIRE(a.episodes.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(a.episodes[i].final_error == b.episodes[i].final_error);
    CHECK(a.episodes[i].violation_frac == b.episodes[i].violation_frac);
  }
}
