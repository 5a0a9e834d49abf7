#include "lsail/runconfig.hpp"

#include <fstream>
#include <stdexcept>

namespace lsail {

using nlohmann::json;

namespace {

json ppo_to_json(const PpoConfig& p) {
  json j;
  j["gamma"] = p.gamma;
  j["gae_lambda"] = p.gae_lambda;
  j["clip"] = p.clip;
  j["epochs_per_batch"] = p.epochs_per_batch;
  j["minibatch"] = p.minibatch;
  j["learning_rate"] = p.learning_rate;
  j["entropy_bonus"] = p.entropy_bonus;
  j["rollout_steps"] = p.rollout_steps;
  j["num_envs"] = p.num_envs;
  j["skill_reward_beta"] = p.skill_reward_beta;
  j["diversity_weight"] = p.diversity_weight;
  j["diversity_subsample"] = p.diversity_subsample;
  j["kl_abort"] = p.kl_abort;
  return j;
}

void ppo_from_json(const json& j, PpoConfig& p) {
  p.gamma = j.value("gamma", p.gamma);
  p.gae_lambda = j.value("gae_lambda", p.gae_lambda);
  p.clip = j.value("clip", p.clip);
  p.epochs_per_batch = j.value("epochs_per_batch", p.epochs_per_batch);
  p.minibatch = j.value("minibatch", p.minibatch);
  p.learning_rate = j.value("learning_rate", p.learning_rate);
  p.entropy_bonus = j.value("entropy_bonus", p.entropy_bonus);
  p.rollout_steps = j.value("rollout_steps", p.rollout_steps);
  p.num_envs = j.value("num_envs", p.num_envs);
  p.skill_reward_beta = j.value("skill_reward_beta", p.skill_reward_beta);
  p.diversity_weight = j.value("diversity_weight", p.diversity_weight);
  p.diversity_subsample = j.value("diversity_subsample", p.diversity_subsample);
  p.kl_abort = j.value("kl_abort", p.kl_abort);
}

json env_to_json(const EnvConfig& e) {
  json j;
  j["dt"] = e.dt;
  j["link1"] = e.link1;
  j["link2"] = e.link2;
  j["base_accel_scale"] = e.base_accel_scale;
  j["joint_accel_scale"] = e.joint_accel_scale;
  j["joint_neutral"] = {e.joint_neutral.x(), e.joint_neutral.y()};
  j["accel_limit"] = e.accel_limit;
  j["episode_steps"] = e.episode_steps;
  j["base_speed_max"] = e.base_speed_max;
  j["joint_angle_max"] = e.joint_angle_max;
  j["joint_speed_max"] = e.joint_speed_max;
  j["observation_noise"] = e.observation_noise;
  j["observation_noise_mag"] = e.observation_noise_mag;
  return j;
}

void env_from_json(const json& j, EnvConfig& e) {
  e.dt = j.value("dt", e.dt);
  e.link1 = j.value("link1", e.link1);
  e.link2 = j.value("link2", e.link2);
  e.base_accel_scale = j.value("base_accel_scale", e.base_accel_scale);
  e.joint_accel_scale = j.value("joint_accel_scale", e.joint_accel_scale);
  if (j.contains("joint_neutral"))
    e.joint_neutral = Eigen::Vector2d(j["joint_neutral"][0].get<double>(),
                                      j["joint_neutral"][1].get<double>());
  e.accel_limit = j.value("accel_limit", e.accel_limit);
  e.episode_steps = j.value("episode_steps", e.episode_steps);
  e.base_speed_max = j.value("base_speed_max", e.base_speed_max);
  e.joint_angle_max = j.value("joint_angle_max", e.joint_angle_max);
  e.joint_speed_max = j.value("joint_speed_max", e.joint_speed_max);
  e.observation_noise = j.value("observation_noise", e.observation_noise);
  e.observation_noise_mag = j.value("observation_noise_mag", e.observation_noise_mag);
}

json hidden_to_json(const std::vector<int>& h) { return json(h); }

}  // namespace

void RunConfig::sync() {
  low.seed = seed;
  low.env = env;
  low.discriminator = discriminator;
  low.cat_enabled = cat_enabled;
  low.constraints = constraints;

  high.seed = seed;
  high.env = env;
  high.latent_dim = low.latent_dim;
  high.task.episode_steps = env.episode_steps;
}

json RunConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["dataset"] = dataset_path;
  j["out_dir"] = out_dir;
  j["threads"] = threads;
  j["env"] = env_to_json(env);
  j["discriminator"] = to_string(discriminator);
  j["cat"] = {{"enabled", cat_enabled}};
  json cons = json::object();
  for (const ConstraintDef& c : constraints) {
    cons[c.name] = {{"limit", c.limit},
                    {"final_pmax", c.final_pmax},
                    {"ramp_start_fraction", c.ramp_start_fraction}};
  }
  j["constraints"] = std::move(cons);

  json low_j;
  low_j["epochs"] = low.epochs;  // paper scale: 7000 epochs
  low_j["latent_dim"] = low.latent_dim;
  low_j["kappa"] = low.kappa;
  low_j["latent_resample_steps"] = low.latent_resample_steps;
  low_j["policy_hidden"] = hidden_to_json(low.policy_hidden);
  low_j["value_hidden"] = hidden_to_json(low.value_hidden);
  low_j["encoder_hidden"] = hidden_to_json(low.encoder_hidden);
  low_j["disc_hidden"] = hidden_to_json(low.disc_hidden);
  low_j["disc_learning_rate"] = low.disc_learning_rate;
  low_j["disc_weight_decay"] = low.disc_weight_decay;
  low_j["disc_passes"] = low.disc_passes;
  low_j["disc_batch"] = low.disc_batch;
  low_j["encoder_passes"] = low.encoder_passes;
  low_j["encoder_batch"] = low.encoder_batch;
  low_j["encoder_learning_rate"] = low.encoder_learning_rate;
  low_j["ppo"] = ppo_to_json(low.ppo);
  j["low"] = std::move(low_j);

  json high_j;
  high_j["epochs"] = high.epochs;  // paper scale: 2000 epochs
  high_j["policy_hidden"] = hidden_to_json(high.policy_hidden);
  high_j["value_hidden"] = hidden_to_json(high.value_hidden);
  high_j["annulus"] = {high.task.annulus_min, high.task.annulus_max};
  high_j["latent_period"] = high.task.latent_period;
  high_j["ppo"] = ppo_to_json(high.ppo);
  j["high"] = std::move(high_j);

  j["checkpoint_every"] = checkpoint_every;
  j["eval_episodes"] = eval_episodes;
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig cfg;
  cfg.seed = j.value("seed", cfg.seed);
  cfg.dataset_path = j.value("dataset", cfg.dataset_path);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  cfg.threads = j.value("threads", cfg.threads);
  if (j.contains("env")) env_from_json(j["env"], cfg.env);
  if (j.contains("discriminator"))
    cfg.discriminator = discriminator_kind_from_string(j["discriminator"].get<std::string>());
  if (j.contains("cat")) cfg.cat_enabled = j["cat"].value("enabled", cfg.cat_enabled);
  if (j.contains("constraints")) {
    cfg.constraints.clear();
    for (const auto& [name, spec] : j["constraints"].items()) {
      ConstraintDef def;
      def.name = name;
      def.limit = spec.value("limit", def.limit);
      def.final_pmax = spec.value("final_pmax", def.final_pmax);
      def.ramp_start_fraction = spec.value("ramp_start_fraction", def.ramp_start_fraction);
      cfg.constraints.push_back(def);
    }
  }
  if (j.contains("low")) {
    const json& l = j["low"];
    cfg.low.epochs = l.value("epochs", cfg.low.epochs);
    cfg.low.latent_dim = l.value("latent_dim", cfg.low.latent_dim);
    cfg.low.kappa = l.value("kappa", cfg.low.kappa);
    cfg.low.latent_resample_steps =
        l.value("latent_resample_steps", cfg.low.latent_resample_steps);
    if (l.contains("policy_hidden")) cfg.low.policy_hidden = l["policy_hidden"].get<std::vector<int>>();
    if (l.contains("value_hidden")) cfg.low.value_hidden = l["value_hidden"].get<std::vector<int>>();
    if (l.contains("encoder_hidden")) cfg.low.encoder_hidden = l["encoder_hidden"].get<std::vector<int>>();
    if (l.contains("disc_hidden")) cfg.low.disc_hidden = l["disc_hidden"].get<std::vector<int>>();
    cfg.low.disc_learning_rate = l.value("disc_learning_rate", cfg.low.disc_learning_rate);
    cfg.low.disc_weight_decay = l.value("disc_weight_decay", cfg.low.disc_weight_decay);
    cfg.low.disc_passes = l.value("disc_passes", cfg.low.disc_passes);
    cfg.low.disc_batch = l.value("disc_batch", cfg.low.disc_batch);
    cfg.low.encoder_passes = l.value("encoder_passes", cfg.low.encoder_passes);
    cfg.low.encoder_batch = l.value("encoder_batch", cfg.low.encoder_batch);
    cfg.low.encoder_learning_rate =
        l.value("encoder_learning_rate", cfg.low.encoder_learning_rate);
    if (l.contains("ppo")) ppo_from_json(l["ppo"], cfg.low.ppo);
  }
  if (j.contains("high")) {
    const json& h = j["high"];
    cfg.high.epochs = h.value("epochs", cfg.high.epochs);
    if (h.contains("policy_hidden")) cfg.high.policy_hidden = h["policy_hidden"].get<std::vector<int>>();
    if (h.contains("value_hidden")) cfg.high.value_hidden = h["value_hidden"].get<std::vector<int>>();
    if (h.contains("annulus")) {
      cfg.high.task.annulus_min = h["annulus"][0].get<double>();
      cfg.high.task.annulus_max = h["annulus"][1].get<double>();
    }
    cfg.high.task.latent_period = h.value("latent_period", cfg.high.task.latent_period);
    if (h.contains("ppo")) ppo_from_json(h["ppo"], cfg.high.ppo);
  }
  cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
  cfg.eval_episodes = j.value("eval_episodes", cfg.eval_episodes);
  cfg.sync();
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw std::invalid_argument("config: malformed JSON in '" + path + "'");
  return from_json(j);
}

void RunConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("config: cannot open '" + path + "' for writing");
  out << to_json().dump(1) << '\n';
}

std::string RunConfig::hash() const {
  const std::string text = to_json().dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace lsail
