#include "lsail/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

namespace lsail {

using nlohmann::json;

json net_to_json(const FeedForwardNet& net) {
  json layers = json::array();
  for (const Layer& l : net.layers()) {
    json layer;
    layer["in"] = l.weight.cols();
    layer["out"] = l.weight.rows();
    layer["activation"] = to_string(l.act);
    json w = json::array();
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.push_back(l.weight(r, c));
    layer["weight"] = std::move(w);
    json b = json::array();
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) b.push_back(l.bias[r]);
    layer["bias"] = std::move(b);
    layers.push_back(std::move(layer));
  }
  return layers;
}

FeedForwardNet net_from_json(const json& j) {
  if (!j.is_array() || j.empty())
    throw std::runtime_error("checkpoint: 'layers' must be a non-empty array");
  std::vector<Layer> layers;
  for (const json& layer : j) {
    const int in = layer.at("in").get<int>();
    const int out = layer.at("out").get<int>();
    const auto& w = layer.at("weight");
    const auto& b = layer.at("bias");
    if (static_cast<int>(w.size()) != in * out)
      throw std::runtime_error("checkpoint: weight count does not match declared shape");
    if (static_cast<int>(b.size()) != out)
      throw std::runtime_error("checkpoint: bias count does not match declared shape");
    Layer l;
    l.act = activation_from_string(layer.at("activation").get<std::string>());
    l.weight.resize(out, in);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) l.weight(r, c) = w[r * in + c].get<double>();
    l.bias.resize(out);
    for (int r = 0; r < out; ++r) l.bias[r] = b[r].get<double>();
    layers.push_back(std::move(l));
  }
  return FeedForwardNet(std::move(layers));
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  json j;
  j["version"] = ckpt.version;
  j["component"] = ckpt.component;
  j["epoch"] = ckpt.epoch;
  j["config_hash"] = ckpt.config_hash;
  j["hyperparameters"] = ckpt.hyperparameters;
  j["layers"] = net_to_json(ckpt.net);
  j["extra"] = ckpt.extra;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open '" + path + "'");
  out << j.dump(1) << '\n';
  if (!out) throw std::runtime_error("save_checkpoint: write to '" + path + "' failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open '" + path + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw std::runtime_error("load_checkpoint: malformed '" + path + "'");
  Checkpoint ckpt;
  ckpt.version = j.value("version", -1);
  if (ckpt.version != 1)
    throw std::runtime_error("load_checkpoint: unrecognized version in '" + path + "'");
  ckpt.component = j.at("component").get<std::string>();
  ckpt.epoch = j.at("epoch").get<int>();
  ckpt.config_hash = j.value("config_hash", "");
  ckpt.hyperparameters = j.value("hyperparameters", json::object());
  ckpt.net = net_from_json(j.at("layers"));
  ckpt.extra = j.value("extra", json::object());
  return ckpt;
}

Checkpoint make_policy_checkpoint(const GaussianPolicy& policy, const std::string& component,
                                  int epoch, const std::string& config_hash) {
  Checkpoint ckpt;
  ckpt.component = component;
  ckpt.epoch = epoch;
  ckpt.config_hash = config_hash;
  ckpt.net = policy.mean_net;
  ckpt.hyperparameters["input_dim"] = policy.input_dim();
  ckpt.hyperparameters["action_dim"] = policy.action_dim();
  json ls = json::array();
  for (Eigen::Index i = 0; i < policy.log_std.size(); ++i) ls.push_back(policy.log_std[i]);
  ckpt.extra["log_std"] = std::move(ls);
  return ckpt;
}

GaussianPolicy policy_from_checkpoint(const Checkpoint& ckpt, const std::string& component) {
  if (ckpt.component != component)
    throw std::runtime_error("checkpoint component is '" + ckpt.component + "', expected '" +
                             component + "'");
  GaussianPolicy policy;
  policy.mean_net = ckpt.net;
  const auto& ls = ckpt.extra.at("log_std");
  policy.log_std.resize(ls.size());
  for (std::size_t i = 0; i < ls.size(); ++i) policy.log_std[i] = ls[i].get<double>();
  if (policy.log_std.size() != policy.mean_net.output_dim())
    throw std::runtime_error("checkpoint: log_std size does not match the action dimension");
  return policy;
}

Checkpoint make_value_checkpoint(const FeedForwardNet& net, int epoch,
                                 const std::string& config_hash) {
  Checkpoint ckpt;
  ckpt.component = "value";
  ckpt.epoch = epoch;
  ckpt.config_hash = config_hash;
  ckpt.net = net;
  return ckpt;
}

Checkpoint make_gan_checkpoint(const GanDiscriminator& d, int epoch,
                               const std::string& config_hash) {
  Checkpoint ckpt;
  ckpt.component = "gan";
  ckpt.epoch = epoch;
  ckpt.config_hash = config_hash;
  ckpt.net = d.net;
  ckpt.hyperparameters["weight_decay"] = d.weight_decay;
  return ckpt;
}

GanDiscriminator gan_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.component != "gan") throw std::runtime_error("expected a 'gan' checkpoint");
  GanDiscriminator d;
  d.net = ckpt.net;
  d.weight_decay = ckpt.hyperparameters.value("weight_decay", 1e-4);
  return d;
}

Checkpoint make_diffusion_checkpoint(const DiffusionDiscriminator& d, int epoch,
                                     const std::string& config_hash) {
  Checkpoint ckpt;
  ckpt.component = "diffusion";
  ckpt.epoch = epoch;
  ckpt.config_hash = config_hash;
  ckpt.net = d.eps_net;
  ckpt.hyperparameters["timestep_samples"] = d.timestep_samples;
  ckpt.hyperparameters["transition_dim"] = d.transition_dim;
  json betas = json::array();
  for (Eigen::Index i = 0; i < d.schedule.beta.size(); ++i) betas.push_back(d.schedule.beta[i]);
  ckpt.hyperparameters["betas"] = std::move(betas);
  return ckpt;
}

DiffusionDiscriminator diffusion_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.component != "diffusion") throw std::runtime_error("expected a 'diffusion' checkpoint");
  DiffusionDiscriminator d;
  d.eps_net = ckpt.net;
  d.timestep_samples = ckpt.hyperparameters.at("timestep_samples").get<int>();
  d.transition_dim = ckpt.hyperparameters.at("transition_dim").get<int>();
  const auto& betas = ckpt.hyperparameters.at("betas");
  Eigen::VectorXd b(betas.size());
  for (std::size_t i = 0; i < betas.size(); ++i) b[i] = betas[i].get<double>();
  d.schedule = DiffusionSchedule::from_betas(b);
  return d;
}

Checkpoint make_encoder_checkpoint(const SkillEncoder& enc, int epoch,
                                   const std::string& config_hash) {
  Checkpoint ckpt;
  ckpt.component = "encoder";
  ckpt.epoch = epoch;
  ckpt.config_hash = config_hash;
  ckpt.net = enc.mu_net;
  ckpt.hyperparameters["kappa"] = enc.kappa;
  return ckpt;
}

SkillEncoder encoder_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.component != "encoder") throw std::runtime_error("expected an 'encoder' checkpoint");
  SkillEncoder enc;
  enc.mu_net = ckpt.net;
  enc.kappa = ckpt.hyperparameters.at("kappa").get<double>();
  return enc;
}

}  // namespace lsail
