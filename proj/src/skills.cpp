#include "lsail/skills.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

namespace lsail {

namespace {
constexpr double kDegenerateNorm = 1e-12;
constexpr double kSkipDistance = 1e-3;
}  // namespace

SkillLatent::SkillLatent(Eigen::VectorXd z) : z_(std::move(z)) {
  if (std::abs(z_.norm() - 1.0) > 1e-9)
    throw std::invalid_argument("SkillLatent: vector is not unit norm");
}

SkillLatent SkillLatent::normalized(const Eigen::VectorXd& raw) {
  const double n = raw.norm();
  if (!(n >= kDegenerateNorm))
    throw std::invalid_argument("SkillLatent::normalized: degenerate norm");
  return SkillLatent(raw / n);
}

SkillLatent sample_latent(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (;;) {
    Eigen::VectorXd z(dim);
    for (int i = 0; i < dim; ++i) z[i] = normal(rng);
    const double n = z.norm();
    if (n >= kDegenerateNorm) return SkillLatent(z / n);
  }
}

SkillLatent project_latent(const Eigen::VectorXd& raw, const SkillLatent& held) {
  if (!raw.allFinite()) throw std::invalid_argument("project_latent: non-finite input");
  if (raw.size() != held.dim())
    throw std::invalid_argument("project_latent: dimension mismatch");
  const double n = raw.norm();
  if (n < kDegenerateNorm) {
    std::cerr << "[lsail] project_latent: near-zero latent, holding previous value\n";
    return held;
  }
  return SkillLatent(raw / n);
}

double cosine_distance(const Eigen::VectorXd& z1, const Eigen::VectorXd& z2) {
  return 0.5 * (1.0 - z1.dot(z2));
}

SkillEncoder SkillEncoder::init(int transition_dim, const std::vector<int>& hidden,
                                int latent_dim, double kappa, std::mt19937_64& rng) {
  std::vector<int> dims;
  dims.push_back(transition_dim);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(latent_dim);
  SkillEncoder enc;
  enc.mu_net = FeedForwardNet::init(dims, Activation::kTanh, Activation::kIdentity, rng);
  enc.kappa = kappa;
  return enc;
}

namespace {

Eigen::MatrixXd normalize_columns(const Eigen::MatrixXd& raw) {
  Eigen::MatrixXd out = raw;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const double n = std::max(out.col(j).norm(), kDegenerateNorm);
    out.col(j) /= n;
  }
  return out;
}

}  // namespace

Eigen::MatrixXd SkillEncoder::mean_directions(const Eigen::MatrixXd& transitions) const {
  return normalize_columns(mu_net.evaluate(transitions));
}

double skill_reward(const SkillEncoder& encoder, const Eigen::VectorXd& transition,
                    const SkillLatent& z) {
  const Eigen::VectorXd mu = encoder.mean_directions(transition).col(0);
  return encoder.kappa * mu.dot(z.vec());
}

Eigen::VectorXd skill_reward_batch(const SkillEncoder& encoder,
                                   const Eigen::MatrixXd& transitions,
                                   const Eigen::MatrixXd& latents) {
  if (transitions.cols() != latents.cols())
    throw std::invalid_argument("skill_reward_batch: batch size mismatch");
  const Eigen::MatrixXd mu = encoder.mean_directions(transitions);
  return encoder.kappa * (mu.array() * latents.array()).colwise().sum().matrix().transpose();
}

EncoderLossResult encoder_loss(SkillEncoder& encoder, const Eigen::MatrixXd& transitions,
                               const Eigen::MatrixXd& latents) {
  if (transitions.cols() != latents.cols())
    throw std::invalid_argument("encoder_loss: batch size mismatch");
  const Eigen::Index batch = transitions.cols();
  const Eigen::MatrixXd raw = encoder.mu_net.forward(transitions);

  EncoderLossResult result;
  Eigen::MatrixXd upstream(raw.rows(), raw.cols());
  double alignment = 0.0;
  for (Eigen::Index j = 0; j < batch; ++j) {
    const double n = std::max(raw.col(j).norm(), kDegenerateNorm);
    const Eigen::VectorXd mu = raw.col(j) / n;
    alignment += mu.dot(latents.col(j));
    const Eigen::VectorXd g = -(encoder.kappa / static_cast<double>(batch)) * latents.col(j);
    upstream.col(j) = (g - mu * mu.dot(g)) / n;
  }
  result.loss = -encoder.kappa * alignment / static_cast<double>(batch);
  result.grad = encoder.mu_net.flatten(encoder.mu_net.backward(upstream));
  return result;
}

DiversityLossResult diversity_loss(GaussianPolicy& policy, const Eigen::MatrixXd& observations,
                                   const Eigen::MatrixXd& z1, const Eigen::MatrixXd& z2) {
  const Eigen::Index batch = observations.cols();
  if (z1.cols() != batch || z2.cols() != batch || z1.rows() != z2.rows())
    throw std::invalid_argument("diversity_loss: batch size mismatch");

  Eigen::MatrixXd inputs1(observations.rows() + z1.rows(), batch);
  inputs1 << observations, z1;
  Eigen::MatrixXd inputs2(observations.rows() + z2.rows(), batch);
  inputs2 << observations, z2;

  const Eigen::MatrixXd mean1 = policy.mean_net.evaluate(inputs1);
  const Eigen::MatrixXd mean2 = policy.mean_net.evaluate(inputs2);
  const Eigen::ArrayXd var = (2.0 * policy.log_std.array()).exp();

  DiversityLossResult result;
  std::vector<double> dl_dkl(batch, 0.0);
  Eigen::VectorXd distances(batch);
  for (Eigen::Index j = 0; j < batch; ++j) {
    distances[j] = cosine_distance(z1.col(j), z2.col(j));
    if (distances[j] >= kSkipDistance) ++result.pairs_kept;
  }
  if (result.pairs_kept == 0) {
    std::cerr << "[lsail] diversity_loss: all latent pairs near-identical, skipping\n";
    result.all_skipped = true;
    result.policy_grad = Eigen::VectorXd::Zero(policy.parameter_count());
    return result;
  }

  const double m = static_cast<double>(result.pairs_kept);
  Eigen::MatrixXd up1 = Eigen::MatrixXd::Zero(mean1.rows(), batch);
  Eigen::VectorXd log_std_grad = Eigen::VectorXd::Zero(policy.log_std.size());
  for (Eigen::Index j = 0; j < batch; ++j) {
    if (distances[j] < kSkipDistance) continue;
    const Eigen::ArrayXd diff = (mean1.col(j) - mean2.col(j)).array();
    const Eigen::ArrayXd ratio = diff.square() / var;
    const double kl = 0.5 * ratio.sum();
    const double term = kl / distances[j] - 1.0;
    result.loss += term * term / m;
    dl_dkl[j] = 2.0 * term / (distances[j] * m);
    up1.col(j) = dl_dkl[j] * (diff / var).matrix();
    log_std_grad.array() += dl_dkl[j] * (-ratio);
  }

  policy.mean_net.forward(inputs1);
  NetGradients g1 = policy.mean_net.backward(up1);
  policy.mean_net.forward(inputs2);
  NetGradients g2 = policy.mean_net.backward(-up1);
  const Eigen::VectorXd net_grad =
      policy.mean_net.flatten(g1) + policy.mean_net.flatten(g2);

  result.policy_grad.resize(policy.parameter_count());
  result.policy_grad.head(net_grad.size()) = net_grad;
  result.policy_grad.tail(log_std_grad.size()) = log_std_grad;
  return result;
}

}  // namespace lsail
