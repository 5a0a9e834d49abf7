#include "lsail/adversary.hpp"

#include <cmath>
#include <stdexcept>

namespace lsail {

double clamp_score(double d) {
  return std::min(1.0 - kScoreClamp, std::max(kScoreClamp, d));
}

double reward_from_score(double d) {
  return -std::log(1.0 - clamp_score(d));
}

GanDiscriminator GanDiscriminator::init(int transition_dim, const std::vector<int>& hidden,
                                        double weight_decay, std::mt19937_64& rng) {
  std::vector<int> dims;
  dims.push_back(transition_dim);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(1);
  GanDiscriminator d;
  d.net = FeedForwardNet::init(dims, Activation::kTanh, Activation::kIdentity, rng);
  d.weight_decay = weight_decay;
  return d;
}

double discriminate(const GanDiscriminator& d, const Eigen::VectorXd& transition) {
  return sigmoid(d.net.evaluate(transition)[0]);
}

Eigen::VectorXd discriminate_batch(const GanDiscriminator& d,
                                   const Eigen::MatrixXd& transitions) {
  const Eigen::MatrixXd logits = d.net.evaluate(transitions);
  Eigen::VectorXd out(transitions.cols());
  for (Eigen::Index j = 0; j < out.size(); ++j) out[j] = sigmoid(logits(0, j));
  return out;
}

GanLossResult gan_loss(GanDiscriminator& d, const Eigen::MatrixXd& dataset_batch,
                       const Eigen::MatrixXd& policy_batch) {
  if (dataset_batch.cols() < 1 || policy_batch.cols() < 1)
    throw std::invalid_argument("gan_loss: both batches must be non-empty");

  const Eigen::Index nd = dataset_batch.cols();
  const Eigen::Index np = policy_batch.cols();
  Eigen::MatrixXd joint(dataset_batch.rows(), nd + np);
  joint << dataset_batch, policy_batch;

  const Eigen::MatrixXd logits = d.net.forward(joint);
  Eigen::MatrixXd upstream(1, nd + np);
  double loss = 0.0;
  for (Eigen::Index j = 0; j < nd + np; ++j) {
    const double p = sigmoid(logits(0, j));
    const double pc = clamp_score(p);
    const bool clamped = pc != p;
    if (j < nd) {
      loss += -std::log(pc) / static_cast<double>(nd);
      upstream(0, j) = clamped ? 0.0 : -(1.0 - p) / static_cast<double>(nd);
    } else {
      loss += -std::log(1.0 - pc) / static_cast<double>(np);
      upstream(0, j) = clamped ? 0.0 : p / static_cast<double>(np);
    }
  }

  NetGradients grads = d.net.backward(upstream);
  for (std::size_t k = 0; k < d.net.layers().size(); ++k) {
    const Eigen::MatrixXd& w = d.net.layers()[k].weight;
    loss += d.weight_decay * w.squaredNorm();
    grads.weight[k] += 2.0 * d.weight_decay * w;
  }

  return {loss, d.net.flatten(grads)};
}

double gan_reward(const GanDiscriminator& d, const Eigen::VectorXd& transition) {
  return reward_from_score(discriminate(d, transition));
}

Eigen::VectorXd gan_reward_batch(const GanDiscriminator& d, const Eigen::MatrixXd& transitions) {
  Eigen::VectorXd scores = discriminate_batch(d, transitions);
  for (Eigen::Index j = 0; j < scores.size(); ++j) scores[j] = reward_from_score(scores[j]);
  return scores;
}

}  // namespace lsail
