#include "lsail/diffdisc.hpp"

#include "lsail/adversary.hpp"

#include <cmath>
#include <stdexcept>

namespace lsail {

DiffusionSchedule DiffusionSchedule::linear(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw std::invalid_argument("DiffusionSchedule::linear: steps must be >= 1");
  Eigen::VectorXd betas(steps);
  for (int t = 0; t < steps; ++t) {
    betas[t] = (steps == 1) ? beta_start
                            : beta_start + (beta_end - beta_start) * t / (steps - 1.0);
  }
  return from_betas(betas);
}

DiffusionSchedule DiffusionSchedule::from_betas(const Eigen::VectorXd& betas) {
  DiffusionSchedule s;
  s.beta = betas;
  s.alpha_bar.resize(betas.size());
  double prod = 1.0;
  for (Eigen::Index t = 0; t < betas.size(); ++t) {
    if (!(betas[t] >= 0.0 && betas[t] < 1.0))
      throw std::invalid_argument("DiffusionSchedule: beta out of [0, 1)");
    prod *= 1.0 - betas[t];
    s.alpha_bar[t] = prod;
  }
  return s;
}

double DiffusionSchedule::alpha_bar_at(int t) const {
  if (t < 1 || t > steps())
    throw std::invalid_argument("DiffusionSchedule: timestep " + std::to_string(t) +
                                " outside [1, " + std::to_string(steps()) + "]");
  return alpha_bar[t - 1];
}

Eigen::Vector2d label_encoding(TransitionSource source) {
  return source == TransitionSource::kDataset ? Eigen::Vector2d(1.0, 0.0)
                                              : Eigen::Vector2d(0.0, 1.0);
}

Eigen::VectorXd noise_transition(const DiffusionSchedule& schedule, const Eigen::VectorXd& x,
                                 int t, const Eigen::VectorXd& eps) {
  if (x.size() != eps.size())
    throw std::invalid_argument("noise_transition: x/eps dimension mismatch");
  const double ab = schedule.alpha_bar_at(t);
  return std::sqrt(ab) * x + std::sqrt(1.0 - ab) * eps;
}

std::vector<NoiseDraw> sample_noise_draws(const DiffusionSchedule& schedule, int k, int dim,
                                          std::mt19937_64& rng) {
  if (k < 1) throw std::invalid_argument("sample_noise_draws: k must be >= 1");
  std::vector<NoiseDraw> draws(k);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int steps = schedule.steps();
  for (int j = 0; j < k; ++j) {
    // Stratified timesteps: one uniform draw per stratum of [1, steps].
    const int lo = 1 + (steps * j) / k;
    const int hi = (steps * (j + 1)) / k;
    std::uniform_int_distribution<int> pick(lo, std::max(lo, hi));
    draws[j].t = pick(rng);
    draws[j].eps.resize(dim);
    for (int i = 0; i < dim; ++i) draws[j].eps[i] = normal(rng);
  }
  return draws;
}

DiffusionDiscriminator DiffusionDiscriminator::init(int transition_dim,
                                                    const std::vector<int>& hidden,
                                                    const DiffusionSchedule& schedule,
                                                    int timestep_samples,
                                                    std::mt19937_64& rng) {
  std::vector<int> dims;
  dims.push_back(2 * transition_dim + 3);  // x, noised x, t fraction, one-hot label
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(transition_dim);
  DiffusionDiscriminator d;
  d.eps_net = FeedForwardNet::init(dims, Activation::kTanh, Activation::kIdentity, rng);
  d.schedule = schedule;
  d.timestep_samples = timestep_samples;
  d.transition_dim = transition_dim;
  return d;
}

Eigen::VectorXd DiffusionDiscriminator::net_input(const Eigen::VectorXd& x,
                                                  const Eigen::VectorXd& noised, double t_frac,
                                                  const Eigen::Vector2d& label) const {
  Eigen::VectorXd in(2 * transition_dim + 3);
  in << x, noised, t_frac, label;
  return in;
}

double diffusion_loss_with_draws(const NoisePredictor& predictor,
                                 const DiffusionSchedule& schedule, const Eigen::VectorXd& x,
                                 const Eigen::Vector2d& label,
                                 const std::vector<NoiseDraw>& draws) {
  if (draws.empty()) throw std::invalid_argument("diffusion_loss_with_draws: no draws");
  double loss = 0.0;
  for (const NoiseDraw& d : draws) {
    const Eigen::VectorXd noised = noise_transition(schedule, x, d.t, d.eps);
    const double t_frac = static_cast<double>(d.t) / schedule.steps();
    loss += (predictor(x, noised, t_frac, label) - d.eps).squaredNorm();
  }
  return loss / static_cast<double>(draws.size());
}

namespace {

NoisePredictor net_predictor(const DiffusionDiscriminator& d) {
  return [&d](const Eigen::VectorXd& x, const Eigen::VectorXd& noised, double t_frac,
              const Eigen::Vector2d& label) {
    return d.eps_net.evaluate(d.net_input(x, noised, t_frac, label));
  };
}

}  // namespace

double diffusion_loss(const DiffusionDiscriminator& d, const Eigen::VectorXd& x,
                      TransitionSource label, std::mt19937_64& rng) {
  const auto draws = sample_noise_draws(d.schedule, d.timestep_samples, d.transition_dim, rng);
  return diffusion_loss_with_draws(net_predictor(d), d.schedule, x, label_encoding(label),
                                   draws);
}

double diffusion_logit_with_draws(const DiffusionDiscriminator& d, const Eigen::VectorXd& x,
                                  const std::vector<NoiseDraw>& draws,
                                  const Eigen::Vector2d& policy_label,
                                  const Eigen::Vector2d& dataset_label) {
  const NoisePredictor predictor = net_predictor(d);
  const double loss_policy =
      diffusion_loss_with_draws(predictor, d.schedule, x, policy_label, draws);
  const double loss_dataset =
      diffusion_loss_with_draws(predictor, d.schedule, x, dataset_label, draws);
  return loss_policy - loss_dataset;
}

double diffusion_discriminate_with_draws(const DiffusionDiscriminator& d,
                                         const Eigen::VectorXd& x,
                                         const std::vector<NoiseDraw>& draws) {
  return sigmoid(diffusion_logit_with_draws(d, x, draws,
                                            label_encoding(TransitionSource::kPolicy),
                                            label_encoding(TransitionSource::kDataset)));
}

double diffusion_discriminate(const DiffusionDiscriminator& d, const Eigen::VectorXd& x,
                              std::mt19937_64& rng) {
  const auto draws = sample_noise_draws(d.schedule, d.timestep_samples, d.transition_dim, rng);
  return diffusion_discriminate_with_draws(d, x, draws);
}

double diffusion_reward(const DiffusionDiscriminator& d, const Eigen::VectorXd& x,
                        std::mt19937_64& rng) {
  return reward_from_score(diffusion_discriminate(d, x, rng));
}

namespace {

// Slot-major batched evaluation shared by scoring and training. For draw
// slot j and a label, builds the (4F+3) x B input whose column b uses
// column b's own j-th draw.
Eigen::MatrixXd slot_inputs(const DiffusionDiscriminator& d, const Eigen::MatrixXd& x,
                            const std::vector<std::vector<NoiseDraw>>& draws, int slot,
                            const Eigen::Vector2d& label) {
  const Eigen::Index batch = x.cols();
  Eigen::MatrixXd in(2 * d.transition_dim + 3, batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const NoiseDraw& draw = draws[b][slot];
    in.col(b) = d.net_input(x.col(b), noise_transition(d.schedule, x.col(b), draw.t, draw.eps),
                            static_cast<double>(draw.t) / d.schedule.steps(), label);
  }
  return in;
}

// Per-column diffusion losses for one label over all slots, plus the
// residuals needed for the backward pass.
Eigen::VectorXd label_losses(const DiffusionDiscriminator& d, const Eigen::MatrixXd& x,
                             const std::vector<std::vector<NoiseDraw>>& draws,
                             const Eigen::Vector2d& label, int k,
                             std::vector<Eigen::MatrixXd>* residuals) {
  const Eigen::Index batch = x.cols();
  Eigen::VectorXd losses = Eigen::VectorXd::Zero(batch);
  for (int j = 0; j < k; ++j) {
    const Eigen::MatrixXd pred = d.eps_net.evaluate(slot_inputs(d, x, draws, j, label));
    Eigen::MatrixXd res(pred.rows(), batch);
    for (Eigen::Index b = 0; b < batch; ++b) {
      res.col(b) = pred.col(b) - draws[b][j].eps;
      losses[b] += res.col(b).squaredNorm() / k;
    }
    if (residuals) (*residuals)[j] = std::move(res);
  }
  return losses;
}

}  // namespace

Eigen::VectorXd diffusion_score_batch(const DiffusionDiscriminator& d,
                                      const Eigen::MatrixXd& transitions,
                                      std::mt19937_64& rng) {
  const Eigen::Index batch = transitions.cols();
  std::vector<std::vector<NoiseDraw>> draws(batch);
  for (Eigen::Index b = 0; b < batch; ++b)
    draws[b] = sample_noise_draws(d.schedule, d.timestep_samples, d.transition_dim, rng);

  const int k = d.timestep_samples;
  const Eigen::VectorXd loss_policy = label_losses(
      d, transitions, draws, label_encoding(TransitionSource::kPolicy), k, nullptr);
  const Eigen::VectorXd loss_dataset = label_losses(
      d, transitions, draws, label_encoding(TransitionSource::kDataset), k, nullptr);

  Eigen::VectorXd scores(batch);
  for (Eigen::Index b = 0; b < batch; ++b) scores[b] = sigmoid(loss_policy[b] - loss_dataset[b]);
  return scores;
}

DiffusionTrainResult train_diffusion_discriminator_with_draws(
    DiffusionDiscriminator& d, const Eigen::MatrixXd& dataset_batch,
    const Eigen::MatrixXd& policy_batch,
    const std::vector<std::vector<NoiseDraw>>& draws_per_column) {
  if (dataset_batch.cols() < 1 || policy_batch.cols() < 1)
    throw std::invalid_argument("train_diffusion_discriminator: both batches must be non-empty");

  const Eigen::Index nd = dataset_batch.cols();
  const Eigen::Index np = policy_batch.cols();
  const Eigen::Index batch = nd + np;
  if (static_cast<Eigen::Index>(draws_per_column.size()) != batch)
    throw std::invalid_argument("train_diffusion_discriminator: draws/batch size mismatch");

  Eigen::MatrixXd joint(dataset_batch.rows(), batch);
  joint << dataset_batch, policy_batch;

  const int k = d.timestep_samples;
  std::vector<Eigen::MatrixXd> res_policy(k), res_dataset(k);
  const Eigen::Vector2d enc_policy = label_encoding(TransitionSource::kPolicy);
  const Eigen::Vector2d enc_dataset = label_encoding(TransitionSource::kDataset);
  const Eigen::VectorXd loss_policy =
      label_losses(d, joint, draws_per_column, enc_policy, k, &res_policy);
  const Eigen::VectorXd loss_dataset =
      label_losses(d, joint, draws_per_column, enc_dataset, k, &res_dataset);

  // Cross-entropy over the classifier; target 1 for dataset columns.
  double loss = 0.0;
  Eigen::VectorXd dl_dlogit(batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const double p = sigmoid(loss_policy[b] - loss_dataset[b]);
    const double pc = clamp_score(p);
    const bool clamped = pc != p;
    const double target = b < nd ? 1.0 : 0.0;
    loss += (target > 0.5 ? -std::log(pc) : -std::log(1.0 - pc)) / static_cast<double>(batch);
    dl_dlogit[b] = clamped ? 0.0 : (p - target) / static_cast<double>(batch);
  }

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(d.eps_net.parameter_count());
  for (int j = 0; j < k; ++j) {
    // Policy-label branch (+), dataset-label branch (-).
    Eigen::MatrixXd up = res_policy[j];
    for (Eigen::Index b = 0; b < batch; ++b) up.col(b) *= dl_dlogit[b] * 2.0 / k;
    d.eps_net.forward(slot_inputs(d, joint, draws_per_column, j, enc_policy));
    grad += d.eps_net.flatten(d.eps_net.backward(up));

    up = res_dataset[j];
    for (Eigen::Index b = 0; b < batch; ++b) up.col(b) *= -dl_dlogit[b] * 2.0 / k;
    d.eps_net.forward(slot_inputs(d, joint, draws_per_column, j, enc_dataset));
    grad += d.eps_net.flatten(d.eps_net.backward(up));
  }
  return {loss, std::move(grad)};
}

DiffusionTrainResult train_diffusion_discriminator(DiffusionDiscriminator& d,
                                                   const Eigen::MatrixXd& dataset_batch,
                                                   const Eigen::MatrixXd& policy_batch,
                                                   std::mt19937_64& draws_rng) {
  const Eigen::Index batch = dataset_batch.cols() + policy_batch.cols();
  std::vector<std::vector<NoiseDraw>> draws(batch);
  for (Eigen::Index b = 0; b < batch; ++b)
    draws[b] = sample_noise_draws(d.schedule, d.timestep_samples, d.transition_dim, draws_rng);
  return train_diffusion_discriminator_with_draws(d, dataset_batch, policy_batch, draws);
}

}  // namespace lsail
