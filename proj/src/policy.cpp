#include "lsail/policy.hpp"

#include <cmath>
#include <stdexcept>

namespace lsail {

namespace {
constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * log(2*pi)
}

GaussianPolicy GaussianPolicy::init(int input_dim, const std::vector<int>& hidden,
                                    int action_dim, std::mt19937_64& rng) {
  std::vector<int> dims;
  dims.push_back(input_dim);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(action_dim);
  GaussianPolicy p;
  p.mean_net = FeedForwardNet::init(dims, Activation::kTanh, Activation::kIdentity, rng);
  p.log_std = Eigen::VectorXd::Constant(action_dim, std::log(0.5));
  return p;
}

int GaussianPolicy::parameter_count() const {
  return mean_net.parameter_count() + static_cast<int>(log_std.size());
}

Eigen::VectorXd GaussianPolicy::parameters() const {
  Eigen::VectorXd flat(parameter_count());
  flat.head(mean_net.parameter_count()) = mean_net.parameters();
  flat.tail(log_std.size()) = log_std;
  return flat;
}

void GaussianPolicy::set_parameters(const Eigen::VectorXd& flat) {
  if (flat.size() != parameter_count())
    throw std::invalid_argument("GaussianPolicy::set_parameters: size mismatch");
  mean_net.set_parameters(flat.head(mean_net.parameter_count()));
  log_std = flat.tail(log_std.size());
}

Eigen::VectorXd sample_action(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_std,
                              std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd a(mean.size());
  for (Eigen::Index i = 0; i < mean.size(); ++i)
    a[i] = mean[i] + std::exp(log_std[i]) * normal(rng);
  return a;
}

double gaussian_log_prob(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_std,
                         const Eigen::VectorXd& action) {
  double lp = 0.0;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    const double z = (action[i] - mean[i]) * std::exp(-log_std[i]);
    lp += -0.5 * z * z - log_std[i] - kHalfLog2Pi;
  }
  return lp;
}

Eigen::VectorXd gaussian_log_prob_batch(const Eigen::MatrixXd& means,
                                        const Eigen::VectorXd& log_std,
                                        const Eigen::MatrixXd& actions) {
  if (means.rows() != log_std.size() || means.cols() != actions.cols() ||
      means.rows() != actions.rows())
    throw std::invalid_argument("gaussian_log_prob_batch: shape mismatch");
  const Eigen::ArrayXd inv_std = (-log_std.array()).exp();
  const Eigen::ArrayXXd z = (actions - means).array().colwise() * inv_std;
  const double offset = log_std.sum() + kHalfLog2Pi * static_cast<double>(log_std.size());
  return (-0.5 * z.square().colwise().sum() - offset).matrix().transpose();
}

double gaussian_entropy(const Eigen::VectorXd& log_std) {
  return log_std.sum() + 0.5 * static_cast<double>(log_std.size()) * (1.0 + 2.0 * kHalfLog2Pi);
}

double gaussian_kl_shared_std(const Eigen::VectorXd& mean1, const Eigen::VectorXd& mean2,
                              const Eigen::VectorXd& log_std) {
  const Eigen::ArrayXd diff = (mean1 - mean2).array();
  const Eigen::ArrayXd var = (2.0 * log_std.array()).exp();
  return 0.5 * (diff.square() / var).sum();
}

}  // namespace lsail
