#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace lsail {

/// Numerically stable logistic function. sigmoid(0) == 0.5 and
/// sigmoid(-x) == 1 - sigmoid(x) up to rounding.
double sigmoid(double x);

/// Derives an independent RNG stream from a master seed and up to two
/// stream indices (splitmix64 mixing). Fixed indexing keeps parallel
/// consumers reproducible.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

enum class Activation { kIdentity, kTanh, kRelu };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation act);

struct Layer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
  Activation act = Activation::kIdentity;
};

/// Gradients of a scalar objective with respect to every layer parameter
/// and the forward input (one column per batch sample).
struct NetGradients {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;
  Eigen::MatrixXd input;
};

/// Plain fully connected network, double precision throughout.
/// Samples are columns; evaluate() is const and safe to call from
/// parallel readers, forward()/backward() record and consume a trace.
class FeedForwardNet {
 public:
  FeedForwardNet() = default;
  explicit FeedForwardNet(std::vector<Layer> layers);

  /// Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases.
  static FeedForwardNet init(const std::vector<int>& dims, Activation hidden,
                             Activation output, std::mt19937_64& rng);

  int input_dim() const;
  int output_dim() const;
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  Eigen::MatrixXd evaluate(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd evaluate(const Eigen::VectorXd& x) const;

  /// Forward pass recording intermediate activations for backward().
  const Eigen::MatrixXd& forward(const Eigen::MatrixXd& x);

  /// Exact reverse-mode gradients of <upstream, output> summed over the
  /// batch. Throws if no forward trace is available.
  NetGradients backward(const Eigen::MatrixXd& upstream) const;

  int parameter_count() const;
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& flat);
  double& parameter_at(int index);
  Eigen::VectorXd flatten(const NetGradients& grads) const;

 private:
  std::vector<Layer> layers_;
  std::vector<Eigen::MatrixXd> trace_in_;
  std::vector<Eigen::MatrixXd> trace_out_;
  bool trace_valid_ = false;
};

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam over a flat parameter vector.
class AdamState {
 public:
  AdamState() = default;
  AdamState(int n, AdamConfig cfg);

  /// Applies one update in place. Throws on non-finite gradient entries,
  /// naming the offending parameter index.
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grads);

  std::int64_t step_count() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::int64_t step_ = 0;
  Eigen::VectorXd m_, v_;
};

/// Flattens grads and applies one Adam step to the network parameters.
void apply_gradients(FeedForwardNet& net, const NetGradients& grads, AdamState& opt);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::vector<double> per_param_error;
  bool pass = false;
};

/// Objective handle for gradient checking: returns the scalar loss and the
/// analytic gradient in parameters() layout. Must be deterministic.
using LossWithGrad = std::function<std::pair<double, Eigen::VectorXd>(FeedForwardNet&)>;

/// Central finite differences over every parameter against the analytic
/// gradient. pass == (max_rel_error < tolerance). When `loss_only` is
/// given it is used for the perturbed evaluations, skipping redundant
/// gradient work.
GradCheckReport grad_check(FeedForwardNet& net, const LossWithGrad& loss_fn,
                           double tolerance, double step = 1e-5,
                           const std::function<double(FeedForwardNet&)>& loss_only = nullptr);

/// Relative error with an absolute floor so that near-zero pairs compare
/// as equal: max(0, |a-b| - abs_tol) / (|a| + |b| + abs_tol).
double relative_error(double a, double b, double abs_tol = 1e-10);

}  // namespace lsail
