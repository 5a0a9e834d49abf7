#include "lsail/numkit.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace lsail {

double sigmoid(double x) {
  double s;
  if (x >= 0.0) {
    const double e = std::exp(-x);
    s = 1.0 / (1.0 + e);
  } else {
    const double e = std::exp(x);
    s = e / (1.0 + e);
  }
  // Keep the range open even where the exact value rounds to 0 or 1.
  const double hi = std::nextafter(1.0, 0.0);
  const double lo = std::numeric_limits<double>::min();
  return std::min(hi, std::max(lo, s));
}

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t state = seed;
  std::uint64_t s0 = splitmix64(state);
  state ^= a * 0x9e3779b97f4a7c15ull;
  std::uint64_t s1 = splitmix64(state);
  state ^= b * 0xd1b54a32d192ed03ull;
  std::uint64_t s2 = splitmix64(state);
  return std::mt19937_64(s0 ^ (s1 * 0x2545f4914f6cdd1dull) ^ s2);
}

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  throw std::invalid_argument("unknown activation: " + name);
}

std::string to_string(Activation act) {
  switch (act) {
    case Activation::kIdentity: return "identity";
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
  }
  throw std::logic_error("bad activation enum");
}

namespace {

Eigen::MatrixXd apply_activation(Activation act, const Eigen::MatrixXd& z) {
  switch (act) {
    case Activation::kIdentity: return z;
    case Activation::kTanh: return z.array().tanh().matrix();
    case Activation::kRelu: return z.cwiseMax(0.0);
  }
  throw std::logic_error("bad activation enum");
}

// Derivative expressed through the activation output, valid for the three
// supported activations (relu'(0) taken as 0).
Eigen::MatrixXd chain_activation(Activation act, const Eigen::MatrixXd& out,
                                 const Eigen::MatrixXd& upstream) {
  switch (act) {
    case Activation::kIdentity: return upstream;
    case Activation::kTanh:
      return (upstream.array() * (1.0 - out.array().square())).matrix();
    case Activation::kRelu:
      return (out.array() > 0.0).select(upstream, 0.0);
  }
  throw std::logic_error("bad activation enum");
}

}  // namespace

FeedForwardNet::FeedForwardNet(std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw std::invalid_argument("FeedForwardNet: no layers");
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const Layer& l = layers_[k];
    if (l.weight.rows() != l.bias.size())
      throw std::invalid_argument("FeedForwardNet: weight/bias shape mismatch in layer " +
                                  std::to_string(k));
    if (k > 0 && layers_[k - 1].weight.rows() != l.weight.cols())
      throw std::invalid_argument("FeedForwardNet: layer dimensions do not chain at layer " +
                                  std::to_string(k));
    if (!l.weight.allFinite() || !l.bias.allFinite())
      throw std::invalid_argument("FeedForwardNet: non-finite parameters in layer " +
                                  std::to_string(k));
  }
}

FeedForwardNet FeedForwardNet::init(const std::vector<int>& dims, Activation hidden,
                                    Activation output, std::mt19937_64& rng) {
  if (dims.size() < 2) throw std::invalid_argument("FeedForwardNet::init: need >= 2 dims");
  std::vector<Layer> layers;
  layers.reserve(dims.size() - 1);
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const int in = dims[k], out = dims[k + 1];
    if (in <= 0 || out <= 0) throw std::invalid_argument("FeedForwardNet::init: bad dims");
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Layer l;
    l.weight.resize(out, in);
    for (int i = 0; i < out; ++i)
      for (int j = 0; j < in; ++j) l.weight(i, j) = dist(rng);
    l.bias = Eigen::VectorXd::Zero(out);
    l.act = (k + 2 < dims.size()) ? hidden : output;
    layers.push_back(std::move(l));
  }
  return FeedForwardNet(std::move(layers));
}

int FeedForwardNet::input_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.cols());
}

int FeedForwardNet::output_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.back().weight.rows());
}

Eigen::MatrixXd FeedForwardNet::evaluate(const Eigen::MatrixXd& x) const {
  if (x.rows() != input_dim())
    throw std::invalid_argument("FeedForwardNet::evaluate: input has " +
                                std::to_string(x.rows()) + " rows, expected " +
                                std::to_string(input_dim()));
  if (!x.allFinite()) throw std::invalid_argument("FeedForwardNet::evaluate: non-finite input");
  Eigen::MatrixXd a = x;
  for (const Layer& l : layers_) {
    Eigen::MatrixXd z = l.weight * a;
    z.colwise() += l.bias;
    a = apply_activation(l.act, z);
  }
  return a;
}

Eigen::VectorXd FeedForwardNet::evaluate(const Eigen::VectorXd& x) const {
  return evaluate(Eigen::MatrixXd(x)).col(0);
}

const Eigen::MatrixXd& FeedForwardNet::forward(const Eigen::MatrixXd& x) {
  if (x.rows() != input_dim())
    throw std::invalid_argument("FeedForwardNet::forward: input has " +
                                std::to_string(x.rows()) + " rows, expected " +
                                std::to_string(input_dim()));
  if (!x.allFinite()) throw std::invalid_argument("FeedForwardNet::forward: non-finite input");
  trace_in_.assign(layers_.size(), Eigen::MatrixXd());
  trace_out_.assign(layers_.size(), Eigen::MatrixXd());
  Eigen::MatrixXd a = x;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const Layer& l = layers_[k];
    trace_in_[k] = a;
    Eigen::MatrixXd z = l.weight * a;
    z.colwise() += l.bias;
    a = apply_activation(l.act, z);
    trace_out_[k] = a;
  }
  trace_valid_ = true;
  return trace_out_.back();
}

NetGradients FeedForwardNet::backward(const Eigen::MatrixXd& upstream) const {
  if (!trace_valid_)
    throw std::runtime_error("FeedForwardNet::backward called before forward");
  if (upstream.rows() != output_dim() || upstream.cols() != trace_out_.back().cols())
    throw std::invalid_argument("FeedForwardNet::backward: upstream shape mismatch");

  NetGradients g;
  g.weight.resize(layers_.size());
  g.bias.resize(layers_.size());
  Eigen::MatrixXd grad = upstream;
  for (int k = static_cast<int>(layers_.size()) - 1; k >= 0; --k) {
    const Layer& l = layers_[k];
    Eigen::MatrixXd gz = chain_activation(l.act, trace_out_[k], grad);
    g.weight[k] = gz * trace_in_[k].transpose();
    g.bias[k] = gz.rowwise().sum();
    grad = l.weight.transpose() * gz;
  }
  g.input = grad;
  return g;
}

int FeedForwardNet::parameter_count() const {
  int n = 0;
  for (const Layer& l : layers_) n += static_cast<int>(l.weight.size() + l.bias.size());
  return n;
}

Eigen::VectorXd FeedForwardNet::parameters() const {
  Eigen::VectorXd flat(parameter_count());
  int at = 0;
  for (const Layer& l : layers_) {
    flat.segment(at, l.weight.size()) = Eigen::Map<const Eigen::VectorXd>(l.weight.data(), l.weight.size());
    at += static_cast<int>(l.weight.size());
    flat.segment(at, l.bias.size()) = l.bias;
    at += static_cast<int>(l.bias.size());
  }
  return flat;
}

void FeedForwardNet::set_parameters(const Eigen::VectorXd& flat) {
  if (flat.size() != parameter_count())
    throw std::invalid_argument("FeedForwardNet::set_parameters: size mismatch");
  int at = 0;
  for (Layer& l : layers_) {
    Eigen::Map<Eigen::VectorXd>(l.weight.data(), l.weight.size()) = flat.segment(at, l.weight.size());
    at += static_cast<int>(l.weight.size());
    l.bias = flat.segment(at, l.bias.size());
    at += static_cast<int>(l.bias.size());
  }
  trace_valid_ = false;
}

double& FeedForwardNet::parameter_at(int index) {
  if (index < 0 || index >= parameter_count())
    throw std::out_of_range("FeedForwardNet::parameter_at: index out of range");
  int at = index;
  for (Layer& l : layers_) {
    if (at < l.weight.size()) return l.weight.data()[at];
    at -= static_cast<int>(l.weight.size());
    if (at < l.bias.size()) return l.bias[at];
    at -= static_cast<int>(l.bias.size());
  }
  throw std::logic_error("parameter_at: unreachable");
}

Eigen::VectorXd FeedForwardNet::flatten(const NetGradients& grads) const {
  if (grads.weight.size() != layers_.size() || grads.bias.size() != layers_.size())
    throw std::invalid_argument("FeedForwardNet::flatten: gradient layer count mismatch");
  Eigen::VectorXd flat(parameter_count());
  int at = 0;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const Eigen::MatrixXd& w = grads.weight[k];
    flat.segment(at, w.size()) = Eigen::Map<const Eigen::VectorXd>(w.data(), w.size());
    at += static_cast<int>(w.size());
    flat.segment(at, grads.bias[k].size()) = grads.bias[k];
    at += static_cast<int>(grads.bias[k].size());
  }
  return flat;
}

AdamState::AdamState(int n, AdamConfig cfg)
    : cfg_(cfg), m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)) {}

void AdamState::step(Eigen::VectorXd& params, const Eigen::VectorXd& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw std::invalid_argument("AdamState::step: size mismatch");
  for (int i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i]))
      throw std::runtime_error("adam_step: non-finite gradient at parameter index " +
                               std::to_string(i));
  }
  ++step_;
  m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grads;
  v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grads.cwiseProduct(grads);
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  params -= cfg_.learning_rate *
            ((m_ / c1).array() / ((v_ / c2).array().sqrt() + cfg_.epsilon)).matrix();
}

void apply_gradients(FeedForwardNet& net, const NetGradients& grads, AdamState& opt) {
  Eigen::VectorXd params = net.parameters();
  opt.step(params, net.flatten(grads));
  net.set_parameters(params);
}

double relative_error(double a, double b, double abs_tol) {
  const double num = std::max(0.0, std::abs(a - b) - abs_tol);
  return num / (std::abs(a) + std::abs(b) + abs_tol);
}

GradCheckReport grad_check(FeedForwardNet& net, const LossWithGrad& loss_fn,
                           double tolerance, double step,
                           const std::function<double(FeedForwardNet&)>& loss_only) {
  const auto [loss0, analytic] = loss_fn(net);
  (void)loss0;
  const int n = net.parameter_count();
  if (analytic.size() != n)
    throw std::invalid_argument("grad_check: analytic gradient size mismatch");

  auto evaluate = [&](FeedForwardNet& m) {
    return loss_only ? loss_only(m) : loss_fn(m).first;
  };

  GradCheckReport report;
  report.per_param_error.resize(n);
  for (int i = 0; i < n; ++i) {
    double& p = net.parameter_at(i);
    const double saved = p;
    p = saved + step;
    const double lp = evaluate(net);
    p = saved - step;
    const double lm = evaluate(net);
    p = saved;
    const double numeric = (lp - lm) / (2.0 * step);
    const double err = relative_error(analytic[i], numeric);
    report.per_param_error[i] = err;
    report.max_rel_error = std::max(report.max_rel_error, err);
  }
  report.pass = report.max_rel_error < tolerance;
  return report;
}

}  // namespace lsail
