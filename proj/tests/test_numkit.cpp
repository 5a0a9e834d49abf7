#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lsail/numkit.hpp"

#include <cmath>
#include <random>

using namespace lsail;

namespace {

FeedForwardNet identity_layer(int n) {
  Layer l;
  l.weight = Eigen::MatrixXd::Identity(n, n);
  l.bias = Eigen::VectorXd::Zero(n);
  l.act = Activation::kIdentity;
  return FeedForwardNet({l});
}

// Sum-of-outputs loss used by several finite-difference checks.
std::pair<double, Eigen::VectorXd> sum_loss(FeedForwardNet& net, const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd y = net.forward(x);
  const Eigen::MatrixXd upstream = Eigen::MatrixXd::Ones(y.rows(), y.cols());
  return {y.sum(), net.flatten(net.backward(upstream))};
}

}  // namespace

TEST_CASE("forward: identity layer reproduces input") {
  FeedForwardNet net = identity_layer(2);
  Eigen::VectorXd x(2);
  x << 1.0, 2.0;
  const Eigen::VectorXd y = net.evaluate(x);
  CHECK(y(0) == 1.0);
  CHECK(y(1) == 2.0);
}

TEST_CASE("forward: zero-weight tanh layer returns zeros") {
  Layer l;
  l.weight = Eigen::MatrixXd::Zero(3, 2);
  l.bias = Eigen::VectorXd::Zero(3);
  l.act = Activation::kTanh;
  FeedForwardNet net({l});
  Eigen::VectorXd x(2);
  x << -4.2, 17.0;
  CHECK(net.evaluate(x).isZero(0.0));
}

TEST_CASE("forward: two-layer net matches hand-unrolled arithmetic") {
  std::mt19937_64 rng(7);
  FeedForwardNet net = FeedForwardNet::init({3, 4, 2}, Activation::kTanh,
                                            Activation::kIdentity, rng);
  Eigen::VectorXd x(3);
  x << 0.3, -1.1, 0.75;

  // Straight-line re-evaluation, scalar by scalar.
  const auto& l0 = net.layers()[0];
  const auto& l1 = net.layers()[1];
  double h[4];
  for (int i = 0; i < 4; ++i) {
    double z = l0.bias[i];
    for (int j = 0; j < 3; ++j) z += l0.weight(i, j) * x[j];
    h[i] = std::tanh(z);
  }
  double expect[2];
  for (int i = 0; i < 2; ++i) {
    double z = l1.bias[i];
    for (int j = 0; j < 4; ++j) z += l1.weight(i, j) * h[j];
    expect[i] = z;
  }

  const Eigen::VectorXd y = net.evaluate(x);
  CHECK(y[0] == doctest::Approx(expect[0]).epsilon(1e-15));
  CHECK(y[1] == doctest::Approx(expect[1]).epsilon(1e-15));
}

TEST_CASE("forward: deterministic for identical inputs") {
  std::mt19937_64 rng(11);
  FeedForwardNet net = FeedForwardNet::init({5, 16, 3}, Activation::kTanh,
                                            Activation::kIdentity, rng);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 7);
  const Eigen::MatrixXd a = net.evaluate(x);
  const Eigen::MatrixXd b = net.evaluate(x);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward: dimension mismatch is a hard error") {
  FeedForwardNet net = identity_layer(2);
  Eigen::VectorXd x(3);
  x.setZero();
  CHECK_THROWS_AS(net.evaluate(x), std::invalid_argument);
}

TEST_CASE("backward: identity layer, upstream e_i gives e_i x^T") {
  FeedForwardNet net = identity_layer(3);
  Eigen::VectorXd x(3);
  x << 2.0, -1.0, 0.5;
  net.forward(x);
  Eigen::MatrixXd upstream = Eigen::MatrixXd::Zero(3, 1);
  upstream(1, 0) = 1.0;
  const NetGradients g = net.backward(upstream);
  Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(3, 3);
  expect.row(1) = x.transpose();
  CHECK((g.weight[0] - expect).cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.bias[0](1) == 1.0);
}

TEST_CASE("backward: tanh layer at x=0 has input gradient W^T upstream") {
  std::mt19937_64 rng(3);
  FeedForwardNet net = FeedForwardNet::init({4, 3}, Activation::kTanh,
                                            Activation::kTanh, rng);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(4);
  net.forward(x);
  Eigen::MatrixXd upstream = Eigen::MatrixXd::Random(3, 1);
  const NetGradients g = net.backward(upstream);
  const Eigen::MatrixXd expect = net.layers()[0].weight.transpose() * upstream;
  CHECK((g.input - expect).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("backward: before forward is a hard error") {
  FeedForwardNet net = identity_layer(2);
  CHECK_THROWS_AS(net.backward(Eigen::MatrixXd::Ones(2, 1)), std::runtime_error);
}

TEST_CASE("backward: random two-layer net matches central differences") {
  std::mt19937_64 rng(19);
  FeedForwardNet net = FeedForwardNet::init({6, 12, 4}, Activation::kTanh,
                                            Activation::kIdentity, rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(6, 5);
  const GradCheckReport report =
      grad_check(net, [&](FeedForwardNet& n) { return sum_loss(n, x); }, 1e-6);
  CHECK(report.pass);
  CHECK(report.max_rel_error < 1e-6);
}

TEST_CASE("backward: relu net matches central differences away from kinks") {
  std::mt19937_64 rng(23);
  FeedForwardNet net = FeedForwardNet::init({5, 10, 2}, Activation::kRelu,
                                            Activation::kIdentity, rng);
  // Push preactivations away from zero so the finite difference window
  // never straddles a kink.
  for (auto& l : net.layers()) l.bias.setConstant(0.37);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 3);
  const GradCheckReport report =
      grad_check(net, [&](FeedForwardNet& n) { return sum_loss(n, x); }, 1e-6);
  CHECK(report.pass);
}

TEST_CASE("adam: first step moves by -lr * sign(g)") {
  AdamConfig cfg;
  cfg.learning_rate = 1e-3;
  AdamState opt(3, cfg);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd g(3);
  g << 0.5, -2.0, 1e-3;
  opt.step(p, g);
  for (int i = 0; i < 3; ++i) {
    const double expect = -1e-3 * g[i] / (std::abs(g[i]) + 1e-8);
    CHECK(p[i] == doctest::Approx(expect).epsilon(1e-9));
  }
  CHECK(opt.step_count() == 1);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  AdamState opt(2, AdamConfig{});
  Eigen::VectorXd p(2);
  p << 3.0, -1.0;
  opt.step(p, Eigen::VectorXd::Zero(2));
  CHECK(p[0] == 3.0);
  CHECK(p[1] == -1.0);
}

TEST_CASE("adam: two steps with constant gradient match the scalar recurrence") {
  AdamConfig cfg;
  cfg.learning_rate = 0.01;
  AdamState opt(1, cfg);
  Eigen::VectorXd p = Eigen::VectorXd::Constant(1, 1.5);
  Eigen::VectorXd g = Eigen::VectorXd::Constant(1, 0.3);

  // Independent scalar recurrence.
  double m = 0.0, v = 0.0, expect = 1.5;
  for (int t = 1; t <= 2; ++t) {
    m = cfg.beta1 * m + (1 - cfg.beta1) * 0.3;
    v = cfg.beta2 * v + (1 - cfg.beta2) * 0.3 * 0.3;
    const double mhat = m / (1 - std::pow(cfg.beta1, t));
    const double vhat = v / (1 - std::pow(cfg.beta2, t));
    expect -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
  }

  opt.step(p, g);
  opt.step(p, g);
  CHECK(p[0] == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("adam: non-finite gradient names the parameter index") {
  AdamState opt(3, AdamConfig{});
  Eigen::VectorXd p = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(3);
  g[2] = std::nan("");
  CHECK_THROWS_WITH_AS(opt.step(p, g), doctest::Contains("index 2"), std::runtime_error);
}

TEST_CASE("grad_check: linear least squares passes tightly") {
  std::mt19937_64 rng(31);
  FeedForwardNet net = FeedForwardNet::init({4, 3}, Activation::kIdentity,
                                            Activation::kIdentity, rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 6);
  const Eigen::MatrixXd target = Eigen::MatrixXd::Random(3, 6);
  auto loss = [&](FeedForwardNet& n) -> std::pair<double, Eigen::VectorXd> {
    const Eigen::MatrixXd y = n.forward(x);
    const Eigen::MatrixXd r = y - target;
    return {0.5 * r.squaredNorm(), n.flatten(n.backward(r))};
  };
  const GradCheckReport report = grad_check(net, loss, 1e-8);
  CHECK(report.pass);
  CHECK(report.max_rel_error < 1e-8);
}

TEST_CASE("grad_check: corrupted gradient fails") {
  std::mt19937_64 rng(37);
  FeedForwardNet net = FeedForwardNet::init({3, 5, 2}, Activation::kTanh,
                                            Activation::kIdentity, rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 4);
  auto loss = [&](FeedForwardNet& n) -> std::pair<double, Eigen::VectorXd> {
    auto [l, g] = sum_loss(n, x);
    g[7] *= 2.0;  // deliberate corruption of one weight gradient
    return {l, g};
  };
  CHECK_FALSE(grad_check(net, loss, 1e-4).pass);
}

TEST_CASE("sigmoid: basic identities") {
  CHECK(sigmoid(0.0) == 0.5);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> dist(-40.0, 40.0);
  for (int i = 0; i < 1000; ++i) {
    const double x = dist(rng);
    const double s = sigmoid(x);
    CHECK(s > 0.0);
    CHECK(s < 1.0);
    CHECK(std::abs(sigmoid(-x) - (1.0 - s)) < 1e-15);
  }
  CHECK(sigmoid(1000.0) < 1.0);
  CHECK(sigmoid(-1000.0) > 0.0);
}

TEST_CASE("make_stream: fixed indexing is reproducible and distinct") {
  auto a1 = make_stream(42, 3, 9);
  auto a2 = make_stream(42, 3, 9);
  auto b = make_stream(42, 4, 9);
  CHECK(a1() == a2());
  CHECK(a1() != b());
}
