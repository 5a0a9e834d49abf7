#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lsail/adversary.hpp"

#include <cmath>
#include <random>

using namespace lsail;

namespace {

GanDiscriminator zero_disc(int dim) {
  std::mt19937_64 rng(0);
  GanDiscriminator d = GanDiscriminator::init(dim, {8}, 1e-4, rng);
  for (auto& l : d.net.layers()) {
    l.weight.setZero();
    l.bias.setZero();
  }
  return d;
}

}  // namespace

TEST_CASE("discriminate: zero-weight network scores 0.5 everywhere") {
  GanDiscriminator d = zero_disc(12);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> dist(-3.0, 3.0);
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd x(12);
    for (int j = 0; j < 12; ++j) x[j] = dist(rng);
    CHECK(discriminate(d, x) == 0.5);
  }
}

TEST_CASE("discriminate: output strictly inside (0,1)") {
  std::mt19937_64 rng(2);
  GanDiscriminator d = GanDiscriminator::init(12, {32, 32}, 1e-4, rng);
  // Exaggerate the readout to push logits far out.
  d.net.layers().back().weight *= 50.0;
  std::normal_distribution<double> dist(0.0, 5.0);
  for (int i = 0; i < 10000; ++i) {
    Eigen::VectorXd x(12);
    for (int j = 0; j < 12; ++j) x[j] = dist(rng);
    const double s = discriminate(d, x);
    CHECK(s > 0.0);
    CHECK(s < 1.0);
  }
}

TEST_CASE("discriminate: deterministic under fixed parameters") {
  std::mt19937_64 rng(3);
  GanDiscriminator d = GanDiscriminator::init(12, {16}, 1e-4, rng);
  const Eigen::VectorXd x = Eigen::VectorXd::Random(12);
  CHECK(discriminate(d, x) == discriminate(d, x));
}

TEST_CASE("gan_loss: zero network gives 2 log 2 plus zero decay") {
  GanDiscriminator d = zero_disc(12);
  const Eigen::MatrixXd real = Eigen::MatrixXd::Random(12, 16);
  const Eigen::MatrixXd fake = Eigen::MatrixXd::Random(12, 16);
  const GanLossResult r = gan_loss(d, real, fake);
  CHECK(r.loss == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("gan_loss: perfect separation leaves only the decay term") {
  // Single linear readout on a feature that identifies the source.
  Layer l;
  l.weight = Eigen::MatrixXd::Zero(1, 4);
  l.weight(0, 0) = 1000.0;
  l.bias = Eigen::VectorXd::Zero(1);
  l.act = Activation::kIdentity;
  GanDiscriminator d;
  d.net = FeedForwardNet({l});
  d.weight_decay = 1e-4;

  Eigen::MatrixXd real = Eigen::MatrixXd::Zero(4, 8);
  real.row(0).setConstant(1.0);
  Eigen::MatrixXd fake = Eigen::MatrixXd::Zero(4, 8);
  fake.row(0).setConstant(-1.0);

  const double decay = 1e-4 * 1000.0 * 1000.0;
  const GanLossResult r = gan_loss(d, real, fake);
  CHECK(std::abs(r.loss - decay) < 1e-5);
}

TEST_CASE("gan_loss: gradients match finite differences") {
  std::mt19937_64 rng(5);
  GanDiscriminator d = GanDiscriminator::init(6, {12, 8}, 1e-4, rng);
  const Eigen::MatrixXd real = Eigen::MatrixXd::Random(6, 10);
  const Eigen::MatrixXd fake = (Eigen::MatrixXd::Random(6, 10).array() + 0.5).matrix();
  auto loss_fn = [&](FeedForwardNet&) -> std::pair<double, Eigen::VectorXd> {
    const GanLossResult r = gan_loss(d, real, fake);
    return {r.loss, r.grad};
  };
  CHECK(grad_check(d.net, loss_fn, 1e-4).pass);
}

TEST_CASE("gan_reward: pinned values") {
  CHECK(reward_from_score(0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(reward_from_score(0.0) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(reward_from_score(1.0) == doctest::Approx(-std::log(1.0 - (1.0 - 1e-7))).epsilon(1e-15));
  CHECK(reward_from_score(1.0) == doctest::Approx(16.12).epsilon(1e-3));
}

TEST_CASE("gan_reward: finite, nonnegative, strictly increasing") {
  double prev = -1.0;
  for (double s = 0.0; s <= 1.0; s += 1e-3) {
    const double r = reward_from_score(s);
    CHECK(std::isfinite(r));
    CHECK(r >= 0.0);
    CHECK(r > prev);
    prev = r;
  }
}

TEST_CASE("gan_loss: one gradient step decreases loss on labeled batches") {
  std::mt19937_64 rng(7);
  GanDiscriminator d = GanDiscriminator::init(4, {16}, 1e-4, rng);
  Eigen::MatrixXd real = Eigen::MatrixXd::Random(4, 64);
  real.array() += 1.0;
  Eigen::MatrixXd fake = Eigen::MatrixXd::Random(4, 64);
  fake.array() -= 1.0;

  AdamConfig cfg;
  cfg.learning_rate = 1e-2;
  AdamState opt(d.net.parameter_count(), cfg);
  const GanLossResult before = gan_loss(d, real, fake);
  Eigen::VectorXd params = d.net.parameters();
  opt.step(params, before.grad);
  d.net.set_parameters(params);
  CHECK(gan_loss(d, real, fake).loss < before.loss);
}
