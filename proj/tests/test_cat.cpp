#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lsail/cat.hpp"

#include <cmath>
#include <random>

using namespace lsail;

namespace {

CatState ramped_state(double final_pmax = 0.2) {
  CatState cat({{"base_accel", final_pmax, 0.7}});
  cat.schedule_pmax(100, 100);  // pmax at its final value
  return cat;
}

}  // namespace

TEST_CASE("delta: satisfied constraints give zero") {
  CatState cat = ramped_state();
  CHECK(cat.delta(Eigen::VectorXd::Zero(1)) == 0.0);
}

TEST_CASE("delta: saturated violation reaches pmax") {
  CatState cat = ramped_state(0.2);
  Eigen::MatrixXd batch(1, 2);
  batch << 1.0, 0.5;
  for (int i = 0; i < 200; ++i) cat.update_cmax(batch);  // cmax -> 1
  Eigen::VectorXd v(1);
  v << cat.cmax()[0];
  CHECK(cat.delta(v) == doctest::Approx(0.2).epsilon(1e-12));

  v << 10.0 * cat.cmax()[0];  // clip at 1
  CHECK(cat.delta(v) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("delta: half violation with pmax 0.1 gives 0.05") {
  CatState cat({{"c", 0.1, 0.7}});
  cat.schedule_pmax(100, 100);
  Eigen::MatrixXd batch = Eigen::MatrixXd::Constant(1, 4, 1.0);
  for (int i = 0; i < 400; ++i) cat.update_cmax(batch);
  Eigen::VectorXd v(1);
  v << 0.5 * cat.cmax()[0];
  CHECK(cat.delta(v) == doctest::Approx(0.05).epsilon(1e-9));
}

TEST_CASE("delta: bounded by max pmax and monotone in violations") {
  CatState cat({{"a", 0.2, 0.7}, {"b", 0.1, 0.7}});
  cat.schedule_pmax(100, 100);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> dist(0.0, 3e-6);
  for (int i = 0; i < 1000; ++i) {
    Eigen::VectorXd v(2);
    v << dist(rng), dist(rng);
    const double d = cat.delta(v);
    CHECK(d >= 0.0);
    CHECK(d <= 0.2 + 1e-15);
    Eigen::VectorXd bigger = v;
    bigger[0] += 1e-7;
    CHECK(cat.delta(bigger) >= d);
  }
}

TEST_CASE("update_cmax: fixed point at the batch maximum") {
  CatState cat({{"c", 0.2, 0.7}});
  Eigen::MatrixXd batch = Eigen::MatrixXd::Constant(1, 8, 1.0);
  for (int i = 0; i < 2000; ++i) cat.update_cmax(batch);
  const double settled = cat.cmax()[0];
  cat.update_cmax(batch);
  CHECK(cat.cmax()[0] == doctest::Approx(settled).epsilon(1e-12));
  CHECK(settled == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("update_cmax: EMA arithmetic for a zero batch") {
  CatState cat({{"c", 0.2, 0.7}});
  Eigen::MatrixXd ones = Eigen::MatrixXd::Constant(1, 4, 1.0);
  for (int i = 0; i < 2000; ++i) cat.update_cmax(ones);  // cmax == 1
  cat.update_cmax(Eigen::MatrixXd::Zero(1, 4));
  CHECK(cat.cmax()[0] == doctest::Approx(0.95).epsilon(1e-9));
}

TEST_CASE("update_cmax: geometric convergence toward a new level") {
  CatState cat({{"c", 0.2, 0.7}});
  Eigen::MatrixXd ones = Eigen::MatrixXd::Constant(1, 4, 1.0);
  for (int i = 0; i < 2000; ++i) cat.update_cmax(ones);  // start at 1

  // Independent recurrence.
  double expect = cat.cmax()[0];
  Eigen::MatrixXd twos = Eigen::MatrixXd::Constant(1, 4, 2.0);
  for (int k = 1; k <= 30; ++k) {
    expect = 0.95 * expect + 0.05 * 2.0;
    cat.update_cmax(twos);
    CHECK(cat.cmax()[0] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(std::abs(cat.cmax()[0] - 2.0) ==
          doctest::Approx(std::pow(0.95, k) * std::abs(1.0 - 2.0)).epsilon(1e-7));
  }
}

TEST_CASE("update_cmax: floored away from zero") {
  CatState cat({{"c", 0.2, 0.7}});
  Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(1, 4);
  for (int i = 0; i < 5000; ++i) cat.update_cmax(zeros);
  CHECK(cat.cmax()[0] >= CatState::kCmaxFloor);
  // Delta stays well defined.
  CHECK(std::isfinite(cat.delta(Eigen::VectorXd::Zero(1))));
}

TEST_CASE("effective_discount: pinned values") {
  CHECK(effective_discount(0.0, 0.99) == 0.99);
  CHECK(effective_discount(1.0, 0.99) == 0.0);
  CHECK(effective_discount(0.2, 0.99) == doctest::Approx(0.792).epsilon(1e-15));
}

TEST_CASE("schedule_pmax: zero before the ramp, linear to the final value") {
  CatState cat({{"c", 0.2, 0.7}});
  cat.schedule_pmax(0, 1000);
  CHECK(cat.pmax()[0] == 0.0);
  cat.schedule_pmax(699, 1000);
  CHECK(cat.pmax()[0] == 0.0);
  cat.schedule_pmax(850, 1000);
  CHECK(cat.pmax()[0] == doctest::Approx(0.1).epsilon(1e-12));
  cat.schedule_pmax(1000, 1000);
  CHECK(cat.pmax()[0] == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("schedule_pmax: nondecreasing over training") {
  CatState cat({{"c", 0.2, 0.7}});
  double prev = -1.0;
  for (int e = 0; e <= 500; ++e) {
    cat.schedule_pmax(e, 500);
    CHECK(cat.pmax()[0] >= prev);
    prev = cat.pmax()[0];
  }
}
