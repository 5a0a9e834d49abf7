#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lsail/retarget.hpp"

#include <cmath>
#include <fstream>
#include <random>

using namespace lsail;

namespace {

KinematicLink make_link(const std::string& name, int parent, const Eigen::Vector3d& offset,
                        const Eigen::Vector3d* axis) {
  KinematicLink l;
  l.name = name;
  l.parent = parent;
  l.offset_translation = offset;
  if (axis) {
    l.has_joint = true;
    l.joint_axis = axis->normalized();
  }
  return l;
}

// Planar 2-link chain with z-axis joints, fixed or floating base.
KinematicModel planar_two_link(bool floating) {
  const Eigen::Vector3d z = Eigen::Vector3d::UnitZ();
  std::vector<KinematicLink> links;
  links.push_back(make_link("base", -1, Eigen::Vector3d::Zero(), nullptr));
  links.push_back(make_link("upper", 0, Eigen::Vector3d::Zero(), &z));
  links.push_back(make_link("lower", 1, Eigen::Vector3d(0.5, 0, 0), &z));
  std::vector<TargetFrame> frames;
  frames.push_back({"tip", 2, Eigen::Vector3d(0.5, 0, 0)});
  return KinematicModel("planar2", floating, std::move(links), std::move(frames));
}

// Quadruped-like floating tree: trunk plus four 2-joint legs, with foot
// and shoulder target frames (8 keypoints, 14 dof).
KinematicModel quadruped() {
  std::vector<KinematicLink> links;
  std::vector<TargetFrame> frames;
  links.push_back(make_link("trunk", -1, Eigen::Vector3d::Zero(), nullptr));
  const Eigen::Vector3d y = Eigen::Vector3d::UnitY();
  const double sx[4] = {0.2, 0.2, -0.2, -0.2};
  const double sy[4] = {0.15, -0.15, 0.15, -0.15};
  const char* leg[4] = {"fl", "fr", "hl", "hr"};
  for (int i = 0; i < 4; ++i) {
    const int hip = static_cast<int>(links.size());
    links.push_back(make_link(std::string(leg[i]) + "_hip", 0,
                              Eigen::Vector3d(sx[i], sy[i], 0.0), &y));
    links.push_back(make_link(std::string(leg[i]) + "_knee", hip,
                              Eigen::Vector3d(0.0, 0.0, -0.16), &y));
    frames.push_back({std::string(leg[i]) + "_foot", hip + 1, Eigen::Vector3d(0, 0, -0.16)});
    frames.push_back({std::string(leg[i]) + "_shoulder", 0,
                      Eigen::Vector3d(sx[i], sy[i], 0.0)});
  }
  return KinematicModel("quad", true, std::move(links), std::move(frames));
}

Configuration zero_config(const KinematicModel& model) {
  Configuration q;
  q.joints = Eigen::VectorXd::Zero(model.joint_count());
  return q;
}

}  // namespace

TEST_CASE("so3: exp/log round trip and right Jacobian identity") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    Eigen::Vector3d w(dist(rng), dist(rng), dist(rng));
    w *= 2.9 / 3.0;  // keep below pi
    const Eigen::Matrix3d rot = exp_so3(w);
    CHECK((rot * rot.transpose() - Eigen::Matrix3d::Identity()).norm() < 1e-12);
    CHECK((log_so3(rot) - w).norm() < 1e-9);

    // exp(w + dw) == exp(w) exp(J_r dw) to first order.
    const Eigen::Vector3d dw = 1e-7 * Eigen::Vector3d(dist(rng), dist(rng), dist(rng));
    const Eigen::Matrix3d lhs = exp_so3(w + dw);
    const Eigen::Matrix3d rhs = rot * exp_so3(so3_right_jacobian(w) * dw);
    CHECK((lhs - rhs).norm() < 1e-12);
  }
}

TEST_CASE("forward_kinematics: planar 2-link hand cases") {
  const KinematicModel model = planar_two_link(false);
  Configuration q = zero_config(model);
  auto tips = forward_kinematics(model, q);
  CHECK((tips[0] - Eigen::Vector3d(1.0, 0.0, 0.0)).norm() < 1e-15);

  q.joints << M_PI / 2.0, 0.0;
  tips = forward_kinematics(model, q);
  CHECK((tips[0] - Eigen::Vector3d(0.0, 1.0, 0.0)).norm() < 1e-12);
}

TEST_CASE("forward_kinematics: floating base translation moves every frame") {
  const KinematicModel model = planar_two_link(true);
  Configuration q = zero_config(model);
  q.joints << 0.4, -0.9;
  const auto before = forward_kinematics(model, q);
  q.base_translation = Eigen::Vector3d(1.0, 2.0, 3.0);
  const auto after = forward_kinematics(model, q);
  CHECK((after[0] - before[0] - Eigen::Vector3d(1.0, 2.0, 3.0)).norm() < 1e-12);
}

TEST_CASE("forward_kinematics: dimension mismatch is a hard error") {
  const KinematicModel model = planar_two_link(false);
  Configuration q;
  q.joints = Eigen::VectorXd::Zero(5);
  CHECK_THROWS_AS(forward_kinematics(model, q), std::invalid_argument);
}

TEST_CASE("fk_jacobian: revolute column equals axis x arm at q = 0") {
  const KinematicModel model = planar_two_link(false);
  const Configuration q = zero_config(model);
  const Eigen::MatrixXd jac = fk_jacobian(model, q, "tip");
  // First joint at the origin, tip at (1,0,0): z x (1,0,0) = (0,1,0).
  CHECK((jac.col(0) - Eigen::Vector3d(0.0, 1.0, 0.0)).norm() < 1e-12);
  // Second joint at (0.5,0,0): z x (0.5,0,0) = (0,0.5,0).
  CHECK((jac.col(1) - Eigen::Vector3d(0.0, 0.5, 0.0)).norm() < 1e-12);
}

TEST_CASE("fk_jacobian: frames on the base have zero joint columns") {
  const KinematicModel model = quadruped();
  Configuration q = zero_config(model);
  const Eigen::MatrixXd jac = fk_jacobian(model, q, "fl_shoulder");
  CHECK(jac.rightCols(model.joint_count()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fk_jacobian: matches central finite differences on random trees") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);

  for (int trial = 0; trial < 10; ++trial) {
    // Random floating chain, 3..6 joints with random axes and offsets.
    const int joints = 3 + static_cast<int>((dist(rng) + 1.0) * 1.9);
    std::vector<KinematicLink> links;
    links.push_back(make_link("root", -1, Eigen::Vector3d::Zero(), nullptr));
    for (int k = 0; k < joints; ++k) {
      Eigen::Vector3d axis(dist(rng), dist(rng), dist(rng));
      while (axis.norm() < 0.1) axis = Eigen::Vector3d(dist(rng), dist(rng), dist(rng));
      Eigen::Vector3d offset(dist(rng), dist(rng), dist(rng));
      KinematicLink l = make_link("l" + std::to_string(k), k, 0.3 * offset, &axis);
      l.offset_rotation = exp_so3(0.5 * Eigen::Vector3d(dist(rng), dist(rng), dist(rng)));
      links.push_back(std::move(l));
    }
    std::vector<TargetFrame> frames;
    frames.push_back({"end", joints, 0.3 * Eigen::Vector3d(dist(rng), dist(rng), dist(rng))});
    frames.push_back({"mid", joints / 2, 0.2 * Eigen::Vector3d(dist(rng), dist(rng), dist(rng))});
    const KinematicModel model("chain", true, std::move(links), std::move(frames));

    Configuration q;
    q.base_translation = Eigen::Vector3d(dist(rng), dist(rng), dist(rng));
    q.base_orientation = 1.2 * Eigen::Vector3d(dist(rng), dist(rng), dist(rng));
    q.joints.resize(joints);
    for (int k = 0; k < joints; ++k) q.joints[k] = 1.5 * dist(rng);

    for (const std::string frame : {"end", "mid"}) {
      const Eigen::MatrixXd analytic = fk_jacobian(model, q, frame);
      const int frame_idx = model.frame_index(frame);
      const double h = 1e-6;
      Eigen::VectorXd flat = q.flatten(true);
      Eigen::MatrixXd numeric(3, model.dof());
      for (int c = 0; c < model.dof(); ++c) {
        Eigen::VectorXd plus = flat, minus = flat;
        plus[c] += h;
        minus[c] -= h;
        const auto fp = forward_kinematics(
            model, Configuration::unflatten(plus, true, joints))[frame_idx];
        const auto fm = forward_kinematics(
            model, Configuration::unflatten(minus, true, joints))[frame_idx];
        numeric.col(c) = (fp - fm) / (2.0 * h);
      }
      const double scale = 1.0 + analytic.cwiseAbs().maxCoeff();
      CHECK((analytic - numeric).cwiseAbs().maxCoeff() / scale < 1e-6);
    }
  }
}

TEST_CASE("solve_frame: targets at the initial configuration accept zero steps") {
  const KinematicModel model = quadruped();
  RetargetProblem problem;
  problem.model = model;
  problem.q_neutral = zero_config(model);
  problem.keypoint_for_frame.resize(model.frames().size());
  for (std::size_t i = 0; i < model.frames().size(); ++i)
    problem.keypoint_for_frame[i] = static_cast<int>(i);

  // Targets generated by FK at q_neutral, so the alpha term is zero too.
  const auto world = forward_kinematics(model, problem.q_neutral);
  Eigen::Matrix3Xd targets(3, world.size());
  for (std::size_t i = 0; i < world.size(); ++i) targets.col(i) = world[i];

  const auto [solution, report] = solve_frame(problem, targets, problem.q_neutral);
  CHECK(report.accepted_steps == 0);
  CHECK(report.converged);
  CHECK(report.objective < 1e-20);
  CHECK((solution.joints - problem.q_neutral.joints).norm() == 0.0);
}

TEST_CASE("solve_frame: recovers keypoints from a perturbed start") {
  const KinematicModel model = quadruped();
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> dist(-0.4, 0.4);

  Configuration truth = zero_config(model);
  for (int j = 0; j < model.joint_count(); ++j) truth.joints[j] = dist(rng);
  truth.base_translation = Eigen::Vector3d(0.3, -0.2, 0.5);
  truth.base_orientation = Eigen::Vector3d(0.2, 0.1, -0.3);

  RetargetProblem problem;
  problem.model = model;
  problem.q_neutral = truth;  // regularizer consistent with the ground truth
  problem.keypoint_for_frame.resize(model.frames().size());
  for (std::size_t i = 0; i < model.frames().size(); ++i)
    problem.keypoint_for_frame[i] = static_cast<int>(i);

  const auto world = forward_kinematics(model, truth);
  Eigen::Matrix3Xd targets(3, world.size());
  for (std::size_t i = 0; i < world.size(); ++i) targets.col(i) = world[i];

  Configuration init = truth;
  for (int j = 0; j < model.joint_count(); ++j) init.joints[j] += 0.1;
  init.base_translation += Eigen::Vector3d(0.05, -0.05, 0.05);

  const auto [solution, report] = solve_frame(problem, targets, init);
  CHECK(report.keypoint_rms < 1e-6);
  // Objective non-increasing over accepted steps.
  for (std::size_t i = 1; i < report.objective_history.size(); ++i)
    CHECK(report.objective_history[i] <= report.objective_history[i - 1]);
}

TEST_CASE("solve_frame: unreachable target matches a brute-force grid search") {
  // One revolute joint, arm length 1, target 2 m beyond reach.
  const Eigen::Vector3d z = Eigen::Vector3d::UnitZ();
  std::vector<KinematicLink> links;
  links.push_back(make_link("base", -1, Eigen::Vector3d::Zero(), nullptr));
  links.push_back(make_link("arm", 0, Eigen::Vector3d::Zero(), &z));
  std::vector<TargetFrame> frames;
  frames.push_back({"tip", 1, Eigen::Vector3d(1.0, 0.0, 0.0)});
  const KinematicModel model("arm1", false, std::move(links), std::move(frames));

  RetargetProblem problem;
  problem.model = model;
  problem.q_neutral = zero_config(model);
  problem.keypoint_for_frame = {0};
  problem.alpha = 0.005;

  const Eigen::Vector3d target(3.0 * std::cos(0.8), 3.0 * std::sin(0.8), 0.0);
  Eigen::Matrix3Xd targets(3, 1);
  targets.col(0) = target;

  Configuration init = zero_config(model);
  const auto [solution, report] = solve_frame(problem, targets, init);

  // Brute-force 1-DOF oracle over the same objective.
  double best = std::numeric_limits<double>::infinity();
  double best_angle = 0.0;
  for (int i = 0; i <= 200000; ++i) {
    const double angle = -M_PI + 2.0 * M_PI * i / 200000.0;
    const Eigen::Vector3d tip(std::cos(angle), std::sin(angle), 0.0);
    const double f = (tip - target).squaredNorm() + problem.alpha * angle * angle;
    if (f < best) {
      best = f;
      best_angle = angle;
    }
  }
  CHECK(report.objective <= best + 1e-9);
  CHECK(std::abs(solution.joints[0] - best_angle) < 1e-3);

  // Arm points at the target, residual about 2 m.
  const auto tip = forward_kinematics(model, solution)[0];
  CHECK(std::abs((tip - target).norm() - 2.0) < 0.01);
}

TEST_CASE("retarget_sequence: constant targets settle immediately after frame 0") {
  const KinematicModel model = quadruped();
  RetargetProblem problem;
  problem.model = model;
  problem.q_neutral = zero_config(model);
  problem.keypoint_for_frame.resize(model.frames().size());
  for (std::size_t i = 0; i < model.frames().size(); ++i)
    problem.keypoint_for_frame[i] = static_cast<int>(i);

  Configuration pose = zero_config(model);
  pose.joints[0] = 0.3;
  pose.joints[3] = -0.2;
  const auto world = forward_kinematics(model, pose);
  Eigen::Matrix3Xd targets(3, world.size());
  for (std::size_t i = 0; i < world.size(); ++i) targets.col(i) = world[i];

  const std::vector<Eigen::Matrix3Xd> sequence(5, targets);
  const SequenceResult result = retarget_sequence(problem, sequence);
  REQUIRE(result.configurations.size() == 5);
  for (std::size_t t = 1; t < 5; ++t) {
    CHECK((result.configurations[t].joints - result.configurations[1].joints).norm() < 1e-10);
    CHECK(result.reports[t].accepted_steps <= 3);  // only damping refinements remain
  }
}

TEST_CASE("retarget_sequence: FK round trip along a smooth trajectory") {
  const KinematicModel model = quadruped();
  RetargetProblem problem;
  problem.model = model;
  problem.q_neutral = zero_config(model);
  problem.alpha = 1e-10;  // isolate the keypoint term for the round trip
  problem.keypoint_for_frame.resize(model.frames().size());
  for (std::size_t i = 0; i < model.frames().size(); ++i)
    problem.keypoint_for_frame[i] = static_cast<int>(i);

  std::vector<Eigen::Matrix3Xd> sequence;
  for (int t = 0; t < 60; ++t) {
    Configuration q = zero_config(model);
    const double phase = 0.05 * t;
    for (int j = 0; j < model.joint_count(); ++j)
      q.joints[j] = 0.35 * std::sin(phase + 0.7 * j);
    q.base_translation = Eigen::Vector3d(0.4 * phase, 0.1 * std::sin(phase), 0.02 * phase);
    q.base_orientation = Eigen::Vector3d(0.1 * std::sin(phase), 0.05 * phase, 0.2 * phase);
    const auto world = forward_kinematics(model, q);
    Eigen::Matrix3Xd targets(3, world.size());
    for (std::size_t i = 0; i < world.size(); ++i) targets.col(i) = world[i];
    sequence.push_back(std::move(targets));
  }

  const SequenceResult result = retarget_sequence(problem, sequence);
  REQUIRE(result.configurations.size() == sequence.size());
  double worst = 0.0;
  for (const SolveReport& r : result.reports) {
    CHECK_FALSE(r.failed);
    worst = std::max(worst, r.keypoint_rms);
    for (std::size_t i = 1; i < r.objective_history.size(); ++i)
      CHECK(r.objective_history[i] <= r.objective_history[i - 1]);
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("solve_frame: rigid target translation is absorbed by the base") {
  const KinematicModel model = quadruped();
  RetargetProblem problem;
  problem.model = model;
  problem.q_neutral = zero_config(model);
  problem.keypoint_for_frame.resize(model.frames().size());
  for (std::size_t i = 0; i < model.frames().size(); ++i)
    problem.keypoint_for_frame[i] = static_cast<int>(i);

  Configuration pose = zero_config(model);
  for (int j = 0; j < model.joint_count(); ++j) pose.joints[j] = 0.1 * (j + 1);
  const auto world = forward_kinematics(model, pose);
  Eigen::Matrix3Xd targets(3, world.size());
  for (std::size_t i = 0; i < world.size(); ++i) targets.col(i) = world[i];

  const auto [sol_a, rep_a] = solve_frame(problem, targets, problem.q_neutral);
  Eigen::Matrix3Xd shifted = targets;
  shifted.colwise() += Eigen::Vector3d(2.0, -1.0, 0.5);
  const auto [sol_b, rep_b] = solve_frame(problem, shifted, problem.q_neutral);
  CHECK(std::abs(rep_a.keypoint_rms - rep_b.keypoint_rms) < 1e-7);
}

TEST_CASE("model and mocap files parse, map, and report errors") {
  const std::string model_path = "/tmp/lsail_test_model.jsonl";
  {
    std::ofstream out(model_path);
    out << R"({"version":1,"name":"arm","floating_base":false})" << "\n";
    out << R"({"type":"link","name":"base","parent":null,"offset_translation":[0,0,0],"offset_rotation":[0,0,0]})" << "\n";
    out << R"({"type":"link","name":"upper","parent":"base","offset_translation":[0,0,0],"offset_rotation":[0,0,0],"joint_axis":[0,0,1],"limits":[-1.5,1.5]})" << "\n";
    out << R"({"type":"frame","name":"tip","link":"upper","offset":[1,0,0]})" << "\n";
    out << R"({"type":"neutral","joints":[0.25]})" << "\n";
  }
  const KinematicModel model = read_kinematic_model(model_path);
  CHECK(model.joint_count() == 1);
  CHECK(model.dof() == 1);
  CHECK(model.frames().size() == 1);
  const Configuration neutral = neutral_configuration(model_path, model);
  CHECK(neutral.joints[0] == 0.25);

  const std::string mocap_path = "/tmp/lsail_test_mocap.jsonl";
  {
    std::ofstream out(mocap_path);
    out << R"({"fps":25,"keypoints":["tip"]})" << "\n";
    for (int t = 0; t < 10; ++t)
      out << R"({"t":)" << t << R"(,"points":[[0.9,0.1,0]]})" << "\n";
  }
  const KeypointSequence seq = read_keypoint_sequence(mocap_path);
  CHECK(seq.fps == 25.0);
  CHECK(seq.frames.size() == 10);

  const KeypointSequence resampled = resample_keypoints(seq, 50.0);
  CHECK(resampled.frames.size() == 19);
  CHECK((resampled.frames[1] - seq.frames[0] * 0.5 - seq.frames[1] * 0.5).norm() < 1e-12);

  CHECK(map_frames_to_keypoints(model, seq.names) == std::vector<int>{0});
  CHECK_THROWS_WITH_AS(map_frames_to_keypoints(model, {"other"}),
                       doctest::Contains("tip"), std::invalid_argument);

  std::remove(model_path.c_str());
  std::remove(mocap_path.c_str());
}

TEST_CASE("solve_frame: joint limits clamp with a flag") {
  const std::string model_path = "/tmp/lsail_test_limits.jsonl";
  {
    std::ofstream out(model_path);
    out << R"({"version":1,"name":"arm","floating_base":false})" << "\n";
    out << R"({"type":"link","name":"base","parent":null,"offset_translation":[0,0,0],"offset_rotation":[0,0,0]})" << "\n";
    out << R"({"type":"link","name":"upper","parent":"base","offset_translation":[0,0,0],"offset_rotation":[0,0,0],"joint_axis":[0,0,1],"limits":[-0.5,0.5]})" << "\n";
    out << R"({"type":"frame","name":"tip","link":"upper","offset":[1,0,0]})" << "\n";
  }
  const KinematicModel model = read_kinematic_model(model_path);
  RetargetProblem problem;
  problem.model = model;
  problem.q_neutral = zero_config(model);
  problem.keypoint_for_frame = {0};
  Eigen::Matrix3Xd targets(3, 1);
  targets.col(0) = Eigen::Vector3d(0.0, 1.0, 0.0);  // wants q = pi/2 > limit

  const auto [solution, report] = solve_frame(problem, targets, zero_config(model));
  CHECK(report.clamped);
  CHECK(solution.joints[0] == 0.5);
  std::remove(model_path.c_str());
}
