#pragma once

#include "lsail/motion.hpp"

#include <Eigen/Dense>

#include <functional>
#include <random>
#include <string>
#include <utility>

namespace lsail {

/// Robot tag of the planar mobile-base + 2-link-arm environment.
inline constexpr const char* kPlanarRobotTag = "planar-lm";

std::vector<std::string> planar_state_names();

struct EnvConfig {
  double dt = 0.02;                       // 50 Hz control
  double link1 = 0.5, link2 = 0.5;        // arm link lengths [m]
  double base_accel_scale = 4.0;          // m/s^2 at action 1
  double joint_accel_scale = 20.0;        // rad/s^2 at action 1
  Eigen::Vector2d joint_neutral{0.8, -1.6};
  double accel_limit = 2.5;               // constraint on commanded base accel norm
  int episode_steps = 500;                // 10 s episodes
  double base_speed_max = 2.0;
  double joint_angle_max = 2.6;
  double joint_speed_max = 8.0;
  bool observation_noise = false;         // uniform +-observation_noise_mag on policy obs
  double observation_noise_mag = 0.01;
};

/// Planar state: holonomic point base with a 2-link arm.
struct EnvState {
  Eigen::Vector2d base_pos = Eigen::Vector2d::Zero();
  Eigen::Vector2d base_vel = Eigen::Vector2d::Zero();
  Eigen::Vector2d joint_pos = Eigen::Vector2d::Zero();
  Eigen::Vector2d joint_vel = Eigen::Vector2d::Zero();

  Eigen::VectorXd to_vector() const;
  static EnvState from_vector(const Eigen::VectorXd& v);
};

/// Semi-implicit Euler step. Actions are clamped to [-1, 1], velocity and
/// joint limits enforced afterwards (joint velocity zeroed at an angle
/// stop). Deterministic; throws on non-finite state.
EnvState step(const EnvState& state, const Eigen::Vector4d& action, const EnvConfig& cfg);

Eigen::Vector2d end_effector(const EnvState& state, const EnvConfig& cfg);

/// Commanded-base-acceleration constraint: ||scaled base accel|| - limit.
/// Positive values are violations.
double contact_force_analog(const EnvState& state, const Eigen::Vector4d& action,
                            const EnvConfig& cfg);

struct ConstraintSpec {
  std::string name;
  std::function<double(const EnvState&, const Eigen::Vector4d&)> evaluate;
  double ramp_start_fraction = 0.7;
  double final_pmax = 0.2;
};

/// Closed-form elbow-down (q2 <= 0) inverse kinematics for the arm.
/// target is relative to the base. Returns {reachable, joint angles}.
std::pair<bool, Eigen::Vector2d> two_link_ik(const Eigen::Vector2d& target, const EnvConfig& cfg);

// Scripted experts. The *_with_command variants are deterministic given
// their arguments; the rng overloads sample the command and a small
// initial perturbation.
MotionClip generate_walk_clip_with_command(const Eigen::Vector2d& velocity_cmd,
                                           const EnvState& start, const EnvConfig& cfg,
                                           double duration, const std::string& id);
MotionClip generate_walk_clip(std::mt19937_64& rng, const EnvConfig& cfg,
                              double duration = 10.0);
MotionClip generate_reach_clip_with_target(const Eigen::Vector2d& target,
                                           const EnvState& start, const EnvConfig& cfg,
                                           double duration, const std::string& id);
MotionClip generate_reach_clip(std::mt19937_64& rng, const EnvConfig& cfg,
                               double duration = 10.0);

/// Synthetic imitation corpus: walk clips tracking random velocity
/// commands plus in-place reach clips.
MotionDataset generate_dataset(std::mt19937_64& rng, const EnvConfig& cfg,
                               int walk_clips = 120, int reach_clips = 20,
                               double duration = 10.0);

}  // namespace lsail
