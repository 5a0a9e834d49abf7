#include "lsail/toyenv.hpp"

#include <cmath>
#include <stdexcept>

namespace lsail {

namespace {

// Expert PD gains, tuned for sub-second settling well inside the
// actuation limits.
constexpr double kWalkBaseKp = 3.0;    // 1/s on velocity error
constexpr double kArmKp = 60.0;        // 1/s^2 on joint error
constexpr double kArmKd = 8.0;         // 1/s
constexpr double kHoldBaseKp = 9.0;    // 1/s^2 on position error
constexpr double kHoldBaseKd = 6.0;    // 1/s

Eigen::Vector4d clamp_action(const Eigen::Vector4d& a) {
  return a.cwiseMax(-1.0).cwiseMin(1.0);
}

}  // namespace

std::vector<std::string> planar_state_names() {
  return {"base_px", "base_py", "base_vx", "base_vy", "q1", "q2", "qd1", "qd2"};
}

Eigen::VectorXd EnvState::to_vector() const {
  Eigen::VectorXd v(8);
  v << base_pos, base_vel, joint_pos, joint_vel;
  return v;
}

EnvState EnvState::from_vector(const Eigen::VectorXd& v) {
  if (v.size() != 8) throw std::invalid_argument("EnvState::from_vector: expected 8 components");
  EnvState s;
  s.base_pos = v.segment<2>(0);
  s.base_vel = v.segment<2>(2);
  s.joint_pos = v.segment<2>(4);
  s.joint_vel = v.segment<2>(6);
  return s;
}

EnvState step(const EnvState& state, const Eigen::Vector4d& action, const EnvConfig& cfg) {
  if (!state.to_vector().allFinite())
    throw std::runtime_error("toyenv::step: non-finite state");
  if (!action.allFinite())
    throw std::runtime_error("toyenv::step: non-finite action");

  const Eigen::Vector4d a = clamp_action(action);

  EnvState next = state;
  next.base_vel += a.head<2>() * cfg.base_accel_scale * cfg.dt;
  const double speed = next.base_vel.norm();
  if (speed > cfg.base_speed_max) next.base_vel *= cfg.base_speed_max / speed;

  next.joint_vel += a.tail<2>() * cfg.joint_accel_scale * cfg.dt;
  next.joint_vel = next.joint_vel.cwiseMax(-cfg.joint_speed_max).cwiseMin(cfg.joint_speed_max);

  next.base_pos += next.base_vel * cfg.dt;
  next.joint_pos += next.joint_vel * cfg.dt;
  for (int i = 0; i < 2; ++i) {
    if (next.joint_pos[i] > cfg.joint_angle_max) {
      next.joint_pos[i] = cfg.joint_angle_max;
      next.joint_vel[i] = 0.0;
    } else if (next.joint_pos[i] < -cfg.joint_angle_max) {
      next.joint_pos[i] = -cfg.joint_angle_max;
      next.joint_vel[i] = 0.0;
    }
  }
  return next;
}

Eigen::Vector2d end_effector(const EnvState& state, const EnvConfig& cfg) {
  const double q1 = state.joint_pos[0];
  const double q12 = q1 + state.joint_pos[1];
  return state.base_pos + cfg.link1 * Eigen::Vector2d(std::cos(q1), std::sin(q1)) +
         cfg.link2 * Eigen::Vector2d(std::cos(q12), std::sin(q12));
}

double contact_force_analog(const EnvState& /*state*/, const Eigen::Vector4d& action,
                            const EnvConfig& cfg) {
  const Eigen::Vector4d a = clamp_action(action);
  return a.head<2>().norm() * cfg.base_accel_scale - cfg.accel_limit;
}

std::pair<bool, Eigen::Vector2d> two_link_ik(const Eigen::Vector2d& target,
                                             const EnvConfig& cfg) {
  const double r2 = target.squaredNorm();
  const double l1 = cfg.link1, l2 = cfg.link2;
  const double c2 = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
  if (c2 < -1.0 || c2 > 1.0) return {false, Eigen::Vector2d::Zero()};
  const double q2 = -std::acos(c2);  // elbow-down branch
  const double q1 = std::atan2(target.y(), target.x()) -
                    std::atan2(l2 * std::sin(q2), l1 + l2 * std::cos(q2));
  Eigen::Vector2d q(q1, q2);
  if (q.cwiseAbs().maxCoeff() > cfg.joint_angle_max) return {false, q};
  return {true, q};
}

namespace {

MotionClip rollout_expert(const EnvState& start, const EnvConfig& cfg, double duration,
                          const std::string& id,
                          const std::function<Eigen::Vector4d(const EnvState&)>& controller) {
  MotionClip clip;
  clip.id = id;
  clip.dt = cfg.dt;
  const int steps = static_cast<int>(std::llround(duration / cfg.dt));
  clip.frames.reserve(steps + 1);
  EnvState s = start;
  clip.frames.push_back(s.to_vector());
  for (int t = 0; t < steps; ++t) {
    s = step(s, controller(s), cfg);
    clip.frames.push_back(s.to_vector());
  }
  return clip;
}

Eigen::Vector2d arm_hold_action(const EnvState& s, const Eigen::Vector2d& q_target,
                                const EnvConfig& cfg) {
  const Eigen::Vector2d accel = kArmKp * (q_target - s.joint_pos) - kArmKd * s.joint_vel;
  return accel / cfg.joint_accel_scale;
}

}  // namespace

MotionClip generate_walk_clip_with_command(const Eigen::Vector2d& velocity_cmd,
                                           const EnvState& start, const EnvConfig& cfg,
                                           double duration, const std::string& id) {
  auto controller = [&](const EnvState& s) {
    Eigen::Vector4d a;
    a.head<2>() = kWalkBaseKp * (velocity_cmd - s.base_vel) / cfg.base_accel_scale;
    a.tail<2>() = arm_hold_action(s, cfg.joint_neutral, cfg);
    return clamp_action(a);
  };
  return rollout_expert(start, cfg, duration, id, controller);
}

MotionClip generate_walk_clip(std::mt19937_64& rng, const EnvConfig& cfg, double duration) {
  std::uniform_real_distribution<double> speed_dist(0.3, 1.0);
  std::uniform_real_distribution<double> angle_dist(0.0, 2.0 * M_PI);
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);
  const double speed = speed_dist(rng);
  const double angle = angle_dist(rng);
  const Eigen::Vector2d cmd(speed * std::cos(angle), speed * std::sin(angle));

  EnvState start;
  start.joint_pos = cfg.joint_neutral + Eigen::Vector2d(jitter(rng), jitter(rng));
  return generate_walk_clip_with_command(cmd, start, cfg, duration, "walk");
}

MotionClip generate_reach_clip_with_target(const Eigen::Vector2d& target,
                                           const EnvState& start, const EnvConfig& cfg,
                                           double duration, const std::string& id) {
  const auto [ok, q_target] = two_link_ik(target, cfg);
  if (!ok) throw std::invalid_argument("generate_reach_clip_with_target: unreachable target");
  auto controller = [&, q_target = q_target](const EnvState& s) {
    Eigen::Vector4d a;
    a.head<2>() = (kHoldBaseKp * (-s.base_pos) - kHoldBaseKd * s.base_vel) / cfg.base_accel_scale;
    a.tail<2>() = arm_hold_action(s, q_target, cfg);
    return clamp_action(a);
  };
  return rollout_expert(start, cfg, duration, id, controller);
}

MotionClip generate_reach_clip(std::mt19937_64& rng, const EnvConfig& cfg, double duration) {
  std::uniform_real_distribution<double> radius_dist(0.3, 0.95);
  std::uniform_real_distribution<double> angle_dist(0.0, 2.0 * M_PI);
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);

  Eigen::Vector2d target;
  for (int attempt = 0;; ++attempt) {
    const double r = radius_dist(rng);
    const double a = angle_dist(rng);
    target = Eigen::Vector2d(r * std::cos(a), r * std::sin(a));
    if (two_link_ik(target, cfg).first) break;
    if (attempt > 1000)
      throw std::runtime_error("generate_reach_clip: could not sample a reachable target");
  }

  EnvState start;
  start.joint_pos = cfg.joint_neutral;
  start.base_vel = Eigen::Vector2d(jitter(rng), jitter(rng));
  return generate_reach_clip_with_target(target, start, cfg, duration, "reach");
}

MotionDataset generate_dataset(std::mt19937_64& rng, const EnvConfig& cfg, int walk_clips,
                               int reach_clips, double duration) {
  MotionDataset dataset;
  dataset.robot = kPlanarRobotTag;
  dataset.feature_names = planar_state_names();
  dataset.clips.reserve(walk_clips + reach_clips);
  char id[32];
  for (int i = 0; i < walk_clips; ++i) {
    MotionClip clip = generate_walk_clip(rng, cfg, duration);
    std::snprintf(id, sizeof(id), "walk_%03d", i);
    clip.id = id;
    dataset.clips.push_back(std::move(clip));
  }
  for (int i = 0; i < reach_clips; ++i) {
    MotionClip clip = generate_reach_clip(rng, cfg, duration);
    std::snprintf(id, sizeof(id), "reach_%03d", i);
    clip.id = id;
    dataset.clips.push_back(std::move(clip));
  }
  dataset.validate();
  return dataset;
}

}  // namespace lsail
