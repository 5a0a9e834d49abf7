#include "lsail/retarget.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <stdexcept>

namespace lsail {

using nlohmann::json;

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

Eigen::Matrix3d exp_so3(const Eigen::Vector3d& w) {
  const double theta2 = w.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Eigen::Matrix3d wx = skew(w);
  double a, b;
  if (theta < 1e-6) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  return Eigen::Matrix3d::Identity() + a * wx + b * wx * wx;
}

Eigen::Vector3d log_so3(const Eigen::Matrix3d& rotation) {
  const double trace = rotation.trace();
  const double cos_theta = std::clamp(0.5 * (trace - 1.0), -1.0, 1.0);
  const double theta = std::acos(cos_theta);
  if (theta < 1e-7) {
    // First-order: R ~ I + [w]x.
    return 0.5 * Eigen::Vector3d(rotation(2, 1) - rotation(1, 2),
                                 rotation(0, 2) - rotation(2, 0),
                                 rotation(1, 0) - rotation(0, 1));
  }
  if (theta > M_PI - 1e-5) {
    // Near pi the antisymmetric part vanishes; recover the axis from the
    // symmetric part R + I = 2(I cos + (1-cos) aa^T)-ish diagonal.
    Eigen::Vector3d axis;
    const Eigen::Matrix3d s = 0.5 * (rotation + Eigen::Matrix3d::Identity());
    int k = 0;
    if (s(1, 1) > s(0, 0)) k = 1;
    if (s(2, 2) > s(k, k)) k = 2;
    axis[k] = std::sqrt(std::max(0.0, s(k, k)));
    for (int i = 0; i < 3; ++i)
      if (i != k) axis[i] = s(k, i) / std::max(axis[k], 1e-12);
    axis.normalize();
    // Fix the sign with the antisymmetric part when it is not exactly zero.
    const Eigen::Vector3d anti(rotation(2, 1) - rotation(1, 2),
                               rotation(0, 2) - rotation(2, 0),
                               rotation(1, 0) - rotation(0, 1));
    if (anti.dot(axis) < 0.0) axis = -axis;
    return theta * axis;
  }
  const Eigen::Vector3d anti(rotation(2, 1) - rotation(1, 2),
                             rotation(0, 2) - rotation(2, 0),
                             rotation(1, 0) - rotation(0, 1));
  return (theta / (2.0 * std::sin(theta))) * anti;
}

Eigen::Matrix3d so3_right_jacobian(const Eigen::Vector3d& w) {
  const double theta2 = w.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Eigen::Matrix3d wx = skew(w);
  double a, b;
  if (theta < 1e-6) {
    a = 0.5 - theta2 / 24.0;
    b = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    a = (1.0 - std::cos(theta)) / theta2;
    b = (theta - std::sin(theta)) / (theta2 * theta);
  }
  return Eigen::Matrix3d::Identity() - a * wx + b * wx * wx;
}

KinematicModel::KinematicModel(std::string name, bool floating_base,
                               std::vector<KinematicLink> links,
                               std::vector<TargetFrame> frames)
    : name_(std::move(name)), floating_(floating_base), links_(std::move(links)),
      frames_(std::move(frames)) {
  if (links_.empty()) throw std::invalid_argument("KinematicModel: no links");
  joint_index_.resize(links_.size());
  for (std::size_t k = 0; k < links_.size(); ++k) {
    const KinematicLink& l = links_[k];
    if (k == 0 && l.parent != -1)
      throw std::invalid_argument("KinematicModel: first link must be the root");
    if (k > 0 && (l.parent < 0 || l.parent >= static_cast<int>(k)))
      throw std::invalid_argument("KinematicModel: link '" + l.name +
                                  "' must reference an earlier parent (acyclic tree)");
    joint_index_[k] = l.has_joint ? joint_count_++ : -1;
    if (l.has_joint && std::abs(l.joint_axis.norm() - 1.0) > 1e-9)
      throw std::invalid_argument("KinematicModel: joint axis of '" + l.name +
                                  "' must be unit length");
  }
  for (std::size_t a = 0; a < frames_.size(); ++a) {
    if (frames_[a].link < 0 || frames_[a].link >= static_cast<int>(links_.size()))
      throw std::invalid_argument("KinematicModel: frame '" + frames_[a].name +
                                  "' references an unknown link");
    for (std::size_t b = a + 1; b < frames_.size(); ++b)
      if (frames_[a].name == frames_[b].name)
        throw std::invalid_argument("KinematicModel: duplicate frame name '" +
                                    frames_[a].name + "'");
  }
}

int KinematicModel::frame_index(const std::string& name) const {
  for (std::size_t i = 0; i < frames_.size(); ++i)
    if (frames_[i].name == name) return static_cast<int>(i);
  throw std::invalid_argument("KinematicModel: unknown frame '" + name + "'");
}

Eigen::VectorXd Configuration::flatten(bool floating) const {
  Eigen::VectorXd v((floating ? 6 : 0) + joints.size());
  if (floating) {
    v.head<3>() = base_translation;
    v.segment<3>(3) = base_orientation;
    v.tail(joints.size()) = joints;
  } else {
    v = joints;
  }
  return v;
}

Configuration Configuration::unflatten(const Eigen::VectorXd& v, bool floating, int joints) {
  Configuration q;
  q.joints.resize(joints);
  if (floating) {
    if (v.size() != 6 + joints) throw std::invalid_argument("Configuration: size mismatch");
    q.base_translation = v.head<3>();
    q.base_orientation = v.segment<3>(3);
    q.joints = v.tail(joints);
  } else {
    if (v.size() != joints) throw std::invalid_argument("Configuration: size mismatch");
    q.joints = v;
  }
  return q;
}

namespace {

// Kinematics in the pre-float ("body") frame; the floating transform is
// applied on top.
struct BodyKinematics {
  std::vector<Eigen::Matrix3d> rot;   // link orientation
  std::vector<Eigen::Vector3d> pos;   // link origin
  std::vector<Eigen::Vector3d> frame_pos;
};

BodyKinematics body_kinematics(const KinematicModel& model, const Eigen::VectorXd& joints) {
  if (joints.size() != model.joint_count())
    throw std::invalid_argument("forward_kinematics: expected " +
                                std::to_string(model.joint_count()) + " joint angles, got " +
                                std::to_string(joints.size()));
  if (!joints.allFinite())
    throw std::invalid_argument("forward_kinematics: non-finite joint angles");

  const auto& links = model.links();
  BodyKinematics out;
  out.rot.resize(links.size());
  out.pos.resize(links.size());
  for (std::size_t k = 0; k < links.size(); ++k) {
    const KinematicLink& l = links[k];
    Eigen::Matrix3d parent_rot = Eigen::Matrix3d::Identity();
    Eigen::Vector3d parent_pos = Eigen::Vector3d::Zero();
    if (l.parent >= 0) {
      parent_rot = out.rot[l.parent];
      parent_pos = out.pos[l.parent];
    }
    Eigen::Matrix3d rot = parent_rot * l.offset_rotation;
    const Eigen::Vector3d pos = parent_pos + parent_rot * l.offset_translation;
    if (l.has_joint) {
      const double angle = joints[model.joint_index(static_cast<int>(k))];
      rot = rot * exp_so3(angle * l.joint_axis);
    }
    out.rot[k] = rot;
    out.pos[k] = pos;
  }
  out.frame_pos.reserve(model.frames().size());
  for (const TargetFrame& f : model.frames())
    out.frame_pos.push_back(out.pos[f.link] + out.rot[f.link] * f.offset);
  return out;
}

// Joint columns of the body-frame Jacobian for one target frame.
// Revolute joints rotate everything distal about their world axis through
// the joint origin: column = axis x (p_frame - p_joint).
void fill_joint_columns(const KinematicModel& model, const BodyKinematics& body,
                        int frame_index, Eigen::MatrixXd& jac, int joint_col_offset) {
  const TargetFrame& frame = model.frames()[frame_index];
  const Eigen::Vector3d p_frame = body.frame_pos[frame_index];
  int link = frame.link;
  while (link >= 0) {
    const KinematicLink& l = model.links()[link];
    if (l.has_joint) {
      // Axis in the body frame: orientation before the joint rotation.
      Eigen::Matrix3d pre_rot = l.offset_rotation;
      if (l.parent >= 0) pre_rot = body.rot[l.parent] * l.offset_rotation;
      const Eigen::Vector3d axis = pre_rot * l.joint_axis;
      const Eigen::Vector3d arm = p_frame - body.pos[link];
      jac.col(joint_col_offset + model.joint_index(link)) = axis.cross(arm);
    }
    link = l.parent;
  }
}

}  // namespace

std::vector<Eigen::Vector3d> forward_kinematics(const KinematicModel& model,
                                                const Configuration& q) {
  const BodyKinematics body = body_kinematics(model, q.joints);
  std::vector<Eigen::Vector3d> world;
  world.reserve(body.frame_pos.size());
  if (model.floating_base()) {
    const Eigen::Matrix3d rot = exp_so3(q.base_orientation);
    for (const Eigen::Vector3d& y : body.frame_pos)
      world.push_back(q.base_translation + rot * y);
  } else {
    world = body.frame_pos;
  }
  return world;
}

Eigen::MatrixXd fk_jacobian(const KinematicModel& model, const Configuration& q,
                            const std::string& frame_name) {
  const int frame = model.frame_index(frame_name);
  const BodyKinematics body = body_kinematics(model, q.joints);

  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(3, model.dof());
  if (model.floating_base()) {
    const Eigen::Matrix3d rot = exp_so3(q.base_orientation);
    jac.block<3, 3>(0, 0) = Eigen::Matrix3d::Identity();
    // Right-differential of the exponential map: position changes by
    // -R [y]x J_r(w) dw for the body-frame point y.
    jac.block<3, 3>(0, 3) =
        -rot * skew(body.frame_pos[frame]) * so3_right_jacobian(q.base_orientation);
    Eigen::MatrixXd joint_cols = Eigen::MatrixXd::Zero(3, model.dof());
    fill_joint_columns(model, body, frame, joint_cols, 6);
    jac.rightCols(model.joint_count()) = rot * joint_cols.rightCols(model.joint_count());
  } else {
    fill_joint_columns(model, body, frame, jac, 0);
  }
  return jac;
}

// ---------------------------------------------------------------------------
// Damped least squares

namespace {

struct SolveWorkspace {
  Eigen::VectorXd residual;
  double cost = 0.0;
};

// Residuals at (translation p, rotation matrix R, joints): stacked
// keypoint differences followed by sqrt(alpha) (q - q_neutral).
SolveWorkspace residuals(const RetargetProblem& problem, const Eigen::Matrix3Xd& keypoints,
                         const Eigen::Vector3d& p, const Eigen::Matrix3d& rot,
                         const Eigen::VectorXd& joints) {
  const KinematicModel& model = problem.model;
  const BodyKinematics body = body_kinematics(model, joints);
  const int num_frames = static_cast<int>(model.frames().size());
  const int joint_rows = model.joint_count();

  SolveWorkspace ws;
  ws.residual.resize(3 * num_frames + joint_rows);
  for (int f = 0; f < num_frames; ++f) {
    Eigen::Vector3d world = body.frame_pos[f];
    if (model.floating_base()) world = p + rot * world;
    ws.residual.segment<3>(3 * f) = world - keypoints.col(problem.keypoint_for_frame[f]);
  }
  const double sqrt_alpha = std::sqrt(problem.alpha);
  ws.residual.tail(joint_rows) = sqrt_alpha * (joints - problem.q_neutral.joints);
  ws.cost = ws.residual.squaredNorm();
  if (!ws.residual.allFinite()) throw std::runtime_error("solve_frame: non-finite residual");
  return ws;
}

}  // namespace

std::pair<Configuration, SolveReport> solve_frame(const RetargetProblem& problem,
                                                  const Eigen::Matrix3Xd& keypoints,
                                                  const Configuration& q_init) {
  const KinematicModel& model = problem.model;
  const int num_frames = static_cast<int>(model.frames().size());
  if (static_cast<int>(problem.keypoint_for_frame.size()) != num_frames)
    throw std::invalid_argument("solve_frame: frame-to-keypoint mapping incomplete");
  if (problem.q_neutral.joints.size() != model.joint_count())
    throw std::invalid_argument("solve_frame: q_neutral joint count mismatch");
  if (!q_init.flatten(model.floating_base()).allFinite())
    throw std::invalid_argument("solve_frame: non-finite initial configuration");

  const int dof = model.dof();
  const int joint_rows = model.joint_count();
  const int rows = 3 * num_frames + joint_rows;
  const int joint_col = model.floating_base() ? 6 : 0;
  const double sqrt_alpha = std::sqrt(problem.alpha);

  Eigen::Vector3d p = q_init.base_translation;
  Eigen::Matrix3d rot = exp_so3(q_init.base_orientation);
  Eigen::VectorXd joints = q_init.joints;

  SolveWorkspace ws = residuals(problem, keypoints, p, rot, joints);
  SolveReport report;
  report.objective_history.push_back(ws.cost);

  double lambda = 1e-3;
  Eigen::MatrixXd jac(rows, dof);
  for (report.iterations = 0; report.iterations < 100; ++report.iterations) {
    // Jacobian in the local chart [dp, ddelta, dq].
    const BodyKinematics body = body_kinematics(model, joints);
    jac.setZero();
    for (int f = 0; f < num_frames; ++f) {
      Eigen::MatrixXd joint_cols = Eigen::MatrixXd::Zero(3, dof);
      fill_joint_columns(model, body, f, joint_cols, joint_col);
      if (model.floating_base()) {
        jac.block<3, 3>(3 * f, 0) = Eigen::Matrix3d::Identity();
        jac.block<3, 3>(3 * f, 3) = -rot * skew(body.frame_pos[f]);
        jac.block(3 * f, 6, 3, joint_rows) =
            rot * joint_cols.rightCols(joint_rows);
      } else {
        jac.block(3 * f, 0, 3, joint_rows) = joint_cols;
      }
    }
    for (int j = 0; j < joint_rows; ++j)
      jac(3 * num_frames + j, joint_col + j) = sqrt_alpha;

    const Eigen::MatrixXd normal =
        jac.transpose() * jac + lambda * Eigen::MatrixXd::Identity(dof, dof);
    const Eigen::VectorXd step = normal.ldlt().solve(-jac.transpose() * ws.residual);
    if (step.norm() < 1e-10) {
      report.converged = true;
      break;
    }

    Eigen::Vector3d p_new = p;
    Eigen::Matrix3d rot_new = rot;
    Eigen::VectorXd joints_new = joints;
    if (model.floating_base()) {
      p_new += step.head<3>();
      rot_new = rot * exp_so3(step.segment<3>(3));
      joints_new += step.tail(joint_rows);
    } else {
      joints_new += step;
    }

    const SolveWorkspace candidate = residuals(problem, keypoints, p_new, rot_new, joints_new);
    if (candidate.cost < ws.cost) {
      p = p_new;
      rot = rot_new;
      joints = joints_new;
      ws = candidate;
      lambda = std::max(1e-12, lambda * 0.1);
      ++report.accepted_steps;
      report.objective_history.push_back(ws.cost);
    } else {
      lambda = std::min(1e12, lambda * 10.0);
    }
  }

  Configuration solution;
  solution.base_translation = p;
  solution.base_orientation = log_so3(rot);
  solution.joints = joints;

  // Joint limits by post-solve clamping.
  for (std::size_t k = 0; k < model.links().size(); ++k) {
    const KinematicLink& l = model.links()[k];
    if (!l.has_joint || !l.has_limits) continue;
    double& angle = solution.joints[model.joint_index(static_cast<int>(k))];
    if (angle < l.limit_lo || angle > l.limit_hi) {
      angle = std::clamp(angle, l.limit_lo, l.limit_hi);
      report.clamped = true;
    }
  }
  if (report.clamped) {
    std::cerr << "[lsail] solve_frame: joint limits clamped after the solve\n";
    ws = residuals(problem, keypoints, p, rot, solution.joints);
  }

  report.objective = ws.cost;
  report.keypoint_rms =
      std::sqrt(ws.residual.head(3 * num_frames).squaredNorm() / (3.0 * num_frames));
  return {solution, report};
}

SequenceResult retarget_sequence(const RetargetProblem& problem,
                                 const std::vector<Eigen::Matrix3Xd>& keypoints) {
  if (keypoints.empty()) throw std::invalid_argument("retarget_sequence: empty sequence");
  SequenceResult out;
  out.configurations.reserve(keypoints.size());
  out.reports.reserve(keypoints.size());
  Configuration current = problem.q_neutral;
  for (std::size_t t = 0; t < keypoints.size(); ++t) {
    try {
      auto [solution, report] = solve_frame(problem, keypoints[t], current);
      current = solution;
      out.configurations.push_back(std::move(solution));
      out.reports.push_back(std::move(report));
    } catch (const std::exception& e) {
      std::cerr << "[lsail] retarget_sequence: frame " << t << " failed: " << e.what() << "\n";
      SolveReport report;
      report.failed = true;
      out.configurations.push_back(current);
      out.reports.push_back(report);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// File formats

namespace {

[[noreturn]] void parse_fail(const std::string& path, int line, const std::string& what) {
  throw std::runtime_error(path + ": parse error at line " + std::to_string(line) + ": " + what);
}

Eigen::Vector3d vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw std::runtime_error("expected a 3-vector");
  return Eigen::Vector3d(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

}  // namespace

KinematicModel read_kinematic_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_kinematic_model: cannot open '" + path + "'");

  std::string text;
  int line = 0;
  bool have_header = false;
  std::string name;
  bool floating = false;
  std::vector<KinematicLink> links;
  std::vector<TargetFrame> frames;
  std::vector<std::string> link_names;

  while (std::getline(in, text)) {
    ++line;
    if (text.empty()) continue;
    json rec = json::parse(text, nullptr, false);
    if (rec.is_discarded()) parse_fail(path, line, "malformed record");
    try {
      if (!have_header) {
        if (rec.value("version", 0) != 1) parse_fail(path, line, "unsupported model version");
        name = rec.at("name").get<std::string>();
        floating = rec.at("floating_base").get<bool>();
        have_header = true;
        continue;
      }
      const std::string type = rec.at("type").get<std::string>();
      if (type == "link") {
        KinematicLink l;
        l.name = rec.at("name").get<std::string>();
        if (rec.contains("parent") && !rec["parent"].is_null()) {
          const std::string parent = rec["parent"].get<std::string>();
          auto it = std::find(link_names.begin(), link_names.end(), parent);
          if (it == link_names.end())
            parse_fail(path, line, "link '" + l.name + "' has unknown parent '" + parent + "'");
          l.parent = static_cast<int>(it - link_names.begin());
        }
        l.offset_translation = vec3(rec.at("offset_translation"));
        l.offset_rotation = exp_so3(vec3(rec.at("offset_rotation")));
        if (rec.contains("joint_axis") && !rec["joint_axis"].is_null()) {
          l.has_joint = true;
          l.joint_axis = vec3(rec["joint_axis"]).normalized();
        }
        if (rec.contains("limits") && !rec["limits"].is_null()) {
          l.has_limits = true;
          l.limit_lo = rec["limits"][0].get<double>();
          l.limit_hi = rec["limits"][1].get<double>();
        }
        link_names.push_back(l.name);
        links.push_back(std::move(l));
      } else if (type == "frame") {
        TargetFrame f;
        f.name = rec.at("name").get<std::string>();
        const std::string link = rec.at("link").get<std::string>();
        auto it = std::find(link_names.begin(), link_names.end(), link);
        if (it == link_names.end())
          parse_fail(path, line, "frame '" + f.name + "' references unknown link '" + link + "'");
        f.link = static_cast<int>(it - link_names.begin());
        f.offset = vec3(rec.at("offset"));
        frames.push_back(std::move(f));
      } else if (type == "neutral") {
        // consumed by neutral_configuration()
      } else {
        parse_fail(path, line, "unknown record type '" + type + "'");
      }
    } catch (const json::exception& e) {
      parse_fail(path, line, e.what());
    }
  }
  if (!have_header) throw std::runtime_error("read_kinematic_model: '" + path + "' is empty");
  return KinematicModel(name, floating, std::move(links), std::move(frames));
}

Configuration neutral_configuration(const std::string& path, const KinematicModel& model) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("neutral_configuration: cannot open '" + path + "'");
  Configuration q;
  q.joints = Eigen::VectorXd::Zero(model.joint_count());
  std::string text;
  while (std::getline(in, text)) {
    if (text.empty()) continue;
    json rec = json::parse(text, nullptr, false);
    if (rec.is_discarded() || !rec.contains("type") || rec["type"] != "neutral") continue;
    const auto values = rec.at("joints").get<std::vector<double>>();
    if (static_cast<int>(values.size()) != model.joint_count())
      throw std::runtime_error("neutral_configuration: joint count mismatch in '" + path + "'");
    for (int j = 0; j < model.joint_count(); ++j) q.joints[j] = values[j];
  }
  return q;
}

KeypointSequence read_keypoint_sequence(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_keypoint_sequence: cannot open '" + path + "'");

  KeypointSequence seq;
  std::string text;
  int line = 0;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++line;
    if (text.empty()) continue;
    json rec = json::parse(text, nullptr, false);
    if (rec.is_discarded()) parse_fail(path, line, "malformed record");
    try {
      if (!have_header) {
        seq.fps = rec.at("fps").get<double>();
        seq.names = rec.at("keypoints").get<std::vector<std::string>>();
        if (seq.fps <= 0.0) parse_fail(path, line, "fps must be positive");
        if (seq.names.empty()) parse_fail(path, line, "no keypoints declared");
        have_header = true;
        continue;
      }
      const json& pts = rec.at("points");
      if (!pts.is_array() || pts.size() != seq.names.size())
        parse_fail(path, line, "frame has wrong keypoint count");
      Eigen::Matrix3Xd frame(3, seq.names.size());
      for (std::size_t k = 0; k < pts.size(); ++k) frame.col(k) = vec3(pts[k]);
      if (!frame.allFinite()) parse_fail(path, line, "non-finite keypoint");
      seq.frames.push_back(std::move(frame));
    } catch (const json::exception& e) {
      parse_fail(path, line, e.what());
    }
  }
  if (!have_header || seq.frames.empty())
    throw std::runtime_error("read_keypoint_sequence: '" + path + "' has no frames");
  return seq;
}

KeypointSequence resample_keypoints(const KeypointSequence& seq, double fps_out) {
  if (fps_out <= 0.0) throw std::invalid_argument("resample_keypoints: fps_out must be positive");
  if (seq.frames.empty()) throw std::invalid_argument("resample_keypoints: empty sequence");
  if (fps_out == seq.fps) return seq;

  KeypointSequence out;
  out.fps = fps_out;
  out.names = seq.names;
  const double duration = (seq.frames.size() - 1) / seq.fps;
  const int count = static_cast<int>(std::floor(duration * fps_out)) + 1;
  out.frames.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double t = std::min(i / fps_out * seq.fps, double(seq.frames.size() - 1));
    const int lo = static_cast<int>(std::floor(t));
    const int hi = std::min<int>(lo + 1, seq.frames.size() - 1);
    const double u = t - lo;
    out.frames.push_back((1.0 - u) * seq.frames[lo] + u * seq.frames[hi]);
  }
  return out;
}

std::vector<int> map_frames_to_keypoints(const KinematicModel& model,
                                         const std::vector<std::string>& keypoint_names,
                                         const std::map<std::string, std::string>& overrides) {
  std::vector<int> mapping;
  mapping.reserve(model.frames().size());
  for (const TargetFrame& frame : model.frames()) {
    std::string wanted = frame.name;
    if (auto it = overrides.find(frame.name); it != overrides.end()) wanted = it->second;
    auto kp = std::find(keypoint_names.begin(), keypoint_names.end(), wanted);
    if (kp == keypoint_names.end())
      throw std::invalid_argument("no keypoint named '" + wanted + "' for target frame '" +
                                  frame.name + "'");
    mapping.push_back(static_cast<int>(kp - keypoint_names.begin()));
  }
  return mapping;
}

}  // namespace lsail
