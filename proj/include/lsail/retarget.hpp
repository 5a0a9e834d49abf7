#pragma once

#include <Eigen/Dense>

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace lsail {

// so(3) helpers. exp_so3 maps a rotation vector to a rotation matrix;
// so3_right_jacobian(w) satisfies exp(w + dw) = exp(w) exp(J_r(w) dw) to
// first order.
Eigen::Matrix3d exp_so3(const Eigen::Vector3d& w);
Eigen::Vector3d log_so3(const Eigen::Matrix3d& rotation);
Eigen::Matrix3d so3_right_jacobian(const Eigen::Vector3d& w);
Eigen::Matrix3d skew(const Eigen::Vector3d& v);

struct KinematicLink {
  std::string name;
  int parent = -1;  // -1 for the root
  Eigen::Matrix3d offset_rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d offset_translation = Eigen::Vector3d::Zero();
  bool has_joint = false;             // revolute about joint_axis when set
  Eigen::Vector3d joint_axis = Eigen::Vector3d::UnitZ();
  bool has_limits = false;
  double limit_lo = 0.0, limit_hi = 0.0;
};

struct TargetFrame {
  std::string name;
  int link = 0;
  Eigen::Vector3d offset = Eigen::Vector3d::Zero();
};

/// Rigid kinematic tree with an optional free-floating base. Links must
/// be listed parent-before-child; target frame names are unique.
class KinematicModel {
 public:
  KinematicModel() = default;
  KinematicModel(std::string name, bool floating_base, std::vector<KinematicLink> links,
                 std::vector<TargetFrame> frames);

  const std::string& name() const { return name_; }
  bool floating_base() const { return floating_; }
  const std::vector<KinematicLink>& links() const { return links_; }
  const std::vector<TargetFrame>& frames() const { return frames_; }

  int joint_count() const { return joint_count_; }
  int dof() const { return (floating_ ? 6 : 0) + joint_count_; }
  /// Index into the joint vector for a link's joint, -1 if fixed.
  int joint_index(int link) const { return joint_index_[link]; }
  int frame_index(const std::string& name) const;  // hard error if unknown

 private:
  std::string name_;
  bool floating_ = false;
  std::vector<KinematicLink> links_;
  std::vector<TargetFrame> frames_;
  std::vector<int> joint_index_;
  int joint_count_ = 0;
};

struct Configuration {
  Eigen::Vector3d base_translation = Eigen::Vector3d::Zero();
  Eigen::Vector3d base_orientation = Eigen::Vector3d::Zero();  // exponential map
  Eigen::VectorXd joints;

  Eigen::VectorXd flatten(bool floating) const;
  static Configuration unflatten(const Eigen::VectorXd& v, bool floating, int joints);
};

/// World positions of every target frame, in declaration order.
std::vector<Eigen::Vector3d> forward_kinematics(const KinematicModel& model,
                                                const Configuration& q);

/// Analytic 3 x dof Jacobian of a target frame position with respect to
/// [base translation, base exp-map coordinates, joint angles] (joints
/// only for fixed-base models).
Eigen::MatrixXd fk_jacobian(const KinematicModel& model, const Configuration& q,
                            const std::string& frame_name);

struct RetargetProblem {
  KinematicModel model;
  std::vector<int> keypoint_for_frame;  // keypoint column per target frame
  double alpha = 0.005;                 // joint regularization weight
  Configuration q_neutral;
};

struct SolveReport {
  double objective = 0.0;     // keypoint squared error + alpha term
  double keypoint_rms = 0.0;  // per-coordinate RMS of keypoint residuals
  int iterations = 0;
  int accepted_steps = 0;
  bool converged = false;
  bool clamped = false;  // joint limits engaged after the solve
  bool failed = false;
  std::vector<double> objective_history;  // initial cost, then accepted costs
};

/// Damped least squares on the stacked keypoint + joint-regularizer
/// residuals. The base orientation is re-parameterized locally, so each
/// accepted step composes a small rotation onto the current estimate.
std::pair<Configuration, SolveReport> solve_frame(const RetargetProblem& problem,
                                                  const Eigen::Matrix3Xd& keypoints,
                                                  const Configuration& q_init);

struct SequenceResult {
  std::vector<Configuration> configurations;
  std::vector<SolveReport> reports;
};

/// Solves every frame, warm-starting from the previous solution (frame 0
/// starts at q_neutral). A failed frame holds the previous configuration
/// and is flagged; the sequence continues.
SequenceResult retarget_sequence(const RetargetProblem& problem,
                                 const std::vector<Eigen::Matrix3Xd>& keypoints);

struct KeypointSequence {
  double fps = 0.0;
  std::vector<std::string> names;
  std::vector<Eigen::Matrix3Xd> frames;  // 3 x K each
};

KinematicModel read_kinematic_model(const std::string& path);
Configuration neutral_configuration(const std::string& path, const KinematicModel& model);
KeypointSequence read_keypoint_sequence(const std::string& path);

/// Linear interpolation of keypoints onto a new rate.
KeypointSequence resample_keypoints(const KeypointSequence& seq, double fps_out);

/// Matches model target frames to keypoints by name, with optional
/// explicit overrides frame->keypoint. A frame without a keypoint is a
/// hard error naming the frame.
std::vector<int> map_frames_to_keypoints(
    const KinematicModel& model, const std::vector<std::string>& keypoint_names,
    const std::map<std::string, std::string>& overrides = {});

}  // namespace lsail
