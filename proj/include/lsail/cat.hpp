#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace lsail {

struct CatConstraintConfig {
  std::string name;
  double final_pmax = 0.2;
  double ramp_start_fraction = 0.7;
};

/// Constraints-as-terminations bookkeeping: per-constraint filtered
/// maximum violation and the scheduled termination cap p_max.
class CatState {
 public:
  static constexpr double kEmaRate = 0.05;
  static constexpr double kCmaxFloor = 1e-6;

  CatState() = default;
  explicit CatState(std::vector<CatConstraintConfig> constraints);

  int constraint_count() const { return static_cast<int>(constraints_.size()); }
  const std::vector<CatConstraintConfig>& constraints() const { return constraints_; }
  const Eigen::VectorXd& cmax() const { return cmax_; }
  const Eigen::VectorXd& pmax() const { return pmax_; }

  /// Termination probability for one step's positive violations c+:
  /// max_i pmax_i * clip(c+_i / cmax_i, 0, 1).
  double delta(const Eigen::VectorXd& violations_pos) const;

  /// EMA toward the batch maximum of c+, floored at kCmaxFloor.
  /// One row per constraint, one column per sample.
  void update_cmax(const Eigen::MatrixXd& batch_violations_pos);

  /// pmax_i stays 0 before its ramp start, then rises linearly to the
  /// configured final value at `total_epochs`.
  void schedule_pmax(int epoch, int total_epochs);

 private:
  std::vector<CatConstraintConfig> constraints_;
  Eigen::VectorXd cmax_;
  Eigen::VectorXd pmax_;
};

/// gamma * (1 - delta): the per-step discount that realizes terminated
/// returns in expectation inside GAE and value targets.
double effective_discount(double delta, double gamma);

}  // namespace lsail
