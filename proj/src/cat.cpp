#include "lsail/cat.hpp"

#include <algorithm>
#include <stdexcept>

namespace lsail {

CatState::CatState(std::vector<CatConstraintConfig> constraints)
    : constraints_(std::move(constraints)) {
  for (const CatConstraintConfig& c : constraints_) {
    if (c.final_pmax < 0.0 || c.final_pmax > 1.0)
      throw std::invalid_argument("CatState: final_pmax for '" + c.name + "' outside [0, 1]");
    if (c.ramp_start_fraction < 0.0 || c.ramp_start_fraction >= 1.0)
      throw std::invalid_argument("CatState: ramp_start_fraction for '" + c.name +
                                  "' outside [0, 1)");
  }
  cmax_ = Eigen::VectorXd::Constant(constraint_count(), kCmaxFloor);
  pmax_ = Eigen::VectorXd::Zero(constraint_count());
}

double CatState::delta(const Eigen::VectorXd& violations_pos) const {
  if (violations_pos.size() != constraint_count())
    throw std::invalid_argument("CatState::delta: violation count mismatch");
  double d = 0.0;
  for (int i = 0; i < constraint_count(); ++i) {
    const double ratio = std::clamp(violations_pos[i] / cmax_[i], 0.0, 1.0);
    d = std::max(d, pmax_[i] * ratio);
  }
  return d;
}

void CatState::update_cmax(const Eigen::MatrixXd& batch_violations_pos) {
  if (batch_violations_pos.rows() != constraint_count())
    throw std::invalid_argument("CatState::update_cmax: constraint count mismatch");
  if (batch_violations_pos.cols() < 1)
    throw std::invalid_argument("CatState::update_cmax: empty batch");
  for (int i = 0; i < constraint_count(); ++i) {
    const double batch_max = batch_violations_pos.row(i).maxCoeff();
    cmax_[i] = std::max(kCmaxFloor, (1.0 - kEmaRate) * cmax_[i] + kEmaRate * batch_max);
  }
}

void CatState::schedule_pmax(int epoch, int total_epochs) {
  if (epoch > total_epochs)
    throw std::invalid_argument("CatState::schedule_pmax: epoch beyond total_epochs");
  for (int i = 0; i < constraint_count(); ++i) {
    const CatConstraintConfig& c = constraints_[i];
    const double start = c.ramp_start_fraction * total_epochs;
    if (epoch <= start) {
      pmax_[i] = 0.0;
    } else {
      const double frac = (epoch - start) / (total_epochs - start);
      pmax_[i] = c.final_pmax * std::min(1.0, frac);
    }
  }
}

double effective_discount(double delta, double gamma) {
  return gamma * (1.0 - delta);
}

}  // namespace lsail
