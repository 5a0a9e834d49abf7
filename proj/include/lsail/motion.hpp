#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace lsail {

/// One expert demonstration: a fixed-rate sequence of full environment
/// state vectors.
struct MotionClip {
  std::string id;
  double dt = 0.0;
  std::vector<Eigen::VectorXd> frames;

  int transition_count() const { return static_cast<int>(frames.size()) - 1; }
};

struct MotionDataset {
  std::vector<MotionClip> clips;
  std::vector<std::string> feature_names;  // one name per state component
  std::string robot;

  /// Throws std::invalid_argument on any invariant violation.
  void validate() const;
  std::int64_t transition_count() const;
  double dt() const;
  int state_dim() const;
};

enum class TransitionSource { kDataset, kPolicy };

/// Batch of feature-space transitions, one column per sample:
/// column = [phi(s_t); phi(s_t+1)].
struct TransitionBatch {
  Eigen::MatrixXd features;
  std::vector<TransitionSource> source;

  int size() const { return static_cast<int>(features.cols()); }
};

/// Feature dimension F of the discriminator projection for a robot tag.
int discriminator_feature_dim(const std::string& robot);

/// Style features for one full state: base linear velocity, joint
/// positions, joint velocities. Drops absolute base position so the
/// projection is translation invariant. Unknown robot tags are a hard
/// error.
Eigen::VectorXd discriminator_features(const Eigen::VectorXd& state, const std::string& robot);

/// Column-wise batched variant.
Eigen::MatrixXd discriminator_features_batch(const Eigen::MatrixXd& states,
                                             const std::string& robot);

/// Uniformly samples `batch` consecutive-frame transitions over the whole
/// dataset (each clip weighted by its transition count) and applies the
/// feature projection. Labels every column as kDataset.
TransitionBatch sample_dataset_transitions(const MotionDataset& dataset, int batch,
                                           std::mt19937_64& rng);

/// Line-delimited text format: a header record followed by one record per
/// clip. Values round-trip exactly.
void write_dataset(const MotionDataset& dataset, const std::string& path);
MotionDataset read_dataset(const std::string& path);

}  // namespace lsail
