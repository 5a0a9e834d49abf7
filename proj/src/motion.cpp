#include "lsail/motion.hpp"

#include <json.hpp>

#include <fstream>
#include <stdexcept>

namespace lsail {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

// The planar loco-manipulation robot: state is
// [base_pos(2), base_vel(2), joint_pos(2), joint_vel(2)].
constexpr const char* kPlanarTag = "planar-lm";
constexpr int kPlanarStateDim = 8;

}  // namespace

void MotionDataset::validate() const {
  if (clips.empty()) throw std::invalid_argument("MotionDataset: no clips");
  const double dt0 = clips.front().dt;
  const Eigen::Index dim0 = clips.front().frames.empty() ? 0 : clips.front().frames.front().size();
  for (const MotionClip& clip : clips) {
    if (!(clip.dt > 0.0))
      throw std::invalid_argument("MotionDataset: clip '" + clip.id + "' has dt <= 0");
    if (clip.dt != dt0)
      throw std::invalid_argument("MotionDataset: clip '" + clip.id + "' dt differs from dataset dt");
    if (clip.frames.size() < 2)
      throw std::invalid_argument("MotionDataset: clip '" + clip.id + "' has fewer than 2 frames");
    for (const Eigen::VectorXd& f : clip.frames) {
      if (f.size() != dim0)
        throw std::invalid_argument("MotionDataset: clip '" + clip.id +
                                    "' has mismatched frame dimensions");
      if (!f.allFinite())
        throw std::invalid_argument("MotionDataset: clip '" + clip.id + "' has non-finite frames");
    }
  }
  if (!feature_names.empty() && static_cast<Eigen::Index>(feature_names.size()) != dim0)
    throw std::invalid_argument("MotionDataset: feature_names size does not match frame dimension");
}

std::int64_t MotionDataset::transition_count() const {
  std::int64_t n = 0;
  for (const MotionClip& clip : clips) n += clip.transition_count();
  return n;
}

double MotionDataset::dt() const {
  return clips.empty() ? 0.0 : clips.front().dt;
}

int MotionDataset::state_dim() const {
  if (clips.empty() || clips.front().frames.empty()) return 0;
  return static_cast<int>(clips.front().frames.front().size());
}

int discriminator_feature_dim(const std::string& robot) {
  if (robot == kPlanarTag) return 6;
  throw std::invalid_argument("discriminator_feature_dim: unknown robot tag '" + robot + "'");
}

Eigen::VectorXd discriminator_features(const Eigen::VectorXd& state, const std::string& robot) {
  if (robot != kPlanarTag)
    throw std::invalid_argument("discriminator_features: unknown robot tag '" + robot + "'");
  if (state.size() != kPlanarStateDim)
    throw std::invalid_argument("discriminator_features: expected state dimension 8");
  return state.tail(6);  // skip absolute base position
}

Eigen::MatrixXd discriminator_features_batch(const Eigen::MatrixXd& states,
                                             const std::string& robot) {
  if (robot != kPlanarTag)
    throw std::invalid_argument("discriminator_features: unknown robot tag '" + robot + "'");
  if (states.rows() != kPlanarStateDim)
    throw std::invalid_argument("discriminator_features: expected state dimension 8");
  return states.bottomRows(6);
}

TransitionBatch sample_dataset_transitions(const MotionDataset& dataset, int batch,
                                           std::mt19937_64& rng) {
  if (batch < 1) throw std::invalid_argument("sample_dataset_transitions: batch must be >= 1");
  const std::int64_t total = dataset.transition_count();
  if (total < 1) throw std::invalid_argument("sample_dataset_transitions: dataset has no transitions");

  const int feat = discriminator_feature_dim(dataset.robot);
  TransitionBatch out;
  out.features.resize(2 * feat, batch);
  out.source.assign(batch, TransitionSource::kDataset);

  std::uniform_int_distribution<std::int64_t> pick(0, total - 1);
  for (int b = 0; b < batch; ++b) {
    std::int64_t idx = pick(rng);
    for (const MotionClip& clip : dataset.clips) {
      if (idx < clip.transition_count()) {
        out.features.col(b).head(feat) =
            discriminator_features(clip.frames[idx], dataset.robot);
        out.features.col(b).tail(feat) =
            discriminator_features(clip.frames[idx + 1], dataset.robot);
        break;
      }
      idx -= clip.transition_count();
    }
  }
  return out;
}

void write_dataset(const MotionDataset& dataset, const std::string& path) {
  dataset.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_dataset: cannot open '" + path + "' for writing");

  json header;
  header["version"] = kFormatVersion;
  header["robot"] = dataset.robot;
  header["dt"] = dataset.dt();
  header["feature_names"] = dataset.feature_names;
  out << header.dump() << '\n';

  for (const MotionClip& clip : dataset.clips) {
    json rec;
    rec["id"] = clip.id;
    json frames = json::array();
    for (const Eigen::VectorXd& f : clip.frames) {
      json row = json::array();
      for (Eigen::Index i = 0; i < f.size(); ++i) row.push_back(f[i]);
      frames.push_back(std::move(row));
    }
    rec["frames"] = std::move(frames);
    out << rec.dump() << '\n';
  }
  if (!out) throw std::runtime_error("write_dataset: write to '" + path + "' failed");
}

namespace {

[[noreturn]] void parse_fail(int line, const std::string& what) {
  throw std::runtime_error("dataset parse error at line " + std::to_string(line) + ": " + what);
}

json parse_line(const std::string& text, int line) {
  json parsed = json::parse(text, nullptr, false);
  if (parsed.is_discarded()) parse_fail(line, "malformed record");
  return parsed;
}

}  // namespace

MotionDataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_dataset: cannot open '" + path + "'");

  MotionDataset dataset;
  std::string text;
  int line = 0;
  double dt = 0.0;
  bool have_header = false;

  while (std::getline(in, text)) {
    ++line;
    if (text.empty()) continue;
    json rec = parse_line(text, line);
    if (!have_header) {
      if (!rec.contains("version") || !rec["version"].is_number_integer())
        parse_fail(line, "missing version in header");
      if (rec["version"].get<int>() != kFormatVersion)
        throw std::runtime_error("read_dataset: unsupported format version " +
                                 rec["version"].dump() + " (expected " +
                                 std::to_string(kFormatVersion) + ")");
      if (!rec.contains("robot") || !rec.contains("dt") || !rec.contains("feature_names"))
        parse_fail(line, "incomplete header");
      dataset.robot = rec["robot"].get<std::string>();
      dt = rec["dt"].get<double>();
      dataset.feature_names = rec["feature_names"].get<std::vector<std::string>>();
      have_header = true;
      continue;
    }
    if (!rec.contains("id") || !rec.contains("frames") || !rec["frames"].is_array())
      parse_fail(line, "clip record needs 'id' and 'frames'");
    MotionClip clip;
    clip.id = rec["id"].get<std::string>();
    clip.dt = dt;
    for (const json& row : rec["frames"]) {
      if (!row.is_array()) parse_fail(line, "frame is not an array");
      Eigen::VectorXd f(row.size());
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (!row[i].is_number()) parse_fail(line, "frame entry is not a number");
        f[i] = row[i].get<double>();
      }
      clip.frames.push_back(std::move(f));
    }
    dataset.clips.push_back(std::move(clip));
  }
  if (!have_header) throw std::runtime_error("read_dataset: '" + path + "' is empty");
  dataset.validate();
  return dataset;
}

}  // namespace lsail
