#include "lsail/cli.hpp"

#include "lsail/checkpoint.hpp"
#include "lsail/retarget.hpp"
#include "lsail/runconfig.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace lsail {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw std::invalid_argument(what + " path is required");
  if (!fs::exists(path)) throw std::invalid_argument(what + " '" + path + "' does not exist");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  return out;
}

// ---------------------------------------------------------------------------
// gen-dataset

int cmd_gen_dataset(const RunConfig& cfg, int walk, int reach, double duration,
                    const std::string& out_path) {
  if (out_path.empty()) throw std::invalid_argument("gen-dataset: --out is required");
  if (walk + reach < 1) throw std::invalid_argument("gen-dataset: need at least one clip");
  std::mt19937_64 rng = make_stream(cfg.seed, 100);
  const MotionDataset dataset = generate_dataset(rng, cfg.env, walk, reach, duration);
  write_dataset(dataset, out_path);
  std::cerr << "wrote " << dataset.clips.size() << " clips ("
            << dataset.transition_count() << " transitions) to " << out_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train-low

void write_low_checkpoints(LowLevelTrainer& trainer, const std::string& dir,
                           const std::string& tag, int epoch, const std::string& hash) {
  save_checkpoint(make_policy_checkpoint(trainer.policy(), "policy", epoch, hash),
                  dir + "/policy_" + tag + ".json");
  save_checkpoint(make_value_checkpoint(trainer.value_net(), epoch, hash),
                  dir + "/value_" + tag + ".json");
  save_checkpoint(make_encoder_checkpoint(trainer.encoder(), epoch, hash),
                  dir + "/encoder_" + tag + ".json");
  if (trainer.adversary().kind == DiscriminatorKind::kGan) {
    save_checkpoint(make_gan_checkpoint(trainer.adversary().gan, epoch, hash),
                    dir + "/gan_" + tag + ".json");
  } else {
    save_checkpoint(make_diffusion_checkpoint(trainer.adversary().diffusion, epoch, hash),
                    dir + "/diffusion_" + tag + ".json");
  }
}

void check_resume_config(const RunConfig& cfg, const std::string& dir) {
  const std::string snapshot = dir + "/config.json";
  if (!fs::exists(snapshot))
    throw std::invalid_argument("--resume: no config snapshot in '" + dir + "'");
  const RunConfig existing = RunConfig::load(snapshot);
  if (existing.hash() != cfg.hash())
    throw std::invalid_argument("--resume: config does not match the run directory snapshot");
}

int cmd_train_low(RunConfig cfg, bool resume) {
  if (cfg.out_dir.empty()) throw std::invalid_argument("train-low: --out is required");
  require_file(cfg.dataset_path, "dataset");
  const MotionDataset dataset = read_dataset(cfg.dataset_path);
  if (cfg.low.epochs < 1) throw std::invalid_argument("train-low: epochs must be >= 1");
  if (resume) check_resume_config(cfg, cfg.out_dir);

  fs::create_directories(cfg.out_dir);
  const std::string hash = cfg.hash();
  cfg.save(cfg.out_dir + "/config.json");

  LowLevelTrainer trainer(cfg.low, dataset);
  int start_epoch = 0;
  if (resume) {
    const std::string kind = to_string(cfg.discriminator);
    trainer.policy() = policy_from_checkpoint(
        load_checkpoint(cfg.out_dir + "/policy_final.json"), "policy");
    trainer.value_net() = load_checkpoint(cfg.out_dir + "/value_final.json").net;
    trainer.encoder() =
        encoder_from_checkpoint(load_checkpoint(cfg.out_dir + "/encoder_final.json"));
    const Checkpoint disc = load_checkpoint(cfg.out_dir + "/" + kind + "_final.json");
    if (cfg.discriminator == DiscriminatorKind::kGan)
      trainer.adversary().gan = gan_from_checkpoint(disc);
    else
      trainer.adversary().diffusion = diffusion_from_checkpoint(disc);
    start_epoch = disc.epoch;
    trainer.set_epoch(start_epoch);
    std::cerr << "resuming from epoch " << start_epoch << "\n";
  }

  const std::string metrics_path = cfg.out_dir + "/metrics.csv";
  const bool fresh_metrics = !resume || !fs::exists(metrics_path);
  std::ofstream metrics(metrics_path, fresh_metrics ? std::ios::trunc : std::ios::app);
  if (!metrics) throw std::runtime_error("cannot open '" + metrics_path + "'");
  if (fresh_metrics) metrics << metrics_csv_header() << "\n";

  for (int e = start_epoch; e < cfg.low.epochs; ++e) {
    const EpochMetrics m = trainer.run_epoch();
    metrics << metrics_csv_row(m) << "\n";
    metrics.flush();
    if (cfg.checkpoint_every > 0 && m.epoch % cfg.checkpoint_every == 0)
      write_low_checkpoints(trainer, cfg.out_dir, "ep" + std::to_string(m.epoch), m.epoch, hash);
    if (m.epoch % 25 == 0 || m.epoch == cfg.low.epochs)
      std::cerr << "epoch " << m.epoch << "/" << cfg.low.epochs << " rD=" << m.mean_rd
                << " rE=" << m.mean_re << " D(policy)=" << m.disc_score_policy
                << " viol=" << m.violation_frac << "\n";
  }
  write_low_checkpoints(trainer, cfg.out_dir, "final", trainer.epoch(), hash);

  const LowLevelDiagnostics diag = trainer.diagnostics();
  json summary;
  summary["epochs"] = trainer.epoch();
  summary["config_hash"] = hash;
  summary["disc_score_policy"] = diag.disc_score_policy;
  summary["encoder_alignment_true"] = diag.encoder_alignment_true;
  summary["encoder_alignment_shuffled"] = diag.encoder_alignment_shuffled;
  open_out(cfg.out_dir + "/summary.json") << summary.dump(1) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train-high

int cmd_train_high(RunConfig cfg, const std::string& low_ckpt_path, bool resume) {
  if (cfg.out_dir.empty()) throw std::invalid_argument("train-high: --out is required");
  require_file(low_ckpt_path, "low-level checkpoint");
  if (cfg.high.epochs < 1) throw std::invalid_argument("train-high: epochs must be >= 1");

  GaussianPolicy low_policy;
  try {
    low_policy = policy_from_checkpoint(load_checkpoint(low_ckpt_path), "policy");
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("train-high: incompatible low-level checkpoint: ") +
                                e.what());
  }
  if (low_policy.input_dim() != kPolicyObsDim + cfg.high.latent_dim)
    throw std::invalid_argument("train-high: checkpoint input dim does not match config");
  if (resume) check_resume_config(cfg, cfg.out_dir);

  fs::create_directories(cfg.out_dir);
  const std::string hash = cfg.hash();
  cfg.save(cfg.out_dir + "/config.json");
  {
    json link;
    link["low_checkpoint"] = low_ckpt_path;
    link["low_config_hash"] = load_checkpoint(low_ckpt_path).config_hash;
    open_out(cfg.out_dir + "/low_checkpoint.json") << link.dump(1) << "\n";
  }

  HighLevelTrainer trainer(cfg.high, low_policy);
  int start_epoch = 0;
  if (resume) {
    const Checkpoint ckpt = load_checkpoint(cfg.out_dir + "/high_final.json");
    trainer.policy() = policy_from_checkpoint(ckpt, "high-level");
    trainer.value_net() = load_checkpoint(cfg.out_dir + "/high_value_final.json").net;
    start_epoch = ckpt.epoch;
    trainer.set_epoch(start_epoch);
    std::cerr << "resuming from epoch " << start_epoch << "\n";
  }

  const std::string metrics_path = cfg.out_dir + "/metrics.csv";
  const bool fresh_metrics = !resume || !fs::exists(metrics_path);
  std::ofstream metrics(metrics_path, fresh_metrics ? std::ios::trunc : std::ios::app);
  if (!metrics) throw std::runtime_error("cannot open '" + metrics_path + "'");
  if (fresh_metrics) metrics << metrics_csv_header() << "\n";

  auto save_high = [&](const std::string& tag, int epoch) {
    save_checkpoint(make_policy_checkpoint(trainer.policy(), "high-level", epoch, hash),
                    cfg.out_dir + "/high_" + tag + ".json");
    Checkpoint value = make_value_checkpoint(trainer.value_net(), epoch, hash);
    value.hyperparameters["level"] = "high";
    save_checkpoint(value, cfg.out_dir + "/high_value_" + tag + ".json");
  };

  for (int e = start_epoch; e < cfg.high.epochs; ++e) {
    const EpochMetrics m = trainer.run_epoch();
    metrics << metrics_csv_row(m) << "\n";
    metrics.flush();
    if (cfg.checkpoint_every > 0 && m.epoch % cfg.checkpoint_every == 0)
      save_high("ep" + std::to_string(m.epoch), m.epoch);
    if (m.epoch % 25 == 0 || m.epoch == cfg.high.epochs)
      std::cerr << "epoch " << m.epoch << "/" << cfg.high.epochs
                << " return=" << m.episode_return << " eef_err=" << m.eef_error_eval << "\n";
  }
  save_high("final", trainer.epoch());
  return 0;
}

// ---------------------------------------------------------------------------
// eval

int cmd_eval(const RunConfig& cfg, const std::string& low_path, const std::string& high_path,
             int episodes, const std::string& out_path) {
  require_file(low_path, "low-level checkpoint");
  require_file(high_path, "high-level checkpoint");
  if (episodes < 1) throw std::invalid_argument("eval: episodes must be >= 1");

  GaussianPolicy low_policy, high_policy;
  try {
    low_policy = policy_from_checkpoint(load_checkpoint(low_path), "policy");
    high_policy = policy_from_checkpoint(load_checkpoint(high_path), "high-level");
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("eval: incompatible checkpoint: ") + e.what());
  }

  HierarchicalController controller(low_policy, high_policy, cfg.env, cfg.high.task);
  const EvalReport report =
      evaluate(controller, cfg.env, cfg.high.task, cfg.constraints, episodes, cfg.seed);

  std::cout << "episodes:              " << report.episodes.size() << "\n";
  std::cout << "final eef error [m]:   " << report.mean_error << " +- " << report.std_error
            << "\n";
  std::cout << "success (err <= 0.1):  " << 100.0 * report.success_fraction(0.1) << " %\n";
  std::cout << "constraint violation:  " << report.violation_percent << " % of steps\n";
  std::cout << "fall analog:           " << report.fall_percent << " % of episodes\n";

  std::ostream* rows = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file = open_out(out_path);
    rows = &file;
  }
  *rows << "episode,final_error,violation_frac,fall\n";
  char buf[128];
  for (std::size_t i = 0; i < report.episodes.size(); ++i) {
    const EvalEpisode& ep = report.episodes[i];
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%d", i, ep.final_error, ep.violation_frac,
                  ep.fall ? 1 : 0);
    *rows << buf << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// retarget

int cmd_retarget(const std::string& model_path, const std::string& mocap_path,
                 const std::string& out_path, double alpha, double fps_out,
                 const std::string& format, const std::vector<std::string>& map_args) {
  require_file(model_path, "model");
  require_file(mocap_path, "mocap");
  if (out_path.empty()) throw std::invalid_argument("retarget: --out is required");
  if (format != "dataset" && format != "configs")
    throw std::invalid_argument("retarget: --out-format must be 'dataset' or 'configs'");

  std::map<std::string, std::string> overrides;
  for (const std::string& arg : map_args) {
    const auto eq = arg.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("retarget: --map expects frame=keypoint, got '" + arg + "'");
    overrides[arg.substr(0, eq)] = arg.substr(eq + 1);
  }

  const KinematicModel model = read_kinematic_model(model_path);
  const KeypointSequence raw = read_keypoint_sequence(mocap_path);
  const KeypointSequence seq = resample_keypoints(raw, fps_out);

  RetargetProblem problem;
  problem.model = model;
  problem.alpha = alpha;
  problem.q_neutral = neutral_configuration(model_path, model);
  problem.keypoint_for_frame = map_frames_to_keypoints(model, seq.names, overrides);

  const SequenceResult result = retarget_sequence(problem, seq.frames);

  double rms_sum = 0.0, rms_max = 0.0;
  int failed = 0;
  for (const SolveReport& r : result.reports) {
    rms_sum += r.keypoint_rms;
    rms_max = std::max(rms_max, r.keypoint_rms);
    if (r.failed) ++failed;
  }
  std::cerr << "retargeted " << result.configurations.size() << " frames at " << fps_out
            << " Hz: keypoint RMS mean=" << rms_sum / result.reports.size()
            << " max=" << rms_max << " failed=" << failed << "\n";

  if (format == "dataset") {
    MotionDataset dataset;
    dataset.robot = model.name();
    if (model.floating_base()) {
      dataset.feature_names = {"base_tx", "base_ty", "base_tz",
                               "base_rx", "base_ry", "base_rz"};
    }
    for (const KinematicLink& l : model.links())
      if (l.has_joint) dataset.feature_names.push_back(l.name);
    MotionClip clip;
    clip.id = "retarget_000";
    clip.dt = 1.0 / fps_out;
    for (const Configuration& q : result.configurations)
      clip.frames.push_back(q.flatten(model.floating_base()));
    dataset.clips.push_back(std::move(clip));
    write_dataset(dataset, out_path);
  } else {
    std::ofstream out = open_out(out_path);
    json header;
    header["version"] = 1;
    header["model"] = model.name();
    header["fps"] = fps_out;
    header["dof"] = model.dof();
    out << header.dump() << "\n";
    for (std::size_t t = 0; t < result.configurations.size(); ++t) {
      json rec;
      rec["t"] = t;
      const Eigen::VectorXd flat = result.configurations[t].flatten(model.floating_base());
      json config = json::array();
      for (Eigen::Index i = 0; i < flat.size(); ++i) config.push_back(flat[i]);
      rec["config"] = std::move(config);
      rec["objective"] = result.reports[t].objective;
      rec["keypoint_rms"] = result.reports[t].keypoint_rms;
      rec["failed"] = result.reports[t].failed;
      out << rec.dump() << "\n";
    }
  }
  return 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// gradcheck

bool run_gradcheck(double tolerance, std::uint64_t seed, std::ostream& out) {
  std::mt19937_64 rng = make_stream(seed, 200);
  bool all_pass = true;
  auto report_line = [&](const std::string& name, const GradCheckReport& r) {
    out << (r.pass ? "[PASS] " : "[FAIL] ") << name << "  max_rel_error=" << r.max_rel_error
        << " (tolerance " << tolerance << ")\n";
    all_pass = all_pass && r.pass;
  };

  // Every production architecture at its production size, checked against
  // a squared-error objective (the composite losses have dedicated
  // finite-difference tests in the module suites).
  auto check = [&](const std::string& name, FeedForwardNet& net) {
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(net.input_dim(), 2);
    const Eigen::MatrixXd target = Eigen::MatrixXd::Random(net.output_dim(), 2);
    auto loss = [&](FeedForwardNet& n) -> std::pair<double, Eigen::VectorXd> {
      const Eigen::MatrixXd y = n.forward(x);
      const Eigen::MatrixXd r = y - target;
      return {0.5 * r.squaredNorm(), n.flatten(n.backward(r))};
    };
    auto loss_only = [&](FeedForwardNet& n) {
      return 0.5 * (n.evaluate(x) - target).squaredNorm();
    };
    report_line(name, grad_check(net, loss, tolerance, 1e-5, loss_only));
  };

  GaussianPolicy policy = GaussianPolicy::init(kPolicyObsDim + 7, {256, 128}, 4, rng);
  check("policy mean net", policy.mean_net);

  FeedForwardNet value = FeedForwardNet::init({kPolicyObsDim + 7, 256, 128, 1},
                                              Activation::kTanh, Activation::kIdentity, rng);
  check("value net", value);

  GanDiscriminator disc = GanDiscriminator::init(12, {256, 256}, 1e-4, rng);
  check("discriminator net", disc.net);

  // The encoder check keeps its unit-norm head in the loop.
  {
    SkillEncoder enc = SkillEncoder::init(12, {256, 128}, 7, 5.0, rng);
    const Eigen::MatrixXd transitions = Eigen::MatrixXd::Random(12, 2);
    Eigen::MatrixXd latents(7, 2);
    std::mt19937_64 zrng = make_stream(seed, 201);
    for (int j = 0; j < 2; ++j) latents.col(j) = sample_latent(zrng).vec();
    auto loss = [&](FeedForwardNet&) -> std::pair<double, Eigen::VectorXd> {
      const EncoderLossResult r = encoder_loss(enc, transitions, latents);
      return {r.loss, r.grad};
    };
    auto loss_only = [&](FeedForwardNet&) {
      const Eigen::MatrixXd mu = enc.mean_directions(transitions);
      return -enc.kappa * (mu.array() * latents.array()).sum() / latents.cols();
    };
    report_line("skill encoder net",
                grad_check(enc.mu_net, loss, tolerance, 1e-5, loss_only));
  }

  DiffusionDiscriminator diff =
      DiffusionDiscriminator::init(12, {256, 256}, DiffusionSchedule::linear(), 4, rng);
  check("diffusion noise net", diff.eps_net);

  return all_pass;
}

// ---------------------------------------------------------------------------
// argument wiring

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args);
}

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"latent-skill adversarial imitation learning, desk scale"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags are accepted after the subcommand

  std::string config_path, out_arg;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 1;
  app.add_option("--config", config_path, "run configuration file (JSON)");
  app.add_option_function<std::uint64_t>(
         "--seed", [&](std::uint64_t s) { seed = s; seed_set = true; }, "master seed")
      ->type_name("UINT");
  app.add_option("--out", out_arg, "output file or directory");
  app.add_option("--threads", threads, "dense-kernel thread cap");

  // gen-dataset
  auto* gen = app.add_subcommand("gen-dataset", "write a synthetic walk+reach motion dataset");
  int walk = 120, reach = 20;
  double duration = 10.0;
  gen->add_option("--walk", walk, "number of walk clips");
  gen->add_option("--reach", reach, "number of reach clips");
  gen->add_option("--duration", duration, "clip length in seconds");

  // train-low
  auto* tlow = app.add_subcommand("train-low", "train the latent-conditioned low-level policy");
  std::string dataset_path, disc_kind;
  bool cat_on = false, cat_off = false, resume = false;
  int epochs_override = -1;
  tlow->add_option("--dataset", dataset_path, "motion dataset file");
  tlow->add_option("--disc", disc_kind, "discriminator kind: gan | diffusion");
  tlow->add_flag("--cat", cat_on, "enable constraints-as-terminations");
  tlow->add_flag("--no-cat", cat_off, "disable constraints-as-terminations");
  tlow->add_option("--epochs", epochs_override, "training epochs");
  tlow->add_flag("--resume", resume, "continue from the final checkpoint in --out");

  // train-high
  auto* thigh = app.add_subcommand("train-high", "train the task policy over a frozen low level");
  std::string low_ckpt;
  int high_epochs_override = -1;
  bool high_resume = false;
  thigh->add_option("--low", low_ckpt, "low-level policy checkpoint");
  thigh->add_option("--epochs", high_epochs_override, "training epochs");
  thigh->add_flag("--resume", high_resume, "continue from the final checkpoint in --out");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a trained hierarchy on reaching episodes");
  std::string eval_low, eval_high;
  int episodes = -1;
  ev->add_option("--low", eval_low, "low-level policy checkpoint");
  ev->add_option("--high", eval_high, "high-level policy checkpoint");
  ev->add_option("--episodes", episodes, "number of evaluation episodes");

  // retarget
  auto* rt = app.add_subcommand("retarget", "kinematically retarget keypoint motion data");
  std::string model_path, mocap_path, out_format = "dataset";
  double alpha = 0.005, fps_out = 50.0;
  std::vector<std::string> map_args;
  rt->add_option("--model", model_path, "kinematic model file");
  rt->add_option("--mocap", mocap_path, "keypoint sequence file");
  rt->add_option("--alpha", alpha, "joint regularization weight");
  rt->add_option("--fps", fps_out, "output rate (keypoints linearly resampled)");
  rt->add_option("--out-format", out_format, "dataset | configs");
  rt->add_option("--map", map_args, "frame=keypoint mapping overrides");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference checks of every network");
  double tolerance = 1e-4;
  gc->add_option("--tolerance", tolerance, "max relative error");

  std::vector<const char*> argv_c;
  argv_c.push_back("lsail");
  for (const std::string& a : args) argv_c.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv_c.size()), argv_c.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) {
      require_file(config_path, "config");
      cfg = RunConfig::load(config_path);
    }
    if (seed_set) cfg.seed = seed;
    if (!out_arg.empty()) cfg.out_dir = out_arg;
    cfg.threads = threads;
    Eigen::setNbThreads(std::max(1, threads));

    if (gen->parsed()) {
      cfg.sync();
      return cmd_gen_dataset(cfg, walk, reach, duration, out_arg.empty() ? "" : out_arg);
    }
    if (tlow->parsed()) {
      if (!dataset_path.empty()) cfg.dataset_path = dataset_path;
      if (!disc_kind.empty()) cfg.discriminator = discriminator_kind_from_string(disc_kind);
      if (cat_on && cat_off) throw std::invalid_argument("train-low: --cat conflicts with --no-cat");
      if (cat_on) cfg.cat_enabled = true;
      if (cat_off) cfg.cat_enabled = false;
      if (epochs_override > 0) cfg.low.epochs = epochs_override;
      cfg.sync();
      return cmd_train_low(cfg, resume);
    }
    if (thigh->parsed()) {
      if (high_epochs_override > 0) cfg.high.epochs = high_epochs_override;
      cfg.sync();
      return cmd_train_high(cfg, low_ckpt, high_resume);
    }
    if (ev->parsed()) {
      cfg.sync();
      const int n = episodes > 0 ? episodes : cfg.eval_episodes;
      // For eval, --out selects the per-episode CSV file.
      return cmd_eval(cfg, eval_low, eval_high, n, out_arg);
    }
    if (rt->parsed()) {
      return cmd_retarget(model_path, mocap_path, out_arg, alpha, fps_out, out_format, map_args);
    }
    if (gc->parsed()) {
      return run_gradcheck(tolerance, cfg.seed, std::cout) ? 0 : 3;
    }
    throw std::invalid_argument("no subcommand given");
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace lsail
