// Command line driver: nominal -> generate -> train -> evaluate -> rollout -> export.

#include "pontryagus/datagen.hpp"
#include "pontryagus/network.hpp"
#include "pontryagus/nominal.hpp"
#include "pontryagus/parallel.hpp"
#include "pontryagus/rollout.hpp"
#include "pontryagus/run_config.hpp"
#include "pontryagus/seeding.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <set>

namespace fs = std::filesystem;
using namespace pontryagus;

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kSolver = 3, kIo = 4 };

class PrerequisiteError : public std::runtime_error {
 public:
  explicit PrerequisiteError(const std::string& path, const std::string& hint)
      : std::runtime_error("missing prerequisite " + path + " (" + hint + ")") {}
};

class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  int threads = -1;
};

struct Run {
  RunConfig cfg;
  TransferProblem prob;
  fs::path out;
  int threads = 1;
};

Run open_run(const Common& c) {
  Run r;
  r.cfg = load_run_config(c.config_path, std::getenv("PONTRYAGUS_SEED"));
  r.prob = r.cfg.mission.problem();
  r.out = r.cfg.output_dir;
  r.threads = resolve_threads(c.threads >= 0 ? c.threads : r.cfg.threads);
  fs::create_directories(r.out);
  return r;
}

std::string path_in(const Run& r, const std::string& name) { return (r.out / name).string(); }

void require_file(const std::string& path, const std::string& hint) {
  if (!fs::exists(path)) throw PrerequisiteError(path, hint);
}

std::string g17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string g6(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

int switch_count(const TrajectoryRecord& t) {
  int n = 0;
  for (std::size_t j = 1; j < t.nodes.size(); ++j) n += t.nodes[j].ctrl.u != t.nodes[j - 1].ctrl.u;
  return n;
}

// A nominal is stored as a one-trajectory dataset so that its arrival
// anomaly and units travel with it.
void write_nominal(const Run& r, const TpbvpSolution& sol, AlphaLabel label, const std::string& path) {
  OptimalControlDataset ds;
  ds.info.label = label;
  ds.info.seed = r.cfg.seed;
  ds.info.departure = r.prob.departure.elements;
  ds.info.arrival = r.prob.arrival.elements;
  ds.info.mu = r.prob.mu;
  stamp_units(ds.info, r.cfg.mission);
  Provenance p;
  p.Ef = sol.z.Ef;
  p.seed = r.cfg.seed;
  ds.trajectories.push_back(sol.trajectory);
  ds.provenance.push_back(p);
  write_dataset(ds, path);
}

TpbvpSolution read_nominal(const std::string& path) {
  require_file(path, "run the nominal command first");
  const OptimalControlDataset ds = read_dataset(path);
  if (ds.trajectories.size() != 1) throw DatasetIoError(path + " is not a nominal trajectory file");
  TpbvpSolution s;
  s.trajectory = ds.trajectories[0];
  s.alpha = s.trajectory.alpha;
  s.z.lam0 = s.trajectory.nodes.front().lam;
  s.z.dt = s.trajectory.duration();
  s.z.Ef = ds.provenance[0].Ef;
  s.status = SolveStatus::kConverged;
  return s;
}

int cmd_nominal(const Common& c) {
  Run r = open_run(c);
  const NominalSolutions nom = solve_nominal(r.prob, r.cfg.nominal_config());
  write_nominal(r, nom.qoc, AlphaLabel::kQoc, path_in(r, "nominal_qoc.csv"));
  write_nominal(r, nom.moc, AlphaLabel::kMoc, path_in(r, "nominal_moc.csv"));

  const CanonicalUnits cu = r.cfg.mission.units();
  std::string summary;
  summary += "seed=" + std::to_string(r.cfg.seed) + "\n";
  summary += "restarts_used=" + std::to_string(nom.restarts_used) + "\n";
  summary += "time_of_flight_days=" + g17(cu.time_to_si(nom.qoc.z.dt) / 86400.0) + "\n";
  for (const auto* s : {&nom.qoc, &nom.moc}) {
    const std::string tag = s == &nom.qoc ? "qoc" : "moc";
    summary += tag + ".final_mass_kg=" + g17(cu.mass_to_si(s->trajectory.nodes.back().x.m)) + "\n";
    summary += tag + ".residual_inf=" + g17(s->residual_norm) + "\n";
    summary += tag + ".nodes=" + std::to_string(s->trajectory.nodes.size()) + "\n";
  }
  summary += "moc.switches=" + std::to_string(switch_count(nom.moc.trajectory)) + "\n";
  {
    std::FILE* f = std::fopen(path_in(r, "nominal_summary.txt").c_str(), "wb");
    if (!f) throw DatasetIoError("cannot write " + path_in(r, "nominal_summary.txt"));
    std::fputs(summary.c_str(), f);
    std::fclose(f);
  }
  std::cout << summary;
  return kOk;
}

int cmd_generate(const Common& c, const std::string& label_text, bool check) {
  Run r = open_run(c);
  const AlphaLabel label = parse_alpha_label(label_text);
  GenerationStats stats;
  OptimalControlDataset ds;
  const NewtonOptions newton = continuation_newton_options();
  if (label == AlphaLabel::kQoc) {
    const TpbvpSolution nominal = read_nominal(path_in(r, "nominal_qoc.csv"));
    ds = build_qoc_dataset(nominal, r.prob, r.cfg.walk, r.threads, &stats, newton);
    std::cout << "walk steps accepted " << stats.walk_successes << "/" << stats.walk_attempts << ", origin re-solves "
              << stats.origin_resolves << "/" << r.cfg.walk.start_points << "\n";
  } else {
    const std::string qoc_path = path_in(r, "qoc.csv");
    require_file(qoc_path, "run generate --alpha-label qoc first");
    const OptimalControlDataset qoc = read_dataset(qoc_path);
    ds = build_moc_dataset(qoc, r.prob, r.cfg.homotopy, r.threads, &stats, newton);
    std::cout << "homotopies converged " << stats.homotopy_successes << "/" << stats.homotopy_attempts << "\n";
  }
  for (const std::string& f : stats.failures) std::cout << "  " << f << "\n";
  if (ds.trajectories.empty()) throw SolverFailure("no trajectory converged");
  stamp_units(ds.info, r.cfg.mission);
  const std::string path = path_in(r, std::string(to_string(label)) + ".csv");
  write_dataset(ds, path);
  std::cout << "wrote " << path << ": " << ds.trajectories.size() << " trajectories, " << ds.pair_count()
            << " state-control pairs\n";
  if (check) {
    const DatasetCheck chk = check_dataset(ds, r.prob);
    std::cout << "check: max control mismatch " << g6(chk.max_control_mismatch) << ", max re-propagation residual "
              << g6(chk.max_residual) << "\n";
  }
  return kOk;
}

std::string model_stem(const std::string& dataset, const std::vector<Target>& targets) {
  std::string t = format_targets(targets);
  for (char& ch : t) {
    if (ch == ',') ch = '-';
  }
  return "model_" + fs::path(dataset).stem().string() + "_" + t;
}

int cmd_train(const Common& c, std::string dataset, const std::string& targets_text, std::string model_path,
              bool resume) {
  Run r = open_run(c);
  std::vector<Target> targets;
  try {
    targets = parse_targets(targets_text);
  } catch (const std::invalid_argument& e) {
    throw CLI::ValidationError("--targets", e.what());
  }
  if (dataset.empty()) dataset = path_in(r, "qoc.csv");
  require_file(dataset, "run the generate command first");
  if (model_path.empty()) model_path = path_in(r, model_stem(dataset, targets) + ".txt");
  const std::string ckpt = model_path + ".ckpt";
  const std::string history = fs::path(model_path).replace_extension("").string() + "_history.csv";

  const OptimalControlDataset ds = read_dataset(dataset);
  const TrainingRows rows = rows_from_dataset(ds, targets);
  std::optional<Trainer> trainer;
  if (resume) {
    require_file(ckpt, "no checkpoint to resume from");
    trainer.emplace(Trainer::resume(ckpt, rows));
    if (trainer->model().targets != targets) {
      throw TargetMismatchError("checkpoint was trained on {" + format_targets(trainer->model().targets) + "}");
    }
    std::cout << "resumed at epoch " << trainer->report().epochs_run << "\n";
  } else {
    trainer.emplace(rows, targets, r.cfg.training);
  }
  std::cout << "training {" << format_targets(targets) << "} on " << trainer->report().train_rows << " rows, "
            << trainer->report().val_rows << " held out\n";
  try {
    while (trainer->run_epoch()) {
      const TrainReport& rep = trainer->report();
      if (rep.epochs_run % 10 == 0) {
        std::cout << "epoch " << rep.epochs_run << " train " << g6(rep.train_loss_history.back()) << " val "
                  << g6(rep.val_loss_history.back()) << " lr " << g6(rep.lr_history.back()) << std::endl;
      }
      if (r.cfg.checkpoint_every > 0 && rep.epochs_run % r.cfg.checkpoint_every == 0) trainer->save_checkpoint(ckpt);
    }
  } catch (const TrainingDivergedError& e) {
    throw SolverFailure(std::string(e.what()) + "; last finite epoch " + std::to_string(e.last_finite_epoch()));
  }
  const TrainReport rep = trainer->final_report();
  save_model(trainer->model(), model_path);
  export_figure_data(rep, history);
  if (r.cfg.checkpoint_every > 0) trainer->save_checkpoint(ckpt);
  std::cout << "epochs run " << rep.epochs_run << " (" << rep.stop_reason << ")\n";
  for (std::size_t k = 0; k < targets.size(); ++k) {
    std::cout << "  " << to_string(targets[k]) << ": val MSE " << g6(rep.val_mse[k]) << ", train MSE "
              << g6(rep.train_mse[k]) << " (scaled targets)\n";
  }
  std::cout << "wrote " << model_path << " and " << history << "\n";
  return kOk;
}

std::vector<int> held_out_trajectories(const OptimalControlDataset& ds, const RunConfig& cfg,
                                       const std::vector<Target>& targets) {
  const TrainingRows rows = rows_from_dataset(ds, targets);
  std::vector<int> train, val;
  split_rows(rows, cfg.training.val_fraction, derive_seed(cfg.training.seed, 1), train, val);
  std::vector<int> ids;
  std::set<int> seen;
  for (int col : val) {
    if (seen.insert(rows.trajectory[col]).second) ids.push_back(rows.trajectory[col]);
  }
  return ids;
}

int cmd_evaluate(const Common& c, const std::string& model_path, std::string dataset, const std::string& targets_text,
                 int transfers) {
  Run r = open_run(c);
  require_file(model_path, "run the train command first");
  const GuidanceModel model = load_model(model_path);
  std::vector<Target> expected;
  if (!targets_text.empty()) expected = parse_targets(targets_text);
  if (!expected.empty() && expected != model.targets) {
    throw TargetMismatchError("model " + model_path + " predicts {" + format_targets(model.targets) + "}, not {" +
                              format_targets(expected) + "}");
  }
  if (dataset.empty()) dataset = path_in(r, "qoc.csv");
  require_file(dataset, "run the generate command first");
  const OptimalControlDataset ds = read_dataset(dataset);
  std::vector<int> ids = held_out_trajectories(ds, r.cfg, model.targets);
  const int n = std::min<int>(transfers > 0 ? transfers : r.cfg.eval_transfers, static_cast<int>(ids.size()));
  const NetworkFeedback feedback(model);
  const std::string stem = fs::path(model_path).stem().string();
  for (int k = 0; k < n; ++k) {
    const PredictionReport rep = evaluate_on_trajectory(feedback, ds.trajectories[ids[k]], expected);
    const std::string out = path_in(r, "eval_" + stem + "_" + std::to_string(k) + ".csv");
    export_figure_data(rep, out);
    std::cout << "trajectory " << ids[k] << ":";
    for (std::size_t t = 0; t < rep.targets.size(); ++t) {
      std::cout << " " << to_string(rep.targets[t]) << " MSE " << g6(rep.mse_scaled[t]);
    }
    std::cout << " (scaled) -> " << out << "\n";
  }
  return kOk;
}

int cmd_rollout(const Common& c, const std::vector<std::string>& model_paths, const std::string& nominal_label,
                bool zero_thrust, double update_fraction) {
  Run r = open_run(c);
  const AlphaLabel label = parse_alpha_label(nominal_label);
  const TpbvpSolution nominal = read_nominal(path_in(r, std::string("nominal_") + to_string(label) + ".csv"));
  std::vector<GuidanceModel> models;
  for (const std::string& p : model_paths) {
    require_file(p, "run the train command first");
    models.push_back(load_model(p));
  }
  std::unique_ptr<Controller> controller;
  std::string stem;
  if (zero_thrust) {
    controller = std::make_unique<ZeroThrustController>();
    stem = "zero_thrust";
  } else {
    if (models.empty()) throw CLI::ValidationError("--model", "at least one model is required without --zero-thrust");
    std::vector<const GuidanceModel*> ptrs;
    for (const auto& m : models) ptrs.push_back(&m);
    controller = std::make_unique<NetworkController>(ptrs);
    stem = fs::path(model_paths.front()).stem().string();
  }
  const TrajectoryRecord& ref = nominal.trajectory;
  RolloutOptions opt;
  opt.control_update_dt = ref.duration() * (update_fraction > 0.0 ? update_fraction : r.cfg.rollout_update_fraction);
  const RolloutResult res = closed_loop_rollout(*controller, ref.nodes.front().x, ref.duration(),
                                                r.prob.with_alpha(ref.alpha), opt);
  const std::string out = path_in(r, "rollout_" + stem + ".csv");
  export_figure_data(res, out);
  const double nominal_prop = ref.nodes.front().x.m - ref.nodes.back().x.m;
  std::cout << "arrival position error " << g6(res.arrival_pos_err) << " LU, velocity error " << g6(res.arrival_vel_err)
            << " LU/TU\n";
  std::cout << "final mass " << g6(res.final_mass) << ", propellant used " << g6(res.propellant_used) << " (nominal "
            << g6(nominal_prop) << ")\n";
  std::cout << "wrote " << out << "\n";
  return kOk;
}

int cmd_export(const Common& c) {
  Run r = open_run(c);
  const TpbvpSolution qoc = read_nominal(path_in(r, "nominal_qoc.csv"));
  const TpbvpSolution moc = read_nominal(path_in(r, "nominal_moc.csv"));
  const std::string out = path_in(r, "fig1_nominal.csv");
  export_figure_data({{"qoc", &qoc.trajectory}, {"moc", &moc.trajectory}}, out);
  std::cout << "wrote " << out << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal low-thrust transfers, dataset generation and learned guidance"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", common.config_path, "Run configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--threads", common.threads, "Worker threads (0: all cores; default from config)")
        ->check(CLI::NonNegativeNumber);
  };

  auto* nominal = app.add_subcommand("nominal", "Solve the nominal QOC and MOC transfers");
  add_common(nominal);

  std::string alpha_label;
  bool check = false;
  auto* generate = app.add_subcommand("generate", "Build a QOC (random walks) or MOC (homotopy) dataset");
  add_common(generate);
  generate->add_option("--alpha-label", alpha_label, "qoc or moc")->required()->check(CLI::IsMember({"qoc", "moc"}));
  generate->add_flag("--check", check, "Recompute every control and re-propagate every trajectory");

  std::string dataset, targets = "u,phi,theta", model_out;
  bool resume = false;
  auto* train = app.add_subcommand("train", "Train a guidance network on a dataset");
  add_common(train);
  train->add_option("--dataset", dataset, "Dataset CSV (default: <output_dir>/qoc.csv)");
  train->add_option("--targets", targets, "Comma-separated subset of u,phi,theta")->capture_default_str();
  train->add_option("--model", model_out, "Model file to write (default derived from dataset and targets)");
  train->add_flag("--resume", resume, "Continue from <model>.ckpt");

  std::string model_in, eval_dataset, eval_targets;
  int transfers = 0;
  auto* evaluate = app.add_subcommand("evaluate", "Per-node predictions on held-out transfers");
  add_common(evaluate);
  evaluate->add_option("--model", model_in, "Model file")->required();
  evaluate->add_option("--dataset", eval_dataset, "Dataset CSV (default: <output_dir>/qoc.csv)");
  evaluate->add_option("--targets", eval_targets, "Expected target set; a mismatch is an error");
  evaluate->add_option("--transfers", transfers, "Held-out transfers to evaluate (default from config)")
      ->check(CLI::PositiveNumber);

  std::vector<std::string> rollout_models;
  std::string rollout_nominal = "moc";
  bool zero_thrust = false;
  double update_fraction = 0.0;
  auto* rollout = app.add_subcommand("rollout", "Fly the nominal departure state under network control");
  add_common(rollout);
  rollout->add_option("--model", rollout_models, "Model file(s) jointly predicting u, phi and theta");
  rollout->add_option("--nominal", rollout_nominal, "Nominal to start from and compare with")
      ->check(CLI::IsMember({"qoc", "moc"}))
      ->capture_default_str();
  rollout->add_flag("--zero-thrust", zero_thrust, "Coast instead of using a model");
  rollout->add_option("--update-fraction", update_fraction, "Hold length as a fraction of the time of flight")
      ->check(CLI::Range(1e-9, 1.0));

  auto* exp = app.add_subcommand("export", "Write the nominal trajectories as figure data");
  add_common(exp);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*nominal) return cmd_nominal(common);
    if (*generate) return cmd_generate(common, alpha_label, check);
    if (*train) return cmd_train(common, dataset, targets, model_out, resume);
    if (*evaluate) return cmd_evaluate(common, model_in, eval_dataset, eval_targets, transfers);
    if (*rollout) return cmd_rollout(common, rollout_models, rollout_nominal, zero_thrust, update_fraction);
    if (*exp) return cmd_export(common);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const TargetMismatchError& e) {
    std::cerr << "target mismatch: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NominalSolveError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolver;
  } catch (const SolverFailure& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolver;
  } catch (const RolloutError& e) {
    std::cerr << "rollout failure: " << e.what() << "\n";
    return kSolver;
  } catch (const PropagationError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolver;
  } catch (const std::exception& e) {
    // Remaining library errors are file problems: missing prerequisites,
    // unreadable or malformed datasets and models, failed writes.
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  }
  return kUsage;
}
