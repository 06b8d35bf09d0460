#include "pontryagus/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace pontryagus {

PredictionReport evaluate_on_trajectory(const FeedbackModel& model, const TrajectoryRecord& traj,
                                        const std::vector<Target>& expected) {
  PredictionReport rep;
  rep.targets = model.targets();
  if (!expected.empty() && expected != rep.targets) {
    throw TargetMismatchError("model predicts {" + format_targets(rep.targets) + "} but {" +
                              format_targets(expected) + "} was requested");
  }
  if (traj.nodes.empty()) throw std::invalid_argument("trajectory has no nodes");
  const Eigen::Index k = static_cast<Eigen::Index>(rep.targets.size());
  const Eigen::Index n = static_cast<Eigen::Index>(traj.nodes.size());
  rep.truth.resize(k, n);
  rep.pred.resize(k, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const TrajectoryNode& node = traj.nodes[j];
    rep.t.push_back(node.t);
    const Eigen::VectorXd p = model.predict(node.x);
    if (p.size() != k) throw TargetMismatchError("model returned the wrong number of outputs");
    rep.pred.col(j) = p;
    for (Eigen::Index r = 0; r < k; ++r) rep.truth(r, j) = target_value(node.ctrl, rep.targets[r]);
  }
  const OutputScale* scale = model.scale();
  for (Eigen::Index r = 0; r < k; ++r) {
    const double mse = (rep.pred.row(r) - rep.truth.row(r)).squaredNorm() / static_cast<double>(n);
    rep.mse.push_back(mse);
    if (scale) {
      const double g = 2.0 / (scale->hi[r] - scale->lo[r]);
      rep.mse_scaled.push_back(mse * g * g);
    }
  }
  return rep;
}

NetworkController::NetworkController(std::vector<const GuidanceModel*> models) : models_(std::move(models)) {
  auto find = [&](Target t) {
    for (const GuidanceModel* m : models_) {
      for (std::size_t r = 0; r < m->targets.size(); ++r) {
        if (m->targets[r] == t) return Source{m, static_cast<int>(r)};
      }
    }
    throw TargetMismatchError(std::string("closed-loop control needs a model predicting ") + to_string(t));
  };
  u_ = find(Target::kU);
  theta_ = find(Target::kTheta);
  phi_ = find(Target::kPhi);
}

ControlAction NetworkController::control(double, const SpacecraftState& x) const {
  std::vector<Eigen::VectorXd> out(models_.size());
  auto value = [&](const Source& s) {
    const auto i = static_cast<std::size_t>(std::find(models_.begin(), models_.end(), s.model) - models_.begin());
    if (out[i].size() == 0) out[i] = s.model->forward(x);
    return out[i][s.row];
  };
  const double u = std::clamp(value(u_), 0.0, 1.0);
  return ControlAction::from_polar(u, value(theta_), value(phi_));
}

ReplayController::ReplayController(const TrajectoryRecord& traj, const EngineParams& eng, double mu)
    : traj_(traj), eng_(eng), mu_(mu) {
  if (traj.nodes.empty()) throw std::invalid_argument("replay needs a non-empty trajectory");
  eng_.alpha = traj.alpha;
}

ControlAction ReplayController::control(double t, const SpacecraftState&) const {
  const auto& nodes = traj_.nodes;
  auto it = std::upper_bound(nodes.begin(), nodes.end(), t, [](double v, const TrajectoryNode& n) { return v < n.t; });
  if (it == nodes.begin()) return nodes.front().ctrl;
  if (it == nodes.end()) return nodes.back().ctrl;
  const TrajectoryNode& a = *std::prev(it);
  const double dt = t - a.t;
  if (dt <= 1e-12 * std::max(1.0, std::abs(t))) return a.ctrl;
  PropagateOptions popt;
  popt.record = false;
  const TrajectoryRecord piece = propagate(a.x, a.lam, dt, eng_, mu_, popt);
  return piece.nodes.back().ctrl;
}

ControlAction ReplayController::hold(double t0, double t1, const SpacecraftState& x) const {
  // Every throttle branch change is a node, so between the node times inside
  // the window the control is smooth and a midpoint sample is second order.
  const auto& nodes = traj_.nodes;
  std::vector<double> cuts{t0};
  for (auto it = std::upper_bound(nodes.begin(), nodes.end(), t0, [](double v, const TrajectoryNode& n) { return v < n.t; });
       it != nodes.end() && it->t < t1; ++it) {
    cuts.push_back(it->t);
  }
  cuts.push_back(t1);
  Vec3 thrust = Vec3::Zero();
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const ControlAction c = control(0.5 * (cuts[k] + cuts[k + 1]), x);
    thrust += (cuts[k + 1] - cuts[k]) * c.u * c.dir;
  }
  thrust /= (t1 - t0);
  const double u = thrust.norm();
  if (!(u > 0.0)) return ControlAction::from_direction(0.0, control(t0, x).dir);
  return ControlAction::from_direction(u, thrust / u);
}

Vec7 state_rhs(const Vec7& x, double u, const Vec3& dir, const EngineParams& eng, double mu) {
  const Vec3 r = x.head<3>();
  const double rn = r.norm();
  Vec7 d;
  d.head<3>() = x.segment<3>(3);
  d.segment<3>(3) = -mu / (rn * rn * rn) * r + (eng.c1 * u / x[6]) * dir;
  d[6] = -eng.c2 * u;
  return d;
}

RolloutResult closed_loop_rollout(const Controller& controller, const SpacecraftState& x0, double duration,
                                  const TransferProblem& prob, const RolloutOptions& opt) {
  if (!(duration > 0.0)) throw std::invalid_argument("rollout duration must be positive");
  const double hold = opt.control_update_dt > 0.0 ? opt.control_update_dt : duration / 1000.0;
  if (!(hold > 0.0) || !std::isfinite(hold)) throw std::invalid_argument("control_update_dt must be positive");
  if (opt.record_every < 1) throw std::invalid_argument("record_every must be positive");
  if (!(x0.m > opt.min_mass)) throw RolloutError(RolloutError::Kind::kMassDepleted, "initial mass below the limit");

  const long intervals = std::max(1L, static_cast<long>(std::ceil(duration / hold - 1e-9)));
  IntegratorOptions iopt;
  iopt.rtol = opt.tol;
  iopt.atol = opt.tol;

  RolloutResult res;
  Vec7 y = x0.to_vector();
  ControlAction last;
  for (long k = 0; k < intervals; ++k) {
    const double t0 = static_cast<double>(k) * hold;
    const double t1 = k + 1 == intervals ? duration : static_cast<double>(k + 1) * hold;
    const SpacecraftState x = SpacecraftState::from_vector(y);
    ControlAction c = controller.hold(t0, t1, x);
    c.u = std::clamp(c.u, 0.0, 1.0);
    const double dn = c.dir.norm();
    if (!(dn > 0.0) || !std::isfinite(dn)) {
      c = ControlAction{};
    } else {
      c = ControlAction::from_direction(c.u, c.dir / dn);
    }
    if (k % opt.record_every == 0) res.trajectory.push_back({t0, x, c});
    ++res.updates;

    iopt.initial_step = t1 - t0;
    bool depleted = false;
    auto rhs = [&](double, const Vec7& s) { return state_rhs(s, c.u, c.dir, prob.eng, prob.mu); };
    auto observer = [&](double, const Vec7& s) {
      depleted = !(s[6] > opt.min_mass);
      return !depleted;
    };
    const IntegrationStatus status = integrate_dopri<7>(rhs, t0, y, t1, iopt, observer);
    if (depleted) throw RolloutError(RolloutError::Kind::kMassDepleted, "mass depleted at t = " + std::to_string(t0));
    if (status != IntegrationStatus::kOk) {
      throw RolloutError(RolloutError::Kind::kIntegrationFailed, std::string("rollout integration failed: ") + to_string(status));
    }
    res.throttle_integral += c.u * (t1 - t0);
    last = c;
  }
  const SpacecraftState xf = SpacecraftState::from_vector(y);
  res.trajectory.push_back({duration, xf, last});
  res.final_mass = xf.m;
  res.propellant_used = x0.m - xf.m;
  const ClosestPoint cp = closest_point_on_orbit(xf.r, xf.v, prob.arrival, opt.velocity_weight);
  res.arrival_pos_err = cp.position_error;
  res.arrival_vel_err = cp.velocity_error;
  res.arrival_distance = cp.distance;
  return res;
}

namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path);
}

void append_state(std::string& out, const SpacecraftState& x, const ControlAction& c) {
  for (double v : {x.r.x(), x.r.y(), x.r.z(), x.v.x(), x.v.y(), x.v.z(), x.m, c.u, c.theta, c.phi}) {
    out += ',';
    out += fmt(v);
  }
}

constexpr const char* kStateColumns = "rx,ry,rz,vx,vy,vz,m,u,theta,phi";

}  // namespace

void export_figure_data(const std::vector<LabelledTrajectory>& trajectories, const std::string& path) {
  std::string out = "# kind=trajectories\n# canonical units; one row per integrator node\n";
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    out += "# traj " + std::to_string(i) + " = " + trajectories[i].label + " (alpha " + fmt(trajectories[i].traj->alpha) + ")\n";
  }
  out += std::string("traj,t,") + kStateColumns + "\n";
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    for (const TrajectoryNode& n : trajectories[i].traj->nodes) {
      out += std::to_string(i) + "," + fmt(n.t);
      append_state(out, n.x, n.ctrl);
      out += '\n';
    }
  }
  write_file(path, out);
}

void export_figure_data(const PredictionReport& report, const std::string& path) {
  std::string out = "# kind=prediction\n# targets=" + format_targets(report.targets) + "\n";
  for (std::size_t k = 0; k < report.targets.size(); ++k) {
    out += std::string("# mse.") + to_string(report.targets[k]) + "=" + fmt(report.mse[k]);
    if (k < report.mse_scaled.size()) out += " scaled=" + fmt(report.mse_scaled[k]);
    out += '\n';
  }
  out += "t";
  for (Target t : report.targets) out += std::string(",truth_") + to_string(t) + ",pred_" + to_string(t);
  out += '\n';
  for (std::size_t j = 0; j < report.t.size(); ++j) {
    out += fmt(report.t[j]);
    for (Eigen::Index k = 0; k < report.truth.rows(); ++k) {
      out += ',' + fmt(report.truth(k, static_cast<Eigen::Index>(j))) + ',' + fmt(report.pred(k, static_cast<Eigen::Index>(j)));
    }
    out += '\n';
  }
  write_file(path, out);
}

void export_figure_data(const RolloutResult& result, const std::string& path) {
  std::string out = "# kind=rollout\n# canonical units; control held from t to the next row\n";
  out += "# arrival_pos_err=" + fmt(result.arrival_pos_err) + "\n";
  out += "# arrival_vel_err=" + fmt(result.arrival_vel_err) + "\n";
  out += "# final_mass=" + fmt(result.final_mass) + "\n";
  out += "# propellant_used=" + fmt(result.propellant_used) + "\n";
  out += std::string("t,") + kStateColumns + "\n";
  for (const RolloutSample& s : result.trajectory) {
    out += fmt(s.t);
    append_state(out, s.x, s.ctrl);
    out += '\n';
  }
  write_file(path, out);
}

void export_figure_data(const TrainReport& report, const std::string& path) {
  std::string out = "# kind=train_report\n# epochs_run=" + std::to_string(report.epochs_run) + "\n";
  out += "# stop_reason=" + report.stop_reason + "\n";
  out += "# train_rows=" + std::to_string(report.train_rows) + " val_rows=" + std::to_string(report.val_rows) + "\n";
  for (std::size_t k = 0; k < report.val_mse.size(); ++k) {
    out += "# output " + std::to_string(k) + " val_mse=" + fmt(report.val_mse[k]);
    if (k < report.train_mse.size()) out += " train_mse=" + fmt(report.train_mse[k]);
    out += '\n';
  }
  out += "epoch,train_loss,val_loss,lr\n";
  for (std::size_t e = 0; e < report.train_loss_history.size(); ++e) {
    out += std::to_string(e + 1) + ',' + fmt(report.train_loss_history[e]) + ',' + fmt(report.val_loss_history[e]) +
           ',' + fmt(report.lr_history[e]) + '\n';
  }
  write_file(path, out);
}

FigureTable read_figure_data(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  FigureTable table;
  std::string line;
  long lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      table.comments.push_back(line.size() > 1 && line[1] == ' ' ? line.substr(2) : line.substr(1));
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    if (table.columns.empty()) {
      while (std::getline(ss, cell, ',')) table.columns.push_back(cell);
      continue;
    }
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0') {
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
      row.push_back(v);
    }
    if (row.size() != table.columns.size()) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": wrong number of columns");
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace pontryagus
