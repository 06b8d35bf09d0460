#pragma once

// Evaluation of trained guidance models: per-node prediction error against
// stored optimal trajectories and closed-loop flight under network control.

#include "pontryagus/network.hpp"
#include "pontryagus/shooting.hpp"

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace pontryagus {

class TargetMismatchError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Anything that predicts control targets from the state.
class FeedbackModel {
 public:
  virtual ~FeedbackModel() = default;
  virtual std::vector<Target> targets() const = 0;
  /// Native values in targets() order.
  virtual Eigen::VectorXd predict(const SpacecraftState& x) const = 0;
  /// Scale used for the scaled MSE; null when the model has none.
  virtual const OutputScale* scale() const { return nullptr; }
};

class NetworkFeedback : public FeedbackModel {
 public:
  explicit NetworkFeedback(const GuidanceModel& model) : model_(model) {}
  std::vector<Target> targets() const override { return model_.targets; }
  Eigen::VectorXd predict(const SpacecraftState& x) const override { return model_.forward(x); }
  const OutputScale* scale() const override { return &model_.output; }

 private:
  const GuidanceModel& model_;
};

struct PredictionReport {
  std::vector<Target> targets;
  std::vector<double> t;
  Eigen::MatrixXd truth;  // K x nodes, native
  Eigen::MatrixXd pred;   // K x nodes, native
  std::vector<double> mse;         // per target, native units
  std::vector<double> mse_scaled;  // per target on [-1, 1] targets; empty without a scale
};

/// Runs the model on every node of `traj`. When `expected` is non-empty the
/// model must predict exactly those targets in that order.
PredictionReport evaluate_on_trajectory(const FeedbackModel& model, const TrajectoryRecord& traj,
                                        const std::vector<Target>& expected = {});

/// Closed-loop control law: full control action at time t and state x.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual ControlAction control(double t, const SpacecraftState& x) const = 0;
  /// Action held over [t0, t1] when the state at t0 is x. Feedback laws
  /// sample at t0; open-loop laws may do better knowing the window.
  virtual ControlAction hold(double t0, double t1, const SpacecraftState& x) const {
    (void)t1;
    return control(t0, x);
  }
};

/// Combines networks that together predict u, theta and phi, e.g. a {u}
/// model with a {phi, theta} model. The first model providing a target wins.
class NetworkController : public Controller {
 public:
  explicit NetworkController(std::vector<const GuidanceModel*> models);
  ControlAction control(double t, const SpacecraftState& x) const override;

 private:
  struct Source {
    const GuidanceModel* model = nullptr;
    int row = 0;
  };
  std::vector<const GuidanceModel*> models_;
  Source u_, theta_, phi_;
};

/// Coasting everywhere.
class ZeroThrustController : public Controller {
 public:
  ControlAction control(double, const SpacecraftState&) const override { return {}; }
};

/// Replays the optimal control of a stored trajectory as a function of time,
/// ignoring the state. Between nodes the control is rebuilt exactly by
/// propagating the stored state and costate from the preceding node. A hold
/// window gets the mean thrust vector over the window, so a switch inside
/// it is accounted for in proportion.
class ReplayController : public Controller {
 public:
  ReplayController(const TrajectoryRecord& traj, const EngineParams& eng, double mu);
  ControlAction control(double t, const SpacecraftState& x) const override;
  ControlAction hold(double t0, double t1, const SpacecraftState& x) const override;

 private:
  const TrajectoryRecord& traj_;
  EngineParams eng_;
  double mu_;
};

struct RolloutOptions {
  double control_update_dt = 0.0;  // 0 selects duration / 1000
  double tol = 1e-12;
  double velocity_weight = 1.0;
  int record_every = 1;  // keep every k-th hold interval in the result
  double min_mass = 1e-6;
};

struct RolloutSample {
  double t = 0.0;
  SpacecraftState x;
  ControlAction ctrl;  // held from t until the next update
};

struct RolloutResult {
  std::vector<RolloutSample> trajectory;  // includes the final state
  double arrival_pos_err = 0.0;  // LU
  double arrival_vel_err = 0.0;  // LU/TU
  double arrival_distance = 0.0;  // weighted closest-point metric
  double final_mass = 0.0;
  double propellant_used = 0.0;  // m0 - m_final
  double throttle_integral = 0.0;  // sum of u * hold length
  int updates = 0;
};

class RolloutError : public std::runtime_error {
 public:
  enum class Kind { kMassDepleted, kIntegrationFailed };
  RolloutError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// State-only equations of motion under a fixed throttle and unit direction.
Vec7 state_rhs(const Vec7& x, double u, const Vec3& dir, const EngineParams& eng, double mu);

/// Zero-order-hold flight from x0 for `duration`: Controller::hold is asked
/// for an action at the start of every interval, which is held to its end.
/// Arrival errors are measured against the closest point of the arrival orbit.
RolloutResult closed_loop_rollout(const Controller& controller, const SpacecraftState& x0, double duration,
                                  const TransferProblem& prob, const RolloutOptions& opt = {});

/// Column-oriented figure data read back from an exported CSV.
struct FigureTable {
  std::vector<std::string> comments;  // header lines without the leading "# "
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

/// Trajectories are told apart by a numeric `traj` column; the labels are
/// listed in the header comments.
struct LabelledTrajectory {
  std::string label;
  const TrajectoryRecord* traj = nullptr;
};

void export_figure_data(const std::vector<LabelledTrajectory>& trajectories, const std::string& path);
void export_figure_data(const PredictionReport& report, const std::string& path);
void export_figure_data(const RolloutResult& result, const std::string& path);
void export_figure_data(const TrainReport& report, const std::string& path);

/// Parses an exported CSV back into its comment lines and numeric columns.
FigureTable read_figure_data(const std::string& path);

}  // namespace pontryagus
