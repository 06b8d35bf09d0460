#pragma once

// Feed-forward guidance network: state -> (u, phi, theta) subsets.

#include "pontryagus/datagen.hpp"
#include "pontryagus/dynamics.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace pontryagus {

enum class Target { kU, kPhi, kTheta };

const char* to_string(Target t);
/// Comma-separated subset of {u, phi, theta}, no repeats.
std::vector<Target> parse_targets(const std::string& text);
std::string format_targets(const std::vector<Target>& targets);

/// Native value of `t` in a control action.
double target_value(const ControlAction& c, Target t);

struct Polar {
  double u = 0.0;
  double theta = 0.0;
  double phi = 0.0;
};
Polar control_to_polar(const ControlAction& c);
Vec3 polar_to_direction(double theta, double phi);

class ModelFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ZeroVarianceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingDivergedError : public std::runtime_error {
 public:
  TrainingDivergedError(int last_finite_epoch, const std::string& what)
      : std::runtime_error(what), last_finite_epoch_(last_finite_epoch) {}
  int last_finite_epoch() const { return last_finite_epoch_; }

 private:
  int last_finite_epoch_;
};

/// Plain multilayer perceptron: ReLU hidden layers, tanh output.
struct Mlp {
  std::vector<Eigen::MatrixXd> W;  // W[l] is dims[l+1] x dims[l]
  std::vector<Eigen::VectorXd> b;

  static Mlp zeros(const std::vector<int>& dims);
  /// Glorot-uniform weights, zero biases.
  static Mlp glorot(const std::vector<int>& dims, std::mt19937_64& rng);

  std::vector<int> dims() const;
  std::size_t parameter_count() const;
  /// Columns of `x` are samples; returns outputs in [-1, 1].
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
};

struct MlpGradients {
  std::vector<Eigen::MatrixXd> W;
  std::vector<Eigen::VectorXd> b;
  double loss = 0.0;
};

/// Mean squared error over all outputs and samples of the batch, and its
/// exact gradient by reverse-mode differentiation.
MlpGradients backprop_gradient(const Mlp& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

struct InputNormalization {
  Vec7 mean = Vec7::Zero();
  Vec7 std = Vec7::Ones();
};

/// Affine map of each target from [lo, hi] to [-1, 1].
struct OutputScale {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  Eigen::MatrixXd to_scaled(const Eigen::MatrixXd& native) const;
  Eigen::MatrixXd to_native(const Eigen::MatrixXd& scaled) const;
};

/// Rows of a dataset in matrix form: columns are samples.
struct TrainingRows {
  Eigen::MatrixXd x;           // 7 x N raw states
  Eigen::MatrixXd y;           // K x N native targets
  std::vector<int> trajectory;  // trajectory id of every column
};

TrainingRows rows_from_dataset(const OptimalControlDataset& ds, const std::vector<Target>& targets);

/// Z-score statistics of the 7 inputs and min/max of the targets.
void fit_normalization(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, InputNormalization& in,
                       OutputScale& out);

struct GuidanceModel {
  std::vector<Target> targets;
  Mlp net;
  InputNormalization input;
  OutputScale output;
  std::uint64_t seed = 0;

  std::vector<int> layer_dims() const { return net.dims(); }
  Eigen::MatrixXd normalize(const Eigen::MatrixXd& raw) const;
  /// Native outputs in target order; u is clamped to [0, 1].
  Eigen::VectorXd forward(const SpacecraftState& x) const;
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& raw) const;
};

/// Hidden layers of the guidance network: four of 200 units.
std::vector<int> guidance_layer_dims(int outputs);

void save_model(const GuidanceModel& model, const std::string& path);
GuidanceModel load_model(const std::string& path);

struct TrainConfig {
  int batch = 64;
  double lr0 = 1e-3;
  double lr_factor = 10.0;
  int lr_patience = 10;
  int stop_patience = 50;
  double plateau_delta = 1e-4;
  double val_fraction = 0.10;
  std::uint64_t seed = 42;
  int max_epochs = 2000;
  std::vector<int> hidden = {200, 200, 200, 200};

  void validate() const;
};

struct TrainReport {
  int epochs_run = 0;
  std::vector<double> train_loss_history;
  std::vector<double> val_loss_history;
  std::vector<double> lr_history;
  std::vector<double> val_mse;    // per target, scaled
  std::vector<double> train_mse;  // per target, scaled
  std::string stop_reason;
  std::size_t train_rows = 0;
  std::size_t val_rows = 0;
};

/// Seeded trajectory-level split: the last val_fraction of a shuffled list
/// of trajectory ids is held out.
void split_rows(const TrainingRows& rows, double val_fraction, std::uint64_t seed, std::vector<int>& train,
                std::vector<int>& val);

/// Stateful training loop; one call to run_epoch per epoch so that a run can
/// be checkpointed and resumed exactly.
class Trainer {
 public:
  Trainer(const TrainingRows& rows, std::vector<Target> targets, const TrainConfig& cfg);

  /// Returns false once training has stopped.
  bool run_epoch();
  void run();
  bool finished() const { return finished_; }

  const GuidanceModel& model() const { return model_; }
  const TrainReport& report() const { return report_; }
  TrainReport final_report() const;

  /// Model, optimizer moments, RNG and scheduler state.
  void save_checkpoint(const std::string& path) const;
  static Trainer resume(const std::string& path, const TrainingRows& rows);

 private:
  Trainer(const TrainingRows& rows, const TrainConfig& cfg);
  double evaluate_loss(const std::vector<int>& idx, std::vector<double>* per_target) const;

  const TrainingRows* rows_;
  TrainConfig cfg_;
  GuidanceModel model_;
  TrainReport report_;
  std::vector<int> train_idx_;
  std::vector<int> val_idx_;
  Eigen::MatrixXd xn_;  // normalized inputs of all rows
  Eigen::MatrixXd ys_;  // scaled targets of all rows
  std::vector<Eigen::MatrixXd> mW_, vW_;
  std::vector<Eigen::VectorXd> mb_, vb_;
  long adam_step_ = 0;
  double lr_ = 0.0;
  double best_loss_ = 0.0;
  int wait_lr_ = 0;
  int wait_stop_ = 0;
  bool finished_ = false;
  std::mt19937_64 rng_;
};

/// Convenience wrapper around Trainer.
GuidanceModel train(const TrainingRows& rows, const std::vector<Target>& targets, const TrainConfig& cfg,
                    TrainReport* report = nullptr);

}  // namespace pontryagus
