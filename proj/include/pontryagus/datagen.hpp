#pragma once

// Optimal-trajectory datasets around the nominal transfers: random walks in
// state space at fixed alpha and homotopy of every walk solution to
// mass-optimal control.

#include "pontryagus/continuation.hpp"
#include "pontryagus/shooting.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace pontryagus {

enum class AlphaLabel { kQoc, kMoc };

const char* to_string(AlphaLabel label);
AlphaLabel parse_alpha_label(const std::string& text);

struct WalkConfig {
  double gamma_bar = 0.01;
  int n = 50;
  int start_points = 10;
  std::uint64_t seed = 42;

  void validate() const;
};

/// One accepted walk step, or the unperturbed re-solve at an origin (step 0).
struct Provenance {
  int origin = -1;     // walk origin index; -1 when not from a walk
  int step = 0;        // 0 for the origin re-solve, then 1..n
  int source = -1;     // QOC trajectory id a MOC trajectory was continued from
  double t_origin = 0.0;  // nominal time of the origin node
  double Ef = 0.0;     // arrival eccentric anomaly of the solution
  std::uint64_t seed = 0;  // RNG stream seed of the walk
};

/// Everything the metadata sidecar records besides the trajectories.
struct DatasetInfo {
  AlphaLabel label = AlphaLabel::kQoc;
  std::uint64_t seed = 0;
  double gamma_bar = 0.0;
  int n = 0;
  int start_points = 0;
  double length_unit_m = 0.0;
  double mass_unit_kg = 0.0;
  double time_unit_s = 0.0;
  KeplerElements departure;
  KeplerElements arrival;
  double mu = 1.0;
};

struct OptimalControlDataset {
  DatasetInfo info;
  std::vector<TrajectoryRecord> trajectories;
  std::vector<Provenance> provenance;  // parallel to trajectories

  std::size_t pair_count() const;
};

/// Starting point of a walk: a node of the nominal and its time-to-go.
struct WalkOrigin {
  int index = 0;
  double t_nominal = 0.0;
  SpacecraftState x;
  Costate lam;
  double dt = 0.0;  // remaining time of flight
  double Ef = 0.0;
};

/// `count` origins at nominal times k * dt / count, k = 0..count-1, each the
/// node nearest to its time.
std::vector<WalkOrigin> walk_origins(const TpbvpSolution& nominal, int count);

double walk_gamma_after_success(double gamma, double gamma_bar);
double walk_gamma_after_failure(double gamma);

/// x + x (.) beta * gamma, componentwise over (r, v, m).
SpacecraftState perturb_state(const SpacecraftState& x, const Vec7& beta, double gamma);

using BetaSampler = std::function<Vec7(std::mt19937_64&)>;

/// beta ~ U(-1, 1)^7.
Vec7 sample_beta(std::mt19937_64& rng);

struct WalkResult {
  std::vector<TpbvpSolution> solutions;  // accepted steps in order
  std::vector<int> steps;                // step index (1..n) of each solution
  std::vector<double> gammas;            // gamma before each of the n steps
  int attempts = 0;
  int successes = 0;
};

/// Problem solved at every walk step: departure state fixed, time-to-go fixed,
/// arrival phase free.
TransferProblem walk_problem(const TransferProblem& base, const SpacecraftState& x, double alpha);

/// n perturbation steps from the origin at weight alpha. Failures halve gamma;
/// successes move the walk and relax gamma towards gamma_bar.
WalkResult random_walk(const WalkOrigin& origin, const TransferProblem& base, double alpha,
                       const WalkConfig& cfg, std::uint64_t stream_seed,
                       const NewtonOptions& newton = continuation_newton_options(),
                       const BetaSampler& beta = sample_beta);

struct GenerationStats {
  int walk_attempts = 0;
  int walk_successes = 0;
  int origin_resolves = 0;
  int homotopy_attempts = 0;
  int homotopy_successes = 0;
  std::vector<std::string> failures;  // one line per skipped entry
};

/// Random walks at alpha = 0 from `cfg.start_points` origins along the nominal
/// QOC solution. Each origin contributes its unperturbed re-solve (step 0)
/// followed by the accepted walk steps. Walks run on up to `threads` workers
/// and merge in origin order.
OptimalControlDataset build_qoc_dataset(const TpbvpSolution& nominal_qoc, const TransferProblem& base,
                                        const WalkConfig& cfg, int threads = 1,
                                        GenerationStats* stats = nullptr,
                                        const NewtonOptions& newton = continuation_newton_options());

/// Homotopy to alpha = 1 from the initial state, costates, time of flight and
/// arrival anomaly of every QOC trajectory. Failures are skipped and listed
/// in the stats.
OptimalControlDataset build_moc_dataset(const OptimalControlDataset& qoc, const TransferProblem& base,
                                        const HomotopyConfig& cfg, int threads = 1,
                                        GenerationStats* stats = nullptr,
                                        const NewtonOptions& newton = continuation_newton_options());

struct DatasetCheck {
  double max_control_mismatch = 0.0;  // stored vs recomputed (u, theta, phi)
  double max_residual = 0.0;          // re-propagation boundary residual, inf norm
  int worst_trajectory = -1;
};

/// Recomputes every node's control from (x, lambda, alpha) and re-propagates
/// every trajectory from its first node over its duration.
DatasetCheck check_dataset(const OptimalControlDataset& ds, const TransferProblem& base);

class DatasetFormatError : public std::runtime_error {
 public:
  DatasetFormatError(const std::string& path, long line, const std::string& what);
  long line() const { return line_; }

 private:
  long line_;
};

class DatasetIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes `path` (CSV, one row per node) and `path` with its extension
/// replaced by `.meta`.
void write_dataset(const OptimalControlDataset& ds, const std::string& path);
OptimalControlDataset read_dataset(const std::string& path);

std::string meta_path_for(const std::string& csv_path);

/// Single-trajectory CSV in the dataset layout (traj_id 0), no sidecar.
void write_trajectory_csv(const TrajectoryRecord& traj, const std::string& path);

}  // namespace pontryagus
