#pragma once

// Single-shooting formulation of the phase-free orbit-to-orbit transfer.

#include "pontryagus/astro.hpp"
#include "pontryagus/dynamics.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>

namespace pontryagus {

struct ShootingUnknowns {
  Costate lam0;
  double dt = 1.0;
  double E0 = 0.0;
  double Ef = 0.0;
};

/// Transfer between two Keplerian orbits with free phases, free final mass
/// and free time of flight. When `fixed_start` is set the departure state is
/// prescribed instead of sliding along the departure orbit; E0 is then not an
/// unknown and the departure transversality row is dropped.
struct TransferProblem {
  BoundaryOrbit departure;
  BoundaryOrbit arrival;
  double m0 = 1.0;
  EngineParams eng;
  double mu = 1.0;
  std::optional<SpacecraftState> fixed_start;
  // Each free parameter adds one unknown and its transversality residual.
  bool free_time = true;
  bool free_departure_phase = true;
  bool free_arrival_phase = true;

  void validate() const;
  TransferProblem with_alpha(double alpha) const {
    TransferProblem p = *this;
    p.eng.alpha = alpha;
    return p;
  }
  TransferProblem from_state(const SpacecraftState& x) const {
    TransferProblem p = *this;
    p.fixed_start = x;
    return p;
  }
  bool departure_phase_unknown() const { return free_departure_phase && !fixed_start; }
  /// 10 for the full phase-free transfer, 9 from a fixed departure state.
  int dimension() const {
    return 7 + int(free_time) + int(departure_phase_unknown()) + int(free_arrival_phase);
  }
  SpacecraftState departure_state(double E0) const;
};

Eigen::VectorXd to_vector(const ShootingUnknowns& z, const TransferProblem& prob);
/// Inverse of to_vector; parameters that are not unknowns are taken from `fixed`.
ShootingUnknowns from_vector(const Eigen::VectorXd& v, const TransferProblem& prob,
                             const ShootingUnknowns& fixed = {});

struct ShootingResiduals {
  Eigen::VectorXd values;  // non-finite entries when propagation failed
  bool propagation_failed = false;
  std::string failure;

  bool finite() const { return !propagation_failed && values.allFinite(); }
  double inf_norm() const { return values.lpNorm<Eigen::Infinity>(); }
};

/// Boundary mismatch in fixed order: arrival position (3), arrival velocity
/// (3), lambda_m(t2), H(t2), departure anomaly transversality (orbit
/// departures only), arrival anomaly transversality.
ShootingResiduals shooting_residuals(const ShootingUnknowns& z, const TransferProblem& prob,
                                     double tol = 1e-12);

/// Residuals computed from an already propagated trajectory.
Eigen::VectorXd residuals_from_trajectory(const TrajectoryRecord& traj, double Ef,
                                          const TransferProblem& prob);

/// Anomaly transversality: lambda_r . v - lambda_v . (mu / r^3) r.
double transversality_anomaly(const SpacecraftState& x, const Costate& lam, double mu);

/// Transversality for a free semi-major axis: 2 lambda_r . r - lambda_v . v.
double transversality_sma(const Costate& lam, const Vec3& r2, const Vec3& v2);

struct NewtonOptions {
  double tol = 1e-8;  // on the infinity norm of the residuals
  int max_iterations = 200;
  int max_halvings = 12;
  double fd_relative_step = 1e-7;
  double fd_absolute_step = 1e-7;
  double integration_tol = 1e-12;
  // Central differences cost twice the propagations but stay accurate along
  // the near-null directions of the ill-conditioned alpha -> 1 Jacobians.
  bool central_differences = false;
};

enum class SolveStatus { kConverged, kIterationLimit, kNonFiniteResidual, kLineSearchFailed, kSingularJacobian };

const char* to_string(SolveStatus s);

struct TpbvpSolution {
  ShootingUnknowns z;
  TrajectoryRecord trajectory;
  double residual_norm = 0.0;  // infinity norm
  double alpha = 0.0;
  int iterations = 0;
  SolveStatus status = SolveStatus::kIterationLimit;

  bool converged() const { return status == SolveStatus::kConverged; }
};

/// Forward-difference Jacobian of the residuals.
Eigen::MatrixXd shooting_jacobian(const ShootingUnknowns& z, const TransferProblem& prob,
                                  const NewtonOptions& opt = {});

/// Damped Newton iteration on the shooting residuals. Never throws on
/// numerical failure; the status reports why a solve did not converge.
TpbvpSolution solve_tpbvp(const ShootingUnknowns& guess, const TransferProblem& prob,
                          const NewtonOptions& opt = {});

struct LevenbergMarquardtOptions {
  int max_iterations = 150;
  double tol = 1e-9;  // switch to Newton polishing below this infinity norm
  double polish_threshold = 1e-4;  // give up unless LM got at least this close
  double initial_damping = 1e-2;
  double integration_tol = 1e-10;
};

/// Levenberg-Marquardt globalisation for poor initial guesses (multistart),
/// followed by the damped Newton iteration of solve_tpbvp for the final
/// convergence. Never throws on numerical failure.
TpbvpSolution solve_tpbvp_globalized(const ShootingUnknowns& guess, const TransferProblem& prob,
                                     const LevenbergMarquardtOptions& lm = {},
                                     const NewtonOptions& newton = {});

/// Half period of the Hohmann ellipse between the two orbits' semi-major axes.
double hohmann_time_guess(const TransferProblem& prob);

}  // namespace pontryagus
