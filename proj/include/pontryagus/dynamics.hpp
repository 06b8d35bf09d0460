#pragma once

// Pontryagin machinery for the low-thrust two-body problem: control laws,
// Hamiltonian, the 14-dimensional state/costate system and its adaptive
// propagation into trajectory records.

#include "pontryagus/astro.hpp"
#include "pontryagus/integrator.hpp"

#include <Eigen/Core>

#include <stdexcept>
#include <vector>

namespace pontryagus {

using Vec7 = Eigen::Matrix<double, 7, 1>;
using Vec14 = Eigen::Matrix<double, 14, 1>;

/// |lambda_v| at or below this is treated as a singular costate.
inline constexpr double kSingularCostate = 1e-12;

struct SpacecraftState {
  Vec3 r = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  double m = 1.0;

  Vec7 to_vector() const;
  static SpacecraftState from_vector(const Vec7& x);
};

struct Costate {
  Vec3 lr = Vec3::Zero();
  Vec3 lv = Vec3::Zero();
  double lm = 0.0;

  Vec7 to_vector() const;
  static Costate from_vector(const Vec7& l);
  bool all_finite() const { return to_vector().allFinite(); }
};

struct ControlAction {
  double u = 0.0;
  Vec3 dir = Vec3::UnitX();
  double theta = kPi / 2.0;  // polar angle, [0, pi]
  double phi = 0.0;          // azimuth, (-pi, pi]

  /// Builds a control from throttle and unit direction, filling the polar angles.
  static ControlAction from_direction(double u, const Vec3& dir);
  /// Builds a control from throttle and polar angles, filling the direction.
  static ControlAction from_polar(double u, double theta, double phi);
};

struct EngineParams {
  double c1 = 0.0;     // maximum thrust, canonical force
  double c2 = 0.0;     // mass flow at full throttle, c1 / (Isp g0), canonical
  double alpha = 0.0;  // 0 quadratic control, 1 mass optimal

  void validate() const;
};

struct TrajectoryNode {
  double t = 0.0;
  SpacecraftState x;
  Costate lam;
  ControlAction ctrl;
};

struct TrajectoryRecord {
  std::vector<TrajectoryNode> nodes;
  double alpha = 0.0;
  bool converged = false;

  double duration() const { return nodes.empty() ? 0.0 : nodes.back().t - nodes.front().t; }
};

class SingularCostateError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class PropagationError : public std::runtime_error {
 public:
  enum class Kind { kStepUnderflow, kTooManySteps, kNonFinite, kMassDepleted, kInvalidInput };
  PropagationError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Unit vector opposite to lambda_v; throws SingularCostateError when
/// |lambda_v| <= kSingularCostate.
Vec3 optimal_direction(const Vec3& lv);

/// S = c1 |lambda_v| + m c2 lambda_m - m alpha.
double switching_function(const SpacecraftState& x, const Costate& lam, const EngineParams& eng);

/// Minimiser of the Hamiltonian over the throttle. Bang-bang for alpha = 1
/// with a tie S = 0 resolved to coasting.
double optimal_throttle(const SpacecraftState& x, const Costate& lam, const EngineParams& eng);

/// Throttle and direction minimising H; u = 0 along (1,0,0) on singular costates.
ControlAction optimal_control(const SpacecraftState& x, const Costate& lam, const EngineParams& eng);

double hamiltonian(const SpacecraftState& x, const Costate& lam, const ControlAction& ctrl,
                   const EngineParams& eng, double mu);

/// H evaluated at the optimal control.
double optimal_hamiltonian(const SpacecraftState& x, const Costate& lam, const EngineParams& eng,
                           double mu);

/// State and costate time derivatives with the throttle held at `u` and the
/// thrust along -lambda_v (no thrust if the costate is singular).
Vec14 rhs_with_throttle(const Vec14& y, double u, const EngineParams& eng, double mu);

/// Full optimal system: derivatives of (x, lambda) with u = u*(x, lambda).
Vec14 augmented_rhs(const SpacecraftState& x, const Costate& lam, const EngineParams& eng,
                    double mu);

Vec14 pack(const SpacecraftState& x, const Costate& lam);
void unpack(const Vec14& y, SpacecraftState& x, Costate& lam);

struct PropagateOptions {
  double tol = 1e-12;
  long max_steps = 1'000'000;
  bool record = true;  // when false only the endpoints are stored
};

/// Integrates the optimal system over [0, dt], recording one node per
/// accepted step plus both endpoints. The throttle branch (off, interior,
/// full) is held per step and every branch change, including bang-bang
/// switches at alpha = 1, is located to 1e-10 in time so that it coincides
/// with a node.
TrajectoryRecord propagate(const SpacecraftState& x0, const Costate& lam0, double dt,
                           const EngineParams& eng, double mu, const PropagateOptions& opt = {});

}  // namespace pontryagus
