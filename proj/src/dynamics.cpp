#include "pontryagus/dynamics.hpp"

#include <cmath>
#include <string>

namespace pontryagus {

const char* to_string(IntegrationStatus s) {
  switch (s) {
    case IntegrationStatus::kOk: return "ok";
    case IntegrationStatus::kStepUnderflow: return "step-size underflow";
    case IntegrationStatus::kTooManySteps: return "step limit exceeded";
    case IntegrationStatus::kNonFinite: return "non-finite state";
    case IntegrationStatus::kAborted: return "aborted by observer";
  }
  return "unknown";
}

Vec7 SpacecraftState::to_vector() const {
  Vec7 x;
  x << r, v, m;
  return x;
}

SpacecraftState SpacecraftState::from_vector(const Vec7& x) {
  return {x.segment<3>(0), x.segment<3>(3), x[6]};
}

Vec7 Costate::to_vector() const {
  Vec7 l;
  l << lr, lv, lm;
  return l;
}

Costate Costate::from_vector(const Vec7& l) { return {l.segment<3>(0), l.segment<3>(3), l[6]}; }

ControlAction ControlAction::from_direction(double u, const Vec3& dir) {
  ControlAction c;
  c.u = u;
  c.dir = dir;
  c.theta = std::atan2(std::hypot(dir.x(), dir.y()), dir.z());
  c.phi = std::atan2(dir.y(), dir.x());
  if (c.phi <= -kPi) c.phi = kPi;
  return c;
}

ControlAction ControlAction::from_polar(double u, double theta, double phi) {
  ControlAction c;
  c.u = u;
  c.theta = theta;
  c.phi = phi;
  c.dir = Vec3(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta));
  return c;
}

void EngineParams::validate() const {
  if (!(c1 > 0.0) || !(c2 > 0.0)) throw std::invalid_argument("engine constants must be positive");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
}

Vec3 optimal_direction(const Vec3& lv) {
  const double n = lv.norm();
  if (!(n > kSingularCostate)) {
    throw SingularCostateError("thrust direction undefined for |lambda_v| <= 1e-12");
  }
  return -lv / n;
}

double switching_function(const SpacecraftState& x, const Costate& lam, const EngineParams& eng) {
  return eng.c1 * lam.lv.norm() + x.m * eng.c2 * lam.lm - x.m * eng.alpha;
}

double optimal_throttle(const SpacecraftState& x, const Costate& lam, const EngineParams& eng) {
  const double lv = lam.lv.norm();
  if (eng.alpha >= 1.0) {
    return switching_function(x, lam, eng) > 0.0 ? 1.0 : 0.0;
  }
  const double arg = (eng.c1 * lv / x.m + lam.lm * eng.c2 - eng.alpha) / (2.0 * (1.0 - eng.alpha));
  return std::clamp(arg, 0.0, 1.0);
}

ControlAction optimal_control(const SpacecraftState& x, const Costate& lam, const EngineParams& eng) {
  if (!(lam.lv.norm() > kSingularCostate)) return ControlAction::from_direction(0.0, Vec3::UnitX());
  return ControlAction::from_direction(optimal_throttle(x, lam, eng), optimal_direction(lam.lv));
}

double hamiltonian(const SpacecraftState& x, const Costate& lam, const ControlAction& ctrl,
                   const EngineParams& eng, double mu) {
  const double r = x.r.norm();
  const Vec3 accel = -mu / (r * r * r) * x.r + eng.c1 * ctrl.u / x.m * ctrl.dir;
  return lam.lr.dot(x.v) + lam.lv.dot(accel) - lam.lm * eng.c2 * ctrl.u + eng.alpha * ctrl.u +
         (1.0 - eng.alpha) * ctrl.u * ctrl.u;
}

double optimal_hamiltonian(const SpacecraftState& x, const Costate& lam, const EngineParams& eng,
                           double mu) {
  return hamiltonian(x, lam, optimal_control(x, lam, eng), eng, mu);
}

Vec14 pack(const SpacecraftState& x, const Costate& lam) {
  Vec14 y;
  y << x.r, x.v, x.m, lam.lr, lam.lv, lam.lm;
  return y;
}

void unpack(const Vec14& y, SpacecraftState& x, Costate& lam) {
  x.r = y.segment<3>(0);
  x.v = y.segment<3>(3);
  x.m = y[6];
  lam.lr = y.segment<3>(7);
  lam.lv = y.segment<3>(10);
  lam.lm = y[13];
}

Vec14 rhs_with_throttle(const Vec14& y, double u, const EngineParams& eng, double mu) {
  const Vec3 r = y.segment<3>(0);
  const Vec3 v = y.segment<3>(3);
  const double m = y[6];
  const Vec3 lr = y.segment<3>(7);
  const Vec3 lv = y.segment<3>(10);

  const double lv_norm = lv.norm();
  Vec3 dir = Vec3::UnitX();
  if (lv_norm > kSingularCostate) {
    dir = -lv / lv_norm;
  } else {
    u = 0.0;
  }

  const double rn = r.norm();
  const double r3 = rn * rn * rn;
  const double r5 = r3 * rn * rn;

  Vec14 dy;
  dy.segment<3>(0) = v;
  dy.segment<3>(3) = -mu / r3 * r + eng.c1 * u / m * dir;
  dy[6] = -eng.c2 * u;
  dy.segment<3>(7) = mu / r3 * lv - 3.0 * mu * lv.dot(r) / r5 * r;
  dy.segment<3>(10) = -lr;
  dy[13] = eng.c1 * u * lv.dot(dir) / (m * m);
  return dy;
}

Vec14 augmented_rhs(const SpacecraftState& x, const Costate& lam, const EngineParams& eng,
                    double mu) {
  return rhs_with_throttle(pack(x, lam), optimal_throttle(x, lam, eng), eng, mu);
}

namespace {

double throttle_of(const Vec14& y, const EngineParams& eng) {
  SpacecraftState x;
  Costate lam;
  unpack(y, x, lam);
  if (!(lam.lv.norm() > kSingularCostate)) return 0.0;
  return optimal_throttle(x, lam, eng);
}

enum class ThrottleMode { kOff, kInterior, kFull };

ThrottleMode mode_of(const Vec14& y, const EngineParams& eng) {
  const double u = throttle_of(y, eng);
  if (u <= 0.0) return ThrottleMode::kOff;
  if (u >= 1.0) return ThrottleMode::kFull;
  return ThrottleMode::kInterior;
}

// Forces a step boundary at every change of throttle branch (off, interior,
// full) so no RK step straddles a kink of the clamped throttle. At alpha = 1
// the throttle is held constant across the stages of a step.
struct ThrottleModes {
  const EngineParams* eng;
  ThrottleMode mode;

  double throttle(const Vec14& y) const {
    if (eng->alpha < 1.0) return throttle_of(y, *eng);
    return mode == ThrottleMode::kFull ? 1.0 : 0.0;
  }
  bool triggered(double, const Vec14& y) const { return mode_of(y, *eng) != mode; }
  void apply(double, const Vec14& y) { mode = mode_of(y, *eng); }
};

TrajectoryNode make_node(double t, const Vec14& y, const EngineParams& eng) {
  TrajectoryNode n;
  n.t = t;
  unpack(y, n.x, n.lam);
  n.ctrl = optimal_control(n.x, n.lam, eng);
  return n;
}

PropagationError::Kind kind_of(IntegrationStatus s) {
  switch (s) {
    case IntegrationStatus::kStepUnderflow: return PropagationError::Kind::kStepUnderflow;
    case IntegrationStatus::kTooManySteps: return PropagationError::Kind::kTooManySteps;
    case IntegrationStatus::kAborted: return PropagationError::Kind::kMassDepleted;
    default: return PropagationError::Kind::kNonFinite;
  }
}

}  // namespace

TrajectoryRecord propagate(const SpacecraftState& x0, const Costate& lam0, double dt,
                           const EngineParams& eng, double mu, const PropagateOptions& opt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw PropagationError(PropagationError::Kind::kInvalidInput, "propagation span must be positive");
  }
  if (!(x0.m > 0.0) || !(x0.r.norm() > 0.0)) {
    throw PropagationError(PropagationError::Kind::kInvalidInput, "state requires m > 0 and |r| > 0");
  }

  TrajectoryRecord rec;
  rec.alpha = eng.alpha;
  Vec14 y = pack(x0, lam0);
  rec.nodes.push_back(make_node(0.0, y, eng));

  IntegratorOptions iopt;
  iopt.rtol = opt.tol;
  iopt.atol = opt.tol;
  iopt.max_steps = opt.max_steps;
  iopt.initial_step = dt / 100.0;
  iopt.event_time_tol = 1e-13;

  bool depleted = false;
  auto observer = [&](double t, const Vec14& ys) {
    if (!(ys[6] > 0.0)) {
      depleted = true;
      return false;
    }
    if (opt.record || t >= dt) rec.nodes.push_back(make_node(t, ys, eng));
    return true;
  };

  ThrottleModes modes{&eng, mode_of(y, eng)};
  auto rhs = [&](double, const Vec14& ys) { return rhs_with_throttle(ys, modes.throttle(ys), eng, mu); };
  const IntegrationStatus status = integrate_dopri<14>(rhs, 0.0, y, dt, iopt, observer, modes);

  if (status != IntegrationStatus::kOk) {
    if (depleted) throw PropagationError(PropagationError::Kind::kMassDepleted, "mass depleted");
    throw PropagationError(kind_of(status), std::string("propagation failed: ") + to_string(status));
  }
  if (rec.nodes.back().t != dt) rec.nodes.push_back(make_node(dt, y, eng));
  return rec;
}

}  // namespace pontryagus
