#pragma once

// Dormand-Prince 5(4) embedded Runge-Kutta integrator with PI step-size
// control and optional discrete-mode switching (event localisation by
// bisection on the step length).

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace pontryagus {

struct IntegratorOptions {
  double rtol = 1e-12;
  double atol = 1e-12;
  double initial_step = 0.0;  // 0 selects span / 100
  long max_steps = 1'000'000;
  double event_time_tol = 1e-10;
  int max_events = 10'000;
};

enum class IntegrationStatus { kOk, kStepUnderflow, kTooManySteps, kNonFinite, kAborted };

const char* to_string(IntegrationStatus s);

struct IntegrationStats {
  long accepted = 0;
  long rejected = 0;
  long rhs_evals = 0;
  int events = 0;
  double last_step = 0.0;
};

/// Event handler used when the right-hand side has no discrete modes.
struct NoModeSwitch {
  template <class State>
  bool triggered(double, const State&) const {
    return false;
  }
  template <class State>
  void apply(double, const State&) {}
};

namespace detail {

struct DopriTableau {
  static constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
  static constexpr double a21 = 1.0 / 5.0;
  static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
  static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
  static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                          a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
  static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                          a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
  static constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                          a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
  static constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                          e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
};

}  // namespace detail

/// Integrates y' = rhs(t, y) from t0 to t1 (t1 > t0). `observer(t, y)` is
/// called once per accepted step (not for the initial point) and may return
/// false to abort. When `modes.triggered(t, y)` becomes true at the end of a
/// step, the step is shortened by bisection until the first triggering time
/// is bracketed to `event_time_tol`; the integration lands just past it and
/// `modes.apply` is invoked before continuing.
template <int N, class Rhs, class Observer, class Modes = NoModeSwitch>
IntegrationStatus integrate_dopri(Rhs&& rhs, double t0, Eigen::Matrix<double, N, 1>& y, double t1,
                                  const IntegratorOptions& opt, Observer&& observer,
                                  Modes&& modes = Modes{}, IntegrationStats* stats_out = nullptr) {
  using State = Eigen::Matrix<double, N, 1>;
  using T = detail::DopriTableau;
  IntegrationStats stats;

  const double span = t1 - t0;
  if (!(span > 0.0)) return IntegrationStatus::kOk;

  double h = opt.initial_step > 0.0 ? opt.initial_step : span / 100.0;
  double t = t0;
  double err_old = 1e-4;

  State k1 = rhs(t, y), k2, k3, k4, k5, k6, k7, y_new, y_err, tmp;
  ++stats.rhs_evals;

  // One trial step of size hs from (t, y) with the current k1.
  auto trial = [&](double hs) {
    tmp = y + hs * T::a21 * k1;
    k2 = rhs(t + T::c2 * hs, tmp);
    tmp = y + hs * (T::a31 * k1 + T::a32 * k2);
    k3 = rhs(t + T::c3 * hs, tmp);
    tmp = y + hs * (T::a41 * k1 + T::a42 * k2 + T::a43 * k3);
    k4 = rhs(t + T::c4 * hs, tmp);
    tmp = y + hs * (T::a51 * k1 + T::a52 * k2 + T::a53 * k3 + T::a54 * k4);
    k5 = rhs(t + T::c5 * hs, tmp);
    tmp = y + hs * (T::a61 * k1 + T::a62 * k2 + T::a63 * k3 + T::a64 * k4 + T::a65 * k5);
    k6 = rhs(t + hs, tmp);
    y_new = y + hs * (T::a71 * k1 + T::a73 * k3 + T::a74 * k4 + T::a75 * k5 + T::a76 * k6);
    k7 = rhs(t + hs, y_new);
    y_err = hs * (T::e1 * k1 + T::e3 * k3 + T::e4 * k4 + T::e5 * k5 + T::e6 * k6 + T::e7 * k7);
    stats.rhs_evals += 6;
  };

  auto error_norm = [&]() {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(y_new[i]));
      const double q = y_err[i] / sc;
      acc += q * q;
    }
    return std::sqrt(acc / static_cast<double>(y.size()));
  };

  constexpr double kSafety = 0.9, kFacMin = 0.2, kFacMax = 10.0, kBeta = 0.04;
  constexpr double kExpo = 0.2 - kBeta * 0.75;

  while (t < t1) {
    if (stats.accepted + stats.rejected >= opt.max_steps) {
      if (stats_out) *stats_out = stats;
      return IntegrationStatus::kTooManySteps;
    }
    if (h < 1e-14 * std::max(1.0, std::abs(t))) {
      if (stats_out) *stats_out = stats;
      return IntegrationStatus::kStepUnderflow;
    }
    bool last = false;
    if (t + h >= t1 || t + 1.01 * h >= t1) {
      h = t1 - t;
      last = true;
    }

    trial(h);
    const double err = error_norm();
    if (!std::isfinite(err)) {
      h *= 0.25;
      ++stats.rejected;
      if (!y.allFinite()) {
        if (stats_out) *stats_out = stats;
        return IntegrationStatus::kNonFinite;
      }
      continue;
    }

    if (err > 1.0) {
      h *= std::max(kFacMin, kSafety * std::pow(err, -kExpo));
      ++stats.rejected;
      continue;
    }

    double h_taken = h;
    bool switched = false;
    if (modes.triggered(t + h, y_new)) {
      // Bisect on the step length: lo never triggers, hi always does.
      double lo = 0.0, hi = h;
      while (hi - lo > opt.event_time_tol) {
        const double mid = 0.5 * (lo + hi);
        trial(mid);
        if (modes.triggered(t + mid, y_new)) {
          hi = mid;
        } else {
          lo = mid;
        }
      }
      trial(hi);
      h_taken = hi;
      switched = true;
      last = false;
      if (++stats.events > opt.max_events) {
        if (stats_out) *stats_out = stats;
        return IntegrationStatus::kTooManySteps;
      }
    }

    t = (last && !switched) ? t1 : t + h_taken;
    y = y_new;
    ++stats.accepted;
    stats.last_step = h_taken;
    if (!y.allFinite()) {
      if (stats_out) *stats_out = stats;
      return IntegrationStatus::kNonFinite;
    }
    if (switched) {
      modes.apply(t, y);
      k1 = rhs(t, y);
      ++stats.rhs_evals;
    } else {
      k1 = k7;
    }
    if (!observer(t, static_cast<const State&>(y))) {
      if (stats_out) *stats_out = stats;
      return IntegrationStatus::kAborted;
    }

    if (!switched) {
      const double e = std::max(err, 1e-10);
      double fac = kSafety * std::pow(e, -kExpo) * std::pow(err_old, kBeta);
      fac = std::clamp(fac, kFacMin, kFacMax);
      err_old = std::max(err, 1e-4);
      h = h_taken * fac;
    }
  }
  if (stats_out) *stats_out = stats;
  return IntegrationStatus::kOk;
}

}  // namespace pontryagus
