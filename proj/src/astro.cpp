#include "pontryagus/astro.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <limits>

namespace pontryagus {

CanonicalUnits::CanonicalUnits(double length_unit_m, double mass_unit_kg, double mu_si)
    : length_unit_(length_unit_m), mass_unit_(mass_unit_kg), mu_si_(mu_si) {
  if (!(length_unit_m > 0.0) || !(mass_unit_kg > 0.0) || !(mu_si > 0.0)) {
    throw std::invalid_argument("canonical units require positive length, mass and mu");
  }
  time_unit_ = std::sqrt(length_unit_ * length_unit_ * length_unit_ / mu_si_);
  velocity_unit_ = length_unit_ / time_unit_;
}

void KeplerElements::validate() const {
  if (!std::isfinite(a) || !std::isfinite(e) || !std::isfinite(i) || !std::isfinite(omega) ||
      !std::isfinite(Omega) || !std::isfinite(E)) {
    throw InvalidOrbitError("orbital elements must be finite");
  }
  if (!(a > 0.0)) throw InvalidOrbitError("semi-major axis must be positive");
  if (e < 0.0 || e >= 1.0) {
    throw InvalidOrbitError("eccentricity must lie in [0, 1), got " + std::to_string(e));
  }
}

KeplerElements KeplerElements::normalized() const {
  KeplerElements out = *this;
  out.i = wrap_two_pi(i);
  out.omega = wrap_two_pi(omega);
  out.Omega = wrap_two_pi(Omega);
  out.E = wrap_two_pi(E);
  return out;
}

void BoundaryOrbit::validate() const {
  elements.validate();
  if (!(mu > 0.0) || !std::isfinite(mu)) throw InvalidOrbitError("mu must be positive");
}

double wrap_two_pi(double angle) {
  double w = std::fmod(angle, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w = 0.0;
  return w;
}

Mat3 rotation_matrix(double i, double omega, double Omega) {
  const Mat3 rz_node = Eigen::AngleAxisd(Omega, Vec3::UnitZ()).toRotationMatrix();
  const Mat3 rx_incl = Eigen::AngleAxisd(i, Vec3::UnitX()).toRotationMatrix();
  const Mat3 rz_peri = Eigen::AngleAxisd(omega, Vec3::UnitZ()).toRotationMatrix();
  return rz_node * rx_incl * rz_peri;
}

CartesianState elements_to_cartesian(const KeplerElements& el, double mu) {
  el.validate();
  if (!(mu > 0.0)) throw InvalidOrbitError("mu must be positive");
  const double cosE = std::cos(el.E);
  const double sinE = std::sin(el.E);
  const double b_over_a = std::sqrt(1.0 - el.e * el.e);
  const Mat3 R = rotation_matrix(el.i, el.omega, el.Omega);

  const Vec3 r_peri(el.a * (cosE - el.e), el.a * b_over_a * sinE, 0.0);
  const double rate = std::sqrt(mu / (el.a * el.a * el.a)) / (1.0 - el.e * cosE);
  const Vec3 v_peri(-el.a * sinE, el.a * b_over_a * cosE, 0.0);

  return {R * r_peri, rate * (R * v_peri)};
}

CartesianState orbit_tangent(const KeplerElements& el, double mu) {
  const CartesianState s = elements_to_cartesian(el, mu);
  const double r = s.r.norm();
  return {s.v, -(mu / (r * r * r)) * s.r};
}

namespace {

double closeness(const Vec3& r, const Vec3& v, const BoundaryOrbit& orbit, double w, double E) {
  const CartesianState s = elements_to_cartesian(orbit.at(E), orbit.mu);
  return (r - s.r).squaredNorm() + w * (v - s.v).squaredNorm();
}

}  // namespace

ClosestPoint closest_point_on_orbit(const Vec3& r, const Vec3& v, const BoundaryOrbit& orbit,
                                    double velocity_weight, int grid_samples) {
  orbit.validate();
  if (grid_samples < 720) grid_samples = 720;
  const double step = kTwoPi / grid_samples;

  int best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  for (int k = 0; k < grid_samples; ++k) {
    const double d = closeness(r, v, orbit, velocity_weight, k * step);
    if (d < best_value) {
      best_value = d;
      best = k;
    }
  }

  // Golden-section search on the bracket around the best grid sample.
  const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = (best - 1) * step;
  double hi = (best + 1) * step;
  double x1 = hi - golden * (hi - lo);
  double x2 = lo + golden * (hi - lo);
  double f1 = closeness(r, v, orbit, velocity_weight, x1);
  double f2 = closeness(r, v, orbit, velocity_weight, x2);
  while (hi - lo > 1e-12) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - golden * (hi - lo);
      f1 = closeness(r, v, orbit, velocity_weight, x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + golden * (hi - lo);
      f2 = closeness(r, v, orbit, velocity_weight, x2);
    }
  }
  double E_star = 0.5 * (lo + hi);
  double value = closeness(r, v, orbit, velocity_weight, E_star);
  if (best_value < value) {
    E_star = best * step;
    value = best_value;
  }

  ClosestPoint out;
  out.E = wrap_two_pi(E_star);
  out.distance = value;
  const CartesianState s = elements_to_cartesian(orbit.at(out.E), orbit.mu);
  out.position_error = (r - s.r).norm();
  out.velocity_error = (v - s.v).norm();
  return out;
}

double specific_energy(const Vec3& r, const Vec3& v, double mu) {
  return 0.5 * v.squaredNorm() - mu / r.norm();
}

double angular_momentum(const Vec3& r, const Vec3& v) { return r.cross(v).norm(); }

}  // namespace pontryagus
