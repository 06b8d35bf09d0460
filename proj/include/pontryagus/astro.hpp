#pragma once

#include <Eigen/Core>

#include <optional>
#include <stdexcept>
#include <string>

namespace pontryagus {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Standard physical constants used when a run config does not override them.
struct PhysicalConstants {
  double mu_sun = 1.32712440018e20;  // m^3/s^2
  double g0 = 9.80665;               // m/s^2
  double au = 1.495978707e11;        // m
};

class InvalidOrbitError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Nondimensionalisation with length, mass and a time unit derived so that
/// the gravitational parameter becomes exactly one.
class CanonicalUnits {
 public:
  CanonicalUnits(double length_unit_m, double mass_unit_kg, double mu_si);

  double length_unit() const { return length_unit_; }
  double mass_unit() const { return mass_unit_; }
  double time_unit() const { return time_unit_; }
  double velocity_unit() const { return velocity_unit_; }
  double acceleration_unit() const { return velocity_unit_ / time_unit_; }
  double force_unit() const { return mass_unit_ * acceleration_unit(); }
  double mu_si() const { return mu_si_; }

  double length_to_si(double x) const { return x * length_unit_; }
  double length_from_si(double x) const { return x / length_unit_; }
  double time_to_si(double x) const { return x * time_unit_; }
  double time_from_si(double x) const { return x / time_unit_; }
  double velocity_to_si(double x) const { return x * velocity_unit_; }
  double velocity_from_si(double x) const { return x / velocity_unit_; }
  double mass_to_si(double x) const { return x * mass_unit_; }
  double mass_from_si(double x) const { return x / mass_unit_; }
  double force_from_si(double x) const { return x / force_unit(); }

 private:
  double length_unit_;
  double mass_unit_;
  double mu_si_;
  double time_unit_;
  double velocity_unit_;
};

/// Elliptic Keplerian elements. Angles in radians, a in canonical length.
struct KeplerElements {
  double a = 1.0;
  double e = 0.0;
  double i = 0.0;
  double omega = 0.0;  // argument of perigee
  double Omega = 0.0;  // right ascension of the ascending node
  double E = 0.0;      // eccentric anomaly

  /// Throws InvalidOrbitError unless a > 0, 0 <= e < 1 and all values finite.
  void validate() const;
  /// Copy with every angle wrapped into [0, 2pi).
  KeplerElements normalized() const;
};

/// A phase-free orbit: the anomaly stored in `elements` is ignored.
struct BoundaryOrbit {
  KeplerElements elements;
  double mu = 1.0;

  void validate() const;
  KeplerElements at(double E) const {
    KeplerElements el = elements;
    el.E = E;
    return el;
  }
};

struct CartesianState {
  Vec3 r = Vec3::Zero();
  Vec3 v = Vec3::Zero();
};

double wrap_two_pi(double angle);

/// R = Rz(Omega) * Rx(i) * Rz(omega): perifocal frame to inertial frame.
Mat3 rotation_matrix(double i, double omega, double Omega);

CartesianState elements_to_cartesian(const KeplerElements& el, double mu);

/// Time derivative of (r, v) when moving along the fixed orbit, i.e. the
/// tangent of the orbit manifold with respect to the anomaly, scaled to time.
CartesianState orbit_tangent(const KeplerElements& el, double mu);

struct ClosestPoint {
  double E = 0.0;
  double distance = 0.0;  // |r - r_orb|^2 + w |v - v_orb|^2
  double position_error = 0.0;
  double velocity_error = 0.0;
};

/// Minimises |r - r_orb(E)|^2 + w |v - v_orb(E)|^2 over the anomaly with a
/// dense grid followed by golden-section refinement around the best sample.
ClosestPoint closest_point_on_orbit(const Vec3& r, const Vec3& v, const BoundaryOrbit& orbit,
                                    double velocity_weight = 1.0, int grid_samples = 1440);

/// Specific orbital energy and angular momentum magnitude of a Cartesian state.
double specific_energy(const Vec3& r, const Vec3& v, double mu);
double angular_momentum(const Vec3& r, const Vec3& v);

}  // namespace pontryagus
