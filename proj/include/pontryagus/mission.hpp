#pragma once

// SI description of the transfer and its conversion to a canonical problem.

#include "pontryagus/astro.hpp"
#include "pontryagus/shooting.hpp"

namespace pontryagus {

/// Orbit elements as written in configuration files: a in AU, angles in degrees.
struct OrbitSpec {
  double a_au = 1.0;
  double e = 0.0;
  double i_deg = 0.0;
  double omega_deg = 0.0;
  double raan_deg = 0.0;

  KeplerElements to_elements() const;
};

struct MissionSpec {
  PhysicalConstants constants;
  OrbitSpec departure{1.0, 0.0167, 0.0, 0.0, 0.0};
  OrbitSpec arrival{1.5237, 0.0934, 1.85, 286.5, 49.56};
  double m0_kg = 1000.0;
  double tmax_N = 0.3;
  double isp_s = 2500.0;
  double tof_days = 407.0;

  void validate() const;
  CanonicalUnits units() const;
  /// Time of flight in canonical time units.
  double time_of_flight() const;
  /// Canonical problem at alpha = 0 with free phases on both orbits and the
  /// time of flight fixed (it lives in ShootingUnknowns::dt).
  TransferProblem problem() const;
};

}  // namespace pontryagus
