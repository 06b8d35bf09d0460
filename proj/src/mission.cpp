#include "pontryagus/mission.hpp"

#include <cmath>
#include <stdexcept>

namespace pontryagus {

namespace {
constexpr double kDeg = kPi / 180.0;
}

KeplerElements OrbitSpec::to_elements() const {
  KeplerElements el;
  el.a = a_au;  // canonical length unit is one AU
  el.e = e;
  el.i = i_deg * kDeg;
  el.omega = omega_deg * kDeg;
  el.Omega = raan_deg * kDeg;
  el.E = 0.0;
  el.validate();
  return el;
}

void MissionSpec::validate() const {
  if (!(constants.mu_sun > 0.0) || !(constants.g0 > 0.0) || !(constants.au > 0.0)) {
    throw std::invalid_argument("physical constants must be positive");
  }
  if (!(m0_kg > 0.0) || !(tmax_N > 0.0) || !(isp_s > 0.0) || !(tof_days > 0.0)) {
    throw std::invalid_argument("m0_kg, tmax_N, isp_s and tof_days must be positive");
  }
  departure.to_elements();
  arrival.to_elements();
}

CanonicalUnits MissionSpec::units() const { return CanonicalUnits(constants.au, m0_kg, constants.mu_sun); }

double MissionSpec::time_of_flight() const { return units().time_from_si(tof_days * 86400.0); }

TransferProblem MissionSpec::problem() const {
  validate();
  const CanonicalUnits cu = units();
  TransferProblem p;
  p.mu = 1.0;
  p.departure = {departure.to_elements(), 1.0};
  p.arrival = {arrival.to_elements(), 1.0};
  p.m0 = 1.0;
  p.eng.c1 = cu.force_from_si(tmax_N);
  const double mdot_si = tmax_N / (isp_s * constants.g0);
  p.eng.c2 = mdot_si * cu.time_unit() / cu.mass_unit();
  p.eng.alpha = 0.0;
  p.free_time = false;
  return p;
}

}  // namespace pontryagus
