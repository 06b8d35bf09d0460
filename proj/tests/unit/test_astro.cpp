#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pontryagus/astro.hpp"
#include "pontryagus/mission.hpp"
#include "support.hpp"

#include <Eigen/LU>

using namespace pontryagus;
using testing_support::Gen;

TEST_CASE("canonical time unit makes mu one") {
  const double L = 1.495978707e11, mu = 1.32712440018e20;
  const CanonicalUnits cu(L, 1000.0, mu);
  CHECK(cu.time_unit() == std::sqrt(L * L * L / mu));
  // About 58.13 days per time unit for the Sun and one AU.
  CHECK(cu.time_unit() / 86400.0 == doctest::Approx(58.1324).epsilon(1e-5));
  for (double x : {1e-3, 0.7, 1.0, 42.0, 3.3e5}) {
    CHECK(testing_support::rel_err(cu.length_to_si(cu.length_from_si(x)), x) <= 1e-14);
    CHECK(testing_support::rel_err(cu.time_to_si(cu.time_from_si(x)), x) <= 1e-14);
    CHECK(testing_support::rel_err(cu.velocity_to_si(cu.velocity_from_si(x)), x) <= 1e-14);
    CHECK(testing_support::rel_err(cu.mass_to_si(cu.mass_from_si(x)), x) <= 1e-14);
  }
  CHECK_THROWS_AS(CanonicalUnits(0.0, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("rotation matrix") {
  CHECK((rotation_matrix(0, 0, 0) - Mat3::Identity()).norm() == 0.0);
  const Mat3 R = rotation_matrix(0.0, kPi / 2, 0.0);
  CHECK((R * Vec3::UnitX() - Vec3::UnitY()).norm() < 1e-15);
  CHECK((R * Vec3::UnitY() + Vec3::UnitX()).norm() < 1e-15);
  CHECK((R * Vec3::UnitZ() - Vec3::UnitZ()).norm() < 1e-15);

  Gen g(1);
  for (int k = 0; k < 500; ++k) {
    const Mat3 Q = rotation_matrix(g.uniform(-7, 7), g.uniform(-7, 7), g.uniform(-7, 7));
    CHECK((Q.transpose() * Q - Mat3::Identity()).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(std::abs(Q.determinant() - 1.0) <= 1e-14);
  }
}

TEST_CASE("elements to cartesian: hand-evaluated cases") {
  KeplerElements el;
  auto s = elements_to_cartesian(el, 1.0);
  CHECK((s.r - Vec3(1, 0, 0)).norm() < 1e-15);
  CHECK((s.v - Vec3(0, 1, 0)).norm() < 1e-15);

  el.E = kPi / 2;
  s = elements_to_cartesian(el, 1.0);
  CHECK((s.r - Vec3(0, 1, 0)).norm() < 1e-15);
  CHECK((s.v - Vec3(-1, 0, 0)).norm() < 1e-15);

  el = KeplerElements{};
  el.e = 0.5;
  s = elements_to_cartesian(el, 1.0);
  CHECK((s.r - Vec3(0.5, 0, 0)).norm() < 1e-15);
  CHECK(s.v.x() == doctest::Approx(0.0));
  CHECK(s.v.y() == doctest::Approx(std::sqrt(3.0)).epsilon(1e-15));
  // vis-viva
  CHECK(s.v.squaredNorm() == doctest::Approx(2.0 / 0.5 - 1.0).epsilon(1e-15));
}

TEST_CASE("elements outside the elliptic range are rejected") {
  KeplerElements el;
  el.e = 1.0;
  CHECK_THROWS_AS(elements_to_cartesian(el, 1.0), InvalidOrbitError);
  el.e = 1.2;
  CHECK_THROWS_AS(el.validate(), InvalidOrbitError);
  el.e = -0.1;
  CHECK_THROWS_AS(el.validate(), InvalidOrbitError);
  el = KeplerElements{};
  el.a = 0.0;
  CHECK_THROWS_AS(el.validate(), InvalidOrbitError);
  el.a = std::nan("");
  CHECK_THROWS_AS(el.validate(), InvalidOrbitError);
}

TEST_CASE("energy and angular momentum identities on random orbits") {
  Gen g(2);
  for (int k = 0; k < 1000; ++k) {
    const KeplerElements el = g.elements();
    const double mu = g.uniform(0.5, 2.0);
    const auto s = elements_to_cartesian(el, mu);
    CHECK(std::abs(specific_energy(s.r, s.v, mu) + mu / (2 * el.a)) <= 1e-12);
    CHECK(std::abs(angular_momentum(s.r, s.v) - std::sqrt(mu * el.a * (1 - el.e * el.e))) <= 1e-12);
    KeplerElements turned = el;
    turned.E += kTwoPi;
    const auto s2 = elements_to_cartesian(turned, mu);
    CHECK((s.r - s2.r).norm() <= 1e-12);
    CHECK((s.v - s2.v).norm() <= 1e-12);
  }
}

TEST_CASE("normalized elements keep angles in [0, 2pi)") {
  KeplerElements el;
  el.i = -0.5;
  el.omega = 9.0;
  el.Omega = kTwoPi;
  el.E = -13.0;
  const KeplerElements n = el.normalized();
  for (double a : {n.i, n.omega, n.Omega, n.E}) {
    CHECK(a >= 0.0);
    CHECK(a < kTwoPi);
  }
  CHECK(n.omega == doctest::Approx(9.0 - kTwoPi));
}

TEST_CASE("orbit tangent") {
  KeplerElements el;
  auto t = orbit_tangent(el, 1.0);
  CHECK((t.r - Vec3(0, 1, 0)).norm() < 1e-15);
  CHECK((t.v - Vec3(-1, 0, 0)).norm() < 1e-15);

  el.e = 0.5;
  t = orbit_tangent(el, 1.0);
  CHECK((t.v - Vec3(-4, 0, 0)).norm() < 1e-13);

  // Central differences in time through the anomaly rate.
  Gen g(3);
  for (int k = 0; k < 300; ++k) {
    const KeplerElements e0 = g.elements();
    const double mu = 1.0;
    const double Edot = std::sqrt(mu / (e0.a * e0.a * e0.a)) / (1.0 - e0.e * std::cos(e0.E));
    const double h = 1e-6;
    KeplerElements ep = e0, em = e0;
    ep.E += h;
    em.E -= h;
    const auto sp = elements_to_cartesian(ep, mu), sm = elements_to_cartesian(em, mu);
    const Vec3 dr = (sp.r - sm.r) / (2 * h) * Edot;
    const Vec3 dv = (sp.v - sm.v) / (2 * h) * Edot;
    const auto tan = orbit_tangent(e0, mu);
    CHECK((dr - tan.r).norm() <= 1e-6 * tan.r.norm());
    CHECK((dv - tan.v).norm() <= 1e-6 * tan.v.norm());
    // The energy gradient (mu r / r^3, v) is orthogonal to the tangent.
    const auto s = elements_to_cartesian(e0, mu);
    const double rn = s.r.norm();
    const double dE = (mu / (rn * rn * rn)) * s.r.dot(tan.r) + s.v.dot(tan.v);
    CHECK(std::abs(dE) <= 1e-12 * (1.0 + tan.v.norm() * s.v.norm()));
  }
}

TEST_CASE("closest point on orbit") {
  KeplerElements el;
  el.a = 1.3;
  el.e = 0.2;
  el.i = 0.3;
  el.omega = 1.1;
  el.Omega = 2.0;
  const BoundaryOrbit orbit{el, 1.0};
  const auto on = elements_to_cartesian(orbit.at(1.0), 1.0);
  ClosestPoint cp = closest_point_on_orbit(on.r, on.v, orbit);
  CHECK(cp.E == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(cp.distance <= 1e-12);

  cp = closest_point_on_orbit(on.r, Vec3(3, -2, 1), orbit, 0.0);
  CHECK(cp.distance <= 1e-12);

  // Brute force over a million anomalies as the oracle.
  Gen g(4);
  for (int trial = 0; trial < 3; ++trial) {
    const Vec3 r = g.vec(-1.5, 1.5), v = g.vec(-1, 1);
    cp = closest_point_on_orbit(r, v, orbit);
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 1'000'000; ++k) {
      const auto s = elements_to_cartesian(orbit.at(kTwoPi * k / 1e6), 1.0);
      best = std::min(best, (r - s.r).squaredNorm() + (v - s.v).squaredNorm());
    }
    CHECK(std::abs(cp.distance - best) <= 1e-6);
    CHECK(cp.distance <= best + 1e-12);
  }
}

TEST_CASE("mission defaults map to canonical units") {
  MissionSpec ms;
  const TransferProblem p = ms.problem();
  CHECK(p.mu == 1.0);
  CHECK(p.m0 == 1.0);
  // c1 = Tmax / (m0 * acceleration unit); c2 = c1 / (Isp g0) in canonical units.
  const CanonicalUnits cu = ms.units();
  CHECK(p.eng.c1 == doctest::Approx(0.3 / 1000.0 / cu.acceleration_unit()).epsilon(1e-14));
  CHECK(p.eng.c1 == doctest::Approx(0.0505895).epsilon(1e-5));
  CHECK(p.eng.c2 == doctest::Approx(0.06146).epsilon(1e-3));
  CHECK(ms.time_of_flight() == doctest::Approx(7.00125).epsilon(1e-5));
  CHECK(p.arrival.elements.i == doctest::Approx(1.85 * kPi / 180));

  ms.arrival.e = 1.2;
  CHECK_THROWS_AS(ms.validate(), InvalidOrbitError);
}
