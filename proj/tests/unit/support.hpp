#pragma once

// Hand-rolled random generators for property tests.

#include "pontryagus/astro.hpp"
#include "pontryagus/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

namespace testing_support {

using namespace pontryagus;

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  Vec3 vec(double lo, double hi) { return Vec3(uniform(lo, hi), uniform(lo, hi), uniform(lo, hi)); }

  Vec3 unit_vector() {
    for (;;) {
      const Vec3 v = vec(-1.0, 1.0);
      const double n = v.norm();
      if (n > 1e-3 && n <= 1.0) return v / n;
    }
  }

  KeplerElements elements() {
    KeplerElements el;
    el.a = uniform(0.5, 3.0);
    el.e = uniform(0.0, 0.9);
    el.i = uniform(0.0, kPi);
    el.omega = uniform(0.0, kTwoPi);
    el.Omega = uniform(0.0, kTwoPi);
    el.E = uniform(0.0, kTwoPi);
    return el;
  }

  // Heliocentric state in the neighbourhood of an Earth-Mars transfer.
  SpacecraftState state() {
    SpacecraftState x;
    x.r = uniform(0.8, 1.7) * unit_vector();
    x.v = uniform(0.6, 1.2) * unit_vector();
    x.m = uniform(0.6, 1.0);
    return x;
  }

  Costate costate(double scale) {
    Costate l;
    l.lr = vec(-scale, scale);
    l.lv = vec(-scale, scale);
    l.lm = uniform(-scale, scale);
    return l;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

inline double rel_err(double a, double b, double floor = 1e-12) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace testing_support
