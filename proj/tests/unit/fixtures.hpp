#pragma once

// A small fixed-time transfer that solves in milliseconds, shared by the
// continuation, data generation and rollout tests.

#include "pontryagus/mission.hpp"
#include "pontryagus/shooting.hpp"
#include "support.hpp"

#include <stdexcept>

namespace testing_support {

// 1 AU circular to a coplanar 1.2 AU orbit from a fixed departure state.
inline TransferProblem small_transfer() {
  TransferProblem p = MissionSpec{}.problem();
  p.departure.elements = KeplerElements{1.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  p.arrival.elements = KeplerElements{1.2, 0.05, 0.0, 0.0, 0.0, 0.0};
  p.fixed_start = SpacecraftState{Vec3(1, 0, 0), Vec3(0, 1, 0), 1.0};
  p.free_time = false;
  return p;
}

inline constexpr double kSmallTransferTime = 4.0;

// Quadratic-control solution of small_transfer from seeded random guesses.
inline const TpbvpSolution& small_qoc() {
  static const TpbvpSolution sol = [] {
    const TransferProblem p = small_transfer();
    Gen g(24);
    for (int attempt = 0; attempt < 40; ++attempt) {
      ShootingUnknowns guess;
      guess.lam0 = g.costate(1.0);
      guess.dt = kSmallTransferTime;
      guess.Ef = g.uniform(0.0, kTwoPi);
      TpbvpSolution s = solve_tpbvp_globalized(guess, p);
      if (s.converged()) return s;
    }
    throw std::runtime_error("small transfer did not converge");
  }();
  return sol;
}

}  // namespace testing_support
