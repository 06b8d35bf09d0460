#pragma once

// Nominal quadratic-control and mass-optimal transfers.

#include "pontryagus/continuation.hpp"
#include "pontryagus/shooting.hpp"

#include <cstdint>
#include <stdexcept>

namespace pontryagus {

struct NominalConfig {
  std::uint64_t seed = 42;
  int max_restarts = 500;
  double costate_box = 1.0;     // initial costates ~ U(-box, box)
  // Canonical time of flight. It is the fixed transfer time when the problem
  // has free_time = false and only the initial guess otherwise; 0 selects the
  // Hohmann half period.
  double time_of_flight = 7.0;
  HomotopyConfig homotopy;
  NewtonOptions newton = continuation_newton_options();
};

class NominalSolveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NominalSolutions {
  TpbvpSolution qoc;
  TpbvpSolution moc;
  int restarts_used = 0;
  std::uint64_t seed = 0;
};

/// Seeded multistart on the alpha = 0 problem; every converged
/// quadratic-control solution is continued to alpha = 1 until one homotopy
/// succeeds. Throws NominalSolveError when the restarts are exhausted.
NominalSolutions solve_nominal(const TransferProblem& prob, const NominalConfig& cfg = {});

/// Random initial guess number `restart` of the multistart sequence.
ShootingUnknowns multistart_guess(const TransferProblem& prob, const NominalConfig& cfg, int restart);

}  // namespace pontryagus
