#pragma once

// Continuation on the cost weight alpha, from quadratic control towards
// mass-optimal (bang-bang) control.

#include "pontryagus/shooting.hpp"

#include <vector>

namespace pontryagus {

struct HomotopyConfig {
  double alpha_tol = 0.99;
  int max_iters = 100;

  void validate() const;
};

/// Newton settings for continuation solves: central-difference Jacobian.
NewtonOptions continuation_newton_options();

/// Next weight after a converged solve at `alpha`: halfway to one below
/// alpha_tol, one at or above it.
double homotopy_alpha_after_success(double alpha, double alpha_tol);

/// Next weight after a failed solve: midpoint between the failed weight and
/// the best weight solved so far.
double homotopy_alpha_after_failure(double alpha, double alpha_best);

struct HomotopyAttempt {
  double alpha = 0.0;
  bool converged = false;
};

struct HomotopyResult {
  bool success = false;
  TpbvpSolution solution;  // the alpha = 1 solution when successful
  double alpha_best = 0.0;
  std::vector<HomotopyAttempt> attempts;
};

/// Tries alpha = 1 first and walks alpha back towards the last converged
/// weight on failure. The entry guess (costates, time of flight, arrival
/// anomaly) is replaced by every converged solution; the departure state
/// never changes. Fails when max_iters solves pass without an alpha = 1
/// solution.
HomotopyResult homotopy(const ShootingUnknowns& entry, const TransferProblem& prob,
                        const HomotopyConfig& cfg = {},
                        const NewtonOptions& newton = continuation_newton_options());

}  // namespace pontryagus
