#include "pontryagus/continuation.hpp"

#include <stdexcept>

namespace pontryagus {

void HomotopyConfig::validate() const {
  if (!(alpha_tol > 0.0 && alpha_tol < 1.0)) throw std::invalid_argument("alpha_tol must lie in (0, 1)");
  if (max_iters < 1) throw std::invalid_argument("homotopy max_iters must be at least 1");
}

NewtonOptions continuation_newton_options() {
  NewtonOptions o;
  o.central_differences = true;
  return o;
}

double homotopy_alpha_after_success(double alpha, double alpha_tol) {
  return alpha < alpha_tol ? 0.5 * (1.0 + alpha) : 1.0;
}

double homotopy_alpha_after_failure(double alpha, double alpha_best) { return 0.5 * (alpha + alpha_best); }

HomotopyResult homotopy(const ShootingUnknowns& entry, const TransferProblem& prob,
                        const HomotopyConfig& cfg, const NewtonOptions& newton) {
  cfg.validate();
  HomotopyResult out;
  ShootingUnknowns guess = entry;
  double alpha = 1.0;
  out.alpha_best = 0.0;

  for (int it = 0; it < cfg.max_iters; ++it) {
    TpbvpSolution sol = solve_tpbvp(guess, prob.with_alpha(alpha), newton);
    out.attempts.push_back({alpha, sol.converged()});
    if (sol.converged()) {
      out.alpha_best = alpha;
      guess = sol.z;
      if (alpha == 1.0) {
        out.success = true;
        out.solution = std::move(sol);
        return out;
      }
      alpha = homotopy_alpha_after_success(alpha, cfg.alpha_tol);
    } else {
      alpha = homotopy_alpha_after_failure(alpha, out.alpha_best);
    }
  }
  return out;
}

}  // namespace pontryagus
