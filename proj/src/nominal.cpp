#include "pontryagus/nominal.hpp"

#include "pontryagus/seeding.hpp"

#include <algorithm>
#include <random>
#include <string>

namespace pontryagus {

ShootingUnknowns multistart_guess(const TransferProblem& prob, const NominalConfig& cfg, int restart) {
  std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(restart)));
  std::uniform_real_distribution<double> box(-cfg.costate_box, cfg.costate_box);
  std::uniform_real_distribution<double> anomaly(0.0, kTwoPi);
  ShootingUnknowns z;
  Vec7 lam;
  for (int k = 0; k < 7; ++k) lam[k] = box(rng);
  z.lam0 = Costate::from_vector(lam);
  z.dt = cfg.time_of_flight > 0.0 ? cfg.time_of_flight : hohmann_time_guess(prob);
  z.E0 = anomaly(rng);
  z.Ef = anomaly(rng);
  return z;
}

NominalSolutions solve_nominal(const TransferProblem& prob, const NominalConfig& cfg) {
  prob.validate();
  cfg.homotopy.validate();
  const TransferProblem qoc_problem = prob.with_alpha(0.0);

  NominalSolutions out;
  out.seed = cfg.seed;
  int qoc_found = 0;
  double best_alpha = 0.0;
  for (int k = 0; k < cfg.max_restarts; ++k) {
    out.restarts_used = k + 1;
    TpbvpSolution qoc = solve_tpbvp_globalized(multistart_guess(prob, cfg, k), qoc_problem, {}, cfg.newton);
    if (!qoc.converged()) continue;
    ++qoc_found;
    // A quadratic-control solution whose continuation stalls is discarded and
    // the multistart goes on.
    HomotopyResult h = homotopy(qoc.z, qoc_problem, cfg.homotopy, cfg.newton);
    if (h.success) {
      out.qoc = std::move(qoc);
      out.moc = std::move(h.solution);
      return out;
    }
    best_alpha = std::max(best_alpha, h.alpha_best);
  }
  if (qoc_found == 0) {
    throw NominalSolveError("no quadratic-control solution after " + std::to_string(cfg.max_restarts) +
                            " restarts");
  }
  throw NominalSolveError("homotopy to mass-optimal control failed from all " + std::to_string(qoc_found) +
                          " quadratic-control solutions (best alpha " + std::to_string(best_alpha) + ")");
}

}  // namespace pontryagus
