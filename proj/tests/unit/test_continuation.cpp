#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pontryagus/continuation.hpp"
#include "fixtures.hpp"

using namespace pontryagus;
using testing_support::Gen;

namespace {

// The weight schedule implied by the converged flags, replayed from the rules.
std::vector<double> replay_schedule(const std::vector<HomotopyAttempt>& attempts, double alpha_tol) {
  std::vector<double> out;
  double alpha = 1.0, best = 0.0;
  for (const HomotopyAttempt& a : attempts) {
    out.push_back(alpha);
    if (a.converged) {
      best = alpha;
      alpha = alpha < alpha_tol ? 0.5 * (1.0 + alpha) : 1.0;
    } else {
      alpha = 0.5 * (alpha + best);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("weight update rules") {
  CHECK(homotopy_alpha_after_success(0.0, 0.99) == 0.5);
  CHECK(homotopy_alpha_after_success(0.5, 0.99) == 0.75);
  CHECK(homotopy_alpha_after_success(0.98, 0.99) == doctest::Approx(0.99));
  CHECK(homotopy_alpha_after_success(0.99, 0.99) == 1.0);
  CHECK(homotopy_alpha_after_success(0.995, 0.99) == 1.0);
  CHECK(homotopy_alpha_after_failure(1.0, 0.0) == 0.5);
  CHECK(homotopy_alpha_after_failure(0.75, 0.5) == 0.625);

  Gen g(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const double tol = g.uniform(0.5, 0.999);
    const double best = g.uniform(0.0, 1.0);
    const double alpha = g.uniform(best, 1.0);
    const double s = homotopy_alpha_after_success(alpha, tol);
    CHECK(s > alpha);
    CHECK(s <= 1.0);
    const double f = homotopy_alpha_after_failure(alpha, best);
    CHECK(f >= best);
    CHECK(f <= alpha);
  }
}

TEST_CASE("success sequence reaches one in a bounded number of steps") {
  // From alpha = 0 the successes give 1 - 2^-k until alpha_tol is passed.
  double alpha = 0.0;
  int steps = 0;
  while (alpha < 1.0) {
    alpha = homotopy_alpha_after_success(alpha, 0.99);
    ++steps;
  }
  CHECK(steps == 8);  // 0.5 .. 0.9921875, then 1
}

TEST_CASE("config validation") {
  HomotopyConfig c;
  c.validate();
  c.alpha_tol = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.alpha_tol = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = HomotopyConfig{};
  c.max_iters = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  CHECK(continuation_newton_options().central_differences);
}

TEST_CASE("homotopy continues the small transfer to bang-bang control") {
  const TransferProblem p = testing_support::small_transfer();
  const TpbvpSolution& qoc = testing_support::small_qoc();
  const HomotopyConfig cfg;
  const HomotopyResult h = homotopy(qoc.z, p, cfg);
  REQUIRE(h.success);
  CHECK(h.alpha_best == 1.0);
  REQUIRE_FALSE(h.attempts.empty());
  CHECK(h.attempts.front().alpha == 1.0);
  CHECK(h.attempts.back().alpha == 1.0);
  CHECK(h.attempts.back().converged);
  CHECK(static_cast<int>(h.attempts.size()) <= cfg.max_iters);

  const std::vector<double> schedule = replay_schedule(h.attempts, cfg.alpha_tol);
  for (std::size_t k = 0; k < schedule.size(); ++k) CHECK(h.attempts[k].alpha == schedule[k]);

  const TpbvpSolution& moc = h.solution;
  CHECK(moc.alpha == 1.0);
  CHECK(moc.residual_norm <= 1e-8);
  CHECK(moc.z.dt == qoc.z.dt);
  int switches = 0;
  for (std::size_t k = 0; k < moc.trajectory.nodes.size(); ++k) {
    const double u = moc.trajectory.nodes[k].ctrl.u;
    CHECK((u == 0.0 || u == 1.0));
    if (k > 0 && u != moc.trajectory.nodes[k - 1].ctrl.u) ++switches;
  }
  CHECK(switches >= 1);
  // Mass-optimal control cannot burn more than the quadratic-control solution.
  CHECK(moc.trajectory.nodes.back().x.m >= qoc.trajectory.nodes.back().x.m - 1e-9);
  // Same departure state.
  CHECK(moc.trajectory.nodes.front().x.to_vector() == qoc.trajectory.nodes.front().x.to_vector());
}

TEST_CASE("homotopy reports failure when the iteration budget runs out") {
  const TransferProblem p = testing_support::small_transfer();
  ShootingUnknowns hopeless = testing_support::small_qoc().z;
  hopeless.lam0.lm = 1e6;
  hopeless.lam0.lv *= 1e4;
  HomotopyConfig cfg;
  cfg.max_iters = 3;
  NewtonOptions newton = continuation_newton_options();
  newton.max_iterations = 5;
  const HomotopyResult h = homotopy(hopeless, p, cfg, newton);
  CHECK_FALSE(h.success);
  CHECK(h.attempts.size() == 3u);
  const std::vector<double> schedule = replay_schedule(h.attempts, cfg.alpha_tol);
  for (std::size_t k = 0; k < schedule.size(); ++k) CHECK(h.attempts[k].alpha == schedule[k]);
}
