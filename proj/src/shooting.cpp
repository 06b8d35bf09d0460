#include "pontryagus/shooting.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>

namespace pontryagus {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kConverged: return "converged";
    case SolveStatus::kIterationLimit: return "iteration limit";
    case SolveStatus::kNonFiniteResidual: return "non-finite residual";
    case SolveStatus::kLineSearchFailed: return "line search failed";
    case SolveStatus::kSingularJacobian: return "singular jacobian";
  }
  return "unknown";
}

void TransferProblem::validate() const {
  departure.validate();
  arrival.validate();
  eng.validate();
  if (!(m0 > 0.0)) throw std::invalid_argument("initial mass must be positive");
  if (!(mu > 0.0)) throw std::invalid_argument("mu must be positive");
  if (fixed_start && (!(fixed_start->m > 0.0) || !(fixed_start->r.norm() > 0.0))) {
    throw std::invalid_argument("fixed departure state requires m > 0 and |r| > 0");
  }
}

SpacecraftState TransferProblem::departure_state(double E0) const {
  if (fixed_start) return *fixed_start;
  const CartesianState s = elements_to_cartesian(departure.at(E0), mu);
  return {s.r, s.v, m0};
}

Eigen::VectorXd to_vector(const ShootingUnknowns& z, const TransferProblem& prob) {
  Eigen::VectorXd v(prob.dimension());
  v.head<7>() = z.lam0.to_vector();
  int k = 7;
  if (prob.free_time) v[k++] = z.dt;
  if (prob.departure_phase_unknown()) v[k++] = z.E0;
  if (prob.free_arrival_phase) v[k++] = z.Ef;
  return v;
}

ShootingUnknowns from_vector(const Eigen::VectorXd& v, const TransferProblem& prob,
                             const ShootingUnknowns& fixed) {
  ShootingUnknowns z = fixed;
  z.lam0 = Costate::from_vector(v.head<7>());
  int k = 7;
  if (prob.free_time) z.dt = v[k++];
  if (prob.departure_phase_unknown()) z.E0 = v[k++];
  if (prob.free_arrival_phase) z.Ef = v[k++];
  return z;
}

double transversality_anomaly(const SpacecraftState& x, const Costate& lam, double mu) {
  const double r = x.r.norm();
  return lam.lr.dot(x.v) - lam.lv.dot(mu / (r * r * r) * x.r);
}

double transversality_sma(const Costate& lam, const Vec3& r2, const Vec3& v2) {
  return 2.0 * lam.lr.dot(r2) - lam.lv.dot(v2);
}

Eigen::VectorXd residuals_from_trajectory(const TrajectoryRecord& traj, double Ef,
                                          const TransferProblem& prob) {
  const TrajectoryNode& first = traj.nodes.front();
  const TrajectoryNode& last = traj.nodes.back();
  const CartesianState target = elements_to_cartesian(prob.arrival.at(Ef), prob.mu);

  Eigen::VectorXd res(prob.dimension());
  res.segment<3>(0) = last.x.r - target.r;
  res.segment<3>(3) = last.x.v - target.v;
  res[6] = last.lam.lm;
  int k = 7;
  if (prob.free_time) res[k++] = optimal_hamiltonian(last.x, last.lam, prob.eng, prob.mu);
  if (prob.departure_phase_unknown()) res[k++] = transversality_anomaly(first.x, first.lam, prob.mu);
  if (prob.free_arrival_phase) res[k++] = transversality_anomaly(last.x, last.lam, prob.mu);
  return res;
}

ShootingResiduals shooting_residuals(const ShootingUnknowns& z, const TransferProblem& prob,
                                     double tol) {
  ShootingResiduals out;
  out.values = Eigen::VectorXd::Constant(prob.dimension(), std::numeric_limits<double>::quiet_NaN());
  if (!z.lam0.all_finite() || !std::isfinite(z.dt) || !std::isfinite(z.E0) || !std::isfinite(z.Ef)) {
    out.propagation_failed = true;
    out.failure = "non-finite unknowns";
    return out;
  }
  if (!(z.dt > 0.0)) {
    out.propagation_failed = true;
    out.failure = "non-positive time of flight";
    return out;
  }
  try {
    PropagateOptions popt;
    popt.tol = tol;
    popt.record = false;
    const TrajectoryRecord traj = propagate(prob.departure_state(z.E0), z.lam0, z.dt, prob.eng, prob.mu, popt);
    out.values = residuals_from_trajectory(traj, z.Ef, prob);
  } catch (const PropagationError& e) {
    out.propagation_failed = true;
    out.failure = e.what();
  }
  return out;
}

namespace {

double step_for(double value, const NewtonOptions& opt) {
  return std::max(opt.fd_relative_step * std::abs(value), opt.fd_absolute_step);
}

// Returns false when neither forward nor backward perturbation is finite.
bool jacobian_at(const Eigen::VectorXd& zv, const Eigen::VectorXd& f0, const TransferProblem& prob,
                 const ShootingUnknowns& base, const NewtonOptions& opt, Eigen::MatrixXd& jac) {
  const int n = static_cast<int>(zv.size());
  jac.resize(f0.size(), n);
  for (int j = 0; j < n; ++j) {
    const double h = step_for(zv[j], opt);
    Eigen::VectorXd zp = zv;
    zp[j] += h;
    ShootingResiduals fp = shooting_residuals(from_vector(zp, prob, base), prob, opt.integration_tol);
    if (fp.finite() && opt.central_differences) {
      Eigen::VectorXd zm = zv;
      zm[j] -= h;
      const ShootingResiduals fm = shooting_residuals(from_vector(zm, prob, base), prob, opt.integration_tol);
      if (fm.finite()) {
        jac.col(j) = (fp.values - fm.values) / (2.0 * h);
        continue;
      }
    }
    if (fp.finite()) {
      jac.col(j) = (fp.values - f0) / h;
      continue;
    }
    zp[j] = zv[j] - h;
    fp = shooting_residuals(from_vector(zp, prob, base), prob, opt.integration_tol);
    if (!fp.finite()) return false;
    jac.col(j) = (f0 - fp.values) / h;
  }
  return true;
}

}  // namespace

Eigen::MatrixXd shooting_jacobian(const ShootingUnknowns& z, const TransferProblem& prob,
                                  const NewtonOptions& opt) {
  const Eigen::VectorXd zv = to_vector(z, prob);
  const ShootingResiduals f0 = shooting_residuals(z, prob, opt.integration_tol);
  Eigen::MatrixXd jac;
  if (!f0.finite() || !jacobian_at(zv, f0.values, prob, z, opt, jac)) {
    jac = Eigen::MatrixXd::Constant(prob.dimension(), prob.dimension(),
                                    std::numeric_limits<double>::quiet_NaN());
  }
  return jac;
}

TpbvpSolution solve_tpbvp(const ShootingUnknowns& guess, const TransferProblem& prob,
                          const NewtonOptions& opt) {
  TpbvpSolution sol;
  sol.alpha = prob.eng.alpha;
  sol.z = guess;

  Eigen::VectorXd zv = to_vector(guess, prob);
  ShootingResiduals f = shooting_residuals(guess, prob, opt.integration_tol);
  if (!f.finite()) {
    sol.status = SolveStatus::kNonFiniteResidual;
    sol.residual_norm = std::numeric_limits<double>::infinity();
    return sol;
  }

  Eigen::MatrixXd jac;
  int iter = 0;
  for (;; ++iter) {
    sol.residual_norm = f.inf_norm();
    if (sol.residual_norm <= opt.tol) {
      sol.status = SolveStatus::kConverged;
      break;
    }
    if (iter >= opt.max_iterations) {
      sol.status = SolveStatus::kIterationLimit;
      break;
    }
    if (!jacobian_at(zv, f.values, prob, guess, opt, jac)) {
      sol.status = SolveStatus::kNonFiniteResidual;
      break;
    }
    const Eigen::VectorXd delta = jac.colPivHouseholderQr().solve(-f.values);
    if (!delta.allFinite()) {
      sol.status = SolveStatus::kSingularJacobian;
      break;
    }

    const double f_norm = f.values.norm();
    double scale = 1.0;
    bool accepted = false;
    for (int k = 0; k <= opt.max_halvings; ++k, scale *= 0.5) {
      const Eigen::VectorXd trial = zv + scale * delta;
      ShootingResiduals ft = shooting_residuals(from_vector(trial, prob, guess), prob, opt.integration_tol);
      if (ft.finite() && ft.values.norm() < f_norm) {
        zv = trial;
        f = std::move(ft);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      sol.status = SolveStatus::kLineSearchFailed;
      break;
    }
  }

  sol.iterations = iter;
  sol.z = from_vector(zv, prob, guess);
  if (sol.converged()) {
    try {
      PropagateOptions popt;
      popt.tol = opt.integration_tol;
      sol.trajectory = propagate(prob.departure_state(sol.z.E0), sol.z.lam0, sol.z.dt, prob.eng, prob.mu, popt);
      sol.trajectory.converged = true;
    } catch (const PropagationError&) {
      sol.status = SolveStatus::kNonFiniteResidual;
    }
  }
  return sol;
}

TpbvpSolution solve_tpbvp_globalized(const ShootingUnknowns& guess, const TransferProblem& prob,
                                     const LevenbergMarquardtOptions& lm, const NewtonOptions& newton) {
  NewtonOptions fd = newton;
  fd.integration_tol = lm.integration_tol;
  auto residuals = [&](const Eigen::VectorXd& x) {
    return shooting_residuals(from_vector(x, prob, guess), prob, lm.integration_tol);
  };

  Eigen::VectorXd x = to_vector(guess, prob);
  ShootingResiduals f = residuals(x);
  if (!f.finite()) {
    TpbvpSolution failed;
    failed.z = guess;
    failed.alpha = prob.eng.alpha;
    failed.status = SolveStatus::kNonFiniteResidual;
    failed.residual_norm = std::numeric_limits<double>::infinity();
    return failed;
  }

  double damping = lm.initial_damping;
  Eigen::MatrixXd jac;
  int iter = 0;
  for (; iter < lm.max_iterations && f.inf_norm() > lm.tol; ++iter) {
    if (!jacobian_at(x, f.values, prob, guess, fd, jac)) break;
    const Eigen::MatrixXd normal = jac.transpose() * jac;
    const Eigen::VectorXd grad = jac.transpose() * f.values;
    const Eigen::VectorXd diag = normal.diagonal().cwiseMax(1e-6);
    bool improved = false;
    for (int k = 0; k < 10; ++k) {
      Eigen::MatrixXd damped = normal;
      damped.diagonal() += damping * diag;
      const Eigen::VectorXd step = damped.ldlt().solve(-grad);
      if (!step.allFinite()) {
        damping *= 4.0;
        continue;
      }
      ShootingResiduals ft = residuals(x + step);
      if (ft.finite() && ft.values.squaredNorm() < f.values.squaredNorm()) {
        x += step;
        f = std::move(ft);
        damping = std::max(damping / 3.0, 1e-9);
        improved = true;
        break;
      }
      damping *= 4.0;
    }
    if (!improved) break;
  }

  if (!f.finite() || f.inf_norm() > lm.polish_threshold) {
    TpbvpSolution failed;
    failed.z = from_vector(x, prob, guess);
    failed.alpha = prob.eng.alpha;
    failed.iterations = iter;
    failed.residual_norm = f.finite() ? f.inf_norm() : std::numeric_limits<double>::infinity();
    failed.status = SolveStatus::kIterationLimit;
    return failed;
  }
  TpbvpSolution sol = solve_tpbvp(from_vector(x, prob, guess), prob, newton);
  sol.iterations += iter;
  return sol;
}

double hohmann_time_guess(const TransferProblem& prob) {
  const double a = 0.5 * (prob.departure.elements.a + prob.arrival.elements.a);
  return kPi * std::sqrt(a * a * a / prob.mu);
}

}  // namespace pontryagus
