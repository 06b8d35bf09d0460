#include "pontryagus/datagen.hpp"

#include "pontryagus/parallel.hpp"
#include "pontryagus/seeding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pontryagus {

const char* to_string(AlphaLabel label) { return label == AlphaLabel::kQoc ? "qoc" : "moc"; }

AlphaLabel parse_alpha_label(const std::string& text) {
  if (text == "qoc") return AlphaLabel::kQoc;
  if (text == "moc") return AlphaLabel::kMoc;
  throw std::invalid_argument("alpha label must be qoc or moc, got '" + text + "'");
}

void WalkConfig::validate() const {
  if (!(gamma_bar > 0.0 && gamma_bar < 1.0)) throw std::invalid_argument("gamma_bar must lie in (0, 1)");
  if (n < 0) throw std::invalid_argument("walk length n must be non-negative");
  if (start_points < 1) throw std::invalid_argument("start_points must be at least 1");
}

std::size_t OptimalControlDataset::pair_count() const {
  std::size_t total = 0;
  for (const auto& t : trajectories) total += t.nodes.size();
  return total;
}

std::vector<WalkOrigin> walk_origins(const TpbvpSolution& nominal, int count) {
  const auto& nodes = nominal.trajectory.nodes;
  if (nodes.size() < 2) throw std::invalid_argument("nominal trajectory has no nodes");
  if (count < 1) throw std::invalid_argument("origin count must be at least 1");
  const double dt = nodes.back().t;
  std::vector<WalkOrigin> out;
  for (int k = 0; k < count; ++k) {
    const double target = dt * k / count;
    auto it = std::lower_bound(nodes.begin(), nodes.end(), target,
                               [](const TrajectoryNode& n, double t) { return n.t < t; });
    if (it == nodes.end()) --it;
    if (it != nodes.begin() && std::abs(std::prev(it)->t - target) <= std::abs(it->t - target)) --it;
    // The last node has no time left to fly.
    if (it == std::prev(nodes.end())) --it;
    WalkOrigin o;
    o.index = k;
    o.t_nominal = it->t;
    o.x = it->x;
    o.lam = it->lam;
    o.dt = dt - it->t;
    o.Ef = nominal.z.Ef;
    out.push_back(o);
  }
  return out;
}

double walk_gamma_after_success(double gamma, double gamma_bar) { return 0.5 * (gamma + gamma_bar); }

double walk_gamma_after_failure(double gamma) { return 0.5 * gamma; }

SpacecraftState perturb_state(const SpacecraftState& x, const Vec7& beta, double gamma) {
  const Vec7 v = x.to_vector();
  return SpacecraftState::from_vector(v + (v.array() * beta.array() * gamma).matrix());
}

Vec7 sample_beta(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec7 b;
  for (int k = 0; k < 7; ++k) b[k] = u(rng);
  return b;
}

TransferProblem walk_problem(const TransferProblem& base, const SpacecraftState& x, double alpha) {
  TransferProblem p = base.from_state(x).with_alpha(alpha);
  p.free_time = false;
  p.free_arrival_phase = true;
  return p;
}

WalkResult random_walk(const WalkOrigin& origin, const TransferProblem& base, double alpha,
                       const WalkConfig& cfg, std::uint64_t stream_seed, const NewtonOptions& newton,
                       const BetaSampler& beta) {
  cfg.validate();
  std::mt19937_64 rng(stream_seed);
  WalkResult out;
  SpacecraftState x0 = origin.x;
  ShootingUnknowns guess;
  guess.lam0 = origin.lam;
  guess.dt = origin.dt;
  guess.Ef = origin.Ef;
  double gamma = cfg.gamma_bar;

  for (int i = 1; i <= cfg.n; ++i) {
    out.gammas.push_back(gamma);
    const SpacecraftState x1 = perturb_state(x0, beta(rng), gamma);
    ++out.attempts;
    TpbvpSolution sol;
    if (x1.m > 0.0) sol = solve_tpbvp(guess, walk_problem(base, x1, alpha), newton);
    if (sol.converged()) {
      x0 = x1;
      guess = sol.z;
      gamma = walk_gamma_after_success(gamma, cfg.gamma_bar);
      ++out.successes;
      out.steps.push_back(i);
      out.solutions.push_back(std::move(sol));
    } else {
      gamma = walk_gamma_after_failure(gamma);
    }
  }
  return out;
}

namespace {

DatasetInfo info_from(const TransferProblem& base, AlphaLabel label) {
  DatasetInfo info;
  info.label = label;
  info.departure = base.departure.elements;
  info.arrival = base.arrival.elements;
  info.mu = base.mu;
  return info;
}

}  // namespace

OptimalControlDataset build_qoc_dataset(const TpbvpSolution& nominal_qoc, const TransferProblem& base,
                                        const WalkConfig& cfg, int threads, GenerationStats* stats,
                                        const NewtonOptions& newton) {
  cfg.validate();
  const std::vector<WalkOrigin> origins = walk_origins(nominal_qoc, cfg.start_points);

  struct OriginOutput {
    bool resolved = false;
    TpbvpSolution resolve;
    WalkResult walk;
    std::uint64_t seed = 0;
  };
  std::vector<OriginOutput> per_origin(origins.size());

  parallel_for(static_cast<int>(origins.size()), threads, [&](int k) {
    const WalkOrigin& o = origins[k];
    OriginOutput& slot = per_origin[k];
    slot.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(k));
    ShootingUnknowns guess;
    guess.lam0 = o.lam;
    guess.dt = o.dt;
    guess.Ef = o.Ef;
    slot.resolve = solve_tpbvp(guess, walk_problem(base, o.x, 0.0), newton);
    slot.resolved = slot.resolve.converged();
    slot.walk = random_walk(o, base, 0.0, cfg, slot.seed, newton);
  });

  OptimalControlDataset ds;
  ds.info = info_from(base, AlphaLabel::kQoc);
  ds.info.seed = cfg.seed;
  ds.info.gamma_bar = cfg.gamma_bar;
  ds.info.n = cfg.n;
  ds.info.start_points = cfg.start_points;
  GenerationStats local;
  for (std::size_t k = 0; k < origins.size(); ++k) {
    OriginOutput& slot = per_origin[k];
    auto push = [&](TpbvpSolution& sol, int step) {
      Provenance p;
      p.origin = static_cast<int>(k);
      p.step = step;
      p.t_origin = origins[k].t_nominal;
      p.Ef = sol.z.Ef;
      p.seed = slot.seed;
      ds.trajectories.push_back(std::move(sol.trajectory));
      ds.provenance.push_back(p);
    };
    if (slot.resolved) {
      ++local.origin_resolves;
      push(slot.resolve, 0);
    } else {
      local.failures.push_back("origin " + std::to_string(k) + ": re-solve failed (" +
                               to_string(slot.resolve.status) + ")");
    }
    for (std::size_t s = 0; s < slot.walk.solutions.size(); ++s) push(slot.walk.solutions[s], slot.walk.steps[s]);
    local.walk_attempts += slot.walk.attempts;
    local.walk_successes += slot.walk.successes;
  }
  if (stats) *stats = std::move(local);
  return ds;
}

OptimalControlDataset build_moc_dataset(const OptimalControlDataset& qoc, const TransferProblem& base,
                                        const HomotopyConfig& cfg, int threads, GenerationStats* stats,
                                        const NewtonOptions& newton) {
  cfg.validate();
  if (qoc.trajectories.empty()) throw std::invalid_argument("QOC dataset is empty");
  const int count = static_cast<int>(qoc.trajectories.size());
  std::vector<HomotopyResult> results(count);

  parallel_for(count, threads, [&](int i) {
    const TrajectoryRecord& t = qoc.trajectories[i];
    ShootingUnknowns entry;
    entry.lam0 = t.nodes.front().lam;
    entry.dt = t.duration();
    entry.Ef = qoc.provenance[i].Ef;
    results[i] = homotopy(entry, walk_problem(base, t.nodes.front().x, 0.0), cfg, newton);
  });

  OptimalControlDataset ds;
  ds.info = qoc.info;
  ds.info.label = AlphaLabel::kMoc;
  GenerationStats local;
  for (int i = 0; i < count; ++i) {
    ++local.homotopy_attempts;
    HomotopyResult& h = results[i];
    if (!h.success) {
      local.failures.push_back("trajectory " + std::to_string(i) + ": homotopy stalled at alpha = " +
                               std::to_string(h.alpha_best));
      continue;
    }
    ++local.homotopy_successes;
    Provenance p = qoc.provenance[i];
    p.source = i;
    p.Ef = h.solution.z.Ef;
    ds.trajectories.push_back(std::move(h.solution.trajectory));
    ds.provenance.push_back(p);
  }
  if (stats) *stats = std::move(local);
  return ds;
}

DatasetCheck check_dataset(const OptimalControlDataset& ds, const TransferProblem& base) {
  DatasetCheck out;
  for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
    const TrajectoryRecord& t = ds.trajectories[i];
    EngineParams eng = base.eng;
    eng.alpha = t.alpha;
    double worst = 0.0;
    for (const TrajectoryNode& n : t.nodes) {
      const ControlAction c = optimal_control(n.x, n.lam, eng);
      worst = std::max({worst, std::abs(c.u - n.ctrl.u), std::abs(c.theta - n.ctrl.theta),
                        std::abs(c.phi - n.ctrl.phi)});
    }
    out.max_control_mismatch = std::max(out.max_control_mismatch, worst);

    const TransferProblem p = walk_problem(base, t.nodes.front().x, t.alpha);
    double residual = std::numeric_limits<double>::infinity();
    try {
      PropagateOptions popt;
      popt.record = false;
      const TrajectoryRecord again = propagate(t.nodes.front().x, t.nodes.front().lam, t.duration(), p.eng, p.mu, popt);
      residual = residuals_from_trajectory(again, ds.provenance[i].Ef, p).lpNorm<Eigen::Infinity>();
    } catch (const PropagationError&) {
    }
    if (!(residual <= out.max_residual)) {
      out.max_residual = residual;
      out.worst_trajectory = static_cast<int>(i);
    }
  }
  return out;
}

}  // namespace pontryagus
