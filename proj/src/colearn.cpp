#include "sos/colearn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "sos/errors.hpp"
#include "sos/parallel.hpp"
#include "sos/rng.hpp"

namespace sos {

std::string_view to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::automatic: return "auto";
    case SolverKind::exact: return "exact";
    case SolverKind::fictitious_play: return "fictitious_play";
    case SolverKind::regret_matching: return "regret_matching";
  }
  return "unknown";
}

std::string_view to_string(Baseline b) { return b == Baseline::none ? "none" : "uniform"; }

PowerMatrix estimate_power_matrix(const DiscreteModel& disc, const Controller& k,
                                  const SimConfig& sim, std::uint64_t seed, int jobs) {
  const int options = disc.options();
  for (int i = 0; i < options; ++i) {
    for (int j = 0; j < options; ++j) {
      if (!ms_stable(disc, i, j, k)) {
        throw NumericError("estimate_power_matrix: pair (" + std::to_string(i) + "," +
                           std::to_string(j) +
                           ") is not mean-square stable under the current controllers");
      }
    }
  }
  if (sim.reps < 1) throw ValidationError("estimate_power_matrix: reps must be >= 1");
  if (!(sim.burn_in < sim.horizon)) {
    throw ValidationError("estimate_power_matrix: burn-in must be shorter than the horizon");
  }
  const auto reps = static_cast<std::size_t>(sim.reps);
  const std::size_t pairs = static_cast<std::size_t>(options * options);
  std::vector<double> averages(pairs * reps);
  const RunSpec spec = sim.run_spec();
  parallel_for(averages.size(), jobs, [&](std::size_t task) {
    const std::size_t pair = task / reps;
    const std::size_t rep = task % reps;
    const auto i = static_cast<int>(pair) / options;
    const auto j = static_cast<int>(pair) % options;
    const std::uint64_t s = derive_seed(
        seed, {stream::kPower, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j), rep});
    const Trajectory traj = simulate(disc, k, i, j, spec, s, /*full_history=*/false);
    averages[task] = average_power(traj, sim.burn_in).mean;
  });

  PowerMatrix out{Mat::Zero(options, options), Mat::Zero(options, options)};
  for (std::size_t pair = 0; pair < pairs; ++pair) {
    const auto i = static_cast<Eigen::Index>(pair) / options;
    const auto j = static_cast<Eigen::Index>(pair) % options;
    double sum = 0.0;
    for (std::size_t r = 0; r < reps; ++r) sum += averages[pair * reps + r];
    const double mean = sum / static_cast<double>(reps);
    double ss = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      const double d = averages[pair * reps + r] - mean;
      ss += d * d;
    }
    out.mean(i, j) = std::max(mean, 0.0);
    out.std_error(i, j) =
        reps > 1 ? std::sqrt(ss / static_cast<double>(reps - 1) / static_cast<double>(reps)) : 0.0;
  }
  return out;
}

Mat blended_generator(const TransitionModel& trans, const StrategyProfile& profile) {
  const int options = trans.options();
  Mat q = Mat::Zero(trans.q(0, 0).rows(), trans.q(0, 0).cols());
  for (int i = 0; i < options; ++i) {
    for (int j = 0; j < options; ++j) {
      const double w = profile.g(i) * profile.f(j);
      if (w != 0.0) q += w * trans.q(i, j);
    }
  }
  return q;
}

Controller synthesize_controllers(const DiscreteModel& disc, const ControllerConfig& weights,
                                  const StrategyProfile& profile) {
  const Mat transition =
      expm(blended_generator(disc.transitions, profile) * disc.dt).cwiseMax(0.0).cwiseMin(1.0);
  Controller k = jump_lqr_gains(disc, transition, weights.Q, weights.R);
  for (int m = 0; m < disc.modes(); ++m) {
    const double rho = spectral_radius(closed_loop(disc, k, m));
    if (!(rho < 1.0)) {
      std::ostringstream msg;
      msg << "synthesize_controllers: mode " << m << " (" << disc.continuous.mode_labels[m]
          << ") closed loop has spectral radius " << rho;
      throw NumericError(msg.str());
    }
  }
  return k;
}

EquilibriumResult solve_game(const SecurityGame& game, const GameConfig& config,
                             std::uint64_t seed) {
  const double tol = default_tolerance(game);
  switch (config.solver) {
    case SolverKind::exact: return solve_exact(game);
    case SolverKind::fictitious_play: return fictitious_play(game, config.max_iters, tol);
    case SolverKind::regret_matching: return regret_matching(game, config.max_iters, tol, seed);
    case SolverKind::automatic: break;
  }
  if (game.options() <= kExactMaxOptions) return solve_exact(game);
  return fictitious_play(game, config.max_iters, tol);
}

namespace {

double nominal_level(const DiscreteModel& disc, const Controller& k, const SubsystemConfig& cfg) {
  return cfg.resilience.nominal.value_or(nominal_perf(disc, k));
}

}  // namespace

SoSEquilibrium co_learn(const SubsystemConfig& cfg, std::uint64_t seed, int jobs) {
  const ColearnConfig& cc = cfg.colearn;
  if (cc.max_outer < 1) throw ValidationError("co_learn: max_outer must be >= 1");
  if (!(cc.damping > 0.0 && cc.damping <= 1.0)) {
    throw ValidationError("co_learn: damping must be in (0, 1]");
  }
  const DiscreteModel disc = discretize(cfg.model, cfg.transitions, cfg.sim.dt);
  const int options = disc.options();
  StrategyProfile profile{Vec::Constant(options, 1.0 / options),
                          Vec::Constant(options, 1.0 / options)};

  SoSEquilibrium eq;
  eq.tol_s = cc.tol_s;
  Mat prev_power;
  std::vector<double> strategy_changes;
  for (int outer = 1; outer <= cc.max_outer; ++outer) {
    // OT: controllers and power outcomes under the current strategy blend.
    Controller k = synthesize_controllers(disc, cfg.controller, profile);
    PowerMatrix power = estimate_power_matrix(disc, k, cfg.sim, seed, jobs);
    const double nominal = nominal_level(disc, k, cfg);

    // IT: equilibrium of the game induced by the fresh power matrix.
    const SecurityGame game =
        build_game(cfg.game.alpha, power.mean, cfg.game.defense_cost, cfg.game.attack_cost);
    const EquilibriumResult solved = solve_game(game, cfg.game, seed);

    const double eta = cc.damping;
    StrategyProfile next{(1.0 - eta) * profile.g + eta * solved.profile.g,
                         (1.0 - eta) * profile.f + eta * solved.profile.f};
    next.g /= next.g.sum();
    next.f /= next.f.sum();

    Residuals res;
    res.strategy_change = std::max((next.g - profile.g).cwiseAbs().maxCoeff(),
                                   (next.f - profile.f).cwiseAbs().maxCoeff());
    const double tol_p = cc.tol_p_rel * std::abs(nominal);
    if (outer == 1) {
      // Nothing to compare against; if the strategies did not move, the next
      // estimate would reproduce this one exactly.
      res.power_settled = res.strategy_change == 0.0;
      res.power_change = res.power_settled ? 0.0 : std::numeric_limits<double>::infinity();
    } else {
      const Mat delta = (power.mean - prev_power).cwiseAbs();
      res.power_change = delta.maxCoeff();
      res.power_settled = true;
      for (Eigen::Index i = 0; i < delta.rows(); ++i) {
        for (Eigen::Index j = 0; j < delta.cols(); ++j) {
          if (!(delta(i, j) < std::max(tol_p, 2.0 * power.std_error(i, j)))) {
            res.power_settled = false;
          }
        }
      }
    }
    const Exploitability gaps = exploitability(game, next);
    res.defender_gap = gaps.defender_gap;
    res.attacker_gap = gaps.attacker_gap;
    const double tol_g = cc.tol_g_rel * game.payoff_range();

    strategy_changes.push_back(res.strategy_change);
    const std::size_t window =
        std::min<std::size_t>(static_cast<std::size_t>(std::max(cc.sustain, 1)),
                              strategy_changes.size());
    const bool sustained =
        std::all_of(strategy_changes.end() - static_cast<std::ptrdiff_t>(window),
                    strategy_changes.end(), [&](double c) { return c < cc.tol_s; });

    eq.history.push_back(res);
    eq.residuals = res;
    eq.iterations = outer;
    eq.P = power.mean;
    eq.P_std_error = power.std_error;
    eq.controllers = std::move(k);
    eq.tol_g = tol_g;
    eq.tol_p = tol_p;
    eq.nominal = nominal;
    profile = next;
    eq.profile = profile;
    eq.game_value = profile.g.dot(zero_sum_equivalent(game) * profile.f);
    prev_power = std::move(power.mean);

    if (sustained && res.power_settled && gaps.defender_gap <= tol_g &&
        gaps.attacker_gap <= tol_g) {
      eq.converged = true;
      break;
    }
  }
  return eq;
}

EquilibriumCheck check_equilibrium(const SoSEquilibrium& eq, const SubsystemConfig& cfg,
                                   std::uint64_t seed, int jobs) {
  const DiscreteModel disc = discretize(cfg.model, cfg.transitions, cfg.sim.dt);
  const Controller k = synthesize_controllers(disc, cfg.controller, eq.profile);
  const PowerMatrix power = estimate_power_matrix(disc, k, cfg.sim, seed, jobs);
  const SecurityGame game =
      build_game(cfg.game.alpha, power.mean, cfg.game.defense_cost, cfg.game.attack_cost);
  const Exploitability gaps = exploitability(game, eq.profile);

  EquilibriumCheck out;
  out.P = power.mean;
  out.P_std_error = power.std_error;
  out.defender_gap = gaps.defender_gap;
  out.attacker_gap = gaps.attacker_gap;
  const Mat combined =
      (power.std_error.array().square() + eq.P_std_error.array().square()).sqrt().matrix();
  const Mat deviation = (power.mean - eq.P).cwiseAbs();
  out.max_power_deviation = deviation.maxCoeff();
  out.power_ok = true;
  for (Eigen::Index i = 0; i < deviation.rows(); ++i) {
    for (Eigen::Index j = 0; j < deviation.cols(); ++j) {
      const double se = combined(i, j);
      if (se > 0.0) {
        out.max_power_z = std::max(out.max_power_z, deviation(i, j) / se);
        if (deviation(i, j) > 3.0 * se) out.power_ok = false;
      } else if (deviation(i, j) > 1e-12 * std::max(1.0, std::abs(eq.P(i, j)))) {
        out.power_ok = false;
        out.max_power_z = std::numeric_limits<double>::infinity();
      }
    }
  }
  out.noise_allowance = 2.0 * cfg.game.alpha * 3.0 * combined.maxCoeff();
  out.gap_tolerance = eq.tol_g + out.noise_allowance;
  out.gaps_ok = gaps.defender_gap <= out.gap_tolerance && gaps.attacker_gap <= out.gap_tolerance;
  return out;
}

}  // namespace sos
