#pragma once

#include <cstdint>
#include <vector>

#include "sos/config.hpp"
#include "sos/game.hpp"
#include "sos/mjls.hpp"

namespace sos {

struct PowerMatrix {
  Mat mean;
  Mat std_error;
};

/// Monte Carlo estimate of P_ij, the average perf after burn-in under pure
/// attack i and pure defense j. Replication r of pair (i, j) uses seed
/// derive_seed(seed, {kPower, i, j, r}); results are reduced in (i, j, r)
/// order so `jobs` never changes the output.
PowerMatrix estimate_power_matrix(const DiscreteModel& disc, const Controller& k,
                                  const SimConfig& sim, std::uint64_t seed, int jobs = 1);

/// Q-bar = sum_ij g_i f_j Q^{ij}.
Mat blended_generator(const TransitionModel& trans, const StrategyProfile& profile);

/// Jump-LQR gains for the mode process induced by the blended generator.
/// Throws NumericError if any mode's closed loop has spectral radius >= 1.
Controller synthesize_controllers(const DiscreteModel& disc, const ControllerConfig& weights,
                                  const StrategyProfile& profile);

/// Dispatches on config.solver; `automatic` picks solve_exact when the game
/// is small enough and fictitious play otherwise.
EquilibriumResult solve_game(const SecurityGame& game, const GameConfig& config,
                             std::uint64_t seed);

struct Residuals {
  double strategy_change = 0.0;
  double power_change = 0.0;
  double defender_gap = 0.0;
  double attacker_gap = 0.0;
  bool power_settled = false;
};

struct SoSEquilibrium {
  StrategyProfile profile;
  Mat P;
  Mat P_std_error;
  Controller controllers;
  int iterations = 0;
  bool converged = false;
  double game_value = 0.0;
  double tol_s = 0.0;
  double tol_g = 0.0;
  double tol_p = 0.0;
  double nominal = 0.0;
  Residuals residuals;
  std::vector<Residuals> history;
};

/// IT-OT co-learning: alternate controller synthesis and power estimation
/// (OT) with equilibrium solving (IT), damping the strategy updates, until
/// strategies, power matrix and exploitability all settle.
/// Non-convergence is reported via `converged`, not thrown.
SoSEquilibrium co_learn(const SubsystemConfig& config, std::uint64_t seed, int jobs = 1);

struct EquilibriumCheck {
  Mat P;
  Mat P_std_error;
  double defender_gap = 0.0;
  double attacker_gap = 0.0;
  /// 2 alpha * 3 * max combined standard error: how far the gaps can move
  /// from Monte Carlo noise in P alone.
  double noise_allowance = 0.0;
  double gap_tolerance = 0.0;
  double max_power_deviation = 0.0;
  /// max_ij |P_ij - P*_ij| / combined standard error (0 when both are 0).
  double max_power_z = 0.0;
  bool gaps_ok = false;
  bool power_ok = false;
};

/// Recomputes P at the equilibrium profile with `seed` and reports the
/// exploitability and the deviation from P* against the noise bound.
EquilibriumCheck check_equilibrium(const SoSEquilibrium& eq, const SubsystemConfig& config,
                                   std::uint64_t seed, int jobs = 1);

}  // namespace sos
