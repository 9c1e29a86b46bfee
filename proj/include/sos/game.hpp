#pragma once

#include <cstdint>
#include <vector>

#include "sos/linalg.hpp"

namespace sos {

/// Mixed strategies over the n+1 options {no action, 1, ..., n}.
/// g: attacker, f: defender.
struct StrategyProfile {
  Vec g;
  Vec f;
};

/// Attacker-defender security game. Row index i is the attack, column index
/// j the defense. The defender maximizes U = alpha P - C_d[j]; the attacker
/// minimizes C = alpha P + C_a[i].
struct SecurityGame {
  int n = 0;
  double alpha = 1.0;
  Mat P;
  Vec defense_cost;
  Vec attack_cost;
  Mat U;
  Mat C;

  int options() const { return n + 1; }
  double payoff_range() const { return U.maxCoeff() - U.minCoeff(); }
};

SecurityGame build_game(double alpha, const Mat& power, const Vec& defense_cost,
                        const Vec& attack_cost);

/// alpha P - C_d[j] + C_a[i]: the zero-sum game (attacker minimizes,
/// defender maximizes) with the same best-response correspondences as (U, C).
Mat zero_sum_equivalent(const SecurityGame& game);

/// Simplex membership: entries >= -tol, sum within tol of one.
bool on_simplex(const Vec& p, double tol = 1e-9);

/// Best responses, lowest index on ties. `g`/`f` must lie on the simplex.
int best_response_defender(const SecurityGame& game, const Vec& g);
int best_response_attacker(const SecurityGame& game, const Vec& f);

/// Full best-response index sets for a payoff matrix: columns maximizing
/// g^T M, or rows minimizing M f, within `tol`.
std::vector<int> argmax_columns(const Mat& payoff, const Vec& g, double tol = 0.0);
std::vector<int> argmin_rows(const Mat& cost, const Vec& f, double tol = 0.0);

struct Exploitability {
  double defender_gap = 0.0;
  double attacker_gap = 0.0;
  double max() const { return defender_gap > attacker_gap ? defender_gap : attacker_gap; }
};

Exploitability exploitability(const SecurityGame& game, const StrategyProfile& profile);

struct EquilibriumResult {
  StrategyProfile profile;
  double defender_gap = 0.0;
  double attacker_gap = 0.0;
  /// g^T M' f for the zero-sum equivalent.
  double game_value = 0.0;
  long iterations = 0;
  /// Max exploitability at every checkpoint.
  std::vector<double> trace;
  /// Regret matching only: max average positive regret at every checkpoint.
  std::vector<double> regret_trace;
};

/// 1e-3 of the payoff range.
double default_tolerance(const SecurityGame& game);

inline constexpr long kCheckpointInterval = 1000;

/// Simultaneous fictitious play from uniform initial beliefs. Returns the
/// empirical averages of the played actions; stops as soon as both gaps are
/// below `tol`.
EquilibriumResult fictitious_play(const SecurityGame& game, long max_iters, double tol);

/// Regret matching with sampled actions; returns the average of the mixed
/// strategies played.
EquilibriumResult regret_matching(const SecurityGame& game, long max_iters, double tol,
                                  std::uint64_t seed);

/// Largest game accepted by solve_exact.
inline constexpr int kExactMaxOptions = 5;

/// Saddle point of the zero-sum equivalent by support enumeration.
EquilibriumResult solve_exact(const SecurityGame& game);

}  // namespace sos
