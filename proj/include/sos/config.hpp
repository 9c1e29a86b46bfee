#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "sos/linalg.hpp"
#include "sos/mjls.hpp"
#include "sos/resilience.hpp"

namespace sos {

enum class SolverKind { automatic, exact, fictitious_play, regret_matching };
std::string_view to_string(SolverKind kind);

struct GameConfig {
  double alpha = 1.0;
  Vec defense_cost;
  Vec attack_cost;
  SolverKind solver = SolverKind::automatic;
  long max_iters = 100000;
};

struct ControllerConfig {
  Mat Q;
  Mat R;
};

struct SimConfig {
  double dt = 0.1;
  double horizon = 200.0;
  double burn_in = 20.0;
  double attack_time = 20.0;
  int reps = 50;
  std::uint64_t seed = 42;
  Vec x0;
  int theta0 = 0;

  RunSpec run_spec() const { return {horizon, attack_time, x0, theta0}; }
};

struct ResilienceConfig {
  StageThresholds thresholds;
  double tail_window = 30.0;
  ResilienceTargets targets;
  /// Overrides the closed-loop nominal steady-state perf when set.
  std::optional<double> nominal;
};

struct ColearnConfig {
  int max_outer = 200;
  double damping = 0.5;
  double tol_s = 1e-3;
  double tol_g_rel = 1e-3;
  double tol_p_rel = 1e-2;
  /// Consecutive outer iterations with strategy change below tol_s required
  /// before stopping (fewer when the loop is younger than this).
  int sustain = 5;
};

enum class Baseline { none, uniform };
std::string_view to_string(Baseline b);

struct CompareConfig {
  int seeds = 100;
  Baseline baseline = Baseline::none;
};

/// Everything needed to co-learn, simulate and assess one subsystem.
struct SubsystemConfig {
  MjlsModel model;
  TransitionModel transitions;
  GameConfig game;
  ControllerConfig controller;
  SimConfig sim;
  ResilienceConfig resilience;
  ColearnConfig colearn;
  CompareConfig compare;
};

}  // namespace sos
