#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sos/colearn.hpp"
#include "sos/netsim.hpp"
#include "sos/scenario.hpp"

namespace sos {

/// Per-arm averages over the paired seeds of a defense comparison.
struct ArmSummary {
  double T = 0.0;  // unrecovered runs count end - t2, unimpacted runs 0
  double D = 0.0;
  double M = 0.0;
  double total_loss = 0.0;
  int impacted = 0;
  int recovered = 0;
  int resilient = 0;
  double recovered_fraction = 1.0;
};

struct Comparison {
  int seeds = 0;
  Baseline baseline = Baseline::none;
  ArmSummary aware;
  ArmSummary unaware;
  bool recovers = false;
  bool faster = false;
  bool less_loss = false;
  std::vector<std::string> flags;
};

/// Minimum recovered fraction (among impacted runs) for the recovery claim.
inline constexpr double kRecoveryFraction = 0.9;

/// Cyber-aware arm (defense drawn from f*) against the unaware baseline, both
/// facing attacks drawn from g*. Seed s draws (i, j_aware, j_unaware) from
/// derive_seed(seed, {kCompare, s}); both arms share the simulation seed.
Comparison compare_defense(const SubsystemConfig& cfg, const DiscreteModel& disc,
                           const SoSEquilibrium& eq, std::uint64_t seed, int seeds,
                           Baseline baseline, int jobs = 1);

nlohmann::ordered_json to_json(const Comparison& c);
nlohmann::ordered_json to_json(const SoSEquilibrium& eq);

/// "a:b:step" -> a, a + step, ... up to b. A single number is a one-point grid.
std::vector<double> parse_grid(const std::string& grid);

struct SweepRow {
  std::string param;
  double value = 0.0;
  double T = 0.0, D = 0.0, M = 0.0, total_loss = 0.0;
  Vec g, f;
  double game_value = 0.0;
  double breaches = 0.0;
  std::string status = "ok";
};

/// Subsystem scenarios accept alpha, C_a[i] and C_d[j]; network scenarios
/// accept kappa (applied to every edge).
std::vector<SweepRow> run_sweep(const Scenario& sc, const std::string& param,
                                const std::vector<double>& grid, std::uint64_t seed, int jobs);
std::string sweep_csv(const std::vector<SweepRow>& rows);

/// Mean breach count over edge-target subsystems, paired seeds derived from
/// `seed` with kNetwork.
double mean_downstream_breaches(const NetworkSetup& setup, std::uint64_t seed, int seeds,
                                int jobs = 1);

struct CommandOptions {
  std::filesystem::path scenario;
  std::filesystem::path out;
  std::uint64_t seed = 0;
  int attack = 0;
  int defense = 0;
  std::string param;
  std::string grid;
  std::optional<Baseline> baseline;
  int jobs = 1;
};

/// Command results: 0 on success, kExitNotConverged when outputs were
/// written but co-learning did not converge.
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitNotConverged = 4;

int cmd_run(const Scenario& sc, const CommandOptions& opt);
int cmd_colearn(const Scenario& sc, const CommandOptions& opt);
int cmd_compare(const Scenario& sc, const CommandOptions& opt);
int cmd_sweep(const Scenario& sc, const CommandOptions& opt);
int cmd_network(const Scenario& sc, const CommandOptions& opt);

/// 17 significant digits, as used in every CSV.
std::string format_number(double v);
std::string trajectory_csv(const Trajectory& traj);

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace sos
