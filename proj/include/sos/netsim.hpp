#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sos/colearn.hpp"
#include "sos/config.hpp"
#include "sos/resilience.hpp"

namespace sos {

enum class SharingMode { isolated, shared_beliefs };
std::string_view to_string(SharingMode mode);

/// Failure of `source` amplifies the breach rates of `target` by (1 + kappa).
struct Edge {
  int source = 0;
  int target = 0;
  double kappa = 0.0;
};

inline constexpr int kSampleAction = -1;

struct NetworkSpec {
  std::vector<std::string> names;
  std::vector<SubsystemConfig> subsystems;
  std::vector<Edge> edges;
  Vec weights;
  SharingMode sharing = SharingMode::isolated;
  /// Per-subsystem pure attack/defense for network runs; kSampleAction draws
  /// from the attacker equilibrium strategy / the subsystem's defense.
  std::vector<int> attack;
  std::vector<int> defense;
  /// Attack observations per subsystem in the belief warm-up phase.
  int warmup = 20;
  /// Seeds per grid point in kappa sweeps.
  int seeds = 100;
  double horizon = 200.0;
  ResilienceConfig resilience;

  int size() const { return static_cast<int>(subsystems.size()); }
};

std::vector<Violation> validate_network(const NetworkSpec& spec);

/// Factor (1 + kappa) for every edge whose source is degraded
/// (perf < (1 - eps_deg) nominal), composed multiplicatively per target.
std::vector<double> cascade_factors(const std::vector<Edge>& edges, std::span<const double> perf,
                                    std::span<const double> nominal,
                                    std::span<const double> eps_deg);

/// Scales the nominal-row off-diagonal entries (the breach rates) of a
/// generator and restores the zero row sum.
Mat amplify_breach_rates(const Mat& generator, double factor);

struct SubsystemSetup {
  DiscreteModel disc;
  SoSEquilibrium eq;
  SecurityGame game;
  double nominal = 0.0;
  /// Empirical attack frequencies seen in warm-up (own or pooled).
  Vec belief;
  /// Defense strategy used in network runs.
  Vec defense;
  /// Defender exploitability of `defense` against the true attacker strategy.
  double belief_gap = 0.0;
};

struct NetworkSetup {
  NetworkSpec spec;
  std::vector<SubsystemSetup> subsystems;
  /// Weighted pool of the subsystems' equilibrium attacker strategies.
  Vec attacker;
  double belief_gap = 0.0;
};

/// Co-learns every subsystem, runs the belief warm-up and fixes each
/// subsystem's defense: isolated = best response to its own observations,
/// shared-beliefs = best response to the pooled observations.
NetworkSetup setup_network(const NetworkSpec& spec, std::uint64_t seed, int jobs = 1);

/// Simulation seed for subsystem s of a network run.
std::uint64_t subsystem_seed(std::uint64_t seed, int s);

struct NetworkRun {
  std::vector<int> attacks;
  std::vector<int> defenses;
  std::vector<Trajectory> trajectories;
  std::vector<ResilienceReport> reports;
  std::vector<std::size_t> breaches;
  std::vector<double> system_perf;
  std::vector<Event> system_events;
  ResilienceReport system_report;
};

/// Lock-step simulation of all subsystems with cascade coupling applied
/// between steps. Subsystems with no active amplification step exactly as a
/// standalone simulate() with the same seed.
NetworkRun run_network(const NetworkSetup& setup, double horizon, std::uint64_t seed);

}  // namespace sos
