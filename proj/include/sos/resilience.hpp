#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>

#include "json.hpp"
#include "sos/mjls.hpp"

namespace sos {

/// Threshold knobs for stage segmentation.
/// Degradation: perf < (1 - eps_deg) nominal. Recovery: perf >= (1 - eps_rec)
/// nominal held for `dwell` seconds.
struct StageThresholds {
  double eps_deg = 0.1;
  double eps_rec = 0.05;
  double dwell = 10.0;
};

enum class Impact { no_impact, recovered, breakdown };
std::string_view to_string(Impact impact);

/// t1 attack launched, t2 degradation onset, t3 response triggered,
/// t4 sustained recovery. Any may be absent.
struct Stages {
  std::optional<double> t1, t2, t3, t4;
  Impact impact = Impact::no_impact;
};

Stages segment_stages(std::span<const double> t, std::span<const double> perf, double nominal,
                      const StageThresholds& thresholds, std::span<const Event> events);

inline constexpr double kUnrecovered = std::numeric_limits<double>::infinity();

struct ResilienceReport {
  Stages stages;
  double T = 0.0;           // t4 - t2; kUnrecovered when t4 is absent
  double D = 0.0;           // tail-mean loss after recovery
  double M = 0.0;           // max loss over [t2, t4]
  double total_loss = 0.0;  // integral of the positive loss from t1
  double nominal = 0.0;
  bool verdict = false;
};

struct ResilienceTargets {
  double T_target = 60.0;
  double D_target = 0.05;
};

ResilienceReport td_metrics(const Stages& stages, std::span<const double> t,
                            std::span<const double> perf, double nominal, double tail_window,
                            const ResilienceTargets& targets);

/// Closed inequalities: T <= T_target and D <= D_target.
bool is_td_resilient(const ResilienceReport& report, double T_target, double D_target);

/// Segments and measures a simulated trajectory in one go.
ResilienceReport assess(const Trajectory& traj, double nominal, const StageThresholds& thresholds,
                        double tail_window, const ResilienceTargets& targets);

/// Keys t1,t2,t3,t4,T,D,M,total_loss,nominal,verdict in that order; absent
/// times are null and an unrecovered T is the string "inf".
nlohmann::ordered_json to_json(const ResilienceReport& report);

}  // namespace sos
