#include "sos/resilience.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "sos/errors.hpp"

namespace sos {

std::string_view to_string(Impact impact) {
  switch (impact) {
    case Impact::no_impact: return "no-impact";
    case Impact::recovered: return "recovered";
    case Impact::breakdown: return "non-resilient (breakdown)";
  }
  return "unknown";
}

namespace {

void check_series(std::span<const double> t, std::span<const double> perf) {
  if (t.empty() || t.size() != perf.size()) {
    throw ValidationError("resilience: time and perf series must be non-empty and equal length");
  }
  for (std::size_t k = 1; k < t.size(); ++k) {
    if (!(t[k] > t[k - 1])) throw ValidationError("resilience: times must be strictly increasing");
  }
}

std::size_t first_at_or_after(std::span<const double> t, double when) {
  return static_cast<std::size_t>(std::lower_bound(t.begin(), t.end(), when - 1e-9) - t.begin());
}

}  // namespace

Stages segment_stages(std::span<const double> t, std::span<const double> perf, double nominal,
                      const StageThresholds& th, std::span<const Event> events) {
  check_series(t, perf);
  if (!(nominal > 0.0)) throw ValidationError("segment_stages: nominal level must be > 0");
  if (!(th.eps_rec > 0.0 && th.eps_rec <= th.eps_deg && th.eps_deg < 1.0)) {
    throw ValidationError("segment_stages: require 0 < eps_rec <= eps_deg < 1");
  }
  if (!(th.dwell >= 0.0)) throw ValidationError("segment_stages: dwell must be >= 0");

  Stages s;
  for (const Event& e : events) {
    if (e.kind == EventKind::attack_launched) {
      s.t1 = e.time;
      break;
    }
  }
  const double degraded = (1.0 - th.eps_deg) * nominal;
  const double restored = (1.0 - th.eps_rec) * nominal;
  const std::size_t n = t.size();

  std::size_t k2 = first_at_or_after(t, s.t1.value_or(t.front()));
  while (k2 < n && !(perf[k2] < degraded)) ++k2;
  if (k2 == n) return s;
  s.t2 = t[k2];

  for (const Event& e : events) {
    if (e.kind == EventKind::response_triggered && e.time >= *s.t2) {
      s.t3 = e.time;
      break;
    }
  }

  // next_bad[k]: first index >= k whose sample is below the recovery level.
  std::vector<std::size_t> next_bad(n + 1, n);
  for (std::size_t k = n; k-- > 0;) next_bad[k] = perf[k] < restored ? k : next_bad[k + 1];

  const double t_end = t.back();
  for (std::size_t k = first_at_or_after(t, s.t3.value_or(*s.t2)); k < n; ++k) {
    if (t[k] + th.dwell > t_end + 1e-9) break;
    const std::size_t bad = next_bad[k];
    if (bad == n || t[bad] > t[k] + th.dwell + 1e-9) {
      s.t4 = t[k];
      break;
    }
  }
  s.impact = s.t4 ? Impact::recovered : Impact::breakdown;
  return s;
}

ResilienceReport td_metrics(const Stages& stages, std::span<const double> t,
                            std::span<const double> perf, double nominal, double tail_window,
                            const ResilienceTargets& targets) {
  check_series(t, perf);
  if (!(tail_window >= 0.0) || tail_window > t.back() - t.front() + 1e-9) {
    throw ValidationError("td_metrics: tail window exceeds the series span");
  }
  ResilienceReport r;
  r.stages = stages;
  r.nominal = nominal;
  const std::size_t n = t.size();

  if (stages.t2) {
    r.T = stages.t4 ? *stages.t4 - *stages.t2 : kUnrecovered;
    const std::size_t lo = first_at_or_after(t, *stages.t2);
    const std::size_t hi = stages.t4 ? first_at_or_after(t, *stages.t4) : n - 1;
    for (std::size_t k = lo; k <= hi && k < n; ++k) r.M = std::max(r.M, nominal - perf[k]);
  }

  double tail_sum = 0.0;
  std::size_t tail_n = 0;
  for (std::size_t k = first_at_or_after(t, t.back() - tail_window); k < n; ++k) {
    tail_sum += nominal - perf[k];
    ++tail_n;
  }
  r.D = std::max(0.0, tail_sum / static_cast<double>(tail_n));

  for (std::size_t k = first_at_or_after(t, stages.t1.value_or(t.front())) + 1; k < n; ++k) {
    const double a = std::max(nominal - perf[k - 1], 0.0);
    const double b = std::max(nominal - perf[k], 0.0);
    r.total_loss += 0.5 * (a + b) * (t[k] - t[k - 1]);
  }
  r.verdict = is_td_resilient(r, targets.T_target, targets.D_target);
  return r;
}

bool is_td_resilient(const ResilienceReport& report, double T_target, double D_target) {
  if (!(T_target > 0.0) || !(D_target > 0.0)) {
    throw ValidationError("is_td_resilient: targets must be > 0");
  }
  return report.T <= T_target && report.D <= D_target;
}

ResilienceReport assess(const Trajectory& traj, double nominal, const StageThresholds& thresholds,
                        double tail_window, const ResilienceTargets& targets) {
  const Stages s = segment_stages(traj.t, traj.perf, nominal, thresholds, traj.events);
  return td_metrics(s, traj.t, traj.perf, nominal, tail_window, targets);
}

nlohmann::ordered_json to_json(const ResilienceReport& report) {
  auto time = [](const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  nlohmann::ordered_json j;
  j["t1"] = time(report.stages.t1);
  j["t2"] = time(report.stages.t2);
  j["t3"] = time(report.stages.t3);
  j["t4"] = time(report.stages.t4);
  j["T"] = std::isinf(report.T) ? nlohmann::ordered_json("inf") : nlohmann::ordered_json(report.T);
  j["D"] = report.D;
  j["M"] = report.M;
  j["total_loss"] = report.total_loss;
  j["nominal"] = report.nominal;
  j["verdict"] = report.verdict;
  return j;
}

}  // namespace sos
