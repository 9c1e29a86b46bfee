#include "sos/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "sos/errors.hpp"
#include "sos/parallel.hpp"
#include "sos/rng.hpp"

namespace sos {

std::string_view to_string(SharingMode mode) {
  return mode == SharingMode::isolated ? "isolated" : "shared-beliefs";
}

std::vector<Violation> validate_network(const NetworkSpec& spec) {
  std::vector<Violation> out;
  const int n = spec.size();
  if (n == 0) out.push_back({"network.subsystems", "at least one subsystem is required"});
  if (spec.names.size() != spec.subsystems.size()) {
    out.push_back({"network.names", "must name every subsystem"});
  }
  if (spec.weights.size() != n) {
    out.push_back({"network.weights", "must have one weight per subsystem"});
  } else if (n > 0) {
    if (spec.weights.minCoeff() < 0.0) out.push_back({"network.weights", "must be >= 0"});
    if (std::abs(spec.weights.sum() - 1.0) > 1e-9) {
      out.push_back({"network.weights", "must sum to 1"});
    }
  }
  for (std::size_t e = 0; e < spec.edges.size(); ++e) {
    const Edge& edge = spec.edges[e];
    const std::string name = "network.edges[" + std::to_string(e) + "]";
    if (edge.source < 0 || edge.source >= n || edge.target < 0 || edge.target >= n) {
      out.push_back({name, "references an unknown subsystem"});
    } else if (edge.source == edge.target) {
      out.push_back({name, "is a self-loop"});
    }
    if (!(edge.kappa >= 0.0) || !std::isfinite(edge.kappa)) {
      out.push_back({name, "kappa must be finite and >= 0"});
    }
  }
  auto check_actions = [&](const std::vector<int>& v, const char* field) {
    if (v.empty()) return;
    if (static_cast<int>(v.size()) != n) {
      out.push_back({field, "must have one entry per subsystem"});
      return;
    }
    for (int s = 0; s < n; ++s) {
      if (v[s] < kSampleAction || v[s] > spec.subsystems[s].transitions.attacks) {
        out.push_back({field, "entry " + std::to_string(s) + " is out of range"});
      }
    }
  };
  check_actions(spec.attack, "network.attack");
  check_actions(spec.defense, "network.defense");
  if (spec.warmup < 0) out.push_back({"network.warmup", "must be >= 0"});
  if (spec.seeds < 1) out.push_back({"network.seeds", "must be >= 1"});
  for (int s = 1; s < n; ++s) {
    if (spec.subsystems[s].sim.dt != spec.subsystems[0].sim.dt) {
      out.push_back({"network.subsystems", "all subsystems must share one dt"});
      break;
    }
  }
  return out;
}

std::vector<double> cascade_factors(const std::vector<Edge>& edges, std::span<const double> perf,
                                    std::span<const double> nominal,
                                    std::span<const double> eps_deg) {
  std::vector<double> factor(perf.size(), 1.0);
  for (const Edge& e : edges) {
    const auto s = static_cast<std::size_t>(e.source);
    if (perf[s] < (1.0 - eps_deg[s]) * nominal[s]) {
      factor[static_cast<std::size_t>(e.target)] *= 1.0 + e.kappa;
    }
  }
  return factor;
}

Mat amplify_breach_rates(const Mat& generator, double factor) {
  Mat q = generator;
  double out_rate = 0.0;
  for (Eigen::Index c = 1; c < q.cols(); ++c) {
    q(0, c) *= factor;
    out_rate += q(0, c);
  }
  q(0, 0) = -out_rate;
  return q;
}

namespace {

int draw(const Vec& p, RandomStream& rng) {
  const double u = rng.uniform();
  double cumulative = 0.0;
  int last = 0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    if (p(k) <= 0.0) continue;
    last = static_cast<int>(k);
    cumulative += p(k);
    if (u < cumulative) return last;
  }
  return last;
}

Vec one_hot(int k, int size) {
  Vec v = Vec::Zero(size);
  v(k) = 1.0;
  return v;
}

}  // namespace

NetworkSetup setup_network(const NetworkSpec& spec, std::uint64_t seed, int jobs) {
  if (auto v = validate_network(spec); !v.empty()) {
    std::string msg = "invalid network:";
    for (const auto& e : v) msg += " " + e.field + " " + e.message + ";";
    throw ValidationError(msg);
  }
  const int n = spec.size();
  NetworkSetup setup;
  setup.spec = spec;
  setup.subsystems.resize(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), jobs, [&](std::size_t s) {
    const SubsystemConfig& cfg = spec.subsystems[s];
    SubsystemSetup& sub = setup.subsystems[s];
    try {
      sub.disc = discretize(cfg.model, cfg.transitions, cfg.sim.dt);
      sub.eq = co_learn(cfg, cfg.sim.seed, 1);
    } catch (const ValidationError& e) {
      throw ValidationError("subsystem '" + spec.names[s] + "': " + e.what());
    } catch (const std::exception& e) {
      throw NumericError("subsystem '" + spec.names[s] + "': " + e.what());
    }
    sub.game = build_game(cfg.game.alpha, sub.eq.P, cfg.game.defense_cost, cfg.game.attack_cost);
    sub.nominal = sub.eq.nominal;
  });

  const int options = spec.subsystems[0].transitions.options();
  bool common_options = true;
  for (const auto& cfg : spec.subsystems) common_options &= cfg.transitions.options() == options;

  // The attacker is common to all subsystems when their option sets agree.
  setup.attacker = Vec::Zero(options);
  if (common_options) {
    for (int s = 0; s < n; ++s) setup.attacker += spec.weights(s) * setup.subsystems[s].eq.profile.g;
    setup.attacker /= setup.attacker.sum();
  }

  std::vector<Vec> counts(static_cast<std::size_t>(n));
  Vec pooled = Vec::Zero(options);
  for (int s = 0; s < n; ++s) {
    const Vec& truth = common_options ? setup.attacker : setup.subsystems[s].eq.profile.g;
    counts[s] = Vec::Zero(truth.size());
    RandomStream rng(derive_seed(seed, {stream::kWarmup, static_cast<std::uint64_t>(s)}));
    for (int w = 0; w < spec.warmup; ++w) counts[s](draw(truth, rng)) += 1.0;
    if (common_options) pooled += counts[s];
  }

  setup.belief_gap = 0.0;
  for (int s = 0; s < n; ++s) {
    SubsystemSetup& sub = setup.subsystems[s];
    const Vec& truth = common_options ? setup.attacker : sub.eq.profile.g;
    if (spec.warmup == 0) {
      sub.belief = sub.eq.profile.g;
      sub.defense = sub.eq.profile.f;
    } else {
      const bool shared = spec.sharing == SharingMode::shared_beliefs && common_options;
      sub.belief = shared ? Vec(pooled / pooled.sum()) : Vec(counts[s] / counts[s].sum());
      sub.defense = one_hot(best_response_defender(sub.game, sub.belief), sub.game.options());
    }
    sub.belief_gap = exploitability(sub.game, {truth, sub.defense}).defender_gap;
    setup.belief_gap += spec.weights(s) * sub.belief_gap;
  }
  return setup;
}

std::uint64_t subsystem_seed(std::uint64_t seed, int s) {
  return derive_seed(seed, {stream::kNetwork, static_cast<std::uint64_t>(s)});
}

NetworkRun run_network(const NetworkSetup& setup, double horizon, std::uint64_t seed) {
  const NetworkSpec& spec = setup.spec;
  const int n = spec.size();
  NetworkRun run;

  std::vector<MjlsStepper> steppers;
  steppers.reserve(static_cast<std::size_t>(n));
  std::vector<double> nominal(static_cast<std::size_t>(n));
  std::vector<double> eps_deg(static_cast<std::size_t>(n));
  for (int s = 0; s < n; ++s) {
    const SubsystemSetup& sub = setup.subsystems[s];
    const SubsystemConfig& cfg = spec.subsystems[s];
    RandomStream pick(derive_seed(subsystem_seed(seed, s), {stream::kCompare}));
    const Vec& attacker = setup.attacker.size() == sub.game.options() ? setup.attacker
                                                                      : sub.eq.profile.g;
    const int i_draw = draw(attacker, pick);
    const int j_draw = draw(sub.defense, pick);
    const int i = spec.attack.empty() || spec.attack[s] == kSampleAction ? i_draw : spec.attack[s];
    const int j =
        spec.defense.empty() || spec.defense[s] == kSampleAction ? j_draw : spec.defense[s];
    run.attacks.push_back(i);
    run.defenses.push_back(j);
    RunSpec rs = cfg.sim.run_spec();
    rs.horizon = horizon;
    steppers.emplace_back(sub.disc, sub.eq.controllers, i, j, rs, subsystem_seed(seed, s));
    nominal[s] = sub.nominal;
    eps_deg[s] = cfg.resilience.thresholds.eps_deg;
  }
  for (int s = 1; s < n; ++s) {
    if (steppers[s].steps() != steppers[0].steps()) {
      throw ValidationError("run_network: subsystems disagree on the number of steps");
    }
  }

  std::map<std::tuple<int, bool, double>, Mat> amplified;
  std::vector<double> perf(static_cast<std::size_t>(n));
  while (!steppers[0].finished()) {
    for (int s = 0; s < n; ++s) perf[s] = steppers[s].perf();
    const std::vector<double> factor = cascade_factors(spec.edges, perf, nominal, eps_deg);
    for (int s = 0; s < n; ++s) {
      MjlsStepper& st = steppers[s];
      if (factor[s] == 1.0) {
        st.advance();
        continue;
      }
      const auto key = std::make_tuple(s, st.attack_active(), factor[s]);
      auto it = amplified.find(key);
      if (it == amplified.end()) {
        const Mat q = amplify_breach_rates(st.scheduled_generator(), factor[s]);
        const double dt = setup.subsystems[s].disc.dt;
        it = amplified.emplace(key, expm(q * dt).cwiseMax(0.0).cwiseMin(1.0)).first;
      }
      st.advance(it->second);
    }
  }

  for (int s = 0; s < n; ++s) {
    run.trajectories.push_back(std::move(steppers[s]).finish());
    const SubsystemConfig& cfg = spec.subsystems[s];
    const Trajectory& tr = run.trajectories.back();
    run.reports.push_back(assess(tr, nominal[s], cfg.resilience.thresholds,
                                 cfg.resilience.tail_window, cfg.resilience.targets));
    run.breaches.push_back(tr.count(EventKind::breach));
  }

  const Trajectory& first = run.trajectories[0];
  run.system_perf.assign(first.size(), 0.0);
  double system_nominal = 0.0;
  for (int s = 0; s < n; ++s) {
    const double w = spec.weights(s);
    system_nominal += w * nominal[s];
    const auto& p = run.trajectories[s].perf;
    for (std::size_t k = 0; k < p.size(); ++k) run.system_perf[k] += w * p[k];
    run.system_events.insert(run.system_events.end(), run.trajectories[s].events.begin(),
                             run.trajectories[s].events.end());
  }
  std::stable_sort(run.system_events.begin(), run.system_events.end(),
                   [](const Event& a, const Event& b) { return a.time < b.time; });
  const Stages stages = segment_stages(first.t, run.system_perf, system_nominal,
                                       spec.resilience.thresholds, run.system_events);
  run.system_report = td_metrics(stages, first.t, run.system_perf, system_nominal,
                                 spec.resilience.tail_window, spec.resilience.targets);
  return run;
}

}  // namespace sos
