#include "sos/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <regex>

#include "sos/errors.hpp"
#include "sos/parallel.hpp"
#include "sos/rng.hpp"

namespace sos {

using nlohmann::ordered_json;

namespace {

ordered_json vec_json(const Vec& v) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v(k));
  return out;
}

ordered_json mat_json(const Mat& m) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vec_json(m.row(r).transpose()));
  return out;
}

// JSON has no infinity; keep it readable instead of silently turning it into null.
ordered_json finite_or_string(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << content;
  if (!out) throw ValidationError("error writing " + path.string());
}

void write_json(const std::filesystem::path& path, const ordered_json& j) {
  write_file(path, j.dump(2) + "\n");
}

std::filesystem::path prepare_out(const CommandOptions& opt) {
  if (opt.out.empty()) throw ValidationError("--out is required");
  std::filesystem::create_directories(opt.out);
  return opt.out;
}

const SubsystemConfig& require_subsystem(const Scenario& sc, const char* verb) {
  if (!sc.subsystem) {
    throw ValidationError(std::string(verb) + " expects a subsystem scenario, got a network");
  }
  return *sc.subsystem;
}

void write_manifest(const std::filesystem::path& dir, const char* command, const Scenario& sc,
                    const CommandOptions& opt, ordered_json extra = ordered_json::object()) {
  ordered_json m;
  m["tool"] = "sosctl";
  m["version"] = kToolVersion;
  m["command"] = command;
  m["scenario"] = opt.scenario.filename().string();
  m["seed"] = opt.seed;
  for (auto& [k, v] : extra.items()) m[k] = v;
  m["defaults_applied"] = sc.defaults_applied;
  m["config"] = resolved_config(sc);
  write_json(dir / "manifest.json", m);
}

std::string residuals_csv(const SoSEquilibrium& eq) {
  std::string out = "iteration,strategy_change,power_change,defender_gap,attacker_gap,power_settled\n";
  for (std::size_t k = 0; k < eq.history.size(); ++k) {
    const Residuals& r = eq.history[k];
    out += std::to_string(k + 1) + "," + format_number(r.strategy_change) + "," +
           format_number(r.power_change) + "," + format_number(r.defender_gap) + "," +
           format_number(r.attacker_gap) + "," + (r.power_settled ? "1" : "0") + "\n";
  }
  return out;
}

std::string join(const Vec& v) {
  std::string out;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (k) out += ";";
    out += format_number(v(k));
  }
  return out;
}

bool no_defense_leverage(const TransitionModel& trans) {
  for (int i = 0; i < trans.options(); ++i) {
    for (int j = 1; j < trans.options(); ++j) {
      if (trans.q(i, j) != trans.q(i, 0)) return false;
    }
  }
  return true;
}

struct Outcome {
  double T, D, M, total_loss;
  bool impacted, recovered, resilient;
};

Outcome outcome(const ResilienceReport& r, double end) {
  Outcome o{};
  o.impacted = r.stages.t2.has_value();
  o.recovered = r.stages.t4.has_value();
  o.T = !o.impacted ? 0.0 : (o.recovered ? r.T : end - *r.stages.t2);
  o.D = r.D;
  o.M = r.M;
  o.total_loss = r.total_loss;
  o.resilient = r.verdict;
  return o;
}

ArmSummary summarize(const std::vector<Outcome>& runs) {
  ArmSummary a;
  for (const Outcome& o : runs) {
    a.T += o.T;
    a.D += o.D;
    a.M += o.M;
    a.total_loss += o.total_loss;
    a.impacted += o.impacted;
    a.recovered += o.impacted && o.recovered;
    a.resilient += o.resilient;
  }
  const double n = static_cast<double>(runs.size());
  a.T /= n;
  a.D /= n;
  a.M /= n;
  a.total_loss /= n;
  a.recovered_fraction = a.impacted ? static_cast<double>(a.recovered) / a.impacted : 1.0;
  return a;
}

ordered_json arm_json(const ArmSummary& a) {
  ordered_json j;
  j["T"] = a.T;
  j["D"] = a.D;
  j["M"] = a.M;
  j["total_loss"] = a.total_loss;
  j["impacted"] = a.impacted;
  j["recovered"] = a.recovered;
  j["recovered_fraction"] = a.recovered_fraction;
  j["resilient"] = a.resilient;
  return j;
}

double nominal_for(const SubsystemConfig& cfg, const SoSEquilibrium& eq) {
  return cfg.resilience.nominal.value_or(eq.nominal);
}

}  // namespace

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trajectory_csv(const Trajectory& traj) {
  if (traj.size() == 0) return "t,theta,perf\n";
  const Eigen::Index nx = traj.x.front().size();
  const Eigen::Index nu = traj.u.front().size();
  const Eigen::Index ny = traj.y.front().size();
  std::string out = "t";
  for (Eigen::Index k = 0; k < nx; ++k) out += ",x" + std::to_string(k);
  out += ",theta";
  for (Eigen::Index k = 0; k < nu; ++k) out += ",u" + std::to_string(k);
  for (Eigen::Index k = 0; k < ny; ++k) out += ",y" + std::to_string(k);
  out += ",perf\n";
  for (std::size_t s = 0; s < traj.size(); ++s) {
    out += format_number(traj.t[s]);
    for (Eigen::Index k = 0; k < nx; ++k) out += "," + format_number(traj.x[s](k));
    out += "," + std::to_string(traj.theta[s]);
    for (Eigen::Index k = 0; k < nu; ++k) out += "," + format_number(traj.u[s](k));
    for (Eigen::Index k = 0; k < ny; ++k) out += "," + format_number(traj.y[s](k));
    out += "," + format_number(traj.perf[s]) + "\n";
  }
  return out;
}

Comparison compare_defense(const SubsystemConfig& cfg, const DiscreteModel& disc,
                           const SoSEquilibrium& eq, std::uint64_t seed, int seeds,
                           Baseline baseline, int jobs) {
  if (seeds < 1) throw ValidationError("compare: seeds must be >= 1");
  const int options = disc.options();
  const Vec uniform = Vec::Constant(options, 1.0 / options);
  Vec unaware_f = Vec::Zero(options);
  unaware_f(0) = 1.0;
  if (baseline == Baseline::uniform) unaware_f = uniform;

  const double nominal = nominal_for(cfg, eq);
  const RunSpec spec = cfg.sim.run_spec();
  std::vector<Outcome> aware(static_cast<std::size_t>(seeds));
  std::vector<Outcome> unaware(static_cast<std::size_t>(seeds));
  parallel_for(static_cast<std::size_t>(seeds), jobs, [&](std::size_t s) {
    const std::uint64_t base = derive_seed(seed, {stream::kCompare, s});
    RandomStream pick(base);
    const int i = sample_mode(eq.profile.g.transpose(), pick);
    const int j_aware = sample_mode(eq.profile.f.transpose(), pick);
    const int j_unaware = sample_mode(unaware_f.transpose(), pick);
    const std::uint64_t sim_seed = derive_seed(base, {stream::kModes});
    const auto run = [&](int j) {
      const Trajectory tr = simulate(disc, eq.controllers, i, j, spec, sim_seed, false);
      const ResilienceReport r = assess(tr, nominal, cfg.resilience.thresholds,
                                        cfg.resilience.tail_window, cfg.resilience.targets);
      return outcome(r, tr.t.back());
    };
    aware[s] = run(j_aware);
    unaware[s] = j_unaware == j_aware ? aware[s] : run(j_unaware);
  });

  Comparison c;
  c.seeds = seeds;
  c.baseline = baseline;
  c.aware = summarize(aware);
  c.unaware = summarize(unaware);
  c.recovers = c.aware.recovered_fraction >= kRecoveryFraction &&
               c.aware.D <= cfg.resilience.targets.D_target;
  c.faster = c.aware.T <= c.unaware.T;
  c.less_loss = c.aware.total_loss <= c.unaware.total_loss;
  if (no_defense_leverage(cfg.transitions)) c.flags.push_back("no-defense-leverage");
  if ((eq.profile.f - unaware_f).cwiseAbs().maxCoeff() <= 1e-12) {
    c.flags.push_back("identical-strategies");
  }
  return c;
}

ordered_json to_json(const Comparison& c) {
  ordered_json j;
  j["seeds"] = c.seeds;
  j["baseline"] = std::string(to_string(c.baseline));
  j["aware"] = arm_json(c.aware);
  j["unaware"] = arm_json(c.unaware);
  j["claims"] = {{"recovery_to_pre_attack_level", c.recovers},
                 {"faster_recovery", c.faster},
                 {"lower_total_loss", c.less_loss}};
  j["flags"] = c.flags;
  return j;
}

ordered_json to_json(const SoSEquilibrium& eq) {
  ordered_json j;
  j["converged"] = eq.converged;
  j["iterations"] = eq.iterations;
  j["g"] = vec_json(eq.profile.g);
  j["f"] = vec_json(eq.profile.f);
  j["game_value"] = eq.game_value;
  j["P"] = mat_json(eq.P);
  j["P_std_error"] = mat_json(eq.P_std_error);
  ordered_json gains = ordered_json::array();
  for (const Mat& k : eq.controllers.K) gains.push_back(mat_json(k));
  j["K"] = std::move(gains);
  j["nominal"] = eq.nominal;
  j["tolerances"] = {{"tol_s", eq.tol_s}, {"tol_g", eq.tol_g}, {"tol_p", eq.tol_p}};
  const Residuals& r = eq.residuals;
  j["residuals"] = {{"strategy_change", finite_or_string(r.strategy_change)},
                    {"power_change", finite_or_string(r.power_change)},
                    {"defender_gap", r.defender_gap},
                    {"attacker_gap", r.attacker_gap},
                    {"power_settled", r.power_settled}};
  return j;
}

std::vector<double> parse_grid(const std::string& grid) {
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty() || !std::isfinite(v)) {
      throw ValidationError("--grid: '" + grid + "' is not a:b:step");
    }
    return v;
  };
  const auto c1 = grid.find(':');
  if (c1 == std::string::npos) return {number(grid)};
  const auto c2 = grid.find(':', c1 + 1);
  if (c2 == std::string::npos) throw ValidationError("--grid: '" + grid + "' is not a:b:step");
  const double a = number(grid.substr(0, c1));
  const double b = number(grid.substr(c1 + 1, c2 - c1 - 1));
  const double step = number(grid.substr(c2 + 1));
  if (!(step > 0.0)) throw ValidationError("--grid: step must be > 0");
  if (b < a) throw ValidationError("--grid: grid must be ascending (a <= b)");
  std::vector<double> out;
  const double slack = 1e-9 * step;
  for (long k = 0;; ++k) {
    const double v = a + static_cast<double>(k) * step;
    if (v > b + slack) break;
    out.push_back(v);
    if (out.size() > 100000) throw ValidationError("--grid: more than 100000 points");
  }
  return out;
}

double mean_downstream_breaches(const NetworkSetup& setup, std::uint64_t seed, int seeds,
                                int jobs) {
  std::vector<bool> downstream(static_cast<std::size_t>(setup.spec.size()), false);
  for (const Edge& e : setup.spec.edges) downstream[e.target] = true;
  std::vector<double> counts(static_cast<std::size_t>(seeds));
  parallel_for(counts.size(), jobs, [&](std::size_t s) {
    const NetworkRun run =
        run_network(setup, setup.spec.horizon, derive_seed(seed, {stream::kNetwork, s}));
    double c = 0.0;
    for (std::size_t k = 0; k < downstream.size(); ++k) {
      if (downstream[k]) c += static_cast<double>(run.breaches[k]);
    }
    counts[s] = c;
  });
  double total = 0.0;
  for (double c : counts) total += c;
  return total / seeds;
}

std::vector<SweepRow> run_sweep(const Scenario& sc, const std::string& param,
                                const std::vector<double>& grid, std::uint64_t seed, int jobs) {
  if (grid.empty()) throw ValidationError("sweep: empty grid");
  std::vector<SweepRow> rows(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    rows[k].param = param;
    rows[k].value = grid[k];
  }

  if (sc.network) {
    if (param != "kappa") {
      throw ValidationError("sweep: network scenarios support only --param kappa");
    }
    const NetworkSetup base = setup_network(*sc.network, seed, jobs);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      SweepRow& row = rows[k];
      try {
        if (!(grid[k] >= 0.0)) throw ValidationError("kappa must be >= 0");
        NetworkSetup setup = base;
        for (Edge& e : setup.spec.edges) e.kappa = grid[k];
        const int seeds = setup.spec.seeds;
        std::vector<ResilienceReport> reports(static_cast<std::size_t>(seeds));
        parallel_for(reports.size(), jobs, [&](std::size_t s) {
          reports[s] = run_network(setup, setup.spec.horizon,
                                   derive_seed(seed, {stream::kNetwork, s})).system_report;
        });
        for (const ResilienceReport& r : reports) {
          const double end = setup.spec.horizon;
          const Outcome o = outcome(r, end);
          row.T += o.T / seeds;
          row.D += o.D / seeds;
          row.M += o.M / seeds;
          row.total_loss += o.total_loss / seeds;
        }
        row.g = setup.attacker;
        row.breaches = mean_downstream_breaches(setup, seed, seeds, jobs);
      } catch (const std::exception& e) {
        row.status = std::string("error: ") + e.what();
      }
    }
    return rows;
  }

  const SubsystemConfig& base = *sc.subsystem;
  static const std::regex cost(R"((C_a|C_d)\[(\d+)\])");
  std::smatch m;
  const bool is_cost = std::regex_match(param, m, cost);
  if (param != "alpha" && !is_cost) {
    throw ValidationError("sweep: --param must be alpha, C_a[i] or C_d[j] for subsystem scenarios");
  }
  const int index = is_cost ? std::stoi(m[2].str()) : 0;
  if (is_cost && (index < 1 || index >= base.transitions.options())) {
    throw ValidationError("sweep: " + param + " index out of range");
  }
  const bool attack_cost = is_cost && m[1].str() == "C_a";

  // Grid points run in parallel; each co_learn is sequential inside.
  parallel_for(grid.size(), jobs, [&](std::size_t k) {
    SweepRow& row = rows[k];
    try {
      SubsystemConfig cfg = base;
      if (!is_cost) {
        if (!(grid[k] > 0.0)) throw ValidationError("alpha must be > 0");
        cfg.game.alpha = grid[k];
      } else {
        if (!(grid[k] >= 0.0)) throw ValidationError("costs must be >= 0");
        (attack_cost ? cfg.game.attack_cost : cfg.game.defense_cost)(index) = grid[k];
      }
      const DiscreteModel disc = discretize(cfg.model, cfg.transitions, cfg.sim.dt);
      const SoSEquilibrium eq = co_learn(cfg, seed, 1);
      const Comparison c =
          compare_defense(cfg, disc, eq, seed, cfg.compare.seeds, cfg.compare.baseline, 1);
      row.T = c.aware.T;
      row.D = c.aware.D;
      row.M = c.aware.M;
      row.total_loss = c.aware.total_loss;
      row.g = eq.profile.g;
      row.f = eq.profile.f;
      row.game_value = eq.game_value;
      if (!eq.converged) row.status = "not-converged";
    } catch (const std::exception& e) {
      row.status = std::string("error: ") + e.what();
    }
  });
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "param,value,T,D,M,total_loss,g_star,f_star,game_value,breaches,status\n";
  for (const SweepRow& r : rows) {
    std::string status = r.status;
    for (char& ch : status) {
      if (ch == ',' || ch == '\n' || ch == '"') ch = ' ';
    }
    out += r.param + "," + format_number(r.value) + "," + format_number(r.T) + "," +
           format_number(r.D) + "," + format_number(r.M) + "," + format_number(r.total_loss) +
           "," + join(r.g) + "," + join(r.f) + "," + format_number(r.game_value) + "," +
           format_number(r.breaches) + "," + status + "\n";
  }
  return out;
}

int cmd_run(const Scenario& sc, const CommandOptions& opt) {
  const SubsystemConfig& cfg = require_subsystem(sc, "run");
  const DiscreteModel disc = discretize(cfg.model, cfg.transitions, cfg.sim.dt);
  const int options = disc.options();
  if (opt.attack < 0 || opt.attack >= options) {
    throw ValidationError("--attack must lie in [0, " + std::to_string(options - 1) + "]");
  }
  if (opt.defense < 0 || opt.defense >= options) {
    throw ValidationError("--defense must lie in [0, " + std::to_string(options - 1) + "]");
  }
  const auto dir = prepare_out(opt);

  // Controllers tuned for the pure pair being run.
  StrategyProfile pure{Vec::Zero(options), Vec::Zero(options)};
  pure.g(opt.attack) = 1.0;
  pure.f(opt.defense) = 1.0;
  const Controller k = synthesize_controllers(disc, cfg.controller, pure);
  const double nominal = cfg.resilience.nominal.value_or(nominal_perf(disc, k));
  Trajectory tr;
  try {
    tr = simulate(disc, k, opt.attack, opt.defense, cfg.sim.run_spec(), opt.seed);
  } catch (const NumericError& e) {
    throw NumericError("run (attack " + std::to_string(opt.attack) + ", defense " +
                       std::to_string(opt.defense) + "): " + e.what());
  }
  const ResilienceReport r = assess(tr, nominal, cfg.resilience.thresholds,
                                    cfg.resilience.tail_window, cfg.resilience.targets);

  ordered_json report;
  report["attack"] = opt.attack;
  report["defense"] = opt.defense;
  report["impact"] = std::string(to_string(r.stages.impact));
  report["resilience"] = to_json(r);
  report["breaches"] = tr.count(EventKind::breach);
  ordered_json events = ordered_json::array();
  for (const Event& e : tr.events) {
    events.push_back({{"t", e.time}, {"kind", std::string(to_string(e.kind))}});
  }
  report["events"] = std::move(events);

  write_file(dir / "trajectory.csv", trajectory_csv(tr));
  write_json(dir / "report.json", report);
  write_manifest(dir, "run", sc, opt, {{"attack", opt.attack}, {"defense", opt.defense}});
  return 0;
}

int cmd_colearn(const Scenario& sc, const CommandOptions& opt) {
  const SubsystemConfig& cfg = require_subsystem(sc, "colearn");
  const auto dir = prepare_out(opt);
  const SoSEquilibrium eq = co_learn(cfg, opt.seed, opt.jobs);
  write_json(dir / "equilibrium.json", to_json(eq));
  write_file(dir / "residuals.csv", residuals_csv(eq));
  write_manifest(dir, "colearn", sc, opt);
  return eq.converged ? 0 : kExitNotConverged;
}

int cmd_compare(const Scenario& sc, const CommandOptions& opt) {
  const SubsystemConfig& cfg = require_subsystem(sc, "compare");
  const auto dir = prepare_out(opt);
  const DiscreteModel disc = discretize(cfg.model, cfg.transitions, cfg.sim.dt);
  const SoSEquilibrium eq = co_learn(cfg, opt.seed, opt.jobs);
  const Baseline baseline = opt.baseline.value_or(cfg.compare.baseline);
  const Comparison c =
      compare_defense(cfg, disc, eq, opt.seed, cfg.compare.seeds, baseline, opt.jobs);
  ordered_json j = to_json(c);
  j["converged"] = eq.converged;
  write_json(dir / "equilibrium.json", to_json(eq));
  write_json(dir / "comparison.json", j);
  write_manifest(dir, "compare", sc, opt, {{"baseline", std::string(to_string(baseline))}});
  return eq.converged ? 0 : kExitNotConverged;
}

int cmd_sweep(const Scenario& sc, const CommandOptions& opt) {
  if (opt.param.empty()) throw ValidationError("sweep requires --param");
  if (opt.grid.empty()) throw ValidationError("sweep requires --grid");
  const std::vector<double> grid = parse_grid(opt.grid);
  const auto dir = prepare_out(opt);
  const std::vector<SweepRow> rows = run_sweep(sc, opt.param, grid, opt.seed, opt.jobs);
  write_file(dir / "sweep.csv", sweep_csv(rows));
  write_manifest(dir, "sweep", sc, opt, {{"param", opt.param}, {"grid", opt.grid}});
  return 0;
}

int cmd_network(const Scenario& sc, const CommandOptions& opt) {
  if (!sc.network) throw ValidationError("network expects a network scenario");
  const NetworkSpec& spec = *sc.network;
  const auto dir = prepare_out(opt);
  const NetworkSetup setup = setup_network(spec, opt.seed, opt.jobs);
  const NetworkRun run = run_network(setup, spec.horizon, opt.seed);

  bool converged = true;
  ordered_json subs = ordered_json::array();
  for (int s = 0; s < spec.size(); ++s) {
    const SubsystemSetup& sub = setup.subsystems[s];
    converged &= sub.eq.converged;
    write_file(dir / (spec.names[s] + ".csv"), trajectory_csv(run.trajectories[s]));
    ordered_json j;
    j["name"] = spec.names[s];
    j["converged"] = sub.eq.converged;
    j["attack"] = run.attacks[s];
    j["defense"] = run.defenses[s];
    j["g"] = vec_json(sub.eq.profile.g);
    j["f"] = vec_json(sub.eq.profile.f);
    j["belief"] = vec_json(sub.belief);
    j["defense_strategy"] = vec_json(sub.defense);
    j["belief_gap"] = sub.belief_gap;
    j["breaches"] = run.breaches[s];
    j["resilience"] = to_json(run.reports[s]);
    subs.push_back(std::move(j));
  }

  std::string csv = "t";
  for (const auto& name : spec.names) csv += "," + name;
  csv += ",system\n";
  const auto& t = run.trajectories[0].t;
  for (std::size_t k = 0; k < t.size(); ++k) {
    csv += format_number(t[k]);
    for (const Trajectory& tr : run.trajectories) csv += "," + format_number(tr.perf[k]);
    csv += "," + format_number(run.system_perf[k]) + "\n";
  }
  write_file(dir / "system.csv", csv);

  ordered_json report;
  report["sharing"] = std::string(to_string(spec.sharing));
  report["attacker"] = vec_json(setup.attacker);
  report["belief_gap"] = setup.belief_gap;
  report["subsystems"] = std::move(subs);
  report["system"] = to_json(run.system_report);
  write_json(dir / "report.json", report);
  write_manifest(dir, "network", sc, opt);
  return converged ? 0 : kExitNotConverged;
}

}  // namespace sos
