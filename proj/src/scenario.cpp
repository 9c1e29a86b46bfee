#include "sos/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "sos/errors.hpp"

namespace sos {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct Entry {
  json value;
  int line = 0;
};

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "version",
      "model.modes", "model.A", "model.B", "model.E", "model.C", "model.drift",
      "model.y_offset", "model.noise_std", "model.perf_index",
      "transition.attack_mode", "transition.breach_rate", "transition.recovery_rate",
      "transition.escalation", "transition.recovery_weight",
      "game.attacks", "game.alpha", "game.defense_cost", "game.attack_cost", "game.solver",
      "game.max_iters",
      "controller.Q", "controller.R",
      "sim.dt", "sim.horizon", "sim.burn_in", "sim.attack_time", "sim.reps", "sim.seed",
      "sim.x0", "sim.theta0",
      "resilience.eps_deg", "resilience.eps_rec", "resilience.dwell", "resilience.tail_window",
      "resilience.T_target", "resilience.D_target", "resilience.nominal",
      "colearn.max_outer", "colearn.damping", "colearn.tol_s", "colearn.tol_g_rel",
      "colearn.tol_p_rel", "colearn.sustain",
      "compare.seeds", "compare.baseline",
      "network.subsystems", "network.names", "network.edges", "network.weights",
      "network.sharing", "network.attack", "network.defense", "network.warmup",
      "network.seeds", "network.horizon",
  };
  return keys;
}

const std::regex& explicit_generator_key() {
  static const std::regex re(R"(transition\.Q\.(\d+)\.(\d+))");
  return re;
}

bool all_finite(const json& v) {
  if (v.is_number()) return std::isfinite(v.get<double>());
  if (v.is_array()) {
    for (const auto& e : v) {
      if (!all_finite(e)) return false;
    }
  }
  return true;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Drops a trailing comment and reports the bracket depth change.
std::string strip_comment(std::string_view line, int& depth) {
  std::string out;
  bool in_string = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (in_string) {
      out += c;
      if (c == '\\' && k + 1 < line.size()) {
        out += line[++k];
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '#') break;
    if (c == '"') in_string = true;
    if (c == '[') ++depth;
    if (c == ']') --depth;
    out += c;
  }
  return out;
}

class KeyTable {
 public:
  explicit KeyTable(std::string source) : source_(std::move(source)) {}

  void add(const std::string& key, json value, int line) {
    if (entries_.count(key)) {
      fail_at(line, "duplicate key '" + key + "' (first set on line " +
                        std::to_string(entries_.at(key).line) + ")");
    }
    entries_.emplace(key, Entry{std::move(value), line});
  }

  [[noreturn]] void fail_at(int line, const std::string& msg) const {
    throw ValidationError(source_ + ":" + std::to_string(line) + ": " + msg);
  }
  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    if (auto it = entries_.find(key); it != entries_.end()) fail_at(it->second.line, key + ": " + msg);
    throw ValidationError(source_ + ": " + key + ": " + msg);
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  bool has_prefix(std::string_view prefix) const {
    for (const auto& [k, e] : entries_) {
      if (k.rfind(prefix, 0) == 0) return true;
    }
    return false;
  }
  const std::map<std::string, Entry>& entries() const { return entries_; }
  std::vector<std::string>& defaults() { return defaults_; }
  const std::string& source() const { return source_; }

  const json* get(const std::string& key, bool required) {
    auto it = entries_.find(key);
    if (it == entries_.end()) {
      if (required) throw ValidationError(source_ + ": missing required key '" + key + "'");
      defaults_.push_back(key);
      return nullptr;
    }
    return &it->second.value;
  }

  double number(const std::string& key, std::optional<double> def) {
    const json* v = get(key, !def);
    if (!v) return *def;
    if (!v->is_number()) fail(key, "expected a number");
    return v->get<double>();
  }

  long integer(const std::string& key, std::optional<long> def) {
    const json* v = get(key, !def);
    if (!v) return *def;
    if (!v->is_number_integer()) fail(key, "expected an integer");
    return v->get<long>();
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t def) {
    const json* v = get(key, false);
    if (!v) return def;
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long>() >= 0)) {
      fail(key, "expected a nonnegative integer");
    }
    return v->get<std::uint64_t>();
  }

  std::string string(const std::string& key, std::optional<std::string> def) {
    const json* v = get(key, !def);
    if (!v) return *def;
    if (!v->is_string()) fail(key, "expected a string");
    return v->get<std::string>();
  }

  std::vector<std::string> strings(const std::string& key) {
    const json* v = get(key, true);
    if (!v->is_array()) fail(key, "expected an array of strings");
    std::vector<std::string> out;
    for (const auto& e : *v) {
      if (!e.is_string()) fail(key, "expected an array of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  Vec to_vec(const std::string& key, const json& v) const {
    if (!v.is_array()) fail(key, "expected an array of numbers");
    Vec out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (!v[k].is_number()) fail(key, "expected an array of numbers");
      out(static_cast<Eigen::Index>(k)) = v[k].get<double>();
    }
    return out;
  }

  Mat to_mat(const std::string& key, const json& v) const {
    if (!v.is_array() || v.empty()) fail(key, "expected a non-empty nested array (matrix)");
    const std::size_t cols = v[0].is_array() ? v[0].size() : 0;
    Mat out(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < v.size(); ++r) {
      if (!v[r].is_array() || v[r].size() != cols) fail(key, "matrix rows must have equal length");
      for (std::size_t c = 0; c < cols; ++c) {
        if (!v[r][c].is_number()) fail(key, "expected numeric matrix entries");
        out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v[r][c].get<double>();
      }
    }
    return out;
  }

  Vec vec(const std::string& key, std::optional<Vec> def, std::optional<Eigen::Index> len = {}) {
    const json* v = get(key, !def);
    if (!v) return *def;
    Vec out = to_vec(key, *v);
    if (len && out.size() != *len) {
      fail(key, "expected length " + std::to_string(*len) + ", got " + std::to_string(out.size()));
    }
    return out;
  }

  Mat mat(const std::string& key, std::optional<Mat> def) {
    const json* v = get(key, !def);
    if (!v) return *def;
    return to_mat(key, *v);
  }

  std::vector<Mat> mats(const std::string& key, std::size_t modes) {
    const json* v = get(key, true);
    if (!v->is_array()) fail(key, "expected one matrix per mode");
    if (v->size() != modes) {
      fail(key, "has " + std::to_string(v->size()) + " modes, expected " + std::to_string(modes));
    }
    std::vector<Mat> out;
    for (const auto& m : *v) out.push_back(to_mat(key, m));
    return out;
  }

  std::vector<Vec> rows(const std::string& key, std::size_t modes, Eigen::Index width) {
    const json* v = get(key, false);
    if (!v) return std::vector<Vec>(modes, Vec::Zero(width));
    if (!v->is_array() || v->size() != modes) {
      fail(key, "expected one vector per mode (" + std::to_string(modes) + ")");
    }
    std::vector<Vec> out;
    for (const auto& r : *v) out.push_back(to_vec(key, r));
    return out;
  }

 private:
  std::string source_;
  std::map<std::string, Entry> entries_;
  std::vector<std::string> defaults_;
};

KeyTable lex(std::string_view text, const std::string& source) {
  KeyTable table(source);
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  std::string key, value;
  int key_line = 0;
  int depth = 0;

  auto flush = [&] {
    json v;
    try {
      v = json::parse(value);
    } catch (const json::out_of_range&) {
      table.fail_at(key_line, "non-finite number in '" + key + "'");
    } catch (const json::exception&) {
      table.fail_at(key_line, "cannot parse value of '" + key + "'");
    }
    if (!all_finite(v)) table.fail_at(key_line, "non-finite number in '" + key + "'");
    const bool known = known_keys().count(key) > 0 ||
                       std::regex_match(key, explicit_generator_key());
    if (!known) table.fail_at(key_line, "unknown key '" + key + "'");
    table.add(key, std::move(v), key_line);
    key.clear();
    value.clear();
  };

  while (std::getline(in, raw)) {
    ++line_no;
    int delta = 0;
    const std::string line = trim(strip_comment(raw, delta));
    if (!key.empty()) {
      value += " " + line;
      depth += delta;
      if (depth <= 0) flush();
      continue;
    }
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) table.fail_at(line_no, "expected 'key = value'");
    key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) table.fail_at(line_no, "missing key before '='");
    int dummy = 0;
    value = trim(strip_comment(std::string_view(line).substr(eq + 1), dummy));
    key_line = line_no;
    depth = delta;
    if (value.empty() && depth == 0) table.fail_at(line_no, "missing value for '" + key + "'");
    if (depth <= 0) flush();
  }
  if (!key.empty()) table.fail_at(key_line, "unterminated array in '" + key + "'");
  return table;
}

std::string field_key(const std::string& field, bool explicit_q) {
  static const std::regex q(R"(Q\[(\d+)\]\[(\d+)\])");
  std::smatch m;
  if (std::regex_match(field, m, q)) {
    return explicit_q ? "transition.Q." + m[1].str() + "." + m[2].str() : "transition";
  }
  const std::string base = field.substr(0, field.find('['));
  return "model." + base;
}

Baseline parse_baseline(KeyTable& t, const std::string& key) {
  const std::string b = t.string(key, "none");
  if (b == "none") return Baseline::none;
  if (b == "uniform") return Baseline::uniform;
  t.fail(key, "expected \"none\" or \"uniform\"");
}

ResilienceConfig parse_resilience(KeyTable& t, double horizon) {
  ResilienceConfig r;
  r.thresholds.eps_deg = t.number("resilience.eps_deg", 0.1);
  r.thresholds.eps_rec = t.number("resilience.eps_rec", 0.05);
  r.thresholds.dwell = t.number("resilience.dwell", 10.0);
  r.tail_window = t.number("resilience.tail_window", 30.0);
  r.targets.T_target = t.number("resilience.T_target", 60.0);
  r.targets.D_target = t.number("resilience.D_target", 0.05);
  if (t.has("resilience.nominal")) {
    r.nominal = t.number("resilience.nominal", std::nullopt);
    if (!(*r.nominal > 0.0)) t.fail("resilience.nominal", "must be > 0");
  }
  const auto& th = r.thresholds;
  if (!(th.eps_rec > 0.0 && th.eps_rec <= th.eps_deg && th.eps_deg < 1.0)) {
    t.fail("resilience.eps_deg", "require 0 < eps_rec <= eps_deg < 1");
  }
  if (!(th.dwell >= 0.0)) t.fail("resilience.dwell", "must be >= 0");
  if (!(r.tail_window >= 0.0 && r.tail_window <= horizon)) {
    t.fail("resilience.tail_window", "must lie in [0, horizon]");
  }
  if (!(r.targets.T_target > 0.0)) t.fail("resilience.T_target", "must be > 0");
  if (!(r.targets.D_target > 0.0)) t.fail("resilience.D_target", "must be > 0");
  return r;
}

SubsystemConfig parse_subsystem(KeyTable& t) {
  SubsystemConfig cfg;
  MjlsModel& model = cfg.model;
  model.mode_labels = t.strings("model.modes");
  const std::size_t modes = model.mode_labels.size();
  if (modes == 0) t.fail("model.modes", "at least one mode is required");
  model.A = t.mats("model.A", modes);
  model.B = t.mats("model.B", modes);
  model.E = t.mats("model.E", modes);
  model.C = t.mats("model.C", modes);
  const Eigen::Index nx = model.A[0].rows();
  const Eigen::Index nu = model.B[0].cols();
  const Eigen::Index nw = model.E[0].cols();
  const Eigen::Index ny = model.C[0].rows();
  model.drift = t.rows("model.drift", modes, nx);
  model.y_offset = t.rows("model.y_offset", modes, ny);
  model.noise_std = t.vec("model.noise_std", Vec::Zero(nw));
  model.perf_index = static_cast<int>(t.integer("model.perf_index", 0));

  const long n = t.integer("game.attacks", std::nullopt);
  if (n < 0 || n > 64) t.fail("game.attacks", "must be in [0, 64]");
  const int options = static_cast<int>(n) + 1;

  const bool explicit_q = t.has_prefix("transition.Q.");
  if (explicit_q) {
    for (const char* k : {"transition.attack_mode", "transition.breach_rate",
                          "transition.recovery_rate", "transition.escalation",
                          "transition.recovery_weight"}) {
      if (t.has(k)) t.fail(k, "cannot be combined with explicit transition.Q.<i>.<j> generators");
    }
    for (const auto& [key, entry] : t.entries()) {
      std::smatch m;
      if (std::regex_match(key, m, explicit_generator_key()) &&
          (std::stol(m[1].str()) >= options || std::stol(m[2].str()) >= options)) {
        t.fail(key, "index out of range for " + std::to_string(n) + " attacks");
      }
    }
    cfg.transitions.attacks = static_cast<int>(n);
    for (int i = 0; i < options; ++i) {
      for (int j = 0; j < options; ++j) {
        cfg.transitions.generators.push_back(t.mat(
            "transition.Q." + std::to_string(i) + "." + std::to_string(j), std::nullopt));
      }
    }
  } else {
    TransitionParams p;
    const bool need = n > 0;
    const Vec modes_v = t.vec("transition.attack_mode", need ? std::nullopt : std::optional<Vec>(Vec()), n);
    for (Eigen::Index k = 0; k < modes_v.size(); ++k) {
      const double m = modes_v(k);
      if (m != std::floor(m) || m < 1 || m >= static_cast<double>(modes)) {
        t.fail("transition.attack_mode", "entries must be non-nominal mode indices");
      }
      p.attack_mode.push_back(static_cast<int>(m));
    }
    p.breach_rate = t.vec("transition.breach_rate", need ? std::nullopt : std::optional<Vec>(Vec()), n);
    p.recovery_rate = t.vec("transition.recovery_rate", Vec::Zero(options), options);
    p.escalation = t.mat("transition.escalation",
                         Mat::Zero(static_cast<Eigen::Index>(modes), static_cast<Eigen::Index>(modes)));
    p.recovery_weight = t.vec("transition.recovery_weight",
                              Vec::Ones(static_cast<Eigen::Index>(modes)),
                              static_cast<Eigen::Index>(modes));
    if (p.breach_rate.size() > 0 && p.breach_rate.minCoeff() < 0.0) {
      t.fail("transition.breach_rate", "rates must be >= 0");
    }
    if (p.recovery_rate.minCoeff() < 0.0) t.fail("transition.recovery_rate", "rates must be >= 0");
    if (p.recovery_weight.minCoeff() < 0.0) t.fail("transition.recovery_weight", "must be >= 0");
    if (p.escalation.rows() != static_cast<Eigen::Index>(modes) ||
        p.escalation.cols() != static_cast<Eigen::Index>(modes)) {
      t.fail("transition.escalation", "must be " + std::to_string(modes) + "x" + std::to_string(modes));
    }
    for (Eigen::Index r = 0; r < p.escalation.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.escalation.cols(); ++c) {
        if (r != c && p.escalation(r, c) < 0.0) t.fail("transition.escalation", "rates must be >= 0");
        if (r != c && (r == 0 || c == 0) && p.escalation(r, c) != 0.0) {
          t.fail("transition.escalation", "only rates among non-nominal modes are allowed");
        }
      }
    }
    cfg.transitions = build_transitions(p, static_cast<int>(modes));
  }

  if (auto v = validate_model(model, cfg.transitions); !v.empty()) {
    std::string msg;
    for (const auto& e : v) {
      if (!msg.empty()) msg += "; ";
      msg += e.field + " " + e.message;
    }
    t.fail(field_key(v.front().field, explicit_q), msg);
  }

  GameConfig& g = cfg.game;
  g.alpha = t.number("game.alpha", 1.0);
  if (!(g.alpha > 0.0)) t.fail("game.alpha", "must be > 0");
  g.defense_cost = t.vec("game.defense_cost", Vec::Zero(options), options);
  g.attack_cost = t.vec("game.attack_cost", Vec::Zero(options), options);
  if (g.defense_cost(0) != 0.0) t.fail("game.defense_cost", "the no-defense option must cost 0");
  if (g.attack_cost(0) != 0.0) t.fail("game.attack_cost", "the no-attack option must cost 0");
  const std::string solver = t.string("game.solver", "auto");
  if (solver == "auto") g.solver = SolverKind::automatic;
  else if (solver == "exact") g.solver = SolverKind::exact;
  else if (solver == "fictitious_play") g.solver = SolverKind::fictitious_play;
  else if (solver == "regret_matching") g.solver = SolverKind::regret_matching;
  else t.fail("game.solver", "expected auto, exact, fictitious_play or regret_matching");
  if (g.solver == SolverKind::exact && options > kExactMaxOptions) {
    t.fail("game.solver", "exact solver supports at most " + std::to_string(kExactMaxOptions) + " options");
  }
  g.max_iters = t.integer("game.max_iters", 100000);
  if (g.max_iters < 1) t.fail("game.max_iters", "must be >= 1");

  cfg.controller.Q = t.mat("controller.Q", Mat::Identity(nx, nx));
  cfg.controller.R = t.mat("controller.R", Mat::Identity(nu, nu));
  if (cfg.controller.Q.rows() != nx || cfg.controller.Q.cols() != nx) {
    t.fail("controller.Q", "must be n_x x n_x");
  }
  if (cfg.controller.R.rows() != nu || cfg.controller.R.cols() != nu) {
    t.fail("controller.R", "must be n_u x n_u");
  }

  SimConfig& s = cfg.sim;
  s.dt = t.number("sim.dt", 0.1);
  s.horizon = t.number("sim.horizon", 200.0);
  s.burn_in = t.number("sim.burn_in", 20.0);
  s.attack_time = t.number("sim.attack_time", 20.0);
  s.reps = static_cast<int>(t.integer("sim.reps", 50));
  s.seed = t.unsigned_integer("sim.seed", 42);
  s.x0 = t.vec("sim.x0", Vec::Zero(nx), nx);
  s.theta0 = static_cast<int>(t.integer("sim.theta0", 0));
  if (!(s.dt > 0.0)) t.fail("sim.dt", "must be > 0");
  if (!(s.horizon >= s.dt)) t.fail("sim.horizon", "must be >= dt");
  if (!(s.burn_in >= 0.0 && s.burn_in < s.horizon)) t.fail("sim.burn_in", "must lie in [0, horizon)");
  if (!(s.attack_time >= 0.0)) t.fail("sim.attack_time", "must be >= 0");
  if (s.reps < 1) t.fail("sim.reps", "must be >= 1");
  if (s.theta0 < 0 || s.theta0 >= static_cast<int>(modes)) t.fail("sim.theta0", "mode out of range");
  try {
    (void)discretize(model, cfg.transitions, s.dt);
  } catch (const ValidationError& e) {
    t.fail("sim.dt", e.what());
  }

  cfg.resilience = parse_resilience(t, s.horizon);

  ColearnConfig& c = cfg.colearn;
  c.max_outer = static_cast<int>(t.integer("colearn.max_outer", 200));
  c.damping = t.number("colearn.damping", 0.5);
  c.tol_s = t.number("colearn.tol_s", 1e-3);
  c.tol_g_rel = t.number("colearn.tol_g_rel", 1e-3);
  c.tol_p_rel = t.number("colearn.tol_p_rel", 1e-2);
  c.sustain = static_cast<int>(t.integer("colearn.sustain", 5));
  if (c.max_outer < 1) t.fail("colearn.max_outer", "must be >= 1");
  if (!(c.damping > 0.0 && c.damping <= 1.0)) t.fail("colearn.damping", "must lie in (0, 1]");
  if (!(c.tol_s > 0.0)) t.fail("colearn.tol_s", "must be > 0");
  if (!(c.tol_g_rel >= 0.0)) t.fail("colearn.tol_g_rel", "must be >= 0");
  if (!(c.tol_p_rel >= 0.0)) t.fail("colearn.tol_p_rel", "must be >= 0");
  if (c.sustain < 1) t.fail("colearn.sustain", "must be >= 1");

  cfg.compare.seeds = static_cast<int>(t.integer("compare.seeds", 100));
  if (cfg.compare.seeds < 1) t.fail("compare.seeds", "must be >= 1");
  cfg.compare.baseline = parse_baseline(t, "compare.baseline");
  return cfg;
}

NetworkSpec parse_network(KeyTable& t, const std::filesystem::path& base_dir,
                          std::vector<std::string>& defaults) {
  for (const auto& [key, entry] : t.entries()) {
    if (key != "version" && key.rfind("network.", 0) != 0 && key.rfind("resilience.", 0) != 0) {
      t.fail(key, "network files may only contain version, network.* and resilience.* keys");
    }
  }
  NetworkSpec spec;
  const std::vector<std::string> files = t.strings("network.subsystems");
  if (files.empty()) t.fail("network.subsystems", "at least one subsystem is required");
  for (const auto& f : files) {
    const std::filesystem::path p = base_dir / f;
    Scenario sub;
    try {
      sub = parse_scenario(p);
    } catch (const ValidationError& e) {
      t.fail("network.subsystems", e.what());
    }
    if (!sub.subsystem) t.fail("network.subsystems", "'" + f + "' is not a subsystem scenario");
    spec.subsystems.push_back(*sub.subsystem);
    spec.names.push_back(std::to_string(spec.names.size()));
    for (const auto& d : sub.defaults_applied) defaults.push_back(f + ":" + d);
  }
  const int n = static_cast<int>(files.size());
  if (t.has("network.names")) {
    spec.names = t.strings("network.names");
    if (static_cast<int>(spec.names.size()) != n) t.fail("network.names", "must name every subsystem");
    std::set<std::string> unique(spec.names.begin(), spec.names.end());
    if (static_cast<int>(unique.size()) != n) t.fail("network.names", "names must be unique");
    for (const auto& name : spec.names) {
      if (name.empty() || name == "system" || name == "report" || name == "manifest" ||
          name.find_first_of("/\\") != std::string::npos) {
        t.fail("network.names", "'" + name + "' is not a valid subsystem name");
      }
    }
  } else {
    t.defaults().push_back("network.names");
    for (int s = 0; s < n; ++s) spec.names[s] = "s" + std::to_string(s);
  }

  auto index_of = [&](const json& v) -> int {
    if (v.is_number_integer()) {
      const long k = v.get<long>();
      if (k < 0 || k >= n) t.fail("network.edges", "subsystem index out of range");
      return static_cast<int>(k);
    }
    if (v.is_string()) {
      for (int s = 0; s < n; ++s) {
        if (spec.names[s] == v.get<std::string>()) return s;
      }
      t.fail("network.edges", "unknown subsystem '" + v.get<std::string>() + "'");
    }
    t.fail("network.edges", "edge endpoints must be names or indices");
  };
  if (const json* edges = t.get("network.edges", false)) {
    if (!edges->is_array()) t.fail("network.edges", "expected [[source, target, kappa], ...]");
    for (const auto& e : *edges) {
      if (!e.is_array() || e.size() != 3 || !e[2].is_number()) {
        t.fail("network.edges", "expected [[source, target, kappa], ...]");
      }
      spec.edges.push_back({index_of(e[0]), index_of(e[1]), e[2].get<double>()});
    }
  }
  spec.weights = t.vec("network.weights", Vec::Constant(n, 1.0 / n), n);
  const std::string sharing = t.string("network.sharing", "isolated");
  if (sharing == "isolated") spec.sharing = SharingMode::isolated;
  else if (sharing == "shared-beliefs") spec.sharing = SharingMode::shared_beliefs;
  else t.fail("network.sharing", "expected \"isolated\" or \"shared-beliefs\"");
  auto actions = [&](const std::string& key) {
    std::vector<int> out;
    const Vec v = t.vec(key, Vec(), std::nullopt);
    if (v.size() != 0 && v.size() != n) t.fail(key, "must have one entry per subsystem");
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      if (v(k) != std::floor(v(k))) t.fail(key, "entries must be integers");
      out.push_back(static_cast<int>(v(k)));
    }
    return out;
  };
  spec.attack = actions("network.attack");
  spec.defense = actions("network.defense");
  spec.warmup = static_cast<int>(t.integer("network.warmup", 20));
  spec.seeds = static_cast<int>(t.integer("network.seeds", 100));
  spec.horizon = t.number("network.horizon", spec.subsystems[0].sim.horizon);
  if (!(spec.horizon >= spec.subsystems[0].sim.dt)) t.fail("network.horizon", "must be >= dt");
  spec.resilience = parse_resilience(t, spec.horizon);

  if (auto v = validate_network(spec); !v.empty()) {
    std::string msg;
    for (const auto& e : v) {
      if (!msg.empty()) msg += "; ";
      msg += e.field + " " + e.message;
    }
    t.fail(v.front().field.substr(0, v.front().field.find('[')), msg);
  }
  return spec;
}

ordered_json mat_json(const Mat& m) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

ordered_json vec_json(const Vec& v) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v(k));
  return out;
}

ordered_json resilience_json(const ResilienceConfig& r) {
  ordered_json j;
  j["eps_deg"] = r.thresholds.eps_deg;
  j["eps_rec"] = r.thresholds.eps_rec;
  j["dwell"] = r.thresholds.dwell;
  j["tail_window"] = r.tail_window;
  j["T_target"] = r.targets.T_target;
  j["D_target"] = r.targets.D_target;
  j["nominal"] = r.nominal ? ordered_json(*r.nominal) : ordered_json(nullptr);
  return j;
}

}  // namespace

TransitionModel build_transitions(const TransitionParams& p, int modes) {
  const int n = static_cast<int>(p.attack_mode.size());
  TransitionModel trans;
  trans.attacks = n;
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) {
      Mat q = Mat::Zero(modes, modes);
      if (i > 0 && j != i) q(0, p.attack_mode[i - 1]) += p.breach_rate(i - 1);
      for (int m = 1; m < modes; ++m) {
        for (int m2 = 1; m2 < modes; ++m2) {
          if (m2 != m) q(m, m2) += p.escalation(m, m2);
        }
        q(m, 0) += p.recovery_rate(j) * p.recovery_weight(m);
      }
      for (int m = 0; m < modes; ++m) {
        double out = 0.0;
        for (int m2 = 0; m2 < modes; ++m2) {
          if (m2 != m) out += q(m, m2);
        }
        q(m, m) = -out;
      }
      trans.generators.push_back(std::move(q));
    }
  }
  return trans;
}

Scenario parse_scenario_text(std::string_view text, const std::string& source_name,
                             const std::filesystem::path& base_dir) {
  KeyTable table = lex(text, source_name);
  Scenario sc;
  sc.source = source_name;
  sc.version = static_cast<int>(table.integer("version", std::nullopt));
  if (sc.version != kScenarioVersion) {
    table.fail("version", "unsupported version " + std::to_string(sc.version) + " (expected " +
                              std::to_string(kScenarioVersion) + ")");
  }
  std::vector<std::string> nested_defaults;
  if (table.has_prefix("network.")) {
    sc.network = parse_network(table, base_dir, nested_defaults);
  } else {
    sc.subsystem = parse_subsystem(table);
  }
  sc.defaults_applied = table.defaults();
  std::sort(sc.defaults_applied.begin(), sc.defaults_applied.end());
  sc.defaults_applied.insert(sc.defaults_applied.end(), nested_defaults.begin(),
                             nested_defaults.end());
  return sc;
}

Scenario parse_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path.string() + ": cannot open scenario file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str(), path.string(), path.parent_path());
}

ordered_json to_json(const SubsystemConfig& cfg) {
  ordered_json j;
  const MjlsModel& m = cfg.model;
  ordered_json model;
  model["modes"] = m.mode_labels;
  for (const auto& [name, mats] : {std::pair{"A", &m.A}, std::pair{"B", &m.B},
                                   std::pair{"E", &m.E}, std::pair{"C", &m.C}}) {
    ordered_json arr = ordered_json::array();
    for (const Mat& x : *mats) arr.push_back(mat_json(x));
    model[name] = std::move(arr);
  }
  ordered_json drift = ordered_json::array(), yoff = ordered_json::array();
  for (const Vec& v : m.drift) drift.push_back(vec_json(v));
  for (const Vec& v : m.y_offset) yoff.push_back(vec_json(v));
  model["drift"] = std::move(drift);
  model["y_offset"] = std::move(yoff);
  model["noise_std"] = vec_json(m.noise_std);
  model["perf_index"] = m.perf_index;
  j["model"] = std::move(model);

  ordered_json trans = ordered_json::array();
  for (int i = 0; i < cfg.transitions.options(); ++i) {
    ordered_json row = ordered_json::array();
    for (int jj = 0; jj < cfg.transitions.options(); ++jj) row.push_back(mat_json(cfg.transitions.q(i, jj)));
    trans.push_back(std::move(row));
  }
  j["transition"] = {{"generators", std::move(trans)}};

  ordered_json game;
  game["attacks"] = cfg.transitions.attacks;
  game["alpha"] = cfg.game.alpha;
  game["defense_cost"] = vec_json(cfg.game.defense_cost);
  game["attack_cost"] = vec_json(cfg.game.attack_cost);
  game["solver"] = std::string(to_string(cfg.game.solver));
  game["max_iters"] = cfg.game.max_iters;
  j["game"] = std::move(game);

  j["controller"] = {{"Q", mat_json(cfg.controller.Q)}, {"R", mat_json(cfg.controller.R)}};

  ordered_json sim;
  sim["dt"] = cfg.sim.dt;
  sim["horizon"] = cfg.sim.horizon;
  sim["burn_in"] = cfg.sim.burn_in;
  sim["attack_time"] = cfg.sim.attack_time;
  sim["reps"] = cfg.sim.reps;
  sim["seed"] = cfg.sim.seed;
  sim["x0"] = vec_json(cfg.sim.x0);
  sim["theta0"] = cfg.sim.theta0;
  j["sim"] = std::move(sim);

  j["resilience"] = resilience_json(cfg.resilience);

  ordered_json co;
  co["max_outer"] = cfg.colearn.max_outer;
  co["damping"] = cfg.colearn.damping;
  co["tol_s"] = cfg.colearn.tol_s;
  co["tol_g_rel"] = cfg.colearn.tol_g_rel;
  co["tol_p_rel"] = cfg.colearn.tol_p_rel;
  co["sustain"] = cfg.colearn.sustain;
  j["colearn"] = std::move(co);

  j["compare"] = {{"seeds", cfg.compare.seeds},
                  {"baseline", std::string(to_string(cfg.compare.baseline))}};
  return j;
}

ordered_json to_json(const NetworkSpec& spec) {
  ordered_json j;
  ordered_json subs = ordered_json::array();
  for (int s = 0; s < spec.size(); ++s) {
    subs.push_back({{"name", spec.names[s]}, {"config", to_json(spec.subsystems[s])}});
  }
  j["subsystems"] = std::move(subs);
  ordered_json edges = ordered_json::array();
  for (const Edge& e : spec.edges) edges.push_back({spec.names[e.source], spec.names[e.target], e.kappa});
  j["edges"] = std::move(edges);
  j["weights"] = vec_json(spec.weights);
  j["sharing"] = std::string(to_string(spec.sharing));
  j["attack"] = spec.attack;
  j["defense"] = spec.defense;
  j["warmup"] = spec.warmup;
  j["seeds"] = spec.seeds;
  j["horizon"] = spec.horizon;
  j["resilience"] = resilience_json(spec.resilience);
  return j;
}

ordered_json resolved_config(const Scenario& sc) {
  ordered_json j;
  j["version"] = sc.version;
  if (sc.subsystem) j["subsystem"] = to_json(*sc.subsystem);
  if (sc.network) j["network"] = to_json(*sc.network);
  return j;
}

}  // namespace sos
