#include "sos/game.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "sos/errors.hpp"
#include "sos/rng.hpp"

namespace sos {

namespace {

Vec uniform(int n) { return Vec::Constant(n, 1.0 / n); }

void require_simplex(const Vec& p, int n, const char* who) {
  if (p.size() != n || !on_simplex(p)) {
    throw ValidationError(std::string(who) + ": strategy is not on the " + std::to_string(n) +
                          "-option simplex");
  }
}

int argmax_lowest(const Vec& v) {
  int best = 0;
  for (Eigen::Index k = 1; k < v.size(); ++k) {
    if (v(k) > v(best)) best = static_cast<int>(k);
  }
  return best;
}

int argmin_lowest(const Vec& v) {
  int best = 0;
  for (Eigen::Index k = 1; k < v.size(); ++k) {
    if (v(k) < v(best)) best = static_cast<int>(k);
  }
  return best;
}

Vec positive_part_strategy(const Vec& regret) {
  Vec pos = regret.cwiseMax(0.0);
  const double total = pos.sum();
  if (total <= 0.0) return uniform(static_cast<int>(regret.size()));
  return pos / total;
}

int sample_index(const Vec& p, RandomStream& rng) {
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

void finish(const SecurityGame& game, EquilibriumResult& r) {
  const Exploitability e = exploitability(game, r.profile);
  r.defender_gap = e.defender_gap;
  r.attacker_gap = e.attacker_gap;
  r.game_value = r.profile.g.dot(zero_sum_equivalent(game) * r.profile.f);
}

}  // namespace

SecurityGame build_game(double alpha, const Mat& power, const Vec& defense_cost,
                        const Vec& attack_cost) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw ValidationError("build_game: alpha must be a finite positive number");
  }
  const Eigen::Index k = power.rows();
  if (k < 1 || power.cols() != k || defense_cost.size() != k || attack_cost.size() != k) {
    throw ValidationError("build_game: P must be (n+1)x(n+1) with cost vectors of length n+1");
  }
  if (!power.allFinite() || !defense_cost.allFinite() || !attack_cost.allFinite()) {
    throw ValidationError("build_game: non-finite input");
  }
  if (defense_cost(0) != 0.0 || attack_cost(0) != 0.0) {
    throw ValidationError("build_game: the no-action options must be free (C_d[0] = C_a[0] = 0)");
  }
  if (power.minCoeff() < 0.0) throw ValidationError("build_game: P must be nonnegative");

  SecurityGame game;
  game.n = static_cast<int>(k) - 1;
  game.alpha = alpha;
  game.P = power;
  game.defense_cost = defense_cost;
  game.attack_cost = attack_cost;
  game.U.resize(k, k);
  game.C.resize(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      game.U(i, j) = alpha * power(i, j) - defense_cost(j);
      game.C(i, j) = alpha * power(i, j) + attack_cost(i);
    }
  }
  return game;
}

Mat zero_sum_equivalent(const SecurityGame& game) {
  const Eigen::Index k = game.options();
  Mat m(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      m(i, j) = game.alpha * game.P(i, j) - game.defense_cost(j) + game.attack_cost(i);
    }
  }
  return m;
}

bool on_simplex(const Vec& p, double tol) {
  if (p.size() == 0 || !p.allFinite()) return false;
  return p.minCoeff() >= -tol && std::abs(p.sum() - 1.0) <= tol;
}

int best_response_defender(const SecurityGame& game, const Vec& g) {
  require_simplex(g, game.options(), "best_response_defender");
  return argmax_lowest(game.U.transpose() * g);
}

int best_response_attacker(const SecurityGame& game, const Vec& f) {
  require_simplex(f, game.options(), "best_response_attacker");
  return argmin_lowest(game.C * f);
}

std::vector<int> argmax_columns(const Mat& payoff, const Vec& g, double tol) {
  const Vec v = payoff.transpose() * g;
  const double best = v.maxCoeff();
  std::vector<int> out;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (v(k) >= best - tol) out.push_back(static_cast<int>(k));
  }
  return out;
}

std::vector<int> argmin_rows(const Mat& cost, const Vec& f, double tol) {
  const Vec v = cost * f;
  const double best = v.minCoeff();
  std::vector<int> out;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (v(k) <= best + tol) out.push_back(static_cast<int>(k));
  }
  return out;
}

Exploitability exploitability(const SecurityGame& game, const StrategyProfile& profile) {
  const Vec& g = profile.g;
  const Vec& f = profile.f;
  const Vec def_payoffs = game.U.transpose() * g;
  const Vec att_costs = game.C * f;
  Exploitability e;
  e.defender_gap = std::max(0.0, def_payoffs.maxCoeff() - def_payoffs.dot(f));
  e.attacker_gap = std::max(0.0, g.dot(att_costs) - att_costs.minCoeff());
  return e;
}

double default_tolerance(const SecurityGame& game) { return 1e-3 * game.payoff_range(); }

EquilibriumResult fictitious_play(const SecurityGame& game, long max_iters, double tol) {
  if (max_iters < 1) throw ValidationError("fictitious_play: max_iters must be >= 1");
  const int k = game.options();
  Vec counts_g = Vec::Zero(k);
  Vec counts_f = Vec::Zero(k);
  // Running sums of the opponent-weighted payoffs; their argmax/argmin is the
  // best response to the empirical average.
  Vec def_payoff = game.U.transpose() * uniform(k);
  Vec att_cost = game.C * uniform(k);

  EquilibriumResult r;
  for (long t = 1; t <= max_iters; ++t) {
    const int i = argmin_lowest(att_cost);
    const int j = argmax_lowest(def_payoff);
    if (t == 1) {
      def_payoff.setZero();
      att_cost.setZero();
    }
    counts_g(i) += 1.0;
    counts_f(j) += 1.0;
    def_payoff += game.U.row(i).transpose();
    att_cost += game.C.col(j);

    r.profile = {counts_g / static_cast<double>(t), counts_f / static_cast<double>(t)};
    r.iterations = t;
    const Exploitability e = exploitability(game, r.profile);
    const bool done = e.defender_gap < tol && e.attacker_gap < tol;
    if (t % kCheckpointInterval == 0 || done || t == max_iters) r.trace.push_back(e.max());
    if (done) break;
  }
  finish(game, r);
  return r;
}

EquilibriumResult regret_matching(const SecurityGame& game, long max_iters, double tol,
                                  std::uint64_t seed) {
  if (max_iters < 1) throw ValidationError("regret_matching: max_iters must be >= 1");
  const int k = game.options();
  RandomStream rng(derive_seed(seed, {stream::kSolver}));
  Vec regret_def = Vec::Zero(k);
  Vec regret_att = Vec::Zero(k);
  Vec sum_f = Vec::Zero(k);
  Vec sum_g = Vec::Zero(k);

  EquilibriumResult r;
  for (long t = 1; t <= max_iters; ++t) {
    const Vec sigma_g = positive_part_strategy(regret_att);
    const Vec sigma_f = positive_part_strategy(regret_def);
    const int i = sample_index(sigma_g, rng);
    const int j = sample_index(sigma_f, rng);
    for (int jj = 0; jj < k; ++jj) regret_def(jj) += game.U(i, jj) - game.U(i, j);
    for (int ii = 0; ii < k; ++ii) regret_att(ii) += game.C(i, j) - game.C(ii, j);
    sum_g += sigma_g;
    sum_f += sigma_f;

    r.profile = {sum_g / static_cast<double>(t), sum_f / static_cast<double>(t)};
    r.iterations = t;
    const Exploitability e = exploitability(game, r.profile);
    const bool done = e.defender_gap < tol && e.attacker_gap < tol;
    if (t % kCheckpointInterval == 0 || done || t == max_iters) {
      r.trace.push_back(e.max());
      const double avg_regret =
          std::max(regret_def.maxCoeff(), regret_att.maxCoeff()) / static_cast<double>(t);
      r.regret_trace.push_back(std::max(0.0, avg_regret));
    }
    if (done) break;
  }
  finish(game, r);
  return r;
}

namespace {

std::vector<int> members(unsigned mask, int k) {
  std::vector<int> out;
  for (int b = 0; b < k; ++b) {
    if (mask & (1u << b)) out.push_back(b);
  }
  return out;
}

// Solves  sub * x = v 1,  1^T x = 1  for (x, v). Returns false when the
// system is inconsistent or x leaves the nonnegative orthant.
bool indifference(const Mat& sub, double scale, Vec& x, double& v) {
  const Eigen::Index rows = sub.rows();
  const Eigen::Index cols = sub.cols();
  Mat a = Mat::Zero(rows + 1, cols + 1);
  a.topLeftCorner(rows, cols) = sub;
  a.topRightCorner(rows, 1).setConstant(-1.0);
  a.bottomLeftCorner(1, cols).setOnes();
  Vec b = Vec::Zero(rows + 1);
  b(rows) = 1.0;
  const Vec sol = a.completeOrthogonalDecomposition().solve(b);
  if (!sol.allFinite() || (a * sol - b).cwiseAbs().maxCoeff() > 1e-10 * scale) return false;
  x = sol.head(cols);
  v = sol(cols);
  if (x.minCoeff() < -1e-12) return false;
  x = x.cwiseMax(0.0);
  x /= x.sum();
  return true;
}

}  // namespace

EquilibriumResult solve_exact(const SecurityGame& game) {
  const int k = game.options();
  if (k > kExactMaxOptions) {
    throw ValidationError("solve_exact: " + std::to_string(k) + " options exceeds " +
                          std::to_string(kExactMaxOptions) + "; use learning solvers");
  }
  const Mat m = zero_sum_equivalent(game);
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double tol = 1e-10 * scale;

  // Square supports first (every extreme saddle point has one), then the rest.
  std::vector<std::pair<unsigned, unsigned>> pairs;
  const unsigned full = (1u << k) - 1u;
  for (int size = 1; size <= k; ++size) {
    for (unsigned rs = 1; rs <= full; ++rs) {
      if (std::popcount(rs) != size) continue;
      for (unsigned cs = 1; cs <= full; ++cs) {
        if (std::popcount(cs) == size) pairs.emplace_back(rs, cs);
      }
    }
  }
  for (unsigned rs = 1; rs <= full; ++rs) {
    for (unsigned cs = 1; cs <= full; ++cs) {
      if (std::popcount(rs) != std::popcount(cs)) pairs.emplace_back(rs, cs);
    }
  }

  for (const auto& [rs, cs] : pairs) {
    const std::vector<int> rows = members(rs, k);
    const std::vector<int> cols = members(cs, k);
    Mat sub(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t a = 0; a < rows.size(); ++a) {
      for (std::size_t b = 0; b < cols.size(); ++b) sub(a, b) = m(rows[a], cols[b]);
    }
    Vec f_sub, g_sub;
    double v = 0.0, w = 0.0;
    if (!indifference(sub, scale, f_sub, v)) continue;
    if (!indifference(sub.transpose(), scale, g_sub, w)) continue;
    Vec f = Vec::Zero(k), g = Vec::Zero(k);
    for (std::size_t b = 0; b < cols.size(); ++b) f(cols[b]) = f_sub(b);
    for (std::size_t a = 0; a < rows.size(); ++a) g(rows[a]) = g_sub(a);
    const double value = g.dot(m * f);
    if ((m * f).minCoeff() < value - tol) continue;
    if ((m.transpose() * g).maxCoeff() > value + tol) continue;

    EquilibriumResult r;
    r.profile = {g, f};
    r.iterations = 1;
    finish(game, r);
    r.trace.push_back(std::max(r.defender_gap, r.attacker_gap));
    return r;
  }
  throw NumericError("solve_exact: support enumeration found no saddle point");
}

}  // namespace sos
