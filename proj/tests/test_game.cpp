#include <gtest/gtest.h>

#include <random>

#include "sos/errors.hpp"
#include "sos/game.hpp"

namespace {

using namespace sos;

SecurityGame example_game() {
  Mat p(2, 2);
  p << 5, 3,
       2, 4;
  return build_game(2.0, p, Vec::Unit(2, 1), Vec::Unit(2, 1));
}

SecurityGame zero_cost(const Mat& p, double alpha = 1.0) {
  return build_game(alpha, p, Vec::Zero(p.rows()), Vec::Zero(p.rows()));
}

SecurityGame random_game(std::mt19937_64& gen, int k, bool costs) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Mat p = Mat::NullaryExpr(k, k, [&] { return u(gen); });
  Vec cd = Vec::Zero(k), ca = Vec::Zero(k);
  if (costs) {
    for (int x = 1; x < k; ++x) {
      cd(x) = 0.3 * u(gen);
      ca(x) = 0.3 * u(gen);
    }
  }
  return build_game(1.0 + u(gen), p, cd, ca);
}

Vec random_simplex(std::mt19937_64& gen, int k) {
  std::exponential_distribution<double> e(1.0);
  Vec v = Vec::NullaryExpr(k, [&] { return e(gen); });
  return v / v.sum();
}

// max_f min_i (M f)_i over a simplex grid of resolution 1/steps (3 options).
double grid_value_defender(const Mat& m, int steps) {
  double best = -1e300;
  for (int a = 0; a <= steps; ++a) {
    for (int b = 0; a + b <= steps; ++b) {
      Vec f(3);
      f << a, b, steps - a - b;
      f /= steps;
      best = std::max(best, (m * f).minCoeff());
    }
  }
  return best;
}

double grid_value_attacker(const Mat& m, int steps) {
  double best = 1e300;
  for (int a = 0; a <= steps; ++a) {
    for (int b = 0; a + b <= steps; ++b) {
      Vec g(3);
      g << a, b, steps - a - b;
      g /= steps;
      best = std::min(best, (g.transpose() * m).maxCoeff());
    }
  }
  return best;
}

TEST(BuildGame, AllOnes) {
  const SecurityGame g = zero_cost(Mat::Ones(3, 3));
  EXPECT_EQ(g.U, Mat::Ones(3, 3));
  EXPECT_EQ(g.C, Mat::Ones(3, 3));
}

TEST(BuildGame, UtilityAndCostArithmetic) {
  const SecurityGame g = example_game();
  Mat u(2, 2), c(2, 2);
  u << 10, 5,
       4, 7;
  c << 10, 6,
       5, 9;
  EXPECT_EQ(g.U, u);
  EXPECT_EQ(g.C, c);
}

TEST(BuildGame, RejectsBadInputs) {
  EXPECT_THROW(build_game(0.0, Mat::Ones(2, 2), Vec::Zero(2), Vec::Zero(2)), ValidationError);
  EXPECT_THROW(build_game(1.0, Mat::Ones(2, 2), Vec::Ones(2), Vec::Zero(2)), ValidationError);
  EXPECT_THROW(build_game(1.0, Mat::Ones(2, 2), Vec::Zero(2), Vec::Ones(2)), ValidationError);
  EXPECT_THROW(build_game(1.0, Mat::Ones(2, 3), Vec::Zero(2), Vec::Zero(2)), ValidationError);
  EXPECT_THROW(build_game(1.0, -Mat::Ones(2, 2), Vec::Zero(2), Vec::Zero(2)), ValidationError);
}

TEST(ZeroSum, Arithmetic) {
  Mat m(2, 2);
  m << 10, 5,
       5, 8;
  EXPECT_EQ(zero_sum_equivalent(example_game()), m);
  Mat p(2, 2);
  p << 1, 2, 3, 4;
  EXPECT_EQ(zero_sum_equivalent(zero_cost(p, 3.0)), 3.0 * p);
}

TEST(ZeroSum, BestResponseSetsAgree) {
  std::mt19937_64 gen(17);
  int mismatches = 0;
  for (int n = 0; n < 1000; ++n) {
    const SecurityGame g = random_game(gen, 4, true);
    const Mat m = zero_sum_equivalent(g);
    for (int s = 0; s < 50; ++s) {
      const Vec opp = random_simplex(gen, 4);
      mismatches += argmax_columns(g.U, opp, 1e-12) != argmax_columns(m, opp, 1e-12);
      mismatches += argmin_rows(g.C, opp, 1e-12) != argmin_rows(m, opp, 1e-12);
    }
  }
  EXPECT_EQ(mismatches, 0);
}

TEST(BestResponse, Defender) {
  const SecurityGame g = example_game();
  EXPECT_EQ(best_response_defender(g, Vec::Unit(2, 0)), 0);
  EXPECT_EQ(best_response_defender(g, Vec::Unit(2, 1)), 1);
  EXPECT_EQ(best_response_defender(zero_cost(Mat::Ones(3, 3)), Vec::Unit(3, 2)), 0);
  EXPECT_THROW(best_response_defender(g, Vec::Ones(2)), ValidationError);
}

TEST(BestResponse, Attacker) {
  const SecurityGame g = example_game();
  EXPECT_EQ(best_response_attacker(g, Vec::Unit(2, 0)), 1);
  EXPECT_EQ(best_response_attacker(g, Vec::Unit(2, 1)), 0);
  Mat p(2, 2);
  p << 5, 3, 2, 4;
  const SecurityGame dear = build_game(1.0, p, Vec::Zero(2), Vec::Unit(2, 1) * 1e6);
  std::mt19937_64 gen(1);
  for (int s = 0; s < 100; ++s) EXPECT_EQ(best_response_attacker(dear, random_simplex(gen, 2)), 0);
}

TEST(Exploitability, PureProfileInMatchingPennies) {
  const SecurityGame g = zero_cost(2.0 * Mat::Identity(2, 2));
  const Exploitability e = exploitability(g, {Vec::Unit(2, 0), Vec::Unit(2, 0)});
  EXPECT_DOUBLE_EQ(e.defender_gap, 0.0);
  EXPECT_DOUBLE_EQ(e.attacker_gap, 2.0);
}

TEST(Exploitability, NeverNegative) {
  std::mt19937_64 gen(23);
  for (int s = 0; s < 1000; ++s) {
    const SecurityGame g = random_game(gen, 3, true);
    const Exploitability e = exploitability(g, {random_simplex(gen, 3), random_simplex(gen, 3)});
    EXPECT_GE(e.defender_gap, 0.0);
    EXPECT_GE(e.attacker_gap, 0.0);
  }
}

TEST(SolveExact, SymmetricIdentity) {
  const EquilibriumResult r = solve_exact(zero_cost(Mat::Identity(2, 2)));
  EXPECT_NEAR(r.game_value, 0.5, 1e-12);
  EXPECT_NEAR(r.profile.g(0), 0.5, 1e-12);
  EXPECT_NEAR(r.profile.f(0), 0.5, 1e-12);
  EXPECT_LE(r.defender_gap, 1e-9);
  EXPECT_LE(r.attacker_gap, 1e-9);
}

TEST(SolveExact, PureSaddle) {
  Mat p(3, 3);
  p << 3, 1, 4,
       5, 2, 6,
       2, 0, 1;
  // Attacker picks the row, defender the column; the saddle is at (1, 1).
  double lower = -1e300, upper = 1e300;
  for (int j = 0; j < 3; ++j) lower = std::max(lower, p.col(j).minCoeff());
  for (int i = 0; i < 3; ++i) upper = std::min(upper, p.row(i).maxCoeff());
  ASSERT_EQ(lower, upper);
  const EquilibriumResult r = solve_exact(zero_cost(p));
  EXPECT_EQ(r.game_value, lower);
  EXPECT_EQ(r.profile.g.maxCoeff(), 1.0);
  EXPECT_EQ(r.profile.f.maxCoeff(), 1.0);
}

TEST(SolveExact, RandomThreeByThreeAgainstGridScan) {
  std::mt19937_64 gen(31);
  for (int n = 0; n < 3; ++n) {
    const SecurityGame g = random_game(gen, 3, true);
    const EquilibriumResult r = solve_exact(g);
    EXPECT_LE(r.defender_gap, 1e-9);
    EXPECT_LE(r.attacker_gap, 1e-9);
    const Mat m = zero_sum_equivalent(g);
    // ~10^6 grid points per player.
    EXPECT_LE(grid_value_defender(m, 1400), r.game_value + 1e-6);
    EXPECT_GE(grid_value_attacker(m, 1400), r.game_value - 1e-6);
  }
}

TEST(SolveExact, RejectsLargeGames) {
  try {
    solve_exact(zero_cost(Mat::Ones(6, 6)));
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("use learning solvers"), std::string::npos);
  }
}

TEST(SolveExact, ScaleCovariance) {
  std::mt19937_64 gen(41);
  for (int n = 0; n < 50; ++n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Mat p = Mat::NullaryExpr(4, 4, [&] { return u(gen); });
    const EquilibriumResult a = solve_exact(zero_cost(p, 1.0));
    const EquilibriumResult b = solve_exact(zero_cost(p, 10.0));
    EXPECT_LE((a.profile.g - b.profile.g).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE((a.profile.f - b.profile.f).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_NEAR(b.game_value, 10.0 * a.game_value, 1e-12 * std::abs(b.game_value) + 1e-15);
  }
}

TEST(FictitiousPlay, MatchingPennies) {
  const SecurityGame g = zero_cost(2.0 * Mat::Identity(2, 2));
  const EquilibriumResult r = fictitious_play(g, 10000, 0.0);
  EXPECT_NEAR(r.profile.g(0), 0.5, 0.01);
  EXPECT_NEAR(r.profile.f(0), 0.5, 0.01);
  EXPECT_LE(r.defender_gap, 0.02);
  EXPECT_LE(r.attacker_gap, 0.02);
}

TEST(FictitiousPlay, DominantNoAttack) {
  Mat p(2, 2);
  p << 1.0, 1.0,
       0.2, 1.0;
  const SecurityGame g = build_game(1.0, p, Vec::Unit(2, 1) * 0.1, Vec::Unit(2, 1) * 10.0);
  const EquilibriumResult r = fictitious_play(g, 100, 0.0);
  EXPECT_EQ(r.profile.g(0), 1.0);
}

TEST(FictitiousPlay, RandomGamesMatchExactValue) {
  std::mt19937_64 gen(2718);
  for (int n = 0; n < 10; ++n) {
    const SecurityGame g = random_game(gen, 4, true);
    const EquilibriumResult exact = solve_exact(g);
    const EquilibriumResult fp = fictitious_play(g, 100000, 1e-4 * g.payoff_range());
    EXPECT_LE(std::max(fp.defender_gap, fp.attacker_gap), 0.01 * g.payoff_range());
    EXPECT_NEAR(fp.game_value, exact.game_value, 1e-3);
    EXPECT_TRUE(on_simplex(fp.profile.g));
    EXPECT_TRUE(on_simplex(fp.profile.f));
  }
}

TEST(RegretMatching, MatchingPennies) {
  const SecurityGame g = zero_cost(2.0 * Mat::Identity(2, 2));
  const EquilibriumResult r = regret_matching(g, 100000, 0.0, 9);
  EXPECT_NEAR(r.profile.g(0), 0.5, 0.05);
  EXPECT_NEAR(r.profile.f(0), 0.5, 0.05);
}

TEST(RegretMatching, DominantActionAndRegretDecay) {
  Mat p(2, 2);
  p << 1.0, 1.0,
       0.2, 1.0;
  const SecurityGame g = build_game(1.0, p, Vec::Unit(2, 1) * 0.1, Vec::Unit(2, 1) * 10.0);
  const EquilibriumResult r = regret_matching(g, 20000, 0.0, 4);
  EXPECT_GT(r.profile.g(0), 0.99);
  ASSERT_GE(r.regret_trace.size(), 2u);
  EXPECT_LT(r.regret_trace.back(), r.regret_trace.front());
}

TEST(RegretMatching, AverageRegretShrinksLikeInverseSqrt) {
  std::mt19937_64 gen(5);
  const SecurityGame g = random_game(gen, 4, true);
  const EquilibriumResult r = regret_matching(g, 64000, 0.0, 12);
  // Checkpoints every 1000 iterations: regret at 64k should be well below
  // regret at 4k (sqrt ratio 4), allowing a generous factor for noise.
  ASSERT_EQ(r.regret_trace.size(), 64u);
  EXPECT_LT(r.regret_trace[63], r.regret_trace[3] / 2.0);
}

TEST(RegretMatching, RandomGamesWithinFivePercent) {
  std::mt19937_64 gen(2718);
  for (int n = 0; n < 10; ++n) {
    const SecurityGame g = random_game(gen, 4, true);
    const EquilibriumResult r = regret_matching(g, 100000, 1e-4 * g.payoff_range(), n);
    EXPECT_LE(std::max(r.defender_gap, r.attacker_gap), 0.05 * g.payoff_range());
  }
}

TEST(RegretMatching, FixedSeedIsBitIdentical) {
  std::mt19937_64 gen(8);
  const SecurityGame g = random_game(gen, 3, true);
  const EquilibriumResult a = regret_matching(g, 5000, 0.0, 77);
  const EquilibriumResult b = regret_matching(g, 5000, 0.0, 77);
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_EQ(a.profile.g, b.profile.g);
  EXPECT_EQ(a.profile.f, b.profile.f);
}

TEST(Solvers, OutputsStayOnSimplex) {
  std::mt19937_64 gen(99);
  for (int n = 0; n < 20; ++n) {
    const SecurityGame g = random_game(gen, 3, true);
    for (const EquilibriumResult& r :
         {solve_exact(g), fictitious_play(g, 3000, 0.0), regret_matching(g, 3000, 0.0, 1)}) {
      EXPECT_TRUE(on_simplex(r.profile.g));
      EXPECT_TRUE(on_simplex(r.profile.f));
      EXPECT_GE(r.profile.g.minCoeff(), 0.0);
      EXPECT_GE(r.profile.f.minCoeff(), 0.0);
    }
  }
}

}  // namespace
