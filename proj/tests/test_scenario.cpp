#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include "sos/errors.hpp"
#include "sos/scenario.hpp"
#include "test_support.hpp"

namespace {

using namespace sos;
using sos::testing::data_path;
using sos::testing::read_file;
using sos::testing::scenario_path;

// Two modes, one attack; every optional key left out.
const char* kMinimal = R"(version = 1
model.modes = ["ok", "hit"]
model.A = [[[-1.0]], [[-1.0]]]
model.B = [[[1.0]], [[0.5]]]
model.E = [[[1.0]], [[1.0]]]
model.C = [[[1.0]], [[1.0]]]
model.noise_std = [0.0]
game.attacks = 1
transition.attack_mode = [1]
transition.breach_rate = [0.2]
)";

std::string error_of(const std::string& text, const std::string& name = "t.scn") {
  try {
    parse_scenario_text(text, name);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto at = text.find(from);
  EXPECT_NE(at, std::string::npos) << from;
  return text.replace(at, from.size(), to);
}

bool contains(const std::string& s, const std::string& part) {
  return s.find(part) != std::string::npos;
}

TEST(Scenario, MinimalFileGetsDefaults) {
  const Scenario sc = parse_scenario_text(kMinimal, "t.scn");
  ASSERT_TRUE(sc.subsystem);
  EXPECT_FALSE(sc.network);
  const SubsystemConfig& c = *sc.subsystem;
  EXPECT_EQ(c.game.alpha, 1.0);
  EXPECT_EQ(c.game.defense_cost, Vec::Zero(2));
  EXPECT_EQ(c.sim.dt, 0.1);
  EXPECT_EQ(c.sim.reps, 50);
  EXPECT_EQ(c.sim.seed, 42u);
  EXPECT_EQ(c.colearn.damping, 0.5);
  EXPECT_EQ(c.controller.Q, Mat::Identity(1, 1));
  EXPECT_EQ(c.model.drift[1], Vec::Zero(1));
  EXPECT_TRUE(std::is_sorted(sc.defaults_applied.begin(), sc.defaults_applied.end()));
  for (const char* key : {"game.alpha", "sim.dt", "transition.recovery_rate",
                          "resilience.D_target", "compare.baseline", "model.drift"}) {
    EXPECT_NE(std::find(sc.defaults_applied.begin(), sc.defaults_applied.end(), key),
              sc.defaults_applied.end())
        << key;
  }
  EXPECT_EQ(std::find(sc.defaults_applied.begin(), sc.defaults_applied.end(), "game.attacks"),
            sc.defaults_applied.end());
}

TEST(Scenario, ParametricTransitions) {
  const SubsystemConfig c = *parse_scenario_text(
      std::string(kMinimal) + "transition.recovery_rate = [0.1, 0.4]\n", "t.scn").subsystem;
  Mat q10(2, 2), q11(2, 2), q00(2, 2);
  q00 << 0.0, 0.0, 0.1, -0.1;
  q10 << -0.2, 0.2, 0.1, -0.1;
  q11 << 0.0, 0.0, 0.4, -0.4;
  EXPECT_EQ(c.transitions.q(0, 0), q00);
  EXPECT_EQ(c.transitions.q(1, 0), q10);
  EXPECT_EQ(c.transitions.q(1, 1), q11);
}

TEST(Scenario, BuildTransitionsEscalationAndWeights) {
  TransitionParams p;
  p.attack_mode = {1, 2};
  p.breach_rate = Vec::Constant(2, 0.0);
  p.breach_rate << 0.3, 0.2;
  p.recovery_rate = Vec::Zero(3);
  p.recovery_rate << 0.1, 0.5, 0.0;
  p.escalation = Mat::Zero(3, 3);
  p.escalation(1, 2) = 0.05;
  p.recovery_weight = Vec::Ones(3);
  p.recovery_weight(2) = 0.5;
  const TransitionModel t = build_transitions(p, 3);
  ASSERT_EQ(t.attacks, 2);
  Mat q21(3, 3);
  q21 << -0.2, 0.0, 0.2,  //
      0.5, -0.55, 0.05,   //
      0.25, 0.0, -0.25;
  EXPECT_LE((t.q(2, 1) - q21).cwiseAbs().maxCoeff(), 1e-15);
  // The matching defense blocks the breach.
  EXPECT_EQ(t.q(2, 2).row(0), Eigen::RowVectorXd::Zero(3));
  for (const Mat& q : t.generators) EXPECT_LE(q.rowwise().sum().cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Scenario, ShippedWindfarm) {
  const Scenario sc = parse_scenario(scenario_path("windfarm.scn"));
  ASSERT_TRUE(sc.subsystem);
  EXPECT_EQ(sc.subsystem->model.modes(), 4);
  EXPECT_EQ(sc.subsystem->transitions.attacks, 2);
  const std::vector<std::string> expected{
      "colearn.damping",   "colearn.max_outer", "colearn.sustain", "colearn.tol_g_rel",
      "colearn.tol_p_rel", "colearn.tol_s",     "compare.baseline", "controller.Q",
      "controller.R",      "game.max_iters",    "game.solver",     "sim.theta0",
      "sim.x0"};
  EXPECT_EQ(sc.defaults_applied, expected);
}

TEST(Scenario, ResolvedConfigGolden) {
  const Scenario sc = parse_scenario(scenario_path("windfarm.scn"));
  const std::string actual = resolved_config(sc).dump(2) + "\n";
  const auto golden = std::filesystem::path(SOS_GOLDEN_DIR) / "windfarm_resolved.json";
  if (std::getenv("SOS_UPDATE_GOLDEN")) std::ofstream(golden, std::ios::binary) << actual;
  EXPECT_EQ(actual, read_file(golden));
}

TEST(Scenario, ResolvedConfigReparsesToSameModel) {
  const Scenario sc = parse_scenario(scenario_path("windfarm.scn"));
  const auto j = resolved_config(sc);
  EXPECT_EQ(j["version"], 1);
  EXPECT_EQ(j["subsystem"]["game"]["alpha"], 1.0);
}

TEST(Scenario, MissingAlphaRecordsDefault) {
  std::string text = read_file(scenario_path("windfarm.scn"));
  text = replace(text, "game.alpha = 1.0\n", "");
  const Scenario sc = parse_scenario_text(text, "windfarm.scn");
  EXPECT_EQ(sc.subsystem->game.alpha, 1.0);
  EXPECT_NE(std::find(sc.defaults_applied.begin(), sc.defaults_applied.end(), "game.alpha"),
            sc.defaults_applied.end());
}

TEST(Scenario, RowSumViolationNamesPairAndRow) {
  std::string text = read_file(data_path("no_leverage.scn"));
  text = replace(text, "transition.Q.1.0 = [[-0.03, 0.03,", "transition.Q.1.0 = [[-0.03, 0.04,");
  const std::string err = error_of(text, "no_leverage.scn");
  EXPECT_TRUE(contains(err, "transition.Q.1.0")) << err;
  EXPECT_TRUE(contains(err, "row 0")) << err;
  EXPECT_TRUE(contains(err, "no_leverage.scn:")) << err;
}

TEST(Scenario, NegativeOffDiagonalRate) {
  std::string text = read_file(data_path("no_leverage.scn"));
  text = replace(text, "transition.Q.2.2 = [[-0.025, 0.0, 0.025, 0.0], [0.1, -0.1,",
                 "transition.Q.2.2 = [[-0.025, 0.0, 0.025, 0.0], [-0.1, 0.1,");
  EXPECT_TRUE(contains(error_of(text), "transition.Q.2.2"));
}

TEST(Scenario, ExplicitAndParametricDoNotMix) {
  std::string text = read_file(data_path("no_leverage.scn")) + "transition.breach_rate = [0.1, 0.1]\n";
  EXPECT_TRUE(contains(error_of(text), "cannot be combined"));
}

TEST(Scenario, LexicalErrorsCarryLineNumbers) {
  const std::string base(kMinimal);
  EXPECT_TRUE(contains(error_of(base + "sim.speed = 3\n"), "t.scn:11: unknown key 'sim.speed'"));
  EXPECT_TRUE(contains(error_of(base + "game.attacks = 1\n"),
                       "t.scn:11: duplicate key 'game.attacks' (first set on line 8)"));
  EXPECT_TRUE(contains(error_of(base + "game.alpha = 1e999\n"), "t.scn:11: non-finite"));
  EXPECT_TRUE(contains(error_of(base + "game.alpha = inf\n"), "t.scn:11: cannot parse"));
  EXPECT_TRUE(contains(error_of(base + "game.alpha\n"), "t.scn:11: expected 'key = value'"));
  EXPECT_TRUE(contains(error_of(base + "sim.x0 = [0.0,\n"), "t.scn:11: unterminated"));
  EXPECT_TRUE(contains(error_of(base + "game.alpha = \"one\"\n"), "game.alpha: expected a number"));
}

TEST(Scenario, CommentsAndMultilineValues) {
  const std::string text = std::string(kMinimal) +
                           "# a comment line\n"
                           "game.defense_cost = [  # costs\n"
                           "  0.0,\n"
                           "  0.25\n"
                           "]\n"
                           "model.modes_note = 1\n";
  EXPECT_TRUE(contains(error_of(text), "t.scn:16: unknown key"));
  const Scenario sc = parse_scenario_text(replace(text, "model.modes_note = 1\n", ""), "t.scn");
  EXPECT_EQ(sc.subsystem->game.defense_cost(1), 0.25);
}

TEST(Scenario, VersionIsRequiredAndChecked) {
  EXPECT_TRUE(contains(error_of(replace(kMinimal, "version = 1\n", "")),
                       "missing required key 'version'"));
  EXPECT_TRUE(contains(error_of(replace(kMinimal, "version = 1", "version = 2")),
                       "t.scn:1: version: unsupported version 2"));
}

TEST(Scenario, ValueChecksNameTheKey) {
  const std::string base(kMinimal);
  EXPECT_TRUE(contains(error_of(base + "game.alpha = 0\n"), "game.alpha: must be > 0"));
  EXPECT_TRUE(contains(error_of(base + "game.defense_cost = [0.1, 0.0]\n"), "game.defense_cost"));
  EXPECT_TRUE(contains(error_of(base + "game.solver = \"simplex\"\n"), "game.solver"));
  EXPECT_TRUE(contains(error_of(base + "sim.dt = 2.0\n"), "sim.dt"));
  EXPECT_TRUE(contains(error_of(base + "sim.reps = 0\n"), "sim.reps"));
  EXPECT_TRUE(contains(error_of(base + "resilience.eps_rec = 0.5\n"), "resilience.eps_deg"));
  EXPECT_TRUE(contains(error_of(base + "colearn.damping = 0\n"), "colearn.damping"));
  EXPECT_TRUE(contains(error_of(base + "compare.baseline = \"all\"\n"), "compare.baseline"));
  EXPECT_TRUE(contains(error_of(base + "controller.R = [[1.0, 0.0]]\n"), "controller.R"));
  EXPECT_TRUE(contains(error_of(replace(kMinimal, "attack_mode = [1]", "attack_mode = [0]")),
                       "transition.attack_mode"));
  EXPECT_TRUE(contains(error_of(replace(kMinimal, "model.B = [[[1.0]], [[0.5]]]",
                                        "model.B = [[[1.0]], [[0.5, 1.0]]]")),
                       "model.B"));
  EXPECT_TRUE(contains(error_of(replace(kMinimal, "game.attacks = 1", "game.attacks = 65")),
                       "game.attacks"));
  std::string five = replace(kMinimal, "game.attacks = 1", "game.attacks = 5");
  five = replace(five, "attack_mode = [1]", "attack_mode = [1, 1, 1, 1, 1]");
  five = replace(five, "breach_rate = [0.2]", "breach_rate = [0.2, 0.2, 0.2, 0.2, 0.2]");
  EXPECT_TRUE(contains(error_of(five + "game.solver = \"exact\"\n"), "at most 5 options"));
  EXPECT_EQ(error_of(five), "");
}

TEST(Scenario, MissingFile) {
  EXPECT_THROW(parse_scenario(data_path("absent.scn")), ValidationError);
}

class NetworkFile : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() / ("sos_net_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir_);
    std::ofstream(dir_ / "leaf.scn") << kMinimal;
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  Scenario parse(const std::string& body) {
    return parse_scenario_text("version = 1\nnetwork.subsystems = [\"leaf.scn\", \"leaf.scn\"]\n" + body,
                               "net.scn", dir_);
  }
  std::string error(const std::string& body) {
    try {
      parse(body);
    } catch (const ValidationError& e) {
      return e.what();
    }
    return "";
  }

  std::filesystem::path dir_;
};

TEST_F(NetworkFile, Defaults) {
  const Scenario sc = parse("");
  ASSERT_TRUE(sc.network);
  const NetworkSpec& n = *sc.network;
  EXPECT_EQ(n.names, (std::vector<std::string>{"s0", "s1"}));
  EXPECT_EQ(n.weights, Vec::Constant(2, 0.5));
  EXPECT_TRUE(n.edges.empty());
  EXPECT_EQ(n.sharing, SharingMode::isolated);
  EXPECT_NE(std::find(sc.defaults_applied.begin(), sc.defaults_applied.end(), "leaf.scn:game.alpha"),
            sc.defaults_applied.end());
}

TEST_F(NetworkFile, EdgesByNameOrIndex) {
  const Scenario sc = parse(
      "network.names = [\"up\", \"down\"]\n"
      "network.edges = [[\"up\", \"down\", 0.5], [1, 0, 2.0]]\n"
      "network.sharing = \"shared-beliefs\"\n");
  const NetworkSpec& n = *sc.network;
  ASSERT_EQ(n.edges.size(), 2u);
  EXPECT_EQ(n.edges[0].source, 0);
  EXPECT_EQ(n.edges[0].target, 1);
  EXPECT_EQ(n.edges[0].kappa, 0.5);
  EXPECT_EQ(n.edges[1].source, 1);
  EXPECT_EQ(n.sharing, SharingMode::shared_beliefs);
}

TEST_F(NetworkFile, Restrictions) {
  EXPECT_TRUE(contains(error("game.alpha = 2.0\n"), "network files may only contain"));
  EXPECT_TRUE(contains(error("network.names = [\"a\", \"a\"]\n"), "network.names"));
  EXPECT_TRUE(contains(error("network.names = [\"system\", \"b\"]\n"), "network.names"));
  EXPECT_TRUE(contains(error("network.edges = [[\"a\", \"zz\", 1.0]]\n"), "unknown subsystem"));
  EXPECT_TRUE(contains(error("network.weights = [0.9, 0.9]\n"), "network.weights"));
  EXPECT_TRUE(contains(error("network.sharing = \"gossip\"\n"), "network.sharing"));
  EXPECT_TRUE(contains(error("network.attack = [1]\n"), "network.attack"));
  EXPECT_TRUE(contains(error("network.edges = [[0, 0, 1.0]]\n"), "self-loop"));
}

TEST(Scenario, ShippedChain) {
  const Scenario sc = parse_scenario(scenario_path("chain.scn"));
  ASSERT_TRUE(sc.network);
  EXPECT_EQ(sc.network->size(), 3);
  EXPECT_EQ(sc.network->edges.size(), 2u);
  EXPECT_EQ(sc.network->defense, (std::vector<int>{0, 2, 2}));
}

}  // namespace
