#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sos/linalg.hpp"
#include "sos/rng.hpp"

namespace sos {

/// Discrete operating mode of a subsystem. Index 0 is always nominal.
struct Mode {
  int index = 0;
  std::string label;
};

/// Continuous-time Markov jump linear subsystem
///   x' = A(m) x + B(m) u + E(m) v + drift(m),   y = C(m) x + y_offset(m).
/// drift and y_offset carry the operating point of the linearization; both
/// default to zero.
struct MjlsModel {
  std::vector<std::string> mode_labels;
  std::vector<Mat> A, B, E, C;
  std::vector<Vec> drift;
  std::vector<Vec> y_offset;
  Vec noise_std;
  int perf_index = 0;

  int modes() const { return static_cast<int>(mode_labels.size()); }
  int n_x() const { return A.empty() ? 0 : static_cast<int>(A[0].rows()); }
  int n_u() const { return B.empty() ? 0 : static_cast<int>(B[0].cols()); }
  int n_w() const { return E.empty() ? 0 : static_cast<int>(E[0].cols()); }
  int n_y() const { return C.empty() ? 0 : static_cast<int>(C[0].rows()); }
  Mode mode(int m) const { return {m, mode_labels.at(static_cast<std::size_t>(m))}; }
};

/// Mode-transition generators Q^{ij}, one per (attack i, defense j) pair,
/// stored row-major in (i, j).
struct TransitionModel {
  int attacks = 0;
  std::vector<Mat> generators;

  int options() const { return attacks + 1; }
  const Mat& q(int attack, int defense) const {
    return generators.at(static_cast<std::size_t>(attack * options() + defense));
  }
};

struct Violation {
  std::string field;
  std::string message;
};

std::vector<Violation> validate_model(const MjlsModel& model, const TransitionModel& trans);

/// Zero-order-hold discretization with per-pair transition matrices.
struct DiscreteModel {
  double dt = 0.0;
  MjlsModel continuous;
  TransitionModel transitions;
  std::vector<Mat> A, B, E;
  std::vector<Vec> drift;
  std::vector<Mat> transition_matrices;

  int modes() const { return continuous.modes(); }
  int options() const { return transitions.options(); }
  const Mat& pi(int attack, int defense) const {
    return transition_matrices.at(static_cast<std::size_t>(attack * options() + defense));
  }
};

/// Largest admissible dt * max |Q_mm|.
inline constexpr double kMaxRateStep = 0.1;

DiscreteModel discretize(const MjlsModel& model, const TransitionModel& trans, double dt);

/// Mode-dependent state feedback u = -K[mode] x.
struct Controller {
  std::vector<Mat> K;
};

/// Discrete LQR gain by Riccati value iteration from P = Q.
Mat lqr_gain(const Mat& a, const Mat& b, const Mat& q_weight, const Mat& r_weight);

/// Jump-LQR gains: the coupled Riccati iteration where each mode's cost-to-go
/// is the expectation of the successor-mode value under `mode_transition`.
/// With an identity transition matrix this is lqr_gain per mode.
Controller jump_lqr_gains(const DiscreteModel& disc, const Mat& mode_transition,
                          const Mat& q_weight, const Mat& r_weight);

Mat closed_loop(const DiscreteModel& disc, const Controller& k, int mode);

/// Spectral radius of the second-moment operator of the closed-loop jump
/// system; the system is mean-square stable iff this is below one.
double ms_criterion(const std::vector<Mat>& closed, const Mat& transition);
double ms_criterion(const DiscreteModel& disc, int attack, int defense, const Controller& k);
bool ms_stable(const DiscreteModel& disc, int attack, int defense, const Controller& k);

/// Inverse-CDF draw from one row of a transition matrix.
int sample_mode(const Eigen::Ref<const Eigen::RowVectorXd>& row, RandomStream& rng);

enum class EventKind { attack_launched, breach, response_triggered, recovered };
std::string_view to_string(EventKind kind);

struct Event {
  double time = 0.0;
  EventKind kind = EventKind::attack_launched;
};

struct Trajectory {
  std::vector<double> t;
  std::vector<Vec> x;
  std::vector<int> theta;
  std::vector<Vec> u;
  std::vector<Vec> y;
  std::vector<double> perf;
  std::vector<Event> events;

  std::size_t size() const { return t.size(); }
  std::size_t count(EventKind kind) const;
};

/// Per-run settings. The attack (if any) switches the mode process from
/// Q^{0j} to Q^{ij} at attack_time.
struct RunSpec {
  double horizon = 0.0;
  double attack_time = 0.0;
  Vec x0;
  int theta0 = 0;
};

/// Divergence guard on the state.
inline constexpr double kDivergenceBound = 1e9;

/// One subsystem advanced a step at a time. simulate() is a thin loop over
/// this; the network layer drives several in lock-step and may substitute the
/// transition matrix used for a step.
///
/// Randomness: mode jumps draw one uniform per step from the kModes substream
/// of the seed, process noise draws n_w normals per step from kNoise.
class MjlsStepper {
 public:
  /// With full_history false only t, perf and the event log keep every
  /// sample; x, theta, u and y hold the latest sample only.
  MjlsStepper(const DiscreteModel& disc, const Controller& k, int attack, int defense,
              const RunSpec& spec, std::uint64_t seed, bool full_history = true);

  bool finished() const { return step_ >= steps_; }
  std::size_t step_index() const { return step_; }
  std::size_t steps() const { return steps_; }
  int mode() const { return traj_.theta.back(); }
  double perf() const { return traj_.perf.back(); }
  int attack() const { return attack_; }
  int defense() const { return defense_; }

  /// True when the next transition uses the attacked generator.
  bool attack_active() const;
  const Mat& scheduled_generator() const;
  const Mat& scheduled_transition() const;

  void advance() { advance(scheduled_transition()); }
  void advance(const Mat& transition);

  Trajectory finish() && { return std::move(traj_); }
  const Trajectory& trajectory() const { return traj_; }

 private:
  void record(double t, const Vec& x, int theta);

  const DiscreteModel* disc_;
  const Controller* k_;
  int attack_;
  int defense_;
  double attack_time_;
  std::size_t steps_;
  std::size_t step_ = 0;
  bool launched_ = false;
  bool full_history_;
  Vec x_;
  RandomStream modes_;
  RandomStream noise_;
  Trajectory traj_;
};

Trajectory simulate(const DiscreteModel& disc, const Controller& k, int attack, int defense,
                    const RunSpec& spec, std::uint64_t seed, bool full_history = true);

struct PowerAverage {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Mean of perf over samples with t >= burn_in, with its standard error.
PowerAverage average_power(const Trajectory& traj, double burn_in);

/// Closed-loop equilibrium of the nominal mode and its perf value.
Vec nominal_steady_state(const DiscreteModel& disc, const Controller& k);
double nominal_perf(const DiscreteModel& disc, const Controller& k);

}  // namespace sos
