#include "sos/mjls.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sos/errors.hpp"

namespace sos {

namespace {

std::string shape(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

std::string indexed(std::string_view name, std::size_t m) {
  return std::string(name) + "[" + std::to_string(m) + "]";
}

void check_shape(std::vector<Violation>& out, std::string_view name, std::size_t m,
                 const Mat& mat, Eigen::Index rows, Eigen::Index cols) {
  if (mat.rows() != rows || mat.cols() != cols) {
    out.push_back({indexed(name, m), "is " + shape(mat) + ", expected " +
                                         std::to_string(rows) + "x" + std::to_string(cols)});
  } else if (!mat.allFinite()) {
    out.push_back({indexed(name, m), "has non-finite entries"});
  }
}

void check_weights(const Mat& a, const Mat& b, const Mat& q, const Mat& r) {
  const Eigen::Index n = a.rows();
  const Eigen::Index m = b.cols();
  if (a.cols() != n || b.rows() != n || q.rows() != n || q.cols() != n || r.rows() != m ||
      r.cols() != m) {
    throw ValidationError("lqr: dimension mismatch (A " + shape(a) + ", B " + shape(b) +
                          ", Q " + shape(q) + ", R " + shape(r) + ")");
  }
  if (q.size() > 0 && (q - q.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
    throw ValidationError("lqr: Q weight is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat> qs(q);
  if (n > 0 && qs.eigenvalues().minCoeff() < -1e-12) {
    throw ValidationError("lqr: Q weight is not positive semidefinite");
  }
  if (r.size() > 0 && (r - r.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
    throw ValidationError("lqr: R weight is not symmetric");
  }
}

bool r_is_zero(const Mat& r) { return r.size() == 0 || r.cwiseAbs().maxCoeff() == 0.0; }

void check_r(const Mat& b, const Mat& r) {
  if (r_is_zero(r)) {
    if (b.rows() != b.cols() || Eigen::FullPivLU<Mat>(b).rank() < b.rows()) {
      throw ValidationError("lqr: R = 0 requires a square invertible B");
    }
    return;
  }
  Eigen::LLT<Mat> llt(r);
  if (llt.info() != Eigen::Success) {
    throw ValidationError("lqr: R weight is not positive definite");
  }
}

constexpr int kRiccatiMaxIterations = 10000;
constexpr double kRiccatiTolerance = 1e-10;

}  // namespace

std::vector<Violation> validate_model(const MjlsModel& model, const TransitionModel& trans) {
  std::vector<Violation> out;
  const std::size_t modes = model.mode_labels.size();
  if (modes == 0) {
    out.push_back({"modes", "at least one mode is required"});
    return out;
  }
  auto count = [&](std::string_view name, std::size_t got) {
    if (got != modes) {
      out.push_back({std::string(name), "has " + std::to_string(got) + " modes, expected " +
                                            std::to_string(modes)});
      return false;
    }
    return true;
  };
  const bool counts_ok = count("A", model.A.size()) & count("B", model.B.size()) &
                         count("E", model.E.size()) & count("C", model.C.size()) &
                         count("drift", model.drift.size()) &
                         count("y_offset", model.y_offset.size());
  if (!counts_ok) return out;

  const Eigen::Index nx = model.A[0].rows();
  const Eigen::Index nu = model.B[0].cols();
  const Eigen::Index nw = model.E[0].cols();
  const Eigen::Index ny = model.C[0].rows();
  if (nx == 0 || nu == 0 || nw == 0 || ny == 0) {
    out.push_back({"dimensions", "n_x, n_u, n_w and n_y must be positive"});
    return out;
  }
  for (std::size_t m = 0; m < modes; ++m) {
    check_shape(out, "A", m, model.A[m], nx, nx);
    check_shape(out, "B", m, model.B[m], nx, nu);
    check_shape(out, "E", m, model.E[m], nx, nw);
    check_shape(out, "C", m, model.C[m], ny, nx);
    check_shape(out, "drift", m, model.drift[m], nx, 1);
    check_shape(out, "y_offset", m, model.y_offset[m], ny, 1);
  }
  if (model.noise_std.size() != nw) {
    out.push_back({"noise_std", "has length " + std::to_string(model.noise_std.size()) +
                                    ", expected " + std::to_string(nw)});
  } else {
    for (Eigen::Index w = 0; w < nw; ++w) {
      if (!(model.noise_std(w) >= 0.0) || !std::isfinite(model.noise_std(w))) {
        out.push_back({indexed("noise_std", static_cast<std::size_t>(w)),
                       "must be finite and >= 0"});
      }
    }
  }
  if (model.perf_index < 0 || model.perf_index >= ny) {
    out.push_back({"perf_index", std::to_string(model.perf_index) + " is outside [0, " +
                                     std::to_string(ny) + ")"});
  }

  const int options = trans.options();
  if (trans.attacks < 0 ||
      trans.generators.size() != static_cast<std::size_t>(options * options)) {
    out.push_back({"transition", "expected " + std::to_string(options * options) +
                                     " generators, got " +
                                     std::to_string(trans.generators.size())});
    return out;
  }
  const auto mm = static_cast<Eigen::Index>(modes);
  for (int i = 0; i < options; ++i) {
    for (int j = 0; j < options; ++j) {
      const Mat& q = trans.q(i, j);
      const std::string name =
          "Q[" + std::to_string(i) + "][" + std::to_string(j) + "]";
      if (q.rows() != mm || q.cols() != mm) {
        out.push_back({name, "is " + shape(q) + ", expected " + std::to_string(modes) + "x" +
                                 std::to_string(modes)});
        continue;
      }
      if (!q.allFinite()) {
        out.push_back({name, "has non-finite entries"});
        continue;
      }
      for (Eigen::Index r = 0; r < mm; ++r) {
        const double sum = q.row(r).sum();
        if (std::abs(sum) > 1e-12) {
          std::ostringstream msg;
          msg.precision(17);
          msg << "row " << r << " sums to " << sum << ", expected 0";
          out.push_back({name, msg.str()});
        }
        for (Eigen::Index c = 0; c < mm; ++c) {
          if (c != r && q(r, c) < 0.0) {
            out.push_back({name, "off-diagonal entry (" + std::to_string(r) + "," +
                                     std::to_string(c) + ") is negative"});
          }
        }
      }
      if (i == 0) {
        for (Eigen::Index c = 1; c < mm; ++c) {
          if (q(0, c) != 0.0) {
            out.push_back({name, "no-attack generator has a breach rate into mode " +
                                     std::to_string(c)});
          }
        }
      }
    }
  }
  return out;
}

DiscreteModel discretize(const MjlsModel& model, const TransitionModel& trans, double dt) {
  if (auto v = validate_model(model, trans); !v.empty()) {
    std::string msg = "invalid model:";
    for (const auto& e : v) msg += " " + e.field + " " + e.message + ";";
    throw ValidationError(msg);
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw ValidationError("discretize: dt must be > 0, got " + std::to_string(dt));
  }
  double max_rate = 0.0;
  for (const Mat& q : trans.generators) max_rate = std::max(max_rate, q.diagonal().cwiseAbs().maxCoeff());
  if (dt * max_rate > kMaxRateStep) {
    std::ostringstream msg;
    msg << "discretize: dt * max|Q_mm| = " << dt * max_rate << " exceeds " << kMaxRateStep
        << " (dt = " << dt << ", max rate = " << max_rate << ")";
    throw ValidationError(msg.str());
  }

  DiscreteModel disc;
  disc.dt = dt;
  disc.continuous = model;
  disc.transitions = trans;
  for (int m = 0; m < model.modes(); ++m) {
    const auto um = static_cast<std::size_t>(m);
    const Eigen::Index nx = model.A[um].rows();
    Mat inputs(nx, model.B[um].cols() + model.E[um].cols() + 1);
    inputs << model.B[um], model.E[um], model.drift[um];
    const ZohPair z = zoh(model.A[um], inputs, dt);
    disc.A.push_back(z.state);
    disc.B.push_back(z.input.leftCols(model.B[um].cols()));
    disc.E.push_back(z.input.middleCols(model.B[um].cols(), model.E[um].cols()));
    disc.drift.push_back(z.input.rightCols(1));
  }
  for (const Mat& q : trans.generators) {
    Mat pi = expm(q * dt).cwiseMax(0.0).cwiseMin(1.0);
    disc.transition_matrices.push_back(std::move(pi));
  }
  return disc;
}

Mat lqr_gain(const Mat& a, const Mat& b, const Mat& q_weight, const Mat& r_weight) {
  check_weights(a, b, q_weight, r_weight);
  check_r(b, r_weight);
  Mat p = q_weight;
  for (int it = 0; it < kRiccatiMaxIterations; ++it) {
    const Mat btpa = b.transpose() * p * a;
    const Mat s = r_weight + b.transpose() * p * b;
    const Mat next = q_weight + a.transpose() * p * a -
                     btpa.transpose() * s.colPivHouseholderQr().solve(btpa);
    if (!next.allFinite()) break;
    const double change = (next - p).cwiseAbs().maxCoeff();
    p = 0.5 * (next + next.transpose());
    if (change < kRiccatiTolerance) {
      const Mat s_final = r_weight + b.transpose() * p * b;
      return s_final.colPivHouseholderQr().solve(b.transpose() * p * a);
    }
  }
  throw NumericError("lqr: not stabilizable with these weights (Riccati iteration did not "
                     "converge in " + std::to_string(kRiccatiMaxIterations) + " steps)");
}

Controller jump_lqr_gains(const DiscreteModel& disc, const Mat& mode_transition,
                          const Mat& q_weight, const Mat& r_weight) {
  const int modes = disc.modes();
  if (mode_transition.rows() != modes || mode_transition.cols() != modes) {
    throw ValidationError("jump_lqr_gains: transition matrix is " + shape(mode_transition) +
                          ", expected " + std::to_string(modes) + "x" + std::to_string(modes));
  }
  for (int m = 0; m < modes; ++m) {
    check_weights(disc.A[m], disc.B[m], q_weight, r_weight);
    check_r(disc.B[m], r_weight);
  }
  std::vector<Mat> p(static_cast<std::size_t>(modes), q_weight);
  std::vector<Mat> next(p.size());
  for (int it = 0; it < kRiccatiMaxIterations; ++it) {
    double change = 0.0;
    bool finite = true;
    for (int m = 0; m < modes; ++m) {
      Mat expected = Mat::Zero(q_weight.rows(), q_weight.cols());
      for (int n = 0; n < modes; ++n) expected += mode_transition(m, n) * p[n];
      const Mat& a = disc.A[m];
      const Mat& b = disc.B[m];
      const Mat btpa = b.transpose() * expected * a;
      const Mat s = r_weight + b.transpose() * expected * b;
      Mat pm = q_weight + a.transpose() * expected * a -
               btpa.transpose() * s.colPivHouseholderQr().solve(btpa);
      pm = 0.5 * (pm + pm.transpose());
      finite = finite && pm.allFinite();
      change = std::max(change, (pm - p[m]).cwiseAbs().maxCoeff());
      next[m] = std::move(pm);
    }
    if (!finite) break;
    std::swap(p, next);
    if (change < kRiccatiTolerance) {
      Controller out;
      for (int m = 0; m < modes; ++m) {
        Mat expected = Mat::Zero(q_weight.rows(), q_weight.cols());
        for (int n = 0; n < modes; ++n) expected += mode_transition(m, n) * p[n];
        const Mat& a = disc.A[m];
        const Mat& b = disc.B[m];
        const Mat s = r_weight + b.transpose() * expected * b;
        out.K.push_back(s.colPivHouseholderQr().solve(b.transpose() * expected * a));
      }
      return out;
    }
  }
  throw NumericError("jump_lqr_gains: not stabilizable with these weights");
}

Mat closed_loop(const DiscreteModel& disc, const Controller& k, int mode) {
  const auto m = static_cast<std::size_t>(mode);
  if (k.K.size() != disc.A.size() || k.K[m].rows() != disc.B[m].cols() ||
      k.K[m].cols() != disc.A[m].rows()) {
    throw ValidationError("controller dimensions do not match the model");
  }
  return disc.A[m] - disc.B[m] * k.K[m];
}

double ms_criterion(const std::vector<Mat>& closed, const Mat& transition) {
  const auto modes = static_cast<Eigen::Index>(closed.size());
  if (modes == 0 || transition.rows() != modes || transition.cols() != modes) {
    throw ValidationError("ms_criterion: transition matrix does not match the mode count");
  }
  const Eigen::Index n = closed[0].rows();
  for (const Mat& a : closed) {
    if (a.rows() != n || a.cols() != n) {
      throw ValidationError("ms_criterion: closed-loop matrices differ in shape");
    }
  }
  const Eigen::Index blk = n * n;
  Mat lifted = Mat::Zero(modes * blk, modes * blk);
  for (Eigen::Index m = 0; m < modes; ++m) {
    const Mat kk = kron(closed[static_cast<std::size_t>(m)], closed[static_cast<std::size_t>(m)]);
    for (Eigen::Index to = 0; to < modes; ++to) {
      if (transition(m, to) != 0.0) lifted.block(to * blk, m * blk, blk, blk) = transition(m, to) * kk;
    }
  }
  return spectral_radius(lifted);
}

double ms_criterion(const DiscreteModel& disc, int attack, int defense, const Controller& k) {
  std::vector<Mat> closed;
  for (int m = 0; m < disc.modes(); ++m) closed.push_back(closed_loop(disc, k, m));
  return ms_criterion(closed, disc.pi(attack, defense));
}

bool ms_stable(const DiscreteModel& disc, int attack, int defense, const Controller& k) {
  return ms_criterion(disc, attack, defense, k) < 1.0;
}

int sample_mode(const Eigen::Ref<const Eigen::RowVectorXd>& row, RandomStream& rng) {
  const double u = rng.uniform();
  double cumulative = 0.0;
  int last_positive = 0;
  for (Eigen::Index m = 0; m < row.size(); ++m) {
    if (row(m) <= 0.0) continue;
    last_positive = static_cast<int>(m);
    cumulative += row(m);
    if (u < cumulative) return static_cast<int>(m);
  }
  return last_positive;
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::attack_launched: return "attack-launched";
    case EventKind::breach: return "breach";
    case EventKind::response_triggered: return "response-triggered";
    case EventKind::recovered: return "recovered";
  }
  return "unknown";
}

std::size_t Trajectory::count(EventKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(events.begin(), events.end(), [&](const Event& e) { return e.kind == kind; }));
}

MjlsStepper::MjlsStepper(const DiscreteModel& disc, const Controller& k, int attack, int defense,
                         const RunSpec& spec, std::uint64_t seed, bool full_history)
    : disc_(&disc),
      k_(&k),
      attack_(attack),
      defense_(defense),
      attack_time_(spec.attack_time),
      steps_(0),
      full_history_(full_history),
      modes_(derive_seed(seed, {stream::kModes})),
      noise_(derive_seed(seed, {stream::kNoise})) {
  if (attack < 0 || attack >= disc.options() || defense < 0 || defense >= disc.options()) {
    throw ValidationError("simulate: attack/defense index out of range (" +
                          std::to_string(attack) + ", " + std::to_string(defense) + ")");
  }
  if (!(spec.horizon >= disc.dt)) {
    throw ValidationError("simulate: horizon must be >= dt");
  }
  if (spec.theta0 < 0 || spec.theta0 >= disc.modes()) {
    throw ValidationError("simulate: initial mode out of range");
  }
  const int nx = disc.continuous.n_x();
  if (spec.x0.size() != 0 && spec.x0.size() != nx) {
    throw ValidationError("simulate: x0 has length " + std::to_string(spec.x0.size()) +
                          ", expected " + std::to_string(nx));
  }
  for (int m = 0; m < disc.modes(); ++m) (void)closed_loop(disc, k, m);
  steps_ = static_cast<std::size_t>(std::llround(spec.horizon / disc.dt));
  x_ = spec.x0.size() == 0 ? Vec::Zero(nx) : spec.x0;
  const std::size_t samples = steps_ + 1;
  traj_.t.reserve(samples);
  traj_.perf.reserve(samples);
  if (full_history_) {
    traj_.x.reserve(samples);
    traj_.theta.reserve(samples);
    traj_.u.reserve(samples);
    traj_.y.reserve(samples);
  }
  record(0.0, x_, spec.theta0);
}

bool MjlsStepper::attack_active() const {
  return attack_ > 0 &&
         static_cast<double>(step_) * disc_->dt >= attack_time_ - 1e-9 * disc_->dt;
}

const Mat& MjlsStepper::scheduled_generator() const {
  return disc_->transitions.q(attack_active() ? attack_ : 0, defense_);
}

const Mat& MjlsStepper::scheduled_transition() const {
  return disc_->pi(attack_active() ? attack_ : 0, defense_);
}

void MjlsStepper::advance(const Mat& transition) {
  if (finished()) throw ValidationError("MjlsStepper: advance past the horizon");
  if (attack_active() && !launched_) {
    launched_ = true;
    traj_.events.push_back({attack_time_, EventKind::attack_launched});
  }
  const int theta = mode();
  const auto m = static_cast<std::size_t>(theta);
  const Vec& noise_std = disc_->continuous.noise_std;
  Vec w(noise_std.size());
  for (Eigen::Index c = 0; c < w.size(); ++c) w(c) = noise_std(c) * noise_.normal();
  Vec next = disc_->A[m] * x_ + disc_->B[m] * traj_.u.back() + disc_->E[m] * w + disc_->drift[m];
  const int next_theta = sample_mode(transition.row(theta), modes_);

  ++step_;
  const double t = static_cast<double>(step_) * disc_->dt;
  if (!next.allFinite() || next.cwiseAbs().maxCoeff() > kDivergenceBound) {
    std::ostringstream msg;
    msg << "simulation diverged at t=" << t;
    throw NumericError(msg.str());
  }
  if (theta == 0 && next_theta != 0) traj_.events.push_back({t, EventKind::breach});
  if (theta != 0 && next_theta == 0) traj_.events.push_back({t, EventKind::response_triggered});
  x_ = std::move(next);
  record(t, x_, next_theta);
}

void MjlsStepper::record(double t, const Vec& x, int theta) {
  const auto m = static_cast<std::size_t>(theta);
  const MjlsModel& model = disc_->continuous;
  Vec u = -(k_->K[m] * x);
  Vec y = model.C[m] * x + model.y_offset[m];
  traj_.t.push_back(t);
  traj_.perf.push_back(y(model.perf_index));
  if (full_history_ || traj_.x.empty()) {
    traj_.x.push_back(x);
    traj_.theta.push_back(theta);
    traj_.u.push_back(std::move(u));
    traj_.y.push_back(std::move(y));
  } else {
    traj_.x.back() = x;
    traj_.theta.back() = theta;
    traj_.u.back() = std::move(u);
    traj_.y.back() = std::move(y);
  }
}

Trajectory simulate(const DiscreteModel& disc, const Controller& k, int attack, int defense,
                    const RunSpec& spec, std::uint64_t seed, bool full_history) {
  MjlsStepper stepper(disc, k, attack, defense, spec, seed, full_history);
  while (!stepper.finished()) stepper.advance();
  return std::move(stepper).finish();
}

PowerAverage average_power(const Trajectory& traj, double burn_in) {
  double sum = 0.0;
  std::size_t n = 0;
  std::size_t first = traj.size();
  for (std::size_t k = 0; k < traj.size(); ++k) {
    if (traj.t[k] >= burn_in - 1e-12) {
      first = std::min(first, k);
      sum += traj.perf[k];
      ++n;
    }
  }
  if (n == 0) throw ValidationError("average_power: no samples after burn-in");
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t k = first; k < traj.size(); ++k) {
    const double d = traj.perf[k] - mean;
    ss += d * d;
  }
  const double se =
      n > 1 ? std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
  return {mean, se};
}

Vec nominal_steady_state(const DiscreteModel& disc, const Controller& k) {
  const Mat closed = closed_loop(disc, k, 0);
  const Mat lhs = Mat::Identity(closed.rows(), closed.cols()) - closed;
  return lhs.fullPivLu().solve(disc.drift[0]);
}

double nominal_perf(const DiscreteModel& disc, const Controller& k) {
  const MjlsModel& model = disc.continuous;
  const Vec y = model.C[0] * nominal_steady_state(disc, k) + model.y_offset[0];
  return y(model.perf_index);
}

}  // namespace sos
