#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "opl/env.hpp"
#include "opl/errors.hpp"

namespace opl {

/// Assignment-probability floor g(t) = t^-alpha / K, positive and
/// nonincreasing with K*g(t) <= 1 for t >= 1.
struct FloorSchedule {
  double alpha = 0.5;
  int arms = 2;

  FloorSchedule() = default;
  FloorSchedule(double alpha_, int arms_) : alpha(alpha_), arms(arms_) {
    if (alpha < 0.0 || alpha > 1.0) throw ValidationError("floor-alpha", "alpha must be in [0,1]");
    if (arms < 1) throw ValidationError("floor-arms", "arm count must be >= 1");
  }

  double floor(std::int64_t t) const {
    return std::pow(static_cast<double>(t), -alpha) / static_cast<double>(arms);
  }
};

/// One collection step as recorded for the offline learner.
struct LoggedSample {
  std::int64_t t = 0;       // 1-based time index
  Eigen::VectorXd context;  // length p
  int arm = 0;
  double reward = 0.0;
  double propensity = 0.0;  // assignment probability of the chosen arm
};

/// Floor-and-shrink transform: arms whose preliminary probability falls below
/// g(t) are raised to it, the rest are shrunk affinely toward g(t) so the
/// vector still sums to one. Degenerate mass (everything at the floor) maps to
/// the uniform vector.
inline Eigen::VectorXd apply_floor(const Eigen::VectorXd& prelim, std::int64_t t,
                                   const FloorSchedule& sched) {
  if (t < 1) throw ValidationError("floor-time", "time index must be >= 1");
  const int K = static_cast<int>(prelim.size());
  const double g = sched.floor(t);
  double spare = 0.0;  // sum over arms above the floor of (ebar - g)
  for (int a = 0; a < K; ++a)
    if (prelim(a) >= g) spare += prelim(a) - g;
  if (spare < 1e-12) return Eigen::VectorXd::Constant(K, 1.0 / K);
  const double c = (1.0 - K * g) / spare;
  Eigen::VectorXd out(K);
  for (int a = 0; a < K; ++a) out(a) = (prelim(a) < g) ? g : g + c * (prelim(a) - g);
  return out;
}

/// Linear Thompson sampling state: per-arm ridge statistics A = lambda*I +
/// sum x x', b = sum x y, Gaussian posterior N(A^-1 b, v^2 A^-1). Preliminary
/// assignment probabilities are Monte Carlo argmax frequencies. Single-owner
/// within a replication; the Cholesky cache makes calls non-reentrant.
class AgentState {
 public:
  AgentState(int arms, int dim, double ridge = 1.0, double prior_scale2 = 1.0,
             int mc_rounds = 1000)
      : arms_(arms), dim_(dim), prior_scale2_(prior_scale2), mc_rounds_(mc_rounds) {
    if (arms < 1) throw ValidationError("agent-arms", "arm count must be >= 1");
    if (dim < 1) throw ValidationError("agent-dim", "dimension must be >= 1");
    if (ridge <= 0) throw ValidationError("agent-ridge", "ridge must be > 0");
    if (mc_rounds < 1) throw ValidationError("agent-rounds", "mc_rounds must be >= 1");
    gram_.assign(arms_, Eigen::MatrixXd::Identity(dim_, dim_) * ridge);
    moment_.assign(arms_, Eigen::VectorXd::Zero(dim_));
    chol_.resize(arms_);
    mean_.resize(arms_);
    fresh_.assign(arms_, false);
  }

  int arms() const { return arms_; }
  int dim() const { return dim_; }
  int mc_rounds() const { return mc_rounds_; }
  const Eigen::MatrixXd& gram(int arm) const { return gram_[static_cast<std::size_t>(arm)]; }
  const Eigen::VectorXd& moment(int arm) const { return moment_[static_cast<std::size_t>(arm)]; }

  Eigen::VectorXd posterior_mean(int arm) const {
    refresh(arm);
    return mean_[static_cast<std::size_t>(arm)];
  }

  /// All posterior means stacked K x p; the frozen greedy policy of the agent.
  Eigen::MatrixXd posterior_means() const {
    Eigen::MatrixXd out(arms_, dim_);
    for (int a = 0; a < arms_; ++a) out.row(a) = posterior_mean(a).transpose();
    return out;
  }

  /// Monte Carlo preliminary probabilities: in each round draw a parameter per
  /// arm from its posterior and count the argmax (ties to the lowest index);
  /// counts/m keeps the simplex constraint exact.
  Eigen::VectorXd preliminary_probs(const Eigen::VectorXd& x, Rng& rng) const {
    if (static_cast<int>(x.size()) != dim_)
      throw ValidationError("dimension-mismatch", "context has wrong length");
    for (int a = 0; a < arms_; ++a) refresh(a);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double v = std::sqrt(prior_scale2_);
    std::vector<int> wins(static_cast<std::size_t>(arms_), 0);
    Eigen::VectorXd z(dim_);
    for (int round = 0; round < mc_rounds_; ++round) {
      int best = 0;
      double best_score = 0.0;
      for (int a = 0; a < arms_; ++a) {
        for (int i = 0; i < dim_; ++i) z(i) = gauss(rng);
        // theta = mean + v * L^-T z gives covariance v^2 A^-1 with A = L L'
        const Eigen::VectorXd theta =
            mean_[static_cast<std::size_t>(a)] +
            v * chol_[static_cast<std::size_t>(a)].matrixU().solve(z);
        const double score = x.dot(theta);
        if (a == 0 || score > best_score) {
          best = a;
          best_score = score;
        }
      }
      ++wins[static_cast<std::size_t>(best)];
    }
    Eigen::VectorXd out(arms_);
    for (int a = 0; a < arms_; ++a)
      out(a) = static_cast<double>(wins[static_cast<std::size_t>(a)]) /
               static_cast<double>(mc_rounds_);
    return out;
  }

  /// Rank-one posterior update for the pulled arm.
  void observe(int arm, const Eigen::VectorXd& x, double y) {
    if (arm < 0 || arm >= arms_) throw ValidationError("arm-range", "arm index out of range");
    gram_[static_cast<std::size_t>(arm)].noalias() += x * x.transpose();
    moment_[static_cast<std::size_t>(arm)].noalias() += x * y;
    fresh_[static_cast<std::size_t>(arm)] = false;
  }

  /// Posterior-mean greedy action, ties to the lowest index.
  int greedy_action(const Eigen::VectorXd& x) const {
    int best = 0;
    double best_score = 0.0;
    for (int a = 0; a < arms_; ++a) {
      const double score = x.dot(posterior_mean(a));
      if (a == 0 || score > best_score) {
        best = a;
        best_score = score;
      }
    }
    return best;
  }

 private:
  int arms_;
  int dim_;
  double prior_scale2_;
  int mc_rounds_;
  std::vector<Eigen::MatrixXd> gram_;
  std::vector<Eigen::VectorXd> moment_;
  mutable std::vector<Eigen::LLT<Eigen::MatrixXd>> chol_;
  mutable std::vector<Eigen::VectorXd> mean_;
  mutable std::vector<bool> fresh_;

  void refresh(int arm) const {
    const auto i = static_cast<std::size_t>(arm);
    if (fresh_[i]) return;
    chol_[i].compute(gram_[i]);
    mean_[i] = chol_[i].solve(moment_[i]);
    fresh_[i] = true;
  }
};

/// Full per-step record, including the probability vectors the acceptance
/// audit inspects.
struct StepRecord {
  LoggedSample sample;
  Eigen::VectorXd preliminary;
  Eigen::VectorXd floored;
};

/// One collection step: preliminary probabilities, floor, multinomial action
/// draw, propensity logging, posterior update.
inline StepRecord step_detailed(AgentState& state, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& potential_rewards, std::int64_t t,
                                const FloorSchedule& sched, Rng& rng) {
  StepRecord rec;
  rec.preliminary = state.preliminary_probs(x, rng);
  rec.floored = apply_floor(rec.preliminary, t, sched);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  int arm = static_cast<int>(rec.floored.size()) - 1;
  double cum = 0.0;
  for (int a = 0; a < static_cast<int>(rec.floored.size()); ++a) {
    cum += rec.floored(a);
    if (u < cum) {
      arm = a;
      break;
    }
  }
  rec.sample.t = t;
  rec.sample.context = x;
  rec.sample.arm = arm;
  rec.sample.reward = potential_rewards(arm);
  rec.sample.propensity = rec.floored(arm);
  state.observe(arm, x, rec.sample.reward);
  return rec;
}

inline LoggedSample select_and_log(AgentState& state, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& potential_rewards, std::int64_t t,
                                   const FloorSchedule& sched, Rng& rng) {
  return step_detailed(state, x, potential_rewards, t, sched, rng).sample;
}

}  // namespace opl
