#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "opl/agent.hpp"
#include "opl/errors.hpp"

namespace opl {

/// Per-arm doubly robust scores for one logged step: the fitted mean plus an
/// importance-weighted residual correction on the observed arm.
inline Eigen::VectorXd aipw_elements(const LoggedSample& sample, const Eigen::VectorXd& muhat) {
  if (!(sample.propensity > 0.0) || sample.propensity > 1.0)
    throw ValidationError("propensity-range", "propensity must lie in (0,1]");
  if (sample.arm < 0 || sample.arm >= static_cast<int>(muhat.size()))
    throw ValidationError("arm-range", "arm index out of range");
  Eigen::VectorXd out = muhat;
  out(sample.arm) += (sample.reward - muhat(sample.arm)) / sample.propensity;
  return out;
}

enum class WeightKind { kUniform, kPowerDecay, kFloorMatched };

/// Pre-specified deterministic weight rule h_1..h_T: all ones, t^-beta, or the
/// floor sequence itself.
struct WeightScheme {
  WeightKind kind = WeightKind::kUniform;
  double beta = 0.0;

  static WeightScheme uniform() { return {WeightKind::kUniform, 0.0}; }
  static WeightScheme power(double beta) { return {WeightKind::kPowerDecay, beta}; }
  static WeightScheme floor_matched() { return {WeightKind::kFloorMatched, 0.0}; }

  std::string id() const {
    switch (kind) {
      case WeightKind::kUniform:
        return "uniform";
      case WeightKind::kFloorMatched:
        return "floor";
      case WeightKind::kPowerDecay: {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "pow%g", beta);
        return buf;
      }
    }
    return "unknown";
  }

  /// "uniform", "floor", or "pow:<beta>" / "pow<beta>".
  static WeightScheme parse(const std::string& text) {
    if (text == "uniform") return uniform();
    if (text == "floor") return floor_matched();
    std::string rest;
    if (text.rfind("pow:", 0) == 0)
      rest = text.substr(4);
    else if (text.rfind("pow", 0) == 0)
      rest = text.substr(3);
    else
      throw ValidationError("scheme-parse", "unknown weight scheme: " + text);
    try {
      std::size_t used = 0;
      const double b = std::stod(rest, &used);
      if (used != rest.size()) throw std::invalid_argument(rest);
      return power(b);
    } catch (const std::exception&) {
      throw ValidationError("scheme-parse", "bad power exponent in scheme: " + text);
    }
  }
};

inline Eigen::VectorXd weight_sequence(const WeightScheme& scheme, int horizon,
                                       const FloorSchedule& sched) {
  if (horizon < 1) throw ValidationError("horizon", "horizon must be >= 1");
  Eigen::VectorXd h(horizon);
  for (int t = 1; t <= horizon; ++t) {
    switch (scheme.kind) {
      case WeightKind::kUniform:
        h(t - 1) = 1.0;
        break;
      case WeightKind::kPowerDecay:
        h(t - 1) = std::pow(static_cast<double>(t), -scheme.beta);
        break;
      case WeightKind::kFloorMatched:
        h(t - 1) = sched.floor(t);
        break;
    }
  }
  return h;
}

/// T x K score table with its weight sequence; `weighted` holds
/// h_t * gamma / sum(h), the matrix handed to the tree search.
struct ScoreMatrix {
  Eigen::MatrixXd gamma;
  Eigen::VectorXd weights;
  Eigen::MatrixXd weighted;

  static ScoreMatrix build(Eigen::MatrixXd gamma, Eigen::VectorXd weights) {
    if (gamma.rows() != weights.size())
      throw ValidationError("dimension-mismatch", "weights length must equal score rows");
    if ((weights.array() <= 0.0).any())
      throw ValidationError("weights-positive", "weights must be positive");
    ScoreMatrix s;
    s.gamma = std::move(gamma);
    s.weights = std::move(weights);
    const double total = s.weights.sum();
    s.weighted = s.gamma;
    for (int t = 0; t < s.gamma.rows(); ++t) s.weighted.row(t) *= s.weights(t) / total;
    return s;
  }
};

/// Weighted policy-value estimate sum_t h_t gamma[t][a_t] / sum_t h_t.
inline double generalized_q(const ScoreMatrix& scores, const std::vector<int>& actions) {
  if (static_cast<int>(actions.size()) != scores.gamma.rows())
    throw ValidationError("dimension-mismatch", "one action per score row required");
  double num = 0.0;
  for (int t = 0; t < scores.gamma.rows(); ++t) {
    const int a = actions[static_cast<std::size_t>(t)];
    if (a < 0 || a >= scores.gamma.cols())
      throw ValidationError("arm-range", "action index out of range");
    num += scores.weights(t) * scores.gamma(t, a);
  }
  return num / scores.weights.sum();
}

/// Normalized weights minimizing the regret bound given the floor sequence:
/// the simplex vector proportional to g.
inline Eigen::VectorXd optimal_weights(const Eigen::VectorXd& g) {
  if (g.size() < 1) throw ValidationError("horizon", "need at least one entry");
  if ((g.array() <= 0.0).any())
    throw ValidationError("floor-positive", "floor sequence must be positive");
  return g / g.sum();
}

struct RegretBoundInputs {
  double outcome_bound = 1.0;  // M
  double delta = 0.05;
  double entropy = 1.0;  // kappa(Pi)
  Eigen::VectorXd h;
  Eigen::VectorXd g;

  void validate() const {
    if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta-range", "delta must be in (0,1)");
    if (outcome_bound < 0) throw ValidationError("bound-m", "outcome bound must be >= 0");
    if (h.size() != g.size() || h.size() < 1)
      throw ValidationError("dimension-mismatch", "h and g must be same nonzero length");
    if ((h.array() <= 0.0).any()) throw ValidationError("weights-positive", "h must be positive");
    if ((g.array() <= 0.0).any()) throw ValidationError("floor-positive", "g must be positive");
  }
};

/// High-probability regret bound
///   M sqrt(T) max_t(h_t/g_t) / sum_t h_t * (475 kappa + 1180
///   + 160 sqrt(log(1/delta)) + 160/sqrt(T)).
/// Diagnostic calculator only; weight selection never consults it at runtime.
inline double regret_bound(const RegretBoundInputs& in) {
  in.validate();
  const auto T = static_cast<double>(in.h.size());
  const double ratio = (in.h.array() / in.g.array()).maxCoeff();
  const double prefactor = in.outcome_bound * std::sqrt(T) * ratio / in.h.sum();
  const double paren = 475.0 * in.entropy + 1180.0 + 160.0 * std::sqrt(std::log(1.0 / in.delta)) +
                       160.0 / std::sqrt(T);
  return prefactor * paren;
}

/// Entropy-integral upper bound for depth-L axis-aligned trees over p features
/// and K arms: sqrt((2^L - 1) log p + 2^L log K) + (4/3) L^(1/4) sqrt(2^L - 1),
/// natural logarithms.
inline double tree_entropy_bound(int depth, int dim, int arms) {
  if (depth < 1) throw ValidationError("tree-class", "depth must be >= 1");
  if (dim < 1) throw ValidationError("tree-class", "dimension must be >= 1");
  if (arms < 2) throw ValidationError("tree-class", "arm count must be >= 2");
  const double leaves = std::pow(2.0, depth);
  const double internal = leaves - 1.0;
  const double root_term = std::sqrt(internal * std::log(static_cast<double>(dim)) +
                                     leaves * std::log(static_cast<double>(arms)));
  const double chain_term =
      (4.0 / 3.0) * std::pow(static_cast<double>(depth), 0.25) * std::sqrt(internal);
  return root_term + chain_term;
}

}  // namespace opl
