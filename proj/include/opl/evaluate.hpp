#pragma once

#include <Eigen/Dense>
#include <functional>
#include <utility>

#include "opl/agent.hpp"
#include "opl/env.hpp"
#include "opl/errors.hpp"
#include "opl/tree_search.hpp"

namespace opl {

/// Out-of-sample value and regret against the best-in-class reference.
struct RegretReport {
  double policy_value = 0.0;
  double best_value = 0.0;
  double regret = 0.0;
  int test_size = 0;
};

/// Mean true reward of the tree's chosen arms over the test set.
inline double policy_value(const TreePolicy& tree, const TestSet& test) {
  const int n = static_cast<int>(test.contexts.rows());
  if (n < 1) throw ValidationError("test-size", "empty test set");
  if (tree.max_feature() >= static_cast<int>(test.contexts.cols()))
    throw ValidationError("dimension-mismatch", "tree references features beyond the test set");
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += test.true_means(i, predict_row(tree, test.contexts, i));
  return total / n;
}

/// Mean reward of an arbitrary context->arm rule over the test set.
inline double policy_value(const std::function<int(const Eigen::VectorXd&)>& policy,
                           const TestSet& test) {
  const int n = static_cast<int>(test.contexts.rows());
  if (n < 1) throw ValidationError("test-size", "empty test set");
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const int a = policy(test.contexts.row(i).transpose());
    if (a < 0 || a >= static_cast<int>(test.true_means.cols()))
      throw ValidationError("arm-range", "policy returned an out-of-range arm");
    total += test.true_means(i, a);
  }
  return total / n;
}

/// Empirical best-in-class reference: the exact-search maximizer of the test
/// set's true-mean matrix, and its per-row value.
inline std::pair<TreePolicy, double> best_in_class(const TestSet& test, const TreeClassSpec& spec,
                                                   const SearchOptions& options = {}) {
  SearchResult res = exact_search(test.true_means, test.contexts, spec, options);
  return {std::move(res.tree), res.objective / static_cast<double>(test.contexts.rows())};
}

inline RegretReport regret_against(double value, double best_value, int test_size) {
  RegretReport r;
  r.policy_value = value;
  r.best_value = best_value;
  r.regret = best_value - value;
  r.test_size = test_size;
  return r;
}

inline RegretReport regret(const TreePolicy& tree, const TestSet& test,
                           const TreeClassSpec& spec) {
  const auto [best_tree, best_value] = best_in_class(test, spec);
  return regret_against(policy_value(tree, test), best_value,
                        static_cast<int>(test.contexts.rows()));
}

/// Regret of the collection agent frozen at evaluation time as its
/// posterior-mean greedy policy.
inline RegretReport agent_regret(const AgentState& agent, const TestSet& test,
                                 const TreeClassSpec& spec) {
  const auto [best_tree, best_value] = best_in_class(test, spec);
  const double value = policy_value(
      [&agent](const Eigen::VectorXd& x) { return agent.greedy_action(x); }, test);
  return regret_against(value, best_value, static_cast<int>(test.contexts.rows()));
}

/// Greedy policy of a frozen posterior-mean matrix (K x p), ties to the
/// lowest arm.
inline int greedy_from_means(const Eigen::MatrixXd& coefs, const Eigen::VectorXd& x) {
  int best = 0;
  double best_score = 0.0;
  for (int a = 0; a < coefs.rows(); ++a) {
    const double score = coefs.row(a).dot(x);
    if (a == 0 || score > best_score) {
      best = a;
      best_score = score;
    }
  }
  return best;
}

}  // namespace opl
