#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "opl/agent.hpp"
#include "opl/errors.hpp"

namespace opl {

/// Sequential per-arm ridge outcome model. Updates must arrive in strictly
/// increasing time order so that a prediction issued before update(t) depends
/// only on samples before t.
class NuisanceModel {
 public:
  NuisanceModel(int arms, int dim, double ridge = 1e-3, bool intercept = true)
      : arms_(arms), dim_(dim), intercept_(intercept) {
    if (arms < 1) throw ValidationError("nuisance-arms", "arm count must be >= 1");
    if (dim < 1) throw ValidationError("nuisance-dim", "dimension must be >= 1");
    if (ridge <= 0) throw ValidationError("nuisance-ridge", "ridge must be > 0");
    const int d = design_dim();
    gram_.assign(arms_, Eigen::MatrixXd::Identity(d, d) * ridge);
    moment_.assign(arms_, Eigen::VectorXd::Zero(d));
    coef_.assign(arms_, Eigen::VectorXd::Zero(d));
    fresh_.assign(arms_, true);
  }

  int arms() const { return arms_; }
  int dim() const { return dim_; }
  std::int64_t last_index() const { return last_t_; }

  /// Fitted means for every arm; with no history this is the prior mean 0.
  Eigen::VectorXd predict(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd xt = design(x);
    Eigen::VectorXd out(arms_);
    for (int a = 0; a < arms_; ++a) {
      refresh(a);
      out(a) = xt.dot(coef_[static_cast<std::size_t>(a)]);
    }
    return out;
  }

  /// Rank-one update of the chosen arm's statistics only.
  void update(const LoggedSample& sample) {
    if (sample.t <= last_t_)
      throw ValidationError("out-of-order",
                            "sample index " + std::to_string(sample.t) +
                                " not greater than last ingested " + std::to_string(last_t_));
    if (sample.arm < 0 || sample.arm >= arms_)
      throw ValidationError("arm-range", "arm index out of range");
    const Eigen::VectorXd xt = design(sample.context);
    const auto a = static_cast<std::size_t>(sample.arm);
    gram_[a].noalias() += xt * xt.transpose();
    moment_[a].noalias() += xt * sample.reward;
    fresh_[a] = false;
    last_t_ = sample.t;
  }

 private:
  int arms_;
  int dim_;
  bool intercept_;
  std::int64_t last_t_ = 0;
  std::vector<Eigen::MatrixXd> gram_;
  std::vector<Eigen::VectorXd> moment_;
  mutable std::vector<Eigen::VectorXd> coef_;
  mutable std::vector<bool> fresh_;

  int design_dim() const { return intercept_ ? dim_ + 1 : dim_; }

  Eigen::VectorXd design(const Eigen::VectorXd& x) const {
    if (static_cast<int>(x.size()) != dim_)
      throw ValidationError("dimension-mismatch", "context has wrong length");
    if (!intercept_) return x;
    Eigen::VectorXd xt(dim_ + 1);
    xt(0) = 1.0;
    xt.tail(dim_) = x;
    return xt;
  }

  void refresh(int arm) const {
    const auto i = static_cast<std::size_t>(arm);
    if (fresh_[i]) return;
    coef_[i] = gram_[i].ldlt().solve(moment_[i]);
    fresh_[i] = true;
  }
};

}  // namespace opl
