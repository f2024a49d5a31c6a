#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "opl/errors.hpp"
#include "opl/tree.hpp"

namespace opl {

struct SearchResult {
  TreePolicy tree;
  double objective = 0.0;
};

struct SearchOptions {
  enum class Strategy {
    kAuto,         // incremental sweep at depth 2 when it fits in memory
    kRecursive,    // plain root enumeration + recursion
    kIncremental,  // force the depth-2 incremental sweep
  };
  Strategy strategy = Strategy::kAuto;
  std::size_t memory_budget = std::size_t{512} << 20;
};

/// Fast leaf lookup for a row of a context matrix (dimensions already checked).
inline int predict_row(const TreePolicy& tree, const Eigen::MatrixXd& contexts, int row) {
  const auto& nodes = tree.nodes();
  int i = tree.root();
  while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    i = (contexts(row, n.feature) <= n.threshold) ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(i)].action;
}

/// Training objective of a tree: sum over rows of the score of the leaf arm.
inline double tree_objective(const TreePolicy& tree, const Eigen::MatrixXd& scores,
                             const Eigen::MatrixXd& contexts) {
  double total = 0.0;
  for (int t = 0; t < static_cast<int>(scores.rows()); ++t)
    total += scores(t, predict_row(tree, contexts, t));
  return total;
}

namespace detail {

// Objective comparisons treat values within this of the max as tied; ties are
// then broken by canonical order (feature, threshold, leaf actions).
inline constexpr double kTieTol = 1e-12;

// Exact max, then the first index whose value is within kTieTol of it.
inline int argmax_canonical(const double* v, int n) {
  double best = v[0];
  for (int i = 1; i < n; ++i) best = std::max(best, v[i]);
  for (int i = 0; i < n; ++i)
    if (v[i] >= best - kTieTol) return i;
  return n - 1;
}

// Candidate thresholds for one feature: -inf, midpoints of consecutive
// distinct sorted values, +inf. The grid is computed once from the full
// instance and shared by every level of the search.
inline std::vector<double> threshold_grid(const Eigen::MatrixXd& contexts, int feature) {
  std::vector<double> vals(static_cast<std::size_t>(contexts.rows()));
  for (int t = 0; t < static_cast<int>(contexts.rows()); ++t)
    vals[static_cast<std::size_t>(t)] = contexts(t, feature);
  std::sort(vals.begin(), vals.end());
  vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
  std::vector<double> grid;
  grid.reserve(vals.size() + 1);
  grid.push_back(-std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i + 1 < vals.size(); ++i)
    grid.push_back(std::midpoint(vals[i], vals[i + 1]));
  grid.push_back(std::numeric_limits<double>::infinity());
  return grid;
}

struct Instance {
  const Eigen::MatrixXd* scores = nullptr;
  const Eigen::MatrixXd* contexts = nullptr;
  int n = 0;
  int dim = 0;
  int arms = 0;
  std::vector<std::vector<double>> grid;  // per feature, ascending
  std::vector<std::vector<int>> pos;      // per feature: row -> first grid index >= value
  std::vector<std::vector<int>> order;    // per feature: rows sorted by (pos, row)
};

inline Instance make_instance(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& contexts,
                              int arms) {
  Instance inst;
  inst.scores = &scores;
  inst.contexts = &contexts;
  inst.n = static_cast<int>(scores.rows());
  inst.dim = static_cast<int>(contexts.cols());
  inst.arms = arms;
  inst.grid.resize(static_cast<std::size_t>(inst.dim));
  inst.pos.resize(static_cast<std::size_t>(inst.dim));
  inst.order.resize(static_cast<std::size_t>(inst.dim));
  for (int f = 0; f < inst.dim; ++f) {
    auto& g = inst.grid[static_cast<std::size_t>(f)];
    g = threshold_grid(contexts, f);
    auto& p = inst.pos[static_cast<std::size_t>(f)];
    p.resize(static_cast<std::size_t>(inst.n));
    for (int t = 0; t < inst.n; ++t)
      p[static_cast<std::size_t>(t)] =
          static_cast<int>(std::lower_bound(g.begin(), g.end(), contexts(t, f)) - g.begin());
    auto& ord = inst.order[static_cast<std::size_t>(f)];
    ord.resize(static_cast<std::size_t>(inst.n));
    std::iota(ord.begin(), ord.end(), 0);
    std::stable_sort(ord.begin(), ord.end(), [&p](int a, int b) {
      return p[static_cast<std::size_t>(a)] < p[static_cast<std::size_t>(b)];
    });
  }
  return inst;
}

struct Depth1Pick {
  double value = 0.0;
  int feature = 0;
  int grid_index = 0;
  int action_left = 0;
  int action_right = 0;
};

// Optimal (split, leaf pair) over one subset. Two passes: exact max first,
// then the first (feature, threshold) within tolerance; leaf actions by
// canonical argmax of the accumulated sums at that cut.
inline Depth1Pick depth1_search(const Instance& inst, const std::vector<int>& rows,
                                bool build_pick) {
  const int K = inst.arms;
  const Eigen::MatrixXd& S = *inst.scores;
  std::vector<double> tot(static_cast<std::size_t>(K), 0.0);
  for (int t : rows)
    for (int a = 0; a < K; ++a) tot[static_cast<std::size_t>(a)] += S(t, a);

  std::vector<double> cum(static_cast<std::size_t>(K));
  std::vector<int> sorted;
  auto sweep = [&](int f, auto&& visit) {
    sorted = rows;
    const auto& p = inst.pos[static_cast<std::size_t>(f)];
    std::stable_sort(sorted.begin(), sorted.end(), [&p](int a, int b) {
      return p[static_cast<std::size_t>(a)] < p[static_cast<std::size_t>(b)];
    });
    std::fill(cum.begin(), cum.end(), 0.0);
    const int m = static_cast<int>(inst.grid[static_cast<std::size_t>(f)].size());
    std::size_t ptr = 0;
    for (int j = 0; j < m; ++j) {
      while (ptr < sorted.size() && p[static_cast<std::size_t>(sorted[ptr])] <= j) {
        for (int a = 0; a < K; ++a) cum[static_cast<std::size_t>(a)] += S(sorted[ptr], a);
        ++ptr;
      }
      double left_best = cum[0];
      double right_best = tot[0] - cum[0];
      for (int a = 1; a < K; ++a) {
        left_best = std::max(left_best, cum[static_cast<std::size_t>(a)]);
        right_best = std::max(right_best, tot[static_cast<std::size_t>(a)] -
                                              cum[static_cast<std::size_t>(a)]);
      }
      if (!visit(j, left_best + right_best)) return;
    }
  };

  double best = -std::numeric_limits<double>::infinity();
  for (int f = 0; f < inst.dim; ++f)
    sweep(f, [&best](int, double v) {
      best = std::max(best, v);
      return true;
    });

  Depth1Pick pick;
  pick.value = best;
  if (!build_pick) return pick;

  for (int f = 0; f < inst.dim; ++f) {
    bool done = false;
    sweep(f, [&](int j, double v) {
      if (v < best - kTieTol) return true;
      pick.feature = f;
      pick.grid_index = j;
      pick.action_left = argmax_canonical(cum.data(), K);
      std::vector<double> rem(static_cast<std::size_t>(K));
      for (int a = 0; a < K; ++a)
        rem[static_cast<std::size_t>(a)] =
            tot[static_cast<std::size_t>(a)] - cum[static_cast<std::size_t>(a)];
      pick.action_right = argmax_canonical(rem.data(), K);
      done = true;
      return false;
    });
    if (done) break;
  }
  return pick;
}

struct RecResult {
  TreePolicy tree;
  double value = 0.0;
};

inline void partition_rows(const Instance& inst, const std::vector<int>& rows, int f, int j,
                           std::vector<int>& left, std::vector<int>& right) {
  left.clear();
  right.clear();
  const auto& p = inst.pos[static_cast<std::size_t>(f)];
  for (int t : rows) {
    if (p[static_cast<std::size_t>(t)] <= j)
      left.push_back(t);
    else
      right.push_back(t);
  }
}

inline double rec_value(const Instance& inst, const std::vector<int>& rows, int depth) {
  if (depth == 1) return depth1_search(inst, rows, false).value;
  double best = -std::numeric_limits<double>::infinity();
  std::vector<int> left, right;
  for (int f = 0; f < inst.dim; ++f) {
    const int m = static_cast<int>(inst.grid[static_cast<std::size_t>(f)].size());
    for (int j = 0; j < m; ++j) {
      partition_rows(inst, rows, f, j, left, right);
      best = std::max(best, rec_value(inst, left, depth - 1) + rec_value(inst, right, depth - 1));
    }
  }
  return best;
}

inline RecResult rec_build(const Instance& inst, const std::vector<int>& rows, int depth) {
  if (depth == 1) {
    const Depth1Pick pick = depth1_search(inst, rows, true);
    TreePolicy tree = TreePolicy::split(
        pick.feature,
        inst.grid[static_cast<std::size_t>(pick.feature)][static_cast<std::size_t>(pick.grid_index)],
        TreePolicy::leaf(pick.action_left), TreePolicy::leaf(pick.action_right));
    return {std::move(tree), pick.value};
  }
  const double best = rec_value(inst, rows, depth);
  std::vector<int> left, right;
  for (int f = 0; f < inst.dim; ++f) {
    const int m = static_cast<int>(inst.grid[static_cast<std::size_t>(f)].size());
    for (int j = 0; j < m; ++j) {
      partition_rows(inst, rows, f, j, left, right);
      const double v =
          rec_value(inst, left, depth - 1) + rec_value(inst, right, depth - 1);
      if (v < best - kTieTol) continue;
      RecResult l = rec_build(inst, left, depth - 1);
      RecResult r = rec_build(inst, right, depth - 1);
      TreePolicy tree = TreePolicy::split(
          f, inst.grid[static_cast<std::size_t>(f)][static_cast<std::size_t>(j)], l.tree, r.tree);
      return {std::move(tree), best};
    }
  }
  throw ValidationError("search-internal", "no root candidate reached the optimum");
}

// Segment tree over the candidate positions of one feature for one (growing or
// shrinking) row subset. Each position j carries the vector L(j)[a] = summed
// scores of subset rows with value <= grid[j]; a row insertion is a suffix add.
// Nodes store max over their range of L[aL] - L[aR] for every action pair, so
// the best single split through this feature is max over pairs of
// node_max + tot[aR].
class PairTree {
 public:
  void init(int positions, int arms) {
    m_ = positions;
    k_ = arms;
    diff_.assign(static_cast<std::size_t>(4 * m_) * kk(), 0.0);
    lazy_.assign(static_cast<std::size_t>(4 * m_) * static_cast<std::size_t>(k_), 0.0);
    base_.assign(static_cast<std::size_t>(m_) * static_cast<std::size_t>(k_), 0.0);
  }

  void reset_empty() {
    std::fill(diff_.begin(), diff_.end(), 0.0);
    std::fill(lazy_.begin(), lazy_.end(), 0.0);
    std::fill(base_.begin(), base_.end(), 0.0);
  }

  // leaf_base holds positions*arms prefix sums of the initial full subset.
  void reset_full(const std::vector<double>& leaf_base) {
    std::fill(lazy_.begin(), lazy_.end(), 0.0);
    base_ = leaf_base;
    build(1, 0, m_);
  }

  void suffix_add(int first_pos, const double* delta) { add(1, 0, m_, first_pos, delta); }

  double max_pair(const double* tot) const {
    const double* d = diff_.data() + kk();
    const double* lz = lazy_.data() + static_cast<std::size_t>(k_);
    double best = -std::numeric_limits<double>::infinity();
    for (int al = 0; al < k_; ++al)
      for (int ar = 0; ar < k_; ++ar)
        best = std::max(best, d[al * k_ + ar] + lz[al] - lz[ar] + tot[ar]);
    return best;
  }

  // First position whose own pair value reaches target; the caller guarantees
  // the root max does.
  int leftmost_at_least(double target, const double* tot) const {
    std::vector<double> lam(lazy_.begin() + k_, lazy_.begin() + 2 * static_cast<std::ptrdiff_t>(k_));
    int node = 1, l = 0, r = m_;
    while (r - l > 1) {
      const int mid = (l + r) / 2;
      const int lc = 2 * node;
      double left_best = -std::numeric_limits<double>::infinity();
      const double* d = diff_.data() + static_cast<std::size_t>(lc) * kk();
      const double* lz = lazy_.data() + static_cast<std::size_t>(lc) * static_cast<std::size_t>(k_);
      for (int al = 0; al < k_; ++al)
        for (int ar = 0; ar < k_; ++ar)
          left_best = std::max(left_best,
                               d[al * k_ + ar] + (lam[static_cast<std::size_t>(al)] + lz[al]) -
                                   (lam[static_cast<std::size_t>(ar)] + lz[ar]) + tot[ar]);
      int next = lc;
      if (left_best < target) {
        next = lc + 1;
        l = mid;
      } else {
        r = mid;
      }
      const double* nlz =
          lazy_.data() + static_cast<std::size_t>(next) * static_cast<std::size_t>(k_);
      for (int a = 0; a < k_; ++a) lam[static_cast<std::size_t>(a)] += nlz[a];
      node = next;
    }
    return l;
  }

  // Current L(pos); out has arms entries.
  void leaf_values(int pos, double* out) const {
    for (int a = 0; a < k_; ++a)
      out[a] = base_[static_cast<std::size_t>(pos) * static_cast<std::size_t>(k_) +
                     static_cast<std::size_t>(a)];
    int node = 1, l = 0, r = m_;
    while (true) {
      const double* lz =
          lazy_.data() + static_cast<std::size_t>(node) * static_cast<std::size_t>(k_);
      for (int a = 0; a < k_; ++a) out[a] += lz[a];
      if (r - l == 1) break;
      const int mid = (l + r) / 2;
      if (pos < mid) {
        node = 2 * node;
        r = mid;
      } else {
        node = 2 * node + 1;
        l = mid;
      }
    }
  }

  static std::size_t bytes_needed(int positions, int arms) {
    const std::size_t nodes = static_cast<std::size_t>(4) * static_cast<std::size_t>(positions);
    return sizeof(double) * (nodes * static_cast<std::size_t>(arms) * static_cast<std::size_t>(arms) +
                             nodes * static_cast<std::size_t>(arms) +
                             static_cast<std::size_t>(positions) * static_cast<std::size_t>(arms));
  }

 private:
  int m_ = 0;
  int k_ = 0;
  std::vector<double> diff_;
  std::vector<double> lazy_;
  std::vector<double> base_;

  std::size_t kk() const { return static_cast<std::size_t>(k_) * static_cast<std::size_t>(k_); }

  void build(int node, int l, int r) {
    double* d = diff_.data() + static_cast<std::size_t>(node) * kk();
    if (r - l == 1) {
      const double* b = base_.data() + static_cast<std::size_t>(l) * static_cast<std::size_t>(k_);
      for (int al = 0; al < k_; ++al)
        for (int ar = 0; ar < k_; ++ar) d[al * k_ + ar] = b[al] - b[ar];
      return;
    }
    const int mid = (l + r) / 2;
    build(2 * node, l, mid);
    build(2 * node + 1, mid, r);
    const double* dl = diff_.data() + static_cast<std::size_t>(2 * node) * kk();
    const double* dr = diff_.data() + static_cast<std::size_t>(2 * node + 1) * kk();
    for (std::size_t e = 0; e < kk(); ++e) d[e] = std::max(dl[e], dr[e]);
  }

  void recombine(int node) {
    double* d = diff_.data() + static_cast<std::size_t>(node) * kk();
    const int lc = 2 * node, rc = 2 * node + 1;
    const double* dl = diff_.data() + static_cast<std::size_t>(lc) * kk();
    const double* dr = diff_.data() + static_cast<std::size_t>(rc) * kk();
    const double* ll = lazy_.data() + static_cast<std::size_t>(lc) * static_cast<std::size_t>(k_);
    const double* lr = lazy_.data() + static_cast<std::size_t>(rc) * static_cast<std::size_t>(k_);
    for (int al = 0; al < k_; ++al)
      for (int ar = 0; ar < k_; ++ar)
        d[al * k_ + ar] = std::max(dl[al * k_ + ar] + ll[al] - ll[ar],
                                   dr[al * k_ + ar] + lr[al] - lr[ar]);
  }

  void add(int node, int l, int r, int first, const double* delta) {
    if (first >= r) return;
    if (first <= l) {
      double* lz = lazy_.data() + static_cast<std::size_t>(node) * static_cast<std::size_t>(k_);
      for (int a = 0; a < k_; ++a) lz[a] += delta[a];
      return;
    }
    const int mid = (l + r) / 2;
    add(2 * node, l, mid, first, delta);
    add(2 * node + 1, mid, r, first, delta);
    recombine(node);
  }
};

inline std::size_t incremental_bytes(const Instance& inst) {
  std::size_t total = 0;
  for (int f = 0; f < inst.dim; ++f) {
    const int m = static_cast<int>(inst.grid[static_cast<std::size_t>(f)].size());
    total += 2 * (PairTree::bytes_needed(m, inst.arms) +
                  sizeof(double) * static_cast<std::size_t>(m) * static_cast<std::size_t>(inst.arms));
  }
  return total;
}

// Canonical depth-1 pick for the subset a PairTree bank currently represents.
inline Depth1Pick extract_depth1(const Instance& inst, std::vector<PairTree>& trees,
                                 const std::vector<double>& tot) {
  const int K = inst.arms;
  std::vector<double> by_feature(static_cast<std::size_t>(inst.dim));
  double best = -std::numeric_limits<double>::infinity();
  for (int f = 0; f < inst.dim; ++f) {
    by_feature[static_cast<std::size_t>(f)] = trees[static_cast<std::size_t>(f)].max_pair(tot.data());
    best = std::max(best, by_feature[static_cast<std::size_t>(f)]);
  }
  Depth1Pick pick;
  pick.value = best;
  for (int f = 0; f < inst.dim; ++f) {
    if (by_feature[static_cast<std::size_t>(f)] < best - kTieTol) continue;
    pick.feature = f;
    pick.grid_index =
        trees[static_cast<std::size_t>(f)].leftmost_at_least(best - kTieTol, tot.data());
    std::vector<double> left(static_cast<std::size_t>(K)), right(static_cast<std::size_t>(K));
    trees[static_cast<std::size_t>(f)].leaf_values(pick.grid_index, left.data());
    for (int a = 0; a < K; ++a)
      right[static_cast<std::size_t>(a)] =
          tot[static_cast<std::size_t>(a)] - left[static_cast<std::size_t>(a)];
    pick.action_left = argmax_canonical(left.data(), K);
    pick.action_right = argmax_canonical(right.data(), K);
    return pick;
  }
  throw ValidationError("search-internal", "no feature reached the subset optimum");
}

// Depth-2 search with an incremental root sweep: per root feature, rows move
// left one sorted block at a time while per-feature PairTrees maintain both
// children's exact depth-1 optima.
inline RecResult search_depth2_incremental(const Instance& inst) {
  const int K = inst.arms;
  const Eigen::MatrixXd& S = *inst.scores;

  std::vector<std::vector<double>> full_prefix(static_cast<std::size_t>(inst.dim));
  for (int f = 0; f < inst.dim; ++f) {
    const auto& p = inst.pos[static_cast<std::size_t>(f)];
    const auto& ord = inst.order[static_cast<std::size_t>(f)];
    const int m = static_cast<int>(inst.grid[static_cast<std::size_t>(f)].size());
    auto& pre = full_prefix[static_cast<std::size_t>(f)];
    pre.assign(static_cast<std::size_t>(m) * static_cast<std::size_t>(K), 0.0);
    std::vector<double> cum(static_cast<std::size_t>(K), 0.0);
    std::size_t ptr = 0;
    for (int j = 0; j < m; ++j) {
      while (ptr < ord.size() && p[static_cast<std::size_t>(ord[ptr])] <= j) {
        for (int a = 0; a < K; ++a) cum[static_cast<std::size_t>(a)] += S(ord[ptr], a);
        ++ptr;
      }
      for (int a = 0; a < K; ++a)
        pre[static_cast<std::size_t>(j) * static_cast<std::size_t>(K) +
            static_cast<std::size_t>(a)] = cum[static_cast<std::size_t>(a)];
    }
  }

  std::vector<double> tot_all(static_cast<std::size_t>(K), 0.0);
  for (int t = 0; t < inst.n; ++t)
    for (int a = 0; a < K; ++a) tot_all[static_cast<std::size_t>(a)] += S(t, a);

  std::vector<PairTree> left(static_cast<std::size_t>(inst.dim)),
      right(static_cast<std::size_t>(inst.dim));
  for (int f = 0; f < inst.dim; ++f) {
    const int m = static_cast<int>(inst.grid[static_cast<std::size_t>(f)].size());
    left[static_cast<std::size_t>(f)].init(m, K);
    right[static_cast<std::size_t>(f)].init(m, K);
  }

  std::vector<double> tot_left(static_cast<std::size_t>(K)),
      tot_right(static_cast<std::size_t>(K));
  std::vector<double> srow(static_cast<std::size_t>(K)), nrow(static_cast<std::size_t>(K));

  auto reset_bank = [&]() {
    for (int f2 = 0; f2 < inst.dim; ++f2) {
      left[static_cast<std::size_t>(f2)].reset_empty();
      right[static_cast<std::size_t>(f2)].reset_full(full_prefix[static_cast<std::size_t>(f2)]);
    }
    std::fill(tot_left.begin(), tot_left.end(), 0.0);
    tot_right = tot_all;
  };

  auto move_row = [&](int row) {
    for (int a = 0; a < K; ++a) {
      srow[static_cast<std::size_t>(a)] = S(row, a);
      nrow[static_cast<std::size_t>(a)] = -srow[static_cast<std::size_t>(a)];
    }
    for (int f2 = 0; f2 < inst.dim; ++f2) {
      const int at = inst.pos[static_cast<std::size_t>(f2)][static_cast<std::size_t>(row)];
      left[static_cast<std::size_t>(f2)].suffix_add(at, srow.data());
      right[static_cast<std::size_t>(f2)].suffix_add(at, nrow.data());
    }
    for (int a = 0; a < K; ++a) {
      tot_left[static_cast<std::size_t>(a)] += srow[static_cast<std::size_t>(a)];
      tot_right[static_cast<std::size_t>(a)] -= srow[static_cast<std::size_t>(a)];
    }
  };

  auto side_value = [&](std::vector<PairTree>& bank, const std::vector<double>& tot) {
    double best = -std::numeric_limits<double>::infinity();
    for (int f2 = 0; f2 < inst.dim; ++f2)
      best = std::max(best, bank[static_cast<std::size_t>(f2)].max_pair(tot.data()));
    return best;
  };

  std::vector<std::vector<double>> vals(static_cast<std::size_t>(inst.dim));
  double best = -std::numeric_limits<double>::infinity();
  for (int f = 0; f < inst.dim; ++f) {
    const auto& p = inst.pos[static_cast<std::size_t>(f)];
    const auto& ord = inst.order[static_cast<std::size_t>(f)];
    const int m = static_cast<int>(inst.grid[static_cast<std::size_t>(f)].size());
    vals[static_cast<std::size_t>(f)].resize(static_cast<std::size_t>(m));
    reset_bank();
    std::size_t ptr = 0;
    for (int j = 0; j < m; ++j) {
      while (ptr < ord.size() && p[static_cast<std::size_t>(ord[ptr])] <= j) {
        move_row(ord[ptr]);
        ++ptr;
      }
      const double v = side_value(left, tot_left) + side_value(right, tot_right);
      vals[static_cast<std::size_t>(f)][static_cast<std::size_t>(j)] = v;
      best = std::max(best, v);
    }
  }

  int root_f = -1, root_j = -1;
  for (int f = 0; f < inst.dim && root_f < 0; ++f) {
    const auto& vf = vals[static_cast<std::size_t>(f)];
    for (int j = 0; j < static_cast<int>(vf.size()); ++j) {
      if (vf[static_cast<std::size_t>(j)] >= best - kTieTol) {
        root_f = f;
        root_j = j;
        break;
      }
    }
  }

  // Replay the chosen root feature's sweep up to the chosen cut so the banks
  // hold bit-identical state, then extract both children.
  reset_bank();
  {
    const auto& p = inst.pos[static_cast<std::size_t>(root_f)];
    const auto& ord = inst.order[static_cast<std::size_t>(root_f)];
    std::size_t ptr = 0;
    while (ptr < ord.size() && p[static_cast<std::size_t>(ord[ptr])] <= root_j) {
      move_row(ord[ptr]);
      ++ptr;
    }
  }
  const Depth1Pick pl = extract_depth1(inst, left, tot_left);
  const Depth1Pick pr = extract_depth1(inst, right, tot_right);

  auto subtree = [&](const Depth1Pick& pick) {
    return TreePolicy::split(
        pick.feature,
        inst.grid[static_cast<std::size_t>(pick.feature)][static_cast<std::size_t>(pick.grid_index)],
        TreePolicy::leaf(pick.action_left), TreePolicy::leaf(pick.action_right));
  };
  TreePolicy tree = TreePolicy::split(
      root_f, inst.grid[static_cast<std::size_t>(root_f)][static_cast<std::size_t>(root_j)],
      subtree(pl), subtree(pr));
  return {std::move(tree), best};
}

inline void validate_search_inputs(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& contexts,
                                   const TreeClassSpec& spec) {
  spec.validate();
  if (scores.rows() < 1) throw ValidationError("search-empty", "need at least one row");
  if (scores.rows() != contexts.rows())
    throw ValidationError("dimension-mismatch", "scores and contexts row counts differ");
  if (static_cast<int>(scores.cols()) != spec.arms)
    throw ValidationError("dimension-mismatch", "score columns must equal arm count");
  if (static_cast<int>(contexts.cols()) != spec.dim)
    throw ValidationError("dimension-mismatch", "context columns must equal dimension");
  if (!scores.allFinite()) throw ValidationError("scores-finite", "scores must be finite");
  if (!contexts.allFinite()) throw ValidationError("contexts-finite", "contexts must be finite");
}

}  // namespace detail

/// Exact maximization of sum_t scores[t][pi(x_t)] over complete depth-L trees
/// whose thresholds come from the per-feature midpoint grids. Ties within
/// 1e-12 resolve to the smallest feature, then threshold, then leaf actions.
inline SearchResult exact_search(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& contexts,
                                 const TreeClassSpec& spec, const SearchOptions& options = {}) {
  detail::validate_search_inputs(scores, contexts, spec);
  const detail::Instance inst = detail::make_instance(scores, contexts, spec.arms);

  detail::RecResult res;
  bool incremental = false;
  if (spec.depth == 2) {
    switch (options.strategy) {
      case SearchOptions::Strategy::kIncremental:
        incremental = true;
        break;
      case SearchOptions::Strategy::kRecursive:
        incremental = false;
        break;
      case SearchOptions::Strategy::kAuto:
        incremental = detail::incremental_bytes(inst) <= options.memory_budget;
        break;
    }
  }
  if (incremental) {
    res = detail::search_depth2_incremental(inst);
  } else {
    std::vector<int> all(static_cast<std::size_t>(inst.n));
    std::iota(all.begin(), all.end(), 0);
    res = detail::rec_build(inst, all, spec.depth);
  }
  const double objective = tree_objective(res.tree, scores, contexts);
  return {std::move(res.tree), objective};
}

/// Exhaustive enumeration over the same tree class, same grids, same tie
/// rules; every candidate is valued by direct row loops. Guarded to small
/// instances; this is the test oracle for exact_search.
inline SearchResult brute_oracle(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& contexts,
                                 const TreeClassSpec& spec) {
  detail::validate_search_inputs(scores, contexts, spec);
  const int T = static_cast<int>(scores.rows());
  if (T > 40 || spec.dim > 3 || spec.depth > 2 || spec.arms > 3)
    throw ValidationError("oracle-guard",
                          "brute_oracle requires T<=40, p<=3, L<=2, K<=3");

  const int K = spec.arms;
  std::vector<std::vector<double>> grid(static_cast<std::size_t>(spec.dim));
  for (int f = 0; f < spec.dim; ++f)
    grid[static_cast<std::size_t>(f)] = detail::threshold_grid(contexts, f);

  struct Pick {
    double value = 0.0;
    int feature = 0;
    int grid_index = 0;
    int action_left = 0;
    int action_right = 0;
  };

  auto depth1 = [&](const std::vector<int>& rows, bool build_pick) -> Pick {
    std::vector<double> tot(static_cast<std::size_t>(K), 0.0);
    for (int t : rows)
      for (int a = 0; a < K; ++a) tot[static_cast<std::size_t>(a)] += scores(t, a);
    std::vector<double> cut(static_cast<std::size_t>(K));
    auto value_at = [&](int f, double th) {
      std::fill(cut.begin(), cut.end(), 0.0);
      for (int t : rows)
        if (contexts(t, f) <= th)
          for (int a = 0; a < K; ++a) cut[static_cast<std::size_t>(a)] += scores(t, a);
      double l = cut[0], r = tot[0] - cut[0];
      for (int a = 1; a < K; ++a) {
        l = std::max(l, cut[static_cast<std::size_t>(a)]);
        r = std::max(r, tot[static_cast<std::size_t>(a)] - cut[static_cast<std::size_t>(a)]);
      }
      return l + r;
    };
    double best = -std::numeric_limits<double>::infinity();
    for (int f = 0; f < spec.dim; ++f)
      for (double th : grid[static_cast<std::size_t>(f)]) best = std::max(best, value_at(f, th));
    Pick pick;
    pick.value = best;
    if (!build_pick) return pick;
    for (int f = 0; f < spec.dim; ++f) {
      const auto& g = grid[static_cast<std::size_t>(f)];
      for (int j = 0; j < static_cast<int>(g.size()); ++j) {
        if (value_at(f, g[static_cast<std::size_t>(j)]) < best - detail::kTieTol) continue;
        pick.feature = f;
        pick.grid_index = j;
        std::fill(cut.begin(), cut.end(), 0.0);
        for (int t : rows)
          if (contexts(t, f) <= g[static_cast<std::size_t>(j)])
            for (int a = 0; a < K; ++a) cut[static_cast<std::size_t>(a)] += scores(t, a);
        pick.action_left = detail::argmax_canonical(cut.data(), K);
        std::vector<double> rem(static_cast<std::size_t>(K));
        for (int a = 0; a < K; ++a)
          rem[static_cast<std::size_t>(a)] =
              tot[static_cast<std::size_t>(a)] - cut[static_cast<std::size_t>(a)];
        pick.action_right = detail::argmax_canonical(rem.data(), K);
        return pick;
      }
    }
    return pick;
  };

  auto pick_tree = [&](const Pick& pick) {
    return TreePolicy::split(
        pick.feature,
        grid[static_cast<std::size_t>(pick.feature)][static_cast<std::size_t>(pick.grid_index)],
        TreePolicy::leaf(pick.action_left), TreePolicy::leaf(pick.action_right));
  };

  std::vector<int> all(static_cast<std::size_t>(T));
  std::iota(all.begin(), all.end(), 0);

  TreePolicy tree;
  if (spec.depth == 1) {
    tree = pick_tree(depth1(all, true));
  } else {
    auto split_rows = [&](int f, double th, std::vector<int>& l, std::vector<int>& r) {
      l.clear();
      r.clear();
      for (int t = 0; t < T; ++t)
        (contexts(t, f) <= th ? l : r).push_back(t);
    };
    std::vector<int> l, r;
    double best = -std::numeric_limits<double>::infinity();
    for (int f = 0; f < spec.dim; ++f)
      for (double th : grid[static_cast<std::size_t>(f)]) {
        split_rows(f, th, l, r);
        best = std::max(best, depth1(l, false).value + depth1(r, false).value);
      }
    bool found = false;
    for (int f = 0; f < spec.dim && !found; ++f) {
      const auto& g = grid[static_cast<std::size_t>(f)];
      for (int j = 0; j < static_cast<int>(g.size()) && !found; ++j) {
        split_rows(f, g[static_cast<std::size_t>(j)], l, r);
        if (depth1(l, false).value + depth1(r, false).value < best - detail::kTieTol) continue;
        tree = TreePolicy::split(f, g[static_cast<std::size_t>(j)], pick_tree(depth1(l, true)),
                                 pick_tree(depth1(r, true)));
        found = true;
      }
    }
  }
  const double objective = tree_objective(tree, scores, contexts);
  return {std::move(tree), objective};
}

}  // namespace opl
