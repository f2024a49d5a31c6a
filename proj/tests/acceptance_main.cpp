// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "opl/agent.hpp"
#include "opl/aipw.hpp"
#include "opl/env.hpp"
#include "opl/evaluate.hpp"
#include "opl/experiment.hpp"
#include "opl/nuisance.hpp"
#include "opl/tree_search.hpp"

namespace {

int failures = 0;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void report(int num, const std::string& name, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %d: %s%s%s\n", ok ? "PASS" : "FAIL", num, name.c_str(),
              detail.empty() ? "" : " | ", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

// ---- 1. tree-search exactness against the brute oracle ---------------------
void criterion_tree_exactness() {
  const auto start = Clock::now();
  std::mt19937_64 rng(20240501);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  int mismatched = 0;
  for (int it = 0; it < 200; ++it) {
    const int rows = 1 + static_cast<int>(rng() % 30);
    const int dim = 1 + static_cast<int>(rng() % 3);
    const int arms = 1 + static_cast<int>(rng() % 3);
    const int depth = 1 + static_cast<int>(rng() % 2);
    Eigen::MatrixXd scores(rows, arms), contexts(rows, dim);
    for (int t = 0; t < rows; ++t) {
      for (int a = 0; a < arms; ++a) scores(t, a) = gauss(rng);
      for (int c = 0; c < dim; ++c)
        contexts(t, c) = (it % 2 == 0) ? unif(rng) : static_cast<double>(rng() % 4);
    }
    const opl::TreeClassSpec spec{depth, dim, arms};
    const opl::SearchResult mine = opl::exact_search(scores, contexts, spec);
    const opl::SearchResult oracle = opl::brute_oracle(scores, contexts, spec);
    if (mine.objective != oracle.objective || mine.tree.text() != oracle.tree.text())
      ++mismatched;
  }
  const double secs = seconds_since(start);
  report(1, "tree-search exactness vs brute oracle", mismatched == 0 && secs < 60.0,
         fmt("200 instances, %d mismatches, %.1f s", mismatched, secs));
}

// ---- 2. conditional unbiasedness of the AIPW element ------------------------
void criterion_unbiasedness() {
  const auto start = Clock::now();
  Eigen::VectorXd mu(3), muhat(3), prop(3);
  mu << 1.0, -0.5, 0.25;
  muhat << -2.0, 3.0, 0.5;  // deliberately wrong plug-in
  prop << 0.05, 0.35, 0.60;
  const int draws = 100000;
  std::mt19937_64 rng(424242);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.7);
  Eigen::MatrixXd gammas(draws, 3);
  opl::LoggedSample s;
  s.t = 1;
  s.context = Eigen::VectorXd::Zero(1);
  for (int i = 0; i < draws; ++i) {
    const double u = unif(rng);
    const int arm = (u < prop(0)) ? 0 : (u < prop(0) + prop(1) ? 1 : 2);
    s.arm = arm;
    s.reward = mu(arm) + noise(rng);
    s.propensity = prop(arm);
    gammas.row(i) = opl::aipw_elements(s, muhat).transpose();
  }
  bool ok = true;
  double worst = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double mean = gammas.col(a).mean();
    const double sd = std::sqrt((gammas.col(a).array() - mean).square().sum() / (draws - 1));
    const double z = std::abs(mean - mu(a)) / (sd / std::sqrt(static_cast<double>(draws)));
    worst = std::max(worst, z);
    ok = ok && (z <= 4.0);
  }
  const double secs = seconds_since(start);
  report(2, "conditional unbiasedness of AIPW elements", ok && secs < 10.0,
         fmt("1e5 draws, worst |z| = %.2f (limit 4), %.1f s", worst, secs));
}

// ---- 3. floor correctness over long collection runs -------------------------
void criterion_floor() {
  bool ok = true;
  std::string detail;
  for (const int arms : {2, 5}) {
    const opl::FloorSchedule sched(0.5, arms);
    opl::AgentState agent(arms, 3);
    opl::Rng rng(7 + arms);
    std::uniform_real_distribution<double> unif(-2.0, 2.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    double worst_sum = 0.0, worst_floor = 0.0;
    bool replay_ok = true;
    for (std::int64_t t = 1; t <= 10000; ++t) {
      Eigen::VectorXd x(3), rewards(arms);
      for (int c = 0; c < 3; ++c) x(c) = unif(rng);
      for (int a = 0; a < arms; ++a) rewards(a) = gauss(rng);
      const opl::StepRecord rec = opl::step_detailed(agent, x, rewards, t, sched, rng);
      worst_sum = std::max(worst_sum, std::abs(rec.floored.sum() - 1.0));
      const double g = sched.floor(t);
      worst_floor = std::max(worst_floor, g - rec.floored.minCoeff());
      replay_ok = replay_ok && (rec.sample.propensity == rec.floored(rec.sample.arm));
    }
    const bool pass = worst_sum < 1e-9 && worst_floor <= 0.0 && replay_ok;
    ok = ok && pass;
    detail += fmt("K=%d: sum err %.1e, floor slack %.1e, replay %s; ", arms, worst_sum,
                  -worst_floor, replay_ok ? "exact" : "BROKEN");
  }
  report(3, "probability floors over 1e4 collection steps", ok, detail);
}

// ---- 4. optimal weights match a bisection oracle -----------------------------
void criterion_kkt() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd g(50);
    double level = 1.0;
    for (int t = 0; t < 50; ++t) {
      level = std::min(level, unif(rng));
      g(t) = level;
    }
    // bisection on the smallest feasible ratio R; the unique feasible point is
    // h_t = R* g_t
    double lo = 0.0, hi = 1.0;
    const auto feasible = [&](double r) { return (r * g.array()).sum() >= 1.0; };
    while (!feasible(hi)) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (feasible(mid) ? hi : lo) = mid;
    }
    const Eigen::VectorXd oracle = hi * g;
    worst = std::max(worst, (opl::optimal_weights(g) - oracle).cwiseAbs().maxCoeff());
  }
  report(4, "optimal weights match the convex-program oracle", worst < 1e-6,
         fmt("20 sequences, max deviation %.2e (limit 1e-6)", worst));
}

// ---- 5. synthetic qualitative replication ------------------------------------
void criterion_synthetic() {
  const auto start = Clock::now();
  opl::ExperimentConfig cfg;
  cfg.alpha = 0.5;
  cfg.depth = 2;
  cfg.horizons = {1000, 10000};
  cfg.replications = 50;
  cfg.test_size = 100000;
  cfg.base_seed = 20240601;
  const std::vector<opl::ResultRow> rows = opl::run_experiment(cfg);

  std::map<std::pair<std::string, int>, std::vector<double>> regrets;
  for (const auto& r : rows) regrets[{r.scheme, r.horizon}].push_back(r.regret);
  const auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  const auto var = [&](const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
  };

  const double agent10k = mean(regrets[{"agent", 10000}]);
  const bool a_ok = agent10k > 0.15;

  bool b_ok = true;
  for (const std::string scheme : {"uniform", "pow0.25", "pow0.5", "pow1"})
    b_ok = b_ok && mean(regrets[{scheme, 10000}]) < agent10k;

  const auto& opt = regrets[{"pow0.5", 10000}];
  const auto& twice = regrets[{"pow1", 10000}];
  const double gap = mean(twice) - mean(opt);
  const double pooled_se =
      std::sqrt(var(opt) / static_cast<double>(opt.size()) +
                var(twice) / static_cast<double>(twice.size()));
  const bool c_ok = mean(opt) <= mean(twice) && gap > pooled_se;

  bool d_ok = true;
  for (const std::string scheme : {"uniform", "pow0.25", "pow0.5"})
    d_ok = d_ok && mean(regrets[{scheme, 10000}]) < mean(regrets[{scheme, 1000}]);

  const double secs = seconds_since(start);
  report(5, "synthetic replication: orderings and decay", a_ok && b_ok && c_ok && d_ok,
         fmt("agent %.3f (a:%s); means u=%.3f p.25=%.3f p.5=%.3f p1=%.3f (b:%s); "
             "gap %.3f vs SE %.3f (c:%s); decay %s; %.0f s",
             agent10k, a_ok ? "ok" : "FAIL", mean(regrets[{"uniform", 10000}]),
             mean(regrets[{"pow0.25", 10000}]), mean(opt), mean(twice), b_ok ? "ok" : "FAIL",
             gap, pooled_se, c_ok ? "ok" : "FAIL", d_ok ? "ok" : "FAIL", secs));
}

// ---- 6. rate-calculator scaling ----------------------------------------------
void criterion_rate() {
  const auto bound_at = [](int horizon) {
    opl::RegretBoundInputs in;
    in.outcome_bound = 3.0;
    in.delta = 0.05;
    in.entropy = 5.21;
    in.g.resize(horizon);
    for (int t = 1; t <= horizon; ++t) in.g(t - 1) = std::pow(static_cast<double>(t), -0.25);
    in.h = in.g;
    return opl::regret_bound(in);
  };
  const double ratio = bound_at(4000000) / bound_at(1000000);
  const double target = std::pow(4.0, 0.25 - 0.5);
  const double rel = std::abs(ratio / target - 1.0);
  report(6, "regret-bound ratio tracks 4^(alpha-1/2)", rel < 0.01,
         fmt("ratio %.6f vs %.6f, rel err %.4f%%", ratio, target, 100.0 * rel));
}

// ---- 7. nuisance equivalence ---------------------------------------------------
void criterion_nuisance() {
  std::mt19937_64 rng(31337);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int horizon = 10 + static_cast<int>(rng() % 60);
    const double ridge = 1e-3;
    opl::NuisanceModel model(2, 3, ridge, true);
    std::vector<opl::LoggedSample> seen;
    for (int t = 1; t <= horizon; ++t) {
      opl::LoggedSample s;
      s.t = t;
      s.context.resize(3);
      for (int c = 0; c < 3; ++c) s.context(c) = gauss(rng);
      s.arm = static_cast<int>(rng() % 2);
      s.reward = gauss(rng);
      s.propensity = 0.5;
      seen.push_back(s);
      model.update(s);
    }
    Eigen::VectorXd probe(3);
    for (int c = 0; c < 3; ++c) probe(c) = gauss(rng);
    const Eigen::VectorXd mine = model.predict(probe);
    for (int arm = 0; arm < 2; ++arm) {
      Eigen::MatrixXd gram = Eigen::MatrixXd::Identity(4, 4) * ridge;
      Eigen::VectorXd moment = Eigen::VectorXd::Zero(4);
      for (const auto& s : seen) {
        if (s.arm != arm) continue;
        Eigen::VectorXd xt(4);
        xt << 1.0, s.context;
        gram += xt * xt.transpose();
        moment += xt * s.reward;
      }
      Eigen::VectorXd pt(4);
      pt << 1.0, probe;
      worst = std::max(worst, std::abs(pt.dot(gram.ldlt().solve(moment)) - mine(arm)));
    }
  }
  report(7, "recursive nuisance equals batch ridge", worst < 1e-8,
         fmt("20 prefixes, max |diff| %.2e (limit 1e-8)", worst));
}

// ---- 8. determinism and prefix consistency --------------------------------------
void criterion_determinism() {
  opl::ExperimentConfig cfg;
  cfg.horizons = {500};
  cfg.replications = 3;
  cfg.test_size = 2000;
  cfg.base_seed = 5150;

  const auto read_back = [](const std::vector<opl::ResultRow>& rows, const std::string& path) {
    opl::emit_results(rows, path);
    return opl::read_results(path);
  };
  const auto equal_ignoring_wall = [](const std::vector<opl::ResultRow>& a,
                                      const std::vector<opl::ResultRow>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i].env_id != b[i].env_id || a[i].horizon != b[i].horizon ||
          a[i].scheme != b[i].scheme || a[i].rep != b[i].rep || a[i].regret != b[i].regret ||
          a[i].agent_regret != b[i].agent_regret)
        return false;
    return true;
  };

  const auto first = read_back(opl::run_experiment(cfg), "/tmp/opl_acc_run1.csv");
  const auto second = read_back(opl::run_experiment(cfg), "/tmp/opl_acc_run2.csv");
  const bool identical = equal_ignoring_wall(first, second);

  opl::ExperimentConfig longer = cfg;
  longer.horizons = {500, 2000};
  const auto full = opl::run_experiment(longer);
  std::vector<opl::ResultRow> prefix;
  for (const auto& r : full)
    if (r.horizon == 500) prefix.push_back(r);
  const bool prefix_ok = equal_ignoring_wall(prefix, opl::run_experiment(cfg));

  std::remove("/tmp/opl_acc_run1.csv");
  std::remove("/tmp/opl_acc_run2.csv");
  report(8, "determinism and horizon-prefix consistency", identical && prefix_ok,
         fmt("repeat runs %s, 4T-prefix %s", identical ? "identical" : "DIFFER",
             prefix_ok ? "matches" : "DIFFERS"));
}

// ---- 9. entropy bound values ------------------------------------------------------
void criterion_entropy_values() {
  const double a = opl::tree_entropy_bound(2, 3, 2);
  const double b = opl::tree_entropy_bound(1, 1, 2);
  const bool ok = std::abs(a - 5.2097) < 1e-3 && std::abs(b - 2.5110) < 1e-3;
  report(9, "entropy-bound values", ok, fmt("kappa(2,3,2)=%.5f, kappa(1,1,2)=%.5f", a, b));
}

}  // namespace

int main() {
  const auto start = Clock::now();
  criterion_tree_exactness();
  criterion_unbiasedness();
  criterion_floor();
  criterion_kkt();
  criterion_synthetic();
  criterion_rate();
  criterion_nuisance();
  criterion_determinism();
  criterion_entropy_values();
  std::printf("%d of 9 criteria passed (%.0f s total)\n", 9 - failures, seconds_since(start));
  return failures;
}
