#include <catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "opl/agent.hpp"

using opl::AgentState;
using opl::apply_floor;
using opl::FloorSchedule;
using opl::LoggedSample;
using opl::Rng;
using opl::select_and_log;
using opl::step_detailed;

TEST_CASE("floor schedule is positive, nonincreasing and simplex-compatible") {
  const FloorSchedule sched(0.5, 4);
  double prev = 1.0;
  for (int t = 1; t <= 200; ++t) {
    const double g = sched.floor(t);
    CHECK(g > 0.0);
    CHECK(g <= prev);
    CHECK(4 * g <= 1.0 + 1e-15);
    prev = g;
  }
  CHECK_THROWS_AS(FloorSchedule(1.5, 2), opl::ValidationError);
  CHECK_THROWS_AS(FloorSchedule(-0.1, 2), opl::ValidationError);
}

TEST_CASE("apply_floor reproduces the worked two-arm example") {
  // t=4, alpha=0.5, K=2 -> g=0.25; (0.9, 0.1) -> (0.75, 0.25)
  const FloorSchedule sched(0.5, 2);
  Eigen::VectorXd prelim(2);
  prelim << 0.9, 0.1;
  const Eigen::VectorXd out = apply_floor(prelim, 4, sched);
  CHECK(out(0) == Catch::Approx(0.75).margin(1e-12));
  CHECK(out(1) == Catch::Approx(0.25).margin(1e-12));
}

TEST_CASE("apply_floor at t=1 forces the uniform vector") {
  const FloorSchedule sched(0.5, 3);  // g(1) = 1/3
  Eigen::VectorXd prelim(3);
  prelim << 0.8, 0.15, 0.05;
  const Eigen::VectorXd out = apply_floor(prelim, 1, sched);
  for (int a = 0; a < 3; ++a) CHECK(out(a) == Catch::Approx(1.0 / 3).margin(1e-12));
}

TEST_CASE("degenerate spare mass falls back to the uniform vector") {
  // K*g(1) = 1 and every entry sits at the floor, so the shrink denominator
  // vanishes
  const FloorSchedule sched(0.5, 2);
  Eigen::VectorXd prelim(2);
  prelim << 0.5, 0.5;
  const Eigen::VectorXd out = apply_floor(prelim, 1, sched);
  CHECK(out(0) == 0.5);
  CHECK(out(1) == 0.5);
  CHECK_THROWS_AS(apply_floor(prelim, 0, sched), opl::ValidationError);
}

TEST_CASE("apply_floor keeps sums, floors, ranking and is idempotent") {
  const FloorSchedule sched(0.5, 4);
  Rng rng(11);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int it = 0; it < 500; ++it) {
    const std::int64_t t = 1 + (it % 400);
    Eigen::VectorXd prelim(4);
    double total = 0.0;
    for (int a = 0; a < 4; ++a) total += (prelim(a) = unif(rng));
    prelim /= total;
    const double g = sched.floor(t);
    const Eigen::VectorXd out = apply_floor(prelim, t, sched);
    CHECK(std::abs(out.sum() - 1.0) < 1e-9);
    for (int a = 0; a < 4; ++a) CHECK(out(a) >= g - 1e-12);
    // ranking preserved among arms above the floor
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        if (prelim(a) >= g && prelim(b) >= g && prelim(a) > prelim(b))
          CHECK(out(a) >= out(b) - 1e-12);
    const Eigen::VectorXd twice = apply_floor(out, t, sched);
    for (int a = 0; a < 4; ++a) CHECK(twice(a) == Catch::Approx(out(a)).margin(1e-12));
  }
}

TEST_CASE("preliminary probabilities are symmetric with no data") {
  AgentState agent(2, 3);
  Rng rng(123);
  Eigen::VectorXd x(3);
  x << 1.0, -0.5, 0.25;
  const Eigen::VectorXd probs = agent.preliminary_probs(x, rng);
  CHECK(probs.sum() == Catch::Approx(1.0).margin(1e-12));
  CHECK(probs(0) >= 0.40);
  CHECK(probs(0) <= 0.60);
}

TEST_CASE("zero context resolves argmax ties to arm 0") {
  AgentState agent(3, 2);
  Rng rng(9);
  const Eigen::VectorXd probs = agent.preliminary_probs(Eigen::VectorXd::Zero(2), rng);
  CHECK(probs(0) == 1.0);
  CHECK(probs(1) == 0.0);
  CHECK(probs(2) == 0.0);
}

TEST_CASE("a dominant posterior concentrates the preliminary mass") {
  AgentState agent(2, 2);
  Eigen::VectorXd x(2);
  x << 1.0, 0.0;
  // arm 1 sees many high-reward observations at x, arm 0 many zeros
  for (int i = 0; i < 2000; ++i) {
    agent.observe(1, x, 5.0);
    agent.observe(0, x, 0.0);
  }
  Rng rng(4);
  const Eigen::VectorXd probs = agent.preliminary_probs(x, rng);
  CHECK(probs(1) >= 0.99);
}

TEST_CASE("select_and_log records the floored propensity of the chosen arm") {
  const FloorSchedule sched(0.5, 2);
  AgentState agent(2, 3);
  Rng rng(31);
  Eigen::VectorXd x(3), rewards(2);
  x << 0.2, -1.0, 0.7;
  rewards << 1.0, -1.0;
  for (std::int64_t t = 1; t <= 25; ++t) {
    const opl::StepRecord rec = step_detailed(agent, x, rewards, t, sched, rng);
    CHECK(rec.sample.propensity == rec.floored(rec.sample.arm));
    CHECK(rec.sample.reward == rewards(rec.sample.arm));
    CHECK(rec.sample.t == t);
  }
}

TEST_CASE("posterior mean equals batch ridge on the observed pairs") {
  AgentState agent(2, 3, 1.0, 1.0, 50);
  Rng rng(8);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::pair<Eigen::VectorXd, double>> arm0, arm1;
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd x(3);
    for (int c = 0; c < 3; ++c) x(c) = gauss(rng);
    const double y = gauss(rng);
    const int arm = (i % 3 == 0) ? 1 : 0;
    agent.observe(arm, x, y);
    (arm == 0 ? arm0 : arm1).emplace_back(x, y);
  }
  for (int arm = 0; arm < 2; ++arm) {
    const auto& data = (arm == 0) ? arm0 : arm1;
    Eigen::MatrixXd gram = Eigen::MatrixXd::Identity(3, 3);
    Eigen::VectorXd moment = Eigen::VectorXd::Zero(3);
    for (const auto& [x, y] : data) {
      gram += x * x.transpose();
      moment += x * y;
    }
    const Eigen::VectorXd batch = gram.ldlt().solve(moment);
    const Eigen::VectorXd recursive = agent.posterior_mean(arm);
    CHECK((batch - recursive).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("collection respects the floor over a long run") {
  const FloorSchedule sched(0.5, 2);
  AgentState agent(2, 3, 1.0, 1.0, 50);
  Rng rng(2);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double min_e = 1.0;
  const int horizon = 10000;
  for (std::int64_t t = 1; t <= horizon; ++t) {
    Eigen::VectorXd x(3), rewards(2);
    for (int c = 0; c < 3; ++c) x(c) = unif(rng);
    for (int a = 0; a < 2; ++a) rewards(a) = gauss(rng);
    const LoggedSample s = select_and_log(agent, x, rewards, t, sched, rng);
    min_e = std::min(min_e, s.propensity);
  }
  CHECK(min_e >= sched.floor(horizon) - 1e-12);
  CHECK(min_e >= 0.005 - 1e-12);
}

TEST_CASE("identical state and seed reproduce the same logged sample") {
  const FloorSchedule sched(0.5, 2);
  Eigen::VectorXd x(3), rewards(2);
  x << 0.4, 1.2, -0.3;
  rewards << 2.0, -2.0;
  auto run_once = [&]() {
    AgentState agent(2, 3);
    agent.observe(0, x, 1.0);
    Rng rng(555);
    return select_and_log(agent, x, rewards, 7, sched, rng);
  };
  const LoggedSample a = run_once();
  const LoggedSample b = run_once();
  CHECK(a.arm == b.arm);
  CHECK(a.reward == b.reward);
  CHECK(a.propensity == b.propensity);
}
