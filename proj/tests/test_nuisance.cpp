#include <catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <random>

#include "opl/nuisance.hpp"

using opl::LoggedSample;
using opl::NuisanceModel;

namespace {

LoggedSample make_sample(std::int64_t t, const Eigen::VectorXd& x, int arm, double y) {
  LoggedSample s;
  s.t = t;
  s.context = x;
  s.arm = arm;
  s.reward = y;
  s.propensity = 0.5;
  return s;
}

}  // namespace

TEST_CASE("empty model predicts the prior mean zero") {
  const NuisanceModel model(3, 4);
  const Eigen::VectorXd mu = model.predict(Eigen::VectorXd::Random(4));
  for (int a = 0; a < 3; ++a) CHECK(mu(a) == 0.0);
}

TEST_CASE("a lightly regularized fit recovers noiseless linear data") {
  NuisanceModel model(2, 2, 1e-6, true);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  std::int64_t t = 1;
  for (int i = 0; i < 60; ++i) {
    Eigen::VectorXd x(2);
    x << unif(rng), unif(rng);
    model.update(make_sample(t++, x, 0, 2.0 * x(0)));
  }
  Eigen::VectorXd probe(2);
  probe << 3.0, -1.0;
  CHECK(model.predict(probe)(0) == Catch::Approx(6.0).margin(1e-3));
}

TEST_CASE("predictions are linear when the intercept is disabled") {
  NuisanceModel model(1, 3, 1e-2, false);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::int64_t t = 1;
  for (int i = 0; i < 30; ++i) {
    Eigen::VectorXd x(3);
    for (int c = 0; c < 3; ++c) x(c) = gauss(rng);
    model.update(make_sample(t++, x, 0, gauss(rng)));
  }
  Eigen::VectorXd a(3), b(3);
  a << 1.0, -2.0, 0.5;
  b << 0.3, 0.7, -1.1;
  const double lhs = model.predict(a + b)(0) + model.predict(Eigen::VectorXd::Zero(3))(0);
  const double rhs = model.predict(a)(0) + model.predict(b)(0);
  CHECK(lhs == Catch::Approx(rhs).margin(1e-10));
}

TEST_CASE("updates touch only the chosen arm") {
  NuisanceModel model(3, 2);
  Eigen::VectorXd x(2), probe(2);
  x << 1.0, 2.0;
  probe << 0.5, -0.5;
  const Eigen::VectorXd before = model.predict(probe);
  model.update(make_sample(1, x, 1, 4.0));
  const Eigen::VectorXd after = model.predict(probe);
  CHECK(after(0) == before(0));
  CHECK(after(2) == before(2));
  CHECK(after(1) != before(1));
}

TEST_CASE("sequential updates equal a batch ridge solve at every prefix") {
  const double ridge = 1e-3;
  std::mt19937_64 rng(17);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int horizon = 5 + static_cast<int>(rng() % 40);
    NuisanceModel model(2, 3, ridge, true);
    std::vector<LoggedSample> seen;
    for (int t = 1; t <= horizon; ++t) {
      Eigen::VectorXd x(3);
      for (int c = 0; c < 3; ++c) x(c) = gauss(rng);
      seen.push_back(make_sample(t, x, static_cast<int>(rng() % 2), gauss(rng)));
      model.update(seen.back());
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
      const double batch = pt.dot(gram.ldlt().solve(moment));
      CHECK(std::abs(batch - mine(arm)) < 1e-8);
    }
  }
}

TEST_CASE("out-of-order and duplicate indices are rejected") {
  NuisanceModel model(2, 2);
  Eigen::VectorXd x(2);
  x << 1.0, 1.0;
  model.update(make_sample(3, x, 0, 1.0));
  CHECK_THROWS_AS(model.update(make_sample(3, x, 0, 1.0)), opl::ValidationError);
  CHECK_THROWS_AS(model.update(make_sample(2, x, 1, 1.0)), opl::ValidationError);
  model.update(make_sample(4, x, 1, 1.0));
  CHECK(model.last_index() == 4);
}
