#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <future>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "opl/agent.hpp"
#include "opl/aipw.hpp"
#include "opl/csv.hpp"
#include "opl/env.hpp"
#include "opl/errors.hpp"
#include "opl/evaluate.hpp"
#include "opl/nuisance.hpp"
#include "opl/tree_search.hpp"

namespace opl {

// Salt so the shared test-set stream never collides with a replication stream
// (replication r uses base_seed ^ r).
inline constexpr std::uint64_t kTestSeedSalt = 0x9e3779b97f4a7c15ULL;

struct CollectParams {
  double alpha = 0.5;
  double agent_ridge = 1.0;
  double agent_prior_scale2 = 1.0;
  int mc_rounds = 1000;
};

struct NuisanceParams {
  double ridge = 1e-3;
  bool intercept = true;
};

/// Everything one replication's collection phase produces: the log, the
/// context matrix, and the agent's posterior-mean snapshot at each horizon.
struct CollectionRun {
  std::vector<LoggedSample> samples;
  Eigen::MatrixXd contexts;                // T_max x p
  std::vector<int> horizons;               // ascending
  std::vector<Eigen::MatrixXd> snapshots;  // per horizon: arms x p
};

/// Simulate adaptive collection to the largest horizon. Each step consumes a
/// fixed draw schedule (context, arm noises, Thompson rounds, one action draw)
/// so any horizon prefix of a longer run is bit-identical to a shorter run.
inline CollectionRun collect(const Environment& env, std::vector<int> horizons,
                             const CollectParams& params, std::uint64_t seed) {
  if (horizons.empty()) throw ValidationError("horizon", "need at least one horizon");
  std::sort(horizons.begin(), horizons.end());
  if (horizons.front() < 1) throw ValidationError("horizon", "horizons must be >= 1");

  const int t_max = horizons.back();
  FloorSchedule sched(params.alpha, env.arms());
  AgentState agent(env.arms(), env.dim(), params.agent_ridge, params.agent_prior_scale2,
                   params.mc_rounds);
  Rng rng(seed);

  CollectionRun run;
  run.horizons = horizons;
  run.samples.reserve(static_cast<std::size_t>(t_max));
  run.contexts.resize(t_max, env.dim());
  std::size_t next_horizon = 0;
  for (int t = 1; t <= t_max; ++t) {
    auto [x, rewards] = env.sample_step(rng);
    run.contexts.row(t - 1) = x.transpose();
    run.samples.push_back(select_and_log(agent, x, rewards, t, sched, rng));
    while (next_horizon < horizons.size() && horizons[next_horizon] == t) {
      run.snapshots.push_back(agent.posterior_means());
      ++next_horizon;
    }
  }
  return run;
}

/// Call-order trace used to verify the strict-past property: for every step,
/// predict(t) must precede update(t).
struct TraceEvent {
  char op;  // 'p' predict, 'u' update
  std::int64_t t;
};

/// Sequential plug-in predictions: muhat row t is issued before sample t is
/// ingested, so it depends on strictly past data only.
inline Eigen::MatrixXd nuisance_predictions(const std::vector<LoggedSample>& samples, int arms,
                                            const NuisanceParams& params,
                                            std::vector<TraceEvent>* trace = nullptr) {
  if (samples.empty()) throw ValidationError("empty-log", "no samples");
  const int dim = static_cast<int>(samples.front().context.size());
  NuisanceModel model(arms, dim, params.ridge, params.intercept);
  Eigen::MatrixXd muhat(static_cast<int>(samples.size()), arms);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (trace) trace->push_back({'p', samples[i].t});
    muhat.row(static_cast<int>(i)) = model.predict(samples[i].context).transpose();
    if (trace) trace->push_back({'u', samples[i].t});
    model.update(samples[i]);
  }
  return muhat;
}

/// Per-arm AIPW elements for every logged step.
inline Eigen::MatrixXd aipw_matrix(const std::vector<LoggedSample>& samples,
                                   const Eigen::MatrixXd& muhat) {
  if (static_cast<int>(samples.size()) != muhat.rows())
    throw ValidationError("dimension-mismatch", "one muhat row per sample required");
  Eigen::MatrixXd gamma(muhat.rows(), muhat.cols());
  for (std::size_t i = 0; i < samples.size(); ++i)
    gamma.row(static_cast<int>(i)) =
        aipw_elements(samples[i], muhat.row(static_cast<int>(i)).transpose()).transpose();
  return gamma;
}

namespace detail {
inline std::string fmt_full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace detail

/// Logged-data interchange CSV: t, x_1..x_p, action, reward, propensity.
inline void write_logged_csv(const std::string& path, const std::vector<LoggedSample>& samples) {
  if (samples.empty()) throw ValidationError("empty-log", "no samples to write");
  std::ofstream out(path);
  if (!out) throw IoError("io-write", "cannot open for writing: " + path);
  const int p = static_cast<int>(samples.front().context.size());
  out << "t";
  for (int c = 1; c <= p; ++c) out << ",x_" << c;
  out << ",action,reward,propensity\n";
  for (const LoggedSample& s : samples) {
    out << s.t;
    for (int c = 0; c < p; ++c) out << ',' << detail::fmt_full(s.context(c));
    out << ',' << s.arm << ',' << detail::fmt_full(s.reward) << ','
        << detail::fmt_full(s.propensity) << '\n';
  }
  if (!out) throw IoError("io-write", "write failed: " + path);
}

inline std::vector<LoggedSample> read_logged_csv(const std::string& path) {
  const std::vector<std::string> lines = csv::read_lines(path);
  if (lines.empty()) throw ValidationError("empty-log", "no header in " + path);
  const std::vector<std::string> header = csv::split(lines[0]);
  if (header.size() < 5 || header.front() != "t" || header.back() != "propensity")
    throw ValidationError("log-header", "unexpected logged-data header in " + path);
  const int p = static_cast<int>(header.size()) - 4;

  std::vector<LoggedSample> samples;
  std::int64_t last_t = 0;
  int row = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (csv::trim(lines[i]).empty()) continue;
    ++row;
    const std::string where = "data row " + std::to_string(row);
    const std::vector<std::string> f = csv::split(lines[i]);
    if (f.size() != header.size())
      throw ValidationError("field-count", where + ": wrong field count");
    LoggedSample s;
    const auto t = csv::to_int(f[0]);
    if (!t || *t < 1) throw ValidationError("time-index", where + ": bad time index");
    s.t = *t;
    if (s.t <= last_t)
      throw ValidationError("time-index", where + ": time indices must be strictly increasing");
    last_t = s.t;
    s.context.resize(p);
    for (int c = 0; c < p; ++c) {
      const auto v = csv::to_double(f[static_cast<std::size_t>(c) + 1]);
      if (!v || !std::isfinite(*v))
        throw ValidationError("context-value", where + ": bad context value");
      s.context(c) = *v;
    }
    const auto arm = csv::to_int(f[static_cast<std::size_t>(p) + 1]);
    if (!arm || *arm < 0) throw ValidationError("arm-range", where + ": bad action");
    s.arm = static_cast<int>(*arm);
    const auto reward = csv::to_double(f[static_cast<std::size_t>(p) + 2]);
    if (!reward || !std::isfinite(*reward))
      throw ValidationError("reward-value", where + ": bad reward");
    s.reward = *reward;
    const auto e = csv::to_double(f[static_cast<std::size_t>(p) + 3]);
    if (!e || !(*e > 0.0) || *e > 1.0)
      throw ValidationError("propensity-range",
                            where + ": propensity must lie in (0,1], got '" +
                                f[static_cast<std::size_t>(p) + 3] + "'");
    s.propensity = *e;
    samples.push_back(std::move(s));
  }
  if (samples.empty()) throw ValidationError("empty-log", "no data rows in " + path);
  return samples;
}

/// Score-matrix export: t, then one column per arm.
inline void write_scores_csv(const std::string& path, const Eigen::MatrixXd& scores) {
  std::ofstream out(path);
  if (!out) throw IoError("io-write", "cannot open for writing: " + path);
  out << "t";
  for (int a = 0; a < scores.cols(); ++a) out << ",score_" << a;
  out << '\n';
  for (int t = 0; t < scores.rows(); ++t) {
    out << (t + 1);
    for (int a = 0; a < scores.cols(); ++a) out << ',' << detail::fmt_full(scores(t, a));
    out << '\n';
  }
  if (!out) throw IoError("io-write", "write failed: " + path);
}

struct ResultRow {
  std::string env_id;
  int horizon = 0;
  std::string scheme;  // weight-scheme id, or "agent"
  int rep = 0;
  double regret = 0.0;
  double agent_regret = 0.0;
  double wall_ms = 0.0;
};

inline void sort_results(std::vector<ResultRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::tie(a.env_id, a.horizon, a.scheme, a.rep) <
           std::tie(b.env_id, b.horizon, b.scheme, b.rep);
  });
}

inline void emit_results(const std::vector<ResultRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("io-write", "cannot open for writing: " + path);
  out << "env,T,scheme,rep,regret,agent_regret,wall_ms\n";
  std::vector<ResultRow> sorted = rows;
  sort_results(sorted);
  for (const ResultRow& r : sorted)
    out << r.env_id << ',' << r.horizon << ',' << r.scheme << ',' << r.rep << ','
        << detail::fmt_full(r.regret) << ',' << detail::fmt_full(r.agent_regret) << ','
        << detail::fmt_full(r.wall_ms) << '\n';
  if (!out) throw IoError("io-write", "write failed: " + path);
}

inline std::vector<ResultRow> read_results(const std::string& path) {
  const std::vector<std::string> lines = csv::read_lines(path);
  if (lines.empty() || csv::split(lines[0]).size() != 7)
    throw ValidationError("results-header", "unexpected results header in " + path);
  std::vector<ResultRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (csv::trim(lines[i]).empty()) continue;
    const std::vector<std::string> f = csv::split(lines[i]);
    if (f.size() != 7)
      throw ValidationError("field-count", "results row " + std::to_string(i) + " malformed");
    ResultRow r;
    r.env_id = f[0];
    const auto horizon = csv::to_int(f[1]);
    const auto rep = csv::to_int(f[3]);
    const auto regret = csv::to_double(f[4]);
    const auto agent = csv::to_double(f[5]);
    const auto wall = csv::to_double(f[6]);
    if (!horizon || !rep || !regret || !agent || !wall)
      throw ValidationError("results-value", "results row " + std::to_string(i) + " malformed");
    r.horizon = static_cast<int>(*horizon);
    r.scheme = f[2];
    r.rep = static_cast<int>(*rep);
    r.regret = *regret;
    r.agent_regret = *agent;
    r.wall_ms = *wall;
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Full experiment description. An empty scheme list means "the four defaults
/// for this alpha": uniform, t^{-alpha/2}, t^{-alpha}, t^{-2 alpha}.
struct ExperimentConfig {
  bool classification = false;
  std::string csv_path;
  std::string label_column;
  double alpha = 0.5;
  int depth = 2;
  std::vector<int> horizons = {1000, 2154, 4642, 10000};
  std::vector<WeightScheme> schemes;
  int replications = 50;
  int test_size = 0;  // 0 -> environment default
  std::uint64_t base_seed = 1;
  std::string out_path = "results.csv";
  int threads = 0;  // 0 -> hardware concurrency
  CollectParams collect_params;
  NuisanceParams nuisance_params;

  static std::vector<WeightScheme> default_schemes(double alpha) {
    return {WeightScheme::uniform(), WeightScheme::power(alpha / 2), WeightScheme::power(alpha),
            WeightScheme::power(2 * alpha)};
  }

  std::vector<WeightScheme> resolved_schemes() const {
    return schemes.empty() ? default_schemes(alpha) : schemes;
  }

  void validate() const {
    if (alpha < 0.0 || alpha > 1.0) throw ValidationError("floor-alpha", "alpha must be in [0,1]");
    if (depth < 1) throw ValidationError("tree-class", "depth must be >= 1");
    if (replications < 1) throw ValidationError("replications", "need at least one replication");
    if (horizons.empty()) throw ValidationError("horizon", "need at least one horizon");
    for (std::size_t i = 0; i < horizons.size(); ++i) {
      if (horizons[i] < 1) throw ValidationError("horizon", "horizons must be >= 1");
      if (i > 0 && horizons[i] <= horizons[i - 1])
        throw ValidationError("horizon", "horizons must be strictly increasing");
    }
    if (test_size < 0) throw ValidationError("test-size", "test size must be >= 0");
    if (classification && csv_path.empty())
      throw ValidationError("csv-path", "classification runs need a csv path");
    if (classification && label_column.empty())
      throw ValidationError("label-column", "classification runs need a label column");
  }
};

/// Plain `key = value` config file with '#' comments; unknown keys rejected.
inline void apply_config_entry(ExperimentConfig& cfg, const std::string& key,
                               const std::string& value) {
  auto as_int = [&](const std::string& v) {
    const auto r = csv::to_int(v);
    if (!r) throw ValidationError("config-value", "bad integer for " + key + ": " + v);
    return *r;
  };
  auto as_double = [&](const std::string& v) {
    const auto r = csv::to_double(v);
    if (!r) throw ValidationError("config-value", "bad number for " + key + ": " + v);
    return *r;
  };
  if (key == "env") {
    if (value == "synthetic")
      cfg.classification = false;
    else if (value == "classification")
      cfg.classification = true;
    else
      throw ValidationError("config-value", "env must be synthetic or classification");
  } else if (key == "csv") {
    cfg.csv_path = value;
    cfg.classification = true;
  } else if (key == "label") {
    cfg.label_column = value;
  } else if (key == "alpha") {
    cfg.alpha = as_double(value);
    cfg.collect_params.alpha = cfg.alpha;
  } else if (key == "depth") {
    cfg.depth = static_cast<int>(as_int(value));
  } else if (key == "horizons") {
    cfg.horizons.clear();
    for (const std::string& tok : csv::split(value))
      cfg.horizons.push_back(static_cast<int>(as_int(tok)));
  } else if (key == "schemes") {
    cfg.schemes.clear();
    for (const std::string& tok : csv::split(value)) cfg.schemes.push_back(WeightScheme::parse(tok));
  } else if (key == "reps") {
    cfg.replications = static_cast<int>(as_int(value));
  } else if (key == "n_test") {
    cfg.test_size = static_cast<int>(as_int(value));
  } else if (key == "seed") {
    cfg.base_seed = static_cast<std::uint64_t>(as_int(value));
  } else if (key == "out") {
    cfg.out_path = value;
  } else if (key == "threads") {
    cfg.threads = static_cast<int>(as_int(value));
  } else {
    throw ValidationError("config-key", "unknown config key: " + key);
  }
}

inline ExperimentConfig load_config_file(const std::string& path) {
  ExperimentConfig cfg;
  for (const std::string& raw : csv::read_lines(path)) {
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line = line.substr(0, hash);
    const std::string_view trimmed = csv::trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string_view::npos)
      throw ValidationError("config-line", "expected key = value: " + std::string(trimmed));
    const std::string key{csv::trim(trimmed.substr(0, eq))};
    const std::string value{csv::trim(trimmed.substr(eq + 1))};
    apply_config_entry(cfg, key, value);
  }
  return cfg;
}

inline Environment make_environment(const ExperimentConfig& cfg) {
  if (cfg.classification) return Environment::classification_csv(cfg.csv_path, cfg.label_column);
  return Environment::synthetic(cfg.base_seed);
}

/// Full protocol: per replication, collect once to the largest horizon; for
/// each horizon prefix and weight scheme, build the reweighted score matrix
/// (nuisance strictly past), run the exact tree search, and evaluate regret on
/// the shared test set. One row per (T, scheme, rep) plus an agent row per
/// (T, rep). Replications run concurrently; output order is deterministic.
inline std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const Environment env = make_environment(cfg);
  const std::vector<WeightScheme> schemes = cfg.resolved_schemes();
  const int n_test = cfg.test_size > 0 ? cfg.test_size : env.default_test_size();
  const TestSet test = env.make_test_set(n_test, cfg.base_seed ^ kTestSeedSalt);
  const TreeClassSpec spec{cfg.depth, env.dim(), env.arms()};
  const double best_value = best_in_class(test, spec).second;

  CollectParams collect_params = cfg.collect_params;
  collect_params.alpha = cfg.alpha;
  const FloorSchedule sched(cfg.alpha, env.arms());

  using Clock = std::chrono::steady_clock;
  auto run_rep = [&](int rep) {
    std::vector<ResultRow> rows;
    const std::uint64_t seed = cfg.base_seed ^ static_cast<std::uint64_t>(rep);
    const CollectionRun run = collect(env, cfg.horizons, collect_params, seed);
    const Eigen::MatrixXd muhat =
        nuisance_predictions(run.samples, env.arms(), cfg.nuisance_params);
    const Eigen::MatrixXd gamma = aipw_matrix(run.samples, muhat);

    for (std::size_t hi = 0; hi < run.horizons.size(); ++hi) {
      const int horizon = run.horizons[hi];
      const auto agent_start = Clock::now();
      const Eigen::MatrixXd& coefs = run.snapshots[hi];
      const double agent_value = policy_value(
          [&coefs](const Eigen::VectorXd& x) { return greedy_from_means(coefs, x); }, test);
      const double agent_reg = best_value - agent_value;
      const double agent_ms =
          std::chrono::duration<double, std::milli>(Clock::now() - agent_start).count();
      rows.push_back({env.id(), horizon, "agent", rep, agent_reg, agent_reg, agent_ms});

      const Eigen::MatrixXd ctx = run.contexts.topRows(horizon);
      const Eigen::MatrixXd gam = gamma.topRows(horizon);
      for (const WeightScheme& scheme : schemes) {
        const auto start = Clock::now();
        const ScoreMatrix sm = ScoreMatrix::build(gam, weight_sequence(scheme, horizon, sched));
        const SearchResult learned = exact_search(sm.weighted, ctx, spec);
        const double value = policy_value(learned.tree, test);
        const double ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
        rows.push_back(
            {env.id(), horizon, scheme.id(), rep, best_value - value, agent_reg, ms});
      }
    }
    return rows;
  };

  const int workers =
      std::max(1, std::min(cfg.replications,
                           cfg.threads > 0 ? cfg.threads
                                           : static_cast<int>(std::thread::hardware_concurrency())));
  std::vector<ResultRow> all;
  if (workers == 1) {
    for (int rep = 0; rep < cfg.replications; ++rep) {
      auto rows = run_rep(rep);
      all.insert(all.end(), rows.begin(), rows.end());
    }
  } else {
    std::vector<std::future<std::vector<ResultRow>>> futures;
    futures.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      futures.push_back(std::async(std::launch::async, [&, w]() {
        std::vector<ResultRow> rows;
        for (int rep = w; rep < cfg.replications; rep += workers) {
          auto chunk = run_rep(rep);
          rows.insert(rows.end(), chunk.begin(), chunk.end());
        }
        return rows;
      }));
    }
    for (auto& f : futures) {
      auto rows = f.get();
      all.insert(all.end(), rows.begin(), rows.end());
    }
  }
  sort_results(all);
  return all;
}

}  // namespace opl
