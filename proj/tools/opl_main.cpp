#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "opl/agent.hpp"
#include "opl/aipw.hpp"
#include "opl/env.hpp"
#include "opl/evaluate.hpp"
#include "opl/experiment.hpp"
#include "opl/tree_search.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitValidation = 3;
constexpr int kExitIo = 4;

opl::Environment env_from_flags(const std::string& csv, const std::string& label,
                                std::uint64_t seed) {
  if (!csv.empty()) {
    if (label.empty())
      throw opl::ValidationError("label-column", "--label is required with --csv");
    return opl::Environment::classification_csv(csv, label);
  }
  return opl::Environment::synthetic(seed);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw opl::IoError("missing-file", "cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw opl::IoError("io-write", "cannot open for writing: " + path);
  out << text;
  if (!out) throw opl::IoError("io-write", "write failed: " + path);
}

std::vector<int> parse_horizons(const std::string& text) {
  std::vector<int> out;
  for (const std::string& tok : opl::csv::split(text)) {
    const auto v = opl::csv::to_int(tok);
    if (!v) throw opl::ValidationError("horizon", "bad horizon: " + tok);
    out.push_back(static_cast<int>(*v));
  }
  return out;
}

std::vector<opl::WeightScheme> parse_schemes(const std::string& text) {
  std::vector<opl::WeightScheme> out;
  for (const std::string& tok : opl::csv::split(text)) out.push_back(opl::WeightScheme::parse(tok));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decision-tree policy learning from adaptively collected bandit data"};
  app.require_subcommand(1);

  // ---- simulate ----------------------------------------------------------
  auto* simulate = app.add_subcommand("simulate", "collect a run and dump the logged-data CSV");
  struct {
    int horizon = 1000;
    double alpha = 0.5;
    std::uint64_t seed = 1;
    std::string out;
    std::string csv, label;
  } sim;
  simulate->add_option("--T", sim.horizon, "number of collection steps")->required();
  simulate->add_option("--alpha", sim.alpha, "floor decay exponent");
  simulate->add_option("--seed", sim.seed, "rng seed");
  simulate->add_option("--out", sim.out, "output CSV path")->required();
  simulate->add_option("--csv", sim.csv, "classification CSV (default: synthetic environment)");
  simulate->add_option("--label", sim.label, "label column for --csv");
  simulate->callback([&sim]() {
    const opl::Environment env = env_from_flags(sim.csv, sim.label, sim.seed);
    opl::CollectParams params;
    params.alpha = sim.alpha;
    const opl::CollectionRun run = opl::collect(env, {sim.horizon}, params, sim.seed);
    opl::write_logged_csv(sim.out, run.samples);
    std::cout << "wrote " << run.samples.size() << " rows to " << sim.out << "\n";
  });

  // ---- learn -------------------------------------------------------------
  auto* learn = app.add_subcommand("learn", "logged CSV -> tree policy text form");
  struct {
    std::string input;
    int depth = 2;
    std::string scheme = "uniform";
    double alpha = 0.5;
    int arms = 0;
    std::string out;
    std::string scores_out;
  } lrn;
  learn->add_option("--input", lrn.input, "logged-data CSV")->required();
  learn->add_option("--depth", lrn.depth, "tree depth");
  learn->add_option("--scheme", lrn.scheme, "weight scheme: uniform | floor | pow:<beta>");
  learn->add_option("--alpha", lrn.alpha, "floor decay exponent (for floor-matched weights)");
  learn->add_option("--arms", lrn.arms, "arm count (default: inferred from actions)");
  learn->add_option("--out", lrn.out, "write tree text here instead of stdout");
  learn->add_option("--scores-out", lrn.scores_out, "dump the weighted score matrix CSV");
  learn->callback([&lrn]() {
    const std::vector<opl::LoggedSample> samples = opl::read_logged_csv(lrn.input);
    for (std::size_t i = 0; i < samples.size(); ++i)
      if (samples[i].t != static_cast<std::int64_t>(i) + 1)
        throw opl::ValidationError("time-index", "data row " + std::to_string(i + 1) +
                                                     ": expected consecutive time index " +
                                                     std::to_string(i + 1));
    int arms = lrn.arms;
    if (arms == 0) {
      for (const auto& s : samples) arms = std::max(arms, s.arm + 1);
    }
    for (std::size_t i = 0; i < samples.size(); ++i)
      if (samples[i].arm >= arms)
        throw opl::ValidationError("arm-range",
                                   "data row " + std::to_string(i + 1) + ": action exceeds --arms");
    const int horizon = static_cast<int>(samples.size());
    const int dim = static_cast<int>(samples.front().context.size());
    const Eigen::MatrixXd muhat = opl::nuisance_predictions(samples, arms, {});
    const Eigen::MatrixXd gamma = opl::aipw_matrix(samples, muhat);
    const opl::FloorSchedule sched(lrn.alpha, arms);
    const opl::ScoreMatrix sm = opl::ScoreMatrix::build(
        gamma, opl::weight_sequence(opl::WeightScheme::parse(lrn.scheme), horizon, sched));
    Eigen::MatrixXd contexts(horizon, dim);
    for (int t = 0; t < horizon; ++t)
      contexts.row(t) = samples[static_cast<std::size_t>(t)].context.transpose();
    if (!lrn.scores_out.empty()) opl::write_scores_csv(lrn.scores_out, sm.weighted);
    const opl::TreeClassSpec spec{lrn.depth, dim, arms};
    const opl::SearchResult res = opl::exact_search(sm.weighted, contexts, spec);
    const std::string text = res.tree.text();
    if (lrn.out.empty()) {
      std::cout << text << "\n";
    } else {
      write_text_file(lrn.out, text + "\n");
      std::cout << "wrote tree to " << lrn.out << " (objective " << res.objective << ")\n";
    }
  });

  // ---- evaluate ----------------------------------------------------------
  auto* evaluate = app.add_subcommand("evaluate", "tree + environment -> out-of-sample regret");
  struct {
    std::string tree;
    std::string csv, label;
    int test_size = 0;
    std::uint64_t seed = 9;
    int depth = 2;
  } ev;
  evaluate->add_option("--tree", ev.tree, "tree text file")->required();
  evaluate->add_option("--csv", ev.csv, "classification CSV (default: synthetic environment)");
  evaluate->add_option("--label", ev.label, "label column for --csv");
  evaluate->add_option("--n-test", ev.test_size, "test-set size (0: environment default)");
  evaluate->add_option("--seed", ev.seed, "test-set seed");
  evaluate->add_option("--depth", ev.depth, "depth of the best-in-class reference");
  evaluate->callback([&ev]() {
    const opl::TreePolicy tree = opl::TreePolicy::parse(
        std::string(opl::csv::trim(read_text_file(ev.tree))));
    const opl::Environment env = env_from_flags(ev.csv, ev.label, ev.seed);
    const int n = ev.test_size > 0 ? ev.test_size : env.default_test_size();
    const opl::TestSet test = env.make_test_set(n, ev.seed ^ opl::kTestSeedSalt);
    const opl::TreeClassSpec spec{ev.depth, env.dim(), env.arms()};
    const opl::RegretReport rep = opl::regret(tree, test, spec);
    std::printf("policy_value %.6f\nbest_value %.6f\nregret %.6f\nn_test %d\n", rep.policy_value,
                rep.best_value, rep.regret, rep.test_size);
  });

  // ---- run ---------------------------------------------------------------
  auto* run = app.add_subcommand("run", "full protocol: collect, learn, evaluate, replicate");
  struct {
    std::string config;
    std::string csv, label;
    double alpha = 0.5;
    int depth = 2;
    std::string horizons, schemes;
    int reps = 0;
    int test_size = -1;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out;
    int threads = -1;
  } rn;
  run->add_option("--config", rn.config, "key = value config file");
  auto* rn_csv = run->add_option("--csv", rn.csv, "classification CSV");
  auto* rn_label = run->add_option("--label", rn.label, "label column");
  auto* rn_alpha = run->add_option("--alpha", rn.alpha, "floor decay exponent");
  auto* rn_depth = run->add_option("--depth", rn.depth, "tree depth");
  run->add_option("--horizons", rn.horizons, "comma-separated horizons");
  run->add_option("--schemes", rn.schemes, "comma-separated weight schemes");
  auto* rn_reps = run->add_option("--reps", rn.reps, "replication count");
  auto* rn_ntest = run->add_option("--n-test", rn.test_size, "test-set size (0: env default)");
  auto* rn_seed = run->add_option("--seed", rn.seed, "base seed");
  auto* rn_out = run->add_option("--out", rn.out, "results CSV path");
  auto* rn_threads = run->add_option("--threads", rn.threads, "worker threads (0: hardware)");
  run->callback([&]() {
    opl::ExperimentConfig cfg;
    if (!rn.config.empty()) cfg = opl::load_config_file(rn.config);
    if (rn_csv->count()) {
      cfg.csv_path = rn.csv;
      cfg.classification = true;
    }
    if (rn_label->count()) cfg.label_column = rn.label;
    if (rn_alpha->count()) {
      cfg.alpha = rn.alpha;
      cfg.collect_params.alpha = rn.alpha;
    }
    if (rn_depth->count()) cfg.depth = rn.depth;
    if (!rn.horizons.empty()) cfg.horizons = parse_horizons(rn.horizons);
    if (!rn.schemes.empty()) cfg.schemes = parse_schemes(rn.schemes);
    if (rn_reps->count()) cfg.replications = rn.reps;
    if (rn_ntest->count()) cfg.test_size = rn.test_size;
    if (rn_seed->count()) cfg.base_seed = rn.seed;
    if (rn_out->count()) cfg.out_path = rn.out;
    if (rn_threads->count()) cfg.threads = rn.threads;
    const std::vector<opl::ResultRow> rows = opl::run_experiment(cfg);
    opl::emit_results(rows, cfg.out_path);
    std::cout << "wrote " << rows.size() << " rows to " << cfg.out_path << "\n";
  });

  // ---- bound -------------------------------------------------------------
  auto* bound = app.add_subcommand("bound", "print the entropy bound and the regret-bound value");
  struct {
    int depth = 2, dim = 3, arms = 2;
    int horizon = 10000;
    double alpha = 0.5, delta = 0.05, outcome_bound = 1.0;
    std::string scheme = "floor";
  } bd;
  bound->add_option("--L", bd.depth, "tree depth");
  bound->add_option("--p", bd.dim, "context dimension");
  bound->add_option("--K", bd.arms, "arm count");
  bound->add_option("--T", bd.horizon, "horizon")->required();
  bound->add_option("--alpha", bd.alpha, "floor decay exponent");
  bound->add_option("--delta", bd.delta, "failure probability");
  bound->add_option("--M", bd.outcome_bound, "outcome magnitude bound");
  bound->add_option("--scheme", bd.scheme, "weight scheme: uniform | floor | pow:<beta>");
  bound->callback([&bd]() {
    const double kappa = opl::tree_entropy_bound(bd.depth, bd.dim, bd.arms);
    const opl::FloorSchedule sched(bd.alpha, bd.arms);
    opl::RegretBoundInputs in;
    in.outcome_bound = bd.outcome_bound;
    in.delta = bd.delta;
    in.entropy = kappa;
    in.g.resize(bd.horizon);
    for (int t = 1; t <= bd.horizon; ++t) in.g(t - 1) = sched.floor(t);
    in.h = opl::weight_sequence(opl::WeightScheme::parse(bd.scheme), bd.horizon, sched);
    std::printf("kappa %.4f\nregret_bound %.6g\n", kappa, opl::regret_bound(in));
  });

  // ---- convert -----------------------------------------------------------
  auto* convert = app.add_subcommand("convert", "classification CSV -> environment sanity report");
  struct {
    std::string csv, label;
  } cv;
  convert->add_option("--csv", cv.csv, "classification CSV")->required();
  convert->add_option("--label", cv.label, "label column")->required();
  convert->callback([&cv]() {
    const opl::Environment env = opl::Environment::classification_csv(cv.csv, cv.label);
    std::cout << "env " << env.id() << "\nrows " << env.table_rows() << "\nfeatures " << env.dim()
              << "\narms " << env.arms() << "\n";
    std::vector<int> counts(static_cast<std::size_t>(env.arms()), 0);
    for (int l : env.labels()) ++counts[static_cast<std::size_t>(l)];
    for (int a = 0; a < env.arms(); ++a)
      std::cout << "arm " << a << " label '" << env.label_names()[static_cast<std::size_t>(a)]
                << "' count " << counts[static_cast<std::size_t>(a)] << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const opl::IoError& e) {
    std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
    return kExitIo;
  } catch (const opl::ValidationError& e) {
    std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return 0;
}
