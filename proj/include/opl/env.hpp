#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "opl/csv.hpp"
#include "opl/errors.hpp"

namespace opl {

using Rng = std::mt19937_64;

enum class EnvKind { kSynthetic, kClassification };

/// Held-out evaluation sample: contexts plus noiseless arm means, row-aligned.
struct TestSet {
  Eigen::MatrixXd contexts;    // n x p
  Eigen::MatrixXd true_means;  // n x K
};

/// Context/potential-outcome generator. Immutable after construction and safe
/// to share across replications; every sampling call takes a caller-owned RNG.
class Environment {
 public:
  /// Two-arm quadratic bandit: contexts i.i.d. Uniform[-2,2]^3, arm means
  /// x1^2 - 1 and 1 - x1^2, Gaussian reward noise. The seed is kept for the
  /// construction record only; sampling state lives with the caller.
  static Environment synthetic(std::uint64_t seed = 0, double noise_sd = 1.0) {
    if (noise_sd < 0) throw ValidationError("noise-sd", "noise_sd must be >= 0");
    Environment env;
    env.kind_ = EnvKind::kSynthetic;
    env.name_ = "synthetic";
    env.dim_ = 3;
    env.arms_ = 2;
    env.noise_sd_ = noise_sd;
    env.outcome_bound_ = 3.0;
    env.seed_ = seed;
    return env;
  }

  /// Bandit derived from a labeled table: one arm per class, one-hot means,
  /// contexts drawn uniformly from the standardized rows.
  static Environment classification(const Eigen::MatrixXd& features,
                                    const std::vector<std::string>& labels,
                                    std::string name = "classification") {
    if (features.rows() == 0) throw ValidationError("empty-table", "classification table is empty");
    if (features.cols() == 0) throw ValidationError("no-features", "no feature columns");
    if (static_cast<std::size_t>(features.rows()) != labels.size())
      throw ValidationError("dimension-mismatch", "feature rows and labels differ in count");
    if (!features.allFinite())
      throw ValidationError("non-numeric-feature", "features must be finite");

    Environment env;
    env.kind_ = EnvKind::kClassification;
    env.name_ = std::move(name);
    env.dim_ = static_cast<int>(features.cols());
    env.noise_sd_ = 1.0;
    env.outcome_bound_ = 1.0;

    // relabel in order of first appearance
    std::unordered_map<std::string, int> ids;
    env.labels_.reserve(labels.size());
    for (const std::string& raw : labels) {
      auto [it, inserted] = ids.emplace(raw, static_cast<int>(env.label_names_.size()));
      if (inserted) env.label_names_.push_back(raw);
      env.labels_.push_back(it->second);
    }
    env.arms_ = static_cast<int>(env.label_names_.size());
    if (env.arms_ < 2)
      throw ValidationError("single-class", "classification table has a single class");

    env.table_ = standardize(features);
    env.build_row_index();
    return env;
  }

  /// CSV with a header row; the label column is matched by name, every other
  /// column must parse as a decimal-point number.
  static Environment classification_csv(const std::string& path, const std::string& label_column) {
    const std::vector<std::string> lines = csv::read_lines(path);
    if (lines.empty()) throw ValidationError("empty-table", "file has no header: " + path);
    const std::vector<std::string> header = csv::split(lines[0]);
    int label_idx = -1;
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == label_column) label_idx = static_cast<int>(c);
    if (label_idx < 0)
      throw ValidationError("label-column", "label column '" + label_column + "' not found");

    const int p = static_cast<int>(header.size()) - 1;
    if (p < 1) throw ValidationError("no-features", "no feature columns in " + path);

    std::vector<std::string> labels;
    std::vector<double> flat;
    int rows = 0;
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (csv::trim(lines[i]).empty()) continue;
      const std::vector<std::string> fields = csv::split(lines[i]);
      if (fields.size() != header.size())
        throw ValidationError("field-count", "row " + std::to_string(i) + ": expected " +
                                                 std::to_string(header.size()) + " fields, got " +
                                                 std::to_string(fields.size()));
      for (std::size_t c = 0; c < fields.size(); ++c) {
        if (static_cast<int>(c) == label_idx) {
          labels.push_back(fields[c]);
          continue;
        }
        const auto v = csv::to_double(fields[c]);
        if (!v || !std::isfinite(*v))
          throw ValidationError("non-numeric-feature",
                                "row " + std::to_string(i) + ", column '" + header[c] +
                                    "': not numeric: '" + fields[c] + "'");
        flat.push_back(*v);
      }
      ++rows;
    }
    if (rows == 0) throw ValidationError("empty-table", "no data rows in " + path);

    Eigen::MatrixXd features(rows, p);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < p; ++c)
        features(r, c) = flat[static_cast<std::size_t>(r) * static_cast<std::size_t>(p) +
                              static_cast<std::size_t>(c)];

    std::string stem = path;
    if (const auto slash = stem.find_last_of("/\\"); slash != std::string::npos)
      stem = stem.substr(slash + 1);
    if (const auto dot = stem.find_last_of('.'); dot != std::string::npos) stem = stem.substr(0, dot);
    return classification(features, labels, stem);
  }

  EnvKind kind() const { return kind_; }
  const std::string& id() const { return name_; }
  int dim() const { return dim_; }
  int arms() const { return arms_; }
  double noise_sd() const { return noise_sd_; }
  double outcome_bound() const { return outcome_bound_; }
  std::uint64_t seed() const { return seed_; }
  int table_rows() const { return static_cast<int>(table_.rows()); }
  const Eigen::MatrixXd& table() const { return table_; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<std::string>& label_names() const { return label_names_; }

  /// Noiseless arm means at a context. For Classification the context must be
  /// one of the (standardized) table rows.
  Eigen::VectorXd true_means(const Eigen::VectorXd& x) const {
    if (static_cast<int>(x.size()) != dim_)
      throw ValidationError("dimension-mismatch", "context has wrong length");
    if (kind_ == EnvKind::kSynthetic) return synthetic_means(x(0));
    const auto it = row_index_.find(row_key(x));
    if (it == row_index_.end())
      throw ValidationError("unknown-context", "context is not a table row");
    return one_hot(labels_[static_cast<std::size_t>(it->second)]);
  }

  Eigen::VectorXd true_means_row(int row) const {
    if (kind_ == EnvKind::kSynthetic)
      throw ValidationError("env-kind", "true_means_row requires a classification environment");
    return one_hot(labels_[static_cast<std::size_t>(row)]);
  }

  /// One collection draw: a context from the context law plus all arms'
  /// potential rewards (mean + Gaussian noise per arm).
  std::pair<Eigen::VectorXd, Eigen::VectorXd> sample_step(Rng& rng) const {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd x(dim_);
    Eigen::VectorXd mu;
    if (kind_ == EnvKind::kSynthetic) {
      std::uniform_real_distribution<double> unif(-2.0, 2.0);
      for (int i = 0; i < dim_; ++i) x(i) = unif(rng);
      mu = synthetic_means(x(0));
    } else {
      if (table_.rows() == 0) throw ValidationError("empty-table", "no rows to sample");
      std::uniform_int_distribution<int> pick(0, static_cast<int>(table_.rows()) - 1);
      const int row = pick(rng);
      x = table_.row(row).transpose();
      mu = true_means_row(row);
    }
    Eigen::VectorXd y(arms_);
    for (int a = 0; a < arms_; ++a) y(a) = mu(a) + noise_sd_ * gauss(rng);
    return {std::move(x), std::move(y)};
  }

  /// Held-out contexts from the same law with noiseless means; deterministic
  /// in the seed.
  TestSet make_test_set(int n_test, std::uint64_t seed) const {
    if (n_test < 1) throw ValidationError("test-size", "n_test must be >= 1");
    Rng rng(seed);
    TestSet test;
    test.contexts.resize(n_test, dim_);
    test.true_means.resize(n_test, arms_);
    if (kind_ == EnvKind::kSynthetic) {
      std::uniform_real_distribution<double> unif(-2.0, 2.0);
      for (int i = 0; i < n_test; ++i) {
        for (int c = 0; c < dim_; ++c) test.contexts(i, c) = unif(rng);
        test.true_means.row(i) = synthetic_means(test.contexts(i, 0)).transpose();
      }
    } else {
      std::uniform_int_distribution<int> pick(0, static_cast<int>(table_.rows()) - 1);
      for (int i = 0; i < n_test; ++i) {
        const int row = pick(rng);
        test.contexts.row(i) = table_.row(row);
        test.true_means.row(i) = true_means_row(row).transpose();
      }
    }
    return test;
  }

  int default_test_size() const {
    if (kind_ == EnvKind::kSynthetic) return 100000;
    return std::min(100000, 10 * static_cast<int>(table_.rows()));
  }

 private:
  EnvKind kind_ = EnvKind::kSynthetic;
  std::string name_;
  int dim_ = 0;
  int arms_ = 0;
  double noise_sd_ = 1.0;
  double outcome_bound_ = 1.0;
  std::uint64_t seed_ = 0;
  Eigen::MatrixXd table_;
  std::vector<int> labels_;
  std::vector<std::string> label_names_;
  std::unordered_map<std::string, int> row_index_;  // standardized row bytes -> first row id

  static Eigen::VectorXd synthetic_means(double x1) {
    Eigen::VectorXd mu(2);
    mu(0) = x1 * x1 - 1.0;
    mu(1) = 1.0 - x1 * x1;
    return mu;
  }

  Eigen::VectorXd one_hot(int label) const {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(arms_);
    mu(label) = 1.0;
    return mu;
  }

  /// Column-wise (x - mean) / sd; constant columns become all zeros.
  static Eigen::MatrixXd standardize(const Eigen::MatrixXd& raw) {
    Eigen::MatrixXd out = raw;
    const double n = static_cast<double>(raw.rows());
    for (int c = 0; c < raw.cols(); ++c) {
      const double mean = raw.col(c).mean();
      const double var = (raw.col(c).array() - mean).square().sum() / n;
      const double sd = std::sqrt(var);
      out.col(c) = (raw.col(c).array() - mean) / (sd > 0 ? sd : 1.0);
    }
    return out;
  }

  static std::string row_key(const Eigen::VectorXd& x) {
    std::string key(static_cast<std::size_t>(x.size()) * sizeof(double), '\0');
    std::memcpy(key.data(), x.data(), key.size());
    return key;
  }

  void build_row_index() {
    for (int r = 0; r < table_.rows(); ++r)
      row_index_.emplace(row_key(table_.row(r).transpose()), r);
  }
};

}  // namespace opl
