#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ddosgan/ingest.hpp"
#include "ddosgan/predictor.hpp"
#include "json.hpp"

namespace ddosgan::classifiers {

using ingest::Dataset;

struct TreeParams {
    std::size_t max_depth = 0;  // 0 = unlimited
    std::size_t min_samples_split = 2;
    std::size_t features_per_split = 0;  // 0 = all features
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::array<double, 2> proba{1.0, 0.0};
};

/// CART classifier: Gini splits at midpoints of sorted distinct values,
/// `x[feature] <= threshold` goes left.
class DecisionTreeModel final : public Predictor {
public:
    DecisionTreeModel() = default;
    DecisionTreeModel(std::vector<TreeNode> nodes, std::size_t n_features, TreeParams params)
        : nodes_(std::move(nodes)), n_features_(n_features), params_(params) {}

    double predict_proba(std::span<const double> x) const override;
    std::size_t n_features() const override { return n_features_; }

    const std::vector<TreeNode>& nodes() const { return nodes_; }
    const TreeParams& params() const { return params_; }
    std::size_t depth() const;

private:
    const TreeNode& leaf_for(std::span<const double> x) const;

    std::vector<TreeNode> nodes_;
    std::size_t n_features_ = 0;
    TreeParams params_;
};

DecisionTreeModel train_tree(const Dataset& train, const TreeParams& params = {}, std::uint64_t seed = 0);

struct ForestParams {
    std::size_t n_trees = 100;
    TreeParams tree;              // tree.features_per_split 0 = ceil(sqrt(d))
    bool bootstrap = true;
    unsigned threads = 0;
};

/// Bagged trees. Prediction is the majority vote; the score is the mean of
/// leaf probabilities, which also breaks vote ties.
class ForestModel final : public Predictor {
public:
    ForestModel() = default;
    ForestModel(std::vector<DecisionTreeModel> trees, std::vector<std::uint64_t> seeds, std::size_t features_per_split)
        : trees_(std::move(trees)), seeds_(std::move(seeds)), features_per_split_(features_per_split) {}

    double predict_proba(std::span<const double> x) const override;
    int predict(std::span<const double> x) const override;
    std::size_t n_features() const override { return trees_.empty() ? 0 : trees_.front().n_features(); }

    const std::vector<DecisionTreeModel>& trees() const { return trees_; }
    const std::vector<std::uint64_t>& seeds() const { return seeds_; }
    std::size_t features_per_split() const { return features_per_split_; }

private:
    std::vector<DecisionTreeModel> trees_;
    std::vector<std::uint64_t> seeds_;
    std::size_t features_per_split_ = 0;
};

/// Tree `t` trains with seed + t.
ForestModel train_forest(const Dataset& train, const ForestParams& params = {}, std::uint64_t seed = 2000);

struct LogisticParams {
    double lr = 0.1;
    std::size_t epochs = 200;
    double l2 = 1e-4;
};

class LogisticModel final : public Predictor {
public:
    LogisticModel() = default;
    LogisticModel(std::vector<double> weights, double bias, std::vector<double> mean, std::vector<double> std)
        : weights_(std::move(weights)), bias_(bias), mean_(std::move(mean)), std_(std::move(std)) {}

    double predict_proba(std::span<const double> x) const override;
    std::size_t n_features() const override { return weights_.size(); }

    const std::vector<double>& weights() const { return weights_; }
    double bias() const { return bias_; }
    const std::vector<double>& mean() const { return mean_; }
    const std::vector<double>& stddev() const { return std_; }
    /// Objective value before each epoch plus the final value (epochs + 1 entries).
    const std::vector<double>& loss_history() const { return loss_history_; }
    void set_loss_history(std::vector<double> h) { loss_history_ = std::move(h); }

private:
    std::vector<double> weights_;
    double bias_ = 0.0;
    std::vector<double> mean_;
    std::vector<double> std_;
    std::vector<double> loss_history_;
};

/// Full-batch gradient descent on standardized features, objective
/// mean log loss + (l2/2)|w|^2. The bias starts at the class-1 log-odds.
LogisticModel train_logistic(const Dataset& train, const LogisticParams& params = {});

class GaussianNBModel final : public Predictor {
public:
    GaussianNBModel() = default;
    GaussianNBModel(std::array<double, 2> priors, std::array<std::vector<double>, 2> mean,
                    std::array<std::vector<double>, 2> var, double epsilon)
        : priors_(priors), mean_(std::move(mean)), var_(std::move(var)), epsilon_(epsilon) {}

    double predict_proba(std::span<const double> x) const override;
    std::size_t n_features() const override { return mean_[0].size(); }

    const std::array<double, 2>& priors() const { return priors_; }
    const std::array<std::vector<double>, 2>& means() const { return mean_; }
    const std::array<std::vector<double>, 2>& variances() const { return var_; }
    double epsilon() const { return epsilon_; }

    /// log prior + sum of log densities, per class.
    std::array<double, 2> joint_log_likelihood(std::span<const double> x) const;

private:
    std::array<double, 2> priors_{0.5, 0.5};
    std::array<std::vector<double>, 2> mean_;
    std::array<std::vector<double>, 2> var_;  // already includes epsilon
    double epsilon_ = 0.0;
};

/// Variance floor epsilon = 1e-9 * largest per-feature variance of the training data.
GaussianNBModel train_gnb(const Dataset& train);

// --- evaluation -----------------------------------------------------------

struct ConfusionMatrix {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::size_t total() const { return tp + fp + tn + fn; }
};

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct MetricsReport {
    double accuracy = 0.0;
    std::array<ClassMetrics, 2> per_class;
    ClassMetrics macro;
    ClassMetrics weighted;
    /// Zero-denominator cases that were reported as 0, e.g. "precision[1]".
    std::vector<std::string> undefined;
};

struct Evaluation {
    MetricsReport metrics;
    ConfusionMatrix confusion;
};

Evaluation evaluate_predictions(std::span<const int> predicted, std::span<const int> labels);
Evaluation evaluate(const Predictor& model, const Dataset& test);

/// Tabular layout: accuracy line, per-class rows, accuracy, macro avg, weighted avg.
std::string format_report(const Evaluation& eval);

/// Model order by ascending false negatives, then descending accuracy, then input order.
std::vector<std::size_t> rank_models(const std::vector<Evaluation>& evals);

// --- persistence ----------------------------------------------------------

nlohmann::json to_json(const DecisionTreeModel& m);
nlohmann::json to_json(const ForestModel& m);
nlohmann::json to_json(const LogisticModel& m);
nlohmann::json to_json(const GaussianNBModel& m);
/// Dispatches on the document's "kind" tag.
std::unique_ptr<Predictor> model_from_json(const nlohmann::json& doc);

std::vector<int> predict_all(const Predictor& model, const Dataset& data);

}  // namespace ddosgan::classifiers
