#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ddosgan/predictor.hpp"
#include "json.hpp"

namespace ddosgan::shapley {

/// Any real-valued model of a feature vector.
using ModelFn = std::function<double(std::span<const double>)>;

/// Malicious-class probability of a trained classifier.
ModelFn malicious_score(const Predictor& model);

/// Background rows used to stand in for "absent" features.
using Background = std::vector<std::vector<double>>;

inline constexpr std::size_t kMaxExactFeatures = 10;

/// Exact Shapley values of `model` at `x`. Absent features take background
/// values and the coalition value is averaged over the background. Works off
/// the subset form of the permutation average, 2^d coalitions. d <= 10.
std::vector<double> exact_shapley(const ModelFn& model, std::span<const double> x, const Background& background);

/// Permutation-sampling estimate. Each draw pairs a random feature order with
/// one uniformly drawn background row; draws come in antithetic pairs (an
/// order and its reverse). Unbiased for the exact value; pure in `seed`.
std::vector<double> mc_shapley(const ModelFn& model, std::span<const double> x, const Background& background,
                               std::size_t n_permutations, std::uint64_t seed);

/// Mean model output over the background, E[f].
double baseline(const ModelFn& model, const Background& background);

struct PhiMatrix {
    std::vector<std::vector<double>> phi;  // n_samples x n_features
    double baseline = 0.0;
};

struct ImportanceReport {
    std::vector<std::string> feature_names;
    std::vector<double> importance;
    std::vector<std::size_t> ranking;
    std::size_t n = 0;
};

/// I_j = (1/n) sum_i |phi_ij|, ranked descending with ties broken by index.
ImportanceReport global_importance(const PhiMatrix& phis, std::vector<std::string> feature_names = {});

/// First k entries of the ranking.
std::vector<std::size_t> top_k(const ImportanceReport& report, std::size_t k = 10);

struct ExplainConfig {
    std::size_t background_rows = 100;
    std::size_t eval_rows = 200;
    std::size_t n_permutations = 64;
    std::uint64_t seed = 1000;
    unsigned threads = 0;
    /// Use exact enumeration whenever d <= kMaxExactFeatures.
    bool prefer_exact = true;
};

/// Draws the background and evaluation subsamples, computes one phi row per
/// evaluation sample (in parallel, merged in sample order).
PhiMatrix explain(const ModelFn& model, const std::vector<std::vector<double>>& background_pool,
                  const std::vector<std::vector<double>>& eval_pool, const ExplainConfig& cfg);

nlohmann::json to_json(const ImportanceReport& report);
ImportanceReport importance_from_json(const nlohmann::json& doc);

/// Sorted bar chart in plain text.
std::string render_bars(const ImportanceReport& report, std::size_t max_rows = 20, std::size_t width = 40);

}  // namespace ddosgan::shapley
