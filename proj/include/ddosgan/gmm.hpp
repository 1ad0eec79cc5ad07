#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace ddosgan::gmm {

/// One-dimensional Gaussian mixture for a single numeric column.
struct GmmColumnModel {
    std::string name;
    std::vector<double> weights;
    std::vector<double> means;
    std::vector<double> stds;

    std::size_t m() const { return means.size(); }
};

/// Mode-specific normalization of one value: v is the residual against the
/// most responsible component, scaled by 2 sigma and clipped to [-1, 1];
/// u holds the component responsibilities.
struct NormalizedValue {
    double v = 0.0;
    std::vector<double> u;
};

struct FitConfig {
    std::size_t m = 5;
    std::uint64_t seed = 3000;
    std::size_t max_iters = 200;
    double tol = 1e-8;  // on mean per-sample log-likelihood
};

struct FitResult {
    GmmColumnModel model;
    /// Mean log-likelihood after every E-step, starting with the seeded mixture.
    std::vector<double> log_likelihood;
    /// The column had fewer distinct values than requested components.
    bool reduced = false;
    /// Constant column; fitted as one component with sigma = 1.
    bool constant = false;
};

/// EM with k-means++ seeding. Component sigmas never drop below
/// 1e-6 * column std.
FitResult fit_em(std::span<const double> column, const FitConfig& cfg = {}, std::string name = {});

std::vector<double> responsibilities(double c, const GmmColumnModel& model);
double mean_log_likelihood(std::span<const double> column, const GmmColumnModel& model);

NormalizedValue transform(double c, const GmmColumnModel& model);
/// c = 2 sigma_k v + mu_k with k = argmax u.
double inverse_transform(double v, std::span<const double> u, const GmmColumnModel& model);
inline double inverse_transform(const NormalizedValue& nv, const GmmColumnModel& model) {
    return inverse_transform(nv.v, nv.u, model);
}

nlohmann::json to_json(const GmmColumnModel& model);
GmmColumnModel column_from_json(const nlohmann::json& doc);

}  // namespace ddosgan::gmm
