#include "ddosgan/shapley.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "ddosgan/common.hpp"

namespace ddosgan::shapley {

namespace {

std::vector<std::size_t> sample_indices(std::size_t pool, std::size_t want, std::uint64_t seed) {
    std::vector<std::size_t> idx(pool);
    std::iota(idx.begin(), idx.end(), 0);
    if (want >= pool) return idx;
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(want);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace

ModelFn malicious_score(const Predictor& model) {
    return [&model](std::span<const double> x) { return model.predict_proba(x); };
}

double baseline(const ModelFn& model, const Background& background) {
    if (background.empty()) throw ValidationError("background set is empty");
    double sum = 0.0;
    for (const auto& b : background) sum += model(b);
    return sum / static_cast<double>(background.size());
}

std::vector<double> exact_shapley(const ModelFn& model, std::span<const double> x, const Background& background) {
    const std::size_t d = x.size();
    if (d > kMaxExactFeatures)
        throw ValidationError("exact_shapley supports at most " + std::to_string(kMaxExactFeatures) + " features (got " +
                              std::to_string(d) + "); use mc_shapley");
    if (background.empty()) throw ValidationError("background set is empty");
    for (const auto& b : background)
        if (b.size() != d) throw ValidationError("background row width does not match x");

    const std::size_t n_subsets = std::size_t{1} << d;
    std::vector<double> value(n_subsets, 0.0);
    std::vector<double> z(d);
    for (std::size_t mask = 0; mask < n_subsets; ++mask) {
        double sum = 0.0;
        for (const auto& b : background) {
            for (std::size_t j = 0; j < d; ++j) z[j] = (mask >> j) & 1 ? x[j] : b[j];
            sum += model(z);
        }
        value[mask] = sum / static_cast<double>(background.size());
    }

    // weight[s] = s! (d-s-1)! / d!
    std::vector<double> weight(d, 0.0);
    for (std::size_t s = 0; s < d; ++s) {
        double w = 1.0 / static_cast<double>(d);
        // 1 / (d * C(d-1, s))
        double binom = 1.0;
        for (std::size_t k = 1; k <= s; ++k) binom = binom * static_cast<double>(d - 1 - s + k) / static_cast<double>(k);
        weight[s] = w / binom;
    }

    std::vector<double> phi(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        const std::size_t bit = std::size_t{1} << j;
        double acc = 0.0;
        for (std::size_t mask = 0; mask < n_subsets; ++mask) {
            if (mask & bit) continue;
            acc += weight[static_cast<std::size_t>(std::popcount(mask))] * (value[mask | bit] - value[mask]);
        }
        phi[j] = acc;
    }
    return phi;
}

std::vector<double> mc_shapley(const ModelFn& model, std::span<const double> x, const Background& background,
                               std::size_t n_permutations, std::uint64_t seed) {
    if (n_permutations < 1) throw ValidationError("n_permutations must be >= 1");
    if (background.empty()) throw ValidationError("background set is empty");
    const std::size_t d = x.size();
    for (const auto& b : background)
        if (b.size() != d) throw ValidationError("background row width does not match x");

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, background.size() - 1);
    std::vector<double> phi(d, 0.0);
    std::vector<std::size_t> order(d);
    std::vector<double> z(d);

    auto walk = [&](auto first, auto last, const std::vector<double>& b) {
        z.assign(b.begin(), b.end());
        double prev = model(z);
        for (auto it = first; it != last; ++it) {
            z[*it] = x[*it];
            double cur = model(z);
            phi[*it] += cur - prev;
            prev = cur;
        }
    };

    std::size_t done = 0;
    while (done < n_permutations) {
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        const auto& b = background[pick(rng)];
        walk(order.begin(), order.end(), b);
        ++done;
        if (done < n_permutations) {
            walk(order.rbegin(), order.rend(), b);
            ++done;
        }
    }
    for (auto& p : phi) p /= static_cast<double>(n_permutations);
    return phi;
}

ImportanceReport global_importance(const PhiMatrix& phis, std::vector<std::string> feature_names) {
    if (phis.phi.empty() || phis.phi.front().empty()) throw ValidationError("phi matrix is empty");
    const std::size_t d = phis.phi.front().size();
    ImportanceReport report;
    report.n = phis.phi.size();
    report.importance.assign(d, 0.0);
    for (const auto& row : phis.phi) {
        if (row.size() != d) throw ValidationError("phi matrix rows differ in width");
        for (std::size_t j = 0; j < d; ++j) report.importance[j] += std::abs(row[j]);
    }
    for (auto& v : report.importance) v /= static_cast<double>(report.n);
    report.ranking.resize(d);
    std::iota(report.ranking.begin(), report.ranking.end(), 0);
    std::stable_sort(report.ranking.begin(), report.ranking.end(),
                     [&](std::size_t a, std::size_t b) { return report.importance[a] > report.importance[b]; });
    if (feature_names.empty())
        for (std::size_t j = 0; j < d; ++j) feature_names.push_back("f" + std::to_string(j));
    if (feature_names.size() != d) throw ValidationError("feature name count does not match phi width");
    report.feature_names = std::move(feature_names);
    return report;
}

std::vector<std::size_t> top_k(const ImportanceReport& report, std::size_t k) {
    if (k < 1 || k > report.ranking.size())
        throw ValidationError("k must lie in [1, " + std::to_string(report.ranking.size()) + "], got " + std::to_string(k));
    return {report.ranking.begin(), report.ranking.begin() + static_cast<std::ptrdiff_t>(k)};
}

PhiMatrix explain(const ModelFn& model, const std::vector<std::vector<double>>& background_pool,
                  const std::vector<std::vector<double>>& eval_pool, const ExplainConfig& cfg) {
    if (background_pool.empty()) throw ValidationError("background pool is empty");
    if (eval_pool.empty()) throw ValidationError("evaluation pool is empty");
    Background background;
    for (auto i : sample_indices(background_pool.size(), cfg.background_rows, cfg.seed))
        background.push_back(background_pool[i]);
    auto eval_idx = sample_indices(eval_pool.size(), cfg.eval_rows, cfg.seed + 1);

    const std::size_t d = eval_pool.front().size();
    const bool exact = cfg.prefer_exact && d <= kMaxExactFeatures;
    PhiMatrix out;
    out.baseline = baseline(model, background);
    out.phi.resize(eval_idx.size());
    parallel_for(eval_idx.size(), cfg.threads, [&](std::size_t i) {
        const auto& x = eval_pool[eval_idx[i]];
        out.phi[i] = exact ? exact_shapley(model, x, background)
                           : mc_shapley(model, x, background, cfg.n_permutations, cfg.seed + 2 + i);
    });
    return out;
}

nlohmann::json to_json(const ImportanceReport& report) {
    nlohmann::json doc;
    doc["format"] = "ddosgan.importance";
    doc["version"] = 1;
    doc["n"] = report.n;
    nlohmann::json importance = nlohmann::json::object();
    for (std::size_t j = 0; j < report.importance.size(); ++j) importance[report.feature_names[j]] = report.importance[j];
    doc["importance"] = importance;
    doc["feature_names"] = report.feature_names;
    doc["ranking"] = report.ranking;
    return doc;
}

ImportanceReport importance_from_json(const nlohmann::json& doc) {
    if (doc.value("format", "") != "ddosgan.importance" || doc.value("version", 0) != 1)
        throw ValidationError("not an importance document");
    ImportanceReport r;
    r.n = doc.at("n").get<std::size_t>();
    r.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    r.ranking = doc.at("ranking").get<std::vector<std::size_t>>();
    for (const auto& name : r.feature_names) r.importance.push_back(doc.at("importance").at(name).get<double>());
    return r;
}

std::string render_bars(const ImportanceReport& report, std::size_t max_rows, std::size_t width) {
    std::ostringstream out;
    std::size_t name_width = 0;
    const std::size_t rows = std::min(max_rows, report.ranking.size());
    for (std::size_t r = 0; r < rows; ++r) name_width = std::max(name_width, report.feature_names[report.ranking[r]].size());
    const double top = report.ranking.empty() ? 0.0 : report.importance[report.ranking.front()];
    for (std::size_t r = 0; r < rows; ++r) {
        const auto j = report.ranking[r];
        const auto bar = top > 0.0 ? static_cast<std::size_t>(std::lround(report.importance[j] / top * static_cast<double>(width))) : 0;
        out << std::setw(static_cast<int>(name_width)) << report.feature_names[j] << " | " << std::string(bar, '#')
            << ' ' << std::setprecision(6) << report.importance[j] << '\n';
    }
    return out.str();
}

}  // namespace ddosgan::shapley
