#include "ddosgan/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "ddosgan/common.hpp"

namespace ddosgan::gmm {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274;

double log_normal(double x, double mu, double sigma) {
    const double z = (x - mu) / sigma;
    return -0.5 * z * z - std::log(sigma) - kLogSqrt2Pi;
}

double log_sum_exp(std::span<const double> xs) {
    double top = -std::numeric_limits<double>::infinity();
    for (double x : xs) top = std::max(top, x);
    if (!std::isfinite(top)) return top;
    double s = 0.0;
    for (double x : xs) s += std::exp(x - top);
    return top + std::log(s);
}

std::vector<double> kmeans_pp(std::span<const double> xs, std::size_t m, std::mt19937_64& rng) {
    std::vector<double> centers;
    std::uniform_int_distribution<std::size_t> first(0, xs.size() - 1);
    centers.push_back(xs[first(rng)]);
    std::vector<double> d2(xs.size());
    while (centers.size() < m) {
        double total = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (double c : centers) best = std::min(best, (xs[i] - c) * (xs[i] - c));
            d2[i] = best;
            total += best;
        }
        std::uniform_real_distribution<double> pick(0.0, total);
        double target = pick(rng), acc = 0.0;
        std::size_t chosen = xs.size();
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (d2[i] <= 0.0) continue;
            acc += d2[i];
            chosen = i;
            if (acc >= target) break;
        }
        centers.push_back(xs[chosen]);
    }
    std::sort(centers.begin(), centers.end());
    return centers;
}

}  // namespace

FitResult fit_em(std::span<const double> column, const FitConfig& cfg, std::string name) {
    if (cfg.m < 1) throw ValidationError("mixture needs at least one component");
    if (column.empty()) throw ValidationError("cannot fit a mixture to an empty column");
    for (double x : column)
        if (!std::isfinite(x)) throw ValidationError("column holds a non-finite value");

    const auto n = static_cast<double>(column.size());
    std::vector<double> distinct(column.begin(), column.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    FitResult result;
    auto& model = result.model;
    model.name = std::move(name);
    if (distinct.size() == 1) {
        result.constant = true;
        result.reduced = cfg.m > 1;
        model.weights = {1.0};
        model.means = {distinct.front()};
        model.stds = {1.0};
        result.log_likelihood.push_back(mean_log_likelihood(column, model));
        return result;
    }

    const std::size_t m = std::min(cfg.m, distinct.size());
    result.reduced = m < cfg.m;

    double mean = 0.0;
    for (double x : column) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : column) var += (x - mean) * (x - mean);
    const double col_std = std::sqrt(var / n);
    const double floor = 1e-6 * col_std;

    std::mt19937_64 rng(cfg.seed);
    model.means = kmeans_pp(column, m, rng);
    model.weights.assign(m, 1.0 / static_cast<double>(m));
    model.stds.assign(m, col_std);

    std::vector<double> resp(column.size() * m);
    std::vector<double> logp(m);
    auto e_step = [&] {
        double ll = 0.0;
        for (std::size_t i = 0; i < column.size(); ++i) {
            for (std::size_t k = 0; k < m; ++k)
                logp[k] = model.weights[k] > 0.0 ? std::log(model.weights[k]) + log_normal(column[i], model.means[k], model.stds[k])
                                                 : -std::numeric_limits<double>::infinity();
            const double lse = log_sum_exp(logp);
            ll += lse;
            for (std::size_t k = 0; k < m; ++k) resp[i * m + k] = std::exp(logp[k] - lse);
        }
        return ll / n;
    };
    auto m_step = [&] {
        for (std::size_t k = 0; k < m; ++k) {
            double nk = 0.0, sx = 0.0;
            for (std::size_t i = 0; i < column.size(); ++i) {
                nk += resp[i * m + k];
                sx += resp[i * m + k] * column[i];
            }
            model.weights[k] = nk / n;
            if (nk < 1e-12) continue;  // dead component keeps its location
            const double mu = sx / nk;
            double sv = 0.0;
            for (std::size_t i = 0; i < column.size(); ++i) sv += resp[i * m + k] * (column[i] - mu) * (column[i] - mu);
            model.means[k] = mu;
            model.stds[k] = std::max(std::sqrt(sv / nk), floor);
        }
        double total = 0.0;
        for (double w : model.weights) total += w;
        for (double& w : model.weights) w /= total;
    };

    double ll = e_step();
    result.log_likelihood.push_back(ll);
    for (std::size_t it = 0; it < cfg.max_iters; ++it) {
        m_step();
        const double next = e_step();
        result.log_likelihood.push_back(next);
        const bool converged = next - ll < cfg.tol;
        ll = next;
        if (converged) break;
    }
    return result;
}

std::vector<double> responsibilities(double c, const GmmColumnModel& model) {
    std::vector<double> logp(model.m());
    for (std::size_t k = 0; k < model.m(); ++k)
        logp[k] = model.weights[k] > 0.0 ? std::log(model.weights[k]) + log_normal(c, model.means[k], model.stds[k])
                                         : -std::numeric_limits<double>::infinity();
    const double lse = log_sum_exp(logp);
    std::vector<double> u(model.m());
    for (std::size_t k = 0; k < model.m(); ++k) u[k] = std::exp(logp[k] - lse);
    return u;
}

double mean_log_likelihood(std::span<const double> column, const GmmColumnModel& model) {
    std::vector<double> logp(model.m());
    double ll = 0.0;
    for (double c : column) {
        for (std::size_t k = 0; k < model.m(); ++k)
            logp[k] = model.weights[k] > 0.0 ? std::log(model.weights[k]) + log_normal(c, model.means[k], model.stds[k])
                                             : -std::numeric_limits<double>::infinity();
        ll += log_sum_exp(logp);
    }
    return ll / static_cast<double>(column.size());
}

NormalizedValue transform(double c, const GmmColumnModel& model) {
    NormalizedValue nv;
    nv.u = responsibilities(c, model);
    const auto k = static_cast<std::size_t>(std::max_element(nv.u.begin(), nv.u.end()) - nv.u.begin());
    nv.v = std::clamp((c - model.means[k]) / (2.0 * model.stds[k]), -1.0, 1.0);
    return nv;
}

double inverse_transform(double v, std::span<const double> u, const GmmColumnModel& model) {
    if (u.size() != model.m()) throw ValidationError("responsibility vector length does not match the mixture");
    const auto k = static_cast<std::size_t>(std::max_element(u.begin(), u.end()) - u.begin());
    return 2.0 * model.stds[k] * v + model.means[k];
}

nlohmann::json to_json(const GmmColumnModel& model) {
    return {{"name", model.name}, {"weights", model.weights}, {"means", model.means}, {"stds", model.stds}};
}

GmmColumnModel column_from_json(const nlohmann::json& doc) {
    GmmColumnModel m;
    m.name = doc.at("name").get<std::string>();
    m.weights = doc.at("weights").get<std::vector<double>>();
    m.means = doc.at("means").get<std::vector<double>>();
    m.stds = doc.at("stds").get<std::vector<double>>();
    if (m.weights.size() != m.means.size() || m.stds.size() != m.means.size() || m.means.empty())
        throw ValidationError("mixture document for '" + m.name + "' has inconsistent lengths");
    return m;
}

}  // namespace ddosgan::gmm
