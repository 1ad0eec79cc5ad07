#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "ddosgan/common.hpp"
#include "ddosgan/gmm.hpp"

using namespace ddosgan;
using namespace ddosgan::gmm;

namespace {

std::vector<double> two_modes(std::size_t per_mode, double a, double b, double sd, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, sd);
    std::vector<double> out;
    for (std::size_t i = 0; i < per_mode; ++i) {
        out.push_back(a + n(rng));
        out.push_back(b + n(rng));
    }
    return out;
}

}  // namespace

TEST_CASE("single component equals the sample moments") {
    std::mt19937_64 rng(1);
    std::gamma_distribution<double> g(2.0, 3.0);
    std::vector<double> col(500);
    for (auto& v : col) v = g(rng);
    const auto fit = fit_em(col, {1, 3000, 200, 1e-8}, "x");
    const double mean = std::accumulate(col.begin(), col.end(), 0.0) / 500.0;
    double var = 0.0;
    for (double v : col) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / 500.0);
    CHECK(std::abs(fit.model.means[0] - mean) < 1e-9);
    CHECK(std::abs(fit.model.stds[0] - sd) < 1e-9);
    CHECK(fit.model.weights[0] == doctest::Approx(1.0));
    CHECK(fit.model.name == "x");
}

TEST_CASE("two well separated modes are recovered") {
    const auto col = two_modes(500, 0.0, 100.0, 1.0, 2);
    const auto fit = fit_em(col, {2, 3000, 200, 1e-8});
    auto means = fit.model.means;
    std::sort(means.begin(), means.end());
    CHECK(std::abs(means[0] - 0.0) < 0.5);
    CHECK(std::abs(means[1] - 100.0) < 0.5);
}

TEST_CASE("EM log-likelihood never decreases") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> loc(-50.0, 50.0), scale(0.2, 5.0);
    for (int trial = 0; trial < 12; ++trial) {
        const int k = 1 + trial % 4;
        std::vector<double> col;
        for (int c = 0; c < k; ++c) {
            std::normal_distribution<double> n(loc(rng), scale(rng));
            for (int i = 0; i < 150; ++i) col.push_back(n(rng));
        }
        const auto fit = fit_em(col, {5, static_cast<std::uint64_t>(trial), 300, 1e-10});
        const auto& ll = fit.log_likelihood;
        REQUIRE(ll.size() >= 2);
        for (std::size_t i = 1; i < ll.size(); ++i) CHECK(ll[i] >= ll[i - 1] - 1e-9);
        const double wsum = std::accumulate(fit.model.weights.begin(), fit.model.weights.end(), 0.0);
        CHECK(std::abs(wsum - 1.0) < 1e-9);
    }
}

TEST_CASE("degenerate columns") {
    const std::vector<double> constant(50, 7.0);
    const auto c = fit_em(constant);
    CHECK(c.constant);
    CHECK(c.model.m() == 1);
    CHECK(c.model.stds[0] == 1.0);
    CHECK(c.model.means[0] == 7.0);

    std::vector<double> three;
    for (int i = 0; i < 30; ++i) three.push_back(double(i % 3));
    const auto r = fit_em(three, {5, 1, 100, 1e-8});
    CHECK(r.reduced);
    CHECK(r.model.m() == 3);
    CHECK_THROWS_AS(fit_em(std::vector<double>{}), ValidationError);
    CHECK_THROWS_AS(fit_em(three, {0, 1, 100, 1e-8}), ValidationError);
}

TEST_CASE("fit is deterministic per seed") {
    const auto col = two_modes(200, -3.0, 4.0, 1.5, 4);
    const auto a = fit_em(col, {4, 9, 200, 1e-8}), b = fit_em(col, {4, 9, 200, 1e-8});
    CHECK(a.model.means == b.model.means);
    CHECK(a.model.stds == b.model.stds);
    CHECK(a.log_likelihood == b.log_likelihood);
}

TEST_CASE("transform examples") {
    GmmColumnModel unit{"u", {1.0}, {0.0}, {1.0}};
    auto nv = transform(1.0, unit);
    CHECK(nv.v == 0.5);
    CHECK(nv.u == std::vector<double>{1.0});
    CHECK(transform(0.0, unit).v == 0.0);
    CHECK(transform(10.0, unit).v == 1.0);
    CHECK(transform(-10.0, unit).v == -1.0);
    // Clipped values decode to the 2-sigma boundary.
    CHECK(inverse_transform(transform(10.0, unit), unit) == 2.0);

    GmmColumnModel two{"t", {0.3, 0.7}, {0.0, 10.0}, {1.0, 2.0}};
    const std::vector<double> u_any{0.2, 0.8};
    CHECK(inverse_transform(0.0, u_any, two) == 10.0);
    const auto r = responsibilities(1.0, two);
    // Posterior of component 0 at c = 1, by hand.
    auto pdf = [](double x, double m, double s) { return std::exp(-0.5 * (x - m) * (x - m) / (s * s)) / (s * std::sqrt(2 * M_PI)); };
    const double p0 = 0.3 * pdf(1.0, 0.0, 1.0), p1 = 0.7 * pdf(1.0, 10.0, 2.0);
    CHECK(r[0] == doctest::Approx(p0 / (p0 + p1)).epsilon(1e-12));
    CHECK(std::abs(r[0] + r[1] - 1.0) < 1e-12);
    // Far in the tail the posterior must not underflow to NaN.
    const auto far = responsibilities(1e6, two);
    CHECK(std::isfinite(far[0]));
    CHECK(std::abs(far[0] + far[1] - 1.0) < 1e-9);
}

TEST_CASE("round trip on in-range samples") {
    const auto col = two_modes(400, 5.0, 60.0, 3.0, 5);
    const auto model = fit_em(col, {5, 3, 200, 1e-8}).model;
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::size_t tested = 0;
    while (tested < 1000) {
        const std::size_t k = rng() % model.m();
        const double c = model.means[k] + 2.0 * model.stds[k] * unit(rng);
        const auto nv = transform(c, model);
        const auto kstar = static_cast<std::size_t>(std::max_element(nv.u.begin(), nv.u.end()) - nv.u.begin());
        if (std::abs(c - model.means[kstar]) > 2.0 * model.stds[kstar]) continue;  // would clip
        CHECK(std::abs(inverse_transform(nv, model) - c) < 1e-9);
        ++tested;
    }
}

TEST_CASE("model document round trip") {
    GmmColumnModel m{"Flow Duration", {0.25, 0.75}, {1.5, -2.0}, {0.1, 3.0}};
    const auto back = column_from_json(nlohmann::json::parse(to_json(m).dump()));
    CHECK(back.name == m.name);
    CHECK(back.weights == m.weights);
    CHECK(back.means == m.means);
    CHECK(back.stds == m.stds);
}
