#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "ddosgan/common.hpp"
#include "ddosgan/shapley.hpp"

using namespace ddosgan;
using namespace ddosgan::shapley;

namespace {

// Shapley values by brute-force enumeration of every feature ordering,
// independent of the library's subset formula.
std::vector<double> permutation_oracle(const ModelFn& f, const std::vector<double>& x, const Background& bg) {
    const std::size_t d = x.size();
    auto value = [&](const std::vector<bool>& present) {
        double total = 0.0;
        for (const auto& b : bg) {
            std::vector<double> z(d);
            for (std::size_t j = 0; j < d; ++j) z[j] = present[j] ? x[j] : b[j];
            total += f(z);
        }
        return total / static_cast<double>(bg.size());
    };
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> phi(d, 0.0);
    double count = 0.0;
    do {
        std::vector<bool> present(d, false);
        double prev = value(present);
        for (auto j : order) {
            present[j] = true;
            const double next = value(present);
            phi[j] += next - prev;
            prev = next;
        }
        count += 1.0;
    } while (std::next_permutation(order.begin(), order.end()));
    for (auto& p : phi) p /= count;
    return phi;
}

struct RandomModel {
    std::size_t d;
    std::size_t dummy;     // never read
    std::size_t sym_a, sym_b;  // enter symmetrically
    std::vector<double> w;
    std::vector<std::array<std::size_t, 2>> pairs;
    std::vector<double> pair_w;
    double threshold;

    double operator()(std::span<const double> x) const {
        double out = w[sym_a] * (x[sym_a] + x[sym_b]) + std::tanh(x[sym_a] * x[sym_b]);
        for (std::size_t j = 0; j < d; ++j)
            if (j != dummy && j != sym_a && j != sym_b) out += w[j] * x[j];
        for (std::size_t k = 0; k < pairs.size(); ++k) out += pair_w[k] * x[pairs[k][0]] * x[pairs[k][1]];
        out += x[pairs[0][0]] > threshold ? 1.5 : 0.0;
        return out;
    }
};

RandomModel random_model(std::size_t d, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    RandomModel m{d, d - 1, 0, 1, {}, {}, {}, n(rng)};
    for (std::size_t j = 0; j < d; ++j) m.w.push_back(n(rng));
    std::uniform_int_distribution<std::size_t> pick(2, d - 2);
    for (int k = 0; k < 3; ++k) {
        std::size_t a = pick(rng), b = pick(rng);
        m.pairs.push_back({a, b});
        m.pair_w.push_back(n(rng));
    }
    return m;
}

}  // namespace

TEST_CASE("exact_shapley: closed-form examples") {
    const ModelFn linear = [](std::span<const double> x) { return 2 * x[0] + 3 * x[1]; };
    const std::vector<double> x{1.0, 1.0};
    const Background zero{{0.0, 0.0}};
    const auto phi = exact_shapley(linear, x, zero);
    CHECK(phi[0] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(phi[1] == doctest::Approx(3.0).epsilon(1e-15));

    const ModelFn constant = [](std::span<const double>) { return 4.0; };
    for (double p : exact_shapley(constant, x, zero)) CHECK(p == 0.0);

    const ModelFn twin = [](std::span<const double> z) { return z[0] + z[1]; };
    const auto sym = exact_shapley(twin, x, zero);
    CHECK(sym[0] == doctest::Approx(1.0));
    CHECK(sym[1] == doctest::Approx(1.0));
}

TEST_CASE("exact_shapley refuses more than ten features") {
    const ModelFn sum = [](std::span<const double> z) { return std::accumulate(z.begin(), z.end(), 0.0); };
    std::vector<double> x(11, 1.0);
    CHECK_THROWS_AS(exact_shapley(sum, x, Background{std::vector<double>(11, 0.0)}), ValidationError);
    CHECK_THROWS_AS(exact_shapley(sum, std::vector<double>{1.0}, Background{}), ValidationError);
    CHECK_NOTHROW(exact_shapley(sum, std::vector<double>(10, 1.0), Background{std::vector<double>(10, 0.0)}));
}

TEST_CASE("Shapley axioms on random models, and agreement with the permutation oracle") {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 24; ++trial) {
        const std::size_t d = 4 + static_cast<std::size_t>(trial % 5);  // 4..8
        const auto model = random_model(d, rng);
        const ModelFn f = [&](std::span<const double> z) { return model(z); };
        std::vector<double> x(d);
        for (auto& v : x) v = n(rng);
        x[model.sym_b] = x[model.sym_a];
        Background bg(5, std::vector<double>(d));
        for (auto& b : bg) {
            for (auto& v : b) v = n(rng);
            b[model.sym_b] = b[model.sym_a];
        }
        const auto phi = exact_shapley(f, x, bg);
        const double sum = std::accumulate(phi.begin(), phi.end(), 0.0);
        CHECK(std::abs(sum + baseline(f, bg) - f(x)) < 1e-9);
        CHECK(phi[model.dummy] == 0.0);
        CHECK(std::abs(phi[model.sym_a] - phi[model.sym_b]) < 1e-12);
        if (d <= 7) {
            const auto oracle = permutation_oracle(f, x, bg);
            for (std::size_t j = 0; j < d; ++j) CHECK(std::abs(phi[j] - oracle[j]) < 1e-9);
        }
    }
}

TEST_CASE("mc_shapley converges to exact within 5% of the output range") {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t d = 3 + static_cast<std::size_t>(trial % 6);  // 3..8
        const auto model = random_model(std::max<std::size_t>(d, 4), rng);
        const ModelFn f = [&](std::span<const double> z) { return model(z); };
        const std::size_t D = model.d;
        std::vector<double> x(D);
        for (auto& v : x) v = n(rng);
        Background bg(8, std::vector<double>(D));
        for (auto& b : bg)
            for (auto& v : b) v = n(rng);
        // Output range over every hybrid of x with a background row.
        double lo = f(x), hi = lo;
        for (const auto& b : bg)
            for (std::size_t mask = 0; mask < (std::size_t{1} << D); ++mask) {
                std::vector<double> z(D);
                for (std::size_t j = 0; j < D; ++j) z[j] = (mask >> j & 1) ? x[j] : b[j];
                lo = std::min(lo, f(z));
                hi = std::max(hi, f(z));
            }
        const auto exact = exact_shapley(f, x, bg);
        const auto mc = mc_shapley(f, x, bg, 2000, 7 + trial);
        for (std::size_t j = 0; j < D; ++j) CHECK(std::abs(mc[j] - exact[j]) < 0.05 * (hi - lo));
        CHECK(mc == mc_shapley(f, x, bg, 2000, 7 + trial));
        CHECK(mc[model.dummy] == 0.0);
    }
    const ModelFn constant = [](std::span<const double>) { return -1.0; };
    for (double p : mc_shapley(constant, std::vector<double>{1, 2, 3}, Background{{0, 0, 0}, {1, 1, 1}}, 50, 1)) CHECK(p == 0.0);
    CHECK_THROWS_AS(mc_shapley(constant, std::vector<double>{1.0}, Background{}, 10, 1), ValidationError);
    CHECK_THROWS_AS(mc_shapley(constant, std::vector<double>{1.0}, Background{{0.0}}, 0, 1), ValidationError);
}

TEST_CASE("global importance and top-k") {
    PhiMatrix m;
    m.phi = {{1.0, -1.0}, {3.0, 1.0}};
    auto r = global_importance(m, {"f0", "f1"});
    CHECK(r.importance == std::vector<double>{2.0, 1.0});
    CHECK(r.ranking == std::vector<std::size_t>{0, 1});
    CHECK(r.n == 2);
    CHECK(top_k(r, 1) == std::vector<std::size_t>{0});
    CHECK(top_k(r, 2) == r.ranking);
    CHECK_THROWS_AS(top_k(r, 0), ValidationError);
    CHECK_THROWS_AS(top_k(r, 3), ValidationError);

    PhiMatrix single;
    single.phi = {{0.0, 5.0}};
    CHECK(global_importance(single).importance == std::vector<double>{0.0, 5.0});
    CHECK(global_importance(single).ranking == std::vector<std::size_t>{1, 0});

    PhiMatrix zeros;
    zeros.phi = {{0.0, 0.0, 0.0}};
    CHECK(global_importance(zeros).ranking == std::vector<std::size_t>{0, 1, 2});
    CHECK_THROWS_AS(global_importance(PhiMatrix{}), ValidationError);

    // Positive rescaling keeps the argmax.
    PhiMatrix scaled = m;
    for (auto& row : scaled.phi)
        for (auto& v : row) v *= 7.5;
    CHECK(global_importance(scaled).ranking.front() == r.ranking.front());
}

TEST_CASE("importance document round trip and bar report") {
    PhiMatrix m;
    m.phi = {{0.5, -2.0, 0.25}};
    const auto r = global_importance(m, {"a", "b", "c"});
    const auto back = importance_from_json(nlohmann::json::parse(to_json(r).dump()));
    CHECK(back.importance == r.importance);
    CHECK(back.ranking == r.ranking);
    CHECK(back.feature_names == r.feature_names);
    CHECK(back.n == 1);
    const auto bars = render_bars(r);
    CHECK(bars.find("b |") < bars.find("a |"));
    CHECK(bars.find("c |") != std::string::npos);
    CHECK_THROWS_AS(importance_from_json(nlohmann::json{{"format", "other"}}), ValidationError);
}

TEST_CASE("explain is deterministic and independent of thread count") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<std::vector<double>> pool(300, std::vector<double>(12));
    for (auto& r : pool)
        for (auto& v : r) v = n(rng);
    const ModelFn f = [](std::span<const double> z) { return z[0] * z[1] + std::sin(z[5]) - z[11]; };
    ExplainConfig cfg;
    cfg.background_rows = 20;
    cfg.eval_rows = 15;
    cfg.n_permutations = 8;
    cfg.threads = 1;
    const auto a = explain(f, pool, pool, cfg);
    cfg.threads = 4;
    const auto b = explain(f, pool, pool, cfg);
    CHECK(a.phi == b.phi);
    CHECK(a.phi.size() == 15);
    const auto r = global_importance(a);
    for (std::size_t j : {2, 3, 4, 6, 7, 8, 9, 10}) CHECK(r.importance[j] == 0.0);
}
