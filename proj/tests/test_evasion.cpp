#include <algorithm>
#include <random>

#include "doctest.h"
#include "ddosgan/common.hpp"
#include "ddosgan/evasion.hpp"
#include "support/test_models.hpp"

using namespace ddosgan;
using namespace ddosgan::evasion;
using ingest::FlowRecord;

namespace {

std::vector<FlowRecord> rows_from(const std::vector<double>& first, std::size_t d = 2) {
    std::vector<FlowRecord> out;
    for (double v : first) {
        FlowRecord r;
        r.features.assign(d, 0.0);
        r.features[0] = v;
        r.label = 1;
        out.push_back(r);
    }
    return out;
}

// Sup of |F_a - F_b| evaluated at every sample point.
double ks_oracle(const std::vector<double>& a, const std::vector<double>& b) {
    auto cdf = [](const std::vector<double>& s, double x) {
        return double(std::count_if(s.begin(), s.end(), [x](double v) { return v <= x; })) / double(s.size());
    };
    double best = 0.0;
    for (const auto* s : {&a, &b})
        for (double x : *s) best = std::max(best, std::abs(cdf(a, x) - cdf(b, x)));
    return best;
}

}  // namespace

TEST_CASE("KS statistic examples") {
    const std::vector<double> a{1, 2, 3, 4}, b{3, 4, 5, 6};
    CHECK(ks_statistic(a, b) == 0.5);
    CHECK(ks_statistic(b, a) == 0.5);
    CHECK(ks_statistic(a, a) == 0.0);
    CHECK(ks_statistic(std::vector<double>{1, 2}, std::vector<double>{10, 20, 30}) == 1.0);
    CHECK_THROWS_AS(ks_statistic(std::vector<double>{}, a), ValidationError);
}

TEST_CASE("KS statistic matches a brute-force CDF sweep with ties") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> a(1 + rng() % 30), b(1 + rng() % 30);
        for (auto& v : a) v = double(rng() % 8);
        for (auto& v : b) v = double(rng() % 8) + (trial % 2 ? 0.5 : 0.0);
        const double ks = ks_statistic(a, b);
        CHECK(ks == doctest::Approx(ks_oracle(a, b)).epsilon(1e-12));
        CHECK(ks == ks_statistic(b, a));
        CHECK(ks >= 0.0);
        CHECK(ks <= 1.0);
    }
}

TEST_CASE("rates") {
    const auto model = testing::threshold_model(2);
    const auto rows = rows_from({-1, -2, 3, 4, 5});
    const auto c = count_predictions(model, rows);
    CHECK(c.n == 5);
    CHECK(c.benign == 2);
    CHECK(c.malicious == 3);
    CHECK(evasion_rate(model, rows) == 0.4);
    CHECK(evasion_rate(model, rows) + detection_rate(model, rows) == 1.0);
    CHECK_THROWS_AS(evasion_rate(model, {}), ValidationError);
    CHECK_THROWS_AS(count_predictions(model, rows_from({1.0}, 3)), ValidationError);
}

TEST_CASE("evasion rate is invariant to row order and sums with detection to one") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n;
    const auto model = testing::threshold_model(2);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> v(1 + rng() % 100);
        for (auto& x : v) x = n(rng);
        auto rows = rows_from(v);
        const double e = evasion_rate(model, rows);
        std::shuffle(rows.begin(), rows.end(), rng);
        CHECK(evasion_rate(model, rows) == e);
        CHECK(e + detection_rate(model, rows) == doctest::Approx(1.0).epsilon(1e-15));
    }
    CHECK(evasion_rate(testing::constant_model(2, 0.0), rows_from({1, 2})) == 1.0);
    CHECK(evasion_rate(testing::constant_model(2, 1.0), rows_from({1, 2})) == 0.0);
}

TEST_CASE("cross-model report") {
    const auto t = testing::threshold_model(2);
    const auto zero = testing::constant_model(2, 0.0);
    const auto synth = rows_from({-1, 1, 2, 3});
    const auto real = rows_from({1, 2, 3, 4});
    const auto report = cross_model_report({{"thr", &t}, {"zero", &zero}}, synth, real, {"a", "b"});
    CHECK(report.n_synthetic == 4);
    REQUIRE(report.models.size() == 2);
    CHECK(report.models[0].evasion_rate == 0.25);
    CHECK(report.models[1].evasion_rate == 1.0);
    REQUIRE(report.columns.size() == 2);
    CHECK(report.columns[0].ks == ks_statistic(std::vector<double>{-1, 1, 2, 3}, std::vector<double>{1, 2, 3, 4}));
    CHECK(report.columns[1].ks == 0.0);

    const auto back = report_from_json(nlohmann::json::parse(to_json(report).dump()));
    CHECK(back.models[1].name == "zero");
    CHECK(back.models[0].counts.benign == 1);
    CHECK(back.columns[0].ks == report.columns[0].ks);
    CHECK(render(report).find("thr") != std::string::npos);

    CHECK_THROWS_AS(cross_model_report({{"thr", &t}}, synth, real, {"a"}), ValidationError);
    CHECK(cross_model_report({{"thr", &t}}, synth, {}, {"a", "b"}).columns.empty());
}
