#include <cmath>
#include <random>

#include "doctest.h"
#include "ddosgan/classifiers.hpp"
#include "ddosgan/common.hpp"

using namespace ddosgan;
using namespace ddosgan::classifiers;
using ingest::ColumnKind;
using ingest::Dataset;

namespace {

Dataset make(const std::vector<std::vector<double>>& x, const std::vector<int>& y) {
    Dataset d;
    for (std::size_t j = 0; j < x.front().size(); ++j) d.schema.push_back({"f" + std::to_string(j), ColumnKind::numeric});
    d.schema.push_back({"Label", ColumnKind::label});
    for (std::size_t i = 0; i < x.size(); ++i) d.rows.push_back({x[i], y[i], {}});
    d.recount();
    return d;
}

Dataset blobs(std::size_t per_class, double separation, std::size_t d, std::uint64_t seed, double noise_sd = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, noise_sd);
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (int c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < per_class; ++i) {
            std::vector<double> row(d);
            for (auto& v : row) v = n(rng);
            row[0] += c * separation;
            x.push_back(row);
            y.push_back(c);
        }
    return make(x, y);
}

double train_accuracy(const Predictor& m, const Dataset& d) { return evaluate(m, d).metrics.accuracy; }

}  // namespace

TEST_CASE("evaluate: hand-enumerated example") {
    const std::vector<int> pred{1, 0, 1, 1}, label{1, 0, 0, 1};
    const auto e = evaluate_predictions(pred, label);
    CHECK(e.metrics.accuracy == 0.75);
    CHECK(e.metrics.per_class[1].precision == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(e.metrics.per_class[1].recall == 1.0);
    CHECK(e.metrics.per_class[1].f1 == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(e.metrics.per_class[0].precision == 1.0);
    CHECK(e.metrics.per_class[0].recall == 0.5);
    CHECK(e.confusion.tp == 2);
    CHECK(e.confusion.fp == 1);
    CHECK(e.confusion.tn == 1);
    CHECK(e.confusion.fn == 0);
    const auto perfect = evaluate_predictions(label, label);
    CHECK(perfect.metrics.accuracy == 1.0);
    CHECK(perfect.confusion.fn + perfect.confusion.fp == 0);
    CHECK_THROWS_AS(evaluate_predictions(std::vector<int>{}, std::vector<int>{}), ValidationError);
    CHECK_THROWS_AS(evaluate_predictions(std::vector<int>{1}, std::vector<int>{1, 0}), ValidationError);
}

TEST_CASE("evaluate agrees with a brute-force recount on random vectors") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng() % 60;
        std::vector<int> p(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = static_cast<int>(rng() % 2);
            y[i] = static_cast<int>(rng() % 2);
        }
        const auto e = evaluate_predictions(p, y);
        std::size_t cnt[2][2] = {{0, 0}, {0, 0}};  // [label][pred]
        for (std::size_t i = 0; i < n; ++i) ++cnt[y[i]][p[i]];
        CHECK(e.metrics.accuracy == double(cnt[0][0] + cnt[1][1]) / double(n));
        for (int c = 0; c < 2; ++c) {
            const double tp = double(cnt[c][c]), pred_c = double(cnt[0][c] + cnt[1][c]), sup = double(cnt[c][0] + cnt[c][1]);
            const double prec = pred_c > 0 ? tp / pred_c : 0.0, rec = sup > 0 ? tp / sup : 0.0;
            const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
            const auto& m = e.metrics.per_class[static_cast<std::size_t>(c)];
            CHECK(m.precision == doctest::Approx(prec).epsilon(1e-14));
            CHECK(m.recall == doctest::Approx(rec).epsilon(1e-14));
            CHECK(m.f1 == doctest::Approx(f1).epsilon(1e-14));
            CHECK(m.support == cnt[c][0] + cnt[c][1]);
        }
        CHECK(e.confusion.total() == n);
        const double w0 = double(e.metrics.per_class[0].support) / double(n);
        CHECK(e.metrics.weighted.f1 == doctest::Approx(w0 * e.metrics.per_class[0].f1 + (1 - w0) * e.metrics.per_class[1].f1).epsilon(1e-14));
        CHECK(e.metrics.macro.recall == doctest::Approx((e.metrics.per_class[0].recall + e.metrics.per_class[1].recall) / 2).epsilon(1e-14));
    }
}

TEST_CASE("zero denominators are reported as 0 and flagged") {
    const auto e = evaluate_predictions(std::vector<int>{0, 0}, std::vector<int>{0, 0});
    CHECK(e.metrics.per_class[1].precision == 0.0);
    CHECK(e.metrics.per_class[1].recall == 0.0);
    CHECK_FALSE(e.metrics.undefined.empty());
}

TEST_CASE("report layout") {
    const auto e = evaluate_predictions(std::vector<int>{1, 0, 1, 1}, std::vector<int>{1, 0, 0, 1});
    const auto text = format_report(e);
    CHECK(text.rfind("Test Accuracy = 0.75\n", 0) == 0);
    for (const char* part : {"precision", "recall", "f1-score", "support", "macro avg", "weighted avg"})
        CHECK(text.find(part) != std::string::npos);
}

TEST_CASE("decision tree basics") {
    auto one_d = make({{0.0}, {1.0}}, {0, 1});
    auto t = train_tree(one_d);
    CHECK(train_accuracy(t, one_d) == 1.0);
    CHECK(t.nodes().size() == 3);
    CHECK(t.nodes()[0].threshold == 0.5);

    auto pure = make({{0.0}, {1.0}, {2.0}}, {1, 1, 1});
    CHECK(train_tree(pure).nodes().size() == 1);

    auto xor_data = make({{0, 0}, {0, 1}, {1, 0}, {1, 1}}, {0, 1, 1, 0});
    TreeParams p;
    p.max_depth = 2;
    auto x = train_tree(xor_data, p);
    CHECK(train_accuracy(x, xor_data) == 1.0);
    CHECK(x.depth() <= 2);
    for (const auto& n : x.nodes())
        if (n.feature < 0) CHECK(n.proba[0] + n.proba[1] == doctest::Approx(1.0));

    p.max_depth = 1;
    CHECK(train_tree(blobs(50, 1.0, 3, 1), p).depth() == 1);
    CHECK_THROWS_AS(train_tree(Dataset{one_d.schema, {}, {0, 0}, {}, 0}), ValidationError);
}

TEST_CASE("forest: degenerate forest equals the tree; determinism") {
    const auto train = blobs(150, 1.5, 4, 2);
    const auto test = blobs(100, 1.5, 4, 3);
    ForestParams fp;
    fp.n_trees = 1;
    fp.bootstrap = false;
    fp.tree.features_per_split = 4;
    const auto forest = train_forest(train, fp, 7);
    const auto tree = train_tree(train);
    for (const auto& r : test.rows) CHECK(forest.predict(r.features) == tree.predict(r.features));

    ForestParams full;
    full.n_trees = 15;
    full.threads = 3;
    const auto a = train_forest(train, full, 11);
    full.threads = 1;
    const auto b = train_forest(train, full, 11);
    CHECK(predict_all(a, test) == predict_all(b, test));
    for (const auto& r : test.rows) CHECK(a.predict_proba(r.features) == b.predict_proba(r.features));
    CHECK(a.seeds().front() == 11);
    CHECK(a.seeds().back() == 25);
    CHECK(a.features_per_split() == 2);
    CHECK(train_accuracy(a, test) > 0.7);
}

TEST_CASE("logistic regression") {
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (int i = 0; i < 20; ++i) {
        x.push_back({-1.0});
        y.push_back(0);
        x.push_back({1.0});
        y.push_back(1);
    }
    const auto sep = make(x, y);
    const auto m = train_logistic(sep, {0.1, 500, 1e-4});
    CHECK(train_accuracy(m, sep) == 1.0);

    const auto data = blobs(200, 2.0, 5, 4);
    const auto model = train_logistic(data);
    const auto& h = model.loss_history();
    CHECK(h.size() == 201);
    for (std::size_t i = 1; i < h.size(); ++i) CHECK(h[i] <= h[i - 1] + 1e-6);

    // Zero epochs: the bias alone gives the majority class.
    const auto skew = make({{0.0}, {1.0}, {2.0}, {3.0}}, {1, 1, 1, 0});
    const auto prior = train_logistic(skew, {0.1, 0, 1e-4});
    CHECK(prior.bias() == doctest::Approx(std::log(3.0)));
    for (const auto& r : skew.rows) CHECK(prior.predict(r.features) == 1);

    const auto constant = make({{5.0, 1.0}, {5.0, 2.0}}, {0, 1});
    CHECK(train_logistic(constant).stddev()[0] == 1.0);
    CHECK_THROWS_AS(train_logistic(make({{1.0}, {2.0}}, {1, 1})), ValidationError);
}

TEST_CASE("gaussian naive bayes") {
    const auto train = blobs(1000, 10.0, 2, 5);
    const auto test = blobs(1000, 10.0, 2, 6);
    const auto m = train_gnb(train);
    CHECK(train_accuracy(m, test) > 0.99);
    CHECK(m.priors()[0] + m.priors()[1] == doctest::Approx(1.0));
    for (const auto& v : m.variances())
        for (double s : v) CHECK(s >= m.epsilon());

    // Identical class distributions: the larger prior wins everywhere.
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (int i = 0; i < 30; ++i) {
        x.push_back({double(i % 5)});
        y.push_back(i < 20 ? 1 : 0);
    }
    for (int i = 0; i < 10; ++i) {
        x.push_back({double(i % 5)});
        y.push_back(0);
    }
    const auto tie = train_gnb(make(x, y));
    for (double v : {-3.0, 0.0, 2.0, 9.0}) CHECK(tie.predict(std::vector<double>{v}) == 1);

    // Equal priors and variances reduce to nearest centroid.
    const auto sym = make({{-1.0, 0.0}, {-3.0, 0.0}, {1.0, 0.0}, {3.0, 0.0}, {-2.0, 1.0}, {-2.0, -1.0}, {2.0, 1.0}, {2.0, -1.0}},
                          {0, 0, 1, 1, 0, 0, 1, 1});
    const auto nc = train_gnb(sym);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int i = 0; i < 200; ++i) {
        const std::vector<double> p{u(rng), u(rng)};
        const double d0 = std::hypot(p[0] + 2.0, p[1]), d1 = std::hypot(p[0] - 2.0, p[1]);
        if (std::abs(d0 - d1) > 1e-6) CHECK(nc.predict(p) == (d1 < d0 ? 1 : 0));
    }
    CHECK_THROWS_AS(train_gnb(make({{1.0}}, {0})), ValidationError);
}

TEST_CASE("models serialize and reload with identical predictions") {
    const auto train = blobs(100, 1.0, 3, 9);
    const auto test = blobs(50, 1.0, 3, 10);
    ForestParams fp;
    fp.n_trees = 5;
    std::vector<nlohmann::json> docs{to_json(train_forest(train, fp, 1)), to_json(train_tree(train)),
                                     to_json(train_logistic(train)), to_json(train_gnb(train))};
    const std::vector<std::unique_ptr<Predictor>> originals = [&] {
        std::vector<std::unique_ptr<Predictor>> v;
        for (const auto& d : docs) v.push_back(model_from_json(d));
        return v;
    }();
    for (std::size_t k = 0; k < docs.size(); ++k) {
        const auto back = model_from_json(nlohmann::json::parse(docs[k].dump()));
        for (const auto& r : test.rows) CHECK(back->predict_proba(r.features) == originals[k]->predict_proba(r.features));
    }
    CHECK_THROWS_AS(model_from_json(nlohmann::json{{"format", "ddosgan.model"}, {"version", 1}, {"kind", "svm"}}), ValidationError);
    CHECK_THROWS_AS(predict_all(*originals[0], blobs(3, 1.0, 2, 1)), ValidationError);
}

TEST_CASE("models rank by false negatives, then accuracy") {
    auto ev = [](std::size_t fn, double acc) {
        Evaluation e;
        e.confusion.fn = fn;
        e.metrics.accuracy = acc;
        return e;
    };
    CHECK(rank_models({ev(5, 0.99), ev(2, 0.90), ev(2, 0.95), ev(0, 0.5)}) == std::vector<std::size_t>{3, 2, 1, 0});
}

TEST_CASE("retraining is bit-exact") {
    const auto train = blobs(80, 1.0, 3, 12);
    const auto test = blobs(40, 1.0, 3, 13);
    CHECK(to_json(train_logistic(train)) == to_json(train_logistic(train)));
    CHECK(to_json(train_gnb(train)) == to_json(train_gnb(train)));
    CHECK(to_json(train_tree(train)) == to_json(train_tree(train)));
    ForestParams fp;
    fp.n_trees = 4;
    CHECK(to_json(train_forest(train, fp, 3)) == to_json(train_forest(train, fp, 3)));
}
