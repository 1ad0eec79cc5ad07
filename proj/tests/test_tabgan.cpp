#include <cmath>
#include <random>

#include "doctest.h"
#include "ddosgan/common.hpp"
#include "ddosgan/evasion.hpp"
#include "ddosgan/gmm.hpp"
#include "ddosgan/tabgan.hpp"

using namespace ddosgan;
using namespace ddosgan::tabgan;

namespace {

gmm::GmmColumnModel mixture(std::string name, std::vector<double> means, std::vector<double> stds) {
    gmm::GmmColumnModel m;
    m.name = std::move(name);
    m.means = std::move(means);
    m.stds = std::move(stds);
    m.weights.assign(m.means.size(), 1.0 / static_cast<double>(m.means.size()));
    return m;
}

struct Toy {
    std::vector<gmm::GmmColumnModel> gmms{mixture("a", {0.0, 10.0}, {1.0, 2.0}),
                                          mixture("b", {-5.0, 0.0, 5.0}, {0.5, 0.5, 0.5})};
    GanSchema schema{{{"a", false, 2, {}}, {"proto", true, 0, {"tcp", "udp", "icmp"}}, {"b", false, 3, {}}}};
};

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = n(rng);
    return m;
}

// Encoded rows obeying the head constraints: v in [-1, 1], softmax blocks on the simplex.
Matrix random_encoded(const GanSchema& schema, Eigen::Index batch, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.05, 1.0), v(-1.0, 1.0);
    Matrix X(static_cast<Eigen::Index>(schema.encoded_width()), batch);
    for (Eigen::Index j = 0; j < batch; ++j)
        for (const auto& s : schema.steps()) {
            const auto off = static_cast<Eigen::Index>(s.offset), w = static_cast<Eigen::Index>(s.width);
            if (s.kind == StepKind::value) {
                X(off, j) = v(rng);
            } else {
                for (Eigen::Index k = 0; k < w; ++k) X(off + k, j) = u(rng);
                X.block(off, j, w, 1) /= X.block(off, j, w, 1).sum();
            }
        }
    return X;
}

void check_heads(const Matrix& Y, const GanSchema& schema) {
    for (Eigen::Index j = 0; j < Y.cols(); ++j)
        for (const auto& s : schema.steps()) {
            const auto off = static_cast<Eigen::Index>(s.offset), w = static_cast<Eigen::Index>(s.width);
            if (s.kind == StepKind::value) {
                CHECK(std::abs(Y(off, j)) <= 1.0);
            } else {
                CHECK(std::abs(Y.block(off, j, w, 1).sum() - 1.0) < 1e-9);
                CHECK(Y.block(off, j, w, 1).minCoeff() >= 0.0);
            }
        }
}

}  // namespace

TEST_CASE("schema layout and encoded width") {
    Toy t;
    const auto& steps = t.schema.steps();
    REQUIRE(steps.size() == 5);
    CHECK(steps[0].kind == StepKind::value);
    CHECK(steps[1].kind == StepKind::mode);
    CHECK(steps[1].width == 2);
    CHECK(steps[2].kind == StepKind::category);
    CHECK(steps[2].width == 3);
    CHECK(steps[4].width == 3);
    // (1 + 2) + 3 + (1 + 3)
    CHECK(t.schema.encoded_width() == 10);
    CHECK(t.schema.numeric_count() == 2);
    CHECK_THROWS_AS(GanSchema({{"c", true, 0, {}}}), ValidationError);
}

TEST_CASE("encode_row: exact one-hot without noise, simplex with noise, round trip") {
    Toy t;
    const std::vector<double> row{10.5, 2.0, -5.2};
    const auto clean = encode_row(row, t.schema, t.gmms, 0.0, std::uint64_t{1});
    CHECK(clean(3) == 0.0);
    CHECK(clean(4) == 0.0);
    CHECK(clean(5) == 1.0);
    const auto noisy = encode_row(row, t.schema, t.gmms, std::nullopt, std::uint64_t{1});
    CHECK(std::abs(noisy.segment(3, 3).sum() - 1.0) < 1e-9);
    CHECK(noisy(5) > noisy(3));
    CHECK(noisy.segment(3, 3).minCoeff() > 0.0);
    const auto back = decode_row(noisy, t.schema, t.gmms);
    CHECK(std::abs(back[0] - 10.5) < 1e-9);
    CHECK(back[1] == 2.0);
    CHECK(std::abs(back[2] + 5.2) < 1e-9);
    CHECK_THROWS_AS(encode_row(std::vector<double>{1.0, 3.0, 0.0}, t.schema, t.gmms, 0.0, std::uint64_t{1}), ValidationError);
    CHECK_THROWS_AS(encode_row(std::vector<double>{1.0}, t.schema, t.gmms, 0.0, std::uint64_t{1}), ValidationError);
}

TEST_CASE("generator heads, determinism and zero-weight behaviour") {
    Toy t;
    std::mt19937_64 rng(3);
    auto g = init_generator(t.schema, 6, 12, true, rng);
    const Matrix Z = random_matrix(6, 20, 5);
    const Matrix Y = generate(Z, g, t.schema);
    check_heads(Y, t.schema);
    CHECK(generate(Z, g, t.schema) == Y);
    // Column j of a batch equals generating z_j alone.
    const Eigen::VectorXd single = generate(Eigen::VectorXd(Z.col(7)), g, t.schema);
    CHECK((single - Y.col(7)).cwiseAbs().maxCoeff() < 1e-12);

    auto zero = g.zeros_like();
    zero.bo[0](0, 0) = 0.3;
    const Matrix Y0 = generate(Z, zero, t.schema);
    CHECK(Y0(0, 0) == doctest::Approx(std::tanh(0.3)).epsilon(1e-15));
    for (Eigen::Index k = 0; k < 3; ++k) CHECK(Y0(3 + k, 4) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(Y0(1, 2) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("discriminator: zero weights give the output bias; batch equals per-row") {
    std::mt19937_64 rng(4);
    auto d = init_discriminator(10, {8, 6}, rng);
    const Matrix X = random_matrix(10, 7, 9);
    const auto scores = discriminate(X, d);
    for (Eigen::Index j = 0; j < X.cols(); ++j)
        CHECK(std::abs(discriminate(Eigen::VectorXd(X.col(j)), d) - scores(j)) < 1e-12);
    auto z = d.zeros_like();
    z.biases.back()(0, 0) = -0.7;
    const auto flat = discriminate(X, z);
    for (Eigen::Index j = 0; j < X.cols(); ++j) CHECK(flat(j) == -0.7);
    CHECK_THROWS_AS(discriminate(random_matrix(9, 2, 1), d), ValidationError);
}

TEST_CASE("gradient check: generator and discriminator, both loss modes") {
    Toy t;
    for (bool attention : {true, false}) {
        std::mt19937_64 rng(11);
        auto g = init_generator(t.schema, 5, 16, attention, rng);
        auto d = init_discriminator(t.schema.encoded_width(), {12, 8}, rng);
        const Matrix Z = random_matrix(5, 4, 12);
        for (auto mode : {LossMode::wgan, LossMode::standard}) {
            const auto gr = gradient_check_generator(g, t.schema, d, Z, mode, 300, 13);
            CHECK(gr.checked == 300);
            CHECK(gr.max_relative_error < 1e-4);
            const Matrix real = random_encoded(t.schema, 5, 14), fake = random_encoded(t.schema, 4, 15);
            const auto dr = gradient_check_discriminator(d, real, fake, mode, 300, 16);
            CHECK(dr.checked == std::min<std::size_t>(300, d.size()));
            CHECK(dr.max_relative_error < 1e-4);
        }
    }
}

TEST_CASE("gradient check at hidden size 64") {
    Toy t;
    std::mt19937_64 rng(21);
    auto g = init_generator(t.schema, 8, 64, true, rng);
    auto d = init_discriminator(t.schema.encoded_width(), {64, 64}, rng);
    const Matrix Z = random_matrix(8, 3, 22);
    CHECK(gradient_check_generator(g, t.schema, d, Z, LossMode::wgan, 250, 23).max_relative_error < 1e-4);
    const Matrix real = random_encoded(t.schema, 3, 24), fake = random_encoded(t.schema, 3, 25);
    CHECK(gradient_check_discriminator(d, real, fake, LossMode::wgan, 250, 26).max_relative_error < 1e-4);
}

TEST_CASE("zero-loss region: symmetric wgan cases have zero gradient") {
    Toy t;
    std::mt19937_64 rng(31);
    auto d = init_discriminator(t.schema.encoded_width(), {8}, rng);
    const Matrix same = random_encoded(t.schema, 6, 32);
    auto gd = d.zeros_like();
    CHECK(discriminator_loss(same, same, d, LossMode::wgan, &gd) == doctest::Approx(0.0).epsilon(1e-15));
    double worst = 0.0;
    gd.visit([&](const Matrix& m) { worst = std::max(worst, m.cwiseAbs().maxCoeff()); });
    CHECK(worst < 1e-15);

    // A flat critic cannot tell samples apart, so the generator gets no signal.
    auto g = init_generator(t.schema, 4, 8, true, rng);
    auto flat = d.zeros_like();
    auto gg = g.zeros_like();
    generator_loss(random_matrix(4, 5, 33), g, t.schema, flat, LossMode::wgan, &gg);
    worst = 0.0;
    gg.visit([&](const Matrix& m) { worst = std::max(worst, m.cwiseAbs().maxCoeff()); });
    CHECK(worst == 0.0);
}

TEST_CASE("critic learns to score real above fake on a 1-feature toy") {
    GanSchema schema{{{"x", false, 1, {}}}};
    std::mt19937_64 rng(41);
    auto d = init_discriminator(schema.encoded_width(), {8}, rng);
    Matrix real(2, 16), fake(2, 16);
    real.row(0).setConstant(1.0);
    fake.row(0).setConstant(-1.0);
    real.row(1).setOnes();
    fake.row(1).setOnes();
    for (int step = 0; step < 200; ++step) {
        auto g = d.zeros_like();
        discriminator_loss(real, fake, d, LossMode::standard, &g);
        for (std::size_t l = 0; l < d.weights.size(); ++l) {
            d.weights[l] -= 0.1 * g.weights[l];
            d.biases[l] -= 0.1 * g.biases[l];
        }
    }
    CHECK(discriminate(real, d).mean() > discriminate(fake, d).mean());
}

TEST_CASE("TrainConfig validation and JSON round trip") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    auto bad = c;
    bad.clip_c = 0.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = c;
    bad.critic_steps = 0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = c;
    bad.batch = 1;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    c.loss = LossMode::standard;
    c.categorical_noise = 0.05;
    c.discriminator_hidden = {7};
    const auto back = train_config_from_json(to_json(c));
    CHECK(back.loss == LossMode::standard);
    CHECK(back.categorical_noise == std::optional<double>(0.05));
    CHECK(back.discriminator_hidden == std::vector<std::size_t>{7});
    CHECK_THROWS_AS(loss_mode_from_string("lsgan"), ValidationError);
}

namespace {

std::vector<TableRow> toy_rows(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    std::uniform_int_distribution<int> cat(0, 2);
    std::vector<TableRow> rows;
    for (std::size_t i = 0; i < n; ++i) rows.push_back({coin(rng) ? noise(rng) : 10.0 + 2.0 * noise(rng), double(cat(rng)),
                                                        -5.0 + 5.0 * cat(rng) + 0.5 * noise(rng)});
    return rows;
}

TrainConfig small_config() {
    TrainConfig c;
    c.epochs = 4;
    c.batch = 16;
    c.critic_steps = 2;
    c.z_dim = 4;
    c.hidden = 8;
    c.discriminator_hidden = {8};
    c.seed = 77;
    return c;
}

}  // namespace

TEST_CASE("training: errors, clipping, determinism, persistence") {
    Toy t;
    const auto rows = toy_rows(64, 1);
    auto cfg = small_config();
    cfg.batch = 65;
    CHECK_THROWS_AS(train(rows, t.schema, t.gmms, cfg), ValidationError);
    cfg = small_config();

    double worst = 0.0;
    std::size_t seen = 0;
    auto a = train(rows, t.schema, t.gmms, cfg, [&](std::size_t, const DiscriminatorParams& d) {
        worst = std::max(worst, d.max_abs_weight());
        ++seen;
    });
    CHECK(seen == a.critic_updates);
    CHECK(a.critic_updates == cfg.epochs * 2 * cfg.critic_steps);
    CHECK(a.history.size() == cfg.epochs * 2);
    CHECK(worst <= cfg.clip_c);

    auto b = train(rows, t.schema, t.gmms, cfg);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].d_loss == b.history[i].d_loss);
        CHECK(a.history[i].g_loss == b.history[i].g_loss);
    }
    const auto sa = sample_rows(50, a.generator, t.gmms, t.schema, 5);
    const auto sb = sample_rows(50, b.generator, t.gmms, t.schema, 5);
    CHECK(sa.encoded == sb.encoded);
    CHECK(sa.rows == sb.rows);
    check_heads(sa.encoded, t.schema);
    for (const auto& r : sa.rows) {
        CHECK(r.label == 1);
        CHECK(r.features[0] >= -2.0 - 1e-12);
        CHECK(r.features[0] <= 14.0 + 1e-12);
        CHECK(std::isfinite(r.features[2]));
    }
    CHECK(sample_rows(0, a.generator, t.gmms, t.schema, 5).rows.empty());

    GanModel m{t.schema, t.gmms, a.generator, a.discriminator, cfg};
    const auto back = gan_from_json(nlohmann::json::parse(to_json(m).dump()));
    CHECK(sample_rows(20, back.generator, back.gmms, back.schema, 9).encoded ==
          sample_rows(20, a.generator, t.gmms, t.schema, 9).encoded);
    CHECK(history_csv(a.history).rfind("step,d_loss,g_loss\n", 0) == 0);

    auto standard = cfg;
    standard.loss = LossMode::standard;
    CHECK_NOTHROW(train(rows, t.schema, t.gmms, standard));
}

TEST_CASE("divergence guard reports the step") {
    Toy t;
    auto cfg = small_config();
    cfg.loss = LossMode::standard;
    cfg.lr_discriminator = 1e300;
    cfg.lr_generator = 1e300;
    CHECK_THROWS_AS(train(toy_rows(64, 2), t.schema, t.gmms, cfg), RuntimeError);
}
