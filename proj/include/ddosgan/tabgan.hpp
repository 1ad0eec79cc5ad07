#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ddosgan/gmm.hpp"
#include "ddosgan/ingest.hpp"
#include "json.hpp"

namespace ddosgan::tabgan {

using Matrix = Eigen::MatrixXd;

// --- schema ------------------------------------------------------------------

struct GanColumn {
    std::string name;
    bool categorical = false;
    std::size_t components = 0;       // numeric: mixture size m
    std::vector<std::string> labels;  // categorical: category names
};

enum class StepKind { value, mode, category };

/// One generator output step: a tanh scalar (value), a softmax over mixture
/// components (mode), or a softmax over category labels (category).
struct Step {
    StepKind kind;
    std::size_t width;
    std::size_t column;
    std::size_t offset;  // position in the encoded row
};

/// Output layout shared by row encoding and generation. A numeric column
/// contributes a value step then a mode step; a categorical column one
/// category step.
class GanSchema {
public:
    GanSchema() = default;
    explicit GanSchema(std::vector<GanColumn> columns);

    const std::vector<GanColumn>& columns() const { return columns_; }
    const std::vector<Step>& steps() const { return steps_; }
    std::size_t encoded_width() const { return width_; }
    std::size_t numeric_count() const;

private:
    std::vector<GanColumn> columns_;
    std::vector<Step> steps_;
    std::size_t width_ = 0;
};

/// Schema for an all-numeric table described by its fitted mixtures.
GanSchema numeric_schema(const std::vector<gmm::GmmColumnModel>& gmms);

/// A table row in schema column order; categorical cells hold the category index.
using TableRow = std::vector<double>;

/// Numeric cells become (v, u) via the column mixture; categorical cells a
/// one-hot vector plus U[0, noise] per slot, renormalized. `gmms` is indexed
/// by numeric-column order. `noise` nullopt means 0.2 / label count.
Eigen::VectorXd encode_row(std::span<const double> row, const GanSchema& schema,
                           const std::vector<gmm::GmmColumnModel>& gmms, std::optional<double> noise,
                           std::mt19937_64& rng);
Eigen::VectorXd encode_row(std::span<const double> row, const GanSchema& schema,
                           const std::vector<gmm::GmmColumnModel>& gmms, std::optional<double> noise,
                           std::uint64_t seed);

/// Inverse of encode_row: mixture inverse on (v, argmax u), argmax for categories.
TableRow decode_row(const Eigen::Ref<const Eigen::VectorXd>& encoded, const GanSchema& schema,
                    const std::vector<gmm::GmmColumnModel>& gmms);

// --- parameters --------------------------------------------------------------

/// Recurrent generator. Each step feeds [z; embedding of the previous output;
/// attention context] into an LSTM cell, then h -> tanh feature -> head.
/// Gate blocks in W, U, b are ordered input, forget, output, candidate.
struct GeneratorParams {
    std::size_t z_dim = 0;
    std::size_t hidden = 0;
    bool attention = true;

    Matrix W, U, b;        // LSTM: 4h x (z + 2h), 4h x h, 4h x 1
    Matrix Wf, bf;         // feature layer: h x h, h x 1
    Matrix Wa, Ua, ba, va; // additive attention: h x h, h x h, h x 1, h x 1
    std::vector<Matrix> Wo, bo;  // per-step head: width x h, width x 1
    std::vector<Matrix> We;      // per-step output embedding: h x width

    template <class F>
    void visit(F&& f) {
        f(W); f(U); f(b); f(Wf); f(bf); f(Wa); f(Ua); f(ba); f(va);
        for (auto& m : Wo) f(m);
        for (auto& m : bo) f(m);
        for (auto& m : We) f(m);
    }
    template <class F>
    void visit(F&& f) const {
        const_cast<GeneratorParams*>(this)->visit([&](Matrix& m) { f(static_cast<const Matrix&>(m)); });
    }

    /// Same shapes, all zeros.
    GeneratorParams zeros_like() const;
    std::size_t size() const;
};

/// MLP critic: LeakyReLU(0.2) hidden layers, scalar linear output.
struct DiscriminatorParams {
    std::vector<Matrix> weights;  // layer l: out x in
    std::vector<Matrix> biases;   // out x 1

    template <class F>
    void visit(F&& f) {
        for (auto& m : weights) f(m);
        for (auto& m : biases) f(m);
    }
    template <class F>
    void visit(F&& f) const {
        const_cast<DiscriminatorParams*>(this)->visit([&](Matrix& m) { f(static_cast<const Matrix&>(m)); });
    }

    DiscriminatorParams zeros_like() const;
    std::size_t size() const;
    std::size_t input_width() const { return weights.empty() ? 0 : static_cast<std::size_t>(weights.front().cols()); }
    double max_abs_weight() const;
};

GeneratorParams init_generator(const GanSchema& schema, std::size_t z_dim, std::size_t hidden, bool attention,
                               std::mt19937_64& rng);
DiscriminatorParams init_discriminator(std::size_t input_width, const std::vector<std::size_t>& hidden,
                                       std::mt19937_64& rng);

// --- forward / backward ------------------------------------------------------

/// Encoded rows (encoded_width x batch) for noise columns Z (z_dim x batch).
Matrix generate(const Matrix& Z, const GeneratorParams& params, const GanSchema& schema);
Eigen::VectorXd generate(const Eigen::VectorXd& z, const GeneratorParams& params, const GanSchema& schema);

/// Raw critic scores, one per column of X.
Eigen::RowVectorXd discriminate(const Matrix& X, const DiscriminatorParams& params);
double discriminate(const Eigen::VectorXd& x, const DiscriminatorParams& params);

/// Accumulates d(loss)/d(params) given d(loss)/d(output) = dY, for the batch Z.
void generator_backward(const Matrix& Z, const GeneratorParams& params, const GanSchema& schema, const Matrix& dY,
                        GeneratorParams& grads);
/// Accumulates parameter gradients given d(loss)/d(score) and returns d(loss)/dX.
Matrix discriminator_backward(const Matrix& X, const DiscriminatorParams& params, const Eigen::RowVectorXd& dscore,
                              DiscriminatorParams& grads);

// --- training ----------------------------------------------------------------

enum class LossMode { wgan, standard };

std::string_view to_string(LossMode mode);
LossMode loss_mode_from_string(std::string_view s);

/// Critic / discriminator objective on one real and one fake batch.
double discriminator_loss(const Matrix& real, const Matrix& fake, const DiscriminatorParams& params, LossMode mode,
                          DiscriminatorParams* grads = nullptr);
/// Generator objective for the noise batch Z against a fixed critic.
double generator_loss(const Matrix& Z, const GeneratorParams& gen, const GanSchema& schema,
                      const DiscriminatorParams& disc, LossMode mode, GeneratorParams* grads = nullptr);

struct TrainConfig {
    LossMode loss = LossMode::wgan;
    double clip_c = 0.01;
    std::size_t critic_steps = 5;
    double lr_generator = 5e-5;
    double lr_discriminator = 5e-5;
    double momentum = 0.9;   // standard mode
    double rms_decay = 0.99; // wgan mode
    std::size_t batch = 256;
    std::size_t epochs = 300;
    std::size_t z_dim = 100;
    std::size_t hidden = 100;
    std::vector<std::size_t> discriminator_hidden{128, 128};
    bool attention = true;
    std::uint64_t seed = 4000;
    std::optional<double> categorical_noise;  // nullopt = 0.2 / label count

    void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& doc);

struct LossRecord {
    std::size_t step;
    double d_loss;  // mean over the critic updates of this step
    double g_loss;
};

struct TrainResult {
    GeneratorParams generator;
    DiscriminatorParams discriminator;
    std::vector<LossRecord> history;
    std::size_t critic_updates = 0;
};

/// Invoked after every critic update (post-clipping) with the update index.
using CriticObserver = std::function<void(std::size_t, const DiscriminatorParams&)>;

/// Adversarial training on malicious rows only. Each generator update follows
/// `critic_steps` critic updates, and one epoch runs
/// max(1, rows / (batch * critic_steps)) generator updates. Throws when a
/// weight turns non-finite.
TrainResult train(const std::vector<TableRow>& real_rows, const GanSchema& schema,
                  const std::vector<gmm::GmmColumnModel>& gmms, const TrainConfig& cfg,
                  const CriticObserver& observer = {});

/// Fits one mixture per numeric column (seeded per column) and trains.
struct GanModel {
    GanSchema schema;
    std::vector<gmm::GmmColumnModel> gmms;
    GeneratorParams generator;
    DiscriminatorParams discriminator;
    TrainConfig config;
};

struct SyntheticBatch {
    Matrix encoded;  // encoded_width x n
    std::vector<ingest::FlowRecord> rows;
};

/// n decoded rows, all labelled malicious.
SyntheticBatch sample_rows(std::size_t n, const GeneratorParams& params, const std::vector<gmm::GmmColumnModel>& gmms,
                           const GanSchema& schema, std::uint64_t seed);

// --- gradient checking ------------------------------------------------------

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t checked = 0;
};

/// Relative error |a - n| / max(|a|, |n|, 1e-6) between analytic and central
/// finite-difference (step 1e-5) gradients over `samples` random weights.
GradCheckResult gradient_check_generator(const GeneratorParams& gen, const GanSchema& schema,
                                         const DiscriminatorParams& disc, const Matrix& Z, LossMode mode,
                                         std::size_t samples, std::uint64_t seed);
GradCheckResult gradient_check_discriminator(const DiscriminatorParams& disc, const Matrix& real, const Matrix& fake,
                                             LossMode mode, std::size_t samples, std::uint64_t seed);

// --- persistence -------------------------------------------------------------

nlohmann::json to_json(const GanModel& model);
GanModel gan_from_json(const nlohmann::json& doc);
std::string history_csv(const std::vector<LossRecord>& history);

}  // namespace ddosgan::tabgan
