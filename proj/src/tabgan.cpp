#include "ddosgan/tabgan.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ddosgan/common.hpp"

namespace ddosgan::tabgan {

namespace {

constexpr double kLeak = 0.2;

Matrix sigmoid(const Matrix& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }

// tanh through the vectorized exp, as 1 - 2 / (e^2x + 1); Eigen's own double
// tanh is scalar and dominated the runtime.
template <class Derived>
auto tanh_expr(const Eigen::ArrayBase<Derived>& x) {
    return 1.0 - 2.0 / ((2.0 * x.max(-40.0).min(40.0)).exp() + 1.0);
}
Matrix tanh_m(const Matrix& x) { return tanh_expr(x.array()).matrix(); }

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// Column-wise softmax.
Matrix softmax_cols(const Matrix& x) {
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double top = x.col(j).maxCoeff();
        out.col(j) = (x.col(j).array() - top).exp().matrix();
        out.col(j) /= out.col(j).sum();
    }
    return out;
}

Matrix add_bias(Matrix m, const Matrix& bias) {
    m.colwise() += bias.col(0);
    return m;
}

std::vector<Matrix*> tensors(GeneratorParams& p) {
    std::vector<Matrix*> out;
    p.visit([&](Matrix& m) { out.push_back(&m); });
    return out;
}
std::vector<Matrix*> tensors(DiscriminatorParams& p) {
    std::vector<Matrix*> out;
    p.visit([&](Matrix& m) { out.push_back(&m); });
    return out;
}

Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = u(rng);
    return m;
}

// Everything the backward pass needs from one generator forward pass.
struct GenTrace {
    std::vector<Matrix> hs, cs;             // T + 1 (index 0 is the zero state)
    std::vector<Matrix> xs;                 // T step inputs after the noise rows, 2h x B
    Matrix Z;
    std::vector<Matrix> gi, gf, go, gg, tc; // T gate activations, tanh(c)
    std::vector<Matrix> feat, ys;           // T
    std::vector<Matrix> alpha;              // T, t x B attention weights
    // Step t's attention activations tanh(Wa h_k + Ua h_t + ba), k = 1..t, as
    // t blocks of B columns starting at column att_offset(t).
    Matrix att;
    Matrix output;                          // encoded_width x B
};

Eigen::Index att_offset(std::size_t t, Eigen::Index B) { return static_cast<Eigen::Index>(t * (t - 1) / 2) * B; }

// Row r of a 1 x (t B) row viewed as a t x B matrix.
using RowMajorMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

GenTrace forward_trace(const Matrix& Z, const GeneratorParams& p, const GanSchema& schema, bool keep = true) {
    if (static_cast<std::size_t>(Z.rows()) != p.z_dim) throw ValidationError("noise dimension mismatch");
    const auto& steps = schema.steps();
    if (steps.size() != p.Wo.size()) throw ValidationError("generator does not match the schema");
    const Eigen::Index B = Z.cols(), h = static_cast<Eigen::Index>(p.hidden), zd = static_cast<Eigen::Index>(p.z_dim);
    const std::size_t T = steps.size();

    GenTrace tr;
    if (keep) tr.Z = Z;
    tr.hs.assign(1, Matrix::Zero(h, B));
    tr.cs.assign(1, Matrix::Zero(h, B));
    tr.output.resize(static_cast<Eigen::Index>(schema.encoded_width()), B);
    Matrix keys, scratch;  // keys: h x (T B), block k-1 = Wa h_k
    if (p.attention && T > 1) {
        keys.resize(h, static_cast<Eigen::Index>(T) * B);
        if (keep)
            tr.att.resize(h, att_offset(T, B));
        else
            scratch.resize(h, static_cast<Eigen::Index>(T - 1) * B);
    }
    // The noise enters every step unchanged, so its projection is shared.
    const Matrix zproj = add_bias(p.W.leftCols(zd) * Z, p.b);
    for (std::size_t t = 0; t < T; ++t) {
        // Step input past the noise: [embedding of the previous output; attention context].
        Matrix x(2 * h, B);
        if (t > 0)
            x.topRows(h).noalias() = p.We[t - 1] * tr.ys[t - 1];
        else
            x.topRows(h).setZero();
        x.bottomRows(h).setZero();
        Matrix alpha;
        if (p.attention && t > 0) {
            const auto tb = static_cast<Eigen::Index>(t) * B;
            const Matrix query = add_bias(p.Ua * tr.hs[t], p.ba);
            auto A = keep ? tr.att.middleCols(att_offset(t, B), tb) : scratch.leftCols(tb);
            for (std::size_t k = 0; k < t; ++k) {
                const auto col = static_cast<Eigen::Index>(k) * B;
                A.middleCols(col, B) = tanh_expr(keys.middleCols(col, B).array() + query.array()).matrix();
            }
            Eigen::RowVectorXd flat = p.va.transpose() * A;
            Matrix scores = RowMajorMap(flat.data(), static_cast<Eigen::Index>(t), B);
            alpha = softmax_cols(scores);
            for (std::size_t k = 1; k <= t; ++k)
                x.bottomRows(h).array() += tr.hs[k].array().rowwise() * alpha.row(static_cast<Eigen::Index>(k - 1)).array();
        }

        Matrix G = zproj;
        G.noalias() += p.W.rightCols(2 * h) * x;
        G.noalias() += p.U * tr.hs[t];
        Matrix i = sigmoid(G.topRows(h));
        Matrix f = sigmoid(G.middleRows(h, h));
        Matrix o = sigmoid(G.middleRows(2 * h, h));
        Matrix g = tanh_m(G.bottomRows(h));
        Matrix c = (f.array() * tr.cs.back().array() + i.array() * g.array()).matrix();
        Matrix tc = tanh_m(c);
        Matrix hn = (o.array() * tc.array()).matrix();
        Matrix feat = tanh_m(add_bias(p.Wf * hn, p.bf));
        Matrix pre = add_bias(p.Wo[t] * feat, p.bo[t]);
        Matrix y = steps[t].kind == StepKind::value ? tanh_m(pre) : softmax_cols(pre);
        tr.output.middleRows(static_cast<Eigen::Index>(steps[t].offset), static_cast<Eigen::Index>(steps[t].width)) = y;

        if (keys.size() > 0 && t + 1 < T) keys.middleCols(static_cast<Eigen::Index>(t) * B, B).noalias() = p.Wa * hn;
        if (keep) {
            tr.xs.push_back(std::move(x));
            tr.alpha.push_back(std::move(alpha));
            tr.gi.push_back(std::move(i));
            tr.gf.push_back(std::move(f));
            tr.go.push_back(std::move(o));
            tr.gg.push_back(std::move(g));
            tr.tc.push_back(std::move(tc));
            tr.cs.push_back(std::move(c));
            tr.feat.push_back(std::move(feat));
        } else {
            tr.cs.back() = std::move(c);
        }
        tr.hs.push_back(std::move(hn));  // the attention context reads every hidden state
        tr.ys.push_back(std::move(y));
    }
    return tr;
}

void backward_trace(const GenTrace& tr, const GeneratorParams& p, const GanSchema& schema, const Matrix& dY,
                    GeneratorParams& g) {
    const auto& steps = schema.steps();
    const std::size_t T = steps.size();
    const Eigen::Index B = dY.cols(), h = static_cast<Eigen::Index>(p.hidden);

    std::vector<Matrix> dH(T + 1, Matrix::Zero(h, B));
    std::vector<Matrix> dK(T + 1, Matrix::Zero(h, B));  // accumulated d/d keys[k]
    Matrix dc_carry = Matrix::Zero(h, B);
    Matrix de_next;  // gradient w.r.t. the embedding of step t's output
    Matrix dG_sum = Matrix::Zero(4 * h, B);  // the noise and bias see every step's gate gradient

    for (std::size_t tt = T; tt-- > 0;) {
        const std::size_t t = tt;
        // keys[t + 1] are complete once every later step has been processed.
        if (p.attention) {
            g.Wa.noalias() += dK[t + 1] * tr.hs[t + 1].transpose();
            dH[t + 1].noalias() += p.Wa.transpose() * dK[t + 1];
        }

        Matrix dy = dY.middleRows(static_cast<Eigen::Index>(steps[t].offset), static_cast<Eigen::Index>(steps[t].width));
        if (t + 1 < T) {
            dy.noalias() += p.We[t].transpose() * de_next;
            g.We[t].noalias() += de_next * tr.ys[t].transpose();
        }
        const Matrix& y = tr.ys[t];
        Matrix dpre;
        if (steps[t].kind == StepKind::value) {
            dpre = (dy.array() * (1.0 - y.array().square())).matrix();
        } else {
            Eigen::RowVectorXd dot = (y.array() * dy.array()).colwise().sum();
            dpre = (y.array() * (dy.array().rowwise() - dot.array())).matrix();
        }
        g.Wo[t].noalias() += dpre * tr.feat[t].transpose();
        g.bo[t] += dpre.rowwise().sum();
        Matrix dfeat = p.Wo[t].transpose() * dpre;
        Matrix dpf = (dfeat.array() * (1.0 - tr.feat[t].array().square())).matrix();
        g.Wf.noalias() += dpf * tr.hs[t + 1].transpose();
        g.bf += dpf.rowwise().sum();
        dH[t + 1].noalias() += p.Wf.transpose() * dpf;

        const auto& i = tr.gi[t].array();
        const auto& f = tr.gf[t].array();
        const auto& o = tr.go[t].array();
        const auto& gc = tr.gg[t].array();
        const auto& tc = tr.tc[t].array();
        const auto dh = dH[t + 1].array();
        Matrix dc = (dc_carry.array() + dh * o * (1.0 - tc.square())).matrix();
        Matrix dG(4 * h, B);
        dG.topRows(h) = (dc.array() * gc * i * (1.0 - i)).matrix();
        dG.middleRows(h, h) = (dc.array() * tr.cs[t].array() * f * (1.0 - f)).matrix();
        dG.middleRows(2 * h, h) = (dh * tc * o * (1.0 - o)).matrix();
        dG.bottomRows(h) = (dc.array() * i * (1.0 - gc.square())).matrix();
        dc_carry = (dc.array() * f).matrix();

        g.W.rightCols(2 * h).noalias() += dG * tr.xs[t].transpose();
        g.U.noalias() += dG * tr.hs[t].transpose();
        dG_sum += dG;
        Matrix dx = p.W.rightCols(2 * h).transpose() * dG;
        dH[t].noalias() += p.U.transpose() * dG;
        de_next = dx.topRows(h);

        if (p.attention && t > 0) {
            const Matrix dctx = dx.bottomRows(h);
            const Matrix& alpha = tr.alpha[t];
            const auto tb = static_cast<Eigen::Index>(t) * B;
            const auto A = tr.att.middleCols(att_offset(t, B), tb);
            Matrix dalpha(static_cast<Eigen::Index>(t), B);
            for (std::size_t k = 1; k <= t; ++k) {
                const auto row = static_cast<Eigen::Index>(k - 1);
                dalpha.row(row) = (dctx.array() * tr.hs[k].array()).colwise().sum();
                dH[k].array() += dctx.array().rowwise() * alpha.row(row).array();
            }
            Eigen::RowVectorXd mix = (alpha.array() * dalpha.array()).colwise().sum();
            Eigen::RowVectorXd ds(tb);
            RowMajorMap(ds.data(), static_cast<Eigen::Index>(t), B) = (alpha.array() * (dalpha.array().rowwise() - mix.array())).matrix();
            g.va.noalias() += A * ds.transpose();
            const Matrix dA = ((p.va * ds).array() * (1.0 - A.array().square())).matrix();
            Matrix dq = Matrix::Zero(h, B);
            for (std::size_t k = 1; k <= t; ++k) {
                const auto block = dA.middleCols(static_cast<Eigen::Index>(k - 1) * B, B);
                dK[k] += block;
                dq += block;
            }
            g.Ua.noalias() += dq * tr.hs[t].transpose();
            g.ba += dq.rowwise().sum();
            dH[t].noalias() += p.Ua.transpose() * dq;
        }
    }
    g.W.leftCols(tr.Z.rows()).noalias() += dG_sum * tr.Z.transpose();
    g.b += dG_sum.rowwise().sum();
}

struct DiscTrace {
    std::vector<Matrix> acts;  // layer inputs; acts[0] = X
    std::vector<Matrix> pres;  // pre-activations
};

DiscTrace disc_forward(const Matrix& X, const DiscriminatorParams& p) {
    if (static_cast<std::size_t>(X.rows()) != p.input_width())
        throw ValidationError("discriminator input width " + std::to_string(X.rows()) + " does not match " +
                              std::to_string(p.input_width()));
    DiscTrace tr;
    tr.acts.push_back(X);
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        Matrix a = add_bias(p.weights[l] * tr.acts.back(), p.biases[l]);
        tr.pres.push_back(a);
        if (l + 1 < p.weights.size()) tr.acts.push_back(a.unaryExpr([](double v) { return v > 0 ? v : kLeak * v; }));
    }
    return tr;
}

Matrix disc_backward(const DiscTrace& tr, const DiscriminatorParams& p, const Eigen::RowVectorXd& dscore,
                     DiscriminatorParams& g) {
    Matrix d = dscore;
    for (std::size_t l = p.weights.size(); l-- > 0;) {
        if (l + 1 < p.weights.size())
            d = (d.array() * tr.pres[l].unaryExpr([](double v) { return v > 0 ? 1.0 : kLeak; }).array()).matrix();
        g.weights[l].noalias() += d * tr.acts[l].transpose();
        g.biases[l] += d.rowwise().sum();
        d = p.weights[l].transpose() * d;
    }
    return d;
}

bool all_finite(const auto& params) {
    bool ok = true;
    params.visit([&](const Matrix& m) { ok = ok && m.allFinite(); });
    return ok;
}

class RmsProp {
public:
    RmsProp(double lr, double decay) : lr_(lr), decay_(decay) {}
    void step(const std::vector<Matrix*>& params, const std::vector<Matrix*>& grads) {
        if (cache_.empty())
            for (auto* p : params) cache_.push_back(Matrix::Zero(p->rows(), p->cols()));
        for (std::size_t i = 0; i < params.size(); ++i) {
            cache_[i] = decay_ * cache_[i].array() + (1.0 - decay_) * grads[i]->array().square();
            params[i]->array() -= lr_ * grads[i]->array() / (cache_[i].array().sqrt() + 1e-8);
        }
    }

private:
    double lr_, decay_;
    std::vector<Matrix> cache_;
};

class Momentum {
public:
    Momentum(double lr, double mu) : lr_(lr), mu_(mu) {}
    void step(const std::vector<Matrix*>& params, const std::vector<Matrix*>& grads) {
        if (velocity_.empty())
            for (auto* p : params) velocity_.push_back(Matrix::Zero(p->rows(), p->cols()));
        for (std::size_t i = 0; i < params.size(); ++i) {
            velocity_[i] = mu_ * velocity_[i] + *grads[i];
            *params[i] -= lr_ * velocity_[i];
        }
    }

private:
    double lr_, mu_;
    std::vector<Matrix> velocity_;
};

// Applies one optimizer update with whichever rule the loss mode uses.
class Optimizer {
public:
    Optimizer(LossMode mode, double lr, const TrainConfig& cfg)
        : mode_(mode), rms_(lr, cfg.rms_decay), momentum_(lr, cfg.momentum) {}
    void step(const std::vector<Matrix*>& params, const std::vector<Matrix*>& grads) {
        if (mode_ == LossMode::wgan)
            rms_.step(params, grads);
        else
            momentum_.step(params, grads);
    }

private:
    LossMode mode_;
    RmsProp rms_;
    Momentum momentum_;
};

nlohmann::json matrix_json(const Matrix& m) {
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>(), cols = j.at("cols").get<Eigen::Index>();
    auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw ValidationError("matrix payload size mismatch");
    return Eigen::Map<Matrix>(data.data(), rows, cols);
}

nlohmann::json matrices_json(const std::vector<Matrix>& ms) {
    auto arr = nlohmann::json::array();
    for (const auto& m : ms) arr.push_back(matrix_json(m));
    return arr;
}

std::vector<Matrix> matrices_from_json(const nlohmann::json& j) {
    std::vector<Matrix> out;
    for (const auto& m : j) out.push_back(matrix_from_json(m));
    return out;
}

Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
    return m;
}

template <class Params, class LossFn>
GradCheckResult finite_difference_check(Params params, const Params& analytic, std::size_t samples, std::uint64_t seed,
                                        LossFn&& loss) {
    auto ps = tensors(params);
    std::vector<const Matrix*> gs;
    analytic.visit([&](const Matrix& m) { gs.push_back(&m); });
    std::vector<std::pair<std::size_t, Eigen::Index>> slots;
    for (std::size_t t = 0; t < ps.size(); ++t)
        for (Eigen::Index i = 0; i < ps[t]->size(); ++i) slots.emplace_back(t, i);
    std::mt19937_64 rng(seed);
    std::shuffle(slots.begin(), slots.end(), rng);
    if (slots.size() > samples) slots.resize(samples);

    constexpr double step = 1e-5;
    GradCheckResult result;
    for (auto [t, i] : slots) {
        double& w = ps[t]->data()[i];
        const double saved = w;
        w = saved + step;
        const double up = loss(params);
        w = saved - step;
        const double down = loss(params);
        w = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double a = gs[t]->data()[i];
        const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
        result.max_relative_error = std::max(result.max_relative_error, rel);
        ++result.checked;
    }
    return result;
}

}  // namespace

// --- schema ------------------------------------------------------------------

GanSchema::GanSchema(std::vector<GanColumn> columns) : columns_(std::move(columns)) {
    for (std::size_t c = 0; c < columns_.size(); ++c) {
        const auto& col = columns_[c];
        if (col.categorical) {
            if (col.labels.empty()) throw ValidationError("categorical column '" + col.name + "' has no labels");
            steps_.push_back({StepKind::category, col.labels.size(), c, width_});
            width_ += col.labels.size();
        } else {
            if (col.components == 0) throw ValidationError("numeric column '" + col.name + "' has no components");
            steps_.push_back({StepKind::value, 1, c, width_});
            width_ += 1;
            steps_.push_back({StepKind::mode, col.components, c, width_});
            width_ += col.components;
        }
    }
}

std::size_t GanSchema::numeric_count() const {
    return static_cast<std::size_t>(std::count_if(columns_.begin(), columns_.end(), [](const auto& c) { return !c.categorical; }));
}

GanSchema numeric_schema(const std::vector<gmm::GmmColumnModel>& gmms) {
    std::vector<GanColumn> cols;
    for (const auto& g : gmms) cols.push_back({g.name, false, g.m(), {}});
    return GanSchema(std::move(cols));
}

Eigen::VectorXd encode_row(std::span<const double> row, const GanSchema& schema,
                           const std::vector<gmm::GmmColumnModel>& gmms, std::optional<double> noise,
                           std::mt19937_64& rng) {
    if (row.size() != schema.columns().size()) throw ValidationError("row width does not match the GAN schema");
    if (gmms.size() != schema.numeric_count()) throw ValidationError("mixture count does not match numeric columns");
    Eigen::VectorXd out(static_cast<Eigen::Index>(schema.encoded_width()));
    std::size_t numeric_idx = 0;
    std::size_t pos = 0;
    for (std::size_t c = 0; c < schema.columns().size(); ++c) {
        const auto& col = schema.columns()[c];
        if (!col.categorical) {
            const auto& model = gmms[numeric_idx++];
            if (model.m() != col.components) throw ValidationError("mixture size mismatch for '" + col.name + "'");
            auto nv = gmm::transform(row[c], model);
            out(static_cast<Eigen::Index>(pos++)) = nv.v;
            for (double u : nv.u) out(static_cast<Eigen::Index>(pos++)) = u;
        } else {
            const std::size_t L = col.labels.size();
            const auto idx = static_cast<std::size_t>(std::llround(row[c]));
            if (row[c] < 0 || idx >= L) throw ValidationError("category index out of range for '" + col.name + "'");
            const double gamma = noise.value_or(0.2 / static_cast<double>(L));
            std::uniform_real_distribution<double> jitter(0.0, gamma > 0 ? gamma : 1.0);
            double total = 0.0;
            for (std::size_t k = 0; k < L; ++k) {
                double v = (k == idx ? 1.0 : 0.0) + (gamma > 0 ? jitter(rng) : 0.0);
                out(static_cast<Eigen::Index>(pos + k)) = v;
                total += v;
            }
            out.segment(static_cast<Eigen::Index>(pos), static_cast<Eigen::Index>(L)) /= total;
            pos += L;
        }
    }
    return out;
}

Eigen::VectorXd encode_row(std::span<const double> row, const GanSchema& schema,
                           const std::vector<gmm::GmmColumnModel>& gmms, std::optional<double> noise,
                           std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return encode_row(row, schema, gmms, noise, rng);
}

TableRow decode_row(const Eigen::Ref<const Eigen::VectorXd>& encoded, const GanSchema& schema,
                    const std::vector<gmm::GmmColumnModel>& gmms) {
    if (static_cast<std::size_t>(encoded.size()) != schema.encoded_width()) throw ValidationError("encoded width mismatch");
    TableRow row(schema.columns().size());
    std::size_t numeric_idx = 0;
    std::size_t pos = 0;
    for (std::size_t c = 0; c < schema.columns().size(); ++c) {
        const auto& col = schema.columns()[c];
        if (!col.categorical) {
            const double v = std::clamp(encoded(static_cast<Eigen::Index>(pos)), -1.0, 1.0);
            const auto m = static_cast<Eigen::Index>(col.components);
            Eigen::VectorXd u = encoded.segment(static_cast<Eigen::Index>(pos + 1), m);
            row[c] = gmm::inverse_transform(v, std::span<const double>(u.data(), static_cast<std::size_t>(m)), gmms[numeric_idx++]);
            pos += 1 + col.components;
        } else {
            Eigen::Index best = 0;
            encoded.segment(static_cast<Eigen::Index>(pos), static_cast<Eigen::Index>(col.labels.size())).maxCoeff(&best);
            row[c] = static_cast<double>(best);
            pos += col.labels.size();
        }
    }
    return row;
}

// --- parameters --------------------------------------------------------------

GeneratorParams GeneratorParams::zeros_like() const {
    GeneratorParams z = *this;
    z.visit([](Matrix& m) { m.setZero(); });
    return z;
}

std::size_t GeneratorParams::size() const {
    std::size_t n = 0;
    visit([&](const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
}

DiscriminatorParams DiscriminatorParams::zeros_like() const {
    DiscriminatorParams z = *this;
    z.visit([](Matrix& m) { m.setZero(); });
    return z;
}

std::size_t DiscriminatorParams::size() const {
    std::size_t n = 0;
    visit([&](const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
}

double DiscriminatorParams::max_abs_weight() const {
    double top = 0.0;
    visit([&](const Matrix& m) {
        if (m.size() > 0) top = std::max(top, m.cwiseAbs().maxCoeff());
    });
    return top;
}

GeneratorParams init_generator(const GanSchema& schema, std::size_t z_dim, std::size_t hidden, bool attention,
                               std::mt19937_64& rng) {
    if (z_dim == 0 || hidden == 0) throw ValidationError("generator needs positive z_dim and hidden size");
    GeneratorParams p;
    p.z_dim = z_dim;
    p.hidden = hidden;
    p.attention = attention;
    const auto h = static_cast<Eigen::Index>(hidden), zd = static_cast<Eigen::Index>(z_dim);
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    p.W = uniform_init(4 * h, zd + 2 * h, bound, rng);
    p.U = uniform_init(4 * h, h, bound, rng);
    p.b = Matrix::Zero(4 * h, 1);
    p.b.block(h, 0, h, 1).setOnes();  // forget gate
    p.Wf = uniform_init(h, h, bound, rng);
    p.bf = Matrix::Zero(h, 1);
    p.Wa = uniform_init(h, h, bound, rng);
    p.Ua = uniform_init(h, h, bound, rng);
    p.ba = Matrix::Zero(h, 1);
    p.va = uniform_init(h, 1, bound, rng);
    for (const auto& s : schema.steps()) {
        const auto w = static_cast<Eigen::Index>(s.width);
        p.Wo.push_back(uniform_init(w, h, bound, rng));
        p.bo.push_back(Matrix::Zero(w, 1));
        p.We.push_back(uniform_init(h, w, 1.0 / std::sqrt(static_cast<double>(s.width)), rng));
    }
    return p;
}

DiscriminatorParams init_discriminator(std::size_t input_width, const std::vector<std::size_t>& hidden,
                                       std::mt19937_64& rng) {
    if (input_width == 0) throw ValidationError("discriminator needs a positive input width");
    DiscriminatorParams p;
    std::size_t in = input_width;
    auto layers = hidden;
    layers.push_back(1);
    for (auto out : layers) {
        if (out == 0) throw ValidationError("discriminator layer sizes must be positive");
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        p.weights.push_back(uniform_init(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in), bound, rng));
        p.biases.push_back(Matrix::Zero(static_cast<Eigen::Index>(out), 1));
        in = out;
    }
    return p;
}

// --- forward / backward ------------------------------------------------------

Matrix generate(const Matrix& Z, const GeneratorParams& params, const GanSchema& schema) {
    return forward_trace(Z, params, schema, false).output;
}

Eigen::VectorXd generate(const Eigen::VectorXd& z, const GeneratorParams& params, const GanSchema& schema) {
    Matrix Z = z;
    return generate(Z, params, schema).col(0);
}

Eigen::RowVectorXd discriminate(const Matrix& X, const DiscriminatorParams& params) {
    return disc_forward(X, params).pres.back().row(0);
}

double discriminate(const Eigen::VectorXd& x, const DiscriminatorParams& params) {
    Matrix X = x;
    return discriminate(X, params)(0);
}

void generator_backward(const Matrix& Z, const GeneratorParams& params, const GanSchema& schema, const Matrix& dY,
                        GeneratorParams& grads) {
    backward_trace(forward_trace(Z, params, schema), params, schema, dY, grads);
}

Matrix discriminator_backward(const Matrix& X, const DiscriminatorParams& params, const Eigen::RowVectorXd& dscore,
                              DiscriminatorParams& grads) {
    return disc_backward(disc_forward(X, params), params, dscore, grads);
}

// --- losses ------------------------------------------------------------------

std::string_view to_string(LossMode mode) { return mode == LossMode::wgan ? "wgan" : "standard"; }

LossMode loss_mode_from_string(std::string_view s) {
    if (s == "wgan") return LossMode::wgan;
    if (s == "standard") return LossMode::standard;
    throw ValidationError("unknown loss mode: " + std::string(s));
}

double discriminator_loss(const Matrix& real, const Matrix& fake, const DiscriminatorParams& params, LossMode mode,
                          DiscriminatorParams* grads) {
    const auto tr_real = disc_forward(real, params);
    const auto tr_fake = disc_forward(fake, params);
    const Eigen::RowVectorXd sr = tr_real.pres.back().row(0), sf = tr_fake.pres.back().row(0);
    const double br = static_cast<double>(sr.size()), bf = static_cast<double>(sf.size());
    Eigen::RowVectorXd dr(sr.size()), df(sf.size());
    double loss = 0.0;
    if (mode == LossMode::wgan) {
        loss = sf.mean() - sr.mean();
        dr.setConstant(-1.0 / br);
        df.setConstant(1.0 / bf);
    } else {
        for (Eigen::Index i = 0; i < sr.size(); ++i) {
            loss += softplus(-sr(i)) / br;
            dr(i) = (sigmoid(sr(i)) - 1.0) / br;
        }
        for (Eigen::Index i = 0; i < sf.size(); ++i) {
            loss += softplus(sf(i)) / bf;
            df(i) = sigmoid(sf(i)) / bf;
        }
    }
    if (grads) {
        disc_backward(tr_real, params, dr, *grads);
        disc_backward(tr_fake, params, df, *grads);
    }
    return loss;
}

double generator_loss(const Matrix& Z, const GeneratorParams& gen, const GanSchema& schema,
                      const DiscriminatorParams& disc, LossMode mode, GeneratorParams* grads) {
    const auto gtr = forward_trace(Z, gen, schema);
    const auto dtr = disc_forward(gtr.output, disc);
    const Eigen::RowVectorXd s = dtr.pres.back().row(0);
    const double B = static_cast<double>(s.size());
    Eigen::RowVectorXd ds(s.size());
    double loss = 0.0;
    if (mode == LossMode::wgan) {
        loss = -s.mean();
        ds.setConstant(-1.0 / B);
    } else {
        for (Eigen::Index i = 0; i < s.size(); ++i) {
            loss += softplus(-s(i)) / B;
            ds(i) = (sigmoid(s(i)) - 1.0) / B;
        }
    }
    if (grads) {
        auto scratch = disc.zeros_like();
        const Matrix dY = disc_backward(dtr, disc, ds, scratch);
        backward_trace(gtr, gen, schema, dY, *grads);
    }
    return loss;
}

// --- training ----------------------------------------------------------------

void TrainConfig::validate() const {
    if (!(clip_c > 0)) throw ValidationError("clip_c must be > 0");
    if (critic_steps < 1) throw ValidationError("critic_steps must be >= 1");
    if (batch < 2) throw ValidationError("batch must be >= 2");
    if (z_dim < 1 || hidden < 1) throw ValidationError("z_dim and hidden must be >= 1");
    if (!(lr_generator > 0) || !(lr_discriminator > 0)) throw ValidationError("learning rates must be > 0");
    if (categorical_noise && *categorical_noise < 0) throw ValidationError("categorical noise must be >= 0");
}

nlohmann::json to_json(const TrainConfig& cfg) {
    nlohmann::json j{{"loss", to_string(cfg.loss)},
                     {"clip_c", cfg.clip_c},
                     {"critic_steps", cfg.critic_steps},
                     {"lr_generator", cfg.lr_generator},
                     {"lr_discriminator", cfg.lr_discriminator},
                     {"momentum", cfg.momentum},
                     {"rms_decay", cfg.rms_decay},
                     {"batch", cfg.batch},
                     {"epochs", cfg.epochs},
                     {"z_dim", cfg.z_dim},
                     {"hidden", cfg.hidden},
                     {"discriminator_hidden", cfg.discriminator_hidden},
                     {"attention", cfg.attention},
                     {"seed", cfg.seed}};
    j["categorical_noise"] = cfg.categorical_noise ? nlohmann::json(*cfg.categorical_noise) : nlohmann::json(nullptr);
    return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.loss = loss_mode_from_string(j.value("loss", std::string(to_string(c.loss))));
    c.clip_c = j.value("clip_c", c.clip_c);
    c.critic_steps = j.value("critic_steps", c.critic_steps);
    c.lr_generator = j.value("lr_generator", c.lr_generator);
    c.lr_discriminator = j.value("lr_discriminator", c.lr_discriminator);
    c.momentum = j.value("momentum", c.momentum);
    c.rms_decay = j.value("rms_decay", c.rms_decay);
    c.batch = j.value("batch", c.batch);
    c.epochs = j.value("epochs", c.epochs);
    c.z_dim = j.value("z_dim", c.z_dim);
    c.hidden = j.value("hidden", c.hidden);
    c.discriminator_hidden = j.value("discriminator_hidden", c.discriminator_hidden);
    c.attention = j.value("attention", c.attention);
    c.seed = j.value("seed", c.seed);
    if (j.contains("categorical_noise") && !j["categorical_noise"].is_null())
        c.categorical_noise = j["categorical_noise"].get<double>();
    return c;
}

TrainResult train(const std::vector<TableRow>& real_rows, const GanSchema& schema,
                  const std::vector<gmm::GmmColumnModel>& gmms, const TrainConfig& cfg, const CriticObserver& observer) {
    cfg.validate();
    const std::size_t n = real_rows.size();
    if (n < cfg.batch)
        throw ValidationError("batch size " + std::to_string(cfg.batch) + " exceeds the " + std::to_string(n) +
                              " training rows");

    std::mt19937_64 rng(cfg.seed);
    const auto D = static_cast<Eigen::Index>(schema.encoded_width());
    Matrix real(D, static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        real.col(static_cast<Eigen::Index>(i)) = encode_row(real_rows[i], schema, gmms, cfg.categorical_noise, rng);

    TrainResult result;
    result.generator = init_generator(schema, cfg.z_dim, cfg.hidden, cfg.attention, rng);
    result.discriminator = init_discriminator(schema.encoded_width(), cfg.discriminator_hidden, rng);
    auto& G = result.generator;
    auto& Dp = result.discriminator;
    if (cfg.loss == LossMode::wgan)
        Dp.visit([&](Matrix& m) { m = m.cwiseMax(-cfg.clip_c).cwiseMin(cfg.clip_c); });

    Optimizer opt_g(cfg.loss, cfg.lr_generator, cfg);
    Optimizer opt_d(cfg.loss, cfg.lr_discriminator, cfg);
    auto gG = G.zeros_like();
    auto gD = Dp.zeros_like();
    const auto pG = tensors(G), pD = tensors(Dp);
    const auto tG = tensors(gG), tD = tensors(gD);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t cursor = 0;
    const auto B = static_cast<Eigen::Index>(cfg.batch);
    Matrix batch(D, B);
    auto next_real = [&]() -> const Matrix& {
        if (cursor + cfg.batch > n) {
            std::shuffle(order.begin(), order.end(), rng);
            cursor = 0;
        }
        for (Eigen::Index j = 0; j < B; ++j) batch.col(j) = real.col(static_cast<Eigen::Index>(order[cursor++]));
        return batch;
    };
    auto noise = [&] { return normal_matrix(static_cast<Eigen::Index>(cfg.z_dim), B, rng); };

    const std::size_t per_epoch = std::max<std::size_t>(1, n / (cfg.batch * cfg.critic_steps));
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t it = 0; it < per_epoch; ++it, ++step) {
            double d_sum = 0.0;
            for (std::size_t c = 0; c < cfg.critic_steps; ++c) {
                const Matrix& xr = next_real();
                const Matrix xf = generate(noise(), G, schema);
                for (auto* t : tD) t->setZero();
                d_sum += discriminator_loss(xr, xf, Dp, cfg.loss, &gD);
                opt_d.step(pD, tD);
                if (cfg.loss == LossMode::wgan)
                    for (auto* m : pD) *m = m->cwiseMax(-cfg.clip_c).cwiseMin(cfg.clip_c);
                if (!all_finite(Dp))
                    throw RuntimeError("discriminator diverged (non-finite weight) at step " + std::to_string(step));
                if (observer) observer(result.critic_updates, Dp);
                ++result.critic_updates;
            }
            for (auto* t : tG) t->setZero();
            const double g_loss = generator_loss(noise(), G, schema, Dp, cfg.loss, &gG);
            opt_g.step(pG, tG);
            if (!all_finite(G)) throw RuntimeError("generator diverged (non-finite weight) at step " + std::to_string(step));
            result.history.push_back({step, d_sum / static_cast<double>(cfg.critic_steps), g_loss});
        }
    }
    return result;
}

SyntheticBatch sample_rows(std::size_t n, const GeneratorParams& params, const std::vector<gmm::GmmColumnModel>& gmms,
                           const GanSchema& schema, std::uint64_t seed) {
    SyntheticBatch out;
    out.encoded.resize(static_cast<Eigen::Index>(schema.encoded_width()), static_cast<Eigen::Index>(n));
    out.rows.reserve(n);
    std::mt19937_64 rng(seed);
    constexpr std::size_t chunk = 512;
    for (std::size_t start = 0; start < n; start += chunk) {
        const std::size_t len = std::min(chunk, n - start);
        const Matrix Z = normal_matrix(static_cast<Eigen::Index>(params.z_dim), static_cast<Eigen::Index>(len), rng);
        const Matrix Y = generate(Z, params, schema);
        out.encoded.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(len)) = Y;
        for (Eigen::Index j = 0; j < Y.cols(); ++j) {
            ingest::FlowRecord r;
            r.features = decode_row(Y.col(j), schema, gmms);
            r.label = 1;
            out.rows.push_back(std::move(r));
        }
    }
    return out;
}

// --- gradient checking ------------------------------------------------------

GradCheckResult gradient_check_generator(const GeneratorParams& gen, const GanSchema& schema,
                                         const DiscriminatorParams& disc, const Matrix& Z, LossMode mode,
                                         std::size_t samples, std::uint64_t seed) {
    auto analytic = gen.zeros_like();
    generator_loss(Z, gen, schema, disc, mode, &analytic);
    return finite_difference_check(gen, analytic, samples, seed,
                                   [&](const GeneratorParams& p) { return generator_loss(Z, p, schema, disc, mode); });
}

GradCheckResult gradient_check_discriminator(const DiscriminatorParams& disc, const Matrix& real, const Matrix& fake,
                                             LossMode mode, std::size_t samples, std::uint64_t seed) {
    auto analytic = disc.zeros_like();
    discriminator_loss(real, fake, disc, mode, &analytic);
    return finite_difference_check(disc, analytic, samples, seed, [&](const DiscriminatorParams& p) {
        return discriminator_loss(real, fake, p, mode);
    });
}

// --- persistence -------------------------------------------------------------

nlohmann::json to_json(const GanModel& model) {
    nlohmann::json doc;
    doc["format"] = "ddosgan.gan";
    doc["version"] = 1;
    auto& cols = doc["schema"] = nlohmann::json::array();
    for (const auto& c : model.schema.columns())
        cols.push_back({{"name", c.name}, {"categorical", c.categorical}, {"components", c.components}, {"labels", c.labels}});
    auto& gm = doc["gmms"] = nlohmann::json::array();
    for (const auto& g : model.gmms) gm.push_back(gmm::to_json(g));
    const auto& G = model.generator;
    doc["generator"] = {{"z_dim", G.z_dim},
                        {"hidden", G.hidden},
                        {"attention", G.attention},
                        {"W", matrix_json(G.W)},
                        {"U", matrix_json(G.U)},
                        {"b", matrix_json(G.b)},
                        {"Wf", matrix_json(G.Wf)},
                        {"bf", matrix_json(G.bf)},
                        {"Wa", matrix_json(G.Wa)},
                        {"Ua", matrix_json(G.Ua)},
                        {"ba", matrix_json(G.ba)},
                        {"va", matrix_json(G.va)},
                        {"Wo", matrices_json(G.Wo)},
                        {"bo", matrices_json(G.bo)},
                        {"We", matrices_json(G.We)}};
    doc["discriminator"] = {{"weights", matrices_json(model.discriminator.weights)},
                            {"biases", matrices_json(model.discriminator.biases)}};
    doc["train_config"] = to_json(model.config);
    return doc;
}

GanModel gan_from_json(const nlohmann::json& doc) {
    if (doc.value("format", "") != "ddosgan.gan" || doc.value("version", 0) != 1)
        throw ValidationError("not a GAN model document (format/version)");
    GanModel m;
    std::vector<GanColumn> cols;
    for (const auto& c : doc.at("schema"))
        cols.push_back({c.at("name").get<std::string>(), c.at("categorical").get<bool>(),
                        c.at("components").get<std::size_t>(), c.at("labels").get<std::vector<std::string>>()});
    m.schema = GanSchema(std::move(cols));
    for (const auto& g : doc.at("gmms")) m.gmms.push_back(gmm::column_from_json(g));
    const auto& g = doc.at("generator");
    auto& G = m.generator;
    G.z_dim = g.at("z_dim").get<std::size_t>();
    G.hidden = g.at("hidden").get<std::size_t>();
    G.attention = g.at("attention").get<bool>();
    G.W = matrix_from_json(g.at("W"));
    G.U = matrix_from_json(g.at("U"));
    G.b = matrix_from_json(g.at("b"));
    G.Wf = matrix_from_json(g.at("Wf"));
    G.bf = matrix_from_json(g.at("bf"));
    G.Wa = matrix_from_json(g.at("Wa"));
    G.Ua = matrix_from_json(g.at("Ua"));
    G.ba = matrix_from_json(g.at("ba"));
    G.va = matrix_from_json(g.at("va"));
    G.Wo = matrices_from_json(g.at("Wo"));
    G.bo = matrices_from_json(g.at("bo"));
    G.We = matrices_from_json(g.at("We"));
    if (G.Wo.size() != m.schema.steps().size()) throw ValidationError("generator step count does not match the schema");
    m.discriminator.weights = matrices_from_json(doc.at("discriminator").at("weights"));
    m.discriminator.biases = matrices_from_json(doc.at("discriminator").at("biases"));
    m.config = train_config_from_json(doc.at("train_config"));
    return m;
}

std::string history_csv(const std::vector<LossRecord>& history) {
    std::ostringstream out;
    out.precision(17);
    out << "step,d_loss,g_loss\n";
    for (const auto& r : history) out << r.step << ',' << r.d_loss << ',' << r.g_loss << '\n';
    return out.str();
}

}  // namespace ddosgan::tabgan
