#include "ddosgan/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

#include "ddosgan/common.hpp"

namespace ddosgan::classifiers {

namespace {

using Columns = std::vector<std::vector<double>>;

Columns to_columns(const Dataset& data) {
    const std::size_t d = data.n_features();
    Columns cols(d, std::vector<double>(data.rows.size()));
    for (std::size_t i = 0; i < data.rows.size(); ++i)
        for (std::size_t f = 0; f < d; ++f) cols[f][i] = data.rows[i].features[f];
    return cols;
}

std::vector<std::vector<std::uint32_t>> presort(const Columns& cols, std::size_t n) {
    std::vector<std::vector<std::uint32_t>> sorted(cols.size());
    for (std::size_t f = 0; f < cols.size(); ++f) {
        auto& s = sorted[f];
        s.resize(n);
        std::iota(s.begin(), s.end(), 0u);
        const auto& c = cols[f];
        std::stable_sort(s.begin(), s.end(), [&](std::uint32_t a, std::uint32_t b) { return c[a] < c[b]; });
    }
    return sorted;
}

void require_rows(const Dataset& train) {
    if (train.rows.empty()) throw ValidationError("training set is empty");
    if (train.n_features() == 0) throw ValidationError("training set has no features");
}

void require_both_classes(const Dataset& train) {
    require_rows(train);
    std::array<std::size_t, 2> counts{0, 0};
    for (const auto& r : train.rows) ++counts[static_cast<std::size_t>(r.label)];
    if (counts[0] == 0 || counts[1] == 0) throw ValidationError("training set holds a single class");
}

// Grows one tree over "sample positions"; each position maps to a data row
// (bootstrap samples repeat rows). `sorted[f]` lists positions ordered by
// feature f, and every node owns the same contiguous range in all of them.
class TreeBuilder {
public:
    TreeBuilder(const Columns& cols, const std::vector<int>& labels, std::vector<std::uint32_t> pos_row,
                std::vector<std::vector<std::uint32_t>> sorted, const TreeParams& params, std::size_t fps,
                std::uint64_t seed)
        : cols_(cols), labels_(labels), pos_row_(std::move(pos_row)), sorted_(std::move(sorted)),
          params_(params), fps_(fps), rng_(seed) {}

    std::vector<TreeNode> build() {
        const std::size_t n = pos_row_.size();
        goes_left_.assign(n, 0);
        buffer_.resize(n);
        features_.resize(cols_.size());
        std::iota(features_.begin(), features_.end(), 0);

        struct Task {
            int node;
            std::size_t begin, end, depth;
        };
        std::vector<TreeNode> nodes(1);
        std::vector<Task> stack{{0, 0, n, 0}};
        while (!stack.empty()) {
            Task t = stack.back();
            stack.pop_back();
            std::array<std::size_t, 2> counts{0, 0};
            for (std::size_t i = t.begin; i < t.end; ++i) ++counts[label(sorted_[0][i])];
            const std::size_t m = t.end - t.begin;
            nodes[t.node].proba = {static_cast<double>(counts[0]) / static_cast<double>(m),
                                   static_cast<double>(counts[1]) / static_cast<double>(m)};
            const bool pure = counts[0] == 0 || counts[1] == 0;
            const bool depth_cap = params_.max_depth > 0 && t.depth >= params_.max_depth;
            if (pure || depth_cap || m < params_.min_samples_split || m < 2) continue;

            auto split = best_split(t.begin, t.end, counts);
            if (!split) continue;
            const std::size_t mid = partition(t.begin, t.end, split->feature, split->threshold);

            const int left = static_cast<int>(nodes.size());
            nodes.emplace_back();
            nodes.emplace_back();
            nodes[t.node].feature = static_cast<int>(split->feature);
            nodes[t.node].threshold = split->threshold;
            nodes[t.node].left = left;
            nodes[t.node].right = left + 1;
            stack.push_back({left + 1, mid, t.end, t.depth + 1});
            stack.push_back({left, t.begin, mid, t.depth + 1});
        }
        return nodes;
    }

private:
    struct Split {
        std::size_t feature;
        double threshold;
    };

    std::size_t label(std::uint32_t pos) const { return static_cast<std::size_t>(labels_[pos_row_[pos]]); }
    double value(std::size_t f, std::uint32_t pos) const { return cols_[f][pos_row_[pos]]; }

    std::optional<Split> best_split(std::size_t begin, std::size_t end, const std::array<std::size_t, 2>& counts) {
        const std::size_t d = cols_.size();
        const bool sampled = fps_ < d;
        if (sampled) std::shuffle(features_.begin(), features_.end(), rng_);

        std::optional<Split> best;
        double best_proxy = -std::numeric_limits<double>::infinity();
        std::size_t visited = 0;
        for (std::size_t k = 0; k < d && visited < fps_; ++k) {
            const std::size_t f = sampled ? features_[k] : k;
            const auto& s = sorted_[f];
            if (value(f, s[begin]) >= value(f, s[end - 1])) continue;  // constant here
            ++visited;
            double l0 = 0, l1 = 0;
            const double c0 = static_cast<double>(counts[0]), c1 = static_cast<double>(counts[1]);
            const double m = static_cast<double>(end - begin);
            for (std::size_t i = begin; i + 1 < end; ++i) {
                (label(s[i]) ? l1 : l0) += 1.0;
                const double v = value(f, s[i]), next = value(f, s[i + 1]);
                if (!(v < next)) continue;
                const double nl = l0 + l1, nr = m - nl;
                const double r0 = c0 - l0, r1 = c1 - l1;
                // Minimizing weighted Gini equals maximizing this proxy.
                const double proxy = (l0 * l0 + l1 * l1) / nl + (r0 * r0 + r1 * r1) / nr;
                if (proxy > best_proxy) {
                    best_proxy = proxy;
                    double thr = v + (next - v) / 2.0;
                    if (thr >= next || !std::isfinite(thr)) thr = v;
                    best = Split{f, thr};
                }
            }
        }
        return best;
    }

    std::size_t partition(std::size_t begin, std::size_t end, std::size_t feature, double threshold) {
        std::size_t n_left = 0;
        for (std::size_t i = begin; i < end; ++i) {
            const auto pos = sorted_[feature][i];
            goes_left_[pos] = value(feature, pos) <= threshold;
            n_left += goes_left_[pos];
        }
        for (auto& s : sorted_) {
            std::size_t w = begin, r = 0;
            for (std::size_t i = begin; i < end; ++i) {
                if (goes_left_[s[i]])
                    s[w++] = s[i];
                else
                    buffer_[r++] = s[i];
            }
            std::copy(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(r), s.begin() + static_cast<std::ptrdiff_t>(w));
        }
        return begin + n_left;
    }

    const Columns& cols_;
    const std::vector<int>& labels_;
    std::vector<std::uint32_t> pos_row_;
    std::vector<std::vector<std::uint32_t>> sorted_;
    TreeParams params_;
    std::size_t fps_;
    std::mt19937_64 rng_;
    std::vector<std::uint8_t> goes_left_;
    std::vector<std::uint32_t> buffer_;
    std::vector<std::size_t> features_;
};

std::vector<int> labels_of(const Dataset& data) {
    std::vector<int> y(data.rows.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = data.rows[i].label;
    return y;
}

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double safe_div(double num, double den, bool& undefined) {
    if (den == 0.0) {
        undefined = true;
        return 0.0;
    }
    return num / den;
}

nlohmann::json header(std::string_view kind) {
    return {{"format", "ddosgan.model"}, {"version", 1}, {"kind", kind}};
}

nlohmann::json tree_body(const DecisionTreeModel& m) {
    nlohmann::json j;
    j["n_features"] = m.n_features();
    j["max_depth"] = m.params().max_depth;
    j["min_samples_split"] = m.params().min_samples_split;
    j["features_per_split"] = m.params().features_per_split;
    std::vector<int> feature, left, right;
    std::vector<double> threshold, p1;
    for (const auto& n : m.nodes()) {
        feature.push_back(n.feature);
        threshold.push_back(n.threshold);
        left.push_back(n.left);
        right.push_back(n.right);
        p1.push_back(n.proba[1]);
    }
    j["feature"] = feature;
    j["threshold"] = threshold;
    j["left"] = left;
    j["right"] = right;
    j["p1"] = p1;
    return j;
}

DecisionTreeModel tree_from_body(const nlohmann::json& j) {
    TreeParams p{j.at("max_depth").get<std::size_t>(), j.at("min_samples_split").get<std::size_t>(),
                 j.at("features_per_split").get<std::size_t>()};
    auto feature = j.at("feature").get<std::vector<int>>();
    auto threshold = j.at("threshold").get<std::vector<double>>();
    auto left = j.at("left").get<std::vector<int>>();
    auto right = j.at("right").get<std::vector<int>>();
    auto p1 = j.at("p1").get<std::vector<double>>();
    std::vector<TreeNode> nodes(feature.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        nodes[i] = {feature[i], threshold[i], left[i], right[i], {1.0 - p1[i], p1[i]}};
        const bool leaf = feature[i] < 0;
        if (!leaf && (left[i] <= 0 || right[i] <= 0 || static_cast<std::size_t>(std::max(left[i], right[i])) >= nodes.size()))
            throw ValidationError("tree document has a dangling child index");
    }
    if (nodes.empty()) throw ValidationError("tree document has no nodes");
    return DecisionTreeModel(std::move(nodes), j.at("n_features").get<std::size_t>(), p);
}

}  // namespace

// --- decision tree ---------------------------------------------------------

const TreeNode& DecisionTreeModel::leaf_for(std::span<const double> x) const {
    std::size_t i = 0;
    while (nodes_[i].feature >= 0) {
        const auto& n = nodes_[i];
        i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes_[i];
}

double DecisionTreeModel::predict_proba(std::span<const double> x) const { return leaf_for(x).proba[1]; }

std::size_t DecisionTreeModel::depth() const {
    std::size_t best = 0;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
        auto [i, dep] = stack.back();
        stack.pop_back();
        best = std::max(best, dep);
        if (nodes_[i].feature >= 0) {
            stack.push_back({static_cast<std::size_t>(nodes_[i].left), dep + 1});
            stack.push_back({static_cast<std::size_t>(nodes_[i].right), dep + 1});
        }
    }
    return best;
}

DecisionTreeModel train_tree(const Dataset& train, const TreeParams& params, std::uint64_t seed) {
    require_rows(train);
    const auto cols = to_columns(train);
    const auto labels = labels_of(train);
    const std::size_t n = train.rows.size(), d = cols.size();
    std::vector<std::uint32_t> pos_row(n);
    std::iota(pos_row.begin(), pos_row.end(), 0u);
    const std::size_t fps = params.features_per_split == 0 ? d : std::min(params.features_per_split, d);
    TreeBuilder builder(cols, labels, std::move(pos_row), presort(cols, n), params, fps, seed);
    return DecisionTreeModel(builder.build(), d, params);
}

// --- forest ------------------------------------------------------------------

double ForestModel::predict_proba(std::span<const double> x) const {
    double sum = 0.0;
    for (const auto& t : trees_) sum += t.predict_proba(x);
    return sum / static_cast<double>(trees_.size());
}

int ForestModel::predict(std::span<const double> x) const {
    std::size_t votes = 0;
    double sum = 0.0;
    for (const auto& t : trees_) {
        const double p = t.predict_proba(x);
        sum += p;
        votes += p >= 0.5;
    }
    const std::size_t n = trees_.size();
    if (2 * votes > n) return 1;
    if (2 * votes < n) return 0;
    return sum / static_cast<double>(n) >= 0.5 ? 1 : 0;
}

ForestModel train_forest(const Dataset& train, const ForestParams& params, std::uint64_t seed) {
    require_rows(train);
    if (params.n_trees < 1) throw ValidationError("n_trees must be >= 1");
    const auto cols = to_columns(train);
    const auto labels = labels_of(train);
    const std::size_t n = train.rows.size(), d = cols.size();
    const std::size_t fps = params.tree.features_per_split == 0
                                ? static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))))
                                : std::min(params.tree.features_per_split, d);
    const auto global_sorted = presort(cols, n);
    TreeParams tree_params = params.tree;
    tree_params.features_per_split = fps;

    std::vector<DecisionTreeModel> trees(params.n_trees);
    std::vector<std::uint64_t> seeds(params.n_trees);
    parallel_for(params.n_trees, params.threads, [&](std::size_t t) {
        const std::uint64_t tree_seed = seed + t;
        seeds[t] = tree_seed;
        std::mt19937_64 rng(tree_seed);
        std::vector<std::uint32_t> pos_row(n);
        if (params.bootstrap) {
            std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(n - 1));
            for (auto& r : pos_row) r = pick(rng);
        } else {
            std::iota(pos_row.begin(), pos_row.end(), 0u);
        }
        // Bucket positions by row, then walk each global order.
        std::vector<std::uint32_t> offset(n + 1, 0);
        for (auto r : pos_row) ++offset[r + 1];
        for (std::size_t r = 0; r < n; ++r) offset[r + 1] += offset[r];
        std::vector<std::uint32_t> by_row(n), fill(offset.begin(), offset.end() - 1);
        for (std::uint32_t p = 0; p < n; ++p) by_row[fill[pos_row[p]]++] = p;
        std::vector<std::vector<std::uint32_t>> sorted(d);
        for (std::size_t f = 0; f < d; ++f) {
            auto& s = sorted[f];
            s.reserve(n);
            for (auto r : global_sorted[f])
                for (auto k = offset[r]; k < offset[r + 1]; ++k) s.push_back(by_row[k]);
        }
        TreeBuilder builder(cols, labels, std::move(pos_row), std::move(sorted), tree_params, fps, rng());
        trees[t] = DecisionTreeModel(builder.build(), d, tree_params);
    });
    return ForestModel(std::move(trees), std::move(seeds), fps);
}

// --- logistic regression --------------------------------------------------

double LogisticModel::predict_proba(std::span<const double> x) const {
    double z = bias_;
    for (std::size_t j = 0; j < weights_.size(); ++j) z += weights_[j] * (x[j] - mean_[j]) / std_[j];
    return sigmoid(z);
}

LogisticModel train_logistic(const Dataset& train, const LogisticParams& params) {
    require_both_classes(train);
    const std::size_t n = train.rows.size(), d = train.n_features();
    std::vector<double> mean(d, 0.0), sd(d, 0.0);
    for (const auto& r : train.rows)
        for (std::size_t j = 0; j < d; ++j) mean[j] += r.features[j];
    for (auto& m : mean) m /= static_cast<double>(n);
    for (const auto& r : train.rows)
        for (std::size_t j = 0; j < d; ++j) sd[j] += (r.features[j] - mean[j]) * (r.features[j] - mean[j]);
    std::size_t varying = 0;
    for (auto& s : sd) {
        s = std::sqrt(s / static_cast<double>(n));
        if (s > 0.0)
            ++varying;
        else
            s = 1.0;
    }

    std::vector<double> xs(n * d);
    std::vector<double> y(n);
    std::size_t positives = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) xs[i * d + j] = (train.rows[i].features[j] - mean[j]) / sd[j];
        y[i] = train.rows[i].label;
        positives += static_cast<std::size_t>(train.rows[i].label);
    }
    const double prior = static_cast<double>(positives) / static_cast<double>(n);
    std::vector<double> w(d, 0.0);
    double b = std::log(prior / (1.0 - prior));

    // The objective is L-smooth with L <= (varying + 1)/4 + l2 on standardized
    // inputs; a step of at most 1/L keeps the loss non-increasing.
    const double smooth = 0.25 * static_cast<double>(varying + 1) + params.l2;
    const double step = std::min(params.lr, 1.0 / smooth);

    std::vector<double> z(n), grad(d);
    auto objective = [&] {
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double zi = b;
            for (std::size_t j = 0; j < d; ++j) zi += w[j] * xs[i * d + j];
            z[i] = zi;
            loss += softplus(zi) - y[i] * zi;
        }
        double reg = 0.0;
        for (double wj : w) reg += wj * wj;
        return loss / static_cast<double>(n) + 0.5 * params.l2 * reg;
    };

    std::vector<double> history;
    history.reserve(params.epochs + 1);
    for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
        history.push_back(objective());
        std::fill(grad.begin(), grad.end(), 0.0);
        double gb = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = sigmoid(z[i]) - y[i];
            gb += r;
            for (std::size_t j = 0; j < d; ++j) grad[j] += r * xs[i * d + j];
        }
        for (std::size_t j = 0; j < d; ++j) w[j] -= step * (grad[j] / static_cast<double>(n) + params.l2 * w[j]);
        b -= step * gb / static_cast<double>(n);
    }
    history.push_back(objective());
    LogisticModel model(std::move(w), b, std::move(mean), std::move(sd));
    model.set_loss_history(std::move(history));
    return model;
}

// --- gaussian naive bayes -------------------------------------------------

std::array<double, 2> GaussianNBModel::joint_log_likelihood(std::span<const double> x) const {
    constexpr double kLog2Pi = 1.8378770664093453;
    std::array<double, 2> jll{};
    for (std::size_t c = 0; c < 2; ++c) {
        double s = std::log(priors_[c]);
        for (std::size_t j = 0; j < mean_[c].size(); ++j) {
            const double diff = x[j] - mean_[c][j];
            s -= 0.5 * (kLog2Pi + std::log(var_[c][j]) + diff * diff / var_[c][j]);
        }
        jll[c] = s;
    }
    return jll;
}

double GaussianNBModel::predict_proba(std::span<const double> x) const {
    const auto jll = joint_log_likelihood(x);
    return sigmoid(jll[1] - jll[0]);
}

GaussianNBModel train_gnb(const Dataset& train) {
    require_both_classes(train);
    const std::size_t n = train.rows.size(), d = train.n_features();
    std::array<std::vector<double>, 2> mean{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
    std::array<std::vector<double>, 2> var{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
    std::array<double, 2> count{0.0, 0.0};
    std::vector<double> all_mean(d, 0.0), all_var(d, 0.0);
    for (const auto& r : train.rows) {
        const auto c = static_cast<std::size_t>(r.label);
        count[c] += 1.0;
        for (std::size_t j = 0; j < d; ++j) {
            mean[c][j] += r.features[j];
            all_mean[j] += r.features[j];
        }
    }
    for (std::size_t c = 0; c < 2; ++c)
        for (auto& m : mean[c]) m /= count[c];
    for (auto& m : all_mean) m /= static_cast<double>(n);
    for (const auto& r : train.rows) {
        const auto c = static_cast<std::size_t>(r.label);
        for (std::size_t j = 0; j < d; ++j) {
            var[c][j] += (r.features[j] - mean[c][j]) * (r.features[j] - mean[c][j]);
            all_var[j] += (r.features[j] - all_mean[j]) * (r.features[j] - all_mean[j]);
        }
    }
    double max_var = 0.0;
    for (auto v : all_var) max_var = std::max(max_var, v / static_cast<double>(n));
    const double epsilon = max_var > 0.0 ? 1e-9 * max_var : 1e-9;
    for (std::size_t c = 0; c < 2; ++c)
        for (auto& v : var[c]) v = v / count[c] + epsilon;
    std::array<double, 2> priors{count[0] / static_cast<double>(n), count[1] / static_cast<double>(n)};
    return GaussianNBModel(priors, std::move(mean), std::move(var), epsilon);
}

// --- evaluation ------------------------------------------------------------

Evaluation evaluate_predictions(std::span<const int> predicted, std::span<const int> labels) {
    if (predicted.empty()) throw ValidationError("cannot evaluate on an empty set");
    if (predicted.size() != labels.size()) throw ValidationError("prediction and label counts differ");
    Evaluation e;
    auto& cm = e.confusion;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const bool p = predicted[i] == 1, y = labels[i] == 1;
        if (p && y) ++cm.tp;
        else if (p && !y) ++cm.fp;
        else if (!p && y) ++cm.fn;
        else ++cm.tn;
    }
    auto& m = e.metrics;
    const auto total = static_cast<double>(cm.total());
    m.accuracy = static_cast<double>(cm.tp + cm.tn) / total;

    auto fill = [&](std::size_t cls, std::size_t hit, std::size_t false_pos, std::size_t false_neg) {
        auto& c = m.per_class[cls];
        bool up = false, ur = false, uf = false;
        c.precision = safe_div(static_cast<double>(hit), static_cast<double>(hit + false_pos), up);
        c.recall = safe_div(static_cast<double>(hit), static_cast<double>(hit + false_neg), ur);
        c.f1 = safe_div(2.0 * c.precision * c.recall, c.precision + c.recall, uf);
        c.support = hit + false_neg;
        const auto tag = "[" + std::to_string(cls) + "]";
        if (up) m.undefined.push_back("precision" + tag);
        if (ur) m.undefined.push_back("recall" + tag);
        if (uf) m.undefined.push_back("f1" + tag);
    };
    fill(0, cm.tn, cm.fn, cm.fp);
    fill(1, cm.tp, cm.fp, cm.fn);

    const auto& c0 = m.per_class[0];
    const auto& c1 = m.per_class[1];
    m.macro = {(c0.precision + c1.precision) / 2.0, (c0.recall + c1.recall) / 2.0, (c0.f1 + c1.f1) / 2.0, cm.total()};
    const double w0 = static_cast<double>(c0.support) / total, w1 = static_cast<double>(c1.support) / total;
    m.weighted = {w0 * c0.precision + w1 * c1.precision, w0 * c0.recall + w1 * c1.recall, w0 * c0.f1 + w1 * c1.f1,
                  cm.total()};
    return e;
}

std::vector<int> predict_all(const Predictor& model, const Dataset& data) {
    if (!data.rows.empty() && data.n_features() != model.n_features())
        throw ValidationError("model expects " + std::to_string(model.n_features()) + " features, data has " +
                              std::to_string(data.n_features()));
    std::vector<int> out(data.rows.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = model.predict(data.rows[i].features);
    return out;
}

Evaluation evaluate(const Predictor& model, const Dataset& test) {
    if (test.rows.empty()) throw ValidationError("cannot evaluate on an empty set");
    const auto predicted = predict_all(model, test);
    return evaluate_predictions(predicted, labels_of(test));
}

std::string format_report(const Evaluation& eval) {
    const auto& m = eval.metrics;
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "Test Accuracy = %.16g\n", m.accuracy);
    out += buf;
    std::snprintf(buf, sizeof buf, "%12s %10s %10s %10s %10s\n\n", "", "precision", "recall", "f1-score", "support");
    out += buf;
    for (std::size_t c = 0; c < 2; ++c) {
        const auto& r = m.per_class[c];
        std::snprintf(buf, sizeof buf, "%12zu %10.2f %10.2f %10.2f %10zu\n", c, r.precision, r.recall, r.f1, r.support);
        out += buf;
    }
    out += "\n";
    std::snprintf(buf, sizeof buf, "%12s %10s %10s %10.2f %10zu\n", "accuracy", "", "", m.accuracy, eval.confusion.total());
    out += buf;
    for (auto [name, r] : {std::pair{"macro avg", &m.macro}, std::pair{"weighted avg", &m.weighted}}) {
        std::snprintf(buf, sizeof buf, "%12s %10.2f %10.2f %10.2f %10zu\n", name, r->precision, r->recall, r->f1, r->support);
        out += buf;
    }
    const auto& cm = eval.confusion;
    std::snprintf(buf, sizeof buf, "\nconfusion: tp=%zu fp=%zu tn=%zu fn=%zu\n", cm.tp, cm.fp, cm.tn, cm.fn);
    out += buf;
    if (!m.undefined.empty()) {
        out += "undefined (reported as 0):";
        for (const auto& u : m.undefined) out += " " + u;
        out += "\n";
    }
    return out;
}

std::vector<std::size_t> rank_models(const std::vector<Evaluation>& evals) {
    std::vector<std::size_t> order(evals.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& ea = evals[a];
        const auto& eb = evals[b];
        if (ea.confusion.fn != eb.confusion.fn) return ea.confusion.fn < eb.confusion.fn;
        return ea.metrics.accuracy > eb.metrics.accuracy;
    });
    return order;
}

// --- persistence -------------------------------------------------------------

nlohmann::json to_json(const DecisionTreeModel& m) {
    auto j = header("tree");
    j["tree"] = tree_body(m);
    return j;
}

nlohmann::json to_json(const ForestModel& m) {
    auto j = header("forest");
    j["features_per_split"] = m.features_per_split();
    j["seeds"] = m.seeds();
    auto& trees = j["trees"] = nlohmann::json::array();
    for (const auto& t : m.trees()) trees.push_back(tree_body(t));
    return j;
}

nlohmann::json to_json(const LogisticModel& m) {
    auto j = header("logistic");
    j["weights"] = m.weights();
    j["bias"] = m.bias();
    j["mean"] = m.mean();
    j["std"] = m.stddev();
    return j;
}

nlohmann::json to_json(const GaussianNBModel& m) {
    auto j = header("gnb");
    j["priors"] = m.priors();
    j["mean"] = m.means();
    j["var"] = m.variances();
    j["epsilon"] = m.epsilon();
    return j;
}

std::unique_ptr<Predictor> model_from_json(const nlohmann::json& doc) {
    if (doc.value("format", "") != "ddosgan.model" || doc.value("version", 0) != 1)
        throw ValidationError("not a model document (format/version)");
    const auto kind = doc.at("kind").get<std::string>();
    if (kind == "tree") return std::make_unique<DecisionTreeModel>(tree_from_body(doc.at("tree")));
    if (kind == "forest") {
        std::vector<DecisionTreeModel> trees;
        for (const auto& t : doc.at("trees")) trees.push_back(tree_from_body(t));
        if (trees.empty()) throw ValidationError("forest document has no trees");
        return std::make_unique<ForestModel>(std::move(trees), doc.at("seeds").get<std::vector<std::uint64_t>>(),
                                             doc.at("features_per_split").get<std::size_t>());
    }
    if (kind == "logistic")
        return std::make_unique<LogisticModel>(doc.at("weights").get<std::vector<double>>(), doc.at("bias").get<double>(),
                                               doc.at("mean").get<std::vector<double>>(),
                                               doc.at("std").get<std::vector<double>>());
    if (kind == "gnb")
        return std::make_unique<GaussianNBModel>(doc.at("priors").get<std::array<double, 2>>(),
                                                 doc.at("mean").get<std::array<std::vector<double>, 2>>(),
                                                 doc.at("var").get<std::array<std::vector<double>, 2>>(),
                                                 doc.at("epsilon").get<double>());
    throw ValidationError("unknown model kind: " + kind);
}

}  // namespace ddosgan::classifiers
