#include "ddosgan/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "ddosgan/classifiers.hpp"
#include "ddosgan/common.hpp"
#include "ddosgan/evasion.hpp"
#include "ddosgan/gmm.hpp"
#include "ddosgan/shapley.hpp"
#include "ddosgan/sink.hpp"
#include "ddosgan/stream.hpp"

namespace ddosgan::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Workdir layout.
namespace artifact {
constexpr const char* prepare = "prepare.json";
constexpr const char* train = "train.tsv";
constexpr const char* test = "test.tsv";
constexpr const char* importance = "importance.json";
constexpr const char* ids_report = "ids_report.txt";
constexpr const char* ids_metrics = "ids_metrics.json";
constexpr const char* gan = "gan.json";
constexpr const char* gan_history = "gan_history.csv";
constexpr const char* gan_reference = "gan_reference.tsv";
constexpr const char* synthetic = "synthetic.tsv";
constexpr const char* evasion_json = "evasion.json";
constexpr const char* evasion_txt = "evasion.txt";
constexpr const char* stream_json = "stream.json";
constexpr const char* predictions = "predictions.jsonl";
constexpr const char* report = "report.txt";
constexpr const char* dashboard = "dashboard.json";
}  // namespace artifact

fs::path model_path(const RunConfig& cfg, const std::string& name) { return cfg.workdir / "models" / (name + ".json"); }

fs::path bulk_path(const RunConfig& cfg) { return cfg.workdir / (cfg.stream.index + ".ndjson"); }

void require(const fs::path& p, std::string_view producer) {
    if (!fs::exists(p))
        throw ValidationError("missing artifact " + p.string() + " (run `" + std::string(producer) + "` first)");
}

json read_json(const fs::path& p) {
    auto doc = json::parse(read_file(p), nullptr, false);
    if (doc.is_discarded()) throw ValidationError(p.string() + ": not valid JSON");
    return doc;
}

void write_json(const fs::path& p, const json& doc) { write_file_atomic(p, doc.dump(2) + "\n"); }

// Fails on keys the defaults do not know, so typos never pass silently.
void check_known(const json& defaults, const json& doc, const std::string& path) {
    if (!doc.is_object()) return;
    for (const auto& [key, value] : doc.items()) {
        const std::string where = path.empty() ? key : path + "." + key;
        if (!defaults.contains(key)) throw ValidationError("unknown config key: " + where);
        if (defaults[key].is_object()) {
            if (!value.is_object()) throw ValidationError("config key " + where + " must be an object");
            check_known(defaults[key], value, where);
        }
    }
}

std::vector<std::size_t> selected_indices(const RunConfig& cfg, const ingest::Dataset& data,
                                          std::vector<std::string>* names = nullptr) {
    const auto p = cfg.workdir / artifact::importance;
    require(p, "features");
    const auto doc = read_json(p);
    const auto selected = doc.at("selected").get<std::vector<std::string>>();
    std::vector<std::size_t> idx;
    for (const auto& name : selected) {
        auto j = data.feature_index(name);
        if (!j) throw ValidationError("selected feature '" + name + "' is not in the dataset");
        idx.push_back(*j);
    }
    if (names) *names = selected;
    return idx;
}

std::unique_ptr<Predictor> load_model(const RunConfig& cfg, const std::string& name) {
    const auto p = model_path(cfg, name);
    require(p, "train-ids");
    return classifiers::model_from_json(read_json(p));
}

// Slice-only dataset holding `rows`, all features numeric plus a label column.
ingest::Dataset slice_dataset(const std::vector<std::string>& names, std::vector<ingest::FlowRecord> rows) {
    ingest::Dataset d;
    for (const auto& n : names) d.schema.push_back({n, ingest::ColumnKind::numeric});
    d.schema.push_back({"Label", ingest::ColumnKind::label});
    d.rows = std::move(rows);
    for (auto& r : d.rows) r.tags.clear();
    d.recount();
    return d;
}

std::string line(const char* fmt, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    return buf;
}

}  // namespace

// --- configuration -----------------------------------------------------------

void RunConfig::validate() const {
    if (workdir.empty()) throw ValidationError("workdir is empty");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ValidationError("split.test_fraction must be in (0, 1)");
    if (features.k == 0) throw ValidationError("features.k must be positive");
    if (features.shapley_rows == 0 || features.shapley_trees == 0) throw ValidationError("features: shapley_rows and shapley_trees must be positive");
    if (features.background_rows == 0 || features.eval_rows == 0 || features.n_permutations == 0)
        throw ValidationError("features: background_rows, eval_rows and n_permutations must be positive");
    if (ids.forest_trees == 0) throw ValidationError("ids.forest_trees must be positive");
    if (gan.components == 0 || gan.max_rows == 0) throw ValidationError("gan.components and gan.max_rows must be positive");
    gan.train.validate();
    const auto& names = model_names();
    if (std::find(names.begin(), names.end(), stream.model) == names.end())
        throw ValidationError("stream.model must be one of random_forest, decision_tree, logistic_regression, gaussian_nb");
    if (stream.source != "synthetic" && stream.source != "test") throw ValidationError("stream.source must be synthetic or test");
    if (stream.clock != "fixed" && stream.clock != "system") throw ValidationError("stream.clock must be fixed or system");
    if (stream.transport != "memory" && stream.transport != "socket") throw ValidationError("stream.transport must be memory or socket");
    if (stream.step_ms < 0) throw ValidationError("stream.step_ms must be >= 0");
    if (stream.bucket_ms <= 0) throw ValidationError("stream.bucket_ms must be positive");
    if (stream.consumer_batch == 0) throw ValidationError("stream.consumer_batch must be positive");
    if (stream.index.empty()) throw ValidationError("stream.index is empty");
}

json to_json(const RunConfig& c) {
    json gan = tabgan::to_json(c.gan.train);
    gan.erase("seed");
    gan["components"] = c.gan.components;
    gan["max_rows"] = c.gan.max_rows;
    return {
        {"input", c.input.string()},
        {"workdir", c.workdir.string()},
        {"seed", c.seed},
        {"threads", c.threads},
        {"split", {{"test_fraction", c.test_fraction}, {"stratified", c.stratified}}},
        {"features",
         {{"k", c.features.k},
          {"shapley_rows", c.features.shapley_rows},
          {"shapley_trees", c.features.shapley_trees},
          {"background_rows", c.features.background_rows},
          {"eval_rows", c.features.eval_rows},
          {"n_permutations", c.features.n_permutations},
          {"prefer_exact", c.features.prefer_exact}}},
        {"ids",
         {{"forest_trees", c.ids.forest_trees},
          {"forest_max_depth", c.ids.forest_max_depth},
          {"tree_max_depth", c.ids.tree_max_depth},
          {"logistic_lr", c.ids.logistic_lr},
          {"logistic_epochs", c.ids.logistic_epochs},
          {"logistic_l2", c.ids.logistic_l2}}},
        {"gan", gan},
        {"synth", {{"n", c.synth_n}}},
        {"stream",
         {{"model", c.stream.model},
          {"source", c.stream.source},
          {"rows", c.stream.rows},
          {"clock", c.stream.clock},
          {"start_ms", c.stream.start_ms},
          {"step_ms", c.stream.step_ms},
          {"transport", c.stream.transport},
          {"port", c.stream.port},
          {"consumer_batch", c.stream.consumer_batch},
          {"index", c.stream.index},
          {"bucket_ms", c.stream.bucket_ms},
          {"top_n", c.stream.top_n},
          {"plots", c.stream.plots}}},
    };
}

RunConfig config_from_json(const json& doc) {
    check_known(to_json(RunConfig{}), doc, "");
    RunConfig c;
    try {
        c.input = doc.value("input", c.input.string());
        c.workdir = doc.value("workdir", c.workdir.string());
        c.seed = doc.value("seed", c.seed);
        c.threads = doc.value("threads", c.threads);
        const json empty = json::object();
        const auto& s = doc.contains("split") ? doc["split"] : empty;
        c.test_fraction = s.value("test_fraction", c.test_fraction);
        c.stratified = s.value("stratified", c.stratified);
        const auto& f = doc.contains("features") ? doc["features"] : empty;
        c.features.k = f.value("k", c.features.k);
        c.features.shapley_rows = f.value("shapley_rows", c.features.shapley_rows);
        c.features.shapley_trees = f.value("shapley_trees", c.features.shapley_trees);
        c.features.background_rows = f.value("background_rows", c.features.background_rows);
        c.features.eval_rows = f.value("eval_rows", c.features.eval_rows);
        c.features.n_permutations = f.value("n_permutations", c.features.n_permutations);
        c.features.prefer_exact = f.value("prefer_exact", c.features.prefer_exact);
        const auto& i = doc.contains("ids") ? doc["ids"] : empty;
        c.ids.forest_trees = i.value("forest_trees", c.ids.forest_trees);
        c.ids.forest_max_depth = i.value("forest_max_depth", c.ids.forest_max_depth);
        c.ids.tree_max_depth = i.value("tree_max_depth", c.ids.tree_max_depth);
        c.ids.logistic_lr = i.value("logistic_lr", c.ids.logistic_lr);
        c.ids.logistic_epochs = i.value("logistic_epochs", c.ids.logistic_epochs);
        c.ids.logistic_l2 = i.value("logistic_l2", c.ids.logistic_l2);
        json g = doc.contains("gan") ? doc["gan"] : empty;
        c.gan.components = g.value("components", c.gan.components);
        c.gan.max_rows = g.value("max_rows", c.gan.max_rows);
        g.erase("components");
        g.erase("max_rows");
        c.gan.train = tabgan::train_config_from_json(g);
        const auto& y = doc.contains("synth") ? doc["synth"] : empty;
        c.synth_n = y.value("n", c.synth_n);
        const auto& t = doc.contains("stream") ? doc["stream"] : empty;
        c.stream.model = t.value("model", c.stream.model);
        c.stream.source = t.value("source", c.stream.source);
        c.stream.rows = t.value("rows", c.stream.rows);
        c.stream.clock = t.value("clock", c.stream.clock);
        c.stream.start_ms = t.value("start_ms", c.stream.start_ms);
        c.stream.step_ms = t.value("step_ms", c.stream.step_ms);
        c.stream.transport = t.value("transport", c.stream.transport);
        c.stream.port = t.value("port", c.stream.port);
        c.stream.consumer_batch = t.value("consumer_batch", c.stream.consumer_batch);
        c.stream.index = t.value("index", c.stream.index);
        c.stream.bucket_ms = t.value("bucket_ms", c.stream.bucket_ms);
        c.stream.top_n = t.value("top_n", c.stream.top_n);
        c.stream.plots = t.value("plots", c.stream.plots);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad config value: ") + e.what());
    }
    c.gan.train.seed = derive_seed(c.seed, seed_offset::gan);
    c.validate();
    return c;
}

void apply_override(json& doc, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) throw ValidationError("override must look like key=value: " + std::string(assignment));
    const std::string key(assignment.substr(0, eq));
    const std::string text(assignment.substr(eq + 1));
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    json* node = &doc;
    std::size_t start = 0;
    for (;;) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ValidationError("bad override key: " + key);
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        if (!node->contains(part)) (*node)[part] = json::object();
        node = &(*node)[part];
        if (!node->is_object()) throw ValidationError("override key " + key + " does not name a section");
        start = dot + 1;
    }
}

RunConfig load_config(const std::optional<fs::path>& file, const std::vector<std::string>& overrides) {
    json doc = json::object();
    if (file) {
        if (!fs::exists(*file)) throw ValidationError("config file not found: " + file->string());
        doc = read_json(*file);
        if (!doc.is_object()) throw ValidationError(file->string() + ": config must be a JSON object");
    }
    for (const auto& o : overrides) apply_override(doc, o);
    return config_from_json(doc);
}

std::string display_name(const std::string& model) {
    if (model == "random_forest") return "Random Forest";
    if (model == "decision_tree") return "Decision Tree";
    if (model == "logistic_regression") return "Logistic Regression";
    if (model == "gaussian_nb") return "Gaussian NB";
    return model;
}

// --- commands ----------------------------------------------------------------

std::string cmd_prepare(const RunConfig& cfg) {
    if (cfg.input.empty()) throw ValidationError("no input CSV configured (set input=<path>)");
    auto raw = ingest::load_csv(cfg.input);
    auto data = ingest::clean(raw, ingest::LabelMap::cicids_wednesday());
    raw = ingest::RawTable{};
    ingest::SplitConfig split{cfg.test_fraction, cfg.stratified, derive_seed(cfg.seed, seed_offset::split)};
    auto [train, test] = ingest::split(data, split);

    fs::create_directories(cfg.workdir);
    ingest::save_dataset(cfg.workdir / artifact::train, train);
    ingest::save_dataset(cfg.workdir / artifact::test, test);
    json doc{{"input", cfg.input.string()},
             {"rows", data.rows.size()},
             {"dropped", data.dropped},
             {"class_counts", data.class_counts},
             {"raw_class_counts", data.raw_class_counts},
             {"features", data.n_features()},
             {"train", {{"rows", train.rows.size()}, {"class_counts", train.class_counts}}},
             {"test", {{"rows", test.rows.size()}, {"class_counts", test.class_counts}}}};
    write_json(cfg.workdir / artifact::prepare, doc);

    std::string out = ingest::format_class_report(data);
    out += line("dropped rows (non-finite or missing values): %zu\n", data.dropped);
    out += line("train: %zu rows (benign %zu, malicious %zu)\n", train.rows.size(), train.class_counts[0], train.class_counts[1]);
    out += line("test:  %zu rows (benign %zu, malicious %zu)\n", test.rows.size(), test.class_counts[0], test.class_counts[1]);
    return out;
}

std::string cmd_features(const RunConfig& cfg) {
    require(cfg.workdir / artifact::train, "prepare");
    const auto train = ingest::load_dataset(cfg.workdir / artifact::train);
    const std::size_t d = train.n_features();
    if (cfg.features.k > d)
        throw ValidationError("features.k = " + std::to_string(cfg.features.k) + " exceeds the " + std::to_string(d) + " features");
    if (train.class_counts[0] == 0 || train.class_counts[1] == 0) throw ValidationError("training split holds a single class");

    const auto seed = derive_seed(cfg.seed, seed_offset::shapley);
    std::vector<std::size_t> idx(train.rows.size());
    std::iota(idx.begin(), idx.end(), 0);
    if (idx.size() > cfg.features.shapley_rows) {
        std::mt19937_64 rng(seed);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(cfg.features.shapley_rows);
        std::sort(idx.begin(), idx.end());
    }
    const auto sub = train.subset(idx);
    classifiers::ForestParams fp;
    fp.n_trees = cfg.features.shapley_trees;
    fp.threads = cfg.threads;
    const auto forest = classifiers::train_forest(sub, fp, derive_seed(cfg.seed, seed_offset::forest));

    std::vector<std::vector<double>> pool;
    pool.reserve(sub.rows.size());
    for (const auto& r : sub.rows) pool.push_back(r.features);
    shapley::ExplainConfig ec;
    ec.background_rows = cfg.features.background_rows;
    ec.eval_rows = cfg.features.eval_rows;
    ec.n_permutations = cfg.features.n_permutations;
    ec.prefer_exact = cfg.features.prefer_exact;
    ec.seed = seed;
    ec.threads = cfg.threads;
    const auto phis = shapley::explain(shapley::malicious_score(forest), pool, pool, ec);
    const auto report = shapley::global_importance(phis, train.feature_names());
    const auto top = shapley::top_k(report, cfg.features.k);

    json doc = shapley::to_json(report);
    std::vector<std::string> selected;
    for (auto j : top) selected.push_back(report.feature_names[j]);
    doc["selected"] = selected;
    doc["k"] = cfg.features.k;
    doc["method"] = (cfg.features.prefer_exact && d <= shapley::kMaxExactFeatures) ? "exact" : "monte_carlo";
    write_json(cfg.workdir / artifact::importance, doc);

    std::string out = "Mean |Shapley value| for the malicious class (" + std::to_string(report.n) + " rows, " +
                      doc["method"].get<std::string>() + ")\n";
    out += shapley::render_bars(report, 20);
    out += "\nselected top-" + std::to_string(cfg.features.k) + ":\n";
    for (std::size_t r = 0; r < selected.size(); ++r) out += line("  %2zu. %s\n", r + 1, selected[r].c_str());
    return out;
}

std::string cmd_train_ids(const RunConfig& cfg) {
    require(cfg.workdir / artifact::train, "prepare");
    require(cfg.workdir / artifact::test, "prepare");
    const auto full_train = ingest::load_dataset(cfg.workdir / artifact::train);
    const auto idx = selected_indices(cfg, full_train);
    if (idx.empty()) throw ValidationError("the selected feature slice is empty");
    const auto train = full_train.select_features(idx);
    const auto test = ingest::load_dataset(cfg.workdir / artifact::test).select_features(idx);
    if (train.rows.empty() || test.rows.empty()) throw ValidationError("empty train or test split");
    if (train.class_counts[0] == 0 || train.class_counts[1] == 0) throw ValidationError("training split holds a single class");

    classifiers::ForestParams fp;
    fp.n_trees = cfg.ids.forest_trees;
    fp.tree.max_depth = cfg.ids.forest_max_depth;
    fp.threads = cfg.threads;
    classifiers::TreeParams tp;
    tp.max_depth = cfg.ids.tree_max_depth;
    classifiers::LogisticParams lp{cfg.ids.logistic_lr, cfg.ids.logistic_epochs, cfg.ids.logistic_l2};
    const auto fseed = derive_seed(cfg.seed, seed_offset::forest);

    std::vector<json> docs;
    std::vector<std::unique_ptr<Predictor>> models;
    {
        auto m = classifiers::train_forest(train, fp, fseed);
        docs.push_back(classifiers::to_json(m));
        models.push_back(std::make_unique<classifiers::ForestModel>(std::move(m)));
    }
    {
        auto m = classifiers::train_tree(train, tp, fseed + 500);
        docs.push_back(classifiers::to_json(m));
        models.push_back(std::make_unique<classifiers::DecisionTreeModel>(std::move(m)));
    }
    {
        auto m = classifiers::train_logistic(train, lp);
        docs.push_back(classifiers::to_json(m));
        models.push_back(std::make_unique<classifiers::LogisticModel>(std::move(m)));
    }
    {
        auto m = classifiers::train_gnb(train);
        docs.push_back(classifiers::to_json(m));
        models.push_back(std::make_unique<classifiers::GaussianNBModel>(std::move(m)));
    }

    std::vector<classifiers::Evaluation> evals;
    std::string out;
    json metrics = json::object();
    for (std::size_t i = 0; i < models.size(); ++i) {
        evals.push_back(classifiers::evaluate(*models[i], test));
        const auto& name = model_names()[i];
        out += "== " + display_name(name) + " ==\n" + classifiers::format_report(evals.back()) + "\n";
        const auto& c = evals.back().confusion;
        metrics[name] = {{"accuracy", evals.back().metrics.accuracy},
                         {"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
    }
    out += "Model comparison (fewest false negatives, then accuracy)\n";
    out += line("%-4s %-22s %-20s %s\n", "rank", "model", "accuracy", "false_negatives");
    const auto order = classifiers::rank_models(evals);
    std::size_t rank = 1;
    for (auto i : order)
        out += line("%-4zu %-22s %-20.16g %zu\n", rank++, display_name(model_names()[i]).c_str(), evals[i].metrics.accuracy,
                    evals[i].confusion.fn);

    fs::create_directories(cfg.workdir / "models");
    for (std::size_t i = 0; i < docs.size(); ++i) write_json(model_path(cfg, model_names()[i]), docs[i]);
    write_json(cfg.workdir / artifact::ids_metrics, metrics);
    write_file_atomic(cfg.workdir / artifact::ids_report, out);
    return out;
}

std::string cmd_train_gan(const RunConfig& cfg) {
    require(cfg.workdir / artifact::train, "prepare");
    const auto full_train = ingest::load_dataset(cfg.workdir / artifact::train);
    std::vector<std::string> names;
    const auto idx = selected_indices(cfg, full_train, &names);
    auto malicious = full_train.select_features(idx).with_label(1);
    if (malicious.rows.size() < cfg.gan.train.batch)
        throw ValidationError("only " + std::to_string(malicious.rows.size()) + " malicious training rows for batch size " +
                              std::to_string(cfg.gan.train.batch));
    std::vector<std::size_t> rows(malicious.rows.size());
    std::iota(rows.begin(), rows.end(), 0);
    if (rows.size() > cfg.gan.max_rows) {
        std::mt19937_64 rng(derive_seed(cfg.seed, seed_offset::gan));
        std::shuffle(rows.begin(), rows.end(), rng);
        rows.resize(cfg.gan.max_rows);
        std::sort(rows.begin(), rows.end());
    }
    const auto reference = malicious.subset(rows);

    tabgan::GanModel model;
    model.config = cfg.gan.train;
    for (std::size_t j = 0; j < names.size(); ++j) {
        std::vector<double> col;
        col.reserve(reference.rows.size());
        for (const auto& r : reference.rows) col.push_back(r.features[j]);
        gmm::FitConfig fc;
        fc.m = cfg.gan.components;
        fc.seed = derive_seed(cfg.seed, seed_offset::gmm) + j;
        model.gmms.push_back(gmm::fit_em(col, fc, names[j]).model);
    }
    model.schema = tabgan::numeric_schema(model.gmms);
    std::vector<tabgan::TableRow> table;
    for (const auto& r : reference.rows) table.push_back(r.features);
    auto result = tabgan::train(table, model.schema, model.gmms, cfg.gan.train);
    model.generator = std::move(result.generator);
    model.discriminator = std::move(result.discriminator);

    write_json(cfg.workdir / artifact::gan, tabgan::to_json(model));
    write_file_atomic(cfg.workdir / artifact::gan_history, tabgan::history_csv(result.history));
    ingest::save_dataset(cfg.workdir / artifact::gan_reference, slice_dataset(names, reference.rows));

    std::string out = line("trained %s GAN on %zu malicious rows, %zu columns\n", std::string(tabgan::to_string(cfg.gan.train.loss)).c_str(),
                           reference.rows.size(), names.size());
    out += line("generator updates: %zu, critic updates: %zu\n", result.history.size(), result.critic_updates);
    if (!result.history.empty()) {
        const auto& last = result.history.back();
        out += line("final losses: d = %.6g, g = %.6g\n", last.d_loss, last.g_loss);
    }
    return out;
}

std::string cmd_synth(const RunConfig& cfg) {
    require(cfg.workdir / artifact::gan, "train-gan");
    const auto model = tabgan::gan_from_json(read_json(cfg.workdir / artifact::gan));
    std::vector<std::string> names;
    for (const auto& c : model.schema.columns()) names.push_back(c.name);
    auto batch = tabgan::sample_rows(cfg.synth_n, model.generator, model.gmms, model.schema,
                                     derive_seed(cfg.seed, seed_offset::synth));
    const auto data = slice_dataset(names, std::move(batch.rows));
    ingest::save_dataset(cfg.workdir / artifact::synthetic, data);
    return line("synthesized %zu malicious rows over %zu columns\n", data.rows.size(), names.size());
}

std::string cmd_evade(const RunConfig& cfg) {
    require(cfg.workdir / artifact::synthetic, "synth");
    require(cfg.workdir / artifact::gan_reference, "train-gan");
    const auto synthetic = ingest::load_dataset(cfg.workdir / artifact::synthetic);
    const auto reference = ingest::load_dataset(cfg.workdir / artifact::gan_reference);
    if (synthetic.rows.empty()) throw ValidationError("the synthetic batch is empty (run `synth` with n > 0)");
    std::vector<std::unique_ptr<Predictor>> owned;
    std::vector<evasion::NamedModel> models;
    for (const auto& name : model_names()) {
        owned.push_back(load_model(cfg, name));
        models.push_back({display_name(name), owned.back().get()});
    }
    const auto report = evasion::cross_model_report(models, synthetic.rows, reference.rows, synthetic.feature_names());
    const auto text = evasion::render(report);
    write_json(cfg.workdir / artifact::evasion_json, evasion::to_json(report));
    write_file_atomic(cfg.workdir / artifact::evasion_txt, text);
    return text;
}

std::string cmd_stream(const RunConfig& cfg) {
    const auto model = load_model(cfg, cfg.stream.model);
    ingest::Dataset source;
    std::vector<std::string> slice_names;
    if (cfg.stream.source == "synthetic") {
        require(cfg.workdir / artifact::synthetic, "synth");
        source = ingest::load_dataset(cfg.workdir / artifact::synthetic);
        slice_names = source.feature_names();
    } else {
        require(cfg.workdir / artifact::test, "prepare");
        source = ingest::load_dataset(cfg.workdir / artifact::test);
        selected_indices(cfg, source, &slice_names);
    }
    if (cfg.stream.rows > 0 && source.rows.size() > cfg.stream.rows) source.rows.resize(cfg.stream.rows);
    if (slice_names.size() != model->n_features()) throw ValidationError("stream source does not match the model's feature slice");
    std::vector<std::size_t> slice;
    for (const auto& n : slice_names) slice.push_back(*source.feature_index(n));

    std::shared_ptr<stream::Clock> clock;
    if (cfg.stream.clock == "fixed")
        clock = std::make_shared<stream::ManualClock>(cfg.stream.start_ms, cfg.stream.step_ms);
    else
        clock = std::make_shared<stream::SystemClock>();
    stream::Broker broker(clock);
    stream::create_default_topology(broker);

    const auto feature_names = source.feature_names();
    const auto tag_names = source.tag_names();
    if (cfg.stream.transport == "socket") {
        stream::BrokerServer server(broker, cfg.stream.port);
        stream::BrokerClient client("127.0.0.1", server.port());
        for (const auto& r : source.rows) client.produce(stream::kRawTopic, stream::flow_payload(feature_names, r, tag_names));
        server.stop();
    } else {
        stream::produce_rows(broker, stream::kRawTopic, feature_names, source.rows, tag_names);
    }

    stream::ConsumerState state{stream::kRawTopic, 0};
    const auto stats = stream::scoring_consumer(broker, *model, slice_names, state, stream::kPredictionsTopic,
                                                cfg.stream.consumer_batch);

    // Offline parity: the same rows scored in one batch.
    std::vector<std::uint64_t> offline;
    std::vector<double> x(slice.size());
    for (std::size_t i = 0; i < source.rows.size(); ++i) {
        for (std::size_t j = 0; j < slice.size(); ++j) x[j] = source.rows[i].features[slice[j]];
        if (model->predict(x) == 1) offline.push_back(i);
    }
    if (stats.processed != stats.forwarded + stats.benign + stats.malformed)
        throw RuntimeError("conservation violated: processed != forwarded + benign + malformed");
    if (stats.forwarded_offsets != offline)
        throw RuntimeError("streaming/offline parity failed: " + std::to_string(stats.forwarded) + " forwarded vs " +
                           std::to_string(offline.size()) + " offline predicted-malicious rows");

    stream::ConsumerState drain{stream::kPredictionsTopic, 0};
    const auto messages = broker.consume(drain, broker.next_offset(stream::kPredictionsTopic));
    const auto written = sink::write_bulk(messages, cfg.stream.index, bulk_path(cfg));
    std::string lines;
    for (const auto& m : messages) lines += stream::envelope_json(m).dump() + "\n";
    write_file_atomic(cfg.workdir / artifact::predictions, lines);
    json doc{{"model", cfg.stream.model},
             {"source", cfg.stream.source},
             {"processed", stats.processed},
             {"forwarded", stats.forwarded},
             {"benign", stats.benign},
             {"malformed", stats.malformed},
             {"bulk_written", written},
             {"index", cfg.stream.index},
             {"parity", true}};
    write_json(cfg.workdir / artifact::stream_json, doc);

    std::string out = line("model: %s, source: %s rows, transport: %s\n", display_name(cfg.stream.model).c_str(),
                           cfg.stream.source.c_str(), cfg.stream.transport.c_str());
    out += line("produced to %s: %zu\n", stream::kRawTopic, source.rows.size());
    out += line("processed: %zu, forwarded: %zu, benign: %zu, malformed: %zu\n", stats.processed, stats.forwarded,
                stats.benign, stats.malformed);
    out += line("streaming/offline parity: ok (%zu rows)\n", offline.size());
    out += line("bulk written: %zu (%s)\n", written, bulk_path(cfg).filename().string().c_str());
    return out;
}

std::string cmd_report(const RunConfig& cfg) {
    const auto preds = cfg.workdir / artifact::predictions;
    require(preds, "stream");
    require(cfg.workdir / artifact::stream_json, "stream");
    std::vector<stream::Envelope> messages;
    std::istringstream in(read_file(preds));
    for (std::string l; std::getline(in, l);)
        if (!l.empty()) messages.push_back(stream::envelope_from_json(json::parse(l)));
    const auto summary = sink::summarize(messages, cfg.stream.bucket_ms, cfg.stream.top_n);
    const auto stats = read_json(cfg.workdir / artifact::stream_json);
    if (summary.total != stats.at("bulk_written").get<std::size_t>())
        throw RuntimeError("report total does not match the bulk written count");
    const auto text = sink::render_report(summary);
    write_file_atomic(cfg.workdir / artifact::report, text);
    write_json(cfg.workdir / artifact::dashboard, sink::to_json(summary));
    if (cfg.stream.plots) sink::write_plots(summary, cfg.workdir / "plots");
    return text;
}

}  // namespace ddosgan::pipeline
