#include "ddosgan/evasion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ddosgan/common.hpp"

namespace ddosgan::evasion {

PredictionCounts count_predictions(const Predictor& model, const std::vector<ingest::FlowRecord>& rows) {
    PredictionCounts c;
    for (const auto& r : rows) {
        if (r.features.size() != model.n_features())
            throw ValidationError("row has " + std::to_string(r.features.size()) + " features, model expects " +
                                  std::to_string(model.n_features()));
        if (model.predict(r.features) == 0)
            ++c.benign;
        else
            ++c.malicious;
    }
    c.n = rows.size();
    return c;
}

double evasion_rate(const Predictor& model, const std::vector<ingest::FlowRecord>& rows) {
    if (rows.empty()) throw ValidationError("evasion rate of an empty batch");
    const auto c = count_predictions(model, rows);
    return static_cast<double>(c.benign) / static_cast<double>(c.n);
}

double detection_rate(const Predictor& model, const std::vector<ingest::FlowRecord>& rows) {
    if (rows.empty()) throw ValidationError("detection rate of an empty batch");
    const auto c = count_predictions(model, rows);
    return static_cast<double>(c.malicious) / static_cast<double>(c.n);
}

double ks_statistic(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw ValidationError("KS statistic needs two non-empty samples");
    std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const double na = static_cast<double>(x.size()), nb = static_cast<double>(y.size());
    std::size_t i = 0, j = 0;
    double best = 0.0;
    while (i < x.size() && j < y.size()) {
        const double v = std::min(x[i], y[j]);
        while (i < x.size() && x[i] == v) ++i;
        while (j < y.size() && y[j] == v) ++j;
        best = std::max(best, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return best;
}

EvasionReport cross_model_report(const std::vector<NamedModel>& models,
                                 const std::vector<ingest::FlowRecord>& synthetic,
                                 const std::vector<ingest::FlowRecord>& real_malicious,
                                 const std::vector<std::string>& feature_names) {
    if (synthetic.empty()) throw ValidationError("synthetic batch is empty");
    const std::size_t d = feature_names.size();
    for (const auto& m : models) {
        if (!m.model) throw ValidationError("model '" + m.name + "' is null");
        if (m.model->n_features() != d)
            throw ValidationError("model '" + m.name + "' expects " + std::to_string(m.model->n_features()) +
                                  " features but the slice has " + std::to_string(d));
    }
    for (const auto* rows : {&synthetic, &real_malicious})
        for (const auto& r : *rows)
            if (r.features.size() != d) throw ValidationError("row width does not match the feature slice");

    EvasionReport report;
    report.n_synthetic = synthetic.size();
    report.models.resize(models.size());
    parallel_for(models.size(), 0, [&](std::size_t i) {
        auto c = count_predictions(*models[i].model, synthetic);
        report.models[i] = {models[i].name, c, static_cast<double>(c.benign) / static_cast<double>(c.n)};
    });
    if (!real_malicious.empty()) {
        std::vector<double> a(synthetic.size()), b(real_malicious.size());
        for (std::size_t j = 0; j < d; ++j) {
            for (std::size_t r = 0; r < synthetic.size(); ++r) a[r] = synthetic[r].features[j];
            for (std::size_t r = 0; r < real_malicious.size(); ++r) b[r] = real_malicious[r].features[j];
            report.columns.push_back({feature_names[j], ks_statistic(a, b)});
        }
    }
    return report;
}

nlohmann::json to_json(const EvasionReport& report) {
    nlohmann::json doc{{"format", "ddosgan.evasion"}, {"version", 1}, {"n_synthetic", report.n_synthetic}};
    auto& models = doc["models"] = nlohmann::json::array();
    for (const auto& m : report.models)
        models.push_back({{"name", m.name},
                          {"evasion_rate", m.evasion_rate},
                          {"predicted_benign", m.counts.benign},
                          {"predicted_malicious", m.counts.malicious}});
    auto& cols = doc["ks"] = nlohmann::json::array();
    for (const auto& c : report.columns) cols.push_back({{"name", c.name}, {"ks", c.ks}});
    return doc;
}

EvasionReport report_from_json(const nlohmann::json& doc) {
    if (doc.value("format", "") != "ddosgan.evasion" || doc.value("version", 0) != 1)
        throw ValidationError("not an evasion report document");
    EvasionReport r;
    r.n_synthetic = doc.at("n_synthetic").get<std::size_t>();
    for (const auto& m : doc.at("models")) {
        ModelEvasion e;
        e.name = m.at("name").get<std::string>();
        e.evasion_rate = m.at("evasion_rate").get<double>();
        e.counts.benign = m.at("predicted_benign").get<std::size_t>();
        e.counts.malicious = m.at("predicted_malicious").get<std::size_t>();
        e.counts.n = e.counts.benign + e.counts.malicious;
        r.models.push_back(std::move(e));
    }
    for (const auto& c : doc.at("ks")) r.columns.push_back({c.at("name").get<std::string>(), c.at("ks").get<double>()});
    return r;
}

std::string render(const EvasionReport& report) {
    std::string out = "synthetic rows: " + std::to_string(report.n_synthetic) + "\n\n";
    char line[256];
    std::snprintf(line, sizeof line, "%-24s %12s %10s %10s\n", "model", "evasion_rate", "benign", "malicious");
    out += line;
    for (const auto& m : report.models) {
        std::snprintf(line, sizeof line, "%-24s %12.6f %10zu %10zu\n", m.name.c_str(), m.evasion_rate, m.counts.benign,
                      m.counts.malicious);
        out += line;
    }
    if (!report.columns.empty()) {
        out += "\nKS vs real malicious\n";
        for (const auto& c : report.columns) {
            std::snprintf(line, sizeof line, "%-40s %.4f\n", c.name.c_str(), c.ks);
            out += line;
        }
    }
    return out;
}

}  // namespace ddosgan::evasion
