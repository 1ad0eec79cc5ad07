#pragma once

#include <span>
#include <string>
#include <vector>

#include "ddosgan/ingest.hpp"
#include "ddosgan/predictor.hpp"
#include "json.hpp"

namespace ddosgan::evasion {

struct PredictionCounts {
    std::size_t n = 0;
    std::size_t benign = 0;     // predicted 0: evaded
    std::size_t malicious = 0;  // predicted 1: detected
};

PredictionCounts count_predictions(const Predictor& model, const std::vector<ingest::FlowRecord>& rows);

/// Fraction of rows the model calls benign. Throws on an empty batch.
double evasion_rate(const Predictor& model, const std::vector<ingest::FlowRecord>& rows);
double detection_rate(const Predictor& model, const std::vector<ingest::FlowRecord>& rows);

/// Two-sample Kolmogorov-Smirnov statistic, sup |F_a - F_b|.
double ks_statistic(std::span<const double> a, std::span<const double> b);

struct NamedModel {
    std::string name;
    const Predictor* model;
};

struct ModelEvasion {
    std::string name;
    PredictionCounts counts;
    double evasion_rate = 0.0;
};

struct ColumnKs {
    std::string name;
    double ks = 0.0;
};

struct EvasionReport {
    std::size_t n_synthetic = 0;
    std::vector<ModelEvasion> models;
    std::vector<ColumnKs> columns;  // synthetic vs real malicious
};

/// Scores one synthetic batch against every model and compares each feature
/// column with the real malicious reference. All rows must have
/// feature_names.size() features, matching every model.
EvasionReport cross_model_report(const std::vector<NamedModel>& models,
                                 const std::vector<ingest::FlowRecord>& synthetic,
                                 const std::vector<ingest::FlowRecord>& real_malicious,
                                 const std::vector<std::string>& feature_names);

nlohmann::json to_json(const EvasionReport& report);
EvasionReport report_from_json(const nlohmann::json& doc);
std::string render(const EvasionReport& report);

}  // namespace ddosgan::evasion
