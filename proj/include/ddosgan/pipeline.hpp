#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ddosgan/ingest.hpp"
#include "ddosgan/tabgan.hpp"
#include "json.hpp"

namespace ddosgan::pipeline {

struct FeatureConfig {
    std::size_t k = 10;
    std::size_t shapley_rows = 20000;  // training rows for the explained forest
    std::size_t shapley_trees = 50;
    std::size_t background_rows = 100;
    std::size_t eval_rows = 200;
    std::size_t n_permutations = 64;
    bool prefer_exact = true;
};

struct IdsConfig {
    std::size_t forest_trees = 100;
    std::size_t forest_max_depth = 0;
    std::size_t tree_max_depth = 0;
    double logistic_lr = 0.1;
    std::size_t logistic_epochs = 200;
    double logistic_l2 = 1e-4;
};

struct GanConfig {
    tabgan::TrainConfig train;
    std::size_t components = 5;
    std::size_t max_rows = 5000;
};

struct StreamConfig {
    std::string model = "random_forest";
    std::string source = "synthetic";  // or "test"
    std::size_t rows = 0;              // 0 = every source row
    std::string clock = "fixed";       // or "system"
    std::int64_t start_ms = 1499212800000;
    std::int64_t step_ms = 5;
    std::string transport = "memory";  // or "socket"
    std::uint16_t port = 0;            // socket transport; 0 = any free port
    std::size_t consumer_batch = 512;
    std::string index = "attack_index";
    std::int64_t bucket_ms = 10000;
    std::size_t top_n = 5;
    bool plots = true;
};

/// Every knob of a run. Module seeds are derived from `seed`.
struct RunConfig {
    std::filesystem::path input;
    std::filesystem::path workdir = "work";
    std::uint64_t seed = 42;  // split seed = seed; other modules add fixed offsets
    unsigned threads = 0;
    double test_fraction = 0.2;
    bool stratified = true;
    FeatureConfig features;
    IdsConfig ids;
    GanConfig gan;
    std::size_t synth_n = 10000;
    StreamConfig stream;

    void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
RunConfig config_from_json(const nlohmann::json& doc);

/// Applies "dotted.key=value" to a config document. The value is parsed as
/// JSON when possible, otherwise taken as a string.
void apply_override(nlohmann::json& doc, std::string_view assignment);

/// Defaults, then the config file (if any), then overrides in order.
RunConfig load_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides);

inline const std::vector<std::string>& model_names() {
    static const std::vector<std::string> names{"random_forest", "decision_tree", "logistic_regression", "gaussian_nb"};
    return names;
}
std::string display_name(const std::string& model);

// Each command reads upstream artifacts from the workdir, writes its own
// atomically and returns the summary it prints.
std::string cmd_prepare(const RunConfig& cfg);
std::string cmd_features(const RunConfig& cfg);
std::string cmd_train_ids(const RunConfig& cfg);
std::string cmd_train_gan(const RunConfig& cfg);
std::string cmd_synth(const RunConfig& cfg);
std::string cmd_evade(const RunConfig& cfg);
std::string cmd_stream(const RunConfig& cfg);
std::string cmd_report(const RunConfig& cfg);

}  // namespace ddosgan::pipeline
