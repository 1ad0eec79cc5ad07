#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ddosgan/common.hpp"
#include "ddosgan/pipeline.hpp"

namespace {

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string workdir;
    std::string input;
    std::optional<std::size_t> n;
    std::vector<std::string> overrides;
};

using Command = std::function<std::string(const ddosgan::pipeline::RunConfig&)>;

ddosgan::pipeline::RunConfig resolve(const CommonOptions& o) {
    auto overrides = o.overrides;
    if (o.seed) overrides.push_back("seed=" + std::to_string(*o.seed));
    if (!o.workdir.empty()) overrides.push_back("workdir=\"" + o.workdir + "\"");
    if (!o.input.empty()) overrides.push_back("input=\"" + o.input + "\"");
    if (o.n) overrides.push_back("synth.n=" + std::to_string(*o.n));
    std::optional<std::filesystem::path> file;
    if (!o.config.empty()) file = o.config;
    return ddosgan::pipeline::load_config(file, overrides);
}

}  // namespace

int main(int argc, char** argv) {
    using namespace ddosgan::pipeline;
    CLI::App app{"Adversarial DoS flow synthesis and IDS evasion toolkit"};
    app.require_subcommand(1);
    CommonOptions opts;
    bool dump_config = false;

    const std::vector<std::tuple<std::string, std::string, Command>> commands{
        {"prepare", "clean and split the input CSV", cmd_prepare},
        {"features", "rank features by Shapley importance and select the top k", cmd_features},
        {"train-ids", "train and evaluate the four IDS models on the selected slice", cmd_train_ids},
        {"train-gan", "train the tabular GAN on malicious training rows", cmd_train_gan},
        {"synth", "sample synthetic malicious rows from the trained GAN", cmd_synth},
        {"evade", "measure evasion of the synthetic rows against every IDS", cmd_evade},
        {"stream", "replay rows through the broker, score them and write the bulk file", cmd_stream},
        {"report", "summarize the indexed predictions as a dashboard report", cmd_report},
    };
    std::vector<std::pair<CLI::App*, Command>> subs;
    for (const auto& [name, help, fn] : commands) subs.emplace_back(app.add_subcommand(name, help), fn);
    auto* all = app.add_subcommand("all", "run every command in order");

    for (auto* sub : app.get_subcommands({})) {
        sub->add_option("--config", opts.config, "JSON config file")->check(CLI::ExistingFile);
        sub->add_option("--seed", opts.seed, "global seed");
        sub->add_option("--workdir", opts.workdir, "artifact directory");
        sub->add_option("--set", opts.overrides, "config override, key=value (repeatable)");
        sub->add_flag("--print-config", dump_config, "print the resolved config and exit");
        if (sub->get_name() == "prepare" || sub->get_name() == "all")
            sub->add_option("--input", opts.input, "input CSV");
        if (sub->get_name() == "synth" || sub->get_name() == "all")
            sub->add_option("--n", opts.n, "number of rows to synthesize");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        const auto cfg = resolve(opts);
        if (dump_config) {
            std::cout << to_json(cfg).dump(2) << "\n";
            return 0;
        }
        if (all->parsed()) {
            for (const auto& [name, help, fn] : commands) {
                std::cout << "### " << name << "\n" << fn(cfg) << std::flush;
            }
            return 0;
        }
        for (const auto& [sub, fn] : subs)
            if (sub->parsed()) std::cout << fn(cfg) << std::flush;
        return 0;
    } catch (const ddosgan::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
