#include "satd_atlas/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace satd;

namespace {

int run(int argc, char** argv) {
    CLI::App app{"Self-admitted technical debt analysis over git history and forge data", "satd-atlas"};
    app.set_version_flag("--version",
                         std::string("satd-atlas ") + pipeline::kToolVersion + " (schema " +
                             std::to_string(pipeline::kSchemaVersion) + ")");
    app.require_subcommand(1, 1);
    app.fallthrough();

    std::string config_path = "run.toml";
    std::vector<std::string> sets;
    std::map<std::string, std::string> flags;
    bool offline = false, online = false, quiet = false;
    app.add_option("-c,--config", config_path, "Configuration file (TOML or JSON)");
    app.add_option("--set", sets, "Override a configuration key, e.g. --set selection.min_stars=0");
    for (const auto& [flag, help] : std::vector<std::pair<std::string, std::string>>{
             {"work-dir", "Work directory"},
             {"cache-dir", "Forge cache directory"},
             {"patterns", "SATD pattern file"},
             {"languages", "Language table"},
             {"lexicon", "Sentiment lexicon"},
             {"priority-terms", "Priority term file"},
             {"satd-predictions", "External SATD predictions (JSONL)"},
             {"sentiment-predictions", "External sentiment predictions (JSONL)"},
             {"heuristic", "EmbeddingCentroid, Lexical, TfIdf or Hybrid"},
             {"vectors", "Precomputed embedding vectors (JSONL)"},
             {"token-file", "File holding the forge token"},
             {"api-base", "Forge API base URL"},
             {"max-chain-length", "Longest chain to enumerate (1-4)"},
             {"bins", "Number of length bins"},
             {"min-tokens", "Minimum tokens for length binning"},
             {"sonar-window", "Line window for Sonar matching"},
             {"top-k", "Top-k size for ablation"},
             {"concurrency", "Parallel forge requests"}})
        app.add_option("--" + flag, flags[flag], help);
    app.add_flag("--offline", offline, "Use only the forge cache");
    app.add_flag("--online", online, "Sync the forge cache even if the configuration says offline");
    app.add_flag("-q,--quiet", quiet, "No progress output");

    for (const auto& s : pipeline::stage_names()) app.add_subcommand(s, "Run the " + s + " stage");
    app.add_subcommand("all", "Run every stage in order");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    std::vector<std::pair<std::string, std::string>> overrides;
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) {
            std::cerr << "error: --set expects key=value, got '" << s << "'\n";
            return 2;
        }
        overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    for (const auto& [flag, value] : flags) {
        if (value.empty()) continue;
        std::string key = flag;
        std::replace(key.begin(), key.end(), '-', '_');
        if (key == "vectors") key = "provider.vectors";
        const bool numeric = key == "max_chain_length" || key == "bins" || key == "min_tokens" || key == "sonar_window" ||
                             key == "top_k" || key == "concurrency";
        overrides.emplace_back(key, numeric ? value : config::toml_quote(value));
    }
    if (offline) overrides.emplace_back("offline", "true");
    if (online) overrides.emplace_back("offline", "false");

    const std::string stage = app.get_subcommands().front()->get_name();
    auto log = [quiet](const std::string& m) {
        if (!quiet) std::cerr << m << '\n';
    };

    std::optional<pipeline::Pipeline> p;
    try {
        auto cfg = config::load_config(config_path, overrides);
        p.emplace(std::move(cfg), log, std::filesystem::absolute(config_path));
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        pipeline::WorkLock lock(p->work());
        try {
            p->run(stage);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::Config) throw;
            p->add_reject({stage, "", std::string(to_string(e.code())), e.what(), {}, {}});
            std::cerr << "error: " << e.what() << '\n';
        } catch (const std::exception& e) {
            p->add_reject({stage, "", "Internal", e.what(), {}, {}});
            std::cerr << "error: " << e.what() << '\n';
        }
        p->write_rejects();
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.code() == ErrorCode::Config ? 2 : 1;
    }
    if (!p->rejects().empty()) {
        std::cerr << p->rejects().size() << " rejected item(s); see " << (p->work() / "rejects.jsonl").string() << '\n';
        return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) { return run(argc, argv); }
