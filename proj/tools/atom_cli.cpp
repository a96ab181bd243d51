#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "atom/errors.hpp"
#include "atom/pipeline.hpp"

namespace {

struct CommonOpts {
    std::string config_file;
    std::string preset = "desk";
    std::string dataset;
    std::string out_dir;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_file, "pipeline config (json)");
    cmd->add_option("--preset", opts.preset, "desk or full (ignored with --config)");
    cmd->add_option("--dataset", opts.dataset, "json-lines dataset path");
    cmd->add_option("--out", opts.out_dir, "artifact directory");
    cmd->add_option("--set", opts.overrides, "override, e.g. model.lr=0.01")
        ->take_all();
}

atom::PipelineConfig resolve(const CommonOpts& opts) {
    atom::PipelineConfig cfg = opts.config_file.empty()
                                   ? atom::preset_config(opts.preset)
                                   : atom::load_config(opts.config_file);
    if (!opts.dataset.empty()) cfg.dataset = opts.dataset;
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    for (const auto& kv : opts.overrides) atom::apply_override(cfg, kv);
    cfg.gen_train.seed = cfg.seed;
    cfg.rank_train.seed = cfg.seed;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"atom: diff-to-commit-message pipeline"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::vector<int> caps = {30, 80};

    auto* ingest = app.add_subcommand("ingest", "read, validate and filter the dataset");
    auto* split = app.add_subcommand("split", "partition filtered commits 80/10/10");
    auto* train_gen = app.add_subcommand("train-gen", "train the path-based generator");
    auto* retrieve = app.add_subcommand("retrieve", "build the tf-idf diff index");
    auto* train_rank = app.add_subcommand("train-rank", "train the candidate ranker");
    auto* generate = app.add_subcommand("generate", "emit candidates for the test split");
    auto* evaluate = app.add_subcommand("evaluate", "score generated messages");
    auto* pathstats = app.add_subcommand("pathstats", "sweep the path-count cap");
    pathstats->add_option("--caps", caps, "path caps to sweep")->take_all();
    for (auto* cmd : {ingest, split, train_gen, retrieve, train_rank, generate,
                      evaluate, pathstats})
        add_common(cmd, opts);

    CLI11_PARSE(app, argc, argv);

    try {
        atom::PipelineConfig cfg = resolve(opts);
        std::string summary;
        if (ingest->parsed()) summary = atom::run_ingest(cfg);
        else if (split->parsed()) summary = atom::run_split(cfg);
        else if (train_gen->parsed()) summary = atom::run_train_gen(cfg);
        else if (retrieve->parsed()) summary = atom::run_retrieve(cfg);
        else if (train_rank->parsed()) summary = atom::run_train_rank(cfg);
        else if (generate->parsed()) summary = atom::run_generate(cfg);
        else if (evaluate->parsed()) summary = atom::run_evaluate(cfg);
        else if (pathstats->parsed()) summary = atom::run_pathstats(cfg, caps);
        std::printf("%s\n", summary.c_str());
        return 0;
    } catch (const atom::MissingArtifact& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    } catch (const atom::ConfigMismatch& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const atom::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
