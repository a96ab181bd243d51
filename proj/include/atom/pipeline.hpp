#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "atom/ast2seq.hpp"
#include "atom/metrics.hpp"
#include "atom/preprocess.hpp"
#include "atom/ranker.hpp"
#include "atom/retrieval.hpp"

namespace atom {

struct PipelineConfig {
    std::string preset = "desk";  // or "full"
    std::string dataset;          // json-lines input
    std::string out_dir = "out";
    std::string split = "by_commit";  // by_commit | by_project | by_timestamp
    std::uint64_t seed = 1;

    ModelConfig model;
    TrainConfig gen_train;
    int path_cap = kDefaultPathCap;
    int max_path_nodes = kMaxPathNodes;

    RankerConfig ranker;
    RankTrainConfig rank_train;
};

// file layout inside out_dir
struct Artifacts {
    explicit Artifacts(const std::string& out_dir);

    std::string dir;
    std::string config;
    std::string filtered;       // filtered commits, json-lines
    std::string filter_report;
    std::string train, valid, test;
    std::string sub_vocab, node_vocab, tgt_vocab;
    std::string gen_ckpt, gen_manifest;
    std::string index;
    std::string rdiff_vocab, rmsg_vocab;
    std::string rank_ckpt, rank_manifest;
    std::string generated;      // per-commit candidates, json-lines
    std::string evaluation;     // metric report json
    std::string pathstats;      // sweep table json
};

PipelineConfig preset_config(const std::string& name);       // ConfigMismatch on unknown
PipelineConfig load_config(const std::string& path);         // json file, preset base
void apply_override(PipelineConfig& cfg, const std::string& assignment);  // "model.lr=0.01"
std::string config_to_json(const PipelineConfig& cfg);

SplitSpec split_spec(const PipelineConfig& cfg);

void write_records(const std::string& path, const std::vector<CommitRecord>& records);

// subcommand bodies; each writes its artifacts under cfg.out_dir and returns a
// one-line human summary. Prerequisite artifacts are checked up front.
std::string run_ingest(const PipelineConfig& cfg);
std::string run_split(const PipelineConfig& cfg);
std::string run_train_gen(const PipelineConfig& cfg);
std::string run_retrieve(const PipelineConfig& cfg);
std::string run_train_rank(const PipelineConfig& cfg);
std::string run_generate(const PipelineConfig& cfg);
std::string run_evaluate(const PipelineConfig& cfg);
std::string run_pathstats(const PipelineConfig& cfg, const std::vector<int>& caps);

}  // namespace atom
