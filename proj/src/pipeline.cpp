#include "atom/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "atom/diffparse.hpp"
#include "atom/errors.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace atom {

namespace {

void require_file(const std::string& path, const std::string& name) {
    if (!fs::exists(path)) throw MissingArtifact(name + " (" + path + ")");
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << text;
}

json slurp_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigMismatch("bad json in " + path + ": " + e.what());
    }
}

// architecture only: what a checkpoint must agree on to be loadable
json model_arch_json(const PipelineConfig& c) {
    return json{{"embed", c.model.embed},
                {"hidden", c.model.hidden},
                {"dropout", c.model.dropout},
                {"max_len", c.model.max_len},
                {"beam", c.model.beam_width},
                {"path_cap", c.path_cap},
                {"max_path_nodes", c.max_path_nodes}};
}

json model_json(const PipelineConfig& c) {
    json j = model_arch_json(c);
    j.update(json{{"lr", c.gen_train.lr},
                  {"batch", c.gen_train.batch},
                  {"epochs", c.gen_train.max_epochs},
                  {"patience", c.gen_train.patience}});
    return j;
}

json ranker_arch_json(const PipelineConfig& c) {
    return json{{"embed", c.ranker.embed},
                {"diff_cap", c.ranker.diff_cap},
                {"msg_cap", c.ranker.msg_cap},
                {"kernels", c.ranker.kernels}};
}

json ranker_json(const PipelineConfig& c) {
    json j = ranker_arch_json(c);
    j.update(json{{"lr", c.rank_train.lr},
                  {"batch", c.rank_train.batch},
                  {"epochs", c.rank_train.max_epochs},
                  {"patience", c.rank_train.patience}});
    return j;
}

std::vector<std::string> diff_tokens_of(const CommitRecord& rec) {
    return diff_token_strings(tokenize_changes(parse_diff({rec.diff})));
}

std::vector<TrainSample> to_samples(const std::vector<CommitRecord>& records,
                                    const PipelineConfig& cfg, const Vocabulary& target,
                                    int path_cap, int* skipped = nullptr) {
    std::vector<TrainSample> out;
    int skip = 0;
    for (const auto& rec : records) {
        try {
            TrainSample s;
            s.paths = commit_paths(rec, cfg.seed, cfg.max_path_nodes, path_cap);
            for (const auto& t : normalize_message(rec.message).tokens)
                s.target.push_back(target.encode(t));
            out.push_back(std::move(s));
        } catch (const Error&) {
            ++skip;
        }
    }
    if (skipped) *skipped = skip;
    return out;
}

Ast2Seq load_generator(const PipelineConfig& cfg, const Artifacts& a) {
    require_file(a.sub_vocab, "subtoken vocabulary");
    require_file(a.node_vocab, "node-type vocabulary");
    require_file(a.tgt_vocab, "target vocabulary");
    require_file(a.gen_ckpt, "generator checkpoint");
    require_file(a.gen_manifest, "generator manifest");
    Ast2Seq model(Vocabulary::load(a.sub_vocab), Vocabulary::load(a.node_vocab),
                  Vocabulary::load(a.tgt_vocab), cfg.model, cfg.seed);
    model.params().load(a.gen_ckpt);
    json m = slurp_json(a.gen_manifest);
    if (m.at("vocab").at("subtoken") != model.subtoken_vocab().content_hash() ||
        m.at("vocab").at("node_type") != model.node_vocab().content_hash() ||
        m.at("vocab").at("target") != model.target_vocab().content_hash())
        throw ConfigMismatch("generator vocabulary hash mismatch");
    if (m.at("params") != model.params().content_hash())
        throw ConfigMismatch("generator checkpoint hash mismatch");
    if (m.at("arch") != model_arch_json(cfg))
        throw ConfigMismatch("generator trained under a different model config");
    return model;
}

Ranker load_ranker(const PipelineConfig& cfg, const Artifacts& a) {
    require_file(a.rdiff_vocab, "ranker diff vocabulary");
    require_file(a.rmsg_vocab, "ranker message vocabulary");
    require_file(a.rank_ckpt, "ranker");
    require_file(a.rank_manifest, "ranker manifest");
    Ranker ranker(Vocabulary::load(a.rdiff_vocab), Vocabulary::load(a.rmsg_vocab),
                  cfg.ranker, cfg.seed);
    ranker.params().load(a.rank_ckpt);
    json m = slurp_json(a.rank_manifest);
    if (m.at("vocab").at("diff") != ranker.diff_vocab().content_hash() ||
        m.at("vocab").at("message") != ranker.msg_vocab().content_hash())
        throw ConfigMismatch("ranker vocabulary hash mismatch");
    if (m.at("params") != ranker.params().content_hash())
        throw ConfigMismatch("ranker checkpoint hash mismatch");
    if (m.at("arch") != ranker_arch_json(cfg))
        throw ConfigMismatch("ranker trained under a different config");
    return ranker;
}

MetricReport mean_report(const std::vector<std::pair<TokenSeq, TokenSeq>>& pairs) {
    MetricReport sum;
    for (const auto& [cand, ref] : pairs) {
        if (cand.empty()) continue;  // scores all zero
        auto r = sentence_report(cand, ref);
        sum.bleu1 += r.bleu1;
        sum.bleu2 += r.bleu2;
        sum.bleu3 += r.bleu3;
        sum.bleu4 += r.bleu4;
        sum.rouge_l += r.rouge_l;
        sum.meteor += r.meteor;
    }
    const double n = static_cast<double>(pairs.size());
    if (n > 0) {
        sum.bleu1 /= n;
        sum.bleu2 /= n;
        sum.bleu3 /= n;
        sum.bleu4 /= n;
        sum.rouge_l /= n;
        sum.meteor /= n;
    }
    return sum;
}

json report_json(const MetricReport& r) {
    return json{{"bleu1", r.bleu1},     {"bleu2", r.bleu2},   {"bleu3", r.bleu3},
                {"bleu4", r.bleu4},     {"rouge_l", r.rouge_l}, {"meteor", r.meteor}};
}

}  // namespace

Artifacts::Artifacts(const std::string& out_dir) : dir(out_dir) {
    auto p = [&](const char* name) { return (fs::path(out_dir) / name).string(); };
    config = p("config.json");
    filtered = p("filtered.jsonl");
    filter_report = p("filter_report.json");
    train = p("train.jsonl");
    valid = p("valid.jsonl");
    test = p("test.jsonl");
    sub_vocab = p("vocab_subtoken.json");
    node_vocab = p("vocab_node.json");
    tgt_vocab = p("vocab_target.json");
    gen_ckpt = p("gen.ckpt");
    gen_manifest = p("gen_manifest.json");
    index = p("index.bin");
    rdiff_vocab = p("vocab_rank_diff.json");
    rmsg_vocab = p("vocab_rank_msg.json");
    rank_ckpt = p("rank.ckpt");
    rank_manifest = p("rank_manifest.json");
    generated = p("generated.jsonl");
    evaluation = p("evaluate.json");
    pathstats = p("pathstats.json");
}

PipelineConfig preset_config(const std::string& name) {
    PipelineConfig c;
    c.preset = name;
    if (name == "desk") {
        c.model.embed = 32;
        c.model.hidden = 64;
        c.model.dropout = 0.0f;
        c.gen_train.lr = 0.01f;
        c.gen_train.batch = 16;
        c.gen_train.max_epochs = 500;
        c.ranker.embed = 16;
        c.ranker.diff_cap = 32;
        c.ranker.kernels = 4;
        c.rank_train.lr = 0.01f;
        c.rank_train.batch = 16;
        c.rank_train.max_epochs = 200;
    } else if (name == "full") {
        c.model.embed = 128;
        c.model.hidden = 256;
        c.model.dropout = 0.4f;
        c.gen_train.lr = 1e-4f;
        c.gen_train.batch = 256;
        c.gen_train.max_epochs = 3000;
        c.ranker.embed = 128;
        c.ranker.diff_cap = 128;
        c.ranker.kernels = 16;
        c.rank_train.lr = 1e-4f;
        c.rank_train.batch = 256;
        c.rank_train.max_epochs = 3000;
    } else {
        throw ConfigMismatch("unknown preset: " + name);
    }
    return c;
}

PipelineConfig load_config(const std::string& path) {
    require_file(path, "config");
    json j = slurp_json(path);
    PipelineConfig c = preset_config(j.value("preset", "desk"));
    c.dataset = j.value("dataset", c.dataset);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.split = j.value("split", c.split);
    c.seed = j.value("seed", c.seed);
    if (j.contains("model")) {
        const json& m = j.at("model");
        c.model.embed = m.value("embed", c.model.embed);
        c.model.hidden = m.value("hidden", c.model.hidden);
        c.model.dropout = m.value("dropout", c.model.dropout);
        c.model.max_len = m.value("max_len", c.model.max_len);
        c.model.beam_width = m.value("beam", c.model.beam_width);
        c.path_cap = m.value("path_cap", c.path_cap);
        c.max_path_nodes = m.value("max_path_nodes", c.max_path_nodes);
        c.gen_train.lr = m.value("lr", c.gen_train.lr);
        c.gen_train.batch = m.value("batch", c.gen_train.batch);
        c.gen_train.max_epochs = m.value("epochs", c.gen_train.max_epochs);
        c.gen_train.patience = m.value("patience", c.gen_train.patience);
    }
    if (j.contains("ranker")) {
        const json& r = j.at("ranker");
        c.ranker.embed = r.value("embed", c.ranker.embed);
        c.ranker.diff_cap = r.value("diff_cap", c.ranker.diff_cap);
        c.ranker.msg_cap = r.value("msg_cap", c.ranker.msg_cap);
        c.ranker.kernels = r.value("kernels", c.ranker.kernels);
        c.rank_train.lr = r.value("lr", c.rank_train.lr);
        c.rank_train.batch = r.value("batch", c.rank_train.batch);
        c.rank_train.max_epochs = r.value("epochs", c.rank_train.max_epochs);
        c.rank_train.patience = r.value("patience", c.rank_train.patience);
    }
    c.gen_train.seed = c.seed;
    c.rank_train.seed = c.seed;
    return c;
}

void apply_override(PipelineConfig& c, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigMismatch("override must look like key=value: " + assignment);
    std::string key = assignment.substr(0, eq);
    std::string val = assignment.substr(eq + 1);
    auto as_int = [&] { return std::stoi(val); };
    auto as_float = [&] { return std::stof(val); };
    try {
        if (key == "dataset") c.dataset = val;
        else if (key == "out_dir") c.out_dir = val;
        else if (key == "split") c.split = val;
        else if (key == "seed") c.seed = c.gen_train.seed = c.rank_train.seed =
                                    std::stoull(val);
        else if (key == "model.embed") c.model.embed = as_int();
        else if (key == "model.hidden") c.model.hidden = as_int();
        else if (key == "model.dropout") c.model.dropout = as_float();
        else if (key == "model.max_len") c.model.max_len = as_int();
        else if (key == "model.beam") c.model.beam_width = as_int();
        else if (key == "model.path_cap") c.path_cap = as_int();
        else if (key == "model.max_path_nodes") c.max_path_nodes = as_int();
        else if (key == "model.lr") c.gen_train.lr = as_float();
        else if (key == "model.batch") c.gen_train.batch = as_int();
        else if (key == "model.epochs") c.gen_train.max_epochs = as_int();
        else if (key == "model.patience") c.gen_train.patience = as_int();
        else if (key == "ranker.embed") c.ranker.embed = as_int();
        else if (key == "ranker.diff_cap") c.ranker.diff_cap = as_int();
        else if (key == "ranker.msg_cap") c.ranker.msg_cap = as_int();
        else if (key == "ranker.kernels") c.ranker.kernels = as_int();
        else if (key == "ranker.lr") c.rank_train.lr = as_float();
        else if (key == "ranker.batch") c.rank_train.batch = as_int();
        else if (key == "ranker.epochs") c.rank_train.max_epochs = as_int();
        else if (key == "ranker.patience") c.rank_train.patience = as_int();
        else throw ConfigMismatch("unknown config key: " + key);
    } catch (const std::invalid_argument&) {
        throw ConfigMismatch("bad value for " + key + ": " + val);
    } catch (const std::out_of_range&) {
        throw ConfigMismatch("bad value for " + key + ": " + val);
    }
}

std::string config_to_json(const PipelineConfig& c) {
    json j{{"preset", c.preset},   {"dataset", c.dataset}, {"out_dir", c.out_dir},
           {"split", c.split},     {"seed", c.seed},       {"model", model_json(c)},
           {"ranker", ranker_json(c)}};
    return j.dump(2) + "\n";
}

SplitSpec split_spec(const PipelineConfig& c) {
    SplitSpec s;
    s.seed = c.seed;
    if (c.split == "by_commit") s.strategy = SplitStrategy::ByCommit;
    else if (c.split == "by_project") s.strategy = SplitStrategy::ByProject;
    else if (c.split == "by_timestamp") s.strategy = SplitStrategy::ByTimestamp;
    else throw ConfigMismatch("unknown split strategy: " + c.split);
    return s;
}

void write_records(const std::string& path, const std::vector<CommitRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    for (const auto& r : records) {
        json fns = json::array();
        for (const auto& f : r.functions)
            fns.push_back(json{{"polarity", std::string(polarity_name(f.polarity))},
                               {"source", f.source},
                               {"file_path", f.file_path}});
        json j{{"commit_id", r.commit_id}, {"subject", r.subject},
               {"message", r.message},     {"diff", r.diff},
               {"file_changed", r.file_changed}, {"project", r.project},
               {"timestamp", r.timestamp}, {"functions", std::move(fns)}};
        out << j.dump() << "\n";
    }
}

std::string run_ingest(const PipelineConfig& cfg) {
    Artifacts a(cfg.out_dir);
    fs::create_directories(a.dir);
    write_text(a.config, config_to_json(cfg));

    auto records = ingest(cfg.dataset);
    FilterReport report;
    auto kept = filter_commits(records, &report, cfg.seed);
    write_records(a.filtered, kept);

    json rj{{"input", static_cast<int>(records.size())}, {"kept", report.kept},
            {"dropped", report.dropped}};
    write_text(a.filter_report, rj.dump(2) + "\n");

    std::ostringstream s;
    s << "ingested " << records.size() << " commits, kept " << kept.size();
    return s.str();
}

std::string run_split(const PipelineConfig& cfg) {
    Artifacts a(cfg.out_dir);
    require_file(a.filtered, "filtered dataset");
    auto records = ingest(a.filtered);
    auto split = split_dataset(records, split_spec(cfg));
    write_records(a.train, split.train);
    write_records(a.valid, split.valid);
    write_records(a.test, split.test);
    std::ostringstream s;
    s << "split " << records.size() << " -> " << split.train.size() << "/"
      << split.valid.size() << "/" << split.test.size();
    return s.str();
}

std::string run_train_gen(const PipelineConfig& cfg) {
    Artifacts a(cfg.out_dir);
    require_file(a.train, "train split");
    require_file(a.valid, "valid split");
    auto train_recs = ingest(a.train);
    auto valid_recs = ingest(a.valid);

    auto vocabs = build_vocab(train_recs, cfg.seed);
    vocabs.subtoken.save(a.sub_vocab);
    vocabs.node_type.save(a.node_vocab);
    vocabs.target.save(a.tgt_vocab);

    int skip_train = 0, skip_valid = 0;
    auto train_set = to_samples(train_recs, cfg, vocabs.target, cfg.path_cap, &skip_train);
    auto valid_set = to_samples(valid_recs, cfg, vocabs.target, cfg.path_cap, &skip_valid);

    Ast2Seq model(vocabs.subtoken, vocabs.node_type, vocabs.target, cfg.model, cfg.seed);
    auto report = model.train(train_set, valid_set, cfg.gen_train);
    model.params().save(a.gen_ckpt);

    json m{{"model", model_json(cfg)},
           {"arch", model_arch_json(cfg)},
           {"vocab",
            {{"subtoken", vocabs.subtoken.content_hash()},
             {"node_type", vocabs.node_type.content_hash()},
             {"target", vocabs.target.content_hash()}}},
           {"params", model.params().content_hash()},
           {"train",
            {{"best_epoch", report.best_epoch},
             {"stopped_epoch", report.stopped_epoch},
             {"best_valid", report.best_valid},
             {"skipped", skip_train + skip_valid}}}};
    write_text(a.gen_manifest, m.dump(2) + "\n");

    std::ostringstream s;
    s << "trained generator on " << train_set.size() << " samples, best epoch "
      << report.best_epoch << " (valid loss " << report.best_valid << ")";
    return s.str();
}

std::string run_retrieve(const PipelineConfig& cfg) {
    Artifacts a(cfg.out_dir);
    require_file(a.train, "train split");
    auto train_recs = ingest(a.train);
    std::vector<DiffDocument> docs;
    for (const auto& r : train_recs)
        docs.push_back({r.commit_id, normalize_message(r.message).joined(),
                        diff_tokens_of(r)});
    auto index = build_index(docs);
    index.save(a.index);
    std::ostringstream s;
    s << "indexed " << index.doc_count() << " diffs";
    return s.str();
}

std::string run_train_rank(const PipelineConfig& cfg) {
    Artifacts a(cfg.out_dir);
    require_file(a.train, "train split");
    require_file(a.valid, "valid split");
    require_file(a.index, "retrieval index");
    auto model = load_generator(cfg, a);
    auto index = TfIdfIndex::load(a.index);
    auto train_recs = ingest(a.train);
    auto valid_recs = ingest(a.valid);

    int skip_train = 0, skip_valid = 0;
    auto train_rows = build_ranking_dataset(train_recs, model, index, cfg.seed, &skip_train);
    auto valid_rows = build_ranking_dataset(valid_recs, model, index, cfg.seed, &skip_valid);
    auto [dv, mv] = build_ranker_vocabs(train_rows);
    dv.save(a.rdiff_vocab);
    mv.save(a.rmsg_vocab);

    Ranker ranker(dv, mv, cfg.ranker, cfg.seed);
    std::vector<RankingExample> train_ex, valid_ex;
    for (const auto& r : train_rows) train_ex.push_back(ranker.encode_example(r));
    for (const auto& r : valid_rows) valid_ex.push_back(ranker.encode_example(r));
    auto report = ranker.train(train_ex, valid_ex, cfg.rank_train);
    ranker.params().save(a.rank_ckpt);

    json m{{"ranker", ranker_json(cfg)},
           {"arch", ranker_arch_json(cfg)},
           {"vocab", {{"diff", dv.content_hash()}, {"message", mv.content_hash()}}},
           {"params", ranker.params().content_hash()},
           {"train",
            {{"best_epoch", report.best_epoch},
             {"stopped_epoch", report.stopped_epoch},
             {"best_valid", report.best_valid},
             {"skipped", skip_train + skip_valid}}}};
    write_text(a.rank_manifest, m.dump(2) + "\n");

    std::ostringstream s;
    s << "trained ranker on " << train_ex.size() << " rows, best epoch "
      << report.best_epoch;
    return s.str();
}

std::string run_generate(const PipelineConfig& cfg) {
    Artifacts a(cfg.out_dir);
    require_file(a.test, "test split");
    require_file(a.index, "retrieval index");
    auto model = load_generator(cfg, a);
    auto ranker = load_ranker(cfg, a);
    auto index = TfIdfIndex::load(a.index);
    auto test_recs = ingest(a.test);

    std::ofstream out(a.generated, std::ios::binary);
    if (!out) throw IoError("cannot write " + a.generated);
    int emitted = 0, skipped = 0;
    for (const auto& rec : test_recs) {
        try {
            auto reference = normalize_message(rec.message).tokens;
            auto diff_toks = diff_tokens_of(rec);
            auto enc = model.encode_diff(
                commit_paths(rec, cfg.seed, cfg.max_path_nodes, cfg.path_cap));
            auto msg_g = model.decode_tokens(model.beam_search(enc));
            auto hit = index.retrieve_excluding(diff_toks, rec.commit_id);
            auto msg_t = split_ws(hit.message);
            auto sel = ranker.select(diff_toks, msg_t, msg_g);
            json j{{"commit_id", rec.commit_id},
                   {"reference", reference},
                   {"generated", msg_g},
                   {"retrieved", msg_t},
                   {"retrieved_from", hit.commit_id},
                   {"cosine", hit.cosine},
                   {"score_g", sel.score_g},
                   {"score_t", sel.score_t},
                   {"chosen", sel.chosen == Chosen::Generated ? "generated" : "retrieved"}};
            out << j.dump() << "\n";
            ++emitted;
        } catch (const Error&) {
            ++skipped;
        }
    }
    std::ostringstream s;
    s << "generated candidates for " << emitted << " test commits (" << skipped
      << " skipped)";
    return s.str();
}

std::string run_evaluate(const PipelineConfig& cfg) {
    Artifacts a(cfg.out_dir);
    require_file(a.generated, "generated candidates");
    std::ifstream in(a.generated);
    if (!in) throw IoError("cannot open " + a.generated);

    std::vector<std::pair<TokenSeq, TokenSeq>> chosen, gen, ret;
    int n_gen = 0, n_ret = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception&) {
            throw SchemaError(static_cast<int>(chosen.size() + 1), "json");
        }
        TokenSeq reference = j.at("reference").get<TokenSeq>();
        TokenSeq g = j.at("generated").get<TokenSeq>();
        TokenSeq t = j.at("retrieved").get<TokenSeq>();
        bool picked_gen = j.at("chosen").get<std::string>() == "generated";
        (picked_gen ? ++n_gen : ++n_ret);
        chosen.emplace_back(picked_gen ? g : t, reference);
        gen.emplace_back(std::move(g), reference);
        ret.emplace_back(std::move(t), std::move(reference));
    }
    if (chosen.empty()) throw MissingArtifact("generated candidates (empty file)");

    const double n = static_cast<double>(chosen.size());
    json ev{{"count", chosen.size()},
            {"chosen", report_json(mean_report(chosen))},
            {"generated", report_json(mean_report(gen))},
            {"retrieved", report_json(mean_report(ret))},
            {"mixture", {{"generated", n_gen / n}, {"retrieved", n_ret / n}}}};
    write_text(a.evaluation, ev.dump(2) + "\n");

    std::ostringstream s;
    s << "evaluated " << chosen.size() << " commits, chosen BLEU-4 "
      << mean_report(chosen).bleu4;
    return s.str();
}

std::string run_pathstats(const PipelineConfig& cfg, const std::vector<int>& caps) {
    Artifacts a(cfg.out_dir);
    require_file(a.train, "train split");
    require_file(a.valid, "valid split");
    auto train_recs = ingest(a.train);
    auto valid_recs = ingest(a.valid);
    auto vocabs = build_vocab(train_recs, cfg.seed);

    json rows = json::array();
    std::ostringstream table;
    table << "path_cap  bleu4  rouge_l  meteor\n";
    for (int cap : caps) {
        auto train_set = to_samples(train_recs, cfg, vocabs.target, cap);
        auto valid_set = to_samples(valid_recs, cfg, vocabs.target, cap);
        Ast2Seq model(vocabs.subtoken, vocabs.node_type, vocabs.target, cfg.model,
                      cfg.seed);
        model.train(train_set, valid_set, cfg.gen_train);

        // score the generator alone on the validation commits
        std::vector<std::pair<TokenSeq, TokenSeq>> pairs;
        for (const auto& rec : valid_recs.empty() ? train_recs : valid_recs) {
            try {
                auto enc = model.encode_diff(
                    commit_paths(rec, cfg.seed, cfg.max_path_nodes, cap));
                pairs.emplace_back(model.decode_tokens(model.beam_search(enc)),
                                   normalize_message(rec.message).tokens);
            } catch (const Error&) {
            }
        }
        MetricReport r = pairs.empty() ? MetricReport{} : mean_report(pairs);
        rows.push_back({{"path_cap", cap},
                        {"bleu4", r.bleu4},
                        {"rouge_l", r.rouge_l},
                        {"meteor", r.meteor}});
        table << cap << "  " << r.bleu4 << "  " << r.rouge_l << "  " << r.meteor << "\n";
    }
    write_text(a.pathstats, json{{"rows", rows}}.dump(2) + "\n");
    return table.str();
}

}  // namespace atom
