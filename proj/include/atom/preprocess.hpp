#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "atom/ast.hpp"

namespace atom {

struct FunctionSource {
    Polarity polarity = Polarity::Added;
    std::string source;
    std::string file_path;
};

struct CommitRecord {
    std::string commit_id;
    std::string subject;
    std::string message;
    std::string diff;
    int file_changed = 1;
    std::string project;
    std::int64_t timestamp = 0;
    std::vector<FunctionSource> functions;
};

struct TargetMessage {
    std::vector<std::string> tokens;  // <= 20 enforced by the length filter

    std::string joined() const;
};

class Vocabulary {
public:
    enum class Kind { Subtoken, NodeType, Target };

    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kSos = 2;
    static constexpr int kEos = 3;

    explicit Vocabulary(Kind kind = Kind::Target);

    void add(const std::string& token);  // no-op if present
    int encode(const std::string& token) const;  // UNK when absent
    const std::string& decode(int id) const;
    int size() const { return static_cast<int>(id_to_token_.size()); }
    bool contains(const std::string& token) const;
    Kind kind() const { return kind_; }

    const std::vector<std::string>& tokens() const { return id_to_token_; }

    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);
    std::uint64_t content_hash() const;

private:
    Kind kind_;
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;
};

struct VocabularySet {
    Vocabulary subtoken{Vocabulary::Kind::Subtoken};
    Vocabulary node_type{Vocabulary::Kind::NodeType};
    Vocabulary target{Vocabulary::Kind::Target};
};

enum class SplitStrategy { ByCommit, ByProject, ByTimestamp };

struct SplitSpec {
    SplitStrategy strategy = SplitStrategy::ByCommit;
    std::uint64_t seed = 1;
};

struct DatasetSplit {
    std::vector<CommitRecord> train;
    std::vector<CommitRecord> valid;
    std::vector<CommitRecord> test;
};

struct FilterReport {
    std::map<std::string, int> dropped;  // rule -> count
    int kept = 0;
};

std::vector<CommitRecord> ingest(const std::string& dataset_file);

std::vector<std::string> split_subtokens(const std::string& leaf);

std::string lemmatize(const std::string& word);

TargetMessage normalize_message(const std::string& message);

// AST path contexts of one commit: parse the companion function sources and
// keep leaves whose line text matches a changed line of the same file/polarity.
PathContextSet commit_paths(const CommitRecord& record, std::uint64_t seed,
                            int max_path_nodes = kMaxPathNodes,
                            int path_cap = kDefaultPathCap);

std::vector<CommitRecord> filter_commits(const std::vector<CommitRecord>& records,
                                         FilterReport* report = nullptr,
                                         std::uint64_t seed = 1);

DatasetSplit split_dataset(const std::vector<CommitRecord>& records, const SplitSpec& spec);

VocabularySet build_vocab(const std::vector<CommitRecord>& train_records,
                          std::uint64_t seed = 1);

}  // namespace atom
