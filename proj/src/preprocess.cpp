#include "atom/preprocess.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "atom/diffparse.hpp"
#include "atom/errors.hpp"
#include "atom/rng.hpp"
#include "json.hpp"

namespace atom {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

bool all_digits(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    return true;
}

bool is_file_token(const std::string& token) {
    static const std::unordered_set<std::string> exts = {
        "java", "py",  "c",    "cc",  "cpp",  "h",    "hpp",        "js",  "ts",
        "xml",  "json", "yml",  "yaml", "md",   "txt",  "gradle",     "sh",  "html",
        "css",  "sql",  "go",   "rb",   "kt",   "scala", "properties", "rs",  "php"};
    std::size_t dot = token.find_last_of('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 >= token.size()) return false;
    return exts.count(lower(token.substr(dot + 1))) > 0;
}

// irregular and e-final verb forms common in commit messages
const std::unordered_map<std::string, std::string>& irregulars() {
    static const std::unordered_map<std::string, std::string> table = {
        {"made", "make"},        {"making", "make"},      {"did", "do"},
        {"done", "do"},          {"was", "be"},           {"were", "be"},
        {"been", "be"},          {"being", "be"},         {"broke", "break"},
        {"broken", "break"},     {"brought", "bring"},    {"built", "build"},
        {"caught", "catch"},     {"chose", "choose"},     {"chosen", "choose"},
        {"found", "find"},       {"got", "get"},          {"gave", "give"},
        {"given", "give"},       {"went", "go"},          {"had", "have"},
        {"held", "hold"},        {"kept", "keep"},        {"knew", "know"},
        {"known", "know"},       {"left", "leave"},       {"lost", "lose"},
        {"meant", "mean"},       {"ran", "run"},          {"said", "say"},
        {"sent", "send"},        {"showed", "show"},      {"shown", "show"},
        {"took", "take"},        {"taken", "take"},       {"thought", "think"},
        {"threw", "throw"},      {"thrown", "throw"},     {"wrote", "write"},
        {"written", "write"},
        // regular verbs whose base ends in silent e
        {"fixed", "fix"},        {"used", "use"},         {"uses", "use"},
        {"using", "use"},        {"updated", "update"},   {"updating", "update"},
        {"created", "create"},   {"creating", "create"},  {"merged", "merge"},
        {"merging", "merge"},    {"moved", "move"},       {"moving", "move"},
        {"changed", "change"},   {"changing", "change"},  {"removed", "remove"},
        {"removing", "remove"},  {"renamed", "rename"},   {"renaming", "rename"},
        {"deleted", "delete"},   {"deleting", "delete"},  {"improved", "improve"},
        {"improving", "improve"}, {"handled", "handle"},  {"handling", "handle"},
        {"enabled", "enable"},   {"enabling", "enable"},  {"disabled", "disable"},
        {"disabling", "disable"}, {"replaced", "replace"}, {"replacing", "replace"},
        {"reduced", "reduce"},   {"reducing", "reduce"},  {"upgraded", "upgrade"},
        {"upgrading", "upgrade"}, {"validated", "validate"}, {"validating", "validate"},
        {"generated", "generate"}, {"generating", "generate"}, {"introduced", "introduce"},
        {"introducing", "introduce"}, {"ignored", "ignore"}, {"ignoring", "ignore"},
        {"included", "include"}, {"including", "include"}, {"excluded", "exclude"},
        {"excluding", "exclude"}, {"provided", "provide"}, {"providing", "provide"},
        {"exposed", "expose"},   {"exposing", "expose"},  {"parsed", "parse"},
        {"parsing", "parse"},    {"closed", "close"},     {"closes", "close"},
        {"closing", "close"},    {"released", "release"}, {"releases", "release"},
        {"releasing", "release"}, {"resolved", "resolve"}, {"resolving", "resolve"},
        {"cached", "cache"},     {"caching", "cache"},    {"caused", "cause"},
        {"causes", "cause"},     {"causing", "cause"},    {"increased", "increase"},
        {"increases", "increase"}, {"decreased", "decrease"}, {"decreases", "decrease"},
        {"saved", "save"},       {"saving", "save"},      {"solved", "solve"},
        {"solving", "solve"},    {"unused", "unused"},    {"deprecated", "deprecate"},
        {"needed", "need"},      {"missed", "miss"},      {"missing", "miss"},
    };
    return table;
}

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

// consonants whose doubling before -ed/-ing is undone (stopped -> stop)
bool undoable_double(char c) {
    return c == 'b' || c == 'd' || c == 'g' || c == 'm' || c == 'n' || c == 'p' ||
           c == 'r' || c == 't';
}

std::string undo_doubling(std::string stem) {
    if (stem.size() >= 4 && stem[stem.size() - 1] == stem[stem.size() - 2] &&
        !is_vowel(stem.back()) && undoable_double(stem.back()))
        stem.pop_back();
    return stem;
}

bool ends_with(const std::string& s, const char* suf) {
    std::size_t n = std::strlen(suf);
    return s.size() >= n && s.compare(s.size() - n, n, suf) == 0;
}

}  // namespace

std::string lemmatize(const std::string& word) {
    auto it = irregulars().find(word);
    if (it != irregulars().end()) return it->second;
    const std::size_t n = word.size();
    if (ends_with(word, "ies") && n > 4) return word.substr(0, n - 3) + "y";
    if (ends_with(word, "ied") && n > 4) return word.substr(0, n - 3) + "y";
    if (ends_with(word, "ing") && n > 5) return undo_doubling(word.substr(0, n - 3));
    if (ends_with(word, "ed") && n > 3) return undo_doubling(word.substr(0, n - 2));
    if (ends_with(word, "es") && n > 3) {
        const std::string stem = word.substr(0, n - 2);
        if (ends_with(stem, "s") || ends_with(stem, "x") || ends_with(stem, "z") ||
            ends_with(stem, "ch") || ends_with(stem, "sh"))
            return stem;
    }
    if (ends_with(word, "s") && !ends_with(word, "ss") && n > 3)
        return word.substr(0, n - 1);
    return word;
}

std::string TargetMessage::joined() const {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

TargetMessage normalize_message(const std::string& message) {
    // first sentence: '.', '!', '?' end a sentence only before whitespace/end,
    // so dotted names and versions ("FetchPhase.java", "1.2.3") survive
    std::string sentence;
    for (std::size_t i = 0; i < message.size(); ++i) {
        char c = message[i];
        if (c == '\n') break;
        if ((c == '.' || c == '!' || c == '?') &&
            (i + 1 == message.size() ||
             std::isspace(static_cast<unsigned char>(message[i + 1]))))
            break;
        sentence += c;
    }

    TargetMessage out;
    std::string cur;
    auto flush = [&]() {
        if (cur.empty()) return;
        std::string tok = cur;
        cur.clear();
        // placeholders pass through untouched
        std::string up = tok;
        if (tok == "<FILE>" || tok == "<NUMBER>" || lower(tok) == "<file>" ||
            lower(tok) == "<number>") {
            out.tokens.push_back(lower(tok) == "<file>" ? "<FILE>" : "<NUMBER>");
            return;
        }
        // strip surrounding punctuation, keep interior dots for file/version names
        std::size_t a = 0, b = tok.size();
        while (a < b && !std::isalnum(static_cast<unsigned char>(tok[a]))) ++a;
        while (b > a && !std::isalnum(static_cast<unsigned char>(tok[b - 1]))) --b;
        tok = tok.substr(a, b - a);
        if (tok.empty()) return;
        if (is_file_token(tok)) {
            out.tokens.push_back("<FILE>");
            return;
        }
        if (all_digits(tok)) {
            out.tokens.push_back("<NUMBER>");
            return;
        }
        out.tokens.push_back(lemmatize(lower(tok)));
    };
    for (char c : sentence) {
        if (std::isspace(static_cast<unsigned char>(c)) || c == '_') flush();
        else cur += c;
    }
    flush();
    if (out.tokens.empty()) throw EmptyAfterNormalization("message is empty after normalization");
    return out;
}

std::vector<std::string> split_subtokens(const std::string& leaf) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&]() {
        if (!cur.empty()) out.push_back(lower(cur));
        cur.clear();
    };
    auto kind = [](char c) {
        unsigned char u = static_cast<unsigned char>(c);
        if (std::isdigit(u)) return 2;
        if (std::isupper(u)) return 1;
        if (std::islower(u)) return 0;
        return 3;
    };
    for (std::size_t i = 0; i < leaf.size(); ++i) {
        char c = leaf[i];
        int k = kind(c);
        if (k == 3) {  // separator (underscore, punctuation)
            flush();
            continue;
        }
        if (!cur.empty()) {
            int pk = kind(cur.back());
            bool boundary =
                (pk == 0 && k == 1) ||             // camelCase
                (pk != 2 && k == 2) || (pk == 2 && k != 2) ||  // digit transitions
                (pk == 1 && k == 0 && cur.size() > 1);  // ATOMRun -> atom, run
            if (pk == 1 && k == 0 && cur.size() > 1) {
                // the last upper-case letter starts the next word: XMLParser -> xml parser
                char carry = cur.back();
                cur.pop_back();
                flush();
                cur += carry;
                cur += c;
                continue;
            }
            if (boundary) flush();
        }
        cur += c;
    }
    flush();
    return out;
}

// --- ingest -----------------------------------------------------------------

std::vector<CommitRecord> ingest(const std::string& dataset_file) {
    std::ifstream in(dataset_file);
    if (!in) throw IoError("cannot open dataset file: " + dataset_file);
    std::vector<CommitRecord> records;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception&) {
            throw SchemaError(line_no, "json");
        }
        auto need = [&](const char* field) -> const json& {
            if (!j.contains(field)) throw SchemaError(line_no, field);
            return j.at(field);
        };
        CommitRecord r;
        try {
            r.commit_id = need("commit_id").get<std::string>();
            r.subject = need("subject").get<std::string>();
            r.message = need("message").get<std::string>();
            r.diff = need("diff").get<std::string>();
            r.file_changed = need("file_changed").get<int>();
            r.project = need("project").get<std::string>();
            r.timestamp = need("timestamp").get<std::int64_t>();
            for (const auto& f : need("functions")) {
                FunctionSource fs;
                std::string pol = f.at("polarity").get<std::string>();
                fs.polarity = pol == "deleted" ? Polarity::Deleted : Polarity::Added;
                fs.source = f.at("source").get<std::string>();
                fs.file_path = f.at("file_path").get<std::string>();
                r.functions.push_back(std::move(fs));
            }
        } catch (const json::exception&) {
            throw SchemaError(line_no, "field-type");
        }
        records.push_back(std::move(r));
    }
    return records;
}

// --- path contexts ----------------------------------------------------------

PathContextSet commit_paths(const CommitRecord& record, std::uint64_t seed,
                            int max_path_nodes, int path_cap) {
    auto chunks = parse_diff({record.diff});

    // changed line text per file and polarity, trimmed
    std::map<std::string, std::unordered_set<std::string>> added_text, deleted_text;
    for (const auto& c : chunks) {
        for (const auto& h : c.hunks) {
            for (const auto& l : h.lines) {
                std::string t = trim(l.text);
                if (t.empty()) continue;
                if (l.tag == '+') added_text[c.file_path].insert(t);
                else if (l.tag == '-') deleted_text[c.file_path].insert(t);
            }
        }
    }

    // function sources are standalone snippets, so diff line numbers do not
    // apply; a snippet line counts as changed when its trimmed text equals a
    // changed line of the same file and polarity
    std::vector<FunctionAst> functions;
    std::map<std::string, ChangedLines> lines;
    for (const auto& fs : record.functions) {
        FunctionAst f;
        try {
            f = parse_function(fs.source);
        } catch (const Error&) {
            continue;  // unparseable snippet contributes no paths
        }
        f.file_path = fs.file_path;
        f.polarity = fs.polarity;
        const auto& texts =
            fs.polarity == Polarity::Added ? added_text[fs.file_path] : deleted_text[fs.file_path];
        std::istringstream src(fs.source);
        std::string line;
        int ln = 0;
        auto& bucket =
            fs.polarity == Polarity::Added ? lines[fs.file_path].added : lines[fs.file_path].deleted;
        while (std::getline(src, line)) {
            ++ln;
            std::string t = trim(line);
            if (!t.empty() && texts.count(t)) bucket.insert(ln);
        }
        functions.push_back(std::move(f));
    }
    return extract_path_contexts(functions, lines, seed, max_path_nodes, path_cap);
}

// --- filtering --------------------------------------------------------------

std::vector<CommitRecord> filter_commits(const std::vector<CommitRecord>& records,
                                         FilterReport* report, std::uint64_t seed) {
    FilterReport local;
    FilterReport& rep = report ? *report : local;
    rep.dropped.clear();
    rep.kept = 0;

    auto drop = [&](const char* rule) { ++rep.dropped[rule]; };

    struct Kept {
        CommitRecord rec;
        std::string norm;
    };
    std::vector<Kept> kept;
    for (const auto& r : records) {
        if (trim(r.message).empty()) {
            drop("empty");
            continue;
        }
        TargetMessage norm;
        try {
            norm = normalize_message(r.message);
        } catch (const EmptyAfterNormalization&) {
            drop("empty");
            continue;
        }
        bool ascii = true;
        for (const auto& t : norm.tokens)
            for (char c : t)
                if (static_cast<unsigned char>(c) > 0x7f) ascii = false;
        if (!ascii) {
            drop("non_ascii");
            continue;
        }
        const std::string& first = norm.tokens.front();
        if (first == "merge" || first == "rollback" || first == "revert") {
            drop("merge");
            continue;
        }
        if (count_chunks({r.diff}) > 5) {
            drop("chunks");
            continue;
        }
        if (norm.tokens.size() > 20) {
            drop("length");
            continue;
        }
        try {
            commit_paths(r, seed);
        } catch (const Error&) {
            drop("empty_context");
            continue;
        }
        kept.push_back({r, norm.joined()});
    }

    // dedup on (diff, normalized message), earliest timestamp wins
    std::map<std::pair<std::string, std::string>, std::size_t> best;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        auto key = std::make_pair(kept[i].rec.diff, kept[i].norm);
        auto it = best.find(key);
        if (it == best.end()) {
            best[key] = i;
        } else if (kept[i].rec.timestamp < kept[it->second].rec.timestamp) {
            it->second = i;
        }
        // equal timestamps: the earlier record stays
    }
    std::vector<bool> keep_flag(kept.size(), false);
    for (const auto& [key, idx] : best) keep_flag[idx] = true;
    std::vector<CommitRecord> out;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        if (keep_flag[i]) out.push_back(std::move(kept[i].rec));
        else ++rep.dropped["duplicate"];
    }
    rep.kept = static_cast<int>(out.size());
    return out;
}

// --- splitting --------------------------------------------------------------

DatasetSplit split_dataset(const std::vector<CommitRecord>& records, const SplitSpec& spec) {
    DatasetSplit out;
    const std::size_t n = records.size();
    if (spec.strategy == SplitStrategy::ByCommit) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        Rng rng(spec.seed, "split.by_commit");
        rng.shuffle(idx);
        std::size_t n_train = n * 8 / 10;
        std::size_t n_valid = n / 10;
        for (std::size_t i = 0; i < n; ++i) {
            const CommitRecord& r = records[idx[i]];
            if (i < n_train) out.train.push_back(r);
            else if (i < n_train + n_valid) out.valid.push_back(r);
            else out.test.push_back(r);
        }
        return out;
    }
    if (spec.strategy == SplitStrategy::ByProject) {
        std::map<std::string, std::vector<const CommitRecord*>> projects;
        for (const auto& r : records) projects[r.project].push_back(&r);
        if (projects.size() < 3)
            throw TooFewProjects("by_project needs >= 3 projects, got " +
                                 std::to_string(projects.size()));
        // biggest projects first; each goes to the split furthest below target
        std::vector<std::pair<std::string, std::size_t>> order;
        for (const auto& [name, recs] : projects) order.emplace_back(name, recs.size());
        std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
            return std::tie(b.second, a.first) < std::tie(a.second, b.first);
        });
        const double target[3] = {0.8 * n, 0.1 * n, 0.1 * n};
        double have[3] = {0, 0, 0};
        std::vector<CommitRecord>* splits[3] = {&out.train, &out.valid, &out.test};
        for (const auto& [name, count] : order) {
            int best = 0;
            double best_deficit = target[0] - have[0];
            for (int s = 1; s < 3; ++s) {
                double d = target[s] - have[s];
                if (d > best_deficit) {
                    best_deficit = d;
                    best = s;
                }
            }
            for (const CommitRecord* r : projects[name]) splits[best]->push_back(*r);
            have[best] += static_cast<double>(count);
        }
        return out;
    }
    // by_timestamp, per project: latest 20% test, last tenth of the rest valid
    std::map<std::string, std::vector<const CommitRecord*>> projects;
    for (const auto& r : records) projects[r.project].push_back(&r);
    for (auto& [name, recs] : projects) {
        std::stable_sort(recs.begin(), recs.end(), [](const CommitRecord* a, const CommitRecord* b) {
            return a->timestamp < b->timestamp;
        });
        std::size_t m = recs.size();
        std::size_t pool = m * 8 / 10;                        // earliest part
        std::size_t n_valid = (pool + 9) / 10;                // last tenth of the pool
        for (std::size_t i = 0; i < m; ++i) {
            if (i < pool - n_valid) out.train.push_back(*recs[i]);
            else if (i < pool) out.valid.push_back(*recs[i]);
            else out.test.push_back(*recs[i]);
        }
    }
    return out;
}

// --- vocabularies -----------------------------------------------------------

Vocabulary::Vocabulary(Kind kind) : kind_(kind) {
    for (const char* t : {"<PAD>", "<UNK>", "<SOS>", "<EOS>"}) add(t);
}

void Vocabulary::add(const std::string& token) {
    if (token_to_id_.count(token)) return;
    token_to_id_[token] = static_cast<int>(id_to_token_.size());
    id_to_token_.push_back(token);
}

int Vocabulary::encode(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::decode(int id) const {
    if (id < 0 || id >= size()) throw ShapeMismatch("vocabulary id out of range");
    return id_to_token_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(const std::string& token) const {
    return token_to_id_.count(token) > 0;
}

void Vocabulary::save(const std::string& path) const {
    json j;
    j["kind"] = static_cast<int>(kind_);
    j["tokens"] = id_to_token_;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write vocabulary: " + path);
    out << j.dump(2) << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read vocabulary: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception&) {
        throw SchemaError(0, "vocabulary-json");
    }
    Vocabulary v(static_cast<Kind>(j.at("kind").get<int>()));
    for (const auto& t : j.at("tokens")) v.add(t.get<std::string>());
    return v;
}

std::uint64_t Vocabulary::content_hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
        h ^= 0xff;
        h *= 1099511628211ull;
    };
    for (const auto& t : id_to_token_) mix(t);
    return h;
}

namespace {

void add_by_frequency(Vocabulary& v, const std::map<std::string, int>& freq, int min_freq) {
    std::vector<std::pair<int, std::string>> order;
    for (const auto& [tok, cnt] : freq)
        if (cnt >= min_freq) order.emplace_back(-cnt, tok);
    std::sort(order.begin(), order.end());
    for (const auto& [neg, tok] : order) v.add(tok);
}

}  // namespace

VocabularySet build_vocab(const std::vector<CommitRecord>& train_records, std::uint64_t seed) {
    VocabularySet vs;

    for (int i = 0; i < kNodeTypeCount; ++i)
        vs.node_type.add(node_type_name(static_cast<NodeType>(i)));

    std::map<std::string, int> sub_freq, tgt_freq;
    for (const auto& r : train_records) {
        try {
            PathContextSet ctx = commit_paths(r, seed);
            auto count = [&](const std::vector<AstPath>& paths) {
                for (const auto& p : paths) {
                    for (const auto& s : split_subtokens(p.start_leaf)) ++sub_freq[s];
                    for (const auto& s : split_subtokens(p.end_leaf)) ++sub_freq[s];
                }
            };
            count(ctx.added);
            count(ctx.deleted);
        } catch (const Error&) {
            // a training record without paths contributes no subtokens
        }
        try {
            for (const auto& t : normalize_message(r.message).tokens) ++tgt_freq[t];
        } catch (const EmptyAfterNormalization&) {
        }
    }
    add_by_frequency(vs.subtoken, sub_freq, 2);
    add_by_frequency(vs.target, tgt_freq, 2);
    return vs;
}

}  // namespace atom
