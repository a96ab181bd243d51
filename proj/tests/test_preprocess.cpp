#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>

#include "atom/errors.hpp"
#include "atom/preprocess.hpp"

using namespace atom;

namespace {

const char* kDiff =
    "diff --git a/src/A.java b/src/A.java\n"
    "index 0000000..1111111 100644\n"
    "--- a/src/A.java\n"
    "+++ b/src/A.java\n"
    "@@ -1,3 +1,3 @@\n"
    " void f() {\n"
    "-    a = b + c;\n"
    "+    a = b + d;\n"
    " }\n";

CommitRecord make_record(const std::string& id, const std::string& project,
                         std::int64_t ts, const std::string& msg) {
    CommitRecord r;
    r.commit_id = id;
    r.subject = msg;
    r.message = msg;
    r.diff = kDiff;
    r.file_changed = 1;
    r.project = project;
    r.timestamp = ts;
    r.functions.push_back({Polarity::Added, "void f() {\n    a = b + d;\n}", "src/A.java"});
    r.functions.push_back({Polarity::Deleted, "void f() {\n    a = b + c;\n}", "src/A.java"});
    return r;
}

std::vector<std::string> norm(const std::string& msg) {
    return normalize_message(msg).tokens;
}

}  // namespace

TEST_CASE("normalize_message worked examples") {
    CHECK(norm("Fixed bugs in FetchPhase.java at line 380. Also refactor.") ==
          std::vector<std::string>{"fix", "bug", "in", "<FILE>", "at", "line", "<NUMBER>"});
    CHECK(norm("update") == std::vector<std::string>{"update"});
    CHECK(norm("fix_test_on_ci") == std::vector<std::string>{"fix", "test", "on", "ci"});
    CHECK_THROWS_AS(normalize_message("   \n whatever"), EmptyAfterNormalization);
    CHECK_THROWS_AS(normalize_message("... !!!"), EmptyAfterNormalization);
}

TEST_CASE("sentence boundary keeps dotted names and versions") {
    CHECK(norm("Bump to 1.2.3 release") ==
          std::vector<std::string>{"bump", "to", "1.2.3", "release"});
    CHECK(norm("first line\nsecond line") == std::vector<std::string>{"first", "line"});
    CHECK(norm("Does it work? Yes.") == std::vector<std::string>{"doe", "it", "work"});
}

TEST_CASE("normalize_message is idempotent") {
    for (const char* msg :
         {"Fixed bugs in FetchPhase.java at line 380. Also refactor.",
          "update", "fix_test_on_ci", "Removed unused imports from Build.java",
          "Merging branches 12 and 14 caused failures", "Bump to 1.2.3 release"}) {
        TargetMessage once = normalize_message(msg);
        TargetMessage twice = normalize_message(once.joined());
        CHECK(once.tokens == twice.tokens);
    }
}

TEST_CASE("lemmatizer rule table") {
    CHECK(lemmatize("fixed") == "fix");
    CHECK(lemmatize("made") == "make");
    CHECK(lemmatize("bugs") == "bug");
    CHECK(lemmatize("copies") == "copy");
    CHECK(lemmatize("applied") == "apply");
    CHECK(lemmatize("stopped") == "stop");
    CHECK(lemmatize("running") == "run");
    CHECK(lemmatize("testing") == "test");
    CHECK(lemmatize("updated") == "update");
    CHECK(lemmatize("passes") == "pass");
    CHECK(lemmatize("fixes") == "fix");
    CHECK(lemmatize("called") == "call");
    CHECK(lemmatize("update") == "update");  // base forms untouched
    CHECK(lemmatize("class") == "class");    // -ss guarded
}

TEST_CASE("split_subtokens worked examples") {
    CHECK(split_subtokens("onOrAfter") == std::vector<std::string>{"on", "or", "after"});
    CHECK(split_subtokens("ATOM") == std::vector<std::string>{"atom"});
    CHECK(split_subtokens("parse2Json_v3") ==
          std::vector<std::string>{"parse", "2", "json", "v", "3"});
    CHECK(split_subtokens("XMLParser") == std::vector<std::string>{"xml", "parser"});
    CHECK(split_subtokens("snake_case_name") ==
          std::vector<std::string>{"snake", "case", "name"});
}

TEST_CASE("ingest round trip and schema errors") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "atom_pre_test";
    fs::create_directories(dir);
    auto path = (dir / "data.jsonl").string();
    {
        std::ofstream out(path);
        for (int i = 0; i < 3; ++i) {
            out << "{\"commit_id\":\"c" << i
                << "\",\"subject\":\"s\",\"message\":\"fix bug\",\"diff\":\"@@ -1 +1 @@\\n-a\\n+b\","
                   "\"file_changed\":1,\"project\":\"p\",\"timestamp\":" << 100 + i
                << ",\"functions\":[]}\n";
        }
    }
    auto records = ingest(path);
    REQUIRE(records.size() == 3);
    CHECK(records[0].commit_id == "c0");
    CHECK(records[2].timestamp == 102);
    CHECK(records[1].functions.empty());

    {
        std::ofstream out(path);
        out << "{\"commit_id\":\"x\",\"subject\":\"s\",\"message\":\"m\","
               "\"file_changed\":1,\"project\":\"p\",\"timestamp\":1,\"functions\":[]}\n";
    }
    try {
        ingest(path);
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("diff") != std::string::npos);
        CHECK(std::string(e.what()).find("1") != std::string::npos);
    }

    {
        std::ofstream out(path);
        out << "not json at all\n";
    }
    CHECK_THROWS_AS(ingest(path), SchemaError);
    CHECK_THROWS_AS(ingest((dir / "missing.jsonl").string()), IoError);
}

TEST_CASE("commit_paths extracts both polarities via line-text matching") {
    auto r = make_record("c1", "p", 1, "fix");
    auto ctx = commit_paths(r, 1);
    CHECK(ctx.added.size() == 3);    // leaves a, b, d -> C(3,2)
    CHECK(ctx.deleted.size() == 3);  // leaves a, b, c
    std::set<std::string> added_leaves, deleted_leaves;
    for (const auto& p : ctx.added) {
        added_leaves.insert(p.start_leaf);
        added_leaves.insert(p.end_leaf);
    }
    for (const auto& p : ctx.deleted) {
        deleted_leaves.insert(p.start_leaf);
        deleted_leaves.insert(p.end_leaf);
    }
    CHECK(added_leaves == std::set<std::string>{"a", "b", "d"});
    CHECK(deleted_leaves == std::set<std::string>{"a", "b", "c"});
}

TEST_CASE("filter_commits drop rules") {
    std::vector<CommitRecord> records;
    records.push_back(make_record("keep", "p", 5, "Fix the parser"));
    records.push_back(make_record("merge", "p", 6, "Merge branch master"));
    records.push_back(make_record("empty", "p", 7, "   "));
    {
        auto r = make_record("chunks", "p", 8, "too many chunks");
        std::string d;
        for (int i = 0; i < 6; ++i) {
            d += "@@ -" + std::to_string(i * 10 + 1) + ",1 +" + std::to_string(i * 10 + 1) +
                 ",1 @@\n-a = b + c;\n+a = b + d;\n";
        }
        r.diff = d;
        records.push_back(r);
    }
    {
        std::string long_msg = "fix";
        for (int i = 0; i < 21; ++i) long_msg += " very";
        records.push_back(make_record("long", "p", 9, long_msg));
    }
    {
        auto r = make_record("noctx", "p", 10, "touch imports only");
        r.functions.clear();
        records.push_back(r);
    }
    // duplicates: same diff + normalized message, different timestamps
    records.push_back(make_record("dup_late", "p", 20, "Fix the parser"));

    FilterReport rep;
    auto kept = filter_commits(records, &rep);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].commit_id == "keep");
    CHECK(kept[0].timestamp == 5);
    CHECK(rep.dropped["merge"] == 1);
    CHECK(rep.dropped["empty"] == 1);
    CHECK(rep.dropped["chunks"] == 1);
    CHECK(rep.dropped["length"] == 1);
    CHECK(rep.dropped["empty_context"] == 1);
    CHECK(rep.dropped["duplicate"] == 1);
    CHECK(rep.kept == 1);

    // idempotent, and never increases the count
    FilterReport rep2;
    auto again = filter_commits(kept, &rep2);
    CHECK(again.size() == kept.size());
    CHECK(rep2.dropped.empty());
}

TEST_CASE("dedup keeps the earliest timestamp") {
    std::vector<CommitRecord> records = {make_record("b", "p", 20, "Fix the parser"),
                                         make_record("a", "p", 10, "Fix the parser")};
    auto kept = filter_commits(records);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].timestamp == 10);
}

TEST_CASE("split by_commit: seeded 80/10/10") {
    std::vector<CommitRecord> records;
    for (int i = 0; i < 100; ++i)
        records.push_back(make_record("c" + std::to_string(i), "p", i, "fix " + std::to_string(i)));
    SplitSpec spec{SplitStrategy::ByCommit, 42};
    auto s1 = split_dataset(records, spec);
    CHECK(s1.train.size() == 80);
    CHECK(s1.valid.size() == 10);
    CHECK(s1.test.size() == 10);
    // disjoint cover
    std::set<std::string> ids;
    for (const auto* part : {&s1.train, &s1.valid, &s1.test})
        for (const auto& r : *part) ids.insert(r.commit_id);
    CHECK(ids.size() == 100);
    // deterministic
    auto s2 = split_dataset(records, spec);
    for (std::size_t i = 0; i < 80; ++i) CHECK(s1.train[i].commit_id == s2.train[i].commit_id);
    // a different seed reorders
    auto s3 = split_dataset(records, {SplitStrategy::ByCommit, 43});
    bool differs = false;
    for (std::size_t i = 0; i < 80; ++i)
        if (s1.train[i].commit_id != s3.train[i].commit_id) differs = true;
    CHECK(differs);
}

TEST_CASE("split by_project: whole projects, >= 3 required") {
    std::vector<CommitRecord> records;
    const char* projects[5] = {"alpha", "beta", "gamma", "delta", "epsilon"};
    int sizes[5] = {40, 30, 15, 10, 5};
    int id = 0;
    for (int p = 0; p < 5; ++p)
        for (int i = 0; i < sizes[p]; ++i)
            records.push_back(make_record("c" + std::to_string(id++), projects[p], id, "fix"));
    auto s = split_dataset(records, {SplitStrategy::ByProject, 1});
    CHECK(s.train.size() + s.valid.size() + s.test.size() == 100);
    // no project straddles two splits
    for (const auto* part : {&s.train, &s.valid, &s.test}) {
        std::set<std::string> here;
        for (const auto& r : *part) here.insert(r.project);
        for (const auto* other : {&s.train, &s.valid, &s.test}) {
            if (other == part) continue;
            for (const auto& r : *other) CHECK(here.count(r.project) == 0);
        }
    }
    CHECK(s.train.size() >= s.valid.size());
    CHECK(s.train.size() >= s.test.size());

    std::vector<CommitRecord> two = {make_record("x", "p1", 1, "fix"),
                                     make_record("y", "p2", 2, "fix")};
    CHECK_THROWS_AS(split_dataset(two, {SplitStrategy::ByProject, 1}), TooFewProjects);
}

TEST_CASE("split by_timestamp: 10 records -> 7/1/2") {
    std::vector<CommitRecord> records;
    for (int i = 0; i < 10; ++i)
        records.push_back(make_record("c" + std::to_string(i), "p", 1000 - i * 10, "fix"));
    auto s = split_dataset(records, {SplitStrategy::ByTimestamp, 1});
    REQUIRE(s.train.size() == 7);
    REQUIRE(s.valid.size() == 1);
    REQUIRE(s.test.size() == 2);
    // chronological: every train ts <= valid ts <= every test ts
    for (const auto& r : s.train) CHECK(r.timestamp <= s.valid[0].timestamp);
    for (const auto& r : s.test) CHECK(r.timestamp >= s.valid[0].timestamp);
}

TEST_CASE("vocabulary reserved ids and OOV behavior") {
    Vocabulary v(Vocabulary::Kind::Target);
    CHECK(v.size() == 4);
    CHECK(v.decode(Vocabulary::kPad) == "<PAD>");
    CHECK(v.decode(Vocabulary::kUnk) == "<UNK>");
    CHECK(v.decode(Vocabulary::kSos) == "<SOS>");
    CHECK(v.decode(Vocabulary::kEos) == "<EOS>");
    v.add("fix");
    CHECK(v.encode("fix") == 4);
    CHECK(v.decode(4) == "fix");
    CHECK(v.encode("unseen") == Vocabulary::kUnk);
    CHECK_THROWS_AS(v.decode(99), ShapeMismatch);
}

TEST_CASE("build_vocab: closed node types, min-frequency 2") {
    std::vector<CommitRecord> records;
    // "onOrAfter" appears as a changed leaf in two training commits
    for (int i = 0; i < 2; ++i) {
        CommitRecord r = make_record("v" + std::to_string(i), "p", i, "fix parser fast");
        r.diff =
            "diff --git a/src/B.java b/src/B.java\n"
            "--- a/src/B.java\n"
            "+++ b/src/B.java\n"
            "@@ -1,3 +1,3 @@\n"
            " void f() {\n"
            "-    old1 = old2;\n"
            "+    onOrAfter = qq + rr;\n"
            " }\n";
        r.functions.clear();
        r.functions.push_back(
            {Polarity::Added, "void f() {\n    onOrAfter = qq + rr;\n}", "src/B.java"});
        records.push_back(r);
    }
    records.push_back(make_record("v2", "p", 5, "fix parser once"));

    auto vs = build_vocab(records, 1);
    CHECK(vs.node_type.size() == 44);
    for (int i = 0; i < kNodeTypeCount; ++i)
        CHECK(vs.node_type.encode(node_type_name(static_cast<NodeType>(i))) == 4 + i);

    for (const char* t : {"on", "or", "after", "qq", "rr"}) CHECK(vs.subtoken.contains(t));
    CHECK(vs.target.contains("fix"));
    CHECK(vs.target.contains("parser"));
    // "once" and "bug" appear once each -> below min frequency 2
    CHECK(vs.target.encode("once") == Vocabulary::kUnk);
    CHECK(vs.target.encode("bug") == Vocabulary::kUnk);
}

TEST_CASE("vocabulary save/load round trip") {
    Vocabulary v(Vocabulary::Kind::Subtoken);
    v.add("alpha");
    v.add("beta");
    auto path = (std::filesystem::temp_directory_path() / "atom_vocab.json").string();
    v.save(path);
    Vocabulary w = Vocabulary::load(path);
    CHECK(w.kind() == Vocabulary::Kind::Subtoken);
    CHECK(w.size() == v.size());
    CHECK(w.encode("beta") == v.encode("beta"));
    CHECK(w.content_hash() == v.content_hash());
}
