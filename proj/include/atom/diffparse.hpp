#pragma once

#include <string>
#include <vector>

#include "atom/lexer.hpp"

namespace atom {

struct RawDiff {
    std::string text;
};

// One body line of a hunk, tag is ' ', '+' or '-'.
struct HunkLine {
    char tag;
    std::string text;
};

struct Hunk {
    int old_start = 1;
    int old_count = 0;
    int new_start = 1;
    int new_count = 0;
    std::vector<HunkLine> lines;  // in source order

    std::vector<std::string> deleted_lines() const;
    std::vector<std::string> added_lines() const;
    std::vector<std::string> context_lines() const;
    // Line numbers of '+' lines in the new file / '-' lines in the old file.
    std::vector<int> added_line_numbers() const;
    std::vector<int> deleted_line_numbers() const;
};

struct DiffChunk {
    std::string file_path;  // b-side path, "b/" prefix stripped
    bool is_binary = false;
    std::vector<Hunk> hunks;
};

struct ChangeToken {
    std::string text;
    TokenKind kind;
};

// W+ / W-: the added and deleted token groups of a diff.
struct TokenGroups {
    std::vector<ChangeToken> added;
    std::vector<ChangeToken> deleted;
    int unlexable_runs = 0;  // warning channel
};

std::vector<DiffChunk> parse_diff(const RawDiff& raw);

// Number of hunks across all files; input to the dataset chunk filter.
int count_chunks(const RawDiff& raw);

// Lex '-'/'+' lines into W- / W+. Punctuation is dropped; non-.java file
// sections contribute no tokens.
TokenGroups tokenize_changes(const std::vector<DiffChunk>& chunks);

bool is_java_path(const std::string& path);

}  // namespace atom
