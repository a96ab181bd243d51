#include "atom/diffparse.hpp"

#include <cctype>
#include <sstream>

#include "atom/errors.hpp"

namespace atom {

namespace {

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            if (!cur.empty() && cur.back() == '\r') cur.pop_back();  // CRLF -> LF
            lines.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) {
        if (cur.back() == '\r') cur.pop_back();
        lines.push_back(cur);
    }
    return lines;
}

bool starts_with(const std::string& s, const char* prefix) {
    return s.rfind(prefix, 0) == 0;
}

// "@@ -a,b +c,d @@ trailing" (counts optional, default 1).
bool parse_hunk_header(const std::string& line, Hunk& h) {
    std::size_t i = 2;
    auto skip_ws = [&] { while (i < line.size() && line[i] == ' ') ++i; };
    auto read_int = [&](int& out) -> bool {
        if (i >= line.size() || !std::isdigit(static_cast<unsigned char>(line[i]))) return false;
        long v = 0;
        while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) {
            v = v * 10 + (line[i] - '0');
            ++i;
        }
        out = static_cast<int>(v);
        return true;
    };
    skip_ws();
    if (i >= line.size() || line[i] != '-') return false;
    ++i;
    if (!read_int(h.old_start)) return false;
    h.old_count = 1;
    if (i < line.size() && line[i] == ',') {
        ++i;
        if (!read_int(h.old_count)) return false;
    }
    skip_ws();
    if (i >= line.size() || line[i] != '+') return false;
    ++i;
    if (!read_int(h.new_start)) return false;
    h.new_count = 1;
    if (i < line.size() && line[i] == ',') {
        ++i;
        if (!read_int(h.new_count)) return false;
    }
    skip_ws();
    return i + 1 < line.size() + 1 && line.compare(i, 2, "@@") == 0;
}

// Extract the b-side path from "diff --git a/x b/y".
std::string header_path(const std::string& line) {
    std::size_t pos = line.rfind(" b/");
    if (pos != std::string::npos) return line.substr(pos + 3);
    // fall back to the last whitespace-separated field
    std::size_t sp = line.find_last_of(' ');
    return sp == std::string::npos ? std::string() : line.substr(sp + 1);
}

}  // namespace

std::vector<std::string> Hunk::deleted_lines() const {
    std::vector<std::string> v;
    for (const auto& l : lines)
        if (l.tag == '-') v.push_back(l.text);
    return v;
}

std::vector<std::string> Hunk::added_lines() const {
    std::vector<std::string> v;
    for (const auto& l : lines)
        if (l.tag == '+') v.push_back(l.text);
    return v;
}

std::vector<std::string> Hunk::context_lines() const {
    std::vector<std::string> v;
    for (const auto& l : lines)
        if (l.tag == ' ') v.push_back(l.text);
    return v;
}

std::vector<int> Hunk::added_line_numbers() const {
    std::vector<int> v;
    int n = new_start;
    for (const auto& l : lines) {
        if (l.tag == '+') v.push_back(n);
        if (l.tag == '+' || l.tag == ' ') ++n;
    }
    return v;
}

std::vector<int> Hunk::deleted_line_numbers() const {
    std::vector<int> v;
    int n = old_start;
    for (const auto& l : lines) {
        if (l.tag == '-') v.push_back(n);
        if (l.tag == '-' || l.tag == ' ') ++n;
    }
    return v;
}

bool is_java_path(const std::string& path) {
    return path.size() > 5 && path.compare(path.size() - 5, 5, ".java") == 0;
}

std::vector<DiffChunk> parse_diff(const RawDiff& raw) {
    const auto lines = split_lines(raw.text);

    bool has_git_header = false, has_hunk = false;
    for (const auto& l : lines) {
        if (starts_with(l, "diff --git")) has_git_header = true;
        if (starts_with(l, "@@")) has_hunk = true;
    }
    if (!has_git_header && !has_hunk)
        throw MalformedDiff("no 'diff --git' header and no '@@' hunk found");

    std::vector<DiffChunk> chunks;
    DiffChunk* cur = nullptr;
    Hunk* cur_hunk = nullptr;
    int old_left = 0, new_left = 0;

    auto start_bare_chunk = [&] {
        chunks.push_back(DiffChunk{});
        cur = &chunks.back();
    };

    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string& l = lines[i];
        if (starts_with(l, "diff --git")) {
            chunks.push_back(DiffChunk{});
            cur = &chunks.back();
            cur->file_path = header_path(l);
            cur_hunk = nullptr;
            continue;
        }
        if (starts_with(l, "Binary files") || starts_with(l, "GIT binary patch")) {
            if (cur) cur->is_binary = true;
            cur_hunk = nullptr;
            continue;
        }
        if (starts_with(l, "@@")) {
            if (!cur) start_bare_chunk();
            Hunk h;
            if (!parse_hunk_header(l, h))
                throw BadHunkHeader("unparseable hunk header '" + l + "'", static_cast<int>(i));
            cur->hunks.push_back(h);
            cur_hunk = &cur->hunks.back();
            old_left = h.old_count;
            new_left = h.new_count;
            continue;
        }
        if (!cur_hunk) continue;  // file headers (---/+++/index/...) and stray text
        if (starts_with(l, "\\ No newline")) continue;
        if (!l.empty() && l[0] == '-' && old_left > 0) {
            cur_hunk->lines.push_back({'-', l.substr(1)});
            --old_left;
        } else if (!l.empty() && l[0] == '+' && new_left > 0) {
            cur_hunk->lines.push_back({'+', l.substr(1)});
            --new_left;
        } else if ((l.empty() || l[0] == ' ') && (old_left > 0 || new_left > 0)) {
            cur_hunk->lines.push_back({' ', l.empty() ? l : l.substr(1)});
            if (old_left > 0) --old_left;
            if (new_left > 0) --new_left;
        } else {
            cur_hunk = nullptr;  // hunk body exhausted
        }
    }
    return chunks;
}

int count_chunks(const RawDiff& raw) {
    int n = 0;
    for (const auto& c : parse_diff(raw)) n += static_cast<int>(c.hunks.size());
    return n;
}

TokenGroups tokenize_changes(const std::vector<DiffChunk>& chunks) {
    TokenGroups groups;
    auto lex_into = [&](const std::string& line, std::vector<ChangeToken>& out) {
        int bad = 0;
        for (const auto& tok : lex_java(line, /*lenient=*/true, &bad)) {
            if (tok.kind == TokenKind::Punct) continue;
            if (tok.text.empty()) continue;
            out.push_back({tok.text, tok.kind});
        }
        groups.unlexable_runs += bad;
    };
    for (const auto& chunk : chunks) {
        // bare-hunk diffs carry no path; treat them as Java
        if (chunk.is_binary || (!chunk.file_path.empty() && !is_java_path(chunk.file_path))) continue;
        for (const auto& hunk : chunk.hunks) {
            for (const auto& l : hunk.lines) {
                if (l.tag == '-') lex_into(l.text, groups.deleted);
                else if (l.tag == '+') lex_into(l.text, groups.added);
            }
        }
    }
    return groups;
}

}  // namespace atom
