#include "atom/lexer.hpp"

#include <array>
#include <cctype>
#include <unordered_set>

#include "atom/errors.hpp"

namespace atom {

namespace {

const std::unordered_set<std::string_view>& keyword_set() {
    static const std::unordered_set<std::string_view> kw = {
        "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char",
        "class", "const", "continue", "default", "do", "double", "else", "enum",
        "extends", "final", "finally", "float", "for", "goto", "if", "implements",
        "import", "instanceof", "int", "interface", "long", "native", "new",
        "package", "private", "protected", "public", "return", "short", "static",
        "strictfp", "super", "switch", "synchronized", "this", "throw", "throws",
        "transient", "try", "void", "volatile", "while",
    };
    return kw;
}

bool is_ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

bool is_op_char(char c) {
    static const std::string ops = "+-*/%=<>!&|^~?";
    return ops.find(c) != std::string::npos;
}

bool is_punct_char(char c) {
    static const std::string punct = "(){}[];,.:@";
    return punct.find(c) != std::string::npos;
}

}  // namespace

bool is_java_keyword(std::string_view word) { return keyword_set().count(word) > 0; }

std::vector<Token> lex_java(std::string_view src, bool lenient, int* bad_byte_runs) {
    std::vector<Token> out;
    if (bad_byte_runs) *bad_byte_runs = 0;
    std::size_t i = 0;
    int line = 1, col = 1;

    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n; ++k) {
            if (src[i + k] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        i += n;
    };

    while (i < src.size()) {
        char c = src[i];
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            advance(1);
            continue;
        }
        // line comment
        if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
            while (i < src.size() && src[i] != '\n') advance(1);
            continue;
        }
        // block comment
        if (c == '/' && i + 1 < src.size() && src[i + 1] == '*') {
            advance(2);
            while (i + 1 < src.size() && !(src[i] == '*' && src[i + 1] == '/')) advance(1);
            if (i + 1 < src.size()) advance(2);
            else i = src.size();
            continue;
        }
        int tline = line, tcol = col;
        if (is_ident_start(c)) {
            std::size_t j = i;
            while (j < src.size() && is_ident_char(src[j])) ++j;
            std::string word(src.substr(i, j - i));
            TokenKind kind = TokenKind::Identifier;
            if (is_java_keyword(word)) kind = TokenKind::Keyword;
            if (word == "true" || word == "false" || word == "null") kind = TokenKind::Literal;
            out.push_back({std::move(word), kind, tline, tcol});
            advance(j - i);
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t j = i;
            while (j < src.size() &&
                   (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_' ||
                    (src[j] == '.' && j + 1 < src.size() &&
                     std::isdigit(static_cast<unsigned char>(src[j + 1]))))) {
                ++j;
            }
            out.push_back({std::string(src.substr(i, j - i)), TokenKind::Literal, tline, tcol});
            advance(j - i);
            continue;
        }
        if (c == '"' || c == '\'') {
            char quote = c;
            std::size_t j = i + 1;
            std::string body;
            bool closed = false;
            while (j < src.size()) {
                if (src[j] == '\\' && j + 1 < src.size()) {
                    body += src[j];
                    body += src[j + 1];
                    j += 2;
                    continue;
                }
                if (src[j] == quote) {
                    closed = true;
                    ++j;
                    break;
                }
                if (src[j] == '\n') break;  // unterminated on this line
                body += src[j];
                ++j;
            }
            if (!closed && !lenient) throw LexError("unterminated string literal", tline, tcol);
            out.push_back({std::move(body), TokenKind::Literal, tline, tcol});
            advance(j - i);
            continue;
        }
        if (is_op_char(c)) {
            std::size_t j = i;
            while (j < src.size() && is_op_char(src[j]) && j - i < 3) ++j;
            out.push_back({std::string(src.substr(i, j - i)), TokenKind::Operator, tline, tcol});
            advance(j - i);
            continue;
        }
        if (is_punct_char(c)) {
            out.push_back({std::string(1, c), TokenKind::Punct, tline, tcol});
            advance(1);
            continue;
        }
        // unknown byte
        if (!lenient) throw LexError("illegal character", tline, tcol);
        std::size_t j = i;
        while (j < src.size() && !std::isspace(static_cast<unsigned char>(src[j])) &&
               !is_ident_start(src[j]) && !std::isdigit(static_cast<unsigned char>(src[j])) &&
               !is_op_char(src[j]) && !is_punct_char(src[j]) && src[j] != '"' && src[j] != '\'') {
            ++j;
        }
        out.push_back({std::string(src.substr(i, j - i)), TokenKind::Literal, tline, tcol});
        if (bad_byte_runs) ++*bad_byte_runs;
        advance(j - i);
    }
    return out;
}

}  // namespace atom
