#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace atom {

enum class TokenKind {
    Identifier,
    Literal,
    Keyword,
    Operator,
    Punct,
    EndOfInput,
};

struct Token {
    std::string text;
    TokenKind kind = TokenKind::Identifier;
    int line = 1;  // 1-based
    int col = 1;
};

// Lexes the Java subset shared by diff tokenization and the AST parser.
// String/char literals keep their source spelling with the quotes stripped.
// When `lenient` is set, illegal bytes are folded into a single Literal token
// per run instead of raising LexError; `bad_byte_runs` reports how many.
std::vector<Token> lex_java(std::string_view source, bool lenient = false,
                            int* bad_byte_runs = nullptr);

bool is_java_keyword(std::string_view word);

}  // namespace atom
