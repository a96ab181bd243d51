#include "atom/ast.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "atom/errors.hpp"
#include "atom/rng.hpp"

namespace atom {

const char* node_type_name(NodeType t) {
    static const char* names[kNodeTypeCount] = {
        "CompilationUnit", "PackageDecl",   "ImportDecl",      "ClassDecl",
        "FieldDecl",       "MethodDeclaration", "ParameterList", "Parameter",
        "BlockStmt",       "IfStmt",        "ForStmt",         "WhileStmt",
        "DoStmt",          "ReturnStmt",    "ExpressionStmt",  "TryStmt",
        "CatchClause",     "FinallyClause", "ThrowStmt",       "BreakStmt",
        "ContinueStmt",    "LocalVarDecl",  "VariableDeclarator", "AssignExpr",
        "BinaryExpr",      "UnaryExpr",     "MethodCallExpr",  "ArgumentList",
        "FieldAccess",     "ArrayAccess",   "ArrayInitializer", "ObjectCreationExpr",
        "ConditionalExpr", "CastExpr",      "InstanceOfExpr",  "ParenExpr",
        "NameExpr",        "LiteralExpr",   "TypeRef",         "UnknownStmt",
    };
    return names[static_cast<int>(t)];
}

namespace {

using NodePtr = std::unique_ptr<AstNode>;

bool is_primitive_type(const std::string& s) {
    static const std::unordered_set<std::string> prim = {
        "void", "int", "long", "short", "byte", "char", "boolean", "float", "double"};
    return prim.count(s) > 0;
}

class Parser {
public:
    explicit Parser(const std::string& source) : tokens_(lex_java(source)) {
        long depth = 0;
        for (const auto& t : tokens_) {
            if (t.kind == TokenKind::Punct && t.text == "{") ++depth;
            if (t.kind == TokenKind::Punct && t.text == "}") --depth;
            if (depth < 0) throw UnbalancedBraces("unexpected '}'");
        }
        if (depth != 0) throw UnbalancedBraces("unbalanced braces");
    }

    NodePtr parse_unit() {
        auto root = AstNode::make(NodeType::CompilationUnit);
        int start = line();
        while (!at_end()) {
            if (is_kw("package") || is_kw("import")) {
                auto n = AstNode::make(is_kw("package") ? NodeType::PackageDecl
                                                        : NodeType::ImportDecl);
                int s = line();
                advance();
                while (!at_end() && !is_punct(";")) {
                    const Token& t = peek();
                    if (t.kind == TokenKind::Identifier) add_leaf(*n, t.text, t.line);
                    advance();
                }
                if (is_punct(";")) advance();
                finish(*n, s);
                root->children.push_back(std::move(n));
                continue;
            }
            std::size_t before = pos_;
            skip_modifiers();
            if (is_kw("class") || is_kw("interface") || is_kw("enum")) {
                root->children.push_back(parse_class());
            } else if (!at_end()) {
                // bare method (single-method text) or stray tokens
                auto member = parse_method_or_field();
                if (member) root->children.push_back(std::move(member));
            }
            if (pos_ == before && !at_end()) advance();  // guarantee progress
        }
        finish(*root, start);
        fix_spans(*root);
        return root;
    }

private:
    // --- token access ---
    const Token& peek(std::size_t k = 0) const {
        static const Token eof{"", TokenKind::EndOfInput, 0, 0};
        return pos_ + k < tokens_.size() ? tokens_[pos_ + k] : eof;
    }
    bool at_end() const { return pos_ >= tokens_.size(); }
    int line() const { return at_end() ? last_line_ : peek().line; }
    void advance() {
        if (!at_end()) {
            last_line_ = tokens_[pos_].line;
            ++pos_;
        }
    }
    bool is_kw(const char* s) const {
        return peek().kind == TokenKind::Keyword && peek().text == s;
    }
    bool is_punct(const char* s) const {
        return peek().kind == TokenKind::Punct && peek().text == s;
    }
    bool is_op(const char* s) const {
        return peek().kind == TokenKind::Operator && peek().text == s;
    }
    bool is_ident() const { return peek().kind == TokenKind::Identifier; }

    void add_leaf(AstNode& parent, const std::string& text, int ln) {
        parent.children.push_back(AstNode::make_leaf(text, ln));
    }
    void finish(AstNode& n, int start_line) {
        n.start_line = start_line;
        n.end_line = std::max(start_line, last_line_);
    }
    void fix_spans(AstNode& n) {
        for (auto& c : n.children) {
            fix_spans(*c);
            n.start_line = std::min(n.start_line, c->start_line);
            n.end_line = std::max(n.end_line, c->end_line);
        }
    }

    void skip_modifiers() {
        static const std::unordered_set<std::string> mods = {
            "public", "private",   "protected", "static",   "final",
            "abstract", "native",  "transient", "volatile", "synchronized", "strictfp"};
        for (;;) {
            if (peek().kind == TokenKind::Keyword && mods.count(peek().text)) {
                // 'synchronized' opening a block is a statement, not a modifier
                if (peek().text == "synchronized" && peek(1).kind == TokenKind::Punct &&
                    peek(1).text == "(")
                    return;
                advance();
            } else if (is_punct("@")) {  // annotation: @Name [ ( ... ) ]
                advance();
                if (is_ident()) advance();
                if (is_punct("(")) skip_balanced("(", ")");
            } else {
                return;
            }
        }
    }

    void skip_balanced(const char* open, const char* close) {
        int depth = 0;
        while (!at_end()) {
            if (is_punct(open)) ++depth;
            else if (is_punct(close)) {
                --depth;
                advance();
                if (depth == 0) return;
                continue;
            }
            advance();
        }
    }

    // skip generic argument lists: '<' ... '>' over operator tokens
    void skip_generics() {
        if (!(peek().kind == TokenKind::Operator && peek().text[0] == '<')) return;
        int depth = 0;
        while (!at_end()) {
            const std::string& t = peek().text;
            if (peek().kind == TokenKind::Operator) {
                for (char c : t) {
                    if (c == '<') ++depth;
                    if (c == '>') --depth;
                }
            }
            advance();
            if (depth <= 0) return;
        }
    }

    // --- types ---
    struct TypeInfo {
        std::string name;  // principal type token
        int name_line = 1;
        bool ok = false;
    };

    TypeInfo try_parse_type() {
        TypeInfo info;
        if (peek().kind == TokenKind::Keyword && is_primitive_type(peek().text)) {
            info.name = peek().text;
            info.name_line = peek().line;
            info.ok = true;
            advance();
        } else if (is_ident()) {
            info.name = peek().text;
            info.name_line = peek().line;
            info.ok = true;
            advance();
            while (is_punct(".") && peek(1).kind == TokenKind::Identifier) {
                advance();
                info.name = peek().text;  // rightmost simple name
                info.name_line = peek().line;
                advance();
            }
        } else {
            return info;
        }
        skip_generics();
        while (is_punct("[") && peek(1).kind == TokenKind::Punct && peek(1).text == "]") {
            advance();
            advance();
        }
        return info;
    }

    NodePtr type_ref(const TypeInfo& info) {
        auto n = AstNode::make(NodeType::TypeRef);
        add_leaf(*n, info.name, info.name_line);
        n->start_line = n->end_line = info.name_line;
        return n;
    }

    // --- declarations ---
    NodePtr parse_class() {
        auto n = AstNode::make(NodeType::ClassDecl);
        int s = line();
        advance();  // class/interface/enum
        if (is_ident()) {
            add_leaf(*n, peek().text, peek().line);
            advance();
        }
        skip_generics();
        while (!at_end() && !is_punct("{")) advance();  // extends/implements
        if (is_punct("{")) {
            advance();
            while (!at_end() && !is_punct("}")) {
                std::size_t before = pos_;
                skip_modifiers();
                if (is_kw("class") || is_kw("interface") || is_kw("enum")) {
                    n->children.push_back(parse_class());
                } else if (is_punct("{")) {  // instance/static initializer
                    n->children.push_back(parse_block());
                } else if (!is_punct("}")) {
                    auto member = parse_method_or_field();
                    if (member) n->children.push_back(std::move(member));
                }
                if (pos_ == before && !at_end() && !is_punct("}")) advance();
            }
            if (is_punct("}")) advance();
        }
        finish(*n, s);
        return n;
    }

    // method, constructor or field; nullptr when nothing recognizable
    NodePtr parse_method_or_field() {
        int s = line();
        // constructor: Name ( ... )
        if (is_ident() && peek(1).kind == TokenKind::Punct && peek(1).text == "(") {
            auto m = AstNode::make(NodeType::MethodDeclaration);
            add_leaf(*m, peek().text, peek().line);
            advance();
            parse_method_rest(*m);
            finish(*m, s);
            return m;
        }
        TypeInfo type = try_parse_type();
        if (!type.ok) return nullptr;
        if (!is_ident()) return nullptr;
        std::string name = peek().text;
        int name_line = peek().line;
        advance();
        if (is_punct("(")) {
            auto m = AstNode::make(NodeType::MethodDeclaration);
            m->children.push_back(type_ref(type));
            add_leaf(*m, name, name_line);
            parse_method_rest(*m);
            finish(*m, s);
            return m;
        }
        // field declaration
        auto f = AstNode::make(NodeType::FieldDecl);
        f->children.push_back(type_ref(type));
        parse_declarators(*f, name, name_line);
        if (is_punct(";")) advance();
        finish(*f, s);
        return f;
    }

    void parse_method_rest(AstNode& m) {
        auto params = AstNode::make(NodeType::ParameterList);
        int ps = line();
        advance();  // '('
        while (!at_end() && !is_punct(")")) {
            std::size_t before = pos_;
            if (is_kw("final")) advance();
            TypeInfo type = try_parse_type();
            if (type.ok && is_ident()) {
                auto p = AstNode::make(NodeType::Parameter);
                p->children.push_back(type_ref(type));
                add_leaf(*p, peek().text, peek().line);
                p->start_line = type.name_line;
                p->end_line = peek().line;
                advance();
                while (is_punct("[")) advance();
                while (is_punct("]")) advance();
                params->children.push_back(std::move(p));
            }
            if (is_punct(",")) advance();
            if (pos_ == before && !at_end() && !is_punct(")")) advance();
        }
        if (is_punct(")")) advance();
        finish(*params, ps);
        m.children.push_back(std::move(params));
        if (is_kw("throws")) {
            advance();
            while (is_ident() || is_punct(".") || is_punct(",")) advance();
        }
        if (is_punct("{")) {
            m.children.push_back(parse_block());
        } else if (is_punct(";")) {
            advance();  // abstract/interface method
        }
    }

    void parse_declarators(AstNode& parent, std::string first_name, int first_line) {
        for (;;) {
            auto d = AstNode::make(NodeType::VariableDeclarator);
            add_leaf(*d, first_name, first_line);
            d->start_line = d->end_line = first_line;
            while (is_punct("[") || is_punct("]")) advance();
            if (is_op("=")) {
                advance();
                d->children.push_back(parse_expression());
            }
            fix_spans(*d);
            parent.children.push_back(std::move(d));
            if (!is_punct(",")) break;
            advance();
            if (!is_ident()) break;
            first_name = peek().text;
            first_line = peek().line;
            advance();
        }
    }

    // --- statements ---
    NodePtr parse_block() {
        auto b = AstNode::make(NodeType::BlockStmt);
        int s = line();
        advance();  // '{'
        while (!at_end() && !is_punct("}")) {
            std::size_t before = pos_;
            b->children.push_back(parse_statement());
            if (pos_ == before && !at_end() && !is_punct("}")) advance();
        }
        if (is_punct("}")) advance();
        finish(*b, s);
        return b;
    }

    NodePtr parse_statement() {
        int s = line();
        if (is_punct("{")) return parse_block();
        if (is_punct(";")) {
            advance();
            auto n = AstNode::make(NodeType::ExpressionStmt);
            finish(*n, s);
            return n;
        }
        if (is_kw("if")) return parse_if();
        if (is_kw("for")) return parse_for();
        if (is_kw("while")) {
            auto n = AstNode::make(NodeType::WhileStmt);
            advance();
            if (is_punct("(")) {
                advance();
                n->children.push_back(parse_expression());
                if (is_punct(")")) advance();
            }
            n->children.push_back(parse_statement());
            finish(*n, s);
            return n;
        }
        if (is_kw("do")) {
            auto n = AstNode::make(NodeType::DoStmt);
            advance();
            n->children.push_back(parse_statement());
            if (is_kw("while")) {
                advance();
                if (is_punct("(")) {
                    advance();
                    n->children.push_back(parse_expression());
                    if (is_punct(")")) advance();
                }
            }
            if (is_punct(";")) advance();
            finish(*n, s);
            return n;
        }
        if (is_kw("return")) {
            auto n = AstNode::make(NodeType::ReturnStmt);
            advance();
            if (!is_punct(";") && !is_punct("}")) n->children.push_back(parse_expression());
            if (is_punct(";")) advance();
            finish(*n, s);
            return n;
        }
        if (is_kw("throw")) {
            auto n = AstNode::make(NodeType::ThrowStmt);
            advance();
            if (!is_punct(";")) n->children.push_back(parse_expression());
            if (is_punct(";")) advance();
            finish(*n, s);
            return n;
        }
        if (is_kw("break") || is_kw("continue")) {
            auto n = AstNode::make(is_kw("break") ? NodeType::BreakStmt
                                                  : NodeType::ContinueStmt);
            advance();
            if (is_ident()) advance();  // label
            if (is_punct(";")) advance();
            finish(*n, s);
            return n;
        }
        if (is_kw("try")) return parse_try();
        if (is_kw("class")) return parse_class();  // local class
        if (peek().kind == TokenKind::Keyword &&
            (peek().text == "switch" || peek().text == "synchronized" ||
             peek().text == "assert")) {
            return parse_unknown_stmt();
        }
        if (looks_like_decl()) return parse_local_var_decl();
        // expression statement
        auto n = AstNode::make(NodeType::ExpressionStmt);
        n->children.push_back(parse_expression());
        if (is_punct(";")) advance();
        finish(*n, s);
        return n;
    }

    NodePtr parse_if() {
        auto n = AstNode::make(NodeType::IfStmt);
        int s = line();
        advance();
        if (is_punct("(")) {
            advance();
            n->children.push_back(parse_expression());
            if (is_punct(")")) advance();
        }
        n->children.push_back(parse_statement());
        if (is_kw("else")) {
            advance();
            n->children.push_back(parse_statement());
        }
        finish(*n, s);
        return n;
    }

    NodePtr parse_for() {
        auto n = AstNode::make(NodeType::ForStmt);
        int s = line();
        advance();
        if (is_punct("(")) {
            advance();
            // for-each? scan for ':' before ';' at paren depth 1
            bool for_each = false;
            int depth = 1;
            for (std::size_t k = 0; pos_ + k < tokens_.size() && depth > 0; ++k) {
                const Token& t = tokens_[pos_ + k];
                if (t.kind != TokenKind::Punct) continue;
                if (t.text == "(") ++depth;
                else if (t.text == ")") --depth;
                else if (t.text == ";" && depth == 1) break;
                else if (t.text == ":" && depth == 1) {
                    for_each = true;
                    break;
                }
            }
            if (for_each) {
                auto decl = AstNode::make(NodeType::LocalVarDecl);
                int ds = line();
                TypeInfo type = try_parse_type();
                if (type.ok) decl->children.push_back(type_ref(type));
                if (is_ident()) {
                    auto d = AstNode::make(NodeType::VariableDeclarator);
                    add_leaf(*d, peek().text, peek().line);
                    d->start_line = d->end_line = peek().line;
                    advance();
                    decl->children.push_back(std::move(d));
                }
                finish(*decl, ds);
                n->children.push_back(std::move(decl));
                if (is_punct(":")) advance();
                n->children.push_back(parse_expression());
            } else {
                if (!is_punct(";")) {
                    if (looks_like_decl()) n->children.push_back(parse_local_var_decl_no_semi());
                    else n->children.push_back(parse_expression());
                }
                if (is_punct(";")) advance();
                if (!is_punct(";")) n->children.push_back(parse_expression());
                if (is_punct(";")) advance();
                while (!at_end() && !is_punct(")")) {
                    n->children.push_back(parse_expression());
                    if (is_punct(",")) advance();
                    else break;
                }
            }
            if (is_punct(")")) advance();
        }
        n->children.push_back(parse_statement());
        finish(*n, s);
        return n;
    }

    NodePtr parse_try() {
        auto n = AstNode::make(NodeType::TryStmt);
        int s = line();
        advance();
        if (is_punct("(")) skip_balanced("(", ")");  // try-with-resources header
        if (is_punct("{")) n->children.push_back(parse_block());
        while (is_kw("catch")) {
            auto c = AstNode::make(NodeType::CatchClause);
            int cs = line();
            advance();
            if (is_punct("(")) {
                advance();
                TypeInfo type = try_parse_type();
                auto p = AstNode::make(NodeType::Parameter);
                if (type.ok) p->children.push_back(type_ref(type));
                while (is_op("|")) {  // multi-catch: extra types
                    advance();
                    TypeInfo extra = try_parse_type();
                    if (extra.ok) p->children.push_back(type_ref(extra));
                }
                if (is_ident()) {
                    add_leaf(*p, peek().text, peek().line);
                    advance();
                }
                fix_spans(*p);
                c->children.push_back(std::move(p));
                if (is_punct(")")) advance();
            }
            if (is_punct("{")) c->children.push_back(parse_block());
            finish(*c, cs);
            n->children.push_back(std::move(c));
        }
        if (is_kw("finally")) {
            auto f = AstNode::make(NodeType::FinallyClause);
            int fs = line();
            advance();
            if (is_punct("{")) f->children.push_back(parse_block());
            finish(*f, fs);
            n->children.push_back(std::move(f));
        }
        finish(*n, s);
        return n;
    }

    // consume one unsupported construct; identifier/literal tokens become leaves
    NodePtr parse_unknown_stmt() {
        auto n = AstNode::make(NodeType::UnknownStmt);
        int s = line();
        int brace_depth = 0, paren_depth = 0;
        bool saw_block = false;
        while (!at_end()) {
            const Token& t = peek();
            if (t.kind == TokenKind::Punct) {
                if (t.text == "{") {
                    ++brace_depth;
                    saw_block = true;
                } else if (t.text == "}") {
                    if (brace_depth == 0) break;
                    --brace_depth;
                    advance();
                    if (brace_depth == 0 && saw_block) break;
                    continue;
                } else if (t.text == "(") {
                    ++paren_depth;
                } else if (t.text == ")") {
                    if (paren_depth > 0) --paren_depth;
                } else if (t.text == ";" && brace_depth == 0 && paren_depth == 0) {
                    advance();
                    break;
                }
            }
            if (t.kind == TokenKind::Identifier || t.kind == TokenKind::Literal)
                add_leaf(*n, t.text, t.line);
            advance();
        }
        finish(*n, s);
        return n;
    }

    bool looks_like_decl() const {
        const Token& t = peek();
        if (t.kind == TokenKind::Keyword && (is_primitive_type(t.text) || t.text == "final"))
            return true;
        if (t.kind != TokenKind::Identifier) return false;
        // Ident Ident, Ident<..> Ident, Ident[] Ident, Ident.Ident Ident
        std::size_t k = 1;
        int angle = 0;
        while (pos_ + k < tokens_.size() && k < 24) {
            const Token& u = tokens_[pos_ + k];
            if (u.kind == TokenKind::Operator) {
                bool generic = false;
                for (char c : u.text)
                    if (c == '<' || c == '>') generic = true;
                if (!generic) return false;
                for (char c : u.text) {
                    if (c == '<') ++angle;
                    if (c == '>') --angle;
                }
                ++k;
                continue;
            }
            if (angle > 0) {
                ++k;
                continue;
            }
            if (u.kind == TokenKind::Punct && u.text == "[" && pos_ + k + 1 < tokens_.size() &&
                tokens_[pos_ + k + 1].text == "]") {
                k += 2;
                continue;
            }
            if (u.kind == TokenKind::Punct && u.text == "." &&
                pos_ + k + 1 < tokens_.size() &&
                tokens_[pos_ + k + 1].kind == TokenKind::Identifier) {
                k += 2;
                continue;
            }
            return u.kind == TokenKind::Identifier;
        }
        return false;
    }

    NodePtr parse_local_var_decl() {
        auto n = parse_local_var_decl_no_semi();
        if (is_punct(";")) advance();
        fix_spans(*n);
        return n;
    }

    NodePtr parse_local_var_decl_no_semi() {
        auto n = AstNode::make(NodeType::LocalVarDecl);
        int s = line();
        if (is_kw("final")) advance();
        TypeInfo type = try_parse_type();
        if (type.ok) n->children.push_back(type_ref(type));
        if (is_ident()) {
            std::string name = peek().text;
            int name_line = peek().line;
            advance();
            parse_declarators(*n, name, name_line);
        }
        finish(*n, s);
        return n;
    }

    // --- expressions ---
    NodePtr parse_expression() { return parse_assignment(); }

    NodePtr parse_assignment() {
        auto lhs = parse_ternary();
        const Token& t = peek();
        if (t.kind == TokenKind::Operator) {
            const std::string& op = t.text;
            const bool is_assign =
                op == "=" ||
                (op.size() >= 2 && op.back() == '=' && op != "==" && op != "!=" &&
                 op != "<=" && op != ">=");
            if (is_assign) {
                auto n = AstNode::make(NodeType::AssignExpr);
                int s = lhs->start_line;
                n->children.push_back(std::move(lhs));
                advance();
                n->children.push_back(parse_assignment());
                finish(*n, s);
                fix_spans(*n);
                return n;
            }
            if (op == "->") {  // lambda: outside the subset
                auto n = AstNode::make(NodeType::UnknownStmt);
                int s = lhs->start_line;
                n->children.push_back(std::move(lhs));
                advance();
                if (is_punct("{")) n->children.push_back(parse_block());
                else n->children.push_back(parse_expression());
                finish(*n, s);
                fix_spans(*n);
                return n;
            }
        }
        return lhs;
    }

    NodePtr parse_ternary() {
        auto c = parse_binary(0);
        if (is_op("?")) {
            auto n = AstNode::make(NodeType::ConditionalExpr);
            int s = c->start_line;
            n->children.push_back(std::move(c));
            advance();
            n->children.push_back(parse_expression());
            if (is_punct(":")) advance();
            n->children.push_back(parse_ternary());
            finish(*n, s);
            fix_spans(*n);
            return n;
        }
        return c;
    }

    static int binary_precedence(const Token& t) {
        if (t.kind == TokenKind::Keyword && t.text == "instanceof") return 6;
        if (t.kind != TokenKind::Operator) return -1;
        const std::string& op = t.text;
        if (op == "||") return 0;
        if (op == "&&") return 1;
        if (op == "|") return 2;
        if (op == "^") return 3;
        if (op == "&") return 4;
        if (op == "==" || op == "!=") return 5;
        if (op == "<" || op == ">" || op == "<=" || op == ">=") return 6;
        if (op == "<<" || op == ">>" || op == ">>>") return 7;
        if (op == "+" || op == "-") return 8;
        if (op == "*" || op == "/" || op == "%") return 9;
        return -1;
    }

    NodePtr parse_binary(int min_prec) {
        auto lhs = parse_unary();
        for (;;) {
            int prec = binary_precedence(peek());
            if (prec < min_prec) return lhs;
            if (is_kw("instanceof")) {
                auto n = AstNode::make(NodeType::InstanceOfExpr);
                int s = lhs->start_line;
                n->children.push_back(std::move(lhs));
                advance();
                TypeInfo type = try_parse_type();
                if (type.ok) n->children.push_back(type_ref(type));
                finish(*n, s);
                fix_spans(*n);
                lhs = std::move(n);
                continue;
            }
            auto n = AstNode::make(NodeType::BinaryExpr);
            int s = lhs->start_line;
            n->children.push_back(std::move(lhs));
            advance();
            n->children.push_back(parse_binary(prec + 1));
            finish(*n, s);
            fix_spans(*n);
            lhs = std::move(n);
        }
    }

    NodePtr parse_unary() {
        const Token& t = peek();
        if (t.kind == TokenKind::Operator &&
            (t.text == "!" || t.text == "-" || t.text == "+" || t.text == "~" ||
             t.text == "++" || t.text == "--")) {
            auto n = AstNode::make(NodeType::UnaryExpr);
            int s = t.line;
            advance();
            n->children.push_back(parse_unary());
            finish(*n, s);
            fix_spans(*n);
            return n;
        }
        if (is_kw("new")) return parse_new();
        // primitive cast: ( int ) expr
        if (is_punct("(") && peek(1).kind == TokenKind::Keyword &&
            is_primitive_type(peek(1).text) && peek(2).kind == TokenKind::Punct &&
            peek(2).text == ")") {
            auto n = AstNode::make(NodeType::CastExpr);
            int s = line();
            advance();
            auto tr = AstNode::make(NodeType::TypeRef);
            add_leaf(*tr, peek().text, peek().line);
            tr->start_line = tr->end_line = peek().line;
            n->children.push_back(std::move(tr));
            advance();
            advance();  // ')'
            n->children.push_back(parse_unary());
            finish(*n, s);
            fix_spans(*n);
            return n;
        }
        return parse_postfix();
    }

    NodePtr parse_new() {
        auto n = AstNode::make(NodeType::ObjectCreationExpr);
        int s = line();
        advance();  // new
        TypeInfo type = try_parse_type();
        if (type.ok) n->children.push_back(type_ref(type));
        if (is_punct("(")) {
            n->children.push_back(parse_arguments());
            if (is_punct("{")) {  // anonymous class body: outside the subset
                auto body = AstNode::make(NodeType::UnknownStmt);
                int bs = line();
                int depth = 0;
                while (!at_end()) {
                    if (is_punct("{")) ++depth;
                    if (is_punct("}")) {
                        --depth;
                        const Token& tok = peek();
                        (void)tok;
                        advance();
                        if (depth == 0) break;
                        continue;
                    }
                    if (peek().kind == TokenKind::Identifier ||
                        peek().kind == TokenKind::Literal)
                        add_leaf(*body, peek().text, peek().line);
                    advance();
                }
                finish(*body, bs);
                n->children.push_back(std::move(body));
            }
        } else {
            while (is_punct("[")) {  // array creation
                advance();
                if (!is_punct("]")) n->children.push_back(parse_expression());
                if (is_punct("]")) advance();
            }
            if (is_punct("{")) n->children.push_back(parse_array_initializer());
        }
        finish(*n, s);
        fix_spans(*n);
        return n;
    }

    NodePtr parse_array_initializer() {
        auto n = AstNode::make(NodeType::ArrayInitializer);
        int s = line();
        advance();  // '{'
        while (!at_end() && !is_punct("}")) {
            std::size_t before = pos_;
            if (is_punct("{")) n->children.push_back(parse_array_initializer());
            else n->children.push_back(parse_expression());
            if (is_punct(",")) advance();
            if (pos_ == before && !at_end() && !is_punct("}")) advance();
        }
        if (is_punct("}")) advance();
        finish(*n, s);
        return n;
    }

    NodePtr parse_arguments() {
        auto n = AstNode::make(NodeType::ArgumentList);
        int s = line();
        advance();  // '('
        while (!at_end() && !is_punct(")")) {
            std::size_t before = pos_;
            n->children.push_back(parse_expression());
            if (is_punct(",")) advance();
            if (pos_ == before && !at_end() && !is_punct(")")) advance();
        }
        if (is_punct(")")) advance();
        finish(*n, s);
        return n;
    }

    NodePtr parse_postfix() {
        auto e = parse_primary();
        for (;;) {
            if (is_punct(".") && peek(1).kind == TokenKind::Identifier) {
                const Token& name = peek(1);
                bool call = pos_ + 2 < tokens_.size() &&
                            tokens_[pos_ + 2].kind == TokenKind::Punct &&
                            tokens_[pos_ + 2].text == "(";
                auto n = AstNode::make(call ? NodeType::MethodCallExpr : NodeType::FieldAccess);
                int s = e->start_line;
                n->children.push_back(std::move(e));
                advance();  // '.'
                add_leaf(*n, name.text, name.line);
                advance();  // name
                if (call) n->children.push_back(parse_arguments());
                finish(*n, s);
                fix_spans(*n);
                e = std::move(n);
                continue;
            }
            if (is_punct("(") && e->leaf == false && e->type == NodeType::NameExpr) {
                auto n = AstNode::make(NodeType::MethodCallExpr);
                int s = e->start_line;
                // the simple name becomes the call's name leaf
                if (!e->children.empty() && e->children[0]->leaf) {
                    n->children.push_back(std::move(e->children[0]));
                }
                n->children.push_back(parse_arguments());
                finish(*n, s);
                fix_spans(*n);
                e = std::move(n);
                continue;
            }
            if (is_punct("[")) {
                auto n = AstNode::make(NodeType::ArrayAccess);
                int s = e->start_line;
                n->children.push_back(std::move(e));
                advance();
                if (!is_punct("]")) n->children.push_back(parse_expression());
                if (is_punct("]")) advance();
                finish(*n, s);
                fix_spans(*n);
                e = std::move(n);
                continue;
            }
            if (is_op("++") || is_op("--")) {
                auto n = AstNode::make(NodeType::UnaryExpr);
                int s = e->start_line;
                n->children.push_back(std::move(e));
                advance();
                finish(*n, s);
                fix_spans(*n);
                e = std::move(n);
                continue;
            }
            return e;
        }
    }

    NodePtr parse_primary() {
        const Token& t = peek();
        if (t.kind == TokenKind::Literal) {
            auto n = AstNode::make(NodeType::LiteralExpr);
            add_leaf(*n, t.text, t.line);
            n->start_line = n->end_line = t.line;
            advance();
            return n;
        }
        if (t.kind == TokenKind::Identifier ||
            (t.kind == TokenKind::Keyword && (t.text == "this" || t.text == "super"))) {
            auto n = AstNode::make(NodeType::NameExpr);
            add_leaf(*n, t.text, t.line);
            n->start_line = n->end_line = t.line;
            advance();
            return n;
        }
        if (is_punct("(")) {
            auto n = AstNode::make(NodeType::ParenExpr);
            int s = t.line;
            advance();
            if (!is_punct(")")) n->children.push_back(parse_expression());
            if (is_punct(")")) advance();
            finish(*n, s);
            fix_spans(*n);
            return n;
        }
        if (is_punct("{")) return parse_array_initializer();
        // subset gap: consume one token so the parser always makes progress
        auto n = AstNode::make(NodeType::UnknownStmt);
        n->start_line = n->end_line = t.line == 0 ? last_line_ : t.line;
        if (t.kind == TokenKind::Identifier || t.kind == TokenKind::Literal)
            add_leaf(*n, t.text, t.line);
        advance();
        return n;
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
    int last_line_ = 1;
};

std::unique_ptr<AstNode> deep_copy(const AstNode& n) {
    auto c = std::make_unique<AstNode>();
    c->leaf = n.leaf;
    c->type = n.type;
    c->leaf_value = n.leaf_value;
    c->start_line = n.start_line;
    c->end_line = n.end_line;
    for (const auto& ch : n.children) c->children.push_back(deep_copy(*ch));
    return c;
}

std::string method_name(const AstNode& method) {
    for (const auto& c : method.children)
        if (c->leaf) return c->leaf_value;
    return {};
}

void collect_leaves_impl(const AstNode& n, std::vector<const AstNode*>& out) {
    if (n.leaf) {
        out.push_back(&n);
        return;
    }
    for (const auto& c : n.children) collect_leaves_impl(*c, out);
}

void collect_methods_impl(const AstNode& n, std::vector<const AstNode*>& out) {
    if (!n.leaf && n.type == NodeType::MethodDeclaration) out.push_back(&n);
    if (!n.leaf)
        for (const auto& c : n.children) collect_methods_impl(*c, out);
}

}  // namespace

std::shared_ptr<AstNode> parse_java(const std::string& source) {
    Parser p(source);
    return std::shared_ptr<AstNode>(p.parse_unit().release());
}

FunctionAst parse_function(const std::string& source) {
    auto root = parse_java(source);
    auto methods = collect_methods(*root);
    if (methods.empty()) throw UnbalancedBraces("no method declaration found");
    FunctionAst f;
    f.ast = std::shared_ptr<AstNode>(deep_copy(*methods.front()).release());
    f.name = method_name(*f.ast);
    return f;
}

std::vector<const AstNode*> collect_leaves(const AstNode& root) {
    std::vector<const AstNode*> out;
    collect_leaves_impl(root, out);
    return out;
}

std::vector<const AstNode*> collect_methods(const AstNode& root) {
    std::vector<const AstNode*> out;
    collect_methods_impl(root, out);
    return out;
}

FunctionAst locate_function(const std::string& file_source, const std::string& file_path,
                            int line, Polarity polarity) {
    auto root = parse_java(file_source);
    auto methods = collect_methods(*root);
    const AstNode* best = nullptr;
    for (const AstNode* m : methods) {
        if (line < m->start_line || line > m->end_line) continue;
        // innermost: smallest containing span, later start wins ties
        if (!best || (m->end_line - m->start_line) < (best->end_line - best->start_line) ||
            ((m->end_line - m->start_line) == (best->end_line - best->start_line) &&
             m->start_line > best->start_line)) {
            best = m;
        }
    }
    if (!best)
        throw NoEnclosingFunction("line " + std::to_string(line) + " of " + file_path +
                                  " is outside any method");
    FunctionAst f;
    f.ast = std::shared_ptr<AstNode>(deep_copy(*best).release());
    f.name = method_name(*f.ast);
    f.file_path = file_path;
    f.polarity = polarity;
    return f;
}

AstPath shortest_path(const AstNode& root, const AstNode* leaf_a, const AstNode* leaf_b) {
    std::unordered_map<const AstNode*, const AstNode*> parent;
    std::vector<const AstNode*> stack = {&root};
    while (!stack.empty()) {
        const AstNode* n = stack.back();
        stack.pop_back();
        for (const auto& c : n->children) {
            parent[c.get()] = n;
            stack.push_back(c.get());
        }
    }
    auto chain_to_root = [&](const AstNode* n) {
        std::vector<const AstNode*> chain;  // n, parent(n), ..., root
        const AstNode* cur = n;
        while (cur) {
            chain.push_back(cur);
            if (cur == &root) return chain;
            auto it = parent.find(cur);
            if (it == parent.end()) return std::vector<const AstNode*>{};
            cur = it->second;
        }
        return chain;
    };
    auto ca = chain_to_root(leaf_a);
    auto cb = chain_to_root(leaf_b);
    if (ca.empty() || !leaf_a->leaf) throw LeafNotInTree("start leaf not in tree");
    if (cb.empty() || !leaf_b->leaf) throw LeafNotInTree("end leaf not in tree");

    // strip the common suffix down to the lowest common ancestor
    std::size_t ia = ca.size(), ib = cb.size();
    while (ia > 0 && ib > 0 && ca[ia - 1] == cb[ib - 1]) {
        --ia;
        --ib;
    }
    const AstNode* lca = ca[ia];  // == cb[ib]; both chains share it one step up

    AstPath path;
    path.start_leaf = leaf_a->leaf_value;
    path.end_leaf = leaf_b->leaf_value;
    for (std::size_t i = 1; i < ia; ++i) path.node_sequence.push_back(ca[i]->type);
    path.node_sequence.push_back(lca->type);
    for (std::size_t i = ib; i >= 2; --i) path.node_sequence.push_back(cb[i - 1]->type);
    return path;
}

PathContextSet extract_path_contexts(const std::vector<FunctionAst>& functions,
                                     const std::map<std::string, ChangedLines>& changed_lines,
                                     std::uint64_t seed, int max_path_nodes, int path_cap) {
    struct Cand {
        std::string file;
        int func_idx;
        int i;
        int j;
        AstPath path;
    };
    std::vector<Cand> added_c, deleted_c;

    int func_idx = 0;
    for (const auto& f : functions) {
        auto it = changed_lines.find(f.file_path);
        if (it == changed_lines.end()) {
            ++func_idx;
            continue;
        }
        const std::set<int>& lines =
            f.polarity == Polarity::Added ? it->second.added : it->second.deleted;
        auto leaves = collect_leaves(*f.ast);
        std::vector<int> changed_leaf_idx;
        for (int li = 0; li < static_cast<int>(leaves.size()); ++li) {
            for (int ln = leaves[li]->start_line; ln <= leaves[li]->end_line; ++ln) {
                if (lines.count(ln)) {
                    changed_leaf_idx.push_back(li);
                    break;
                }
            }
        }
        auto& bucket = f.polarity == Polarity::Added ? added_c : deleted_c;
        for (std::size_t a = 0; a < changed_leaf_idx.size(); ++a) {
            for (std::size_t b = a + 1; b < changed_leaf_idx.size(); ++b) {
                AstPath p = shortest_path(*f.ast, leaves[changed_leaf_idx[a]],
                                          leaves[changed_leaf_idx[b]]);
                if (static_cast<int>(p.node_sequence.size()) > max_path_nodes) continue;
                bucket.push_back(
                    {f.file_path, func_idx, changed_leaf_idx[a], changed_leaf_idx[b], std::move(p)});
            }
        }
        ++func_idx;
    }

    auto finalize = [&](std::vector<Cand>& cands, const char* stream) {
        std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            return std::tie(a.file, a.func_idx, a.i, a.j) <
                   std::tie(b.file, b.func_idx, b.i, b.j);
        });
        std::vector<AstPath> out;
        if (static_cast<int>(cands.size()) > path_cap) {
            Rng rng(seed, stream);
            auto picked = rng.sample_without_replacement(cands.size(),
                                                         static_cast<std::size_t>(path_cap));
            std::sort(picked.begin(), picked.end());
            for (std::size_t idx : picked) out.push_back(cands[idx].path);
        } else {
            for (auto& c : cands) out.push_back(std::move(c.path));
        }
        return out;
    };

    PathContextSet ctx;
    ctx.added = finalize(added_c, "paths.added");
    ctx.deleted = finalize(deleted_c, "paths.deleted");
    if (ctx.added.empty() && ctx.deleted.empty())
        throw EmptyContext("no AST paths in either polarity");
    return ctx;
}

}  // namespace atom
