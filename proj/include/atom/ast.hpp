#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "atom/lexer.hpp"

namespace atom {

// Closed, versioned enumeration of non-leaf node types. Ids are stable.
enum class NodeType : int {
    CompilationUnit = 0,
    PackageDecl,
    ImportDecl,
    ClassDecl,
    FieldDecl,
    MethodDeclaration,
    ParameterList,
    Parameter,
    BlockStmt,
    IfStmt,
    ForStmt,
    WhileStmt,
    DoStmt,
    ReturnStmt,
    ExpressionStmt,
    TryStmt,
    CatchClause,
    FinallyClause,
    ThrowStmt,
    BreakStmt,
    ContinueStmt,
    LocalVarDecl,
    VariableDeclarator,
    AssignExpr,
    BinaryExpr,
    UnaryExpr,
    MethodCallExpr,
    ArgumentList,
    FieldAccess,
    ArrayAccess,
    ArrayInitializer,
    ObjectCreationExpr,
    ConditionalExpr,
    CastExpr,
    InstanceOfExpr,
    ParenExpr,
    NameExpr,
    LiteralExpr,
    TypeRef,
    UnknownStmt,
};

constexpr int kNodeTypeCount = 40;

const char* node_type_name(NodeType t);

struct AstNode {
    bool leaf = false;
    NodeType type = NodeType::UnknownStmt;  // meaningful iff !leaf
    std::string leaf_value;                 // meaningful iff leaf
    std::vector<std::unique_ptr<AstNode>> children;
    int start_line = 1;
    int end_line = 1;

    static std::unique_ptr<AstNode> make_leaf(std::string value, int line) {
        auto n = std::make_unique<AstNode>();
        n->leaf = true;
        n->leaf_value = std::move(value);
        n->start_line = n->end_line = line;
        return n;
    }
    static std::unique_ptr<AstNode> make(NodeType t) {
        auto n = std::make_unique<AstNode>();
        n->type = t;
        return n;
    }
};

enum class Polarity { Added, Deleted };

inline const char* polarity_name(Polarity p) { return p == Polarity::Added ? "added" : "deleted"; }

struct FunctionAst {
    std::string name;
    std::shared_ptr<AstNode> ast;  // rooted at a MethodDeclaration
    std::string file_path;
    Polarity polarity = Polarity::Added;
};

struct AstPath {
    std::string start_leaf;
    std::vector<NodeType> node_sequence;
    std::string end_leaf;

    AstPath reversed() const {
        AstPath r;
        r.start_leaf = end_leaf;
        r.end_leaf = start_leaf;
        r.node_sequence.assign(node_sequence.rbegin(), node_sequence.rend());
        return r;
    }
    // edges between the two leaves along the tree path
    int edge_count() const { return static_cast<int>(node_sequence.size()) + 1; }
};

struct PathContextSet {
    std::vector<AstPath> added;    // X+, at most the configured cap
    std::vector<AstPath> deleted;  // X-
};

struct ChangedLines {
    std::set<int> added;
    std::set<int> deleted;
};

inline constexpr int kMaxPathNodes = 12;
inline constexpr int kDefaultPathCap = 80;

// Parse a compilation unit or single-method text; root is a CompilationUnit.
// Unsupported constructs inside method bodies degrade to UnknownStmt.
std::shared_ptr<AstNode> parse_java(const std::string& source);

// First method declaration in the source.
FunctionAst parse_function(const std::string& source);

// Innermost method whose span contains `line` (1-based, file coordinates).
FunctionAst locate_function(const std::string& file_source, const std::string& file_path,
                            int line, Polarity polarity);

std::vector<const AstNode*> collect_leaves(const AstNode& root);
std::vector<const AstNode*> collect_methods(const AstNode& root);

// Unique tree path through the lowest common ancestor of two distinct leaves.
AstPath shortest_path(const AstNode& root, const AstNode* leaf_a, const AstNode* leaf_b);

PathContextSet extract_path_contexts(const std::vector<FunctionAst>& functions,
                                     const std::map<std::string, ChangedLines>& changed_lines,
                                     std::uint64_t seed,
                                     int max_path_nodes = kMaxPathNodes,
                                     int path_cap = kDefaultPathCap);

}  // namespace atom
