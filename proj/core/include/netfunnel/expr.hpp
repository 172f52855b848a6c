#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "netfunnel/errors.hpp"

namespace netfunnel {

enum class ExprKind : std::uint8_t {
    Literal,
    Variable,
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Sin,
    Cos,
    Tan,
    Exp,
    Abs,
    Min,
    Max,
    If,
};

enum class CmpOp : std::uint8_t { Lt, Le, Gt, Ge };

struct ExprNode {
    ExprKind kind = ExprKind::Literal;
    CmpOp cmp = CmpOp::Lt;  // If nodes only
    double value = 0.0;     // Literal nodes only
    int a = -1, b = -1;     // operands; If: guard lhs/rhs
    int c = -1, d = -1;     // If: then/else branches
    std::string name;       // Variable nodes only
};

/// Immutable expression tree stored as a flat node vector. Evaluation is
/// reentrant; all state lives in the caller's bindings.
class Expr {
public:
    Expr() = default;

    /// Grammar: + - * / ^ with standard precedence (^ > unary- > * / > + -),
    /// left-associative except ^; functions sin, cos, tan, exp, abs, min,
    /// max; piecewise if(lhs CMP rhs, then, else) with CMP in {<, <=, >, >=}.
    /// Throws ParseError with a byte offset.
    static Expr parse(std::string_view src);

    /// IEEE double evaluation, operands left to right, guard strict, only the
    /// taken branch evaluated. Throws UnboundVariable, NonFiniteResult.
    [[nodiscard]] double eval(const std::map<std::string, double>& bindings) const;

    [[nodiscard]] std::set<std::string> free_vars() const;

    /// Pretty-print; parse(str()) reproduces the tree exactly.
    [[nodiscard]] std::string str() const;
    [[nodiscard]] std::string str(int node) const;

    [[nodiscard]] bool equals(const Expr& other) const;
    bool operator==(const Expr& other) const { return equals(other); }

    [[nodiscard]] const std::vector<ExprNode>& nodes() const { return nodes_; }
    [[nodiscard]] int root() const { return root_; }
    [[nodiscard]] bool empty() const { return nodes_.empty(); }

    /// Construction hooks for tests and programmatic model building.
    int add_node(ExprNode n);
    void set_root(int r) { root_ = r; }

private:
    std::vector<ExprNode> nodes_;
    int root_ = -1;
};

/// Expression with variables resolved to slot indices against a fixed layout;
/// evaluation is allocation-free.
class CompiledExpr {
public:
    CompiledExpr() = default;

    /// Throws UnboundVariable if the expression uses a name not in `layout`.
    static CompiledExpr compile(const Expr& e, std::span<const std::string> layout);

    /// `slots` must follow the layout used at compile time.
    [[nodiscard]] double eval(std::span<const double> slots) const;

    [[nodiscard]] bool valid() const { return root_ >= 0; }

private:
    struct Node {
        ExprKind kind;
        CmpOp cmp;
        double value;
        int a, b, c, d;
        int slot;
    };
    double eval_node(int idx, std::span<const double> slots) const;

    std::vector<Node> nodes_;
    std::vector<std::string> names_;  // for NonFiniteResult reporting
    int root_ = -1;
};

}  // namespace netfunnel
