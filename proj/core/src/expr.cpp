#include "netfunnel/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace netfunnel {

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

class Parser {
public:
    Parser(std::string_view src, Expr& out) : src_(src), out_(out) {}

    int parse_all() {
        int root = parse_additive();
        skip_ws();
        if (pos_ != src_.size()) fail("unexpected trailing input");
        return root;
    }

private:
    std::string_view src_;
    Expr& out_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& msg) { throw ParseError(pos_, msg); }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!eat(c)) fail(std::string("expected '") + c + "'");
    }

    char peek() {
        skip_ws();
        return pos_ < src_.size() ? src_[pos_] : '\0';
    }

    int mk(ExprNode n) { return out_.add_node(std::move(n)); }

    int parse_additive() {
        int lhs = parse_multiplicative();
        for (;;) {
            char c = peek();
            if (c != '+' && c != '-') return lhs;
            ++pos_;
            int rhs = parse_multiplicative();
            ExprNode n;
            n.kind = c == '+' ? ExprKind::Add : ExprKind::Sub;
            n.a = lhs;
            n.b = rhs;
            lhs = mk(std::move(n));
        }
    }

    int parse_multiplicative() {
        int lhs = parse_unary();
        for (;;) {
            char c = peek();
            if (c != '*' && c != '/') return lhs;
            ++pos_;
            int rhs = parse_unary();
            ExprNode n;
            n.kind = c == '*' ? ExprKind::Mul : ExprKind::Div;
            n.a = lhs;
            n.b = rhs;
            lhs = mk(std::move(n));
        }
    }

    int parse_unary() {
        if (peek() == '-') {
            ++pos_;
            int arg = parse_unary();
            ExprNode n;
            n.kind = ExprKind::Neg;
            n.a = arg;
            return mk(std::move(n));
        }
        return parse_power();
    }

    int parse_power() {
        int base = parse_primary();
        if (peek() == '^') {
            ++pos_;
            int exp = parse_unary();  // right-assoc, signed exponent allowed
            ExprNode n;
            n.kind = ExprKind::Pow;
            n.a = base;
            n.b = exp;
            return mk(std::move(n));
        }
        return base;
    }

    int parse_primary() {
        skip_ws();
        if (pos_ >= src_.size()) fail("expected operand");
        char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            int inner = parse_additive();
            expect(')');
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (is_ident_start(c)) return parse_ident();
        fail("expected operand");
    }

    int parse_number() {
        double value = 0;
        const char* begin = src_.data() + pos_;
        const char* end = src_.data() + src_.size();
        auto [ptr, ec] = std::from_chars(begin, end, value);
        if (ec != std::errc() || ptr == begin) fail("malformed number");
        pos_ += static_cast<std::size_t>(ptr - begin);
        ExprNode n;
        n.kind = ExprKind::Literal;
        n.value = value;
        return mk(std::move(n));
    }

    CmpOp parse_cmp() {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == '<') {
            ++pos_;
            if (eat('=')) return CmpOp::Le;
            return CmpOp::Lt;
        }
        if (pos_ < src_.size() && src_[pos_] == '>') {
            ++pos_;
            if (eat('=')) return CmpOp::Ge;
            return CmpOp::Gt;
        }
        fail("expected comparison operator");
    }

    int parse_ident() {
        std::size_t start = pos_;
        while (pos_ < src_.size() && is_ident_char(src_[pos_])) ++pos_;
        std::string name(src_.substr(start, pos_ - start));

        if (name == "if") {
            expect('(');
            ExprNode n;
            n.kind = ExprKind::If;
            n.a = parse_additive();
            n.cmp = parse_cmp();
            n.b = parse_additive();
            expect(',');
            n.c = parse_additive();
            expect(',');
            n.d = parse_additive();
            expect(')');
            return mk(std::move(n));
        }

        ExprKind fn;
        int arity = 0;
        if (name == "sin") {
            fn = ExprKind::Sin;
            arity = 1;
        } else if (name == "cos") {
            fn = ExprKind::Cos;
            arity = 1;
        } else if (name == "tan") {
            fn = ExprKind::Tan;
            arity = 1;
        } else if (name == "exp") {
            fn = ExprKind::Exp;
            arity = 1;
        } else if (name == "abs") {
            fn = ExprKind::Abs;
            arity = 1;
        } else if (name == "min") {
            fn = ExprKind::Min;
            arity = 2;
        } else if (name == "max") {
            fn = ExprKind::Max;
            arity = 2;
        } else {
            ExprNode n;
            n.kind = ExprKind::Variable;
            n.name = std::move(name);
            return mk(std::move(n));
        }

        expect('(');
        ExprNode n;
        n.kind = fn;
        n.a = parse_additive();
        if (arity == 2) {
            expect(',');
            n.b = parse_additive();
        }
        expect(')');
        return mk(std::move(n));
    }
};

bool cmp_holds(CmpOp op, double l, double r) {
    switch (op) {
        case CmpOp::Lt: return l < r;
        case CmpOp::Le: return l <= r;
        case CmpOp::Gt: return l > r;
        case CmpOp::Ge: return l >= r;
    }
    return false;
}

int cmp_prec(ExprKind k) {
    switch (k) {
        case ExprKind::Add:
        case ExprKind::Sub: return 1;
        case ExprKind::Mul:
        case ExprKind::Div: return 2;
        case ExprKind::Neg: return 3;
        case ExprKind::Pow: return 4;
        default: return 5;
    }
}

const char* cmp_str(CmpOp op) {
    switch (op) {
        case CmpOp::Lt: return "<";
        case CmpOp::Le: return "<=";
        case CmpOp::Gt: return ">";
        case CmpOp::Ge: return ">=";
    }
    return "?";
}

std::string format_literal(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

int Expr::add_node(ExprNode n) {
    nodes_.push_back(std::move(n));
    root_ = static_cast<int>(nodes_.size()) - 1;
    return root_;
}

Expr Expr::parse(std::string_view src) {
    Expr e;
    Parser p(src, e);
    e.root_ = p.parse_all();
    return e;
}

namespace {

double eval_rec(const Expr& e, int idx, const std::map<std::string, double>& bindings) {
    const ExprNode& n = e.nodes()[static_cast<std::size_t>(idx)];
    double r;
    switch (n.kind) {
        case ExprKind::Literal: r = n.value; break;
        case ExprKind::Variable: {
            auto it = bindings.find(n.name);
            if (it == bindings.end()) throw UnboundVariable(n.name);
            r = it->second;
            break;
        }
        case ExprKind::Neg: r = -eval_rec(e, n.a, bindings); break;
        case ExprKind::Add: {
            double l = eval_rec(e, n.a, bindings);
            r = l + eval_rec(e, n.b, bindings);
            break;
        }
        case ExprKind::Sub: {
            double l = eval_rec(e, n.a, bindings);
            r = l - eval_rec(e, n.b, bindings);
            break;
        }
        case ExprKind::Mul: {
            double l = eval_rec(e, n.a, bindings);
            r = l * eval_rec(e, n.b, bindings);
            break;
        }
        case ExprKind::Div: {
            double l = eval_rec(e, n.a, bindings);
            r = l / eval_rec(e, n.b, bindings);
            break;
        }
        case ExprKind::Pow: {
            double l = eval_rec(e, n.a, bindings);
            r = std::pow(l, eval_rec(e, n.b, bindings));
            break;
        }
        case ExprKind::Sin: r = std::sin(eval_rec(e, n.a, bindings)); break;
        case ExprKind::Cos: r = std::cos(eval_rec(e, n.a, bindings)); break;
        case ExprKind::Tan: r = std::tan(eval_rec(e, n.a, bindings)); break;
        case ExprKind::Exp: r = std::exp(eval_rec(e, n.a, bindings)); break;
        case ExprKind::Abs: r = std::fabs(eval_rec(e, n.a, bindings)); break;
        case ExprKind::Min: {
            double l = eval_rec(e, n.a, bindings);
            r = std::fmin(l, eval_rec(e, n.b, bindings));
            break;
        }
        case ExprKind::Max: {
            double l = eval_rec(e, n.a, bindings);
            r = std::fmax(l, eval_rec(e, n.b, bindings));
            break;
        }
        case ExprKind::If: {
            double l = eval_rec(e, n.a, bindings);
            double rr = eval_rec(e, n.b, bindings);
            r = cmp_holds(n.cmp, l, rr) ? eval_rec(e, n.c, bindings)
                                        : eval_rec(e, n.d, bindings);
            break;
        }
        default: throw Error("corrupt expression node");
    }
    if (!std::isfinite(r)) throw NonFiniteResult(e.str(idx));
    return r;
}

}  // namespace

double Expr::eval(const std::map<std::string, double>& bindings) const {
    if (root_ < 0) throw Error("empty expression");
    return eval_rec(*this, root_, bindings);
}

namespace {
void collect_vars(const Expr& e, int idx, std::set<std::string>& out) {
    const ExprNode& n = e.nodes()[static_cast<std::size_t>(idx)];
    if (n.kind == ExprKind::Variable) out.insert(n.name);
    if (n.a >= 0) collect_vars(e, n.a, out);
    if (n.b >= 0) collect_vars(e, n.b, out);
    if (n.c >= 0) collect_vars(e, n.c, out);
    if (n.d >= 0) collect_vars(e, n.d, out);
}

void print_rec(const Expr& e, int idx, std::string& out) {
    const ExprNode& n = e.nodes()[static_cast<std::size_t>(idx)];
    int prec = cmp_prec(n.kind);
    auto child = [&](int ci, bool paren_on_equal) {
        int cprec = cmp_prec(e.nodes()[static_cast<std::size_t>(ci)].kind);
        bool paren = paren_on_equal ? cprec <= prec : cprec < prec;
        if (paren) out += '(';
        print_rec(e, ci, out);
        if (paren) out += ')';
    };
    switch (n.kind) {
        case ExprKind::Literal: out += format_literal(n.value); break;
        case ExprKind::Variable: out += n.name; break;
        case ExprKind::Neg:
            out += '-';
            child(n.a, false);
            break;
        case ExprKind::Add:
        case ExprKind::Sub:
        case ExprKind::Mul:
        case ExprKind::Div:
            child(n.a, false);
            out += n.kind == ExprKind::Add   ? " + "
                   : n.kind == ExprKind::Sub ? " - "
                   : n.kind == ExprKind::Mul ? "*"
                                             : "/";
            child(n.b, true);  // preserve shape under left associativity
            break;
        case ExprKind::Pow:
            child(n.a, true);  // preserve shape under right associativity
            out += '^';
            child(n.b, false);
            break;
        case ExprKind::Sin:
        case ExprKind::Cos:
        case ExprKind::Tan:
        case ExprKind::Exp:
        case ExprKind::Abs:
            out += n.kind == ExprKind::Sin   ? "sin"
                   : n.kind == ExprKind::Cos ? "cos"
                   : n.kind == ExprKind::Tan ? "tan"
                   : n.kind == ExprKind::Exp ? "exp"
                                             : "abs";
            out += '(';
            print_rec(e, n.a, out);
            out += ')';
            break;
        case ExprKind::Min:
        case ExprKind::Max:
            out += n.kind == ExprKind::Min ? "min(" : "max(";
            print_rec(e, n.a, out);
            out += ", ";
            print_rec(e, n.b, out);
            out += ')';
            break;
        case ExprKind::If:
            out += "if(";
            print_rec(e, n.a, out);
            out += ' ';
            out += cmp_str(n.cmp);
            out += ' ';
            print_rec(e, n.b, out);
            out += ", ";
            print_rec(e, n.c, out);
            out += ", ";
            print_rec(e, n.d, out);
            out += ')';
            break;
    }
}

bool equal_rec(const Expr& x, int xi, const Expr& y, int yi) {
    const ExprNode& a = x.nodes()[static_cast<std::size_t>(xi)];
    const ExprNode& b = y.nodes()[static_cast<std::size_t>(yi)];
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case ExprKind::Literal: {
            // bitwise so that round-trips are exact
            return a.value == b.value || (std::signbit(a.value) == std::signbit(b.value) &&
                                          a.value != a.value && b.value != b.value);
        }
        case ExprKind::Variable: return a.name == b.name;
        case ExprKind::If:
            return a.cmp == b.cmp && equal_rec(x, a.a, y, b.a) && equal_rec(x, a.b, y, b.b) &&
                   equal_rec(x, a.c, y, b.c) && equal_rec(x, a.d, y, b.d);
        default: break;
    }
    if ((a.a >= 0) != (b.a >= 0) || (a.b >= 0) != (b.b >= 0)) return false;
    if (a.a >= 0 && !equal_rec(x, a.a, y, b.a)) return false;
    if (a.b >= 0 && !equal_rec(x, a.b, y, b.b)) return false;
    return true;
}
}  // namespace

std::set<std::string> Expr::free_vars() const {
    std::set<std::string> out;
    if (root_ >= 0) collect_vars(*this, root_, out);
    return out;
}

std::string Expr::str() const { return root_ >= 0 ? str(root_) : std::string(); }

std::string Expr::str(int node) const {
    std::string out;
    print_rec(*this, node, out);
    return out;
}

bool Expr::equals(const Expr& other) const {
    if ((root_ < 0) != (other.root_ < 0)) return false;
    if (root_ < 0) return true;
    return equal_rec(*this, root_, other, other.root_);
}

// --- CompiledExpr -----------------------------------------------------------

CompiledExpr CompiledExpr::compile(const Expr& e, std::span<const std::string> layout) {
    CompiledExpr c;
    c.nodes_.reserve(e.nodes().size());
    for (const ExprNode& n : e.nodes()) {
        Node cn{n.kind, n.cmp, n.value, n.a, n.b, n.c, n.d, -1};
        if (n.kind == ExprKind::Variable) {
            for (std::size_t k = 0; k < layout.size(); ++k) {
                if (layout[k] == n.name) {
                    cn.slot = static_cast<int>(k);
                    break;
                }
            }
            if (cn.slot < 0) throw UnboundVariable(n.name);
        }
        c.names_.push_back(n.name);
        c.nodes_.push_back(cn);
    }
    c.root_ = e.root();
    return c;
}

double CompiledExpr::eval_node(int idx, std::span<const double> slots) const {
    const Node& n = nodes_[static_cast<std::size_t>(idx)];
    double r;
    switch (n.kind) {
        case ExprKind::Literal: r = n.value; break;
        case ExprKind::Variable: r = slots[static_cast<std::size_t>(n.slot)]; break;
        case ExprKind::Neg: r = -eval_node(n.a, slots); break;
        case ExprKind::Add: {
            double l = eval_node(n.a, slots);
            r = l + eval_node(n.b, slots);
            break;
        }
        case ExprKind::Sub: {
            double l = eval_node(n.a, slots);
            r = l - eval_node(n.b, slots);
            break;
        }
        case ExprKind::Mul: {
            double l = eval_node(n.a, slots);
            r = l * eval_node(n.b, slots);
            break;
        }
        case ExprKind::Div: {
            double l = eval_node(n.a, slots);
            r = l / eval_node(n.b, slots);
            break;
        }
        case ExprKind::Pow: {
            double l = eval_node(n.a, slots);
            r = std::pow(l, eval_node(n.b, slots));
            break;
        }
        case ExprKind::Sin: r = std::sin(eval_node(n.a, slots)); break;
        case ExprKind::Cos: r = std::cos(eval_node(n.a, slots)); break;
        case ExprKind::Tan: r = std::tan(eval_node(n.a, slots)); break;
        case ExprKind::Exp: r = std::exp(eval_node(n.a, slots)); break;
        case ExprKind::Abs: r = std::fabs(eval_node(n.a, slots)); break;
        case ExprKind::Min: {
            double l = eval_node(n.a, slots);
            r = std::fmin(l, eval_node(n.b, slots));
            break;
        }
        case ExprKind::Max: {
            double l = eval_node(n.a, slots);
            r = std::fmax(l, eval_node(n.b, slots));
            break;
        }
        case ExprKind::If: {
            double l = eval_node(n.a, slots);
            double rr = eval_node(n.b, slots);
            r = cmp_holds(n.cmp, l, rr) ? eval_node(n.c, slots) : eval_node(n.d, slots);
            break;
        }
        default: throw Error("corrupt expression node");
    }
    if (!std::isfinite(r)) {
        throw NonFiniteResult(n.kind == ExprKind::Variable ? names_[static_cast<std::size_t>(idx)]
                                                           : "compiled subexpression");
    }
    return r;
}

double CompiledExpr::eval(std::span<const double> slots) const {
    if (root_ < 0) throw Error("empty compiled expression");
    return eval_node(root_, slots);
}

}  // namespace netfunnel
