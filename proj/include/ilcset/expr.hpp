#pragma once

// Expression mini-language for time-varying matrix entries.
//
//   expr   := term (('+' | '-') term)*
//   term   := factor (('*' | '/') factor)*
//   factor := atom ('^' uint)?
//   atom   := number | 'pi' | 'k' | fn '(' expr ')' | '(' expr ')' | '-' factor
//   fn     := 'sin' | 'cos' | 'exp'
//
// Unary minus binds looser than '^' and tighter than '*': "-2^2" is -4.

#include <array>
#include <charconv>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "ilcset/errors.hpp"

namespace ilcset {

enum class NodeKind { Number, Var, Neg, Add, Sub, Mul, Div, Pow, Sin, Cos, Exp };

struct ExprNode {
    NodeKind kind = NodeKind::Number;
    double value = 0.0;   // Number
    int exponent = 0;     // Pow
    std::shared_ptr<const ExprNode> lhs;  // unary child or left operand
    std::shared_ptr<const ExprNode> rhs;
};

inline constexpr int max_integer_exponent = 8;

/// Immutable parsed entry expression; copies share the tree.
class EntryExpr {
public:
    EntryExpr() : root_(std::make_shared<const ExprNode>()) {}
    explicit EntryExpr(std::shared_ptr<const ExprNode> root) : root_(std::move(root)) {}

    static EntryExpr constant(double v) {
        auto n = std::make_shared<ExprNode>();
        n->value = v;
        return EntryExpr(std::move(n));
    }

    const ExprNode& root() const { return *root_; }

private:
    std::shared_ptr<const ExprNode> root_;
};

namespace detail {

inline std::string format_number(double v) {
    std::array<char, 32> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

class ExprParser {
public:
    explicit ExprParser(std::string_view src) : src_(src) {}

    EntryExpr parse() {
        skip_ws();
        if (pos_ >= src_.size()) fail("empty expression", "{expression}");
        auto root = expr();
        skip_ws();
        if (pos_ != src_.size()) fail("unexpected trailing input", "{'+', '-', '*', '/', '^', end of input}");
        return EntryExpr(std::move(root));
    }

private:
    using NodePtr = std::shared_ptr<const ExprNode>;

    [[noreturn]] void fail(const std::string& why, const std::string& expected) const {
        throw ParseError("parse error at offset " + std::to_string(pos_) + ": " + why +
                             "; expected " + expected,
                         pos_);
    }

    void skip_ws() {
        while (pos_ < src_.size() &&
               (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' || src_[pos_] == '\r'))
            ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    static NodePtr make(NodeKind kind, NodePtr lhs, NodePtr rhs = nullptr) {
        auto n = std::make_shared<ExprNode>();
        n->kind = kind;
        n->lhs = std::move(lhs);
        n->rhs = std::move(rhs);
        return n;
    }

    NodePtr expr() {
        auto lhs = term();
        for (;;) {
            if (accept('+')) {
                lhs = make(NodeKind::Add, lhs, term());
            } else if (accept('-')) {
                lhs = make(NodeKind::Sub, lhs, term());
            } else {
                return lhs;
            }
        }
    }

    NodePtr term() {
        auto lhs = factor();
        for (;;) {
            if (accept('*')) {
                lhs = make(NodeKind::Mul, lhs, factor());
            } else if (accept('/')) {
                lhs = make(NodeKind::Div, lhs, factor());
            } else {
                return lhs;
            }
        }
    }

    NodePtr factor() {
        auto base = atom();
        if (accept('^')) {
            skip_ws();
            const std::size_t start = pos_;
            while (pos_ < src_.size() && src_[pos_] >= '0' && src_[pos_] <= '9') ++pos_;
            if (start == pos_) fail("exponent must be a nonnegative integer", "{uint}");
            int e = 0;
            auto [ptr, ec] = std::from_chars(src_.data() + start, src_.data() + pos_, e);
            if (ec != std::errc{} || e > max_integer_exponent) {
                pos_ = start;
                fail("exponent exceeds " + std::to_string(max_integer_exponent), "{uint <= 8}");
            }
            auto n = std::make_shared<ExprNode>();
            n->kind = NodeKind::Pow;
            n->exponent = e;
            n->lhs = std::move(base);
            return n;
        }
        return base;
    }

    NodePtr atom() {
        skip_ws();
        if (pos_ >= src_.size()) fail("unexpected end of input", "{number, 'k', 'pi', function, '(', '-'}");
        const char c = src_[pos_];
        if (c == '-') {
            ++pos_;
            return make(NodeKind::Neg, factor());
        }
        if (c == '(') {
            ++pos_;
            auto inner = expr();
            if (!accept(')')) fail("unclosed parenthesis", "{')'}");
            return inner;
        }
        if ((c >= '0' && c <= '9') || c == '.') return number();
        if (is_alpha(c)) return identifier();
        fail(std::string("unexpected character '") + c + "'", "{number, 'k', 'pi', function, '(', '-'}");
    }

    static bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }

    NodePtr number() {
        const std::size_t start = pos_;
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(src_.data() + pos_, src_.data() + src_.size(), v,
                                         std::chars_format::general);
        if (ec != std::errc{}) fail("malformed number", "{number}");
        pos_ = static_cast<std::size_t>(ptr - src_.data());
        if (!std::isfinite(v)) {
            pos_ = start;
            fail("number out of range", "{finite number}");
        }
        auto n = std::make_shared<ExprNode>();
        n->value = v;
        return n;
    }

    NodePtr identifier() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() && (is_alpha(src_[pos_]) || (src_[pos_] >= '0' && src_[pos_] <= '9')))
            ++pos_;
        const std::string_view id = src_.substr(start, pos_ - start);
        if (id == "k") return make(NodeKind::Var, nullptr);
        if (id == "pi") {
            auto n = std::make_shared<ExprNode>();
            n->value = std::numbers::pi;
            return n;
        }
        NodeKind fn;
        if (id == "sin") {
            fn = NodeKind::Sin;
        } else if (id == "cos") {
            fn = NodeKind::Cos;
        } else if (id == "exp") {
            fn = NodeKind::Exp;
        } else {
            throw UnknownFunction("unknown identifier '" + std::string(id) + "' at offset " +
                                      std::to_string(start) + "; expected one of {k, pi, sin, cos, exp}",
                                  start);
        }
        if (!accept('(')) fail("function call requires '('", "{'('}");
        auto arg = expr();
        if (!accept(')')) fail("unclosed parenthesis", "{')'}");
        return make(fn, std::move(arg));
    }

    std::string_view src_;
    std::size_t pos_ = 0;
};

inline double eval_node(const ExprNode& n, double k) {
    switch (n.kind) {
        case NodeKind::Number: return n.value;
        case NodeKind::Var: return k;
        case NodeKind::Neg: return -eval_node(*n.lhs, k);
        case NodeKind::Add: return eval_node(*n.lhs, k) + eval_node(*n.rhs, k);
        case NodeKind::Sub: return eval_node(*n.lhs, k) - eval_node(*n.rhs, k);
        case NodeKind::Mul: return eval_node(*n.lhs, k) * eval_node(*n.rhs, k);
        case NodeKind::Div: {
            const double den = eval_node(*n.rhs, k);
            if (den == 0.0) throw EvalError("division by zero at k=" + format_number(k));
            return eval_node(*n.lhs, k) / den;
        }
        case NodeKind::Pow: {
            const double b = eval_node(*n.lhs, k);
            double r = 1.0;
            for (int i = 0; i < n.exponent; ++i) r *= b;
            return r;
        }
        case NodeKind::Sin: return std::sin(eval_node(*n.lhs, k));
        case NodeKind::Cos: return std::cos(eval_node(*n.lhs, k));
        case NodeKind::Exp: return std::exp(eval_node(*n.lhs, k));
    }
    return 0.0;
}

inline std::string print_node(const ExprNode& n) {
    switch (n.kind) {
        case NodeKind::Number: return format_number(n.value);
        case NodeKind::Var: return "k";
        case NodeKind::Neg: return "(-" + print_node(*n.lhs) + ")";
        case NodeKind::Add: return "(" + print_node(*n.lhs) + "+" + print_node(*n.rhs) + ")";
        case NodeKind::Sub: return "(" + print_node(*n.lhs) + "-" + print_node(*n.rhs) + ")";
        case NodeKind::Mul: return "(" + print_node(*n.lhs) + "*" + print_node(*n.rhs) + ")";
        case NodeKind::Div: return "(" + print_node(*n.lhs) + "/" + print_node(*n.rhs) + ")";
        case NodeKind::Pow: return "(" + print_node(*n.lhs) + ")^" + std::to_string(n.exponent);
        case NodeKind::Sin: return "sin(" + print_node(*n.lhs) + ")";
        case NodeKind::Cos: return "cos(" + print_node(*n.lhs) + ")";
        case NodeKind::Exp: return "exp(" + print_node(*n.lhs) + ")";
    }
    return {};
}

}  // namespace detail

inline EntryExpr parse_expr(std::string_view src) { return detail::ExprParser(src).parse(); }

/// Evaluates with k treated as a real. Throws EvalError on a zero divisor or
/// a non-finite result.
inline double eval_expr(const EntryExpr& e, double k) {
    const double v = detail::eval_node(e.root(), k);
    if (!std::isfinite(v)) {
        throw EvalError("non-finite result at k=" + detail::format_number(k));
    }
    return v;
}

/// Fully parenthesized form that reparses to an equivalent tree.
inline std::string to_string(const EntryExpr& e) { return detail::print_node(e.root()); }

}  // namespace ilcset
