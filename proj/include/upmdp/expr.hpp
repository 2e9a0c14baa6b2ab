#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "upmdp/errors.hpp"

namespace upmdp {

/// Arithmetic over numeric literals and named parameters: unary minus and the
/// four binary operators, with the usual precedence. Nodes live in a flat
/// arena so expressions copy cheaply.
struct Expr {
    enum class Op { constant, parameter, negate, add, subtract, multiply, divide };

    struct Node {
        Op op = Op::constant;
        double value = 0.0;       // constant
        std::string name;         // parameter
        int param_index = -1;     // resolved by bind()
        int lhs = -1, rhs = -1;   // children (rhs unused for negate)
    };

    std::vector<Node> nodes;
    int root = -1;

    bool empty() const { return root < 0; }
};

namespace detail {

struct Token {
    enum class Kind { number, ident, plus, minus, star, slash, lparen, rparen, end };
    Kind kind;
    std::size_t offset;
    double number = 0.0;
    std::string_view text;
};

class ExprParser {
  public:
    explicit ExprParser(std::string_view text) : text_(text) {}

    Expr parse() {
        Expr out;
        out.root = parse_sum(out);
        skip_ws();
        if (pos_ < text_.size()) throw ParseError(pos_, "operator or end of input");
        return out;
    }

  private:
    std::string_view text_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    int parse_sum(Expr& e) {
        int lhs = parse_term(e);
        for (;;) {
            if (eat('+')) lhs = make_binary(e, Expr::Op::add, lhs, parse_term(e));
            else if (eat('-')) lhs = make_binary(e, Expr::Op::subtract, lhs, parse_term(e));
            else return lhs;
        }
    }

    int parse_term(Expr& e) {
        int lhs = parse_unary(e);
        for (;;) {
            if (eat('*')) lhs = make_binary(e, Expr::Op::multiply, lhs, parse_unary(e));
            else if (eat('/')) {
                const std::size_t at = pos_;
                const int rhs = parse_unary(e);
                if (e.nodes[rhs].op == Expr::Op::constant && e.nodes[rhs].value == 0.0)
                    throw ParseError(at, "nonzero divisor (division by a zero literal)");
                lhs = make_binary(e, Expr::Op::divide, lhs, rhs);
            } else return lhs;
        }
    }

    int parse_unary(Expr& e) {
        if (eat('-')) {
            Expr::Node node;
            node.op = Expr::Op::negate;
            node.lhs = parse_unary(e);
            e.nodes.push_back(std::move(node));
            return static_cast<int>(e.nodes.size()) - 1;
        }
        return parse_primary(e);
    }

    int parse_primary(Expr& e) {
        skip_ws();
        if (pos_ >= text_.size()) throw ParseError(pos_, "number, parameter, '(' or '-'");
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            const int inner = parse_sum(e);
            skip_ws();
            if (!eat(')')) throw ParseError(pos_, "')'");
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) return parse_number(e);
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident(e);
        throw ParseError(pos_, "number, parameter, '(' or '-'");
    }

    int parse_number(Expr& e) {
        std::size_t end = pos_;
        while (end < text_.size() && std::isdigit(static_cast<unsigned char>(text_[end]))) ++end;
        if (end < text_.size() && text_[end] == '.') {
            ++end;
            while (end < text_.size() && std::isdigit(static_cast<unsigned char>(text_[end]))) ++end;
        }
        if (end < text_.size() && (text_[end] == 'e' || text_[end] == 'E')) {
            std::size_t exp = end + 1;
            if (exp < text_.size() && (text_[exp] == '+' || text_[exp] == '-')) ++exp;
            std::size_t digits = exp;
            while (digits < text_.size() && std::isdigit(static_cast<unsigned char>(text_[digits]))) ++digits;
            if (digits > exp) end = digits;
        }
        double value = 0.0;
        const auto result = std::from_chars(text_.data() + pos_, text_.data() + end, value);
        if (result.ec != std::errc{}) throw ParseError(pos_, "valid number");
        Expr::Node node;
        node.op = Expr::Op::constant;
        node.value = value;
        pos_ = end;
        e.nodes.push_back(std::move(node));
        return static_cast<int>(e.nodes.size()) - 1;
    }

    int parse_ident(Expr& e) {
        std::size_t end = pos_;
        while (end < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[end])) || text_[end] == '_'))
            ++end;
        Expr::Node node;
        node.op = Expr::Op::parameter;
        node.name = std::string(text_.substr(pos_, end - pos_));
        pos_ = end;
        e.nodes.push_back(std::move(node));
        return static_cast<int>(e.nodes.size()) - 1;
    }

    int make_binary(Expr& e, Expr::Op op, int lhs, int rhs) {
        Expr::Node node;
        node.op = op;
        node.lhs = lhs;
        node.rhs = rhs;
        e.nodes.push_back(std::move(node));
        return static_cast<int>(e.nodes.size()) - 1;
    }
};

inline int precedence(Expr::Op op) {
    switch (op) {
        case Expr::Op::add:
        case Expr::Op::subtract: return 1;
        case Expr::Op::multiply:
        case Expr::Op::divide: return 2;
        case Expr::Op::negate: return 3;
        default: return 4;
    }
}

inline void print_node(const Expr& e, int idx, std::string& out) {
    const Expr::Node& node = e.nodes[idx];
    const int prec = precedence(node.op);
    auto child = [&](int c, bool parens) {
        if (parens) out.push_back('(');
        print_node(e, c, out);
        if (parens) out.push_back(')');
    };
    switch (node.op) {
        case Expr::Op::constant: {
            char buf[32];
            const auto res = std::to_chars(buf, buf + sizeof(buf), node.value);
            out.append(buf, res.ptr);
            break;
        }
        case Expr::Op::parameter:
            out += node.name;
            break;
        case Expr::Op::negate:
            out.push_back('-');
            child(node.lhs, precedence(e.nodes[node.lhs].op) < prec);
            break;
        default: {
            const char* sym = node.op == Expr::Op::add        ? " + "
                              : node.op == Expr::Op::subtract ? " - "
                              : node.op == Expr::Op::multiply ? "*"
                                                              : "/";
            child(node.lhs, precedence(e.nodes[node.lhs].op) < prec);
            out += sym;
            // Parenthesize equal precedence on the right so the printed form
            // rebuilds the same tree under left associativity.
            child(node.rhs, precedence(e.nodes[node.rhs].op) <= prec);
            break;
        }
    }
}

inline double eval_node(const Expr& e, int idx, std::span<const double> params) {
    const Expr::Node& node = e.nodes[idx];
    switch (node.op) {
        case Expr::Op::constant: return node.value;
        case Expr::Op::parameter:
            if (node.param_index < 0 || node.param_index >= static_cast<int>(params.size()))
                throw UnboundParameterError(node.name);
            return params[node.param_index];
        case Expr::Op::negate: return -eval_node(e, node.lhs, params);
        case Expr::Op::add: return eval_node(e, node.lhs, params) + eval_node(e, node.rhs, params);
        case Expr::Op::subtract: return eval_node(e, node.lhs, params) - eval_node(e, node.rhs, params);
        case Expr::Op::multiply: return eval_node(e, node.lhs, params) * eval_node(e, node.rhs, params);
        case Expr::Op::divide: {
            const double denom = eval_node(e, node.rhs, params);
            if (denom == 0.0) throw DivisionByZeroError();
            return eval_node(e, node.lhs, params) / denom;
        }
    }
    throw InvalidInputError("corrupt expression node");
}

inline bool equal_nodes(const Expr& a, int ia, const Expr& b, int ib) {
    const Expr::Node& na = a.nodes[ia];
    const Expr::Node& nb = b.nodes[ib];
    if (na.op != nb.op) return false;
    switch (na.op) {
        case Expr::Op::constant: return na.value == nb.value;
        case Expr::Op::parameter: return na.name == nb.name;
        case Expr::Op::negate: return equal_nodes(a, na.lhs, b, nb.lhs);
        default: return equal_nodes(a, na.lhs, b, nb.lhs) && equal_nodes(a, na.rhs, b, nb.rhs);
    }
}

}  // namespace detail

/// Parses with standard precedence and left associativity. Unknown parameter
/// names are accepted here and reported at template binding time.
inline Expr parse_expr(std::string_view text) {
    return detail::ExprParser(text).parse();
}

/// Canonical form: minimal parentheses, '+'/'-' spaced, '*'/'/" tight.
/// Parsing the output reproduces the same tree.
inline std::string print_expr(const Expr& e) {
    std::string out;
    detail::print_node(e, e.root, out);
    return out;
}

inline double eval_expr(const Expr& e, std::span<const double> params) {
    return detail::eval_node(e, e.root, params);
}

/// Resolves parameter names against an ordered declaration list.
inline void bind_expr(Expr& e, const std::vector<std::string>& params, const std::string& where = "") {
    for (auto& node : e.nodes) {
        if (node.op != Expr::Op::parameter) continue;
        const auto it = std::find(params.begin(), params.end(), node.name);
        if (it == params.end()) throw UnknownParameterError(node.name, where);
        node.param_index = static_cast<int>(it - params.begin());
    }
}

inline bool expr_equal(const Expr& a, const Expr& b) {
    if (a.empty() || b.empty()) return a.empty() == b.empty();
    return detail::equal_nodes(a, a.root, b, b.root);
}

/// Parameter names referenced by the expression, in first-appearance order.
inline std::vector<std::string> expr_parameters(const Expr& e) {
    std::vector<std::string> out;
    for (const auto& node : e.nodes)
        if (node.op == Expr::Op::parameter &&
            std::find(out.begin(), out.end(), node.name) == out.end())
            out.push_back(node.name);
    return out;
}

}  // namespace upmdp
