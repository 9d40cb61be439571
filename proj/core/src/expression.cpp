#include "kfp/expression.hpp"

#include <cctype>
#include <cmath>
#include <vector>

#include "kfp/errors.hpp"

namespace kfp {

enum class NodeKind { constant, variable, add, sub, mul, div, pow, neg, call };
enum class Func { exp, sin, cos, sqrt, abs };

struct Expression::Node {
    NodeKind kind;
    double value = 0.0;       // constant
    int var_index = 0;        // variable
    Func func = Func::exp;    // call
    std::shared_ptr<const Node> lhs, rhs;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;

struct Parser {
    const std::string& text;
    std::size_t pos = 0;
    int dim;

    explicit Parser(const std::string& t, int d) : text(t), dim(d) {}

    [[noreturn]] void fail(const std::string& why) const {
        throw ParseError("expression: " + why + " at offset " + std::to_string(pos) + " in \"" +
                         text + "\"");
    }

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos])))
            ++pos;
    }

    bool eat(char c) {
        skip_ws();
        if (pos < text.size() && text[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos < text.size() ? text[pos] : '\0';
    }

    NodePtr make(Expression::Node node) {
        return std::make_shared<const Expression::Node>(std::move(node));
    }

    NodePtr parse_expr() {
        NodePtr lhs = parse_term();
        while (true) {
            if (eat('+'))
                lhs = make({NodeKind::add, 0, 0, Func::exp, lhs, parse_term()});
            else if (eat('-'))
                lhs = make({NodeKind::sub, 0, 0, Func::exp, lhs, parse_term()});
            else
                return lhs;
        }
    }

    NodePtr parse_term() {
        NodePtr lhs = parse_unary();
        while (true) {
            if (eat('*'))
                lhs = make({NodeKind::mul, 0, 0, Func::exp, lhs, parse_unary()});
            else if (eat('/'))
                lhs = make({NodeKind::div, 0, 0, Func::exp, lhs, parse_unary()});
            else
                return lhs;
        }
    }

    NodePtr parse_unary() {
        if (eat('-'))
            return make({NodeKind::neg, 0, 0, Func::exp, parse_unary(), nullptr});
        if (eat('+'))
            return parse_unary();
        return parse_power();
    }

    NodePtr parse_power() {
        NodePtr base = parse_primary();
        if (eat('^'))  // right associative, unary minus binds looser
            return make({NodeKind::pow, 0, 0, Func::exp, base, parse_unary()});
        return base;
    }

    NodePtr parse_primary() {
        skip_ws();
        if (pos >= text.size())
            fail("unexpected end of input");
        const char c = text[pos];
        if (c == '(') {
            ++pos;
            NodePtr inner = parse_expr();
            if (!eat(')'))
                fail("missing ')'");
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
            return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)))
            return parse_ident();
        fail(std::string("unexpected character '") + c + "'");
    }

    NodePtr parse_number() {
        std::size_t consumed = 0;
        double value = 0.0;
        try {
            value = std::stod(text.substr(pos), &consumed);
        } catch (const std::exception&) {
            fail("malformed number");
        }
        pos += consumed;
        return make({NodeKind::constant, value, 0, Func::exp, nullptr, nullptr});
    }

    NodePtr parse_ident() {
        const std::size_t start = pos;
        while (pos < text.size() &&
               (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
            ++pos;
        const std::string name = text.substr(start, pos - start);

        if (name == "pi")
            return make({NodeKind::constant, M_PI, 0, Func::exp, nullptr, nullptr});
        if (name == "e")
            return make({NodeKind::constant, M_E, 0, Func::exp, nullptr, nullptr});

        if (name.size() >= 2 && name[0] == 'x') {
            bool digits = true;
            for (std::size_t i = 1; i < name.size(); ++i)
                digits = digits && std::isdigit(static_cast<unsigned char>(name[i]));
            if (digits) {
                const int index = std::stoi(name.substr(1));
                if (index < 1 || index > dim)
                    fail("variable " + name + " out of range (dimension " + std::to_string(dim) + ")");
                return make({NodeKind::variable, 0, index - 1, Func::exp, nullptr, nullptr});
            }
        }

        Func func;
        if (name == "exp")
            func = Func::exp;
        else if (name == "sin")
            func = Func::sin;
        else if (name == "cos")
            func = Func::cos;
        else if (name == "sqrt")
            func = Func::sqrt;
        else if (name == "abs")
            func = Func::abs;
        else
            fail("unknown identifier '" + name + "'");

        if (!eat('('))
            fail("function '" + name + "' needs parentheses");
        NodePtr arg = parse_expr();
        if (!eat(')'))
            fail("missing ')' after function argument");
        return make({NodeKind::call, 0, 0, func, arg, nullptr});
    }
};

double eval_node(const Expression::Node& node, const Eigen::VectorXd& x) {
    switch (node.kind) {
        case NodeKind::constant: return node.value;
        case NodeKind::variable: return x(node.var_index);
        case NodeKind::add: return eval_node(*node.lhs, x) + eval_node(*node.rhs, x);
        case NodeKind::sub: return eval_node(*node.lhs, x) - eval_node(*node.rhs, x);
        case NodeKind::mul: return eval_node(*node.lhs, x) * eval_node(*node.rhs, x);
        case NodeKind::div: return eval_node(*node.lhs, x) / eval_node(*node.rhs, x);
        case NodeKind::pow: return std::pow(eval_node(*node.lhs, x), eval_node(*node.rhs, x));
        case NodeKind::neg: return -eval_node(*node.lhs, x);
        case NodeKind::call: {
            const double a = eval_node(*node.lhs, x);
            switch (node.func) {
                case Func::exp: return std::exp(a);
                case Func::sin: return std::sin(a);
                case Func::cos: return std::cos(a);
                case Func::sqrt: return std::sqrt(a);
                case Func::abs: return std::abs(a);
            }
        }
    }
    return 0.0;
}

} // namespace

Expression::Expression() = default;
Expression::Expression(Expression&&) noexcept = default;
Expression& Expression::operator=(Expression&&) noexcept = default;
Expression::Expression(const Expression&) = default;
Expression& Expression::operator=(const Expression&) = default;
Expression::~Expression() = default;

Expression Expression::parse(const std::string& text, int dim) {
    Parser parser(text, dim);
    NodePtr root = parser.parse_expr();
    parser.skip_ws();
    if (parser.pos != text.size())
        parser.fail("trailing input");
    Expression expr;
    expr.root_ = std::move(root);
    expr.text_ = text;
    expr.dim_ = dim;
    return expr;
}

double Expression::operator()(const Eigen::VectorXd& x) const { return eval_node(*root_, x); }

} // namespace kfp
