#pragma once

#include <memory>
#include <string>

#include <Eigen/Dense>

namespace kfp {

/// Compiled arithmetic expression over variables x1..xN with operators
/// + - * / ^, the functions exp, sin, cos, sqrt, abs, and the constants
/// pi and e. Side-effect free; evaluation never throws on finite input.
class Expression {
public:
    // Throws ParseError on malformed input or variables beyond dim.
    static Expression parse(const std::string& text, int dim);

    double operator()(const Eigen::VectorXd& x) const;
    const std::string& text() const { return text_; }
    int dim() const { return dim_; }

    Expression(Expression&&) noexcept;
    Expression& operator=(Expression&&) noexcept;
    Expression(const Expression&);
    Expression& operator=(const Expression&);
    ~Expression();

    struct Node;  // exposed for the parser implementation

private:
    Expression();
    std::shared_ptr<const Node> root_;
    std::string text_;
    int dim_ = 0;
};

} // namespace kfp
