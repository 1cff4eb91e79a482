#pragma once
// Minimal closed-form expression language for problem coefficients: variables
// x (and t for kernels), pi, + - * / ^, unary minus, sin/cos/exp/sqrt/abs.
// ASTs are immutable after parse and safe to evaluate concurrently.

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nodal/numerics.hpp"

namespace nodal::expr {

enum class Arity { univariate, bivariate };

struct ParseError : std::runtime_error {
    size_t offset;
    ParseError(const std::string& msg, size_t off)
        : std::runtime_error(msg + " at offset " + std::to_string(off)), offset(off) {}
};

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Op : uint8_t {
    constant,  // value
    pi_const,
    var_x,
    var_t,
    neg,   // a
    add,   // a, b
    sub,
    mul,
    div,
    pow,
    fn_sin,  // a
    fn_cos,
    fn_exp,
    fn_sqrt,
    fn_abs,
};

struct Node {
    Op op;
    double value = 0.0;
    int a = -1;
    int b = -1;
};

// Shared by every evaluator of the language (tree walk and compiled forms):
// x^y with negative x is defined only when y is exactly integer-valued and
// small enough that doubles still have unit spacing.
inline bool integer_exponent(double e) {
    return std::nearbyint(e) == e && std::fabs(e) < 9.0e15;
}

class Expr {
public:
    static Expr parse(std::string_view source, Arity arity);

    double eval(double x) const;
    double eval(double x, double t) const;

    Arity arity() const { return arity_; }
    bool uses_t() const { return uses_t_; }
    bool uses_x() const { return uses_x_; }
    // True when the whole tree folds to the constant 0 (enables fast paths).
    bool is_zero() const;

    std::string pretty() const;

    const std::vector<Node>& nodes() const { return nodes_; }
    int root() const { return root_; }

    // Structural equality (same shape, ops, and constant bits).
    bool same_structure(const Expr& other) const;

private:
    Expr() = default;
    double eval_node(int idx, double x, const double* t) const;

    std::vector<Node> nodes_;
    int root_ = -1;
    Arity arity_ = Arity::univariate;
    bool uses_t_ = false;
    bool uses_x_ = false;
};

// Pointwise samples on the grid. For bivariate expressions t_slice must be
// supplied and the expression is sampled as f(x_i, t_slice).
SampledFunction sample(const Expr& e, const Grid& grid,
                       std::optional<double> t_slice = std::nullopt);

}  // namespace nodal::expr
