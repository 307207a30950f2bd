#pragma once

// Arithmetic expression language for coefficients and Lyapunov functions.
//
// Grammar (recursive descent, '^' binds tighter than unary minus and is
// right-associative):
//
//   expr   := term  (('+'|'-') term)*
//   term   := unary (('*'|'/') unary)*
//   unary  := '-' unary | power
//   power  := atom ('^' unary)?
//   atom   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//
// Identifiers: x (same as x1), x1..xd, t, pi (folded to a literal).
// Functions: sin cos tan exp log sqrt abs sign min max pow.
//
// Evaluation never returns NaN or infinity: log/sqrt of a negative number,
// division by zero and overflow surface as EvalError carrying the offending
// subexpression and the input point. sign(0) = 0.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fpk/error.hpp"

namespace fpk::expr {

enum class Kind : uint8_t { Number, Var, TimeVar, Neg, Add, Sub, Mul, Div, Pow, Call };

enum class Fn : uint8_t { Sin, Cos, Tan, Exp, Log, Sqrt, Abs, Sign, Min, Max, Pow };

struct Node;
using NodeP = std::shared_ptr<const Node>;

struct Node {
    Kind kind;
    double value = 0.0; // Number
    int var = 0;        // Var: 0-based coordinate index
    Fn fn{};            // Call
    NodeP a, b;         // children; unary ops use a only
};

class Expr {
public:
    Expr() = default;
    explicit Expr(NodeP n) : root_(std::move(n)) {}
    const Node* root() const { return root_.get(); }
    NodeP share() const { return root_; }
    bool empty() const { return !root_; }
    std::string str() const; // re-rendered source text
private:
    NodeP root_;
};

// Throws ParseError (with byte offset and an expected-token description).
Expr parse(std::string_view text);

// Checked evaluation; x holds the spatial coordinates. Throws EvalError.
double evaluate(const Expr& e, std::span<const double> x, double t = 0.0);

inline double evaluate1(const Expr& e, double x, double t = 0.0) {
    return evaluate(e, std::span<const double>(&x, 1), t);
}

// d/dx_var for var >= 0, d/dt for var == kTimeVar. Kinks are differentiated
// with the one-sided-from-the-right convention: d|u| is +1 at u = 0, d sign = 0,
// ties in min/max follow the branch active just to the right.
inline constexpr int kTimeVar = -1;
Expr differentiate(const Expr& e, int var);

int max_var_index(const Expr& e); // -1 when no spatial variable occurs
bool uses_time(const Expr& e);
bool is_constant(const Expr& e);

// Structural composition with the same constant folding the parser applies;
// lets derived expressions (generator images) be assembled without
// reparsing. Throws errc::invalid on empty operands.
Expr make_num(double v);
Expr make_add(const Expr& a, const Expr& b);
Expr make_sub(const Expr& a, const Expr& b);
Expr make_mul(const Expr& a, const Expr& b);
Expr make_div(const Expr& a, const Expr& b);

// Flat postfix program for tight loops. run() mirrors evaluate()'s domain
// rules but reports trouble by returning NaN; callers that need the rich
// error re-evaluate through evaluate().
class Program {
public:
    Program() = default;
    static Program compile(const Expr& e);

    double run(const double* x, double t) const noexcept;
    double run1(double x, double t) const noexcept { return run(&x, t); }
    bool empty() const { return ops_.empty(); }

private:
    struct Op {
        uint8_t code;
        uint8_t slot;
        double k;
    };
    std::vector<Op> ops_;
    int stack_need_ = 0;
};

} // namespace fpk::expr
