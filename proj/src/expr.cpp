#include "fpk/expr.hpp"

#include <charconv>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

namespace fpk::expr {

namespace {

/* ------------------------------------------------------------------ *
 *  node construction with local constant folding                      *
 * ------------------------------------------------------------------ */

NodeP num(double v) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Number;
    n->value = v;
    return n;
}

NodeP var(int i) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Var;
    n->var = i;
    return n;
}

NodeP timevar() {
    auto n = std::make_shared<Node>();
    n->kind = Kind::TimeVar;
    return n;
}

bool is_num(const NodeP& n, double v) {
    return n->kind == Kind::Number && n->value == v;
}

bool both_num(const NodeP& a, const NodeP& b) {
    return a->kind == Kind::Number && b->kind == Kind::Number;
}

NodeP mk(Kind k, NodeP a, NodeP b = nullptr) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

NodeP neg(NodeP a);
NodeP add(NodeP a, NodeP b);
NodeP sub(NodeP a, NodeP b);
NodeP mul(NodeP a, NodeP b);
NodeP divn(NodeP a, NodeP b);
NodeP pown(NodeP a, NodeP b);
NodeP call(Fn f, NodeP a, NodeP b = nullptr);

NodeP neg(NodeP a) {
    if (a->kind == Kind::Number) return num(-a->value);
    if (a->kind == Kind::Neg) return a->a;
    return mk(Kind::Neg, std::move(a));
}

NodeP add(NodeP a, NodeP b) {
    if (is_num(a, 0)) return b;
    if (is_num(b, 0)) return a;
    if (both_num(a, b)) return num(a->value + b->value);
    return mk(Kind::Add, std::move(a), std::move(b));
}

NodeP sub(NodeP a, NodeP b) {
    if (is_num(b, 0)) return a;
    if (is_num(a, 0)) return neg(std::move(b));
    if (both_num(a, b)) return num(a->value - b->value);
    return mk(Kind::Sub, std::move(a), std::move(b));
}

NodeP mul(NodeP a, NodeP b) {
    if (is_num(a, 0) || is_num(b, 0)) return num(0);
    if (is_num(a, 1)) return b;
    if (is_num(b, 1)) return a;
    if (both_num(a, b)) {
        double v = a->value * b->value;
        if (std::isfinite(v)) return num(v);
    }
    return mk(Kind::Mul, std::move(a), std::move(b));
}

NodeP divn(NodeP a, NodeP b) {
    if (is_num(a, 0)) return num(0); // derivative-construction shortcut
    if (is_num(b, 1)) return a;
    if (both_num(a, b) && b->value != 0) {
        double v = a->value / b->value;
        if (std::isfinite(v)) return num(v);
    }
    return mk(Kind::Div, std::move(a), std::move(b));
}

NodeP pown(NodeP a, NodeP b) {
    if (is_num(b, 1)) return a;
    if (is_num(b, 0)) return num(1);
    if (both_num(a, b)) {
        double v = std::pow(a->value, b->value);
        if (std::isfinite(v)) return num(v);
    }
    return mk(Kind::Pow, std::move(a), std::move(b));
}

NodeP call(Fn f, NodeP a, NodeP b) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Call;
    n->fn = f;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

/* ------------------------------------------------------------------ *
 *  parser                                                             *
 * ------------------------------------------------------------------ */

struct FnInfo {
    const char* name;
    Fn fn;
    int arity;
};

constexpr FnInfo kFns[] = {
    {"sin", Fn::Sin, 1},  {"cos", Fn::Cos, 1},   {"tan", Fn::Tan, 1},
    {"exp", Fn::Exp, 1},  {"log", Fn::Log, 1},   {"sqrt", Fn::Sqrt, 1},
    {"abs", Fn::Abs, 1},  {"sign", Fn::Sign, 1}, {"min", Fn::Min, 2},
    {"max", Fn::Max, 2},  {"pow", Fn::Pow, 2},
};

class Parser {
public:
    explicit Parser(std::string_view s) : s_(s) {}

    NodeP run() {
        NodeP e = expr();
        skip_ws();
        if (pos_ != s_.size()) fail("end of input");
        return e;
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& expected) {
        std::string msg = "syntax error at offset " + std::to_string(pos_) +
                          ": expected " + expected;
        if (pos_ < s_.size()) msg += ", found '" + std::string(1, s_[pos_]) + "'";
        else msg += ", found end of input";
        throw ParseError(pos_, expected, msg);
    }

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == c) { ++pos_; return true; }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < s_.size() ? s_[pos_] : '\0';
    }

    NodeP expr() {
        NodeP e = term();
        for (;;) {
            if (eat('+')) e = add(e, term());
            else if (eat('-')) e = sub(e, term());
            else return e;
        }
    }

    NodeP term() {
        NodeP e = unary();
        for (;;) {
            if (eat('*')) e = mul(e, unary());
            else if (eat('/')) e = mk(Kind::Div, e, unary()); // keep 0/u verbatim
            else return e;
        }
    }

    NodeP unary() {
        if (eat('-')) return neg(unary());
        return power();
    }

    NodeP power() {
        NodeP base = atom();
        if (eat('^')) return mk(Kind::Pow, base, unary()); // right associative
        return base;
    }

    NodeP atom() {
        skip_ws();
        if (pos_ >= s_.size()) fail("a number, name or '('");
        char c = s_[pos_];
        if (c == '(') {
            ++pos_;
            NodeP e = expr();
            if (!eat(')')) fail("')'");
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return ident();
        fail("a number, name or '('");
    }

    NodeP number() {
        const char* begin = s_.data() + pos_;
        const char* end = s_.data() + s_.size();
        double v = 0;
        auto res = std::from_chars(begin, end, v);
        if (res.ec != std::errc()) fail("a number");
        pos_ = static_cast<std::size_t>(res.ptr - s_.data());
        return num(v);
    }

    NodeP ident() {
        std::size_t start = pos_;
        while (pos_ < s_.size() &&
               (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
            ++pos_;
        std::string_view name = s_.substr(start, pos_ - start);

        if (peek() == '(') {
            for (const auto& f : kFns) {
                if (name == f.name) return fncall(f, start);
            }
            pos_ = start;
            fail("a known function (sin cos tan exp log sqrt abs sign min max pow)");
        }

        if (name == "t") return timevar();
        if (name == "pi") return num(std::numbers::pi);
        if (name == "x") return var(0);
        if (name.size() >= 2 && name[0] == 'x') {
            int idx = 0;
            auto res = std::from_chars(name.data() + 1, name.data() + name.size(), idx);
            if (res.ec == std::errc() && res.ptr == name.data() + name.size() && idx >= 1)
                return var(idx - 1);
        }
        pos_ = start;
        fail("a variable (x, x1..xd, t) or constant pi");
    }

    NodeP fncall(const FnInfo& f, std::size_t name_start) {
        eat('(');
        std::vector<NodeP> args;
        args.push_back(expr());
        while (eat(',')) args.push_back(expr());
        if (!eat(')')) fail("')'");
        if (static_cast<int>(args.size()) != f.arity) {
            pos_ = name_start;
            std::string what = std::string(f.name) + " takes " +
                               std::to_string(f.arity) + " argument(s), got " +
                               std::to_string(args.size());
            throw ParseError(pos_, "correct arity", "syntax error at offset " +
                             std::to_string(pos_) + ": " + what);
        }
        return call(f.fn, args[0], f.arity == 2 ? args[1] : nullptr);
    }
};

/* ------------------------------------------------------------------ *
 *  printing (minimal parentheses)                                     *
 * ------------------------------------------------------------------ */

int prec(const Node* n) {
    switch (n->kind) {
        case Kind::Add: case Kind::Sub: return 1;
        case Kind::Mul: case Kind::Div: return 2;
        case Kind::Neg: return 3;
        case Kind::Pow: return 4;
        default: return 5;
    }
}

const char* fn_name(Fn f) {
    for (const auto& i : kFns)
        if (i.fn == f) return i.name;
    return "?";
}

void print(const Node* n, std::string& out) {
    auto child = [&](const Node* c, bool need_parens) {
        if (need_parens) { out += '('; print(c, out); out += ')'; }
        else print(c, out);
    };
    switch (n->kind) {
        case Kind::Number: {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", n->value);
            out += buf;
            break;
        }
        case Kind::Var:
            if (n->var == 0) out += "x";
            else out += "x" + std::to_string(n->var + 1);
            break;
        case Kind::TimeVar: out += "t"; break;
        case Kind::Neg:
            out += '-';
            child(n->a.get(), prec(n->a.get()) < 2);
            break;
        case Kind::Add:
            child(n->a.get(), prec(n->a.get()) < 1);
            out += " + ";
            child(n->b.get(), prec(n->b.get()) < 1);
            break;
        case Kind::Sub:
            child(n->a.get(), prec(n->a.get()) < 1);
            out += " - ";
            child(n->b.get(), prec(n->b.get()) <= 1);
            break;
        case Kind::Mul:
            child(n->a.get(), prec(n->a.get()) < 2);
            out += "*";
            child(n->b.get(), prec(n->b.get()) < 2);
            break;
        case Kind::Div:
            child(n->a.get(), prec(n->a.get()) < 2);
            out += "/";
            child(n->b.get(), prec(n->b.get()) <= 2);
            break;
        case Kind::Pow:
            child(n->a.get(), prec(n->a.get()) <= 4);
            out += "^";
            child(n->b.get(), prec(n->b.get()) < 4);
            break;
        case Kind::Call:
            out += fn_name(n->fn);
            out += '(';
            print(n->a.get(), out);
            if (n->b) { out += ", "; print(n->b.get(), out); }
            out += ')';
            break;
    }
}

/* ------------------------------------------------------------------ *
 *  checked evaluation                                                 *
 * ------------------------------------------------------------------ */

struct EvalCtx {
    std::span<const double> x;
    double t;
};

[[noreturn]] void eval_fail(const Node* n, const EvalCtx& c, const std::string& what) {
    std::string sub;
    print(n, sub);
    std::string msg = what + " in '" + sub + "' at x=(";
    for (std::size_t i = 0; i < c.x.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", c.x[i]);
        if (i) msg += ", ";
        msg += buf;
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "), t=%.17g", c.t);
    msg += buf;
    throw EvalError(msg);
}

double eval_node(const Node* n, const EvalCtx& c) {
    switch (n->kind) {
        case Kind::Number: return n->value;
        case Kind::Var:
            if (n->var >= static_cast<int>(c.x.size()))
                eval_fail(n, c, "unbound variable x" + std::to_string(n->var + 1));
            return c.x[static_cast<std::size_t>(n->var)];
        case Kind::TimeVar: return c.t;
        case Kind::Neg: return -eval_node(n->a.get(), c);
        case Kind::Add: return eval_node(n->a.get(), c) + eval_node(n->b.get(), c);
        case Kind::Sub: return eval_node(n->a.get(), c) - eval_node(n->b.get(), c);
        case Kind::Mul: {
            double v = eval_node(n->a.get(), c) * eval_node(n->b.get(), c);
            if (!std::isfinite(v)) eval_fail(n, c, "non-finite result");
            return v;
        }
        case Kind::Div: {
            double a = eval_node(n->a.get(), c);
            double b = eval_node(n->b.get(), c);
            if (b == 0) eval_fail(n, c, "division by zero");
            double v = a / b;
            if (!std::isfinite(v)) eval_fail(n, c, "non-finite result");
            return v;
        }
        case Kind::Pow: case Kind::Call: {
            if (n->kind == Kind::Pow || n->fn == Fn::Pow) {
                double a = eval_node(n->a.get(), c);
                double b = eval_node(n->b.get(), c);
                double v = std::pow(a, b);
                if (!std::isfinite(v)) eval_fail(n, c, "domain error in power");
                return v;
            }
            double a = eval_node(n->a.get(), c);
            double v = 0;
            switch (n->fn) {
                case Fn::Sin: v = std::sin(a); break;
                case Fn::Cos: v = std::cos(a); break;
                case Fn::Tan: v = std::tan(a); break;
                case Fn::Exp:
                    v = std::exp(a);
                    if (!std::isfinite(v)) eval_fail(n, c, "overflow");
                    break;
                case Fn::Log:
                    if (a <= 0) eval_fail(n, c, "log of a non-positive number");
                    v = std::log(a);
                    break;
                case Fn::Sqrt:
                    if (a < 0) eval_fail(n, c, "sqrt of a negative number");
                    v = std::sqrt(a);
                    break;
                case Fn::Abs: v = std::fabs(a); break;
                case Fn::Sign: v = (a > 0) - (a < 0); break;
                case Fn::Min: case Fn::Max: {
                    double b = eval_node(n->b.get(), c);
                    v = (n->fn == Fn::Min) ? std::fmin(a, b) : std::fmax(a, b);
                    break;
                }
                default: break;
            }
            return v;
        }
    }
    return 0; // unreachable
}

/* ------------------------------------------------------------------ *
 *  differentiation                                                     *
 * ------------------------------------------------------------------ */

// right-continuous sign: +1 for u >= 0, -1 for u < 0
NodeP rsign(const NodeP& u) {
    NodeP s = call(Fn::Sign, u);
    return add(s, sub(num(1), call(Fn::Abs, call(Fn::Sign, u))));
}

NodeP d(const NodeP& n, int v);

NodeP d_power(const NodeP& base, const NodeP& expo, int v) {
    if (expo->kind == Kind::Number) {
        // e * u^(e-1) * u'  (safe for negative bases with integer exponents)
        double e = expo->value;
        return mul(mul(num(e), pown(base, num(e - 1))), d(base, v));
    }
    // u^v * (v' log u + v u'/u)
    NodeP u = base, w = expo;
    NodeP part1 = mul(d(w, v), call(Fn::Log, u));
    NodeP du = d(u, v);
    NodeP part2 = is_num(du, 0) ? num(0) : mul(w, mk(Kind::Div, du, u));
    return mul(pown(u, w), add(part1, part2));
}

NodeP d(const NodeP& n, int v) {
    switch (n->kind) {
        case Kind::Number: return num(0);
        case Kind::Var: return num(v == n->var ? 1 : 0);
        case Kind::TimeVar: return num(v == kTimeVar ? 1 : 0);
        case Kind::Neg: return neg(d(n->a, v));
        case Kind::Add: return add(d(n->a, v), d(n->b, v));
        case Kind::Sub: return sub(d(n->a, v), d(n->b, v));
        case Kind::Mul: return add(mul(d(n->a, v), n->b), mul(n->a, d(n->b, v)));
        case Kind::Div: {
            NodeP top = sub(mul(d(n->a, v), n->b), mul(n->a, d(n->b, v)));
            if (is_num(top, 0)) return num(0);
            return mk(Kind::Div, top, pown(n->b, num(2)));
        }
        case Kind::Pow: return d_power(n->a, n->b, v);
        case Kind::Call:
            switch (n->fn) {
                case Fn::Sin: return mul(call(Fn::Cos, n->a), d(n->a, v));
                case Fn::Cos: return neg(mul(call(Fn::Sin, n->a), d(n->a, v)));
                case Fn::Tan: {
                    NodeP du = d(n->a, v);
                    if (is_num(du, 0)) return num(0);
                    return mk(Kind::Div, du, pown(call(Fn::Cos, n->a), num(2)));
                }
                case Fn::Exp: return mul(call(Fn::Exp, n->a), d(n->a, v));
                case Fn::Log: {
                    NodeP du = d(n->a, v);
                    if (is_num(du, 0)) return num(0);
                    return mk(Kind::Div, du, n->a);
                }
                case Fn::Sqrt: {
                    NodeP du = d(n->a, v);
                    if (is_num(du, 0)) return num(0);
                    return mk(Kind::Div, du, mul(num(2), call(Fn::Sqrt, n->a)));
                }
                case Fn::Abs: return mul(rsign(n->a), d(n->a, v));
                case Fn::Sign: return num(0);
                case Fn::Min: case Fn::Max: {
                    // s = +1 where b >= a: min is a there, max is b there
                    NodeP s = rsign(sub(n->b, n->a));
                    NodeP wa = divn(add(num(1), s), num(2));
                    NodeP wb = divn(sub(num(1), s), num(2));
                    if (n->fn == Fn::Min)
                        return add(mul(wa, d(n->a, v)), mul(wb, d(n->b, v)));
                    return add(mul(wa, d(n->b, v)), mul(wb, d(n->a, v)));
                }
                case Fn::Pow: return d_power(n->a, n->b, v);
            }
    }
    return num(0); // unreachable
}

/* ------------------------------------------------------------------ *
 *  misc traversals                                                    *
 * ------------------------------------------------------------------ */

template <class F>
void walk(const Node* n, F&& f) {
    f(n);
    if (n->a) walk(n->a.get(), f);
    if (n->b) walk(n->b.get(), f);
}

} // namespace

std::string Expr::str() const {
    if (!root_) return "";
    std::string out;
    print(root_.get(), out);
    return out;
}

Expr parse(std::string_view text) {
    Parser p(text);
    return Expr(p.run());
}

double evaluate(const Expr& e, std::span<const double> x, double t) {
    if (e.empty()) throw Error(errc::invalid, "evaluate: empty expression");
    EvalCtx c{x, t};
    return eval_node(e.root(), c);
}

Expr differentiate(const Expr& e, int v) {
    if (e.empty()) throw Error(errc::invalid, "differentiate: empty expression");
    return Expr(d(e.share(), v));
}

int max_var_index(const Expr& e) {
    int mx = -1;
    if (!e.empty())
        walk(e.root(), [&](const Node* n) {
            if (n->kind == Kind::Var && n->var > mx) mx = n->var;
        });
    return mx;
}

bool uses_time(const Expr& e) {
    bool t = false;
    if (!e.empty())
        walk(e.root(), [&](const Node* n) { if (n->kind == Kind::TimeVar) t = true; });
    return t;
}

bool is_constant(const Expr& e) {
    return max_var_index(e) < 0 && !uses_time(e);
}

static NodeP nonempty(const Expr& e) {
    if (e.empty()) throw Error(errc::invalid, "cannot compose an empty expression");
    return e.share();
}

Expr make_num(double v) { return Expr(num(v)); }
Expr make_add(const Expr& a, const Expr& b) { return Expr(add(nonempty(a), nonempty(b))); }
Expr make_sub(const Expr& a, const Expr& b) { return Expr(sub(nonempty(a), nonempty(b))); }
Expr make_mul(const Expr& a, const Expr& b) { return Expr(mul(nonempty(a), nonempty(b))); }
Expr make_div(const Expr& a, const Expr& b) { return Expr(divn(nonempty(a), nonempty(b))); }

/* ------------------------------------------------------------------ *
 *  bytecode                                                           *
 * ------------------------------------------------------------------ */

namespace {
enum : uint8_t {
    OP_K, OP_X, OP_T, OP_NEG, OP_ADD, OP_SUB, OP_MUL, OP_DIV, OP_POW,
    OP_SIN, OP_COS, OP_TAN, OP_EXP, OP_LOG, OP_SQRT, OP_ABS, OP_SIGN,
    OP_MIN, OP_MAX,
};
} // namespace

Program Program::compile(const Expr& e) {
    if (e.empty()) throw Error(errc::invalid, "compile: empty expression");
    Program p;
    int depth = 0;

    // iterative post-order emit
    struct Item { const Node* n; bool emit; };
    std::vector<Item> stack{{e.root(), false}};
    std::vector<const Node*> order;
    while (!stack.empty()) {
        auto [n, emit] = stack.back();
        stack.pop_back();
        if (emit) { order.push_back(n); continue; }
        stack.push_back({n, true});
        if (n->b) stack.push_back({n->b.get(), false});
        if (n->a) stack.push_back({n->a.get(), false});
    }

    for (const Node* n : order) {
        Op op{};
        int delta = 0;
        switch (n->kind) {
            case Kind::Number: op.code = OP_K; op.k = n->value; delta = 1; break;
            case Kind::Var:    op.code = OP_X; op.slot = static_cast<uint8_t>(n->var); delta = 1; break;
            case Kind::TimeVar: op.code = OP_T; delta = 1; break;
            case Kind::Neg: op.code = OP_NEG; break;
            case Kind::Add: op.code = OP_ADD; delta = -1; break;
            case Kind::Sub: op.code = OP_SUB; delta = -1; break;
            case Kind::Mul: op.code = OP_MUL; delta = -1; break;
            case Kind::Div: op.code = OP_DIV; delta = -1; break;
            case Kind::Pow: op.code = OP_POW; delta = -1; break;
            case Kind::Call:
                switch (n->fn) {
                    case Fn::Sin: op.code = OP_SIN; break;
                    case Fn::Cos: op.code = OP_COS; break;
                    case Fn::Tan: op.code = OP_TAN; break;
                    case Fn::Exp: op.code = OP_EXP; break;
                    case Fn::Log: op.code = OP_LOG; break;
                    case Fn::Sqrt: op.code = OP_SQRT; break;
                    case Fn::Abs: op.code = OP_ABS; break;
                    case Fn::Sign: op.code = OP_SIGN; break;
                    case Fn::Min: op.code = OP_MIN; delta = -1; break;
                    case Fn::Max: op.code = OP_MAX; delta = -1; break;
                    case Fn::Pow: op.code = OP_POW; delta = -1; break;
                }
                break;
        }
        p.ops_.push_back(op);
        depth += delta;
        if (depth > p.stack_need_) p.stack_need_ = depth;
    }
    if (p.stack_need_ > 64)
        throw Error(errc::invalid, "expression too deep to compile");
    return p;
}

double Program::run(const double* x, double t) const noexcept {
    double st[64];
    int sp = 0;
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    for (const Op& op : ops_) {
        switch (op.code) {
            case OP_K: st[sp++] = op.k; break;
            case OP_X: st[sp++] = x[op.slot]; break;
            case OP_T: st[sp++] = t; break;
            case OP_NEG: st[sp - 1] = -st[sp - 1]; break;
            case OP_ADD: --sp; st[sp - 1] += st[sp]; break;
            case OP_SUB: --sp; st[sp - 1] -= st[sp]; break;
            case OP_MUL: --sp; st[sp - 1] *= st[sp]; break;
            case OP_DIV:
                --sp;
                st[sp - 1] = (st[sp] == 0) ? nan : st[sp - 1] / st[sp];
                break;
            case OP_POW: {
                --sp;
                double v = std::pow(st[sp - 1], st[sp]);
                st[sp - 1] = std::isfinite(v) ? v : nan;
                break;
            }
            case OP_SIN: st[sp - 1] = std::sin(st[sp - 1]); break;
            case OP_COS: st[sp - 1] = std::cos(st[sp - 1]); break;
            case OP_TAN: st[sp - 1] = std::tan(st[sp - 1]); break;
            case OP_EXP: {
                double v = std::exp(st[sp - 1]);
                st[sp - 1] = std::isfinite(v) ? v : nan;
                break;
            }
            case OP_LOG: st[sp - 1] = (st[sp - 1] <= 0) ? nan : std::log(st[sp - 1]); break;
            case OP_SQRT: st[sp - 1] = (st[sp - 1] < 0) ? nan : std::sqrt(st[sp - 1]); break;
            case OP_ABS: st[sp - 1] = std::fabs(st[sp - 1]); break;
            case OP_SIGN: st[sp - 1] = double((st[sp - 1] > 0) - (st[sp - 1] < 0)); break;
            case OP_MIN: {
                --sp;
                double a = st[sp - 1], b = st[sp];
                st[sp - 1] = (std::isnan(a) || std::isnan(b)) ? nan : (a < b ? a : b);
                break;
            }
            case OP_MAX: {
                --sp;
                double a = st[sp - 1], b = st[sp];
                st[sp - 1] = (std::isnan(a) || std::isnan(b)) ? nan : (a > b ? a : b);
                break;
            }
        }
    }
    double v = st[0];
    return std::isfinite(v) ? v : nan;
}

} // namespace fpk::expr
