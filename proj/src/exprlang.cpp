#include "nodal/exprlang.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace nodal::expr {

namespace {

enum class Tok { num, ident, plus, minus, star, slash, caret, lparen, rparen, end };

struct Token {
    Tok kind;
    double num = 0.0;
    std::string text;
    size_t offset = 0;
};

class Lexer {
public:
    explicit Lexer(std::string_view s) : src_(s) { advance(); }

    const Token& peek() const { return cur_; }
    Token take() {
        Token t = cur_;
        advance();
        return t;
    }

private:
    void advance() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        cur_.offset = pos_;
        if (pos_ >= src_.size()) {
            cur_.kind = Tok::end;
            return;
        }
        char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* begin = src_.data() + pos_;
            char* endp = nullptr;
            double v = std::strtod(begin, &endp);
            if (endp == begin) throw ParseError("syntax error", pos_);
            cur_.kind = Tok::num;
            cur_.num = v;
            pos_ += static_cast<size_t>(endp - begin);
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t start = pos_;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                ++pos_;
            cur_.kind = Tok::ident;
            cur_.text = std::string(src_.substr(start, pos_ - start));
            return;
        }
        switch (c) {
            case '+': cur_.kind = Tok::plus; break;
            case '-': cur_.kind = Tok::minus; break;
            case '*': cur_.kind = Tok::star; break;
            case '/': cur_.kind = Tok::slash; break;
            case '^': cur_.kind = Tok::caret; break;
            case '(': cur_.kind = Tok::lparen; break;
            case ')': cur_.kind = Tok::rparen; break;
            default: throw ParseError("syntax error: unexpected character", pos_);
        }
        ++pos_;
    }

    std::string_view src_;
    size_t pos_ = 0;
    Token cur_;
};

struct Builder {
    std::vector<Node> nodes;
    Arity arity;
    bool saw_x = false;
    bool saw_t = false;

    int add(Node n) {
        nodes.push_back(n);
        return static_cast<int>(nodes.size()) - 1;
    }
};

// Precedence: ^ (right-assoc) > unary minus > * / > + -.
constexpr int kBpAdd = 10;
constexpr int kBpMul = 20;
constexpr int kBpNeg = 30;
constexpr int kBpPow = 40;

int parse_expr(Lexer& lx, Builder& b, int min_bp);

int parse_prefix(Lexer& lx, Builder& b) {
    Token t = lx.take();
    switch (t.kind) {
        case Tok::num:
            return b.add({Op::constant, t.num, -1, -1});
        case Tok::minus: {
            int a = parse_expr(lx, b, kBpNeg);
            return b.add({Op::neg, 0.0, a, -1});
        }
        case Tok::lparen: {
            int a = parse_expr(lx, b, 0);
            Token close = lx.take();
            if (close.kind != Tok::rparen) throw ParseError("syntax error: expected ')'", close.offset);
            return a;
        }
        case Tok::ident: {
            if (t.text == "pi") return b.add({Op::pi_const, 0.0, -1, -1});
            if (t.text == "x") {
                b.saw_x = true;
                return b.add({Op::var_x, 0.0, -1, -1});
            }
            if (t.text == "t") {
                if (b.arity == Arity::univariate)
                    throw ParseError("arity violation: 't' in a univariate expression", t.offset);
                b.saw_t = true;
                return b.add({Op::var_t, 0.0, -1, -1});
            }
            Op fn;
            if (t.text == "sin") fn = Op::fn_sin;
            else if (t.text == "cos") fn = Op::fn_cos;
            else if (t.text == "exp") fn = Op::fn_exp;
            else if (t.text == "sqrt") fn = Op::fn_sqrt;
            else if (t.text == "abs") fn = Op::fn_abs;
            else throw ParseError("unknown identifier '" + t.text + "'", t.offset);
            Token open = lx.take();
            if (open.kind != Tok::lparen)
                throw ParseError("syntax error: expected '(' after function name", open.offset);
            int a = parse_expr(lx, b, 0);
            Token close = lx.take();
            if (close.kind != Tok::rparen) throw ParseError("syntax error: expected ')'", close.offset);
            return b.add({fn, 0.0, a, -1});
        }
        default:
            throw ParseError("syntax error", t.offset);
    }
}

int parse_expr(Lexer& lx, Builder& b, int min_bp) {
    int lhs = parse_prefix(lx, b);
    for (;;) {
        Tok k = lx.peek().kind;
        int lbp;
        Op op;
        switch (k) {
            case Tok::plus: lbp = kBpAdd; op = Op::add; break;
            case Tok::minus: lbp = kBpAdd; op = Op::sub; break;
            case Tok::star: lbp = kBpMul; op = Op::mul; break;
            case Tok::slash: lbp = kBpMul; op = Op::div; break;
            case Tok::caret: lbp = kBpPow; op = Op::pow; break;
            default: return lhs;
        }
        if (lbp < min_bp) return lhs;
        lx.take();
        // Right-associative ^ recurses at its own binding power; the
        // left-associative operators recurse one notch above.
        int rhs = parse_expr(lx, b, k == Tok::caret ? lbp : lbp + 1);
        lhs = b.add({op, 0.0, lhs, rhs});
    }
}

int precedence_of(Op op) {
    switch (op) {
        case Op::add:
        case Op::sub: return kBpAdd;
        case Op::mul:
        case Op::div: return kBpMul;
        case Op::neg: return kBpNeg;
        case Op::pow: return kBpPow;
        default: return 100;
    }
}

void print_node(const std::vector<Node>& nodes, int idx, int parent_bp, bool right_side,
                std::string& out) {
    const Node& n = nodes[static_cast<size_t>(idx)];
    int my_bp = precedence_of(n.op);
    bool paren = false;
    if (my_bp < parent_bp) paren = true;
    // Equal precedence on the right side of a left-associative operator (or the
    // left side of ^) needs explicit parens to survive a round trip.
    if (my_bp == parent_bp && right_side) paren = true;
    if (paren) out += '(';
    switch (n.op) {
        case Op::constant: {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", n.value);
            out += buf;
            break;
        }
        case Op::pi_const: out += "pi"; break;
        case Op::var_x: out += 'x'; break;
        case Op::var_t: out += 't'; break;
        case Op::neg:
            out += '-';
            print_node(nodes, n.a, kBpNeg, true, out);
            break;
        case Op::add:
        case Op::sub:
        case Op::mul:
        case Op::div: {
            char sym = n.op == Op::add ? '+' : n.op == Op::sub ? '-' : n.op == Op::mul ? '*' : '/';
            print_node(nodes, n.a, my_bp, false, out);
            out += sym;
            print_node(nodes, n.b, my_bp + 1, false, out);
            break;
        }
        case Op::pow:
            print_node(nodes, n.a, my_bp + 1, false, out);
            out += '^';
            print_node(nodes, n.b, my_bp, false, out);
            break;
        case Op::fn_sin:
        case Op::fn_cos:
        case Op::fn_exp:
        case Op::fn_sqrt:
        case Op::fn_abs: {
            const char* name = n.op == Op::fn_sin    ? "sin"
                               : n.op == Op::fn_cos  ? "cos"
                               : n.op == Op::fn_exp  ? "exp"
                               : n.op == Op::fn_sqrt ? "sqrt"
                                                     : "abs";
            out += name;
            out += '(';
            print_node(nodes, n.a, 0, false, out);
            out += ')';
            break;
        }
    }
    if (paren) out += ')';
}

bool node_equal(const std::vector<Node>& an, int ai, const std::vector<Node>& bn, int bi) {
    const Node& a = an[static_cast<size_t>(ai)];
    const Node& b = bn[static_cast<size_t>(bi)];
    if (a.op != b.op) return false;
    if (a.op == Op::constant) {
        // bitwise comparison: a printed constant must reparse identically
        return a.value == b.value || (std::isnan(a.value) && std::isnan(b.value));
    }
    if (a.a >= 0 && !node_equal(an, a.a, bn, b.a)) return false;
    if (a.b >= 0 && !node_equal(an, a.b, bn, b.b)) return false;
    return true;
}

bool node_is_zero(const std::vector<Node>& nodes, int idx) {
    const Node& n = nodes[static_cast<size_t>(idx)];
    switch (n.op) {
        case Op::constant: return n.value == 0.0;
        case Op::neg: return node_is_zero(nodes, n.a);
        case Op::add:
        case Op::sub: return node_is_zero(nodes, n.a) && node_is_zero(nodes, n.b);
        case Op::mul: return node_is_zero(nodes, n.a) || node_is_zero(nodes, n.b);
        default: return false;
    }
}

}  // namespace

Expr Expr::parse(std::string_view source, Arity arity) {
    if (source.empty()) throw ParseError("syntax error: empty expression", 0);
    Lexer lx(source);
    Builder b;
    b.arity = arity;
    int root = parse_expr(lx, b, 0);
    Token tail = lx.take();
    if (tail.kind != Tok::end) throw ParseError("syntax error: trailing input", tail.offset);
    Expr e;
    e.nodes_ = std::move(b.nodes);
    e.root_ = root;
    e.arity_ = arity;
    e.uses_x_ = b.saw_x;
    e.uses_t_ = b.saw_t;
    return e;
}

double Expr::eval_node(int idx, double x, const double* t) const {
    const Node& n = nodes_[static_cast<size_t>(idx)];
    switch (n.op) {
        case Op::constant: return n.value;
        case Op::pi_const: return PI;
        case Op::var_x: return x;
        case Op::var_t: return *t;
        case Op::neg: return -eval_node(n.a, x, t);
        case Op::add: return eval_node(n.a, x, t) + eval_node(n.b, x, t);
        case Op::sub: return eval_node(n.a, x, t) - eval_node(n.b, x, t);
        case Op::mul: return eval_node(n.a, x, t) * eval_node(n.b, x, t);
        case Op::div: return eval_node(n.a, x, t) / eval_node(n.b, x, t);
        case Op::pow: {
            double base = eval_node(n.a, x, t);
            double e = eval_node(n.b, x, t);
            if (base < 0.0 && !integer_exponent(e))
                throw DomainError("negative base with non-integer exponent");
            return std::pow(base, e);
        }
        case Op::fn_sin: return std::sin(eval_node(n.a, x, t));
        case Op::fn_cos: return std::cos(eval_node(n.a, x, t));
        case Op::fn_exp: return std::exp(eval_node(n.a, x, t));
        case Op::fn_sqrt: {
            double v = eval_node(n.a, x, t);
            if (v < 0.0) throw DomainError("sqrt of negative value");
            return std::sqrt(v);
        }
        case Op::fn_abs: return std::fabs(eval_node(n.a, x, t));
    }
    throw DomainError("corrupt expression node");
}

double Expr::eval(double x) const {
    if (arity_ == Arity::bivariate) throw DomainError("bivariate expression needs t");
    double v = eval_node(root_, x, nullptr);
    if (!std::isfinite(v)) throw DomainError("non-finite expression value");
    return v;
}

double Expr::eval(double x, double t) const {
    if (arity_ == Arity::univariate) throw DomainError("univariate expression given extra t");
    double v = eval_node(root_, x, &t);
    if (!std::isfinite(v)) throw DomainError("non-finite expression value");
    return v;
}

bool Expr::is_zero() const { return node_is_zero(nodes_, root_); }

std::string Expr::pretty() const {
    std::string out;
    print_node(nodes_, root_, 0, false, out);
    return out;
}

bool Expr::same_structure(const Expr& other) const {
    return node_equal(nodes_, root_, other.nodes_, other.root_);
}

SampledFunction sample(const Expr& e, const Grid& grid, std::optional<double> t_slice) {
    std::vector<double> v(static_cast<size_t>(grid.size()));
    const bool biv = e.arity() == Arity::bivariate;
    if (biv && !t_slice) throw DomainError("bivariate expression needs a t slice");
    for (int i = 0; i < grid.size(); ++i) {
        try {
            v[static_cast<size_t>(i)] = biv ? e.eval(grid.x(i), *t_slice) : e.eval(grid.x(i));
        } catch (const DomainError& err) {
            throw DomainError(std::string(err.what()) + " at grid index " + std::to_string(i));
        }
    }
    return SampledFunction(grid, std::move(v));
}

}  // namespace nodal::expr
