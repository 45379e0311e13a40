#include "aniso/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace aniso {

namespace {

ExprPtr mkConst(double v, std::size_t pos = 0) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprKind::Const;
    n->value = v;
    n->pos = pos;
    return n;
}

ExprPtr mkVar(int var, std::size_t pos = 0) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprKind::Var;
    n->var = var;
    n->pos = pos;
    return n;
}

ExprPtr mkBin(ExprKind kind, ExprPtr a, ExprPtr b, std::size_t pos = 0) {
    auto n = std::make_shared<ExprNode>();
    n->kind = kind;
    n->a = std::move(a);
    n->b = std::move(b);
    n->pos = pos;
    return n;
}

ExprPtr mkNeg(ExprPtr a, std::size_t pos = 0) {
    if (a->kind == ExprKind::Const) return mkConst(-a->value, pos);
    if (a->kind == ExprKind::Neg) return a->a;
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprKind::Neg;
    n->a = std::move(a);
    n->pos = pos;
    return n;
}

ExprPtr mkPow(ExprPtr a, long long k, std::size_t pos = 0) {
    if (k == 0) return mkConst(1.0, pos);
    if (k == 1) return a;
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprKind::Pow;
    n->a = std::move(a);
    n->exponent = k;
    n->pos = pos;
    return n;
}

ExprPtr mkFun(FunKind f, ExprPtr a, std::size_t pos = 0) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprKind::Fun;
    n->fun = f;
    n->a = std::move(a);
    n->pos = pos;
    return n;
}

bool isConst(const ExprPtr& e, double v) {
    return e->kind == ExprKind::Const && e->value == v;
}

// Simplifying constructors used by `derivative` so derivative trees do not
// accumulate multiplications by literal 0 and 1.
ExprPtr sAdd(ExprPtr a, ExprPtr b) {
    if (isConst(a, 0.0)) return b;
    if (isConst(b, 0.0)) return a;
    return mkBin(ExprKind::Add, std::move(a), std::move(b));
}

ExprPtr sSub(ExprPtr a, ExprPtr b) {
    if (isConst(b, 0.0)) return a;
    if (isConst(a, 0.0)) return mkNeg(std::move(b));
    return mkBin(ExprKind::Sub, std::move(a), std::move(b));
}

ExprPtr sMul(ExprPtr a, ExprPtr b) {
    if (isConst(a, 0.0) || isConst(b, 0.0)) return mkConst(0.0);
    if (isConst(a, 1.0)) return b;
    if (isConst(b, 1.0)) return a;
    return mkBin(ExprKind::Mul, std::move(a), std::move(b));
}

ExprPtr sDiv(ExprPtr a, ExprPtr b) {
    if (isConst(a, 0.0)) return a;
    if (isConst(b, 1.0)) return a;
    return mkBin(ExprKind::Div, std::move(a), std::move(b));
}

// ---------------------------------------------------------------------------
// Tokenizer / parser

enum class Tok { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, End };

struct Lexer {
    const std::string& text;
    std::size_t i = 0; // 0-based offset of the next unread character

    Tok kind = Tok::End;
    std::size_t pos = 1;  // 1-based position of the current token
    double number = 0.0;
    std::string ident;

    explicit Lexer(const std::string& t) : text(t) { advance(); }

    [[noreturn]] void fail(const std::string& msg, std::size_t at) const {
        std::ostringstream os;
        os << msg << " at position " << at;
        throw ParseError(os.str(), at);
    }

    void advance() {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        pos = i + 1;
        if (i >= text.size()) {
            kind = Tok::End;
            return;
        }
        char c = text[i];
        switch (c) {
            case '+': kind = Tok::Plus; ++i; return;
            case '-': kind = Tok::Minus; ++i; return;
            case '*': kind = Tok::Star; ++i; return;
            case '/': kind = Tok::Slash; ++i; return;
            case '^': kind = Tok::Caret; ++i; return;
            case '(': kind = Tok::LParen; ++i; return;
            case ')': kind = Tok::RParen; ++i; return;
            default: break;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            std::size_t start = i;
            while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
            if (i < text.size() && text[i] == '.') {
                ++i;
                while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
            }
            if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
                std::size_t mark = i;
                ++i;
                if (i < text.size() && (text[i] == '+' || text[i] == '-')) ++i;
                if (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
                    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
                } else {
                    i = mark; // the 'e' starts an identifier, not an exponent
                }
            }
            std::string lit = text.substr(start, i - start);
            if (lit == ".") fail("malformed number", start + 1);
            char* end = nullptr;
            number = std::strtod(lit.c_str(), &end);
            if (end != lit.c_str() + lit.size()) fail("malformed number", start + 1);
            kind = Tok::Number;
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = i;
            while (i < text.size() &&
                   (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_'))
                ++i;
            ident = text.substr(start, i - start);
            kind = Tok::Ident;
            return;
        }
        fail(std::string("unexpected character '") + c + "'", pos);
    }
};

struct Parser {
    Lexer lex;
    int n, m;

    Parser(const std::string& text, int n_, int m_) : lex(text), n(n_), m(m_) {}

    ExprPtr parse() {
        if (lex.kind == Tok::End) lex.fail("empty expression", 1);
        ExprPtr e = parseSum();
        if (lex.kind != Tok::End) lex.fail("unexpected trailing input", lex.pos);
        return e;
    }

    ExprPtr parseSum() {
        ExprPtr e = parseTerm();
        while (lex.kind == Tok::Plus || lex.kind == Tok::Minus) {
            bool plus = lex.kind == Tok::Plus;
            std::size_t pos = lex.pos;
            lex.advance();
            ExprPtr rhs = parseTerm();
            e = mkBin(plus ? ExprKind::Add : ExprKind::Sub, std::move(e), std::move(rhs), pos);
        }
        return e;
    }

    ExprPtr parseTerm() {
        ExprPtr e = parseFactor();
        while (lex.kind == Tok::Star || lex.kind == Tok::Slash) {
            bool mul = lex.kind == Tok::Star;
            std::size_t pos = lex.pos;
            lex.advance();
            ExprPtr rhs = parseFactor();
            e = mkBin(mul ? ExprKind::Mul : ExprKind::Div, std::move(e), std::move(rhs), pos);
        }
        return e;
    }

    ExprPtr parseFactor() {
        if (lex.kind == Tok::Minus) {
            std::size_t pos = lex.pos;
            lex.advance();
            return mkNeg(parseFactor(), pos);
        }
        return parsePower();
    }

    ExprPtr parsePower() {
        ExprPtr e = parseAtom();
        while (lex.kind == Tok::Caret) {
            std::size_t pos = lex.pos;
            lex.advance();
            if (lex.kind != Tok::Number)
                lex.fail("exponent must be a non-negative integer literal", lex.pos);
            double v = lex.number;
            long long k = static_cast<long long>(v);
            if (v < 0.0 || static_cast<double>(k) != v)
                lex.fail("exponent must be a non-negative integer literal", lex.pos);
            lex.advance();
            e = mkPow(std::move(e), k, pos);
        }
        return e;
    }

    ExprPtr parseAtom() {
        switch (lex.kind) {
            case Tok::Number: {
                ExprPtr e = mkConst(lex.number, lex.pos);
                lex.advance();
                return e;
            }
            case Tok::LParen: {
                lex.advance();
                ExprPtr e = parseSum();
                if (lex.kind != Tok::RParen) lex.fail("expected ')'", lex.pos);
                lex.advance();
                return e;
            }
            case Tok::Ident:
                return parseIdent();
            default:
                lex.fail("expected a number, variable, function, or '('", lex.pos);
        }
    }

    ExprPtr parseIdent() {
        std::string name = lex.ident;
        std::size_t pos = lex.pos;

        FunKind f;
        bool isFun = true;
        if (name == "sin") f = FunKind::Sin;
        else if (name == "cos") f = FunKind::Cos;
        else if (name == "exp") f = FunKind::Exp;
        else if (name == "log") f = FunKind::Log;
        else if (name == "sqrt") f = FunKind::Sqrt;
        else if (name == "tanh") f = FunKind::Tanh;
        else isFun = false;

        if (isFun) {
            lex.advance();
            if (lex.kind != Tok::LParen) lex.fail("expected '(' after function name", lex.pos);
            lex.advance();
            ExprPtr arg = parseSum();
            if (lex.kind != Tok::RParen) lex.fail("expected ')'", lex.pos);
            lex.advance();
            return mkFun(f, std::move(arg), pos);
        }

        if ((name[0] == 'x' || name[0] == 'y') && name.size() > 1) {
            bool digits = true;
            for (std::size_t k = 1; k < name.size(); ++k)
                if (!std::isdigit(static_cast<unsigned char>(name[k]))) digits = false;
            if (digits) {
                long idx = std::strtol(name.c_str() + 1, nullptr, 10);
                int limit = name[0] == 'x' ? n : m;
                if (idx < 1 || idx > limit) {
                    std::ostringstream os;
                    os << "variable '" << name << "' out of range (have "
                       << (name[0] == 'x' ? "x1..x" : "y1..y") << limit << ")";
                    lex.fail(os.str(), pos);
                }
                lex.advance();
                return mkVar(name[0] == 'x' ? static_cast<int>(idx - 1)
                                            : n + static_cast<int>(idx - 1),
                             pos);
            }
        }
        lex.fail("unknown identifier '" + name + "'", pos);
    }
};

// ---------------------------------------------------------------------------
// Printer (minimal parentheses)

int precedence(const ExprNode& e) {
    switch (e.kind) {
        case ExprKind::Add:
        case ExprKind::Sub: return 1;
        case ExprKind::Mul:
        case ExprKind::Div: return 2;
        case ExprKind::Neg: return 3;
        case ExprKind::Pow: return 4;
        case ExprKind::Const:
            return std::signbit(e.value) ? 3 : 5; // "-5" binds like unary minus
        default: return 5;
    }
}

const char* funName(FunKind f) {
    switch (f) {
        case FunKind::Sin: return "sin";
        case FunKind::Cos: return "cos";
        case FunKind::Exp: return "exp";
        case FunKind::Log: return "log";
        case FunKind::Sqrt: return "sqrt";
        case FunKind::Tanh: return "tanh";
    }
    return "?";
}

void printNumber(std::ostream& os, double v) {
    std::ostringstream tmp;
    tmp.precision(17);
    tmp << v;
    os << tmp.str();
}

void printNode(std::ostream& os, const ExprNode& e, int n);

void printChild(std::ostream& os, const ExprNode& child, int n, int minPrec) {
    if (precedence(child) < minPrec) {
        os << "(";
        printNode(os, child, n);
        os << ")";
    } else {
        printNode(os, child, n);
    }
}

void printNode(std::ostream& os, const ExprNode& e, int n) {
    switch (e.kind) {
        case ExprKind::Const:
            printNumber(os, e.value);
            return;
        case ExprKind::Var:
            if (e.var < n) os << "x" << (e.var + 1);
            else os << "y" << (e.var - n + 1);
            return;
        case ExprKind::Add:
            printChild(os, *e.a, n, 1);
            os << " + ";
            printChild(os, *e.b, n, 2);
            return;
        case ExprKind::Sub:
            printChild(os, *e.a, n, 1);
            os << " - ";
            printChild(os, *e.b, n, 2);
            return;
        case ExprKind::Mul:
            printChild(os, *e.a, n, 2);
            os << " * ";
            printChild(os, *e.b, n, 3);
            return;
        case ExprKind::Div:
            printChild(os, *e.a, n, 2);
            os << " / ";
            printChild(os, *e.b, n, 3);
            return;
        case ExprKind::Neg:
            os << "-";
            printChild(os, *e.a, n, 3);
            return;
        case ExprKind::Pow:
            printChild(os, *e.a, n, 5);
            os << "^" << e.exponent;
            return;
        case ExprKind::Fun:
            os << funName(e.fun) << "(";
            printNode(os, *e.a, n);
            os << ")";
            return;
    }
}

// ---------------------------------------------------------------------------
// Evaluation

[[noreturn]] void domainFail(const char* what, std::size_t pos) {
    std::ostringstream os;
    os << what;
    if (pos > 0) os << " (subexpression at position " << pos << ")";
    throw DomainError(os.str());
}

double evalNode(const ExprNode& e, const std::vector<double>& u) {
    switch (e.kind) {
        case ExprKind::Const: return e.value;
        case ExprKind::Var: return u[static_cast<std::size_t>(e.var)];
        case ExprKind::Add: return evalNode(*e.a, u) + evalNode(*e.b, u);
        case ExprKind::Sub: return evalNode(*e.a, u) - evalNode(*e.b, u);
        case ExprKind::Mul: return evalNode(*e.a, u) * evalNode(*e.b, u);
        case ExprKind::Div: {
            double num = evalNode(*e.a, u);
            double den = evalNode(*e.b, u);
            if (std::abs(den) < 1e-300)
                domainFail("division by a value smaller than 1e-300 in magnitude", e.pos);
            return num / den;
        }
        case ExprKind::Neg: return -evalNode(*e.a, u);
        case ExprKind::Pow: {
            double base = evalNode(*e.a, u);
            double r = 1.0;
            long long k = e.exponent;
            double b = base;
            while (k > 0) {
                if (k & 1) r *= b;
                b *= b;
                k >>= 1;
            }
            return r;
        }
        case ExprKind::Fun: {
            double a = evalNode(*e.a, u);
            switch (e.fun) {
                case FunKind::Sin: return std::sin(a);
                case FunKind::Cos: return std::cos(a);
                case FunKind::Exp: return std::exp(a);
                case FunKind::Log:
                    if (a <= 0.0) domainFail("log of a non-positive value", e.pos);
                    return std::log(a);
                case FunKind::Sqrt:
                    if (a <= 0.0) domainFail("sqrt of a non-positive value", e.pos);
                    return std::sqrt(a);
                case FunKind::Tanh: return std::tanh(a);
            }
            break;
        }
    }
    domainFail("malformed expression node", e.pos);
}

Jet evalJetNode(const ExprNode& e, const std::vector<double>& u, int d, int order) {
    switch (e.kind) {
        case ExprKind::Const: return Jet::constant(d, order, e.value);
        case ExprKind::Var:
            return Jet::variable(d, order, e.var, u[static_cast<std::size_t>(e.var)]);
        case ExprKind::Add: return evalJetNode(*e.a, u, d, order) + evalJetNode(*e.b, u, d, order);
        case ExprKind::Sub: return evalJetNode(*e.a, u, d, order) - evalJetNode(*e.b, u, d, order);
        case ExprKind::Mul: return evalJetNode(*e.a, u, d, order) * evalJetNode(*e.b, u, d, order);
        case ExprKind::Div: {
            Jet num = evalJetNode(*e.a, u, d, order);
            Jet den = evalJetNode(*e.b, u, d, order);
            try {
                return num / den;
            } catch (const DomainError&) {
                domainFail("division by a value smaller than 1e-300 in magnitude", e.pos);
            }
        }
        case ExprKind::Neg: return -evalJetNode(*e.a, u, d, order);
        case ExprKind::Pow: return evalJetNode(*e.a, u, d, order).pow_int(e.exponent);
        case ExprKind::Fun: {
            Jet a = evalJetNode(*e.a, u, d, order);
            try {
                switch (e.fun) {
                    case FunKind::Sin: return sin(a);
                    case FunKind::Cos: return cos(a);
                    case FunKind::Exp: return exp(a);
                    case FunKind::Log: return log(a);
                    case FunKind::Sqrt: return sqrt(a);
                    case FunKind::Tanh: return tanh(a);
                }
            } catch (const DomainError&) {
                switch (e.fun) {
                    case FunKind::Log: domainFail("log of a non-positive value", e.pos);
                    case FunKind::Sqrt: domainFail("sqrt of a non-positive value", e.pos);
                    default: throw;
                }
            }
            break;
        }
    }
    domainFail("malformed expression node", e.pos);
}

// ---------------------------------------------------------------------------
// Symbolic derivative

ExprPtr deriv(const ExprPtr& e, int var) {
    switch (e->kind) {
        case ExprKind::Const: return mkConst(0.0);
        case ExprKind::Var: return mkConst(e->var == var ? 1.0 : 0.0);
        case ExprKind::Add: return sAdd(deriv(e->a, var), deriv(e->b, var));
        case ExprKind::Sub: return sSub(deriv(e->a, var), deriv(e->b, var));
        case ExprKind::Mul:
            return sAdd(sMul(deriv(e->a, var), e->b), sMul(e->a, deriv(e->b, var)));
        case ExprKind::Div:
            // (a'b - ab') / b^2
            return sDiv(sSub(sMul(deriv(e->a, var), e->b), sMul(e->a, deriv(e->b, var))),
                        mkPow(e->b, 2));
        case ExprKind::Neg: return mkNeg(deriv(e->a, var));
        case ExprKind::Pow:
            // k * a^(k-1) * a'
            return sMul(sMul(mkConst(static_cast<double>(e->exponent)),
                             mkPow(e->a, e->exponent - 1)),
                        deriv(e->a, var));
        case ExprKind::Fun: {
            ExprPtr da = deriv(e->a, var);
            switch (e->fun) {
                case FunKind::Sin: return sMul(mkFun(FunKind::Cos, e->a), da);
                case FunKind::Cos: return mkNeg(sMul(mkFun(FunKind::Sin, e->a), da));
                case FunKind::Exp: return sMul(mkFun(FunKind::Exp, e->a), da);
                case FunKind::Log: return sDiv(da, e->a);
                case FunKind::Sqrt:
                    return sDiv(da, sMul(mkConst(2.0), mkFun(FunKind::Sqrt, e->a)));
                case FunKind::Tanh:
                    return sMul(sSub(mkConst(1.0), mkPow(mkFun(FunKind::Tanh, e->a), 2)), da);
            }
            break;
        }
    }
    throw DomainError("malformed expression node");
}

} // namespace

double Expr::eval(const std::vector<double>& u) const {
    if (!root_) throw DomainError("evaluating an empty expression");
    if (static_cast<int>(u.size()) != n_ + m_)
        throw DomainError("point dimension does not match expression dimension");
    return evalNode(*root_, u);
}

Jet Expr::evalJet(const std::vector<double>& u, int order) const {
    if (!root_) throw DomainError("evaluating an empty expression");
    if (static_cast<int>(u.size()) != n_ + m_)
        throw DomainError("point dimension does not match expression dimension");
    return evalJetNode(*root_, u, n_ + m_, order);
}

std::string Expr::print() const {
    if (!root_) return "";
    std::ostringstream os;
    printNode(os, *root_, n_);
    return os.str();
}

Expr parseExpr(const std::string& text, int n, int m) {
    Parser p(text, n, m);
    return Expr(p.parse(), n, m);
}

Expr derivative(const Expr& e, int var) {
    if (e.empty()) throw DomainError("differentiating an empty expression");
    if (var < 0 || var >= e.n() + e.m())
        throw DomainError("derivative variable index out of range");
    return Expr(deriv(e.root(), var), e.n(), e.m());
}

Expr exprConst(double value, int n, int m) { return Expr(mkConst(value), n, m); }
Expr exprVar(int var, int n, int m) { return Expr(mkVar(var), n, m); }
Expr exprAdd(const Expr& a, const Expr& b) { return Expr(sAdd(a.root(), b.root()), a.n(), a.m()); }
Expr exprSub(const Expr& a, const Expr& b) { return Expr(sSub(a.root(), b.root()), a.n(), a.m()); }
Expr exprMul(const Expr& a, const Expr& b) { return Expr(sMul(a.root(), b.root()), a.n(), a.m()); }
Expr exprDiv(const Expr& a, const Expr& b) { return Expr(sDiv(a.root(), b.root()), a.n(), a.m()); }
Expr exprNeg(const Expr& a) { return Expr(mkNeg(a.root()), a.n(), a.m()); }
Expr exprPow(const Expr& a, long long k) { return Expr(mkPow(a.root(), k), a.n(), a.m()); }

std::vector<std::vector<Expr>> inverseByCofactors(const std::vector<std::vector<Expr>>& mat) {
    const std::size_t k = mat.size();
    if (k < 1 || k > 3) throw DomainError("cofactor inverse supports dimensions 1..3 only");
    for (const auto& row : mat)
        if (row.size() != k) throw DomainError("cofactor inverse needs a square matrix");
    const int n = mat[0][0].n(), m = mat[0][0].m();

    auto A = [&](std::size_t i, std::size_t j) { return mat[i][j]; };

    std::vector<std::vector<Expr>> inv(k, std::vector<Expr>(k));
    if (k == 1) {
        inv[0][0] = exprDiv(exprConst(1.0, n, m), A(0, 0));
        return inv;
    }
    if (k == 2) {
        Expr det = exprSub(exprMul(A(0, 0), A(1, 1)), exprMul(A(0, 1), A(1, 0)));
        inv[0][0] = exprDiv(A(1, 1), det);
        inv[1][1] = exprDiv(A(0, 0), det);
        inv[0][1] = exprDiv(exprNeg(A(0, 1)), det);
        inv[1][0] = exprDiv(exprNeg(A(1, 0)), det);
        return inv;
    }
    auto det2 = [&](std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
        return exprSub(exprMul(A(r0, c0), A(r1, c1)), exprMul(A(r0, c1), A(r1, c0)));
    };
    Expr det = exprAdd(exprSub(exprMul(A(0, 0), det2(1, 2, 1, 2)),
                               exprMul(A(0, 1), det2(1, 2, 0, 2))),
                       exprMul(A(0, 2), det2(1, 2, 0, 1)));
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            std::size_t r0 = (j == 0) ? 1 : 0, r1 = (j == 2) ? 1 : 2;
            std::size_t c0 = (i == 0) ? 1 : 0, c1 = (i == 2) ? 1 : 2;
            Expr cof = det2(r0, r1, c0, c1);
            if ((i + j) % 2 == 1) cof = exprNeg(cof);
            inv[i][j] = exprDiv(cof, det);
        }
    }
    return inv;
}

} // namespace aniso
