#pragma once

#include <memory>
#include <string>
#include <vector>

#include "aniso/errors.hpp"
#include "aniso/jet.hpp"

namespace aniso {

// Scalar expression over the coordinates of an (n,m)-space. Variables are
// written x1..xn (base coordinates) and y1..ym (fiber coordinates); internally
// a variable is the 0-based index into the combined coordinate list
// (x1..xn, y1..ym) of length n+m.
//
// Grammar (precedence low to high):
//   expr    := term (('+'|'-') term)*
//   term    := factor (('*'|'/') factor)*
//   factor  := '-' factor | power
//   power   := atom ('^' nonneg-integer-literal)*
//   atom    := number | variable | function '(' expr ')' | '(' expr ')'
// Functions: sin cos exp log sqrt tanh.

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

enum class ExprKind { Const, Var, Add, Sub, Mul, Div, Neg, Pow, Fun };
enum class FunKind { Sin, Cos, Exp, Log, Sqrt, Tanh };

struct ExprNode {
    ExprKind kind;
    double value = 0.0;        // Const
    int var = -1;              // Var (0-based combined index)
    long long exponent = 0;    // Pow
    FunKind fun = FunKind::Sin;
    ExprPtr a, b;              // children
    std::size_t pos = 0;       // 1-based character position in the source text
};

class Expr {
public:
    Expr() = default;
    Expr(ExprPtr root, int n, int m) : root_(std::move(root)), n_(n), m_(m) {}

    bool empty() const { return !root_; }
    int n() const { return n_; }
    int m() const { return m_; }
    const ExprPtr& root() const { return root_; }

    double eval(const std::vector<double>& u) const;
    Jet evalJet(const std::vector<double>& u, int order) const;

    std::string print() const;

private:
    ExprPtr root_;
    int n_ = 0, m_ = 0;
};

// Parse `text` as an expression over x1..xn, y1..ym. Throws ParseError with a
// 1-based character position on malformed input or out-of-range variables.
Expr parseExpr(const std::string& text, int n, int m);

// d(expr)/d(u^var) as a new expression in the same grammar (no numeric
// differentiation involved; the grammar is closed under differentiation).
Expr derivative(const Expr& e, int var);

// Constant and single-variable expressions, for building expressions in code.
Expr exprConst(double value, int n, int m);
Expr exprVar(int var, int n, int m);
Expr exprAdd(const Expr& a, const Expr& b);
Expr exprSub(const Expr& a, const Expr& b);
Expr exprMul(const Expr& a, const Expr& b);
Expr exprDiv(const Expr& a, const Expr& b);
Expr exprNeg(const Expr& a);
Expr exprPow(const Expr& a, long long k);

// Inverse of a symmetric matrix of expressions by cofactor formulas
// (dimension 1..3). The result entries are expressions dividing each cofactor
// by the determinant; evaluation fails where the determinant vanishes.
std::vector<std::vector<Expr>> inverseByCofactors(const std::vector<std::vector<Expr>>& mat);

} // namespace aniso
