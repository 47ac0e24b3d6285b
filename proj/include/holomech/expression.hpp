#pragma once

// Scalar coefficient expressions over t and s1..s16.
//
// Grammar, lowest to highest precedence:
//   expr    := term  { ('+' | '-') term }
//   term    := unary { ('*' | '/') unary }
//   unary   := '-' unary | power
//   power   := primary [ '^' unary ]          (right associative)
//   primary := number | name | name '(' expr [',' expr] ')' | '(' expr ')'
// so -2^2 == -4 and 2^3^2 == 512. Names: t, s1..s16, pi, e, and any
// constants supplied by the caller. Functions: sin cos tan exp log sqrt abs
// atan2(y, x). Evaluation follows plain IEEE double semantics.

#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>

namespace holomech {

inline constexpr int kTimeSlot = 0;
inline constexpr int kMaxParams = 16;

enum class BinaryOp { Add, Sub, Mul, Div, Pow };
enum class Func { Sin, Cos, Tan, Exp, Log, Sqrt, Abs, Atan2 };

using ConstantTable = std::map<std::string, double, std::less<>>;

class Expression {
 public:
  // Immutable AST node; shared freely between expressions and threads.
  struct Node;

  Expression();  // the constant 0

  static Expression constant(double value);
  static Expression time();
  static Expression param(int m);  // s_m, 1-based
  static Expression variable(int slot);
  static Expression binary(BinaryOp op, Expression lhs, Expression rhs);
  static Expression negate(Expression arg);
  static Expression call(Func f, Expression arg);
  static Expression call(Func f, Expression arg0, Expression arg1);

  double eval(double t, std::span<const double> sigma) const;

  // Largest m with s_m referenced, 0 if none.
  int max_param_index() const;
  bool depends_on(int slot) const;
  bool is_constant() const;

  // Replaces every occurrence of variable `slot` by `replacement`.
  Expression substitute(int slot, const Expression& replacement) const;
  // Symbolic partial derivative with respect to variable `slot`.
  Expression derivative(int slot) const;

  // Fully parenthesized source form; literals carry 17 significant digits so
  // reparsing reproduces the value bit for bit.
  std::string to_string() const;

  const Node& node() const { return *node_; }

 private:
  explicit Expression(std::shared_ptr<const Node> node);
  std::shared_ptr<const Node> node_;
};

struct Expression::Node {
  enum class Kind { Number, Variable, Negate, Binary, Call };
  Kind kind = Kind::Number;
  double value = 0.0;
  int slot = 0;
  BinaryOp op = BinaryOp::Add;
  Func func = Func::Sin;
  std::shared_ptr<const Node> lhs;
  std::shared_ptr<const Node> rhs;
};

Expression operator+(const Expression& a, const Expression& b);
Expression operator-(const Expression& a, const Expression& b);
Expression operator*(const Expression& a, const Expression& b);
Expression operator/(const Expression& a, const Expression& b);
Expression operator-(const Expression& a);

// Throws SyntaxError (with line, column and expected tokens) or
// UnknownIdentifier.
Expression parse_expression(std::string_view src, const ConstantTable& constants = {});

// True for t, s1..s16, pi, e and function names.
bool is_reserved_name(std::string_view name);

std::string format_double(double value);

}  // namespace holomech
