#include "holomech/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>
#include <vector>

#include "holomech/errors.hpp"

namespace holomech {

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Kind = Expression::Node::Kind;

struct FuncInfo {
  std::string_view name;
  Func func;
  int arity;
};

constexpr FuncInfo kFuncs[] = {
    {"sin", Func::Sin, 1},   {"cos", Func::Cos, 1},   {"tan", Func::Tan, 1},
    {"exp", Func::Exp, 1},   {"log", Func::Log, 1},   {"sqrt", Func::Sqrt, 1},
    {"abs", Func::Abs, 1},   {"atan2", Func::Atan2, 2},
};

std::optional<FuncInfo> find_func(std::string_view name) {
  for (const auto& f : kFuncs)
    if (f.name == name) return f;
  return std::nullopt;
}

std::string_view func_name(Func f) {
  for (const auto& info : kFuncs)
    if (info.func == f) return info.name;
  return "?";
}

// Returns the slot of t / s1..s16, or -1.
int variable_slot(std::string_view name) {
  if (name == "t") return kTimeSlot;
  if (name.size() < 2 || name.size() > 3 || name[0] != 's') return -1;
  int value = 0;
  for (std::size_t i = 1; i < name.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(name[i]))) return -1;
    value = value * 10 + (name[i] - '0');
  }
  if (name[1] == '0' || value < 1 || value > kMaxParams) return -1;
  return value;
}

double eval_node(const Expression::Node& n, double t, std::span<const double> sigma) {
  switch (n.kind) {
    case Kind::Number:
      return n.value;
    case Kind::Variable:
      if (n.slot == kTimeSlot) return t;
      if (static_cast<std::size_t>(n.slot) > sigma.size())
        throw Error(ErrorCode::DimensionMismatch,
                    "expression references s" + std::to_string(n.slot) + " but only " +
                        std::to_string(sigma.size()) + " parameters are bound");
      return sigma[n.slot - 1];
    case Kind::Negate:
      return -eval_node(*n.lhs, t, sigma);
    case Kind::Binary: {
      const double a = eval_node(*n.lhs, t, sigma);
      const double b = eval_node(*n.rhs, t, sigma);
      switch (n.op) {
        case BinaryOp::Add: return a + b;
        case BinaryOp::Sub: return a - b;
        case BinaryOp::Mul: return a * b;
        case BinaryOp::Div: return a / b;
        case BinaryOp::Pow: return std::pow(a, b);
      }
      break;
    }
    case Kind::Call: {
      const double a = eval_node(*n.lhs, t, sigma);
      switch (n.func) {
        case Func::Sin: return std::sin(a);
        case Func::Cos: return std::cos(a);
        case Func::Tan: return std::tan(a);
        case Func::Exp: return std::exp(a);
        case Func::Log: return std::log(a);
        case Func::Sqrt: return std::sqrt(a);
        case Func::Abs: return std::abs(a);
        case Func::Atan2: return std::atan2(a, eval_node(*n.rhs, t, sigma));
      }
      break;
    }
  }
  return 0.0;
}

int max_param(const Expression::Node& n) {
  switch (n.kind) {
    case Kind::Number: return 0;
    case Kind::Variable: return n.slot == kTimeSlot ? 0 : n.slot;
    case Kind::Negate: return max_param(*n.lhs);
    case Kind::Binary:
    case Kind::Call: {
      int m = max_param(*n.lhs);
      if (n.rhs) m = std::max(m, max_param(*n.rhs));
      return m;
    }
  }
  return 0;
}

bool depends(const Expression::Node& n, int slot) {
  switch (n.kind) {
    case Kind::Number: return false;
    case Kind::Variable: return n.slot == slot;
    default: return depends(*n.lhs, slot) || (n.rhs && depends(*n.rhs, slot));
  }
}

bool has_variables(const Expression::Node& n) {
  switch (n.kind) {
    case Kind::Number: return false;
    case Kind::Variable: return true;
    default: return has_variables(*n.lhs) || (n.rhs && has_variables(*n.rhs));
  }
}

void print(const Expression::Node& n, std::string& out) {
  switch (n.kind) {
    case Kind::Number:
      if (n.value < 0 || (n.value == 0.0 && std::signbit(n.value))) {
        out += "(-" + format_double(-n.value) + ")";
      } else {
        out += format_double(n.value);
      }
      return;
    case Kind::Variable:
      out += n.slot == kTimeSlot ? std::string("t") : "s" + std::to_string(n.slot);
      return;
    case Kind::Negate:
      out += "(-";
      print(*n.lhs, out);
      out += ")";
      return;
    case Kind::Binary: {
      static constexpr const char* symbols[] = {" + ", " - ", " * ", " / ", " ^ "};
      out += "(";
      print(*n.lhs, out);
      out += symbols[static_cast<int>(n.op)];
      print(*n.rhs, out);
      out += ")";
      return;
    }
    case Kind::Call:
      out += func_name(n.func);
      out += "(";
      print(*n.lhs, out);
      if (n.rhs) {
        out += ", ";
        print(*n.rhs, out);
      }
      out += ")";
      return;
  }
}

// ---------------------------------------------------------------------------
// Lexer / parser

enum class Tok { Number, Name, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  double number = 0.0;
  std::size_t line = 1;
  std::size_t column = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    skip_space();
    Token tok;
    tok.line = line_;
    tok.column = column_;
    if (pos_ >= src_.size()) return tok;

    const char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
      return number(tok);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t end = pos_;
      while (end < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[end])) || src_[end] == '_')) ++end;
      tok.kind = Tok::Name;
      tok.text = std::string(src_.substr(pos_, end - pos_));
      advance(end - pos_);
      return tok;
    }
    tok.text = std::string(1, c);
    switch (c) {
      case '+': tok.kind = Tok::Plus; break;
      case '-': tok.kind = Tok::Minus; break;
      case '*': tok.kind = Tok::Star; break;
      case '/': tok.kind = Tok::Slash; break;
      case '^': tok.kind = Tok::Caret; break;
      case '(': tok.kind = Tok::LParen; break;
      case ')': tok.kind = Tok::RParen; break;
      case ',': tok.kind = Tok::Comma; break;
      default:
        throw SyntaxError(tok.line, tok.column, {"number", "identifier", "operator", "'('", "')'"}, tok.text);
    }
    advance(1);
    return tok;
  }

 private:
  Token number(Token tok) {
    std::size_t end = pos_;
    auto digits = [&] {
      while (end < src_.size() && std::isdigit(static_cast<unsigned char>(src_[end]))) ++end;
    };
    digits();
    if (end < src_.size() && src_[end] == '.') {
      ++end;
      digits();
    }
    if (end < src_.size() && (src_[end] == 'e' || src_[end] == 'E')) {
      std::size_t probe = end + 1;
      if (probe < src_.size() && (src_[probe] == '+' || src_[probe] == '-')) ++probe;
      if (probe < src_.size() && std::isdigit(static_cast<unsigned char>(src_[probe]))) {
        end = probe;
        digits();
      }
    }
    tok.kind = Tok::Number;
    tok.text = std::string(src_.substr(pos_, end - pos_));
    tok.number = std::strtod(tok.text.c_str(), nullptr);
    advance(end - pos_);
    return tok;
  }

  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) advance(1);
  }

  void advance(std::size_t count) {
    for (std::size_t i = 0; i < count; ++i, ++pos_) {
      if (src_[pos_] == '\n') {
        ++line_;
        column_ = 1;
      } else {
        ++column_;
      }
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t column_ = 1;
};

class Parser {
 public:
  Parser(std::string_view src, const ConstantTable& constants) : lexer_(src), constants_(constants) {
    current_ = lexer_.next();
  }

  Expression parse() {
    Expression e = expr();
    if (current_.kind != Tok::End)
      fail({"'+'", "'-'", "'*'", "'/'", "'^'", "end of input"});
    return e;
  }

 private:
  [[noreturn]] void fail(std::vector<std::string> expected) const {
    throw SyntaxError(current_.line, current_.column, std::move(expected), current_.text);
  }

  void advance() { current_ = lexer_.next(); }

  void expect(Tok kind, const char* label) {
    if (current_.kind != kind) fail({label});
    advance();
  }

  Expression expr() {
    Expression lhs = term();
    while (current_.kind == Tok::Plus || current_.kind == Tok::Minus) {
      const BinaryOp op = current_.kind == Tok::Plus ? BinaryOp::Add : BinaryOp::Sub;
      advance();
      lhs = Expression::binary(op, lhs, term());
    }
    return lhs;
  }

  Expression term() {
    Expression lhs = unary();
    while (current_.kind == Tok::Star || current_.kind == Tok::Slash) {
      const BinaryOp op = current_.kind == Tok::Star ? BinaryOp::Mul : BinaryOp::Div;
      advance();
      lhs = Expression::binary(op, lhs, unary());
    }
    return lhs;
  }

  Expression unary() {
    if (current_.kind == Tok::Minus) {
      advance();
      return Expression::negate(unary());
    }
    return power();
  }

  Expression power() {
    Expression base = primary();
    if (current_.kind == Tok::Caret) {
      advance();
      return Expression::binary(BinaryOp::Pow, base, unary());
    }
    return base;
  }

  Expression primary() {
    switch (current_.kind) {
      case Tok::Number: {
        const double v = current_.number;
        advance();
        return Expression::constant(v);
      }
      case Tok::LParen: {
        advance();
        Expression inner = expr();
        expect(Tok::RParen, "')'");
        return inner;
      }
      case Tok::Name:
        return name();
      default:
        fail({"number", "identifier", "'('", "'-'"});
    }
  }

  Expression name() {
    const Token tok = current_;
    advance();
    if (current_.kind == Tok::LParen) {
      const auto info = find_func(tok.text);
      if (!info)
        throw Error(ErrorCode::UnknownIdentifier, "unknown function '" + tok.text + "' at line " +
                                                      std::to_string(tok.line) + ", column " +
                                                      std::to_string(tok.column));
      advance();
      Expression a0 = expr();
      if (info->arity == 2) {
        expect(Tok::Comma, "','");
        Expression a1 = expr();
        expect(Tok::RParen, "')'");
        return Expression::call(info->func, a0, a1);
      }
      expect(Tok::RParen, "')'");
      return Expression::call(info->func, a0);
    }
    if (const int slot = variable_slot(tok.text); slot >= 0) return Expression::variable(slot);
    if (auto it = constants_.find(tok.text); it != constants_.end()) return Expression::constant(it->second);
    if (tok.text == "pi") return Expression::constant(std::numbers::pi);
    if (tok.text == "e") return Expression::constant(std::numbers::e);
    throw Error(ErrorCode::UnknownIdentifier, "unknown identifier '" + tok.text + "' at line " +
                                                  std::to_string(tok.line) + ", column " +
                                                  std::to_string(tok.column));
  }

  Lexer lexer_;
  const ConstantTable& constants_;
  Token current_;
};

bool is_number(const Expression& e, double v) {
  return e.node().kind == Kind::Number && e.node().value == v;
}

}  // namespace

// ---------------------------------------------------------------------------

Expression::Expression() : Expression(constant(0.0)) {}

Expression::Expression(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

Expression Expression::constant(double value) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Number;
  n->value = value;
  return Expression(std::move(n));
}

Expression Expression::time() { return variable(kTimeSlot); }

Expression Expression::param(int m) {
  if (m < 1 || m > kMaxParams) throw Error(ErrorCode::InvalidArgument, "parameter index out of range");
  return variable(m);
}

Expression Expression::variable(int slot) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Variable;
  n->slot = slot;
  return Expression(std::move(n));
}

Expression Expression::binary(BinaryOp op, Expression lhs, Expression rhs) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Binary;
  n->op = op;
  n->lhs = std::move(lhs.node_);
  n->rhs = std::move(rhs.node_);
  return Expression(std::move(n));
}

Expression Expression::negate(Expression arg) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Negate;
  n->lhs = std::move(arg.node_);
  return Expression(std::move(n));
}

Expression Expression::call(Func f, Expression arg) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Call;
  n->func = f;
  n->lhs = std::move(arg.node_);
  return Expression(std::move(n));
}

Expression Expression::call(Func f, Expression arg0, Expression arg1) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Call;
  n->func = f;
  n->lhs = std::move(arg0.node_);
  n->rhs = std::move(arg1.node_);
  return Expression(std::move(n));
}

double Expression::eval(double t, std::span<const double> sigma) const { return eval_node(*node_, t, sigma); }

int Expression::max_param_index() const { return max_param(*node_); }

bool Expression::depends_on(int slot) const { return depends(*node_, slot); }

bool Expression::is_constant() const { return !has_variables(*node_); }

Expression Expression::substitute(int slot, const Expression& replacement) const {
  const Node& n = *node_;
  switch (n.kind) {
    case Kind::Number:
      return *this;
    case Kind::Variable:
      return n.slot == slot ? replacement : *this;
    case Kind::Negate:
      return negate(Expression(n.lhs).substitute(slot, replacement));
    case Kind::Binary:
      return binary(n.op, Expression(n.lhs).substitute(slot, replacement),
                    Expression(n.rhs).substitute(slot, replacement));
    case Kind::Call:
      if (n.rhs)
        return call(n.func, Expression(n.lhs).substitute(slot, replacement),
                    Expression(n.rhs).substitute(slot, replacement));
      return call(n.func, Expression(n.lhs).substitute(slot, replacement));
  }
  return *this;
}

Expression Expression::derivative(int slot) const {
  const Node& n = *node_;
  switch (n.kind) {
    case Kind::Number:
      return constant(0.0);
    case Kind::Variable:
      return constant(n.slot == slot ? 1.0 : 0.0);
    case Kind::Negate:
      return -Expression(n.lhs).derivative(slot);
    case Kind::Binary: {
      const Expression a(n.lhs), b(n.rhs);
      const Expression da = a.derivative(slot), db = b.derivative(slot);
      switch (n.op) {
        case BinaryOp::Add: return da + db;
        case BinaryOp::Sub: return da - db;
        case BinaryOp::Mul: return da * b + a * db;
        case BinaryOp::Div: return (da * b - a * db) / binary(BinaryOp::Pow, b, constant(2.0));
        case BinaryOp::Pow:
          if (!b.depends_on(slot))
            return b * binary(BinaryOp::Pow, a, b - constant(1.0)) * da;
          return *this * (db * call(Func::Log, a) + b * da / a);
      }
      break;
    }
    case Kind::Call: {
      const Expression a(n.lhs);
      const Expression da = a.derivative(slot);
      switch (n.func) {
        case Func::Sin: return call(Func::Cos, a) * da;
        case Func::Cos: return -call(Func::Sin, a) * da;
        case Func::Tan: return da / binary(BinaryOp::Pow, call(Func::Cos, a), constant(2.0));
        case Func::Exp: return *this * da;
        case Func::Log: return da / a;
        case Func::Sqrt: return da / (constant(2.0) * *this);
        case Func::Abs: return a / *this * da;
        case Func::Atan2: {
          const Expression x(n.rhs);
          const Expression dx = x.derivative(slot);
          return (x * da - a * dx) /
                 (binary(BinaryOp::Pow, a, constant(2.0)) + binary(BinaryOp::Pow, x, constant(2.0)));
        }
      }
      break;
    }
  }
  return constant(0.0);
}

std::string Expression::to_string() const {
  std::string out;
  print(*node_, out);
  return out;
}

Expression operator+(const Expression& a, const Expression& b) {
  if (is_number(a, 0.0)) return b;
  if (is_number(b, 0.0)) return a;
  return Expression::binary(BinaryOp::Add, a, b);
}

Expression operator-(const Expression& a, const Expression& b) {
  if (is_number(b, 0.0)) return a;
  if (is_number(a, 0.0)) return -b;
  return Expression::binary(BinaryOp::Sub, a, b);
}

Expression operator*(const Expression& a, const Expression& b) {
  if (is_number(a, 0.0) || is_number(b, 0.0)) return Expression::constant(0.0);
  if (is_number(a, 1.0)) return b;
  if (is_number(b, 1.0)) return a;
  return Expression::binary(BinaryOp::Mul, a, b);
}

Expression operator/(const Expression& a, const Expression& b) {
  if (is_number(a, 0.0)) return Expression::constant(0.0);
  if (is_number(b, 1.0)) return a;
  return Expression::binary(BinaryOp::Div, a, b);
}

Expression operator-(const Expression& a) {
  if (a.node().kind == Kind::Number) return Expression::constant(-a.node().value);
  return Expression::negate(a);
}

Expression parse_expression(std::string_view src, const ConstantTable& constants) {
  return Parser(src, constants).parse();
}

bool is_reserved_name(std::string_view name) {
  return variable_slot(name) >= 0 || name == "pi" || name == "e" || find_func(name).has_value();
}

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

}  // namespace holomech
