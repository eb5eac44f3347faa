#include "gbsde/expr.hpp"

#include "gbsde/error.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <utility>

namespace gbsde {

struct Expr::Node {
  Op op = Op::Const;
  double value = 0.0;
  Var var = Var::T;
  std::vector<Expr> args;
  std::size_t n_args = 0;
  std::size_t offset = 0;
  unsigned vars = 0;
};

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

const char* op_name(Op op) {
  switch (op) {
    case Op::Pow: return "pow";
    case Op::Min: return "min";
    case Op::Max: return "max";
    case Op::Abs: return "abs";
    case Op::Sqrt: return "sqrt";
    case Op::Exp: return "exp";
    default: return "?";
  }
}

const char* var_name(Var v) {
  static constexpr const char* names[] = {"t", "x", "y", "z"};
  return names[static_cast<int>(v)];
}

struct FunctionInfo {
  std::string_view name;
  Op op;
  std::size_t arity;
};

constexpr std::array<FunctionInfo, 6> kFunctions{{
    {"pow", Op::Pow, 2},
    {"min", Op::Min, 2},
    {"max", Op::Max, 2},
    {"abs", Op::Abs, 1},
    {"sqrt", Op::Sqrt, 1},
    {"exp", Op::Exp, 1},
}};

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Tokenizer

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const char c = text[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++i;
      continue;
    }
    const std::size_t start = i;
    if (is_digit(c) || (c == '.' && i + 1 < n && is_digit(text[i + 1]))) {
      while (i < n && is_digit(text[i])) ++i;
      if (i < n && text[i] == '.') {
        ++i;
        while (i < n && is_digit(text[i])) ++i;
      }
      if (i < n && (text[i] == 'e' || text[i] == 'E')) {
        const std::size_t e_pos = i;
        ++i;
        if (i < n && (text[i] == '+' || text[i] == '-')) ++i;
        if (i >= n || !is_digit(text[i])) throw ParseError("malformed exponent", e_pos);
        while (i < n && is_digit(text[i])) ++i;
      }
      std::string lexeme(text.substr(start, i - start));
      const double v = std::strtod(lexeme.c_str(), nullptr);
      if (!std::isfinite(v)) throw ParseError("number out of range", start);
      out.push_back({TokenKind::Number, std::move(lexeme), v, start});
      continue;
    }
    if (is_ident_start(c)) {
      while (i < n && is_ident_char(text[i])) ++i;
      out.push_back({TokenKind::Ident, std::string(text.substr(start, i - start)), 0.0, start});
      continue;
    }
    TokenKind kind;
    switch (c) {
      case '+': kind = TokenKind::Plus; break;
      case '-': kind = TokenKind::Minus; break;
      case '*': kind = TokenKind::Star; break;
      case '/': kind = TokenKind::Slash; break;
      case '(': kind = TokenKind::LParen; break;
      case ')': kind = TokenKind::RParen; break;
      case ',': kind = TokenKind::Comma; break;
      default: throw ParseError(std::string("illegal character '") + c + "'", start);
    }
    out.push_back({kind, std::string(1, c), 0.0, start});
    ++i;
  }
  out.push_back({TokenKind::End, "", 0.0, n});
  return out;
}

// ---------------------------------------------------------------------------
// Tree construction

Expr::Expr() : Expr(constant(0.0)) {}

Expr Expr::constant(double value) {
  auto node = std::make_shared<Node>();
  node->op = Op::Const;
  node->value = value;
  return Expr(std::move(node));
}

Expr Expr::variable(Var v) {
  auto node = std::make_shared<Node>();
  node->op = Op::Var;
  node->var = v;
  node->vars = var_bit(v);
  return Expr(std::move(node));
}

Expr Expr::unary(Op op, Expr arg, std::size_t offset) {
  auto node = std::make_shared<Node>();
  node->op = op;
  node->vars = arg.vars();
  node->args.push_back(std::move(arg));
  node->n_args = 1;
  node->offset = offset;
  return Expr(std::move(node));
}

Expr Expr::binary(Op op, Expr lhs, Expr rhs, std::size_t offset) {
  auto node = std::make_shared<Node>();
  node->op = op;
  node->vars = lhs.vars() | rhs.vars();
  node->args.push_back(std::move(lhs));
  node->args.push_back(std::move(rhs));
  node->n_args = 2;
  node->offset = offset;
  return Expr(std::move(node));
}

Op Expr::op() const { return node_->op; }
double Expr::value() const { return node_->value; }
Var Expr::var() const { return node_->var; }
std::size_t Expr::arity() const { return node_->n_args; }
const Expr& Expr::arg(std::size_t i) const { return node_->args.at(i); }
std::size_t Expr::offset() const { return node_->offset; }
unsigned Expr::vars() const { return node_->vars; }

// ---------------------------------------------------------------------------
// Evaluation

namespace {

[[noreturn]] void eval_fail(const Expr& e, const std::string& what) {
  throw EvalError(what + " in '" + e.to_string() + "' (at offset " + std::to_string(e.offset()) + ")");
}

}  // namespace

double Expr::operator()(const Env& env) const {
  const Node& n = *node_;
  double r;
  switch (n.op) {
    case Op::Const:
      return n.value;
    case Op::Var:
      switch (n.var) {
        case Var::T: return env.t;
        case Var::X: return env.x;
        case Var::Y: return env.y;
        case Var::Z: return env.z;
      }
      return 0.0;
    case Op::Neg:
      return -n.args[0](env);
    case Op::Add:
      r = n.args[0](env) + n.args[1](env);
      break;
    case Op::Sub:
      r = n.args[0](env) - n.args[1](env);
      break;
    case Op::Mul:
      r = n.args[0](env) * n.args[1](env);
      break;
    case Op::Div: {
      const double num = n.args[0](env);
      const double den = n.args[1](env);
      if (den == 0.0) eval_fail(*this, "division by zero");
      r = num / den;
      break;
    }
    case Op::Pow: {
      const double base = n.args[0](env);
      const double ex = n.args[1](env);
      if (base < 0.0 && ex != std::floor(ex)) {
        eval_fail(*this, "negative base with non-integer exponent");
      }
      if (base == 0.0 && ex < 0.0) eval_fail(*this, "division by zero");
      r = std::pow(base, ex);
      break;
    }
    case Op::Min:
      r = std::min(n.args[0](env), n.args[1](env));
      break;
    case Op::Max:
      r = std::max(n.args[0](env), n.args[1](env));
      break;
    case Op::Abs:
      return std::fabs(n.args[0](env));
    case Op::Sqrt: {
      const double a = n.args[0](env);
      if (a < 0.0) eval_fail(*this, "sqrt of negative value");
      return std::sqrt(a);
    }
    case Op::Exp:
      r = std::exp(n.args[0](env));
      break;
    default:
      r = 0.0;
  }
  if (!std::isfinite(r)) eval_fail(*this, "non-finite result");
  return r;
}

// ---------------------------------------------------------------------------
// Printing / comparison

std::string Expr::to_string() const {
  const Node& n = *node_;
  switch (n.op) {
    case Op::Const:
      return n.value < 0.0 ? "(-" + format_double(-n.value) + ")" : format_double(n.value);
    case Op::Var:
      return var_name(n.var);
    case Op::Neg:
      if (n.args[0].op() == Op::Const) return "(-(" + n.args[0].to_string() + "))";
      return "(-" + n.args[0].to_string() + ")";
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div: {
      static constexpr const char* sym[] = {" + ", " - ", " * ", " / "};
      const int k = static_cast<int>(n.op) - static_cast<int>(Op::Add);
      return "(" + n.args[0].to_string() + sym[k] + n.args[1].to_string() + ")";
    }
    default: {
      std::string s = std::string(op_name(n.op)) + "(" + n.args[0].to_string();
      if (n.n_args == 2) s += ", " + n.args[1].to_string();
      return s + ")";
    }
  }
}

bool Expr::structurally_equal(const Expr& other) const {
  const Node& a = *node_;
  const Node& b = *other.node_;
  if (&a == &b) return true;
  if (a.op != b.op || a.n_args != b.n_args) return false;
  if (a.op == Op::Const) return a.value == b.value;
  if (a.op == Op::Var) return a.var == b.var;
  for (std::size_t i = 0; i < a.n_args; ++i) {
    if (!a.args[i].structurally_equal(b.args[i])) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Pratt parser

namespace {

class Parser {
 public:
  Parser(std::vector<Token> tokens, const ConstantTable& constants)
      : toks_(std::move(tokens)), constants_(constants) {}

  Expr parse_all() {
    Expr e = parse_expr(0);
    if (peek().kind != TokenKind::End) fail("unexpected '" + peek().text + "'");
    return e;
  }

 private:
  static int infix_power(TokenKind k) {
    switch (k) {
      case TokenKind::Plus:
      case TokenKind::Minus: return 10;
      case TokenKind::Star:
      case TokenKind::Slash: return 20;
      default: return -1;
    }
  }
  static constexpr int kUnaryPower = 30;

  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_++]; }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("syntax error: " + what + " (token " + std::to_string(pos_) + ")", peek().offset);
  }

  void expect(TokenKind k, const char* what) {
    if (peek().kind != k) {
      fail(std::string("expected ") + what + ", found '" + (peek().kind == TokenKind::End ? "end of input" : peek().text) + "'");
    }
    ++pos_;
  }

  Expr parse_expr(int min_power) {
    Expr lhs = parse_prefix();
    for (;;) {
      const Token& t = peek();
      const int power = infix_power(t.kind);
      if (power <= min_power) break;
      const std::size_t at = t.offset;
      const TokenKind kind = next().kind;
      Expr rhs = parse_expr(power);
      Op op = kind == TokenKind::Plus    ? Op::Add
              : kind == TokenKind::Minus ? Op::Sub
              : kind == TokenKind::Star  ? Op::Mul
                                         : Op::Div;
      lhs = Expr::binary(op, std::move(lhs), std::move(rhs), at);
    }
    return lhs;
  }

  Expr parse_prefix() {
    const Token& t = peek();
    switch (t.kind) {
      case TokenKind::Number:
        next();
        return Expr::constant(t.value);
      case TokenKind::Minus: {
        const std::size_t at = t.offset;
        next();
        const bool literal = peek().kind == TokenKind::Number;
        Expr operand = parse_expr(kUnaryPower);
        // A minus written directly before a number is part of the literal.
        if (literal && operand.op() == Op::Const) return Expr::constant(-operand.value());
        return Expr::unary(Op::Neg, std::move(operand), at);
      }
      case TokenKind::LParen: {
        next();
        Expr inner = parse_expr(0);
        expect(TokenKind::RParen, "')'");
        return inner;
      }
      case TokenKind::Ident:
        return parse_identifier();
      case TokenKind::End:
        fail("unexpected end of input");
      default:
        fail("unexpected '" + t.text + "'");
    }
  }

  Expr parse_identifier() {
    const Token& t = next();
    const std::string& name = t.text;
    if (name.size() == 1) {
      switch (name[0]) {
        case 't': return Expr::variable(Var::T);
        case 'x': return Expr::variable(Var::X);
        case 'y': return Expr::variable(Var::Y);
        case 'z': return Expr::variable(Var::Z);
        default: break;
      }
    }
    for (const auto& f : kFunctions) {
      if (f.name != name) continue;
      if (peek().kind != TokenKind::LParen) fail("function '" + name + "' must be called");
      next();
      std::vector<Expr> args;
      if (peek().kind != TokenKind::RParen) {
        args.push_back(parse_expr(0));
        while (peek().kind == TokenKind::Comma) {
          next();
          args.push_back(parse_expr(0));
        }
      }
      if (args.size() != f.arity) {
        throw ParseError("arity error: '" + name + "' takes " + std::to_string(f.arity) +
                             " argument(s), got " + std::to_string(args.size()),
                         t.offset);
      }
      expect(TokenKind::RParen, "')'");
      if (f.arity == 1) return Expr::unary(f.op, std::move(args[0]), t.offset);
      return Expr::binary(f.op, std::move(args[0]), std::move(args[1]), t.offset);
    }
    if (auto it = constants_.find(name); it != constants_.end()) return Expr::constant(it->second);
    throw ParseError("unknown identifier '" + name + "'", t.offset);
  }

  std::vector<Token> toks_;
  const ConstantTable& constants_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse(std::string_view text, const ConstantTable& constants) {
  return Parser(tokenize(text), constants).parse_all();
}

// ---------------------------------------------------------------------------
// Rewrites

Expr substitute(const Expr& e, Var v, double value) {
  if (!e.depends_on(v)) return e;
  if (e.op() == Op::Var) return Expr::constant(value);
  if (e.arity() == 1) return Expr::unary(e.op(), substitute(e.arg(0), v, value), e.offset());
  return Expr::binary(e.op(), substitute(e.arg(0), v, value), substitute(e.arg(1), v, value), e.offset());
}

namespace {

void collect_terms(const Expr& e, bool negate, std::vector<std::pair<Expr, bool>>& out) {
  if (e.op() == Op::Add) {
    collect_terms(e.arg(0), negate, out);
    collect_terms(e.arg(1), negate, out);
  } else if (e.op() == Op::Sub) {
    collect_terms(e.arg(0), negate, out);
    collect_terms(e.arg(1), !negate, out);
  } else {
    out.emplace_back(e, negate);
  }
}

Expr sum_terms(const std::vector<std::pair<Expr, bool>>& terms) {
  if (terms.empty()) return Expr::constant(0.0);
  Expr acc = terms.front().second ? Expr::unary(Op::Neg, terms.front().first) : terms.front().first;
  for (std::size_t i = 1; i < terms.size(); ++i) {
    acc = Expr::binary(terms[i].second ? Op::Sub : Op::Add, acc, terms[i].first);
  }
  return acc;
}

}  // namespace

std::optional<ZSplit> split_z(const Expr& e) {
  std::vector<std::pair<Expr, bool>> terms;
  collect_terms(e, false, terms);
  std::vector<std::pair<Expr, bool>> base, zpart;
  for (auto& term : terms) {
    const unsigned v = term.first.vars();
    if ((v & var_bit(Var::Z)) == 0) {
      base.push_back(term);
    } else if (v == var_bit(Var::Z)) {
      zpart.push_back(term);
    } else {
      return std::nullopt;
    }
  }
  return ZSplit{sum_terms(base), sum_terms(zpart)};
}

}  // namespace gbsde
