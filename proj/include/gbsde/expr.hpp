#pragma once

// Small arithmetic expression language used to state coefficients and
// generators in configuration files.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | primary
//   primary := number | var | const | func '(' args ')' | '(' expr ')'
//
// Variables are t, x, y, z. Functions: pow/2, min/2, max/2, abs/1, sqrt/1,
// exp/1. Named constants may be bound at parse time.

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gbsde {

enum class TokenKind { Number, Ident, Plus, Minus, Star, Slash, LParen, RParen, Comma, End };

struct Token {
  TokenKind kind;
  std::string text;
  double value = 0.0;
  std::size_t offset = 0;

  bool operator==(const Token&) const = default;
};

/// Splits `text` into tokens. The sequence always ends with an End token.
/// Throws ParseError with the byte offset of the first illegal character.
std::vector<Token> tokenize(std::string_view text);

enum class Var : std::uint8_t { T = 0, X = 1, Y = 2, Z = 3 };

constexpr unsigned var_bit(Var v) { return 1u << static_cast<unsigned>(v); }

struct Env {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

enum class Op { Const, Var, Neg, Add, Sub, Mul, Div, Pow, Min, Max, Abs, Sqrt, Exp };

/// Immutable expression tree. Copies share structure.
class Expr {
 public:
  Expr();  // the constant 0

  static Expr constant(double value);
  static Expr variable(Var v);
  static Expr unary(Op op, Expr arg, std::size_t offset = 0);
  static Expr binary(Op op, Expr lhs, Expr rhs, std::size_t offset = 0);

  Op op() const;
  double value() const;  // Const only
  Var var() const;       // Var only
  std::size_t arity() const;
  const Expr& arg(std::size_t i) const;
  std::size_t offset() const;

  /// Bitmask of referenced variables (see var_bit).
  unsigned vars() const;
  bool depends_on(Var v) const { return (vars() & var_bit(v)) != 0; }
  bool is_constant() const { return vars() == 0; }

  /// Evaluates with IEEE double arithmetic. Throws EvalError on division by
  /// zero, sqrt of a negative, pow of a negative base with a non-integer
  /// exponent, or any non-finite intermediate.
  double operator()(const Env& env) const;

  /// Fully parenthesized rendering that parses back to an identical tree.
  std::string to_string() const;

  bool structurally_equal(const Expr& other) const;

  struct Node;

 private:
  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

using ConstantTable = std::map<std::string, double, std::less<>>;

/// Parses `text`. Identifiers found in `constants` become constant leaves.
/// Throws ParseError carrying the byte offset of the first problem.
Expr parse(std::string_view text, const ConstantTable& constants = {});

inline double evaluate(const Expr& e, const Env& env) { return e(env); }

/// Replaces every occurrence of `v` by the constant `value`.
Expr substitute(const Expr& e, Var v, double value);

/// Additive split e = base(t, x, y) + zpart(z). Present only when every
/// top-level summand is either free of z or depends on z alone.
struct ZSplit {
  Expr base;
  Expr zpart;
};
std::optional<ZSplit> split_z(const Expr& e);

}  // namespace gbsde
