#include "gbsde/error.hpp"
#include "gbsde/expr.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace gbsde;

TEST_CASE("tokenize") {
  auto one = tokenize("z");
  REQUIRE(one.size() == 2);
  CHECK(one[0].kind == TokenKind::Ident);
  CHECK(one[0].text == "z");
  CHECK(one[1].kind == TokenKind::End);

  auto toks = tokenize("-2.5*pow(abs(z),0.8)");
  std::vector<TokenKind> kinds;
  for (const auto& t : toks) kinds.push_back(t.kind);
  using K = TokenKind;
  CHECK(kinds == std::vector<K>{K::Minus, K::Number, K::Star, K::Ident, K::LParen, K::Ident, K::LParen, K::Ident,
                                K::RParen, K::Comma, K::Number, K::RParen, K::End});
  CHECK(toks[1].value == 2.5);
  CHECK(toks[10].value == 0.8);

  CHECK(tokenize(" 1e-3 ")[0].value == 1e-3);
  CHECK(tokenize("2.5E+2")[0].value == 250.0);
}

TEST_CASE("lex errors carry the byte offset") {
  try {
    tokenize("2.5e");
    FAIL("expected a lex error");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 3);
  }
  try {
    tokenize("x + $");
    FAIL("expected a lex error");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 4);
  }
}

TEST_CASE("parse and evaluate") {
  CHECK(parse("1+2*3")(Env{}) == 7.0);
  CHECK(parse("(1+2)*3")(Env{}) == 9.0);
  CHECK(parse("8-3-2")(Env{}) == 3.0);
  CHECK(parse("8/4/2")(Env{}) == 1.0);
  CHECK(parse("-2*-3")(Env{}) == 6.0);
  CHECK(parse("--x")(Env{0, 4, 0, 0}) == 4.0);

  const Expr gen = parse("-2.5*pow(abs(z),0.8)");
  CHECK(gen(Env{0, 0, 0, 1}) == -2.5);
  CHECK(gen(Env{0, 0, 0, 0}) == 0.0);
  CHECK(parse("min(x,y)+max(x,y)")(Env{0, 2, 5, 0}) == 7.0);
  CHECK(parse("exp(0)+sqrt(t)")(Env{4, 0, 0, 0}) == 3.0);
  CHECK(parse("pow(x,3)")(Env{0, -2, 0, 0}) == -8.0);
}

TEST_CASE("parse errors") {
  CHECK_THROWS_AS(parse("pow(z)"), ParseError);
  CHECK_THROWS_AS(parse("abs(x,y)"), ParseError);
  CHECK_THROWS_AS(parse("foo(x)"), ParseError);
  CHECK_THROWS_AS(parse("w+1"), ParseError);
  CHECK_THROWS_AS(parse("1+"), ParseError);
  CHECK_THROWS_AS(parse("(1"), ParseError);
  CHECK_THROWS_AS(parse("1 2"), ParseError);
  CHECK_THROWS_AS(parse(""), ParseError);
  try {
    parse("x + * y");
    FAIL("expected a syntax error");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 4);
  }
}

TEST_CASE("named constants") {
  const ConstantTable c{{"shs", 2.0}};
  CHECK(parse("-2.5*shs*abs(z)", c)(Env{0, 0, 0, 1}) == -5.0);
  CHECK(parse("-2.5*shs*abs(z)", c).vars() == var_bit(Var::Z));
  CHECK_THROWS_AS(parse("shs"), ParseError);
}

TEST_CASE("evaluation errors") {
  CHECK_THROWS_AS(parse("1/x")(Env{}), EvalError);
  CHECK_THROWS_AS(parse("sqrt(x)")(Env{0, -1, 0, 0}), EvalError);
  CHECK_THROWS_AS(parse("pow(x,0.5)")(Env{0, -1, 0, 0}), EvalError);
  CHECK_THROWS_AS(parse("pow(x,-1)")(Env{}), EvalError);
  CHECK_THROWS_AS(parse("exp(x)")(Env{0, 1000, 0, 0}), EvalError);
  CHECK(parse("pow(abs(x),0.5)")(Env{0, -4, 0, 0}) == 2.0);
}

TEST_CASE("variable sets") {
  CHECK(parse("t*x+y").vars() == (var_bit(Var::T) | var_bit(Var::X) | var_bit(Var::Y)));
  CHECK(parse("3*2").is_constant());
  CHECK(parse("z").depends_on(Var::Z));
}

namespace {

Expr random_tree(std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 11);
  std::uniform_real_distribution<double> uc(-100.0, 100.0);
  const Var vars[] = {Var::T, Var::X, Var::Y, Var::Z};
  switch (pick(rng)) {
    case 0: return Expr::constant(std::ldexp(uc(rng), static_cast<int>(rng() % 40) - 20));
    case 1: return Expr::variable(vars[rng() % 4]);
    case 2: return Expr::unary(Op::Neg, random_tree(rng, depth - 1));
    case 3: return Expr::unary(Op::Abs, random_tree(rng, depth - 1));
    case 4: return Expr::unary(Op::Sqrt, random_tree(rng, depth - 1));
    case 5: return Expr::unary(Op::Exp, random_tree(rng, depth - 1));
    case 6: return Expr::binary(Op::Add, random_tree(rng, depth - 1), random_tree(rng, depth - 1));
    case 7: return Expr::binary(Op::Sub, random_tree(rng, depth - 1), random_tree(rng, depth - 1));
    case 8: return Expr::binary(Op::Mul, random_tree(rng, depth - 1), random_tree(rng, depth - 1));
    case 9: return Expr::binary(Op::Div, random_tree(rng, depth - 1), random_tree(rng, depth - 1));
    case 10: return Expr::binary(Op::Pow, random_tree(rng, depth - 1), random_tree(rng, depth - 1));
    default:
      return Expr::binary(rng() % 2 ? Op::Min : Op::Max, random_tree(rng, depth - 1), random_tree(rng, depth - 1));
  }
}

}  // namespace

TEST_CASE("printing round-trips on a fuzz corpus") {
  std::mt19937_64 rng(2024);
  for (int k = 0; k < 2000; ++k) {
    const Expr e = random_tree(rng, 5);
    const std::string s = e.to_string();
    const Expr back = parse(s);
    INFO(s);
    CHECK(back.structurally_equal(e));
    CHECK(back.to_string() == s);
  }
  for (const char* src : {"-2.5*pow(abs(z),0.8)", "1+2*3", "min(x,y)+max(x,y)", "-x*-y", "x-(y-z)"}) {
    const Expr e = parse(src);
    CHECK(parse(e.to_string()).structurally_equal(e));
  }
}

TEST_CASE("substitute and z-split") {
  const Expr e = parse("x*y + 3*abs(z) - t");
  CHECK(substitute(e, Var::Z, 2.0)(Env{1, 2, 3, 0}) == doctest::Approx(2 * 3 + 6 - 1));
  CHECK_FALSE(substitute(e, Var::Z, 2.0).depends_on(Var::Z));

  auto split = split_z(e);
  REQUIRE(split.has_value());
  CHECK_FALSE(split->base.depends_on(Var::Z));
  CHECK(split->zpart.vars() == var_bit(Var::Z));
  for (double z : {-2.0, 0.0, 0.5}) {
    const Env env{0.3, 1.1, -0.7, z};
    CHECK(split->base(env) + split->zpart(env) == doctest::Approx(e(env)));
  }

  auto only_z = split_z(parse("-2.5*pow(abs(z),0.8)"));
  REQUIRE(only_z.has_value());
  CHECK(only_z->base(Env{}) == 0.0);

  CHECK_FALSE(split_z(parse("x*z")).has_value());
  CHECK_FALSE(split_z(parse("abs(z+y)")).has_value());
}
