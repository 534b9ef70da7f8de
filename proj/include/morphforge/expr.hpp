#pragma once

#include <cctype>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "errors.hpp"

namespace morphforge {
namespace expr {

// Tiny arithmetic-expression compiler over the variables x, y, z, t with the
// usual operators (+ - * / ^), parentheses, and a fixed set of unary
// functions. Used for user-supplied velocity components.
struct Node {
  enum Kind { kConst, kVar, kAdd, kSub, kMul, kDiv, kPow, kNeg, kFunc } kind;
  double value = 0;
  int var = 0;  // 0..3 -> x y z t
  double (*func)(double) = nullptr;
  std::unique_ptr<Node> a, b;

  double eval(const double* vars) const {
    switch (kind) {
      case kConst: return value;
      case kVar: return vars[var];
      case kAdd: return a->eval(vars) + b->eval(vars);
      case kSub: return a->eval(vars) - b->eval(vars);
      case kMul: return a->eval(vars) * b->eval(vars);
      case kDiv: return a->eval(vars) / b->eval(vars);
      case kPow: return std::pow(a->eval(vars), b->eval(vars));
      case kNeg: return -a->eval(vars);
      case kFunc: return func(a->eval(vars));
    }
    return 0;
  }
};

using NodePtr = std::unique_ptr<Node>;

namespace detail {

struct Parser {
  const std::string& s;
  std::size_t pos = 0;

  explicit Parser(const std::string& text) : s(text) {}

  void skip() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }
  bool eat(char c) {
    skip();
    if (pos < s.size() && s[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& what) {
    throw ValidationError("expression parse error at position " + std::to_string(pos) + ": " +
                          what);
  }

  NodePtr make(Node::Kind k, NodePtr a = nullptr, NodePtr b = nullptr) {
    auto n = std::make_unique<Node>();
    n->kind = k;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
  }

  NodePtr expr() {
    auto n = term();
    for (;;) {
      if (eat('+'))
        n = make(Node::kAdd, std::move(n), term());
      else if (eat('-'))
        n = make(Node::kSub, std::move(n), term());
      else
        return n;
    }
  }

  NodePtr term() {
    auto n = unary();
    for (;;) {
      if (eat('*'))
        n = make(Node::kMul, std::move(n), unary());
      else if (eat('/'))
        n = make(Node::kDiv, std::move(n), unary());
      else
        return n;
    }
  }

  NodePtr unary() {
    if (eat('-')) return make(Node::kNeg, unary());
    if (eat('+')) return unary();
    return power();
  }

  NodePtr power() {
    auto base = atom();
    if (eat('^')) return make(Node::kPow, std::move(base), unary());
    return base;
  }

  NodePtr atom() {
    skip();
    if (pos >= s.size()) fail("unexpected end of input");
    char c = s[pos];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t used = 0;
      double v = std::stod(s.substr(pos), &used);
      pos += used;
      auto n = make(Node::kConst);
      n->value = v;
      return n;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t start = pos;
      while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
        ++pos;
      std::string name = s.substr(start, pos - start);
      static const struct {
        const char* name;
        double (*fn)(double);
      } funcs[] = {{"sin", std::sin},   {"cos", std::cos},   {"tan", std::tan},
                   {"exp", std::exp},   {"log", std::log},   {"sqrt", std::sqrt},
                   {"sinh", std::sinh}, {"cosh", std::cosh}, {"tanh", std::tanh},
                   {"abs", std::fabs},  {"atan", std::atan}};
      for (const auto& f : funcs)
        if (name == f.name) {
          if (!eat('(')) fail("expected '(' after function name");
          auto arg = expr();
          if (!eat(')')) fail("expected ')'");
          auto n = make(Node::kFunc, std::move(arg));
          n->func = f.fn;
          return n;
        }
      if (name == "pi") {
        auto n = make(Node::kConst);
        n->value = 3.14159265358979323846;
        return n;
      }
      if (name == "e") {
        auto n = make(Node::kConst);
        n->value = 2.71828182845904523536;
        return n;
      }
      static const char* vars = "xyzt";
      for (int i = 0; i < 4; ++i)
        if (name.size() == 1 && name[0] == vars[i]) {
          auto n = make(Node::kVar);
          n->var = i;
          return n;
        }
      fail("unknown identifier '" + name + "'");
    }
    if (eat('(')) {
      auto n = expr();
      if (!eat(')')) fail("expected ')'");
      return n;
    }
    fail(std::string("unexpected character '") + c + "'");
  }
};

}  // namespace detail

// Compiles one expression to a shared evaluator (x, y, z, t) -> double.
inline std::function<double(double, double, double, double)> compile(const std::string& text) {
  detail::Parser p(text);
  auto root = p.expr();
  p.skip();
  if (p.pos != text.size()) p.fail("trailing characters");
  std::shared_ptr<Node> shared(std::move(root));
  return [shared](double x, double y, double z, double t) {
    double vars[4] = {x, y, z, t};
    return shared->eval(vars);
  };
}

}  // namespace expr
}  // namespace morphforge
