#include "wassdyn/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "wassdyn/error.hpp"

namespace wassdyn {

ExprAst ExprAst::constant(double value, std::size_t offset) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprKind::Constant;
  n->value = value;
  n->offset = offset;
  return ExprAst(std::move(n));
}

ExprAst ExprAst::variable(std::size_t index, std::size_t offset) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprKind::Variable;
  n->index = index;
  n->offset = offset;
  return ExprAst(std::move(n));
}

ExprAst ExprAst::negate(ExprAst operand, std::size_t offset) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprKind::Negate;
  n->args.push_back(std::move(operand));
  n->offset = offset;
  return ExprAst(std::move(n));
}

ExprAst ExprAst::binary(ExprKind op, ExprAst lhs, ExprAst rhs, std::size_t offset) {
  if (op != ExprKind::Add && op != ExprKind::Sub && op != ExprKind::Mul && op != ExprKind::Div &&
      op != ExprKind::Pow) {
    throw Error("ExprAst::binary: not a binary operator");
  }
  auto n = std::make_shared<ExprNode>();
  n->kind = op;
  n->args.push_back(std::move(lhs));
  n->args.push_back(std::move(rhs));
  n->offset = offset;
  return ExprAst(std::move(n));
}

ExprAst ExprAst::call(ExprFunc func, std::vector<ExprAst> args, std::size_t offset) {
  if (args.size() != function_arity(func)) {
    throw ParseError("function '" + std::string(function_name(func)) + "' expects " +
                         std::to_string(function_arity(func)) + " argument(s), got " +
                         std::to_string(args.size()),
                     offset);
  }
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprKind::Call;
  n->func = func;
  n->args = std::move(args);
  n->offset = offset;
  return ExprAst(std::move(n));
}

ExprKind ExprAst::kind() const { return node_->kind; }
double ExprAst::value() const { return node_->value; }
std::size_t ExprAst::variable_index() const { return node_->index; }
ExprFunc ExprAst::func() const { return node_->func; }
std::span<const ExprAst> ExprAst::children() const { return node_->args; }
std::size_t ExprAst::offset() const { return node_->offset; }

std::size_t ExprAst::arity() const {
  if (kind() == ExprKind::Variable) return variable_index() + 1;
  std::size_t a = 0;
  for (const ExprAst& c : children()) a = std::max(a, c.arity());
  return a;
}

bool operator==(const ExprAst& a, const ExprAst& b) {
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case ExprKind::Constant:
      return a.value() == b.value();
    case ExprKind::Variable:
      return a.variable_index() == b.variable_index();
    case ExprKind::Call:
      if (a.func() != b.func()) return false;
      break;
    default:
      break;
  }
  const auto ca = a.children();
  const auto cb = b.children();
  if (ca.size() != cb.size()) return false;
  for (std::size_t i = 0; i < ca.size(); ++i) {
    if (!(ca[i] == cb[i])) return false;
  }
  return true;
}

std::size_t function_arity(ExprFunc f) {
  return f == ExprFunc::Min || f == ExprFunc::Max ? 2 : 1;
}

std::string_view function_name(ExprFunc f) {
  switch (f) {
    case ExprFunc::Sin: return "sin";
    case ExprFunc::Cos: return "cos";
    case ExprFunc::Exp: return "exp";
    case ExprFunc::Tanh: return "tanh";
    case ExprFunc::Abs: return "abs";
    case ExprFunc::Sqrt: return "sqrt";
    case ExprFunc::Min: return "min";
    case ExprFunc::Max: return "max";
  }
  return "?";
}

namespace {

bool lookup_function(std::string_view name, ExprFunc& out) {
  static constexpr ExprFunc all[] = {ExprFunc::Sin, ExprFunc::Cos, ExprFunc::Exp, ExprFunc::Tanh,
                                     ExprFunc::Abs, ExprFunc::Sqrt, ExprFunc::Min, ExprFunc::Max};
  for (ExprFunc f : all) {
    if (function_name(f) == name) {
      out = f;
      return true;
    }
  }
  return false;
}

class Parser {
 public:
  // dim == 0 disables the variable-range check.
  Parser(std::string_view src, std::size_t dim) : src_(src), dim_(dim) {}

  std::vector<ExprAst> parse_list() {
    std::vector<ExprAst> out;
    skip_space();
    if (pos_ == src_.size()) throw ParseError("empty expression", pos_);
    out.push_back(expr());
    while (peek() == ',') {
      ++pos_;
      out.push_back(expr());
    }
    finish();
    return out;
  }

  ExprAst parse_single() {
    skip_space();
    if (pos_ == src_.size()) throw ParseError("empty expression", pos_);
    ExprAst e = expr();
    finish();
    return e;
  }

 private:
  void finish() {
    skip_space();
    if (pos_ < src_.size()) {
      if (src_[pos_] == ')') throw ParseError("unbalanced ')'", pos_);
      throw ParseError(std::string("unexpected trailing '") + src_[pos_] + "'", pos_);
    }
  }

  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  char peek() {
    skip_space();
    return pos_ < src_.size() ? src_[pos_] : '\0';
  }

  ExprAst expr() {
    ExprAst lhs = term();
    while (true) {
      const char c = peek();
      if (c != '+' && c != '-') return lhs;
      const std::size_t at = pos_++;
      lhs = ExprAst::binary(c == '+' ? ExprKind::Add : ExprKind::Sub, lhs, term(), at);
    }
  }

  ExprAst term() {
    ExprAst lhs = factor();
    while (true) {
      const char c = peek();
      if (c != '*' && c != '/') return lhs;
      const std::size_t at = pos_++;
      lhs = ExprAst::binary(c == '*' ? ExprKind::Mul : ExprKind::Div, lhs, factor(), at);
    }
  }

  ExprAst factor() {
    if (peek() == '-') {
      const std::size_t at = pos_++;
      return ExprAst::negate(factor(), at);
    }
    return power();
  }

  ExprAst power() {
    ExprAst base = atom();
    if (peek() == '^') {
      const std::size_t at = pos_++;
      return ExprAst::binary(ExprKind::Pow, base, factor(), at);
    }
    return base;
  }

  ExprAst atom() {
    const char c = peek();
    const std::size_t at = pos_;
    if (c == '\0') throw ParseError("unexpected end of expression", pos_);
    if (c == '(') {
      ++pos_;
      ExprAst inner = expr();
      if (peek() != ')') throw ParseError("unbalanced '(' (missing ')')", at);
      ++pos_;
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t end = pos_;
      while (end < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[end])) || src_[end] == '_')) {
        ++end;
      }
      const std::string_view name = src_.substr(pos_, end - pos_);
      pos_ = end;
      return identifier(name, at);
    }
    throw ParseError(std::string("unexpected character '") + c + "'", at);
  }

  ExprAst number() {
    const std::size_t start = pos_;
    std::size_t p = pos_;
    auto digits = [&] {
      const std::size_t s = p;
      while (p < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p]))) ++p;
      return p - s;
    };
    std::size_t count = digits();
    if (p < src_.size() && src_[p] == '.') {
      ++p;
      count += digits();
    }
    if (count == 0) throw ParseError("malformed number", start);
    if (p < src_.size() && (src_[p] == 'e' || src_[p] == 'E')) {
      std::size_t q = p + 1;
      if (q < src_.size() && (src_[q] == '+' || src_[q] == '-')) ++q;
      if (q < src_.size() && std::isdigit(static_cast<unsigned char>(src_[q]))) {
        p = q;
        digits();
      }
    }
    const std::string text(src_.substr(start, p - start));
    pos_ = p;
    const double v = std::strtod(text.c_str(), nullptr);
    if (!std::isfinite(v)) throw ParseError("number out of range", start);
    return ExprAst::constant(v, start);
  }

  ExprAst identifier(std::string_view name, std::size_t at) {
    if (name == "x") return variable(0, at);
    if (name.size() > 1 && name[0] == 'x') {
      bool numeric = true;
      for (char ch : name.substr(1)) numeric = numeric && std::isdigit(static_cast<unsigned char>(ch));
      if (numeric) {
        const std::size_t k = std::strtoul(std::string(name.substr(1)).c_str(), nullptr, 10);
        if (k == 0) throw ParseError("variable indices start at x1", at);
        return variable(k - 1, at);
      }
    }
    ExprFunc f;
    if (!lookup_function(name, f)) throw ParseError("unknown identifier '" + std::string(name) + "'", at);
    if (peek() != '(') throw ParseError("expected '(' after function '" + std::string(name) + "'", pos_);
    const std::size_t open = pos_++;
    std::vector<ExprAst> args;
    if (peek() == ')') throw ParseError("function '" + std::string(name) + "' needs arguments", pos_);
    args.push_back(expr());
    while (peek() == ',') {
      ++pos_;
      args.push_back(expr());
    }
    if (peek() != ')') throw ParseError("unbalanced '(' (missing ')')", open);
    ++pos_;
    return ExprAst::call(f, std::move(args), at);
  }

  ExprAst variable(std::size_t index, std::size_t at) {
    if (dim_ != 0 && index >= dim_) {
      throw ParseError("variable x" + std::to_string(index + 1) + " exceeds dimension " +
                           std::to_string(dim_),
                       at);
    }
    return ExprAst::variable(index, at);
  }

  std::string_view src_;
  std::size_t dim_;
  std::size_t pos_ = 0;
};

void check_variables(const ExprAst& e, std::size_t dim) {
  if (e.kind() == ExprKind::Variable && e.variable_index() >= dim) {
    throw ParseError("variable x" + std::to_string(e.variable_index() + 1) + " exceeds dimension " +
                         std::to_string(dim),
                     e.offset());
  }
  for (const ExprAst& c : e.children()) check_variables(c, dim);
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] void domain_error(const ExprAst& node, const std::string& what) {
  throw EvalError(what + " in '" + to_string(node) + "' at offset " + std::to_string(node.offset()));
}

}  // namespace

ExprAst parse_expression(std::string_view src, std::size_t dim) {
  if (dim == 0) throw DimensionError("parse_expression: dimension must be >= 1");
  return Parser(src, dim).parse_single();
}

std::vector<ExprAst> parse_components(std::string_view src) {
  std::vector<ExprAst> out = Parser(src, 0).parse_list();
  for (const ExprAst& e : out) check_variables(e, out.size());
  return out;
}

double eval_ast(const ExprAst& ast, std::span<const double> x) {
  double r = 0.0;
  const auto kids = ast.children();
  switch (ast.kind()) {
    case ExprKind::Constant:
      return ast.value();
    case ExprKind::Variable:
      if (ast.variable_index() >= x.size()) domain_error(ast, "variable outside the point dimension");
      return x[ast.variable_index()];
    case ExprKind::Negate:
      return -eval_ast(kids[0], x);
    case ExprKind::Add:
      r = eval_ast(kids[0], x) + eval_ast(kids[1], x);
      break;
    case ExprKind::Sub:
      r = eval_ast(kids[0], x) - eval_ast(kids[1], x);
      break;
    case ExprKind::Mul:
      r = eval_ast(kids[0], x) * eval_ast(kids[1], x);
      break;
    case ExprKind::Div: {
      const double num = eval_ast(kids[0], x);
      const double den = eval_ast(kids[1], x);
      if (den == 0.0) domain_error(ast, "division by zero");
      r = num / den;
      break;
    }
    case ExprKind::Pow: {
      const double base = eval_ast(kids[0], x);
      const double ex = eval_ast(kids[1], x);
      if (base < 0.0 && ex != std::floor(ex)) domain_error(ast, "negative base with non-integer exponent");
      if (base == 0.0 && ex < 0.0) domain_error(ast, "zero raised to a negative power");
      r = std::pow(base, ex);
      break;
    }
    case ExprKind::Call: {
      const double a = eval_ast(kids[0], x);
      switch (ast.func()) {
        case ExprFunc::Sin: r = std::sin(a); break;
        case ExprFunc::Cos: r = std::cos(a); break;
        case ExprFunc::Exp: r = std::exp(a); break;
        case ExprFunc::Tanh: r = std::tanh(a); break;
        case ExprFunc::Abs: r = std::abs(a); break;
        case ExprFunc::Sqrt:
          if (a < 0.0) domain_error(ast, "sqrt of a negative number");
          r = std::sqrt(a);
          break;
        case ExprFunc::Min: r = std::min(a, eval_ast(kids[1], x)); break;
        case ExprFunc::Max: r = std::max(a, eval_ast(kids[1], x)); break;
      }
      break;
    }
  }
  if (!std::isfinite(r)) domain_error(ast, "non-finite result");
  return r;
}

std::string to_string(const ExprAst& ast) {
  const auto kids = ast.children();
  switch (ast.kind()) {
    case ExprKind::Constant:
      return format_number(ast.value());
    case ExprKind::Variable:
      return "x" + std::to_string(ast.variable_index() + 1);
    case ExprKind::Negate:
      return "(-" + to_string(kids[0]) + ")";
    case ExprKind::Add:
      return "(" + to_string(kids[0]) + " + " + to_string(kids[1]) + ")";
    case ExprKind::Sub:
      return "(" + to_string(kids[0]) + " - " + to_string(kids[1]) + ")";
    case ExprKind::Mul:
      return "(" + to_string(kids[0]) + " * " + to_string(kids[1]) + ")";
    case ExprKind::Div:
      return "(" + to_string(kids[0]) + " / " + to_string(kids[1]) + ")";
    case ExprKind::Pow:
      return "(" + to_string(kids[0]) + " ^ " + to_string(kids[1]) + ")";
    case ExprKind::Call: {
      std::string s(function_name(ast.func()));
      s += "(";
      for (std::size_t i = 0; i < kids.size(); ++i) {
        if (i) s += ", ";
        s += to_string(kids[i]);
      }
      return s + ")";
    }
  }
  return {};
}

}  // namespace wassdyn
