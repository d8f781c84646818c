#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wassdyn {

enum class ExprKind { Constant, Variable, Negate, Add, Sub, Mul, Div, Pow, Call };
enum class ExprFunc { Sin, Cos, Exp, Tanh, Abs, Sqrt, Min, Max };

struct ExprNode;

/// Immutable arithmetic expression tree over variables x1..xd.
class ExprAst {
 public:
  static ExprAst constant(double value, std::size_t offset = 0);
  /// 0-based variable index (x1 is 0).
  static ExprAst variable(std::size_t index, std::size_t offset = 0);
  static ExprAst negate(ExprAst operand, std::size_t offset = 0);
  static ExprAst binary(ExprKind op, ExprAst lhs, ExprAst rhs, std::size_t offset = 0);
  static ExprAst call(ExprFunc func, std::vector<ExprAst> args, std::size_t offset = 0);

  ExprKind kind() const;
  double value() const;
  std::size_t variable_index() const;
  ExprFunc func() const;
  std::span<const ExprAst> children() const;
  /// Byte offset of the node in the parsed source.
  std::size_t offset() const;

  /// Largest variable index + 1, or 0 for a closed expression.
  std::size_t arity() const;

  friend bool operator==(const ExprAst& a, const ExprAst& b);

 private:
  explicit ExprAst(std::shared_ptr<const ExprNode> node) : node_(std::move(node)) {}
  std::shared_ptr<const ExprNode> node_;
};

struct ExprNode {
  ExprKind kind = ExprKind::Constant;
  double value = 0.0;
  std::size_t index = 0;
  ExprFunc func = ExprFunc::Sin;
  std::vector<ExprAst> args;
  std::size_t offset = 0;
};

std::size_t function_arity(ExprFunc f);
std::string_view function_name(ExprFunc f);

/// Recursive-descent parser.
///
///   expr   := term (('+' | '-') term)*
///   term   := factor (('*' | '/') factor)*
///   factor := '-' factor | power
///   power  := atom ('^' factor)?
///   atom   := number | 'x' | 'x'k | '(' expr ')' | func '(' expr {',' expr} ')'
///
/// '^' is right-associative and binds tighter than unary minus, so "-x^2"
/// is -(x^2). `x` aliases `x1`; indices above `dim` are rejected.
/// Throws ParseError carrying the byte offset.
ExprAst parse_expression(std::string_view src, std::size_t dim);

/// Comma-separated component expressions; the dimension is the number of
/// components and every variable index must lie within it.
std::vector<ExprAst> parse_components(std::string_view src);

/// Throws EvalError on domain errors or non-finite intermediate results.
double eval_ast(const ExprAst& ast, std::span<const double> x);

/// Fully parenthesized form that parses back to an identical tree.
std::string to_string(const ExprAst& ast);

}  // namespace wassdyn
