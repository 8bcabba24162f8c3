#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace perfembed::ir {

enum class ElemType { F32, F64, I32, I64, Bool };

int bytes_per_element(ElemType t);
bool is_float(ElemType t);
const char* to_string(ElemType t);
std::optional<ElemType> elem_type_from_string(const std::string& s);

enum class BinOp { Add, Sub, Mul, Div, Mod, Min, Max, Lt, Le, Gt, Ge, Eq, Ne, And, Or };
enum class UnOp { Neg, Not };

bool is_comparison(BinOp op);
bool is_logical(BinOp op);
const char* to_string(BinOp op);

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

// Small immutable expression tree used for body statements, memlet
// subscripts, and map extents.
struct Expr {
  enum class Kind { IntLit, FloatLit, Iter, ArrayRead, Unary, Binary };

  Kind kind;
  int64_t int_value = 0;     // IntLit
  double float_value = 0.0;  // FloatLit
  std::string name;          // Iter / ArrayRead: iterator or array name
  std::vector<ExprPtr> args; // ArrayRead subscripts, or operands
  BinOp bin = BinOp::Add;
  UnOp un = UnOp::Neg;

  static ExprPtr int_lit(int64_t v);
  static ExprPtr float_lit(double v);
  static ExprPtr iter(std::string name);
  static ExprPtr array_read(std::string array, std::vector<ExprPtr> subscripts);
  static ExprPtr unary(UnOp op, ExprPtr a);
  static ExprPtr binary(BinOp op, ExprPtr a, ExprPtr b);
};

bool structurally_equal(const Expr& a, const Expr& b);
bool structurally_equal(const ExprPtr& a, const ExprPtr& b);

std::string to_text(const Expr& e);
std::string to_text(const ExprPtr& e);

// True if the expression contains any ArrayRead node.
bool reads_arrays(const Expr& e);

// Names of iterators referenced anywhere in the expression.
void collect_iterators(const Expr& e, std::vector<std::string>& out);
bool references_iterator(const Expr& e, const std::string& name);

// Replaces every Iter node named `name` with `replacement`.
ExprPtr substitute(const ExprPtr& e, const std::string& name, const ExprPtr& replacement);

// Affine analysis: expresses e as sum(coeff_i * iterators[i]) + constant with
// integer coefficients. Returns coefficients followed by the constant
// (size iterators.size() + 1), or nullopt if e is not affine in those
// iterators (array reads, products of iterators, min/max, ... are rejected).
std::optional<std::vector<int64_t>> affine_coefficients(
    const Expr& e, const std::vector<std::string>& iterators);

struct Interval {
  int64_t lo = 0;
  int64_t hi = 0;  // inclusive
};

// Conservative integer interval evaluation over iterator ranges. Supports
// +, -, *, min, max, / and % by positive constants, and unary negation.
// Returns nullopt for expressions involving array reads or unknown iterators.
std::optional<Interval> eval_interval(const Expr& e,
                                      const std::map<std::string, Interval>& env);

}  // namespace perfembed::ir
