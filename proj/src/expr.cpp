#include "perfembed/expr.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "perfembed/util.hpp"

namespace perfembed::ir {

int bytes_per_element(ElemType t) {
  switch (t) {
    case ElemType::F32:
    case ElemType::I32:
      return 4;
    case ElemType::F64:
    case ElemType::I64:
      return 8;
    case ElemType::Bool:
      return 1;
  }
  return 0;
}

bool is_float(ElemType t) { return t == ElemType::F32 || t == ElemType::F64; }

const char* to_string(ElemType t) {
  switch (t) {
    case ElemType::F32: return "f32";
    case ElemType::F64: return "f64";
    case ElemType::I32: return "i32";
    case ElemType::I64: return "i64";
    case ElemType::Bool: return "bool";
  }
  return "?";
}

std::optional<ElemType> elem_type_from_string(const std::string& s) {
  if (s == "f32") return ElemType::F32;
  if (s == "f64") return ElemType::F64;
  if (s == "i32") return ElemType::I32;
  if (s == "i64") return ElemType::I64;
  if (s == "bool") return ElemType::Bool;
  return std::nullopt;
}

bool is_comparison(BinOp op) {
  switch (op) {
    case BinOp::Lt: case BinOp::Le: case BinOp::Gt:
    case BinOp::Ge: case BinOp::Eq: case BinOp::Ne:
      return true;
    default:
      return false;
  }
}

bool is_logical(BinOp op) { return op == BinOp::And || op == BinOp::Or; }

const char* to_string(BinOp op) {
  switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::Div: return "/";
    case BinOp::Mod: return "%";
    case BinOp::Min: return "min";
    case BinOp::Max: return "max";
    case BinOp::Lt: return "<";
    case BinOp::Le: return "<=";
    case BinOp::Gt: return ">";
    case BinOp::Ge: return ">=";
    case BinOp::Eq: return "==";
    case BinOp::Ne: return "!=";
    case BinOp::And: return "and";
    case BinOp::Or: return "or";
  }
  return "?";
}

ExprPtr Expr::int_lit(int64_t v) {
  auto e = std::make_shared<Expr>();
  e->kind = Kind::IntLit;
  e->int_value = v;
  return e;
}

ExprPtr Expr::float_lit(double v) {
  auto e = std::make_shared<Expr>();
  e->kind = Kind::FloatLit;
  e->float_value = v;
  return e;
}

ExprPtr Expr::iter(std::string name) {
  auto e = std::make_shared<Expr>();
  e->kind = Kind::Iter;
  e->name = std::move(name);
  return e;
}

ExprPtr Expr::array_read(std::string array, std::vector<ExprPtr> subscripts) {
  auto e = std::make_shared<Expr>();
  e->kind = Kind::ArrayRead;
  e->name = std::move(array);
  e->args = std::move(subscripts);
  return e;
}

ExprPtr Expr::unary(UnOp op, ExprPtr a) {
  auto e = std::make_shared<Expr>();
  e->kind = Kind::Unary;
  e->un = op;
  e->args = {std::move(a)};
  return e;
}

ExprPtr Expr::binary(BinOp op, ExprPtr a, ExprPtr b) {
  auto e = std::make_shared<Expr>();
  e->kind = Kind::Binary;
  e->bin = op;
  e->args = {std::move(a), std::move(b)};
  return e;
}

bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Expr::Kind::IntLit:
      return a.int_value == b.int_value;
    case Expr::Kind::FloatLit:
      return a.float_value == b.float_value;
    case Expr::Kind::Iter:
      return a.name == b.name;
    case Expr::Kind::ArrayRead:
      if (a.name != b.name) return false;
      break;
    case Expr::Kind::Unary:
      if (a.un != b.un) return false;
      break;
    case Expr::Kind::Binary:
      if (a.bin != b.bin) return false;
      break;
  }
  if (a.args.size() != b.args.size()) return false;
  for (size_t i = 0; i < a.args.size(); ++i)
    if (!structurally_equal(*a.args[i], *b.args[i])) return false;
  return true;
}

bool structurally_equal(const ExprPtr& a, const ExprPtr& b) {
  if (!a || !b) return !a && !b;
  return structurally_equal(*a, *b);
}

namespace {

int precedence(BinOp op) {
  if (op == BinOp::Or) return 1;
  if (op == BinOp::And) return 2;
  if (is_comparison(op)) return 3;
  if (op == BinOp::Add || op == BinOp::Sub) return 4;
  return 5;  // * / %
}

void print_expr(const Expr& e, std::ostream& os, int parent_prec) {
  switch (e.kind) {
    case Expr::Kind::IntLit:
      os << e.int_value;
      return;
    case Expr::Kind::FloatLit: {
      std::string s = perfembed::format_double(e.float_value);
      os << s;
      // Keep float literals visually distinct from ints.
      if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
          s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
        os << ".0";
      return;
    }
    case Expr::Kind::Iter:
      os << e.name;
      return;
    case Expr::Kind::ArrayRead:
      os << e.name << '[';
      for (size_t i = 0; i < e.args.size(); ++i) {
        if (i) os << ", ";
        print_expr(*e.args[i], os, 0);
      }
      os << ']';
      return;
    case Expr::Kind::Unary:
      if (e.un == UnOp::Neg) {
        os << "-";
        print_expr(*e.args[0], os, 6);
      } else {
        os << "not ";
        print_expr(*e.args[0], os, 6);
      }
      return;
    case Expr::Kind::Binary: {
      if (e.bin == BinOp::Min || e.bin == BinOp::Max) {
        os << (e.bin == BinOp::Min ? "min(" : "max(");
        print_expr(*e.args[0], os, 0);
        os << ", ";
        print_expr(*e.args[1], os, 0);
        os << ')';
        return;
      }
      const int prec = precedence(e.bin);
      const bool paren = prec < parent_prec;
      if (paren) os << '(';
      print_expr(*e.args[0], os, prec);
      os << ' ' << to_string(e.bin) << ' ';
      print_expr(*e.args[1], os, prec + 1);
      if (paren) os << ')';
      return;
    }
  }
}

}  // namespace

std::string to_text(const Expr& e) {
  std::ostringstream os;
  print_expr(e, os, 0);
  return os.str();
}

std::string to_text(const ExprPtr& e) { return e ? to_text(*e) : std::string("<null>"); }

bool reads_arrays(const Expr& e) {
  if (e.kind == Expr::Kind::ArrayRead) return true;
  for (const auto& a : e.args)
    if (reads_arrays(*a)) return true;
  return false;
}

void collect_iterators(const Expr& e, std::vector<std::string>& out) {
  if (e.kind == Expr::Kind::Iter) {
    if (std::find(out.begin(), out.end(), e.name) == out.end()) out.push_back(e.name);
  }
  for (const auto& a : e.args) collect_iterators(*a, out);
}

bool references_iterator(const Expr& e, const std::string& name) {
  if (e.kind == Expr::Kind::Iter && e.name == name) return true;
  for (const auto& a : e.args)
    if (references_iterator(*a, name)) return true;
  return false;
}

ExprPtr substitute(const ExprPtr& e, const std::string& name, const ExprPtr& replacement) {
  if (!e) return e;
  if (e->kind == Expr::Kind::Iter) return e->name == name ? replacement : e;
  if (e->args.empty()) return e;
  bool changed = false;
  std::vector<ExprPtr> args;
  args.reserve(e->args.size());
  for (const auto& a : e->args) {
    auto r = substitute(a, name, replacement);
    changed |= (r != a);
    args.push_back(std::move(r));
  }
  if (!changed) return e;
  auto copy = std::make_shared<Expr>(*e);
  copy->args = std::move(args);
  return copy;
}

namespace {

// Affine form: coefficients per iterator plus trailing constant.
using AffineForm = std::vector<int64_t>;

std::optional<AffineForm> affine_rec(const Expr& e, const std::vector<std::string>& its) {
  const size_t n = its.size();
  AffineForm f(n + 1, 0);
  switch (e.kind) {
    case Expr::Kind::IntLit:
      f[n] = e.int_value;
      return f;
    case Expr::Kind::FloatLit:
    case Expr::Kind::ArrayRead:
      return std::nullopt;
    case Expr::Kind::Iter: {
      auto it = std::find(its.begin(), its.end(), e.name);
      if (it == its.end()) return std::nullopt;
      f[static_cast<size_t>(it - its.begin())] = 1;
      return f;
    }
    case Expr::Kind::Unary: {
      if (e.un != UnOp::Neg) return std::nullopt;
      auto a = affine_rec(*e.args[0], its);
      if (!a) return std::nullopt;
      for (auto& v : *a) v = -v;
      return a;
    }
    case Expr::Kind::Binary: {
      if (e.bin == BinOp::Add || e.bin == BinOp::Sub) {
        auto a = affine_rec(*e.args[0], its);
        auto b = affine_rec(*e.args[1], its);
        if (!a || !b) return std::nullopt;
        for (size_t i = 0; i <= n; ++i)
          (*a)[i] += (e.bin == BinOp::Add ? (*b)[i] : -(*b)[i]);
        return a;
      }
      if (e.bin == BinOp::Mul) {
        auto a = affine_rec(*e.args[0], its);
        auto b = affine_rec(*e.args[1], its);
        if (!a || !b) return std::nullopt;
        const bool a_const = std::all_of(a->begin(), a->end() - 1, [](int64_t v) { return v == 0; });
        const bool b_const = std::all_of(b->begin(), b->end() - 1, [](int64_t v) { return v == 0; });
        if (!a_const && !b_const) return std::nullopt;
        const AffineForm& lin = a_const ? *b : *a;
        const int64_t c = a_const ? (*a)[n] : (*b)[n];
        AffineForm r(n + 1, 0);
        for (size_t i = 0; i <= n; ++i) r[i] = lin[i] * c;
        return r;
      }
      return std::nullopt;
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::vector<int64_t>> affine_coefficients(
    const Expr& e, const std::vector<std::string>& iterators) {
  return affine_rec(e, iterators);
}

std::optional<Interval> eval_interval(const Expr& e,
                                      const std::map<std::string, Interval>& env) {
  switch (e.kind) {
    case Expr::Kind::IntLit:
      return Interval{e.int_value, e.int_value};
    case Expr::Kind::FloatLit:
    case Expr::Kind::ArrayRead:
      return std::nullopt;
    case Expr::Kind::Iter: {
      auto it = env.find(e.name);
      if (it == env.end()) return std::nullopt;
      return it->second;
    }
    case Expr::Kind::Unary: {
      if (e.un != UnOp::Neg) return std::nullopt;
      auto a = eval_interval(*e.args[0], env);
      if (!a) return std::nullopt;
      return Interval{-a->hi, -a->lo};
    }
    case Expr::Kind::Binary: {
      auto a = eval_interval(*e.args[0], env);
      auto b = eval_interval(*e.args[1], env);
      if (!a || !b) return std::nullopt;
      switch (e.bin) {
        case BinOp::Add:
          return Interval{a->lo + b->lo, a->hi + b->hi};
        case BinOp::Sub:
          return Interval{a->lo - b->hi, a->hi - b->lo};
        case BinOp::Mul: {
          const int64_t c[4] = {a->lo * b->lo, a->lo * b->hi, a->hi * b->lo, a->hi * b->hi};
          return Interval{*std::min_element(c, c + 4), *std::max_element(c, c + 4)};
        }
        case BinOp::Min:
          return Interval{std::min(a->lo, b->lo), std::min(a->hi, b->hi)};
        case BinOp::Max:
          return Interval{std::max(a->lo, b->lo), std::max(a->hi, b->hi)};
        case BinOp::Div:
          if (b->lo == b->hi && b->lo > 0)
            return Interval{a->lo / b->lo, a->hi / b->lo};
          return std::nullopt;
        case BinOp::Mod:
          if (b->lo == b->hi && b->lo > 0 && a->lo >= 0)
            return Interval{0, b->lo - 1};
          return std::nullopt;
        default:
          return std::nullopt;
      }
    }
  }
  return std::nullopt;
}

}  // namespace perfembed::ir
