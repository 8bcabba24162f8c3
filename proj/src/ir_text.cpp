#include "perfembed/ir_text.hpp"

#include <cctype>
#include <optional>
#include <sstream>

#include "perfembed/util.hpp"

namespace perfembed::ir {

ParseError::ParseError(const std::string& msg, int line, int column)
    : std::runtime_error("parse error at " + std::to_string(line) + ":" +
                         std::to_string(column) + ": " + msg),
      line(line),
      column(column) {}

namespace {

struct Token {
  enum class Kind { Ident, Int, Float, Punct, End };
  Kind kind = Kind::End;
  std::string text;
  int64_t int_value = 0;
  double float_value = 0.0;
  int line = 1, col = 1;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) { advance(); }

  const Token& peek() const { return tok_; }

  Token next() {
    Token t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    skip_ws();
    tok_ = Token{};
    tok_.line = line_;
    tok_.col = col_;
    if (pos_ >= src_.size()) {
      tok_.kind = Token::Kind::End;
      return;
    }
    const char c = src_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        bump();
      tok_.kind = Token::Kind::Ident;
      tok_.text = src_.substr(start, pos_ - start);
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t start = pos_;
      bool is_float = false;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) bump();
      if (pos_ < src_.size() && src_[pos_] == '.' && pos_ + 1 < src_.size() &&
          std::isdigit(static_cast<unsigned char>(src_[pos_ + 1]))) {
        is_float = true;
        bump();
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) bump();
      }
      if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
        size_t save = pos_;
        bump();
        if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) bump();
        if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
          is_float = true;
          while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) bump();
        } else {
          pos_ = save;  // not an exponent
        }
      }
      const std::string text = src_.substr(start, pos_ - start);
      if (is_float) {
        tok_.kind = Token::Kind::Float;
        tok_.float_value = std::stod(text);
      } else {
        tok_.kind = Token::Kind::Int;
        tok_.int_value = std::stoll(text);
      }
      tok_.text = text;
      return;
    }
    // Multi-char punct first.
    static const char* two[] = {"+=", "<=", ">=", "==", "!="};
    for (const char* p : two) {
      if (src_.compare(pos_, 2, p) == 0) {
        tok_.kind = Token::Kind::Punct;
        tok_.text = p;
        bump();
        bump();
        return;
      }
    }
    tok_.kind = Token::Kind::Punct;
    tok_.text = std::string(1, c);
    bump();
  }

  void skip_ws() {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == '#') {  // comment to end of line
        while (pos_ < src_.size() && src_[pos_] != '\n') bump();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        bump();
      } else {
        break;
      }
    }
  }

  void bump() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  const std::string& src_;
  size_t pos_ = 0;
  int line_ = 1, col_ = 1;
  Token tok_;
};

class Parser {
 public:
  explicit Parser(const std::string& src) : lex_(src) {}

  LoopNest parse_document() {
    expect_ident("perfembed");
    expect_punct("-");
    expect_ident("ir");
    const Token v = lex_.next();
    if (v.kind != Token::Kind::Ident || v.text != "v1")
      fail(v, "unsupported format version (expected v1)");
    LoopNest nest;
    while (lex_.peek().kind != Token::Kind::End) {
      const Token section = expect_any_ident();
      if (section.text == "arrays") {
        parse_arrays(nest);
      } else if (section.text == "maps") {
        parse_maps(nest);
      } else if (section.text == "body") {
        parse_body(nest);
      } else if (section.text == "memlets") {
        parse_memlets(nest);
      } else {
        fail(section, "unknown section '" + section.text + "'");
      }
    }
    return nest;
  }

  ExprPtr parse_standalone_expr() {
    ExprPtr e = parse_expr();
    if (lex_.peek().kind != Token::Kind::End) fail(lex_.peek(), "trailing input after expression");
    return e;
  }

 private:
  [[noreturn]] void fail(const Token& t, const std::string& msg) {
    throw ParseError(msg, t.line, t.col);
  }

  Token expect_punct(const std::string& p) {
    Token t = lex_.next();
    if (t.kind != Token::Kind::Punct || t.text != p)
      fail(t, "expected '" + p + "', got '" + t.text + "'");
    return t;
  }

  Token expect_ident(const std::string& name) {
    Token t = lex_.next();
    if (t.kind != Token::Kind::Ident || t.text != name)
      fail(t, "expected '" + name + "', got '" + t.text + "'");
    return t;
  }

  Token expect_any_ident() {
    Token t = lex_.next();
    if (t.kind != Token::Kind::Ident) fail(t, "expected identifier, got '" + t.text + "'");
    return t;
  }

  bool accept_punct(const std::string& p) {
    if (lex_.peek().kind == Token::Kind::Punct && lex_.peek().text == p) {
      lex_.next();
      return true;
    }
    return false;
  }

  bool peek_ident(const std::string& name) {
    return lex_.peek().kind == Token::Kind::Ident && lex_.peek().text == name;
  }

  int64_t expect_int() {
    Token t = lex_.next();
    bool neg = false;
    if (t.kind == Token::Kind::Punct && t.text == "-") {
      neg = true;
      t = lex_.next();
    }
    if (t.kind != Token::Kind::Int) fail(t, "expected integer");
    return neg ? -t.int_value : t.int_value;
  }

  bool expect_bool() {
    Token t = expect_any_ident();
    if (t.text == "true") return true;
    if (t.text == "false") return false;
    fail(t, "expected 'true' or 'false'");
  }

  // --- sections ---

  void parse_arrays(LoopNest& nest) {
    expect_punct("{");
    while (!accept_punct("}")) {
      DataArray a;
      a.name = expect_any_ident().text;
      a.bytes = 0;  // resolve after elem_type
      expect_punct("{");
      while (!accept_punct("}")) {
        const Token key = expect_any_ident();
        expect_punct(":");
        if (key.text == "elem_type") {
          const Token t = expect_any_ident();
          auto et = elem_type_from_string(t.text);
          if (!et) fail(t, "unknown elem_type '" + t.text + "'");
          a.elem_type = *et;
        } else if (key.text == "bytes_per_element") {
          a.bytes = static_cast<int>(expect_int());
        } else if (key.text == "shape") {
          a.shape = parse_dim_list();
        } else if (key.text == "strides") {
          expect_punct("[");
          a.strides.clear();
          if (!accept_punct("]")) {
            do {
              a.strides.push_back(expect_int());
            } while (accept_punct(","));
            expect_punct("]");
          }
        } else if (key.text == "transient") {
          a.transient = expect_bool();
        } else if (key.text == "alignment") {
          a.alignment = expect_int();
        } else if (key.text == "offset") {
          a.offset = expect_int();
        } else if (key.text == "storage") {
          const Token t = expect_any_ident();
          if (t.text == "heap") a.storage = Storage::Heap;
          else if (t.text == "register") a.storage = Storage::Register;
          else fail(t, "unknown storage '" + t.text + "'");
        } else {
          fail(key, "unknown array field '" + key.text + "'");
        }
        expect_punct(";");
      }
      if (a.bytes == 0) a.bytes = bytes_per_element(a.elem_type);
      nest.arrays.push_back(std::move(a));
    }
  }

  std::vector<int64_t> parse_dim_list() {
    std::vector<int64_t> dims;
    expect_punct("[");
    if (!accept_punct("]")) {
      do {
        if (peek_ident("dynamic")) {
          lex_.next();
          dims.push_back(kDynamicDim);
        } else {
          dims.push_back(expect_int());
        }
      } while (accept_punct(","));
      expect_punct("]");
    }
    return dims;
  }

  void parse_maps(LoopNest& nest) {
    expect_punct("{");
    while (!accept_punct("}")) {
      MapScope m;
      m.id = expect_any_ident().text;
      expect_punct("{");
      while (true) {
        if (accept_punct("}")) break;
        if (peek_ident("schedule")) {
          lex_.next();
          parse_schedule(m.schedule);
          continue;
        }
        const Token key = expect_any_ident();
        expect_punct(":");
        if (key.text == "parent") {
          m.parent = expect_any_ident().text;
        } else if (key.text == "level") {
          m.level = static_cast<int>(expect_int());
        } else if (key.text == "params") {
          expect_punct("[");
          if (!accept_punct("]")) {
            do {
              m.params.push_back(expect_any_ident().text);
            } while (accept_punct(","));
            expect_punct("]");
          }
        } else if (key.text == "extents") {
          expect_punct("[");
          if (!accept_punct("]")) {
            do {
              Extent e;
              e.begin = parse_expr();
              expect_punct(":");
              if (peek_ident("dynamic")) {
                lex_.next();
                e.end = nullptr;  // unbound dynamic extent
              } else {
                e.end = parse_expr();
              }
              expect_punct(":");
              e.step = expect_int();
              m.extents.push_back(std::move(e));
            } while (accept_punct(","));
            expect_punct("]");
          }
        } else {
          fail(key, "unknown map field '" + key.text + "'");
        }
        expect_punct(";");
      }
      nest.maps.push_back(std::move(m));
    }
  }

  void parse_schedule(ScheduleAnnotation& s) {
    expect_punct("{");
    while (!accept_punct("}")) {
      const Token key = expect_any_ident();
      expect_punct(":");
      if (key.text == "parallel") s.parallel = expect_bool();
      else if (key.text == "assignment") {
        const Token t = expect_any_ident();
        if (t.text == "static") s.assignment = Assignment::Static;
        else if (t.text == "dynamic") s.assignment = Assignment::Dynamic;
        else fail(t, "unknown assignment '" + t.text + "'");
      } else if (key.text == "chunk") s.chunk = expect_int();
      else if (key.text == "threads") s.threads = expect_int();
      else if (key.text == "vector_width") s.vector_width = static_cast<int>(expect_int());
      else fail(key, "unknown schedule field '" + key.text + "'");
      expect_punct(";");
    }
  }

  void parse_body(LoopNest& nest) {
    expect_punct("{");
    nest.body = parse_stmt_list();
  }

  std::vector<StmtPtr> parse_stmt_list() {
    std::vector<StmtPtr> stmts;
    while (!accept_punct("}")) stmts.push_back(parse_stmt());
    return stmts;
  }

  StmtPtr parse_stmt() {
    if (peek_ident("local")) {
      lex_.next();
      LocalStmt s;
      s.name = expect_any_ident().text;
      expect_punct(":");
      const Token t = expect_any_ident();
      auto et = elem_type_from_string(t.text);
      if (!et) fail(t, "unknown type '" + t.text + "'");
      s.type = *et;
      expect_punct("=");
      s.init = parse_expr();
      expect_punct(";");
      return make_stmt(std::move(s));
    }
    if (peek_ident("if")) {
      lex_.next();
      IfStmt s;
      s.cond = parse_expr();
      expect_punct("{");
      s.then_body = parse_stmt_list();
      if (peek_ident("else")) {
        lex_.next();
        expect_punct("{");
        s.else_body = parse_stmt_list();
      }
      return make_stmt(std::move(s));
    }
    if (peek_ident("for")) {
      lex_.next();
      ForStmt s;
      s.iter = expect_any_ident().text;
      expect_punct("=");
      s.init = parse_expr();
      expect_punct(";");
      s.cond = parse_expr();
      expect_punct(";");
      s.step = expect_int();
      expect_punct("{");
      s.body = parse_stmt_list();
      return make_stmt(std::move(s));
    }
    // Assignment.
    AssignStmt s;
    s.target = expect_any_ident().text;
    if (accept_punct("[")) {
      do {
        s.subscripts.push_back(parse_expr());
      } while (accept_punct(","));
      expect_punct("]");
    }
    const Token op = lex_.next();
    if (op.kind == Token::Kind::Punct && op.text == "=") {
      s.reduce = ReduceOp::None;
    } else if (op.kind == Token::Kind::Punct && op.text == "+=") {
      s.reduce = ReduceOp::Sum;
    } else if (op.kind == Token::Kind::Ident && (op.text == "min" || op.text == "max")) {
      expect_punct("=");
      s.reduce = op.text == "min" ? ReduceOp::Min : ReduceOp::Max;
    } else {
      fail(op, "expected assignment operator");
    }
    s.value = parse_expr();
    expect_punct(";");
    return make_stmt(std::move(s));
  }

  void parse_memlets(LoopNest& nest) {
    expect_punct("{");
    while (!accept_punct("}")) {
      Memlet m;
      m.id = expect_any_ident().text;
      expect_punct("{");
      while (!accept_punct("}")) {
        const Token key = expect_any_ident();
        expect_punct(":");
        if (key.text == "src" || key.text == "dst") {
          std::string ref = expect_any_ident().text;
          if (accept_punct(".")) ref += "." + expect_any_ident().text;
          auto parsed = NodeRef::parse(ref);
          if (!parsed) fail(key, "invalid node reference '" + ref + "'");
          (key.text == "src" ? m.src : m.dst) = *parsed;
        } else if (key.text == "array") {
          m.array = expect_any_ident().text;
        } else if (key.text == "subscripts") {
          expect_punct("[");
          if (!accept_punct("]")) {
            do {
              m.subscripts.push_back(parse_expr());
            } while (accept_punct(","));
            expect_punct("]");
          }
        } else if (key.text == "direction") {
          const Token t = expect_any_ident();
          if (t.text == "read") m.direction = Direction::Read;
          else if (t.text == "write") m.direction = Direction::Write;
          else fail(t, "unknown direction '" + t.text + "'");
        } else if (key.text == "reduction") {
          const Token t = expect_any_ident();
          if (t.text == "none") m.reduction = ReduceOp::None;
          else if (t.text == "sum") m.reduction = ReduceOp::Sum;
          else if (t.text == "min") m.reduction = ReduceOp::Min;
          else if (t.text == "max") m.reduction = ReduceOp::Max;
          else fail(t, "unknown reduction '" + t.text + "'");
        } else {
          fail(key, "unknown memlet field '" + key.text + "'");
        }
        expect_punct(";");
      }
      nest.memlets.push_back(std::move(m));
    }
  }

  // --- expressions (precedence climbing) ---

  ExprPtr parse_expr() { return parse_or(); }

  ExprPtr parse_or() {
    ExprPtr e = parse_and();
    while (peek_ident("or")) {
      lex_.next();
      e = Expr::binary(BinOp::Or, e, parse_and());
    }
    return e;
  }

  ExprPtr parse_and() {
    ExprPtr e = parse_not();
    while (peek_ident("and")) {
      lex_.next();
      e = Expr::binary(BinOp::And, e, parse_not());
    }
    return e;
  }

  ExprPtr parse_not() {
    if (peek_ident("not")) {
      lex_.next();
      return Expr::unary(UnOp::Not, parse_not());
    }
    return parse_cmp();
  }

  ExprPtr parse_cmp() {
    ExprPtr e = parse_additive();
    const Token& t = lex_.peek();
    if (t.kind == Token::Kind::Punct) {
      std::optional<BinOp> op;
      if (t.text == "<") op = BinOp::Lt;
      else if (t.text == "<=") op = BinOp::Le;
      else if (t.text == ">") op = BinOp::Gt;
      else if (t.text == ">=") op = BinOp::Ge;
      else if (t.text == "==") op = BinOp::Eq;
      else if (t.text == "!=") op = BinOp::Ne;
      if (op) {
        lex_.next();
        return Expr::binary(*op, e, parse_additive());
      }
    }
    return e;
  }

  ExprPtr parse_additive() {
    ExprPtr e = parse_multiplicative();
    while (true) {
      const Token& t = lex_.peek();
      if (t.kind != Token::Kind::Punct || (t.text != "+" && t.text != "-")) break;
      const BinOp op = t.text == "+" ? BinOp::Add : BinOp::Sub;
      lex_.next();
      e = Expr::binary(op, e, parse_multiplicative());
    }
    return e;
  }

  ExprPtr parse_multiplicative() {
    ExprPtr e = parse_unary();
    while (true) {
      const Token& t = lex_.peek();
      if (t.kind != Token::Kind::Punct ||
          (t.text != "*" && t.text != "/" && t.text != "%"))
        break;
      const BinOp op = t.text == "*" ? BinOp::Mul : (t.text == "/" ? BinOp::Div : BinOp::Mod);
      lex_.next();
      e = Expr::binary(op, e, parse_unary());
    }
    return e;
  }

  ExprPtr parse_unary() {
    if (lex_.peek().kind == Token::Kind::Punct && lex_.peek().text == "-") {
      lex_.next();
      ExprPtr inner = parse_unary();
      // Fold negated literals so round-trips are structural.
      if (inner->kind == Expr::Kind::IntLit) return Expr::int_lit(-inner->int_value);
      if (inner->kind == Expr::Kind::FloatLit) return Expr::float_lit(-inner->float_value);
      return Expr::unary(UnOp::Neg, inner);
    }
    return parse_primary();
  }

  ExprPtr parse_primary() {
    const Token t = lex_.next();
    if (t.kind == Token::Kind::Int) return Expr::int_lit(t.int_value);
    if (t.kind == Token::Kind::Float) return Expr::float_lit(t.float_value);
    if (t.kind == Token::Kind::Punct && t.text == "(") {
      ExprPtr e = parse_expr();
      expect_punct(")");
      return e;
    }
    if (t.kind == Token::Kind::Ident) {
      if (t.text == "min" || t.text == "max") {
        if (accept_punct("(")) {
          ExprPtr a = parse_expr();
          expect_punct(",");
          ExprPtr b = parse_expr();
          expect_punct(")");
          return Expr::binary(t.text == "min" ? BinOp::Min : BinOp::Max, a, b);
        }
      }
      if (accept_punct("[")) {
        std::vector<ExprPtr> subs;
        do {
          subs.push_back(parse_expr());
        } while (accept_punct(","));
        expect_punct("]");
        return Expr::array_read(t.text, std::move(subs));
      }
      return Expr::iter(t.text);
    }
    fail(t, "expected expression, got '" + t.text + "'");
  }

  Lexer lex_;
};

// --- serializer --------------------------------------------------------------

void print_stmts(const std::vector<StmtPtr>& stmts, std::ostream& os, int indent);

void print_stmt(const Stmt& st, std::ostream& os, int indent) {
  const std::string pad(static_cast<size_t>(indent) * 2, ' ');
  if (const auto* s = std::get_if<AssignStmt>(&st.node)) {
    os << pad << s->target;
    if (!s->subscripts.empty()) {
      os << '[';
      for (size_t i = 0; i < s->subscripts.size(); ++i) {
        if (i) os << ", ";
        os << to_text(s->subscripts[i]);
      }
      os << ']';
    }
    switch (s->reduce) {
      case ReduceOp::None: os << " = "; break;
      case ReduceOp::Sum: os << " += "; break;
      case ReduceOp::Min: os << " min= "; break;
      case ReduceOp::Max: os << " max= "; break;
    }
    os << to_text(s->value) << ";\n";
  } else if (const auto* l = std::get_if<LocalStmt>(&st.node)) {
    os << pad << "local " << l->name << ": " << to_string(l->type) << " = "
       << to_text(l->init) << ";\n";
  } else if (const auto* i = std::get_if<IfStmt>(&st.node)) {
    os << pad << "if " << to_text(i->cond) << " {\n";
    print_stmts(i->then_body, os, indent + 1);
    os << pad << "}";
    if (!i->else_body.empty()) {
      os << " else {\n";
      print_stmts(i->else_body, os, indent + 1);
      os << pad << "}";
    }
    os << "\n";
  } else if (const auto* f = std::get_if<ForStmt>(&st.node)) {
    os << pad << "for " << f->iter << " = " << to_text(f->init) << "; " << to_text(f->cond)
       << "; " << f->step << " {\n";
    print_stmts(f->body, os, indent + 1);
    os << pad << "}\n";
  }
}

void print_stmts(const std::vector<StmtPtr>& stmts, std::ostream& os, int indent) {
  for (const auto& s : stmts) print_stmt(*s, os, indent);
}

}  // namespace

LoopNest parse_loopnest(const std::string& text) {
  Parser p(text);
  LoopNest nest = p.parse_document();
  analyze_all_memlets(nest);
  const auto violations = validate(nest);
  if (!violations.empty()) {
    std::string msg = "invalid loop nest:";
    for (const auto& v : violations)
      msg += "\n  [" + v.node + "] " + v.message;
    throw SemanticError(msg);
  }
  return nest;
}

std::string serialize(const LoopNest& nest) {
  const auto violations = validate(nest);
  if (!violations.empty()) {
    std::string msg = "refusing to serialize invalid loop nest:";
    for (const auto& v : violations) msg += "\n  [" + v.node + "] " + v.message;
    throw SemanticError(msg);
  }
  std::ostringstream os;
  os << "perfembed-ir v1\n\n";
  os << "arrays {\n";
  for (const auto& a : nest.arrays) {
    os << "  " << a.name << " { elem_type: " << to_string(a.elem_type)
       << "; bytes_per_element: " << a.bytes << "; shape: [";
    for (size_t i = 0; i < a.shape.size(); ++i) {
      if (i) os << ", ";
      if (a.shape[i] == kDynamicDim) os << "dynamic";
      else os << a.shape[i];
    }
    os << "]; strides: [";
    for (size_t i = 0; i < a.strides.size(); ++i) {
      if (i) os << ", ";
      os << a.strides[i];
    }
    os << "]; transient: " << (a.transient ? "true" : "false") << "; alignment: " << a.alignment
       << "; offset: " << a.offset << "; storage: " << to_string(a.storage) << "; }\n";
  }
  os << "}\n\nmaps {\n";
  for (const MapScope* m : nest.map_chain()) {
    os << "  " << m->id << " { ";
    if (!m->parent.empty()) os << "parent: " << m->parent << "; ";
    os << "level: " << m->level << "; params: [";
    for (size_t i = 0; i < m->params.size(); ++i) {
      if (i) os << ", ";
      os << m->params[i];
    }
    os << "]; extents: [";
    for (size_t i = 0; i < m->extents.size(); ++i) {
      if (i) os << ", ";
      const Extent& e = m->extents[i];
      os << to_text(e.begin) << " : " << (e.end ? to_text(e.end) : std::string("dynamic"))
         << " : " << e.step;
    }
    os << "]; schedule { parallel: " << (m->schedule.parallel ? "true" : "false")
       << "; assignment: " << to_string(m->schedule.assignment) << "; ";
    if (m->schedule.assignment == Assignment::Dynamic) os << "chunk: " << m->schedule.chunk << "; ";
    os << "threads: " << m->schedule.threads << "; vector_width: " << m->schedule.vector_width
       << "; } }\n";
  }
  os << "}\n\nbody {\n";
  print_stmts(nest.body, os, 1);
  os << "}\n\nmemlets {\n";
  for (const auto& m : nest.memlets) {
    os << "  " << m.id << " { src: " << m.src.to_text() << "; dst: " << m.dst.to_text()
       << "; array: " << m.array << "; subscripts: [";
    for (size_t i = 0; i < m.subscripts.size(); ++i) {
      if (i) os << ", ";
      os << to_text(m.subscripts[i]);
    }
    os << "]; direction: " << to_string(m.direction) << ";";
    if (m.reduction != ReduceOp::None) os << " reduction: " << to_string(m.reduction) << ";";
    os << " }\n";
  }
  os << "}\n";
  return os.str();
}

ExprPtr parse_expr_text(const std::string& text) {
  Parser p(text);
  return p.parse_standalone_expr();
}

}  // namespace perfembed::ir
