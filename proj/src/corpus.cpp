#include "perfembed/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "perfembed/ir_text.hpp"
#include "perfembed/util.hpp"

namespace perfembed::corpus {

using ir::BinOp;
using ir::ElemType;
using ir::Expr;
using ir::ExprPtr;

const char* to_string(KernelKind k) {
  switch (k) {
    case KernelKind::Map: return "map";
    case KernelKind::Reduction: return "reduction";
    case KernelKind::Stencil: return "stencil";
    case KernelKind::Matmul: return "matmul";
    case KernelKind::MinplusMatmul: return "minplus_matmul";
    case KernelKind::BooleanMask: return "boolean_mask";
    case KernelKind::CsrSpmm: return "csr_spmm";
    case KernelKind::CsrSpmv: return "csr_spmv";
    case KernelKind::PrimeFilter: return "prime_filter";
    case KernelKind::Blur: return "blur";
    case KernelKind::Histogram: return "histogram";
  }
  return "?";
}

KernelKind kernel_kind_from_string(const std::string& s) {
  for (KernelKind k : all_kinds())
    if (s == to_string(k)) return k;
  throw CorpusError("unknown kernel kind: " + s);
}

std::vector<KernelKind> all_kinds() {
  return {KernelKind::Map,         KernelKind::Reduction,   KernelKind::Stencil,
          KernelKind::Matmul,      KernelKind::MinplusMatmul, KernelKind::BooleanMask,
          KernelKind::CsrSpmm,     KernelKind::CsrSpmv,     KernelKind::PrimeFilter,
          KernelKind::Blur,        KernelKind::Histogram};
}

int64_t KernelSpec::size(const std::string& name) const {
  auto it = sizes.find(name);
  if (it == sizes.end())
    throw CorpusError(std::string("kernel '") + to_string(kind) + "' missing size parameter '" +
                      name + "'");
  if (it->second < 1) throw CorpusError("size parameter '" + name + "' must be positive");
  return it->second;
}

std::string KernelSpec::to_line() const {
  std::ostringstream os;
  os << to_string(kind) << " seed=" << seed << " dtype=" << ir::to_string(dtype);
  for (const auto& [k, v] : sizes) os << " " << k << "=" << v;
  return os.str();
}

KernelSpec KernelSpec::from_line(const std::string& line) {
  std::istringstream in(line);
  std::string kind_s;
  in >> kind_s;
  KernelSpec spec;
  spec.kind = kernel_kind_from_string(kind_s);
  std::string kv;
  while (in >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw CorpusError("bad kernel spec token: " + kv);
    const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    if (key == "seed") spec.seed = std::stoull(value);
    else if (key == "dtype") {
      auto t = ir::elem_type_from_string(value);
      if (!t) throw CorpusError("bad dtype: " + value);
      spec.dtype = *t;
    } else spec.sizes[key] = std::stoll(value);
  }
  return spec;
}

// --- small expression helpers --------------------------------------------------

namespace {

ExprPtr it(const std::string& name) { return Expr::iter(name); }
ExprPtr ci(int64_t v) { return Expr::int_lit(v); }
ExprPtr cf(double v) { return Expr::float_lit(v); }
ExprPtr rd(const std::string& a, std::vector<ExprPtr> subs) {
  return Expr::array_read(a, std::move(subs));
}
ExprPtr add(ExprPtr a, ExprPtr b) { return Expr::binary(BinOp::Add, a, b); }
ExprPtr sub(ExprPtr a, ExprPtr b) { return Expr::binary(BinOp::Sub, a, b); }
ExprPtr mul(ExprPtr a, ExprPtr b) { return Expr::binary(BinOp::Mul, a, b); }
ExprPtr divi(ExprPtr a, ExprPtr b) { return Expr::binary(BinOp::Div, a, b); }
ExprPtr mod(ExprPtr a, ExprPtr b) { return Expr::binary(BinOp::Mod, a, b); }
ExprPtr band(ExprPtr a, ExprPtr b) { return Expr::binary(BinOp::And, a, b); }
ExprPtr cmp(BinOp op, ExprPtr a, ExprPtr b) { return Expr::binary(op, a, b); }

// Builds the canonical chain-of-maps nest with full memlet paths.
class NestBuilder {
 public:
  void array(const std::string& name, ElemType t, std::vector<int64_t> shape,
             bool transient = false) {
    ir::DataArray a;
    a.name = name;
    a.elem_type = t;
    a.bytes = ir::bytes_per_element(t);
    a.shape = shape;
    a.strides.assign(shape.size(), 1);
    for (size_t d = shape.size(); d-- > 1;)
      a.strides[d - 1] = a.strides[d] * shape[d];
    a.transient = transient;
    nest_.arrays.push_back(std::move(a));
  }

  // Appends a map to the chain (parent = previous map).
  void map(const std::string& id, std::vector<std::string> params,
           std::vector<ir::Extent> extents) {
    ir::MapScope m;
    m.id = id;
    m.params = std::move(params);
    m.extents = std::move(extents);
    m.level = static_cast<int>(nest_.maps.size());
    if (!nest_.maps.empty()) m.parent = nest_.maps.back().id;
    nest_.maps.push_back(std::move(m));
  }

  void body(std::vector<ir::StmtPtr> stmts) { nest_.body = std::move(stmts); }

  // Full read path from the access node into the body.
  void read(const std::string& array, std::vector<ExprPtr> subs,
            ir::ReduceOp reduction = ir::ReduceOp::None) {
    path(array, std::move(subs), ir::Direction::Read, static_cast<int>(nest_.maps.size()),
         reduction);
  }

  // Read path terminating at a map entry (dynamic-extent input).
  void read_to_entry(const std::string& array, std::vector<ExprPtr> subs, int map_index) {
    path(array, std::move(subs), ir::Direction::Read, map_index, ir::ReduceOp::None);
  }

  // Full write path from the body out to the access node.
  void write(const std::string& array, std::vector<ExprPtr> subs,
             ir::ReduceOp reduction = ir::ReduceOp::None) {
    path(array, std::move(subs), ir::Direction::Write, static_cast<int>(nest_.maps.size()),
         reduction);
  }

  ir::LoopNest finish(int64_t threads = 4) {
    ir::analyze_all_memlets(nest_);
    ir::LoopNest out = ir::canonical_schedule(nest_, threads);
    const auto violations = ir::validate(out);
    if (!violations.empty())
      throw CorpusError("generated nest invalid: [" + violations.front().node + "] " +
                        violations.front().message);
    return out;
  }

 private:
  void path(const std::string& array, std::vector<ExprPtr> subs, ir::Direction dir,
            int depth, ir::ReduceOp reduction) {
    using ir::NodeRef;
    auto entry = [&](int level) {
      return NodeRef{NodeRef::Kind::MapEntry, nest_.maps[static_cast<size_t>(level)].id};
    };
    auto exit = [&](int level) {
      return NodeRef{NodeRef::Kind::MapExit, nest_.maps[static_cast<size_t>(level)].id};
    };
    const NodeRef arr{NodeRef::Kind::Array, array};
    const NodeRef body{NodeRef::Kind::Body, ""};
    std::vector<std::pair<NodeRef, NodeRef>> hops;
    if (dir == ir::Direction::Read) {
      NodeRef prev = arr;
      for (int l = 0; l < depth; ++l) {
        hops.emplace_back(prev, entry(l));
        prev = entry(l);
      }
      if (depth == static_cast<int>(nest_.maps.size())) hops.emplace_back(prev, body);
    } else {
      NodeRef prev = body;
      for (int l = static_cast<int>(nest_.maps.size()) - 1; l >= 0; --l) {
        hops.emplace_back(prev, exit(l));
        prev = exit(l);
      }
      hops.emplace_back(prev, arr);
    }
    for (const auto& [s, d] : hops) {
      ir::Memlet m;
      m.id = "e" + std::to_string(nest_.memlets.size());
      m.src = s;
      m.dst = d;
      m.array = array;
      m.subscripts = subs;
      m.direction = dir;
      m.reduction = reduction;
      nest_.memlets.push_back(std::move(m));
    }
  }

  ir::LoopNest nest_;
};

ir::Extent extent(int64_t begin, int64_t end, int64_t step = 1) {
  return ir::Extent{ci(begin), ci(end), step};
}

ir::Extent extent(ExprPtr begin, ExprPtr end, int64_t step = 1) {
  return ir::Extent{std::move(begin), std::move(end), step};
}

void fill_uniform(ArrayBuffer& buf, Rng& rng, double lo, double hi) {
  const size_t n = buf.elem_count();
  if (ir::is_float(buf.type)) {
    for (size_t i = 0; i < n; ++i) buf.store_float(i, rng.uniform(lo, hi));
  } else {
    for (size_t i = 0; i < n; ++i)
      buf.store_int(i, rng.uniform_int(static_cast<int64_t>(lo), static_cast<int64_t>(hi)));
  }
}

void fill_const_float(ArrayBuffer& buf, double v) {
  for (size_t i = 0; i < buf.elem_count(); ++i) buf.store_float(i, v);
}

void bind_csr(InputBindings& b, const SparseMatrixCSR& m, ElemType dtype,
              const std::string& prefix = "") {
  ArrayBuffer rp = ArrayBuffer::make(ElemType::I64, {m.rows + 1});
  for (int64_t i = 0; i <= m.rows; ++i) rp.store_int(static_cast<size_t>(i), m.row_ptr[i]);
  ArrayBuffer ci_ = ArrayBuffer::make(ElemType::I64, {std::max<int64_t>(m.nnz(), 1)});
  ArrayBuffer vals = ArrayBuffer::make(dtype, {std::max<int64_t>(m.nnz(), 1)});
  for (int64_t k = 0; k < m.nnz(); ++k) {
    ci_.store_int(static_cast<size_t>(k), m.col_idx[k]);
    vals.store_float(static_cast<size_t>(k), m.values[k]);
  }
  b.arrays.emplace(prefix + "row_ptr", std::move(rp));
  b.arrays.emplace(prefix + "col_idx", std::move(ci_));
  b.arrays.emplace(prefix + "vals", std::move(vals));
}

// --- kernels -----------------------------------------------------------------

std::pair<ir::LoopNest, InputBindings> gen_map(const KernelSpec& spec) {
  const int64_t n = spec.size("n");
  NestBuilder b;
  b.array("A", spec.dtype, {n});
  b.array("B", spec.dtype, {n});
  b.array("OUT", spec.dtype, {n});
  b.map("m0", {"i"}, {extent(0, n)});
  b.body({ir::make_stmt(ir::AssignStmt{
      "OUT",
      {it("i")},
      ir::ReduceOp::None,
      add(mul(rd("A", {it("i")}), cf(2.5)), rd("B", {it("i")}))})});
  b.read("A", {it("i")});
  b.read("B", {it("i")});
  b.write("OUT", {it("i")});
  InputBindings in;
  Rng rng(spec.seed ^ 0x1111);
  in.arrays.emplace("A", ArrayBuffer::make(spec.dtype, {n}));
  in.arrays.emplace("B", ArrayBuffer::make(spec.dtype, {n}));
  in.arrays.emplace("OUT", ArrayBuffer::make(spec.dtype, {n}));
  fill_uniform(in.arrays["A"], rng, -1.0, 1.0);
  fill_uniform(in.arrays["B"], rng, -1.0, 1.0);
  return {b.finish(), std::move(in)};
}

std::pair<ir::LoopNest, InputBindings> gen_reduction(const KernelSpec& spec) {
  const int64_t rows = spec.size("rows"), cols = spec.size("cols");
  NestBuilder b;
  b.array("A", spec.dtype, {rows, cols});
  b.array("R", spec.dtype, {rows});
  b.map("m0", {"i"}, {extent(0, rows)});
  b.map("m1", {"j"}, {extent(0, cols)});
  b.body({ir::make_stmt(
      ir::AssignStmt{"R", {it("i")}, ir::ReduceOp::Sum, rd("A", {it("i"), it("j")})})});
  b.read("A", {it("i"), it("j")});
  b.write("R", {it("i")}, ir::ReduceOp::Sum);
  InputBindings in;
  Rng rng(spec.seed ^ 0x2222);
  in.arrays.emplace("A", ArrayBuffer::make(spec.dtype, {rows, cols}));
  in.arrays.emplace("R", ArrayBuffer::make(spec.dtype, {rows}));
  fill_uniform(in.arrays["A"], rng, -1.0, 1.0);
  return {b.finish(), std::move(in)};
}

std::pair<ir::LoopNest, InputBindings> gen_stencil(const KernelSpec& spec) {
  const int64_t h = spec.size("h"), w = spec.size("w");
  NestBuilder b;
  b.array("IN", spec.dtype, {h, w});
  b.array("OUT", spec.dtype, {h, w});
  b.map("m0", {"i"}, {extent(1, h - 1)});
  b.map("m1", {"j"}, {extent(1, w - 1)});
  auto at = [&](int64_t di, int64_t dj) {
    ExprPtr si = di == 0 ? it("i") : (di > 0 ? add(it("i"), ci(di)) : sub(it("i"), ci(-di)));
    ExprPtr sj = dj == 0 ? it("j") : (dj > 0 ? add(it("j"), ci(dj)) : sub(it("j"), ci(-dj)));
    return rd("IN", {si, sj});
  };
  b.body({ir::make_stmt(ir::AssignStmt{
      "OUT",
      {it("i"), it("j")},
      ir::ReduceOp::None,
      add(mul(cf(0.5), at(0, 0)),
          mul(cf(0.125), add(add(at(-1, 0), at(1, 0)), add(at(0, -1), at(0, 1)))))})});
  b.read("IN", {it("i"), it("j")});
  b.read("IN", {sub(it("i"), ci(1)), it("j")});
  b.read("IN", {add(it("i"), ci(1)), it("j")});
  b.read("IN", {it("i"), sub(it("j"), ci(1))});
  b.read("IN", {it("i"), add(it("j"), ci(1))});
  b.write("OUT", {it("i"), it("j")});
  InputBindings in;
  Rng rng(spec.seed ^ 0x3333);
  in.arrays.emplace("IN", ArrayBuffer::make(spec.dtype, {h, w}));
  in.arrays.emplace("OUT", ArrayBuffer::make(spec.dtype, {h, w}));
  fill_uniform(in.arrays["IN"], rng, -1.0, 1.0);
  return {b.finish(), std::move(in)};
}

std::pair<ir::LoopNest, InputBindings> gen_matmul(const KernelSpec& spec, bool minplus) {
  const int64_t M = spec.size("m"), N = spec.size("n"), K = spec.size("k");
  NestBuilder b;
  b.array("A", spec.dtype, {M, K});
  b.array("B", spec.dtype, {K, N});
  b.array("C", spec.dtype, {M, N});
  b.map("m0", {"i"}, {extent(0, M)});
  b.map("m1", {"j"}, {extent(0, N)});
  b.map("m2", {"k"}, {extent(0, K)});
  const ir::ReduceOp red = minplus ? ir::ReduceOp::Min : ir::ReduceOp::Sum;
  ExprPtr term = minplus ? add(rd("A", {it("i"), it("k")}), rd("B", {it("k"), it("j")}))
                         : mul(rd("A", {it("i"), it("k")}), rd("B", {it("k"), it("j")}));
  b.body({ir::make_stmt(ir::AssignStmt{"C", {it("i"), it("j")}, red, term})});
  b.read("A", {it("i"), it("k")});
  b.read("B", {it("k"), it("j")});
  b.write("C", {it("i"), it("j")}, red);
  InputBindings in;
  Rng rng(spec.seed ^ (minplus ? 0x5555 : 0x4444));
  in.arrays.emplace("A", ArrayBuffer::make(spec.dtype, {M, K}));
  in.arrays.emplace("B", ArrayBuffer::make(spec.dtype, {K, N}));
  in.arrays.emplace("C", ArrayBuffer::make(spec.dtype, {M, N}));
  fill_uniform(in.arrays["A"], rng, -1.0, 1.0);
  fill_uniform(in.arrays["B"], rng, -1.0, 1.0);
  if (minplus) fill_const_float(in.arrays["C"], 1e30);
  return {b.finish(), std::move(in)};
}

std::pair<ir::LoopNest, InputBindings> gen_boolean_mask(const KernelSpec& spec) {
  const int64_t n = spec.size("n");
  NestBuilder b;
  b.array("MASK", ElemType::Bool, {n});
  b.array("A", spec.dtype, {n});
  b.array("OUT", spec.dtype, {n});
  b.map("m0", {"i"}, {extent(0, n)});
  b.body({ir::make_stmt(ir::IfStmt{
      cmp(BinOp::Ne, rd("MASK", {it("i")}), ci(0)),
      {ir::make_stmt(ir::AssignStmt{"OUT",
                                    {it("i")},
                                    ir::ReduceOp::None,
                                    add(mul(rd("A", {it("i")}), cf(2.0)), cf(1.0))})},
      {}})});
  b.read("MASK", {it("i")});
  b.read("A", {it("i")});
  b.write("OUT", {it("i")});
  InputBindings in;
  Rng rng(spec.seed ^ 0x6666);
  in.arrays.emplace("MASK", ArrayBuffer::make(ElemType::Bool, {n}));
  in.arrays.emplace("A", ArrayBuffer::make(spec.dtype, {n}));
  in.arrays.emplace("OUT", ArrayBuffer::make(spec.dtype, {n}));
  const double density = 0.15 + 0.7 * rng.uniform();
  auto& mask = in.arrays["MASK"];
  for (size_t i = 0; i < mask.elem_count(); ++i)
    mask.store_int(i, rng.uniform() < density ? 1 : 0);
  fill_uniform(in.arrays["A"], rng, -1.0, 1.0);
  return {b.finish(), std::move(in)};
}

std::pair<ir::LoopNest, InputBindings> gen_prime_filter(const KernelSpec& spec) {
  const int64_t n = spec.size("n"), vmax = spec.size("vmax");
  NestBuilder b;
  b.array("IN", ElemType::I64, {n});
  b.array("OUT", ElemType::I32, {n});
  b.map("m0", {"i"}, {extent(0, n)});
  std::vector<ir::StmtPtr> loop_body = {ir::make_stmt(ir::IfStmt{
      cmp(BinOp::Eq, mod(it("v"), it("d")), ci(0)),
      {ir::make_stmt(ir::AssignStmt{"composite", {}, ir::ReduceOp::None, ci(1)})},
      {}})};
  b.body({
      ir::make_stmt(ir::LocalStmt{"v", ElemType::I64, rd("IN", {it("i")})}),
      ir::make_stmt(ir::LocalStmt{"composite", ElemType::I64, ci(0)}),
      ir::make_stmt(ir::ForStmt{
          "d", ci(2),
          band(cmp(BinOp::Le, mul(it("d"), it("d")), it("v")),
               cmp(BinOp::Eq, it("composite"), ci(0))),
          1, std::move(loop_body)}),
      ir::make_stmt(ir::AssignStmt{
          "OUT",
          {it("i")},
          ir::ReduceOp::None,
          band(cmp(BinOp::Gt, it("v"), ci(1)), cmp(BinOp::Eq, it("composite"), ci(0)))}),
  });
  b.read("IN", {it("i")});
  b.write("OUT", {it("i")});
  InputBindings in;
  Rng rng(spec.seed ^ 0x7777);
  in.arrays.emplace("IN", ArrayBuffer::make(ElemType::I64, {n}));
  in.arrays.emplace("OUT", ArrayBuffer::make(ElemType::I32, {n}));
  auto& buf = in.arrays["IN"];
  for (size_t i = 0; i < buf.elem_count(); ++i) buf.store_int(i, rng.uniform_int(2, vmax));
  return {b.finish(), std::move(in)};
}

std::pair<ir::LoopNest, InputBindings> gen_blur(const KernelSpec& spec) {
  const int64_t n = spec.size("n");
  NestBuilder b;
  b.array("IN", spec.dtype, {n});
  b.array("OUT", spec.dtype, {n});
  b.map("m0", {"i"}, {extent(1, n - 1)});
  b.body({ir::make_stmt(ir::AssignStmt{
      "OUT",
      {it("i")},
      ir::ReduceOp::None,
      divi(add(add(rd("IN", {sub(it("i"), ci(1))}), rd("IN", {it("i")})),
               rd("IN", {add(it("i"), ci(1))})),
           cf(3.0))})});
  b.read("IN", {sub(it("i"), ci(1))});
  b.read("IN", {it("i")});
  b.read("IN", {add(it("i"), ci(1))});
  b.write("OUT", {it("i")});
  InputBindings in;
  Rng rng(spec.seed ^ 0x8888);
  in.arrays.emplace("IN", ArrayBuffer::make(spec.dtype, {n}));
  in.arrays.emplace("OUT", ArrayBuffer::make(spec.dtype, {n}));
  fill_uniform(in.arrays["IN"], rng, -1.0, 1.0);
  return {b.finish(), std::move(in)};
}

std::pair<ir::LoopNest, InputBindings> gen_histogram(const KernelSpec& spec) {
  const int64_t n = spec.size("n"), bins = spec.size("bins");
  NestBuilder b;
  b.array("IN", ElemType::I64, {n});
  b.array("HIST", ElemType::I64, {bins});
  b.map("m0", {"i"}, {extent(0, n)});
  b.body({ir::make_stmt(ir::AssignStmt{
      "HIST", {mod(rd("IN", {it("i")}), ci(bins))}, ir::ReduceOp::Sum, ci(1)})});
  b.read("IN", {it("i")});
  b.write("HIST", {mod(rd("IN", {it("i")}), ci(bins))}, ir::ReduceOp::Sum);
  InputBindings in;
  Rng rng(spec.seed ^ 0x9999);
  in.arrays.emplace("IN", ArrayBuffer::make(ElemType::I64, {n}));
  in.arrays.emplace("HIST", ArrayBuffer::make(ElemType::I64, {bins}));
  auto& buf = in.arrays["IN"];
  // Skewed bin distribution: squared uniform concentrates mass at low bins.
  for (size_t i = 0; i < buf.elem_count(); ++i) {
    const double u = rng.uniform();
    buf.store_int(i, static_cast<int64_t>(u * u * static_cast<double>(4 * bins)));
  }
  return {b.finish(), std::move(in)};
}

ir::LoopNest build_spmv_nest(int64_t rows, int64_t cols, int64_t nnz, ElemType dtype) {
  NestBuilder b;
  b.array("row_ptr", ElemType::I64, {rows + 1});
  b.array("col_idx", ElemType::I64, {std::max<int64_t>(nnz, 1)});
  b.array("vals", dtype, {std::max<int64_t>(nnz, 1)});
  b.array("x", dtype, {cols});
  b.array("y", dtype, {rows});
  b.map("m0", {"i"}, {extent(0, rows)});
  b.map("m1", {"k"}, {extent(rd("row_ptr", {it("i")}), rd("row_ptr", {add(it("i"), ci(1))}))});
  b.body({ir::make_stmt(ir::AssignStmt{
      "y",
      {it("i")},
      ir::ReduceOp::Sum,
      mul(rd("vals", {it("k")}), rd("x", {rd("col_idx", {it("k")})}))})});
  b.read_to_entry("row_ptr", {it("i")}, 1);
  b.read_to_entry("row_ptr", {add(it("i"), ci(1))}, 1);
  b.read("vals", {it("k")});
  b.read("col_idx", {it("k")});
  b.read("x", {rd("col_idx", {it("k")})});
  b.write("y", {it("i")}, ir::ReduceOp::Sum);
  return b.finish();
}

ir::LoopNest build_spmm_nest(int64_t rows, int64_t kdim, int64_t nnz, int64_t cols,
                             ElemType dtype) {
  NestBuilder b;
  b.array("row_ptr", ElemType::I64, {rows + 1});
  b.array("col_idx", ElemType::I64, {std::max<int64_t>(nnz, 1)});
  b.array("vals", dtype, {std::max<int64_t>(nnz, 1)});
  b.array("B", dtype, {kdim, cols});
  b.array("C", dtype, {rows, cols});
  b.map("m0", {"i"}, {extent(0, rows)});
  b.map("m1", {"k"}, {extent(rd("row_ptr", {it("i")}), rd("row_ptr", {add(it("i"), ci(1))}))});
  b.map("m2", {"j"}, {extent(0, cols)});
  b.body({ir::make_stmt(ir::AssignStmt{
      "C",
      {it("i"), it("j")},
      ir::ReduceOp::Sum,
      mul(rd("vals", {it("k")}), rd("B", {rd("col_idx", {it("k")}), it("j")}))})});
  b.read_to_entry("row_ptr", {it("i")}, 1);
  b.read_to_entry("row_ptr", {add(it("i"), ci(1))}, 1);
  b.read("vals", {it("k")});
  b.read("col_idx", {it("k")});
  b.read("B", {rd("col_idx", {it("k")}), it("j")});
  b.write("C", {it("i"), it("j")}, ir::ReduceOp::Sum);
  return b.finish();
}

}  // namespace

SparseMatrixCSR synth_csr(int64_t rows, int64_t cols, int64_t nnz_per_row, bool power_law,
                          double exponent, uint64_t seed) {
  if (rows < 1 || cols < 1 || nnz_per_row < 1) throw CorpusError("synth_csr: bad dimensions");
  Rng rng(seed);
  std::vector<int64_t> lens(static_cast<size_t>(rows));
  if (!power_law) {
    std::fill(lens.begin(), lens.end(), std::min(nnz_per_row, cols));
  } else {
    // Pareto-tailed lengths rescaled to the requested average.
    std::vector<double> raw(static_cast<size_t>(rows));
    double total = 0;
    for (auto& v : raw) {
      double u = rng.uniform();
      while (u <= 1e-12) u = rng.uniform();
      v = std::pow(u, -1.0 / std::max(exponent - 1.0, 0.05));
      total += v;
    }
    const double scale = static_cast<double>(rows * nnz_per_row) / total;
    for (size_t i = 0; i < raw.size(); ++i)
      lens[i] = std::min<int64_t>(cols, std::max<int64_t>(0, static_cast<int64_t>(raw[i] * scale)));
  }
  SparseMatrixCSR m;
  m.rows = rows;
  m.cols = cols;
  m.row_ptr.assign(static_cast<size_t>(rows) + 1, 0);
  for (int64_t i = 0; i < rows; ++i) {
    std::set<int64_t> cset;
    while (static_cast<int64_t>(cset.size()) < lens[static_cast<size_t>(i)])
      cset.insert(rng.uniform_int(0, cols - 1));
    for (int64_t c : cset) {
      m.col_idx.push_back(c);
      m.values.push_back(rng.uniform(-1.0, 1.0));
    }
    m.row_ptr[static_cast<size_t>(i) + 1] = static_cast<int64_t>(m.col_idx.size());
  }
  return m;
}

std::pair<ir::LoopNest, InputBindings> spmv_from_csr(const SparseMatrixCSR& m, ElemType dtype,
                                                     uint64_t seed) {
  ir::LoopNest nest = build_spmv_nest(m.rows, m.cols, m.nnz(), dtype);
  InputBindings in;
  Rng rng(seed ^ 0xaaaa);
  bind_csr(in, m, dtype);
  in.arrays.emplace("x", ArrayBuffer::make(dtype, {m.cols}));
  in.arrays.emplace("y", ArrayBuffer::make(dtype, {m.rows}));
  fill_uniform(in.arrays["x"], rng, -1.0, 1.0);
  return {std::move(nest), std::move(in)};
}

std::pair<ir::LoopNest, InputBindings> spmm_from_csr(const SparseMatrixCSR& m,
                                                     int64_t dense_cols, ElemType dtype,
                                                     uint64_t seed) {
  ir::LoopNest nest = build_spmm_nest(m.rows, m.cols, m.nnz(), dense_cols, dtype);
  InputBindings in;
  Rng rng(seed ^ 0xbbbb);
  bind_csr(in, m, dtype);
  in.arrays.emplace("B", ArrayBuffer::make(dtype, {m.cols, dense_cols}));
  in.arrays.emplace("C", ArrayBuffer::make(dtype, {m.rows, dense_cols}));
  fill_uniform(in.arrays["B"], rng, -1.0, 1.0);
  return {std::move(nest), std::move(in)};
}

std::pair<ir::LoopNest, InputBindings> generate_kernel(const KernelSpec& spec) {
  switch (spec.kind) {
    case KernelKind::Map: return gen_map(spec);
    case KernelKind::Reduction: return gen_reduction(spec);
    case KernelKind::Stencil: return gen_stencil(spec);
    case KernelKind::Matmul: return gen_matmul(spec, false);
    case KernelKind::MinplusMatmul: return gen_matmul(spec, true);
    case KernelKind::BooleanMask: return gen_boolean_mask(spec);
    case KernelKind::PrimeFilter: return gen_prime_filter(spec);
    case KernelKind::Blur: return gen_blur(spec);
    case KernelKind::Histogram: return gen_histogram(spec);
    case KernelKind::CsrSpmv: {
      const int64_t rows = spec.size("rows"), cols = spec.size("cols");
      const int64_t nnz_row = spec.size("nnz_row");
      const bool power_law = spec.sizes.count("power_law") && spec.sizes.at("power_law") != 0;
      const SparseMatrixCSR m = synth_csr(rows, cols, nnz_row, power_law, 1.6, spec.seed ^ 0xcc);
      return spmv_from_csr(m, spec.dtype, spec.seed);
    }
    case KernelKind::CsrSpmm: {
      const int64_t rows = spec.size("rows"), kdim = spec.size("kdim");
      const int64_t nnz_row = spec.size("nnz_row"), cols = spec.size("cols");
      const bool power_law = spec.sizes.count("power_law") && spec.sizes.at("power_law") != 0;
      const SparseMatrixCSR m = synth_csr(rows, kdim, nnz_row, power_law, 1.6, spec.seed ^ 0xdd);
      return spmm_from_csr(m, cols, spec.dtype, spec.seed);
    }
  }
  throw CorpusError("unsupported kernel kind");
}

// --- Matrix Market -------------------------------------------------------------

SparseMatrixCSR parse_matrix_market(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw CorpusError("matrix market: empty file");
  std::istringstream hs(line);
  std::string banner, object, format, field, symmetry;
  hs >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%MatrixMarket") throw CorpusError("matrix market: malformed banner");
  if (object != "matrix") throw CorpusError("unsupported object: " + object);
  if (format != "coordinate") throw CorpusError("unsupported format: " + format);
  if (field != "real" && field != "integer" && field != "pattern")
    throw CorpusError("unsupported field: " + field);
  if (symmetry != "general" && symmetry != "symmetric")
    throw CorpusError("unsupported symmetry: " + symmetry);
  const bool pattern = field == "pattern";
  const bool symmetric = symmetry == "symmetric";

  // Skip comments, read dimensions.
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '%') break;
  }
  std::istringstream ds(line);
  int64_t rows = 0, cols = 0, nnz = 0;
  ds >> rows >> cols >> nnz;
  if (!ds || rows < 1 || cols < 1 || nnz < 0)
    throw CorpusError("matrix market: malformed size line");

  std::vector<std::tuple<int64_t, int64_t, double>> entries;
  entries.reserve(static_cast<size_t>(nnz) * (symmetric ? 2 : 1));
  int64_t read_count = 0;
  while (read_count < nnz && std::getline(in, line)) {
    if (line.empty() || line[0] == '%') continue;
    std::istringstream es(line);
    int64_t r = 0, c = 0;
    double v = 1.0;
    es >> r >> c;
    if (!es) throw CorpusError("matrix market: malformed entry: " + line);
    if (!pattern) {
      es >> v;
      if (!es) throw CorpusError("matrix market: missing value: " + line);
    }
    if (r < 1 || r > rows || c < 1 || c > cols)
      throw CorpusError("matrix market: index out of bounds: " + line);
    entries.emplace_back(r - 1, c - 1, v);
    if (symmetric && r != c) entries.emplace_back(c - 1, r - 1, v);
    ++read_count;
  }
  if (read_count != nnz) throw CorpusError("matrix market: fewer entries than declared");

  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) {
              return std::tie(std::get<0>(a), std::get<1>(a)) <
                     std::tie(std::get<0>(b), std::get<1>(b));
            });
  SparseMatrixCSR m;
  m.rows = rows;
  m.cols = cols;
  m.row_ptr.assign(static_cast<size_t>(rows) + 1, 0);
  // Sorted entries: duplicates are adjacent and get summed.
  int64_t prev_r = -1, prev_c = -1;
  for (const auto& [r, c, v] : entries) {
    if (r == prev_r && c == prev_c) {
      m.values.back() += v;
      continue;
    }
    m.col_idx.push_back(c);
    m.values.push_back(v);
    m.row_ptr[static_cast<size_t>(r) + 1]++;
    prev_r = r;
    prev_c = c;
  }
  for (int64_t r = 0; r < rows; ++r)
    m.row_ptr[static_cast<size_t>(r) + 1] += m.row_ptr[static_cast<size_t>(r)];
  return m;
}

SparseMatrixCSR load_matrix_market(const std::filesystem::path& path) {
  return parse_matrix_market(read_text_file(path));
}

// --- dataset -------------------------------------------------------------------

KernelSpec preset_spec(KernelKind kind, int preset, uint64_t seed) {
  if (preset < 0 || preset > 3) throw CorpusError("preset out of range");
  KernelSpec s;
  s.kind = kind;
  s.seed = seed;
  const int p = preset;
  switch (kind) {
    case KernelKind::Map: {
      static const int64_t n[4] = {4096, 8192, 12288, 16384};
      s.sizes = {{"n", n[p]}};
      break;
    }
    case KernelKind::Reduction: {
      static const int64_t r[4] = {64, 96, 128, 192}, c[4] = {64, 96, 64, 128};
      s.sizes = {{"rows", r[p]}, {"cols", c[p]}};
      break;
    }
    case KernelKind::Stencil: {
      static const int64_t h[4] = {48, 64, 96, 128}, w[4] = {48, 64, 64, 96};
      s.sizes = {{"h", h[p]}, {"w", w[p]}};
      break;
    }
    case KernelKind::Matmul:
    case KernelKind::MinplusMatmul: {
      static const int64_t d[4] = {12, 16, 20, 24};
      s.sizes = {{"m", d[p]}, {"n", d[p]}, {"k", d[p]}};
      break;
    }
    case KernelKind::BooleanMask: {
      static const int64_t n[4] = {4096, 8192, 12288, 16384};
      s.sizes = {{"n", n[p]}};
      break;
    }
    case KernelKind::CsrSpmm: {
      static const int64_t r[4] = {96, 128, 160, 192};
      static const int64_t k[4] = {96, 128, 128, 160};
      static const int64_t nz[4] = {6, 8, 6, 8};
      static const int64_t c[4] = {12, 16, 20, 24};
      s.sizes = {{"rows", r[p]}, {"kdim", k[p]}, {"nnz_row", nz[p]}, {"cols", c[p]}};
      break;
    }
    case KernelKind::CsrSpmv: {
      static const int64_t r[4] = {512, 768, 1024, 1536};
      static const int64_t nz[4] = {8, 12, 8, 6};
      s.sizes = {{"rows", r[p]}, {"cols", r[p]}, {"nnz_row", nz[p]}};
      break;
    }
    case KernelKind::PrimeFilter: {
      static const int64_t n[4] = {1024, 1536, 2048, 4096};
      static const int64_t v[4] = {300, 400, 500, 250};
      s.sizes = {{"n", n[p]}, {"vmax", v[p]}};
      break;
    }
    case KernelKind::Blur: {
      static const int64_t n[4] = {4096, 8192, 12288, 16384};
      s.sizes = {{"n", n[p]}};
      break;
    }
    case KernelKind::Histogram: {
      static const int64_t n[4] = {8192, 12288, 16384, 24576};
      static const int64_t b_[4] = {64, 128, 256, 512};
      s.sizes = {{"n", n[p]}, {"bins", b_[p]}};
      break;
    }
  }
  return s;
}

std::string CorpusManifest::serialize() const {
  std::ostringstream os;
  os << "perfembed-corpus v1 seed " << seed << "\n";
  os << "ranges " << ranges_note << "\n";
  for (const auto& e : entries)
    os << "entry " << e.id << " | " << e.split << " | " << e.nest_path << " | "
       << e.bindings_stem << " | " << e.spec.to_line() << "\n";
  return os.str();
}

CorpusManifest CorpusManifest::parse(const std::string& text) {
  CorpusManifest m;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("perfembed-corpus v1 seed ", 0) != 0)
    throw CorpusError("bad corpus manifest header");
  m.seed = std::stoull(line.substr(std::string("perfembed-corpus v1 seed ").size()));
  while (std::getline(in, line)) {
    if (line.rfind("ranges ", 0) == 0) {
      m.ranges_note = line.substr(7);
      continue;
    }
    if (line.rfind("entry ", 0) != 0) continue;
    std::string rest = line.substr(6);
    std::vector<std::string> parts;
    size_t pos = 0;
    while (true) {
      const size_t bar = rest.find(" | ", pos);
      if (bar == std::string::npos) {
        parts.push_back(rest.substr(pos));
        break;
      }
      parts.push_back(rest.substr(pos, bar - pos));
      pos = bar + 3;
    }
    if (parts.size() != 5) throw CorpusError("bad manifest entry: " + line);
    ManifestEntry e;
    e.id = parts[0];
    e.split = parts[1];
    e.nest_path = parts[2];
    e.bindings_stem = parts[3];
    e.spec = KernelSpec::from_line(parts[4]);
    m.entries.push_back(std::move(e));
  }
  return m;
}

std::vector<const ManifestEntry*> CorpusManifest::split(const std::string& name) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries)
    if (e.split == name) out.push_back(&e);
  return out;
}

CorpusManifest generate_dataset(const DatasetCounts& counts, const SizeRanges& ranges,
                                uint64_t seed, const std::filesystem::path& outdir) {
  namespace fs = std::filesystem;
  if (counts.train < 1 || counts.val < 1 || counts.test < 1)
    throw CorpusError("dataset counts must be >= 1");
  if (ranges.min_preset < 0 || ranges.max_preset > 3 || ranges.min_preset > ranges.max_preset)
    throw CorpusError("bad preset range");
  fs::create_directories(outdir / "nests");
  fs::create_directories(outdir / "bindings");

  CorpusManifest manifest;
  manifest.seed = seed;
  manifest.ranges_note = "presets " + std::to_string(ranges.min_preset) + ".." +
                         std::to_string(ranges.max_preset) +
                         " per kind; kinds round-robin; dtype f32/f64 by seed";
  Rng rng(seed);
  const auto kinds = all_kinds();
  const int total = counts.train + counts.val + counts.test;
  for (int i = 0; i < total; ++i) {
    const KernelKind kind = kinds[static_cast<size_t>(i) % kinds.size()];
    const int preset = static_cast<int>(
        rng.uniform_int(ranges.min_preset, ranges.max_preset));
    const uint64_t kseed = rng.next_u64();
    KernelSpec spec = preset_spec(kind, preset, kseed);
    // Integer kernels keep their fixed types; fp kernels alternate f32/f64.
    if (kind != KernelKind::PrimeFilter && kind != KernelKind::Histogram)
      spec.dtype = (rng.next_u64() & 1) ? ir::ElemType::F32 : ir::ElemType::F64;
    // Sparse kernels alternate uniform / power-law rows.
    if (kind == KernelKind::CsrSpmv || kind == KernelKind::CsrSpmm)
      spec.sizes["power_law"] = (rng.next_u64() & 1) ? 1 : 0;

    const std::string split = i < counts.train ? "train"
                              : i < counts.train + counts.val ? "val"
                                                              : "test";
    char idbuf[32];
    snprintf(idbuf, sizeof(idbuf), "nest%04d", i);
    ManifestEntry e;
    e.id = idbuf;
    e.split = split;
    e.spec = spec;
    e.nest_path = "nests/" + e.id + ".pir";
    e.bindings_stem = "bindings/" + e.id;

    auto [nest, inputs] = generate_kernel(spec);
    write_text_file(outdir / e.nest_path, ir::serialize(nest));
    inputs.save(outdir / e.bindings_stem);
    manifest.entries.push_back(std::move(e));
  }
  write_text_file(outdir / "manifest.txt", manifest.serialize());
  return manifest;
}

}  // namespace perfembed::corpus
