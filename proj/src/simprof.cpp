#include "perfembed/simprof.hpp"

#include <algorithm>
#include <cmath>
#include <list>
#include <optional>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "perfembed/util.hpp"

namespace perfembed::simprof {

using ir::ElemType;
using ir::Expr;
using ir::ExprPtr;

// --- MachineConfig -----------------------------------------------------------

std::string MachineConfig::serialize() const {
  std::ostringstream os;
  os << "perfembed-machine v1\n";
  os << "threads = " << threads << "\n";
  os << "l1_bytes = " << l1_bytes << "\n";
  os << "l2_bytes = " << l2_bytes << "\n";
  os << "l3_bytes = " << l3_bytes << "\n";
  os << "lat_l1 = " << lat_l1 << "\n";
  os << "lat_l2 = " << lat_l2 << "\n";
  os << "lat_l3 = " << lat_l3 << "\n";
  os << "lat_mem = " << lat_mem << "\n";
  os << "op_cost = " << op_cost << "\n";
  os << "mispredict_penalty = " << mispredict_penalty << "\n";
  os << "dispatch_cycles = " << dispatch_cycles << "\n";
  return os.str();
}

MachineConfig MachineConfig::parse(const std::string& text) {
  MachineConfig mc;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("perfembed-machine", 0) == 0) continue;
    std::istringstream ls(line);
    std::string key, eq;
    int64_t value = 0;
    ls >> key >> eq >> value;
    if (!ls || eq != "=") throw IoError("bad machine config line: " + line);
    if (key == "threads") mc.threads = value;
    else if (key == "l1_bytes") mc.l1_bytes = value;
    else if (key == "l2_bytes") mc.l2_bytes = value;
    else if (key == "l3_bytes") mc.l3_bytes = value;
    else if (key == "lat_l1") mc.lat_l1 = value;
    else if (key == "lat_l2") mc.lat_l2 = value;
    else if (key == "lat_l3") mc.lat_l3 = value;
    else if (key == "lat_mem") mc.lat_mem = value;
    else if (key == "op_cost") mc.op_cost = value;
    else if (key == "mispredict_penalty") mc.mispredict_penalty = value;
    else if (key == "dispatch_cycles") mc.dispatch_cycles = value;
    else throw IoError("unknown machine config key: " + key);
  }
  if (mc.l1_bytes > mc.l2_bytes || mc.l2_bytes > mc.l3_bytes)
    throw IoError("machine config: cache sizes must satisfy L1 <= L2 <= L3");
  return mc;
}

uint64_t MachineConfig::fingerprint() const {
  const std::string s = serialize();
  return fnv1a(s.data(), s.size());
}

// --- CounterSet / profile / targets -----------------------------------------

int64_t CounterSet::get(int i) const {
  switch (i) {
    case 0: return instructions;
    case 1: return fp32_scalar;
    case 2: return fp32_p128;
    case 3: return fp32_p256;
    case 4: return fp32_p512;
    case 5: return fp64_scalar;
    case 6: return fp64_p128;
    case 7: return fp64_p256;
    case 8: return fp64_p512;
    case 9: return branches;
    case 10: return branch_mispredicts;
    case 11: return loads;
    case 12: return stores;
    case 13: return mem_read_lines;
    case 14: return mem_write_lines;
    case 15: return l3_lines_in;
    case 16: return l3_writeback_lines;
    case 17: return l1d_replacement;
    case 18: return l1d_evict;
  }
  throw std::out_of_range("counter index");
}

const char* CounterSet::name(int i) {
  static const char* names[kCount] = {
      "instructions",   "fp32_scalar",       "fp32_p128",      "fp32_p256",
      "fp32_p512",      "fp64_scalar",       "fp64_p128",      "fp64_p256",
      "fp64_p512",      "branches",          "branch_mispredicts", "loads",
      "stores",         "mem_read_lines",    "mem_write_lines", "l3_lines_in",
      "l3_writeback_lines", "l1d_replacement", "l1d_evict"};
  return names[i];
}

CounterSet& CounterSet::operator+=(const CounterSet& o) {
  instructions += o.instructions;
  fp32_scalar += o.fp32_scalar;
  fp32_p128 += o.fp32_p128;
  fp32_p256 += o.fp32_p256;
  fp32_p512 += o.fp32_p512;
  fp64_scalar += o.fp64_scalar;
  fp64_p128 += o.fp64_p128;
  fp64_p256 += o.fp64_p256;
  fp64_p512 += o.fp64_p512;
  branches += o.branches;
  branch_mispredicts += o.branch_mispredicts;
  loads += o.loads;
  stores += o.stores;
  mem_read_lines += o.mem_read_lines;
  mem_write_lines += o.mem_write_lines;
  l3_lines_in += o.l3_lines_in;
  l3_writeback_lines += o.l3_writeback_lines;
  l1d_replacement += o.l1d_replacement;
  l1d_evict += o.l1d_evict;
  return *this;
}

CounterSet SimResult::totals() const {
  CounterSet t;
  for (const auto& c : per_thread) t += c;
  return t;
}

std::string DynamicProfile::column_name(int i) {
  static const char* stats[5] = {"min", "max", "mean", "std", "sum"};
  return std::string(CounterSet::name(i / 5)) + "_" + stats[i % 5];
}

const char* TargetMetrics::name(int i) {
  static const char* names[kSize] = {
      "runtime_cycles",     "ipc",
      "mem_read_bw",        "mem_write_bw",
      "l3_load_bw",         "l3_evict_bw",
      "l2_load_bw",         "l2_evict_bw",
      "l1_miss_ratio",      "l2_miss_ratio",
      "l3_miss_ratio",      "branch_rate",
      "mispredict_ratio",   "fp32_scalar_rate",
      "fp32_packed_rate",   "fp64_scalar_rate",
      "fp64_packed_rate",   "load_rate",
      "store_rate",         "arithmetic_intensity"};
  return names[i];
}

// --- LRU cache ----------------------------------------------------------------

namespace {

class LruCache {
 public:
  void reset(size_t capacity_lines) {
    cap_ = capacity_lines;
    order_.clear();
    map_.clear();
  }

  bool touch(uint64_t line) {
    auto it = map_.find(line);
    if (it == map_.end()) return false;
    order_.splice(order_.begin(), order_, it->second.pos);
    return true;
  }

  struct Evicted {
    uint64_t line;
    bool dirty;
  };

  std::optional<Evicted> insert(uint64_t line, bool dirty) {
    std::optional<Evicted> out;
    if (map_.size() >= cap_) {
      const uint64_t victim = order_.back();
      auto vit = map_.find(victim);
      out = Evicted{victim, vit->second.dirty};
      map_.erase(vit);
      order_.pop_back();
    }
    order_.push_front(line);
    map_[line] = Ent{order_.begin(), dirty};
    return out;
  }

  void mark_dirty(uint64_t line) {
    auto it = map_.find(line);
    if (it != map_.end()) it->second.dirty = true;
  }

  bool contains(uint64_t line) const { return map_.count(line) != 0; }

 private:
  size_t cap_ = 0;
  std::list<uint64_t> order_;
  struct Ent {
    std::list<uint64_t>::iterator pos;
    bool dirty;
  };
  std::unordered_map<uint64_t, Ent> map_;
};

// --- runtime value ------------------------------------------------------------

struct Value {
  enum class K : uint8_t { I64, F32, F64 };
  K k = K::I64;
  bool weak = false;  // numeric literal, adapts to the other operand's width
  int64_t i = 0;
  double f = 0.0;

  static Value of_i64(int64_t v, bool weak = false) { return {K::I64, weak, v, 0.0}; }
  static Value of_f32(double v) { return {K::F32, false, 0, static_cast<double>(static_cast<float>(v))}; }
  static Value of_f64(double v, bool weak = false) { return {K::F64, weak, 0, v}; }

  bool is_float() const { return k != K::I64; }
  double as_f() const { return is_float() ? f : static_cast<double>(i); }
  int64_t as_i() const { return is_float() ? static_cast<int64_t>(f) : i; }
  bool truthy() const { return is_float() ? f != 0.0 : i != 0; }
};

Value::K promote(const Value& a, const Value& b) {
  const bool strong64 = (a.k == Value::K::F64 && !a.weak) || (b.k == Value::K::F64 && !b.weak);
  if (strong64) return Value::K::F64;
  if (a.k == Value::K::F32 || b.k == Value::K::F32) return Value::K::F32;
  if (a.k == Value::K::F64 || b.k == Value::K::F64) return Value::K::F64;
  return Value::K::I64;
}

Value from_elem(ElemType t, const ArrayBuffer& buf, size_t idx) {
  switch (t) {
    case ElemType::F32: return Value::of_f32(buf.load_float(idx));
    case ElemType::F64: return Value::of_f64(buf.load_float(idx));
    default: return Value::of_i64(buf.load_int(idx));
  }
}

// --- prepared program ---------------------------------------------------------

struct ArrayRt {
  const ir::DataArray* decl = nullptr;
  ArrayBuffer* buf = nullptr;
  uint64_t base = 0;  // byte address in the simulated address space
  int64_t ebytes = 8;
  std::vector<int64_t> shape;
  std::vector<int64_t> strides;
  int64_t count = 0;
  bool reg = false;
};

enum class VecClass : uint8_t { Broadcast, PackedFwd, PackedRev, Gather };

struct Program {
  const ir::LoopNest* nest = nullptr;
  std::vector<const ir::MapScope*> chain;
  std::vector<ArrayRt> arrays;
  std::unordered_map<std::string, int> array_index;
  std::unordered_map<std::string, int> name_slot;
  int slot_count = 0;
  std::unordered_map<const void*, int> expr_slot;   // Iter node -> env slot
  std::unordered_map<const void*, int> expr_array;  // ArrayRead / AssignStmt -> array
  std::unordered_map<const void*, int> stmt_site;   // IfStmt / ForStmt -> branch site
  std::vector<int> map_site;                        // per chain index
  int root_site = 0;
  int site_count = 0;
  // Vectorized innermost scope.
  int vec_width = 1;
  std::string vec_param;
  std::unordered_map<const void*, VecClass> vec_class;
};

struct MachineState {
  const MachineConfig* cfg = nullptr;
  struct Thread {
    CounterSet c;
    int64_t cycles = 0;
    LruCache l1, l2;
    std::vector<uint8_t> pred;  // last outcome per branch site
  };
  std::vector<Thread> threads;
  LruCache l3;
  std::unordered_set<uint64_t> trace;

  void init(const MachineConfig& mc, int nthreads, int sites) {
    cfg = &mc;
    threads.assign(static_cast<size_t>(nthreads), Thread{});
    for (auto& t : threads) {
      t.l1.reset(static_cast<size_t>(mc.l1_bytes / MachineConfig::kLineBytes));
      t.l2.reset(static_cast<size_t>(mc.l2_bytes / MachineConfig::kLineBytes));
      t.pred.assign(static_cast<size_t>(sites), 1);
    }
    l3.reset(static_cast<size_t>(mc.l3_bytes / MachineConfig::kLineBytes));
    trace.clear();
  }

  void reset_measurement() {
    for (auto& t : threads) {
      t.c = CounterSet{};
      t.cycles = 0;
    }
    trace.clear();
  }
};

[[noreturn]] void sim_fail(const std::string& msg) { throw SimError(msg); }

struct SlotCollector {
  Program& p;

  int add_name(const std::string& name) {
    auto [it, inserted] = p.name_slot.emplace(name, p.slot_count);
    if (!inserted)
      sim_fail("duplicate iterator/local name '" + name + "' (shadowing unsupported)");
    return p.slot_count++;
  }

  void resolve_expr(const ExprPtr& e) {
    if (!e) return;
    if (e->kind == Expr::Kind::Iter) {
      auto it = p.name_slot.find(e->name);
      if (it == p.name_slot.end()) sim_fail("unbound name '" + e->name + "' in expression");
      p.expr_slot[e.get()] = it->second;
    } else if (e->kind == Expr::Kind::ArrayRead) {
      auto it = p.array_index.find(e->name);
      if (it == p.array_index.end()) sim_fail("unknown array '" + e->name + "'");
      p.expr_array[e.get()] = it->second;
    }
    for (const auto& a : e->args) resolve_expr(a);
  }

  void walk(const std::vector<ir::StmtPtr>& stmts) {
    for (const auto& sp : stmts) {
      if (const auto* s = std::get_if<ir::AssignStmt>(&sp->node)) {
        for (const auto& sub : s->subscripts) resolve_expr(sub);
        resolve_expr(s->value);
        if (!s->subscripts.empty()) {
          auto it = p.array_index.find(s->target);
          if (it == p.array_index.end()) sim_fail("unknown array '" + s->target + "'");
          p.expr_array[sp.get()] = it->second;
        }
      } else if (const auto* l = std::get_if<ir::LocalStmt>(&sp->node)) {
        resolve_expr(l->init);
        add_name(l->name);
      } else if (const auto* i = std::get_if<ir::IfStmt>(&sp->node)) {
        resolve_expr(i->cond);
        p.stmt_site[sp.get()] = p.site_count++;
        walk(i->then_body);
        walk(i->else_body);
      } else if (const auto* f = std::get_if<ir::ForStmt>(&sp->node)) {
        resolve_expr(f->init);
        add_name(f->iter);
        resolve_expr(f->cond);
        p.stmt_site[sp.get()] = p.site_count++;
        walk(f->body);
      }
    }
  }

  // Locals from statement targets that are not array writes.
  void resolve_assign_targets(const std::vector<ir::StmtPtr>& stmts) {
    for (const auto& sp : stmts) {
      if (const auto* s = std::get_if<ir::AssignStmt>(&sp->node)) {
        if (s->subscripts.empty() && !p.name_slot.count(s->target))
          sim_fail("assignment to unknown local '" + s->target + "'");
      } else if (const auto* i = std::get_if<ir::IfStmt>(&sp->node)) {
        resolve_assign_targets(i->then_body);
        resolve_assign_targets(i->else_body);
      } else if (const auto* f = std::get_if<ir::ForStmt>(&sp->node)) {
        resolve_assign_targets(f->body);
      }
    }
  }
};

// Vector stride (in elements) of an access w.r.t. the vector parameter.
std::optional<int64_t> vector_stride(const Program& p, const std::vector<ExprPtr>& subs,
                                     const ArrayRt& arr,
                                     const std::vector<std::string>& iters) {
  auto pit = std::find(iters.begin(), iters.end(), p.vec_param);
  if (pit == iters.end()) return 0;
  const size_t pidx = static_cast<size_t>(pit - iters.begin());
  int64_t stride = 0;
  for (size_t d = 0; d < subs.size(); ++d) {
    auto coeffs = ir::affine_coefficients(*subs[d], iters);
    if (!coeffs) return std::nullopt;  // non-affine -> gather
    stride += (*coeffs)[pidx] * arr.strides[d];
  }
  return stride;
}

void classify_vector_accesses(Program& p) {
  const std::vector<std::string> iters = p.nest->nest_iterators();
  auto classify = [&](const std::vector<ExprPtr>& subs, int arr_idx) -> VecClass {
    auto s = vector_stride(p, subs, p.arrays[static_cast<size_t>(arr_idx)], iters);
    if (!s) return VecClass::Gather;
    if (*s == 0) return VecClass::Broadcast;
    if (*s == 1) return VecClass::PackedFwd;
    if (*s == -1) return VecClass::PackedRev;
    return VecClass::Gather;
  };
  // Walk every ArrayRead expression and array-assign statement in the body.
  struct Walker {
    Program& p;
    decltype(classify)& cls;
    void expr(const ExprPtr& e) {
      if (!e) return;
      if (e->kind == Expr::Kind::ArrayRead)
        p.vec_class[e.get()] = cls(e->args, p.expr_array.at(e.get()));
      for (const auto& a : e->args) expr(a);
    }
    void stmts(const std::vector<ir::StmtPtr>& list) {
      for (const auto& sp : list) {
        if (const auto* s = std::get_if<ir::AssignStmt>(&sp->node)) {
          for (const auto& sub : s->subscripts) expr(sub);
          expr(s->value);
          if (!s->subscripts.empty())
            p.vec_class[sp.get()] = cls(s->subscripts, p.expr_array.at(sp.get()));
        } else if (const auto* l = std::get_if<ir::LocalStmt>(&sp->node)) {
          expr(l->init);
        } else if (const auto* i = std::get_if<ir::IfStmt>(&sp->node)) {
          expr(i->cond);
          stmts(i->then_body);
          stmts(i->else_body);
        } else if (const auto* f = std::get_if<ir::ForStmt>(&sp->node)) {
          expr(f->init);
          expr(f->cond);
          stmts(f->body);
        }
      }
    }
  } w{p, classify};
  w.stmts(p.nest->body);
}

Program prepare(const ir::LoopNest& nest, InputBindings& inputs) {
  Program p;
  p.nest = &nest;
  p.chain = nest.map_chain();
  if (p.chain.size() != nest.maps.size())
    sim_fail("loop nest maps do not form a single chain");
  if (p.chain.empty()) sim_fail("loop nest has no maps");

  // Arrays: resolve bindings, assign base addresses.
  uint64_t cursor = 64;
  for (const auto& decl : nest.arrays) {
    auto it = inputs.arrays.find(decl.name);
    if (it == inputs.arrays.end()) sim_fail("no binding for array '" + decl.name + "'");
    ArrayRt rt;
    rt.decl = &decl;
    rt.buf = &it->second;
    rt.ebytes = decl.bytes;
    rt.shape = it->second.shape;
    rt.strides = decl.strides;
    if (rt.shape.size() != decl.shape.size())
      sim_fail("binding rank mismatch for array '" + decl.name + "'");
    for (size_t d = 0; d < rt.shape.size(); ++d)
      if (decl.shape[d] != ir::kDynamicDim && decl.shape[d] != rt.shape[d])
        sim_fail("binding shape mismatch for array '" + decl.name + "'");
    rt.count = static_cast<int64_t>(it->second.elem_count());
    rt.reg = decl.storage == ir::Storage::Register;
    const uint64_t align = static_cast<uint64_t>(std::max<int64_t>(decl.alignment, 1));
    cursor = (cursor + align - 1) / align * align;
    rt.base = cursor;
    cursor += static_cast<uint64_t>((decl.offset + rt.count) * rt.ebytes);
    p.array_index[decl.name] = static_cast<int>(p.arrays.size());
    p.arrays.push_back(rt);
  }

  // Branch sites: one per map scope, then body control flow.
  p.map_site.resize(p.chain.size());
  for (size_t i = 0; i < p.chain.size(); ++i) p.map_site[i] = p.site_count++;
  p.root_site = p.map_site[0];

  SlotCollector sc{p};
  for (const ir::MapScope* m : p.chain)
    for (const auto& prm : m->params) sc.add_name(prm);
  for (const ir::MapScope* m : p.chain)
    for (const auto& e : m->extents) {
      sc.resolve_expr(e.begin);
      sc.resolve_expr(e.end);
    }
  sc.walk(nest.body);
  sc.resolve_assign_targets(nest.body);

  const ir::MapScope* inner = p.chain.back();
  if (inner->schedule.vector_width > 1) {
    if (inner->params.size() != 1)
      sim_fail("vectorized map must be one-dimensional");
    p.vec_width = inner->schedule.vector_width;
    p.vec_param = inner->params[0];
    classify_vector_accesses(p);
  }
  return p;
}

// --- executor -----------------------------------------------------------------

struct VecCtx {
  bool active = false;
  int lane = 0;
  int width = 1;
};

class Executor {
 public:
  Executor(Program& p, MachineState* m, const MachineConfig* cfg)
      : p_(p), m_(m), cfg_(cfg), env_(static_cast<size_t>(p.slot_count)) {}

  void set_thread(int tid) { tid_ = tid; }

  MachineState::Thread* thread() {
    return m_ ? &m_->threads[static_cast<size_t>(tid_)] : nullptr;
  }

  void run_outer_iteration(const std::vector<int64_t>& root_values, int64_t linear_index) {
    outer_index_ = linear_index;
    const ir::MapScope& root = *p_.chain[0];
    for (size_t d = 0; d < root.params.size(); ++d)
      env_[static_cast<size_t>(p_.name_slot.at(root.params[d]))] = Value::of_i64(root_values[d]);
    branch_event(p_.root_site, true);
    run_map(1);
  }

  void root_exit_branch() { branch_event(p_.root_site, false); }

  // --- events ---

  void branch_event(int site, bool taken) {
    auto* t = thread();
    if (!t) return;
    t->c.branches++;
    t->c.instructions++;
    t->cycles += cfg_->op_cost;
    uint8_t& state = t->pred[static_cast<size_t>(site)];
    const uint8_t outcome = taken ? 1 : 0;
    if (state != outcome) {
      t->c.branch_mispredicts++;
      t->cycles += cfg_->mispredict_penalty;
    }
    state = outcome;
  }

  void op_event(Value::K kind, bool is_arith_fp) {
    auto* t = thread();
    if (!t) return;
    if (vec_.active && vec_.lane > 0) return;  // counted once per group
    t->c.instructions++;
    t->cycles += cfg_->op_cost;
    if (!is_arith_fp) return;
    const bool f32 = kind == Value::K::F32;
    if (vec_.active) {
      const int bits = vec_.width * (f32 ? 4 : 8) * 8;
      if (bits == 128) (f32 ? t->c.fp32_p128 : t->c.fp64_p128)++;
      else if (bits == 256) (f32 ? t->c.fp32_p256 : t->c.fp64_p256)++;
      else if (bits == 512) (f32 ? t->c.fp32_p512 : t->c.fp64_p512)++;
      else (f32 ? t->c.fp32_scalar : t->c.fp64_scalar)++;
    } else {
      (f32 ? t->c.fp32_scalar : t->c.fp64_scalar)++;
    }
  }

  void memory_access(uint64_t addr, int64_t bytes, bool write) {
    auto* t = thread();
    if (!t) return;
    t->c.instructions++;
    (write ? t->c.stores : t->c.loads)++;
    t->cycles += cfg_->op_cost;
    const uint64_t first = addr / MachineConfig::kLineBytes;
    const uint64_t last = (addr + static_cast<uint64_t>(bytes) - 1) / MachineConfig::kLineBytes;
    for (uint64_t line = first; line <= last; ++line) cache_access(*t, line, write);
  }

  void cache_access(MachineState::Thread& t, uint64_t line, bool write) {
    m_->trace.insert(line);
    if (t.l1.touch(line)) {
      t.cycles += cfg_->lat_l1;
      if (write) t.l1.mark_dirty(line);
      return;
    }
    if (t.l2.touch(line)) {
      t.cycles += cfg_->lat_l2;
    } else if (m_->l3.touch(line)) {
      t.cycles += cfg_->lat_l3;
      fill_l2(t, line);
    } else {
      t.cycles += cfg_->lat_mem;
      t.c.mem_read_lines++;
      fill_l3(t, line);
      fill_l2(t, line);
    }
    fill_l1(t, line, write);
  }

  void fill_l1(MachineState::Thread& t, uint64_t line, bool write) {
    t.c.l1d_replacement++;
    auto ev = t.l1.insert(line, write);
    if (ev && ev->dirty) {
      t.c.l1d_evict++;
      if (t.l2.contains(ev->line)) t.l2.mark_dirty(ev->line);
      else if (m_->l3.contains(ev->line)) {
        t.c.l3_writeback_lines++;
        m_->l3.mark_dirty(ev->line);
      } else {
        t.c.l3_writeback_lines++;
        t.c.mem_write_lines++;
      }
    }
  }

  void fill_l2(MachineState::Thread& t, uint64_t line) {
    t.c.l3_lines_in++;
    auto ev = t.l2.insert(line, false);
    if (ev && ev->dirty) {
      t.c.l3_writeback_lines++;
      if (m_->l3.contains(ev->line)) m_->l3.mark_dirty(ev->line);
      else t.c.mem_write_lines++;
    }
  }

  void fill_l3(MachineState::Thread& t, uint64_t line) {
    auto ev = m_->l3.insert(line, false);
    if (ev && ev->dirty) t.c.mem_write_lines++;
  }

  // --- expression evaluation ---

  Value eval(const Expr& e) {
    switch (e.kind) {
      case Expr::Kind::IntLit:
        return Value::of_i64(e.int_value, true);
      case Expr::Kind::FloatLit:
        return Value::of_f64(e.float_value, true);
      case Expr::Kind::Iter:
        return env_[static_cast<size_t>(p_.expr_slot.at(&e))];
      case Expr::Kind::ArrayRead:
        return load_site(e);
      case Expr::Kind::Unary: {
        const Value a = eval(*e.args[0]);
        if (e.un == ir::UnOp::Not) {
          op_event(Value::K::I64, false);
          return Value::of_i64(a.truthy() ? 0 : 1);
        }
        if (a.is_float()) {
          op_event(a.k, true);
          return a.k == Value::K::F32 ? Value::of_f32(-a.f) : Value::of_f64(-a.f);
        }
        op_event(Value::K::I64, false);
        return Value::of_i64(-a.i);
      }
      case Expr::Kind::Binary:
        return eval_binary(e);
    }
    sim_fail("unreachable expression kind");
  }

  Value eval_binary(const Expr& e) {
    const Value a = eval(*e.args[0]);
    // Short-circuit logical operators evaluate both sides in this language
    // (no side effects in expressions), so plain evaluation is fine.
    const Value b = eval(*e.args[1]);
    const ir::BinOp op = e.bin;
    if (ir::is_logical(op)) {
      op_event(Value::K::I64, false);
      const bool r = op == ir::BinOp::And ? (a.truthy() && b.truthy())
                                          : (a.truthy() || b.truthy());
      return Value::of_i64(r ? 1 : 0);
    }
    const Value::K k = promote(a, b);
    if (ir::is_comparison(op)) {
      op_event(k, false);
      bool r = false;
      if (k == Value::K::I64) {
        const int64_t x = a.as_i(), y = b.as_i();
        switch (op) {
          case ir::BinOp::Lt: r = x < y; break;
          case ir::BinOp::Le: r = x <= y; break;
          case ir::BinOp::Gt: r = x > y; break;
          case ir::BinOp::Ge: r = x >= y; break;
          case ir::BinOp::Eq: r = x == y; break;
          default: r = x != y; break;
        }
      } else {
        const double x = a.as_f(), y = b.as_f();
        switch (op) {
          case ir::BinOp::Lt: r = x < y; break;
          case ir::BinOp::Le: r = x <= y; break;
          case ir::BinOp::Gt: r = x > y; break;
          case ir::BinOp::Ge: r = x >= y; break;
          case ir::BinOp::Eq: r = x == y; break;
          default: r = x != y; break;
        }
      }
      return Value::of_i64(r ? 1 : 0);
    }
    if (k == Value::K::I64) {
      op_event(k, false);
      const int64_t x = a.as_i(), y = b.as_i();
      switch (op) {
        case ir::BinOp::Add: return Value::of_i64(x + y);
        case ir::BinOp::Sub: return Value::of_i64(x - y);
        case ir::BinOp::Mul: return Value::of_i64(x * y);
        case ir::BinOp::Div:
          if (y == 0) sim_fail("integer division by zero");
          return Value::of_i64(x / y);
        case ir::BinOp::Mod:
          if (y == 0) sim_fail("integer modulo by zero");
          return Value::of_i64(x % y);
        case ir::BinOp::Min: return Value::of_i64(std::min(x, y));
        case ir::BinOp::Max: return Value::of_i64(std::max(x, y));
        default: sim_fail("unsupported integer operator");
      }
    }
    op_event(k, true);
    if (k == Value::K::F32) {
      const float x = static_cast<float>(a.as_f()), y = static_cast<float>(b.as_f());
      switch (op) {
        case ir::BinOp::Add: return Value::of_f32(x + y);
        case ir::BinOp::Sub: return Value::of_f32(x - y);
        case ir::BinOp::Mul: return Value::of_f32(x * y);
        case ir::BinOp::Div: return Value::of_f32(x / y);
        case ir::BinOp::Min: return Value::of_f32(std::min(x, y));
        case ir::BinOp::Max: return Value::of_f32(std::max(x, y));
        default: sim_fail("float modulo unsupported");
      }
    }
    const double x = a.as_f(), y = b.as_f();
    switch (op) {
      case ir::BinOp::Add: return Value::of_f64(x + y);
      case ir::BinOp::Sub: return Value::of_f64(x - y);
      case ir::BinOp::Mul: return Value::of_f64(x * y);
      case ir::BinOp::Div: return Value::of_f64(x / y);
      case ir::BinOp::Min: return Value::of_f64(std::min(x, y));
      case ir::BinOp::Max: return Value::of_f64(std::max(x, y));
      default: sim_fail("float modulo unsupported");
    }
  }

  // Element index of an access; bounds-checked.
  int64_t element_index(const ArrayRt& arr, const std::vector<ExprPtr>& subs,
                        const std::string& name) {
    int64_t lin = 0;
    for (size_t d = 0; d < subs.size(); ++d) {
      const int64_t v = eval(*subs[d]).as_i();
      if (v < 0 || v >= arr.shape[d])
        sim_fail("out-of-bounds access: array '" + name + "' dim " + std::to_string(d) +
                 " index " + std::to_string(v) + " (extent " + std::to_string(arr.shape[d]) +
                 ") at outer iteration " + std::to_string(outer_index_));
      lin += v * arr.strides[d];
    }
    if (lin < 0 || lin >= arr.count)
      sim_fail("out-of-bounds access: array '" + name + "' flat index " + std::to_string(lin) +
               " at outer iteration " + std::to_string(outer_index_));
    return lin;
  }

  Value load_site(const Expr& e) {
    const ArrayRt& arr = p_.arrays[static_cast<size_t>(p_.expr_array.at(&e))];
    const int64_t lin = element_index(arr, e.args, e.name);
    const Value v = from_elem(arr.decl->elem_type, *arr.buf, static_cast<size_t>(lin));
    if (!arr.reg && thread()) count_access(&e, arr, lin, false);
    return v;
  }

  void count_access(const void* site, const ArrayRt& arr, int64_t lin, bool write) {
    const uint64_t addr = arr.base + static_cast<uint64_t>((arr.decl->offset + lin) * arr.ebytes);
    if (!vec_.active) {
      memory_access(addr, arr.ebytes, write);
      return;
    }
    const VecClass cls = p_.vec_class.count(site) ? p_.vec_class.at(site) : VecClass::Gather;
    switch (cls) {
      case VecClass::Gather:
        memory_access(addr, arr.ebytes, write);
        return;
      case VecClass::Broadcast:
        if (vec_.lane == 0) memory_access(addr, arr.ebytes, write);
        return;
      case VecClass::PackedFwd:
        if (vec_.lane == 0)
          memory_access(addr, arr.ebytes * vec_.width, write);
        return;
      case VecClass::PackedRev:
        if (vec_.lane == 0)
          memory_access(addr - static_cast<uint64_t>(arr.ebytes * (vec_.width - 1)),
                        arr.ebytes * vec_.width, write);
        return;
    }
  }

  // --- statements ---

  void exec_stmts(const std::vector<ir::StmtPtr>& stmts) {
    for (const auto& sp : stmts) exec_stmt(*sp, sp.get());
  }

  void exec_stmt(const ir::Stmt& st, const void* key) {
    if (const auto* s = std::get_if<ir::AssignStmt>(&st.node)) {
      exec_assign(*s, key);
    } else if (const auto* l = std::get_if<ir::LocalStmt>(&st.node)) {
      const Value v = eval(*l->init);
      env_[static_cast<size_t>(p_.name_slot.at(l->name))] = convert_to(l->type, v);
    } else if (const auto* i = std::get_if<ir::IfStmt>(&st.node)) {
      const bool taken = eval(*i->cond).truthy();
      if (!(vec_.active && vec_.lane > 0)) branch_event(p_.stmt_site.at(key), taken);
      exec_stmts(taken ? i->then_body : i->else_body);
    } else if (const auto* f = std::get_if<ir::ForStmt>(&st.node)) {
      const int slot = p_.name_slot.at(f->iter);
      env_[static_cast<size_t>(slot)] = Value::of_i64(eval(*f->init).as_i());
      const int site = p_.stmt_site.at(key);
      while (true) {
        const bool cont = eval(*f->cond).truthy();
        if (!(vec_.active && vec_.lane > 0)) branch_event(site, cont);
        if (!cont) break;
        exec_stmts(f->body);
        env_[static_cast<size_t>(slot)].i += f->step;
        op_event(Value::K::I64, false);
      }
    }
  }

  Value convert_to(ElemType t, const Value& v) {
    switch (t) {
      case ElemType::F32: return Value::of_f32(v.as_f());
      case ElemType::F64: return Value::of_f64(v.as_f());
      case ElemType::I32: return Value::of_i64(static_cast<int32_t>(v.as_i()));
      case ElemType::I64: return Value::of_i64(v.as_i());
      case ElemType::Bool: return Value::of_i64(v.truthy() ? 1 : 0);
    }
    return v;
  }

  Value combine(ir::ReduceOp op, ElemType t, const Value& old_v, const Value& v) {
    // Reduction combine in the element type of the target array.
    if (t == ElemType::F32) {
      op_event(Value::K::F32, true);
      const float a = static_cast<float>(old_v.as_f()), b = static_cast<float>(v.as_f());
      switch (op) {
        case ir::ReduceOp::Sum: return Value::of_f32(a + b);
        case ir::ReduceOp::Min: return Value::of_f32(std::min(a, b));
        default: return Value::of_f32(std::max(a, b));
      }
    }
    if (t == ElemType::F64) {
      op_event(Value::K::F64, true);
      const double a = old_v.as_f(), b = v.as_f();
      switch (op) {
        case ir::ReduceOp::Sum: return Value::of_f64(a + b);
        case ir::ReduceOp::Min: return Value::of_f64(std::min(a, b));
        default: return Value::of_f64(std::max(a, b));
      }
    }
    op_event(Value::K::I64, false);
    const int64_t a = old_v.as_i(), b = v.as_i();
    switch (op) {
      case ir::ReduceOp::Sum: return Value::of_i64(a + b);
      case ir::ReduceOp::Min: return Value::of_i64(std::min(a, b));
      default: return Value::of_i64(std::max(a, b));
    }
  }

  void exec_assign(const ir::AssignStmt& s, const void* key) {
    const Value v = eval(*s.value);
    if (s.subscripts.empty()) {
      Value& slot = env_[static_cast<size_t>(p_.name_slot.at(s.target))];
      if (s.reduce == ir::ReduceOp::None) {
        slot = convert_to(slot.k == Value::K::I64 ? ElemType::I64
                          : slot.k == Value::K::F32 ? ElemType::F32
                                                    : ElemType::F64,
                          v);
      } else {
        const ElemType t = slot.k == Value::K::I64   ? ElemType::I64
                           : slot.k == Value::K::F32 ? ElemType::F32
                                                     : ElemType::F64;
        slot = combine(s.reduce, t, slot, v);
      }
      return;
    }
    const ArrayRt& arr = p_.arrays[static_cast<size_t>(p_.expr_array.at(key))];
    const int64_t lin = element_index(arr, s.subscripts, s.target);
    const ElemType t = arr.decl->elem_type;
    Value out = v;
    if (s.reduce != ir::ReduceOp::None) {
      const Value old_v = from_elem(t, *arr.buf, static_cast<size_t>(lin));
      if (!arr.reg && thread()) count_access(key, arr, lin, false);
      out = combine(s.reduce, t, old_v, v);
    }
    if (ir::is_float(t)) arr.buf->store_float(static_cast<size_t>(lin), out.as_f());
    else arr.buf->store_int(static_cast<size_t>(lin), out.as_i());
    if (!arr.reg && thread()) count_access(key, arr, lin, true);
  }

  // --- map scopes ---

  void run_map(size_t chain_idx) {
    if (chain_idx == p_.chain.size()) {
      exec_stmts(p_.nest->body);
      return;
    }
    run_map_dim(chain_idx, 0);
  }

  void run_map_dim(size_t chain_idx, size_t dim) {
    const ir::MapScope& m = *p_.chain[chain_idx];
    if (dim == m.params.size()) {
      run_map(chain_idx + 1);
      return;
    }
    const ir::Extent& ext = m.extents[dim];
    if (!ext.end) sim_fail("unbound dynamic extent on map '" + m.id + "'");
    const int64_t b = eval(*ext.begin).as_i();
    const int64_t e = eval(*ext.end).as_i();
    const int64_t step = ext.step;
    const int site = p_.map_site[chain_idx];
    const size_t slot = static_cast<size_t>(p_.name_slot.at(m.params[dim]));

    const bool vectorize = chain_idx + 1 == p_.chain.size() && dim + 1 == m.params.size() &&
                           p_.vec_width > 1 && step == 1;
    if (vectorize) {
      const int w = p_.vec_width;
      int64_t v = b;
      for (; v + w <= e; v += w) {
        branch_event(site, true);
        for (int lane = 0; lane < w; ++lane) {
          env_[slot] = Value::of_i64(v + lane);
          vec_ = VecCtx{true, lane, w};
          run_map(chain_idx + 1);
        }
        vec_ = VecCtx{};
      }
      for (; v < e; ++v) {
        branch_event(site, true);
        env_[slot] = Value::of_i64(v);
        run_map(chain_idx + 1);
      }
      branch_event(site, false);
      return;
    }
    if (step > 0) {
      for (int64_t v = b; v < e; v += step) {
        branch_event(site, true);
        env_[slot] = Value::of_i64(v);
        run_map_dim(chain_idx, dim + 1);
      }
    } else {
      for (int64_t v = b; v > e; v += step) {
        branch_event(site, true);
        env_[slot] = Value::of_i64(v);
        run_map_dim(chain_idx, dim + 1);
      }
    }
    branch_event(site, false);
  }

 private:
  Program& p_;
  MachineState* m_;
  const MachineConfig* cfg_;
  std::vector<Value> env_;
  int tid_ = 0;
  VecCtx vec_;
  int64_t outer_index_ = 0;
};

// Root iteration space: constant extents evaluated up front.
struct RootSpace {
  std::vector<int64_t> begins, trips, steps;
  int64_t total = 1;

  std::vector<int64_t> values(int64_t linear) const {
    std::vector<int64_t> out(begins.size());
    for (size_t d = begins.size(); d-- > 0;) {
      out[d] = begins[d] + (linear % trips[d]) * steps[d];
      linear /= trips[d];
    }
    return out;
  }
};

RootSpace root_space(const Program& p, Executor& ex) {
  const ir::MapScope& root = *p.chain[0];
  RootSpace rs;
  for (const auto& ext : root.extents) {
    if (!ext.end) sim_fail("unbound dynamic extent on map '" + root.id + "'");
    const int64_t b = ex.eval(*ext.begin).as_i();
    const int64_t e = ex.eval(*ext.end).as_i();
    const int64_t step = ext.step;
    int64_t trips;
    if (step > 0) trips = e > b ? (e - b + step - 1) / step : 0;
    else trips = b > e ? (b - e + (-step) - 1) / (-step) : 0;
    rs.begins.push_back(b);
    rs.trips.push_back(trips);
    rs.steps.push_back(step);
    rs.total *= trips;
  }
  return rs;
}

void run_partitioned(Program& p, MachineState& m, const MachineConfig& cfg,
                     const SimOptions& options) {
  Executor ex(p, &m, &cfg);
  const RootSpace rs = root_space(p, ex);
  int64_t total = rs.total;
  if (options.max_outer_iterations > 0)
    total = std::min<int64_t>(total, options.max_outer_iterations);

  const ir::ScheduleAnnotation& sched = p.chain[0]->schedule;
  int64_t T = sched.parallel ? std::min<int64_t>(sched.threads, cfg.threads) : 1;
  if (options.force_single_thread) T = 1;
  T = std::max<int64_t>(T, 1);
  if (static_cast<int64_t>(m.threads.size()) != T)
    sim_fail("machine state thread count mismatch");

  if (sched.assignment == ir::Assignment::Static || !sched.parallel || T == 1) {
    // Contiguous blocks; shared-L3 traffic interleaves round-robin in
    // thread-id order.
    const int64_t block = (total + T - 1) / T;
    for (int64_t r = 0; r < block; ++r) {
      for (int64_t t = 0; t < T; ++t) {
        const int64_t idx = t * block + r;
        if (idx >= std::min(total, (t + 1) * block)) continue;
        ex.set_thread(static_cast<int>(t));
        ex.run_outer_iteration(rs.values(idx), idx);
      }
    }
    for (int64_t t = 0; t < T; ++t) {
      ex.set_thread(static_cast<int>(t));
      ex.root_exit_branch();
    }
    return;
  }

  // Dynamic schedule: chunks claimed greedily by the least-loaded thread
  // (ties to the lowest id); each claim pays the dispatch overhead.
  const int64_t chunk = std::max<int64_t>(sched.chunk, 1);
  int64_t next = 0;
  while (next < total) {
    int64_t best = 0;
    for (int64_t t = 1; t < T; ++t)
      if (m.threads[static_cast<size_t>(t)].cycles < m.threads[static_cast<size_t>(best)].cycles)
        best = t;
    m.threads[static_cast<size_t>(best)].cycles += cfg.dispatch_cycles;
    ex.set_thread(static_cast<int>(best));
    const int64_t end = std::min(total, next + chunk);
    for (int64_t idx = next; idx < end; ++idx)
      ex.run_outer_iteration(rs.values(idx), idx);
    next = end;
  }
  for (int64_t t = 0; t < T; ++t) {
    ex.set_thread(static_cast<int>(t));
    ex.root_exit_branch();
  }
}

SimResult collect(const MachineState& m) {
  SimResult r;
  for (const auto& t : m.threads) {
    r.per_thread.push_back(t.c);
    r.thread_cycles.push_back(t.cycles);
    r.runtime_cycles = std::max(r.runtime_cycles, t.cycles);
  }
  r.trace.unique_lines = m.trace.size();
  return r;
}

}  // namespace

SimResult simulate(const ir::LoopNest& nest, InputBindings& inputs,
                   const MachineConfig& machine, const SimOptions& options) {
  Program p = prepare(nest, inputs);
  const ir::ScheduleAnnotation& sched = p.chain[0]->schedule;
  int64_t T = sched.parallel ? std::min<int64_t>(sched.threads, machine.threads) : 1;
  if (options.force_single_thread) T = 1;
  T = std::max<int64_t>(T, 1);
  MachineState m;
  m.init(machine, static_cast<int>(T), p.site_count);
  run_partitioned(p, m, machine, options);
  return collect(m);
}

void interpret_reference(const ir::LoopNest& nest, InputBindings& inputs) {
  Program p = prepare(nest, inputs);
  Executor ex(p, nullptr, nullptr);
  const RootSpace rs = root_space(p, ex);
  for (int64_t idx = 0; idx < rs.total; ++idx) ex.run_outer_iteration(rs.values(idx), idx);
}

DynamicProfile aggregate_profile(const SimResult& result) {
  if (result.per_thread.empty()) throw SimError("aggregate_profile: no threads");
  DynamicProfile p;
  const size_t T = result.per_thread.size();
  for (int c = 0; c < CounterSet::kCount; ++c) {
    double mn = 0, mx = 0, sum = 0;
    for (size_t t = 0; t < T; ++t) {
      const double v = static_cast<double>(result.per_thread[t].get(c));
      if (t == 0) mn = mx = v;
      mn = std::min(mn, v);
      mx = std::max(mx, v);
      sum += v;
    }
    const double mean = sum / static_cast<double>(T);
    double var = 0;
    for (size_t t = 0; t < T; ++t) {
      const double d = static_cast<double>(result.per_thread[t].get(c)) - mean;
      var += d * d;
    }
    var /= static_cast<double>(T);  // population variance
    const int base = c * 5;
    p.values[base + 0] = mn;
    p.values[base + 1] = mx;
    p.values[base + 2] = mean;
    p.values[base + 3] = std::sqrt(var);
    p.values[base + 4] = sum;
  }
  return p;
}

TargetMetrics compute_targets(const SimResult& result, const MachineConfig& machine) {
  (void)machine;
  const CounterSet t = result.totals();
  if (t.instructions == 0) throw SimError("empty execution");
  const double rt = static_cast<double>(result.runtime_cycles);
  const double instr = static_cast<double>(t.instructions);
  const double line = static_cast<double>(MachineConfig::kLineBytes);
  auto ratio = [](double num, double den) { return den > 0 ? std::min(num / den, 1.0) : 0.0; };

  const double flops = static_cast<double>(t.fp32_scalar) + 4.0 * t.fp32_p128 +
                       8.0 * t.fp32_p256 + 16.0 * t.fp32_p512 +
                       static_cast<double>(t.fp64_scalar) + 2.0 * t.fp64_p128 +
                       4.0 * t.fp64_p256 + 8.0 * t.fp64_p512;
  const double mem_bytes = line * static_cast<double>(t.mem_read_lines + t.mem_write_lines);

  TargetMetrics out;
  auto set = [&out](Target tg, double v) { out.values[static_cast<int>(tg)] = v; };
  set(Target::RuntimeCycles, rt);
  set(Target::Ipc, rt > 0 ? instr / rt : 0.0);
  set(Target::MemReadBandwidth, rt > 0 ? line * t.mem_read_lines / rt : 0.0);
  set(Target::MemWriteBandwidth, rt > 0 ? line * t.mem_write_lines / rt : 0.0);
  set(Target::L3LoadBandwidth, rt > 0 ? line * t.l3_lines_in / rt : 0.0);
  set(Target::L3EvictBandwidth, rt > 0 ? line * t.l3_writeback_lines / rt : 0.0);
  set(Target::L2LoadBandwidth, rt > 0 ? line * t.l1d_replacement / rt : 0.0);
  set(Target::L2EvictBandwidth, rt > 0 ? line * t.l1d_evict / rt : 0.0);
  set(Target::L1MissRatio, ratio(static_cast<double>(t.l1d_replacement),
                                 static_cast<double>(t.loads + t.stores)));
  set(Target::L2MissRatio, ratio(static_cast<double>(t.l3_lines_in),
                                 static_cast<double>(t.l1d_replacement)));
  set(Target::L3MissRatio, ratio(static_cast<double>(t.mem_read_lines),
                                 static_cast<double>(t.l3_lines_in)));
  set(Target::BranchRate, static_cast<double>(t.branches) / instr);
  set(Target::MispredictRatio, ratio(static_cast<double>(t.branch_mispredicts),
                                     static_cast<double>(t.branches)));
  set(Target::Fp32ScalarRate, static_cast<double>(t.fp32_scalar) / instr);
  set(Target::Fp32PackedRate,
      static_cast<double>(t.fp32_p128 + t.fp32_p256 + t.fp32_p512) / instr);
  set(Target::Fp64ScalarRate, static_cast<double>(t.fp64_scalar) / instr);
  set(Target::Fp64PackedRate,
      static_cast<double>(t.fp64_p128 + t.fp64_p256 + t.fp64_p512) / instr);
  set(Target::LoadRate, static_cast<double>(t.loads) / instr);
  set(Target::StoreRate, static_cast<double>(t.stores) / instr);
  set(Target::ArithmeticIntensity, mem_bytes > 0 ? flops / mem_bytes : 0.0);
  return out;
}

std::pair<DynamicProfile, TargetMetrics> measure(const ir::LoopNest& nest,
                                                 InputBindings& inputs,
                                                 const MachineConfig& machine) {
  // Snapshot the functional state so the warmup pass leaves no trace in the
  // data while the caches stay warm.
  const std::map<std::string, ArrayBuffer> snapshot = inputs.arrays;
  Program p = prepare(nest, inputs);
  const ir::ScheduleAnnotation& sched = p.chain[0]->schedule;
  int64_t T = sched.parallel ? std::min<int64_t>(sched.threads, machine.threads) : 1;
  T = std::max<int64_t>(T, 1);
  MachineState m;
  m.init(machine, static_cast<int>(T), p.site_count);
  run_partitioned(p, m, machine, {});
  inputs.arrays = snapshot;
  // Buffers moved: re-prepare so runtime pointers track the restored map.
  Program p2 = prepare(nest, inputs);
  m.reset_measurement();
  run_partitioned(p2, m, machine, {});
  const SimResult r = collect(m);
  return {aggregate_profile(r), compute_targets(r, machine)};
}

// --- CSV ----------------------------------------------------------------------

std::string profile_csv(const DynamicProfile& p) {
  std::ostringstream os;
  for (int i = 0; i < DynamicProfile::kSize; ++i)
    os << (i ? "," : "") << DynamicProfile::column_name(i);
  os << "\n";
  for (int i = 0; i < DynamicProfile::kSize; ++i)
    os << (i ? "," : "") << format_double(p.values[static_cast<size_t>(i)]);
  os << "\n";
  return os.str();
}

std::string targets_csv(const TargetMetrics& t) {
  std::ostringstream os;
  for (int i = 0; i < TargetMetrics::kSize; ++i) os << (i ? "," : "") << TargetMetrics::name(i);
  os << "\n";
  for (int i = 0; i < TargetMetrics::kSize; ++i)
    os << (i ? "," : "") << format_double(t.values[static_cast<size_t>(i)]);
  os << "\n";
  return os.str();
}

namespace {
std::vector<double> parse_csv_row(const std::string& text, int expected) {
  std::istringstream in(text);
  std::string header, row;
  if (!std::getline(in, header) || !std::getline(in, row)) throw IoError("csv: missing rows");
  std::vector<double> values;
  std::istringstream rs(row);
  std::string cell;
  while (std::getline(rs, cell, ',')) values.push_back(std::stod(cell));
  if (static_cast<int>(values.size()) != expected)
    throw IoError("csv: expected " + std::to_string(expected) + " columns, got " +
                  std::to_string(values.size()));
  return values;
}
}  // namespace

DynamicProfile profile_from_csv(const std::string& text) {
  DynamicProfile p;
  const auto v = parse_csv_row(text, DynamicProfile::kSize);
  std::copy(v.begin(), v.end(), p.values.begin());
  return p;
}

TargetMetrics targets_from_csv(const std::string& text) {
  TargetMetrics t;
  const auto v = parse_csv_row(text, TargetMetrics::kSize);
  std::copy(v.begin(), v.end(), t.values.begin());
  return t;
}

}  // namespace perfembed::simprof
