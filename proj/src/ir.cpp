#include "perfembed/ir.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace perfembed::ir {

int64_t DataArray::total_elements() const {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d == kDynamicDim) return 0;
    n *= d;
  }
  return n;
}

bool structurally_equal(const Extent& a, const Extent& b) {
  return a.step == b.step && structurally_equal(a.begin, b.begin) &&
         structurally_equal(a.end, b.end);
}

bool structurally_equal(const MapScope& a, const MapScope& b) {
  if (a.id != b.id || a.params != b.params || a.level != b.level || a.parent != b.parent ||
      !(a.schedule == b.schedule) || a.extents.size() != b.extents.size())
    return false;
  for (size_t i = 0; i < a.extents.size(); ++i)
    if (!structurally_equal(a.extents[i], b.extents[i])) return false;
  return true;
}

StmtPtr make_stmt(AssignStmt s) { return std::make_shared<Stmt>(Stmt{std::move(s)}); }
StmtPtr make_stmt(LocalStmt s) { return std::make_shared<Stmt>(Stmt{std::move(s)}); }
StmtPtr make_stmt(IfStmt s) { return std::make_shared<Stmt>(Stmt{std::move(s)}); }
StmtPtr make_stmt(ForStmt s) { return std::make_shared<Stmt>(Stmt{std::move(s)}); }

namespace {

bool stmts_equal(const std::vector<StmtPtr>& a, const std::vector<StmtPtr>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (!structurally_equal(a[i], b[i])) return false;
  return true;
}

bool subscripts_equal(const std::vector<ExprPtr>& a, const std::vector<ExprPtr>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (!structurally_equal(a[i], b[i])) return false;
  return true;
}

}  // namespace

bool structurally_equal(const StmtPtr& a, const StmtPtr& b) {
  if (!a || !b) return !a && !b;
  if (a->node.index() != b->node.index()) return false;
  if (const auto* x = std::get_if<AssignStmt>(&a->node)) {
    const auto& y = std::get<AssignStmt>(b->node);
    return x->target == y.target && x->reduce == y.reduce &&
           subscripts_equal(x->subscripts, y.subscripts) &&
           structurally_equal(x->value, y.value);
  }
  if (const auto* x = std::get_if<LocalStmt>(&a->node)) {
    const auto& y = std::get<LocalStmt>(b->node);
    return x->name == y.name && x->type == y.type && structurally_equal(x->init, y.init);
  }
  if (const auto* x = std::get_if<IfStmt>(&a->node)) {
    const auto& y = std::get<IfStmt>(b->node);
    return structurally_equal(x->cond, y.cond) && stmts_equal(x->then_body, y.then_body) &&
           stmts_equal(x->else_body, y.else_body);
  }
  const auto& x = std::get<ForStmt>(a->node);
  const auto& y = std::get<ForStmt>(b->node);
  return x.iter == y.iter && x.step == y.step && structurally_equal(x.init, y.init) &&
         structurally_equal(x.cond, y.cond) && stmts_equal(x.body, y.body);
}

std::optional<NodeRef> NodeRef::parse(const std::string& text) {
  if (text == "body") return NodeRef{Kind::Body, ""};
  auto dot = text.rfind('.');
  if (dot != std::string::npos) {
    const std::string base = text.substr(0, dot);
    const std::string part = text.substr(dot + 1);
    if (base.empty()) return std::nullopt;
    if (part == "entry") return NodeRef{Kind::MapEntry, base};
    if (part == "exit") return NodeRef{Kind::MapExit, base};
    return std::nullopt;
  }
  if (text.empty()) return std::nullopt;
  return NodeRef{Kind::Array, text};
}

std::string NodeRef::to_text() const {
  switch (kind) {
    case Kind::Array: return name;
    case Kind::MapEntry: return name + ".entry";
    case Kind::MapExit: return name + ".exit";
    case Kind::Body: return "body";
  }
  return "?";
}

bool structurally_equal(const Memlet& a, const Memlet& b) {
  return a.id == b.id && a.src == b.src && a.dst == b.dst && a.array == b.array &&
         a.direction == b.direction && a.is_affine == b.is_affine &&
         a.is_dynamic == b.is_dynamic && a.reduction == b.reduction &&
         subscripts_equal(a.subscripts, b.subscripts);
}

const DataArray* LoopNest::find_array(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return &a;
  return nullptr;
}

const MapScope* LoopNest::find_map(const std::string& id) const {
  for (const auto& m : maps)
    if (m.id == id) return &m;
  return nullptr;
}

const MapScope& LoopNest::root_map() const {
  for (const auto& m : maps)
    if (m.parent.empty()) return m;
  throw std::logic_error("loop nest has no root map");
}

std::vector<const MapScope*> LoopNest::map_chain() const {
  std::vector<const MapScope*> chain;
  const MapScope* cur = nullptr;
  for (const auto& m : maps)
    if (m.parent.empty()) cur = &m;
  while (cur) {
    chain.push_back(cur);
    const MapScope* child = nullptr;
    for (const auto& m : maps)
      if (m.parent == cur->id) child = &m;
    cur = child;
  }
  return chain;
}

std::vector<std::string> LoopNest::nest_iterators() const {
  std::vector<std::string> its;
  for (const MapScope* m : map_chain())
    for (const auto& p : m->params) its.push_back(p);
  return its;
}

bool structurally_equal(const LoopNest& a, const LoopNest& b) {
  if (a.arrays != b.arrays) return false;
  if (a.maps.size() != b.maps.size() || a.memlets.size() != b.memlets.size()) return false;
  for (size_t i = 0; i < a.maps.size(); ++i)
    if (!structurally_equal(a.maps[i], b.maps[i])) return false;
  for (size_t i = 0; i < a.memlets.size(); ++i)
    if (!structurally_equal(a.memlets[i], b.memlets[i])) return false;
  return stmts_equal(a.body, b.body);
}

namespace {

// Scope depth of a memlet endpoint: the number of map scopes the edge sits
// inside at that end. Array nodes live outside all scopes; the body inside
// all of them.
int endpoint_depth(const LoopNest& nest, const NodeRef& ref, bool as_src) {
  switch (ref.kind) {
    case NodeRef::Kind::Array:
      return 0;
    case NodeRef::Kind::Body:
      return static_cast<int>(nest.maps.size()) + 1;
    case NodeRef::Kind::MapEntry: {
      const MapScope* m = nest.find_map(ref.name);
      const int level = m ? m->level : 0;
      return as_src ? level + 1 : level;  // inside after the entry
    }
    case NodeRef::Kind::MapExit: {
      const MapScope* m = nest.find_map(ref.name);
      const int level = m ? m->level : 0;
      return as_src ? level : level + 1;  // outside after the exit
    }
  }
  return 0;
}

}  // namespace

std::vector<std::string> segment_scope_iterators(const LoopNest& nest, const Memlet& m) {
  const int depth = std::min(endpoint_depth(nest, m.src, true),
                             endpoint_depth(nest, m.dst, false));
  std::vector<std::string> its;
  for (const MapScope* s : nest.map_chain()) {
    if (s->level >= depth) break;
    for (const auto& p : s->params) its.push_back(p);
  }
  return its;
}

void analyze_memlet(const LoopNest& nest, Memlet& m) {
  const std::vector<std::string> in_scope = segment_scope_iterators(nest, m);
  bool affine = true;
  bool dynamic = false;
  // Iterator ranges that are widened for this segment (out-of-scope ones).
  std::vector<std::string> all_its = nest.nest_iterators();
  for (const auto& sub : m.subscripts) {
    if (reads_arrays(*sub)) {
      affine = false;
      dynamic = true;
      continue;
    }
    if (!affine_coefficients(*sub, in_scope)) {
      affine = false;
      // Affine in the full iterator set but not in scope: a range over
      // out-of-scope iterators. Data-dependent iff one of those iterators has
      // a data-dependent extent.
      auto full = affine_coefficients(*sub, all_its);
      if (!full) {
        dynamic = true;
        continue;
      }
      for (size_t i = 0; i < all_its.size(); ++i) {
        if ((*full)[i] == 0) continue;
        if (std::find(in_scope.begin(), in_scope.end(), all_its[i]) != in_scope.end()) continue;
        // Out-of-scope iterator: find its extent.
        for (const MapScope* s : nest.map_chain()) {
          for (size_t p = 0; p < s->params.size(); ++p) {
            if (s->params[p] != all_its[i]) continue;
            if (classify_extent(nest, *s, s->extents[p]) == ExtentKind::Dynamic) dynamic = true;
          }
        }
      }
    }
  }
  m.is_affine = affine;
  m.is_dynamic = dynamic;
}

void analyze_all_memlets(LoopNest& nest) {
  for (auto& m : nest.memlets) analyze_memlet(nest, m);
}

ExtentKind classify_extent(const LoopNest& nest, const MapScope& map, const Extent& e) {
  if (reads_arrays(*e.begin) || reads_arrays(*e.end)) return ExtentKind::Dynamic;
  // Iterators of enclosing scopes only.
  std::vector<std::string> outer;
  for (const MapScope* s : nest.map_chain()) {
    if (s->id == map.id) break;
    for (const auto& p : s->params) outer.push_back(p);
  }
  auto b = affine_coefficients(*e.begin, outer);
  auto en = affine_coefficients(*e.end, outer);
  if (!b || !en) {
    // min/max of affine pieces still counts as a bounded extent, not dynamic.
    std::map<std::string, Interval> env;
    for (const auto& it : outer) env[it] = Interval{0, 0};
    if (eval_interval(*e.begin, env) && eval_interval(*e.end, env)) return ExtentKind::Affine;
    return ExtentKind::Dynamic;
  }
  const bool b_const = std::all_of(b->begin(), b->end() - 1, [](int64_t v) { return v == 0; });
  const bool e_const = std::all_of(en->begin(), en->end() - 1, [](int64_t v) { return v == 0; });
  return (b_const && e_const) ? ExtentKind::Constant : ExtentKind::Affine;
}

std::optional<int64_t> extent_trip_upper_bound(const LoopNest& nest, const MapScope& map,
                                               const Extent& e) {
  std::map<std::string, Interval> env;
  for (const MapScope* s : nest.map_chain()) {
    if (s->id == map.id) break;
    for (size_t p = 0; p < s->params.size(); ++p) {
      auto b = eval_interval(*s->extents[p].begin, env);
      auto en = eval_interval(*s->extents[p].end, env);
      if (!b || !en) return std::nullopt;
      env[s->params[p]] = Interval{b->lo, std::max(b->lo, en->hi - 1)};
    }
  }
  auto b = eval_interval(*e.begin, env);
  auto en = eval_interval(*e.end, env);
  if (!b || !en) return std::nullopt;
  const int64_t step = e.step == 0 ? 1 : std::abs(e.step);
  const int64_t span = en->hi - b->lo;
  if (span <= 0) return 0;
  return (span + step - 1) / step;
}

// --- validate ---------------------------------------------------------------

namespace {

struct SiteKey {
  std::string array;
  std::string subs;  // printed subscripts, canonical
  Direction dir;
  bool operator<(const SiteKey& o) const {
    return std::tie(array, subs, dir) < std::tie(o.array, o.subs, o.dir);
  }
};

std::string subs_text(const std::vector<ExprPtr>& subs) {
  std::string s;
  for (size_t i = 0; i < subs.size(); ++i) {
    if (i) s += ",";
    s += to_text(subs[i]);
  }
  return s;
}

struct BodySite {
  SiteKey key;
  ReduceOp reduce;
};

void collect_expr_sites(const Expr& e, std::vector<BodySite>& out) {
  if (e.kind == Expr::Kind::ArrayRead) {
    out.push_back({{e.name, subs_text(e.args), Direction::Read}, ReduceOp::None});
  }
  for (const auto& a : e.args) collect_expr_sites(*a, out);
}

void collect_stmt_sites(const std::vector<StmtPtr>& stmts, std::vector<BodySite>& out) {
  for (const auto& sp : stmts) {
    if (const auto* s = std::get_if<AssignStmt>(&sp->node)) {
      if (!s->subscripts.empty()) {
        out.push_back({{s->target, subs_text(s->subscripts), Direction::Write}, s->reduce});
        for (const auto& sub : s->subscripts) collect_expr_sites(*sub, out);
      }
      collect_expr_sites(*s->value, out);
    } else if (const auto* l = std::get_if<LocalStmt>(&sp->node)) {
      collect_expr_sites(*l->init, out);
    } else if (const auto* i = std::get_if<IfStmt>(&sp->node)) {
      collect_expr_sites(*i->cond, out);
      collect_stmt_sites(i->then_body, out);
      collect_stmt_sites(i->else_body, out);
    } else if (const auto* f = std::get_if<ForStmt>(&sp->node)) {
      collect_expr_sites(*f->init, out);
      collect_expr_sites(*f->cond, out);
      collect_stmt_sites(f->body, out);
    }
  }
}

struct NameScopeChecker {
  const LoopNest& nest;
  std::vector<Violation>& out;
  std::set<std::string> names;  // iterators + locals in scope

  void check_expr(const Expr& e) {
    if (e.kind == Expr::Kind::Iter) {
      if (!names.count(e.name))
        out.push_back({"#body", "unknown name '" + e.name + "' in body expression"});
    } else if (e.kind == Expr::Kind::ArrayRead) {
      const DataArray* a = nest.find_array(e.name);
      if (!a) {
        out.push_back({"#body", "undeclared array '" + e.name + "'"});
      } else if (a->shape.size() != e.args.size()) {
        out.push_back({"#body", "array '" + e.name + "' accessed with wrong rank"});
      }
    }
    for (const auto& a : e.args) check_expr(*a);
  }

  void check_stmts(const std::vector<StmtPtr>& stmts) {
    const std::set<std::string> saved = names;
    for (const auto& sp : stmts) {
      if (const auto* s = std::get_if<AssignStmt>(&sp->node)) {
        if (s->subscripts.empty()) {
          if (!names.count(s->target))
            out.push_back({"#body", "assignment to undeclared local '" + s->target + "'"});
        } else {
          const DataArray* a = nest.find_array(s->target);
          if (!a)
            out.push_back({"#body", "undeclared array '" + s->target + "'"});
          else if (a->shape.size() != s->subscripts.size())
            out.push_back({"#body", "array '" + s->target + "' written with wrong rank"});
          for (const auto& sub : s->subscripts) check_expr(*sub);
        }
        check_expr(*s->value);
      } else if (const auto* l = std::get_if<LocalStmt>(&sp->node)) {
        check_expr(*l->init);
        names.insert(l->name);
      } else if (const auto* i = std::get_if<IfStmt>(&sp->node)) {
        check_expr(*i->cond);
        check_stmts(i->then_body);
        check_stmts(i->else_body);
      } else if (const auto* f = std::get_if<ForStmt>(&sp->node)) {
        check_expr(*f->init);
        names.insert(f->iter);
        check_expr(*f->cond);
        if (f->step == 0) out.push_back({"#body", "sequential loop with step 0"});
        check_stmts(f->body);
      }
    }
    names = saved;
    // Locals persist across sibling statements within one body; restore only
    // on nested-block exit.
  }
};

std::string graph_node_key(const NodeRef& ref, bool as_src) {
  switch (ref.kind) {
    case NodeRef::Kind::Array: return ref.name + (as_src ? "@in" : "@out");
    case NodeRef::Kind::MapEntry: return ref.name + "#entry";
    case NodeRef::Kind::MapExit: return ref.name + "#exit";
    case NodeRef::Kind::Body: return "#body";
  }
  return "?";
}

}  // namespace

std::vector<Violation> validate(const LoopNest& nest) {
  std::vector<Violation> out;

  // Arrays.
  std::set<std::string> array_names;
  for (const auto& a : nest.arrays) {
    if (!array_names.insert(a.name).second)
      out.push_back({a.name, "duplicate array name"});
    if (a.shape.size() != a.strides.size())
      out.push_back({a.name, "shape and strides lengths differ"});
    if (a.bytes != 1 && a.bytes != 4 && a.bytes != 8)
      out.push_back({a.name, "bytes_per_element must be 1, 4 or 8"});
    if (a.bytes != bytes_per_element(a.elem_type))
      out.push_back({a.name, "bytes_per_element inconsistent with elem_type"});
    for (int64_t d : a.shape)
      if (d != kDynamicDim && d < 1)
        out.push_back({a.name, "static shape entries must be >= 1"});
    if (a.alignment < 1) out.push_back({a.name, "alignment must be positive"});
  }

  // Maps: one root, chain structure, levels, params, schedules.
  if (nest.maps.empty()) out.push_back({"", "no map scope"});
  std::set<std::string> map_ids;
  int roots = 0;
  for (const auto& m : nest.maps) {
    if (!map_ids.insert(m.id).second) out.push_back({m.id, "duplicate map id"});
    if (m.parent.empty()) ++roots;
  }
  if (roots == 0 && !nest.maps.empty()) out.push_back({"", "no outermost map scope"});
  if (roots > 1) out.push_back({"", "more than one outermost map scope"});

  std::set<std::string> params_seen;
  for (const auto& m : nest.maps) {
    if (!m.parent.empty() && !nest.find_map(m.parent))
      out.push_back({m.id, "parent map '" + m.parent + "' not found"});
    if (m.params.empty()) out.push_back({m.id, "map without parameters"});
    if (m.params.size() != m.extents.size())
      out.push_back({m.id, "params and extents lengths differ"});
    for (const auto& p : m.params)
      if (!params_seen.insert(p).second)
        out.push_back({m.id, "duplicate iterator name '" + p + "'"});
    for (const auto& e : m.extents)
      if (e.step == 0) out.push_back({m.id, "extent step must not be 0"});
    const auto& s = m.schedule;
    if ((s.assignment == Assignment::Dynamic) != (s.chunk > 0))
      out.push_back({m.id, "chunk must be present iff assignment is dynamic"});
    if (s.threads < 1) out.push_back({m.id, "threads must be >= 1"});
    if (s.vector_width != 1 && s.vector_width != 2 && s.vector_width != 4 &&
        s.vector_width != 8)
      out.push_back({m.id, "vector_width must be one of 1,2,4,8"});
  }

  // Chain: at most one child per map; levels consistent.
  std::map<std::string, int> child_count;
  for (const auto& m : nest.maps)
    if (!m.parent.empty()) child_count[m.parent]++;
  for (const auto& [id, n] : child_count)
    if (n > 1) out.push_back({id, "map has multiple child maps (chain required)"});
  for (const auto& m : nest.maps) {
    int depth = 0;
    const MapScope* cur = &m;
    std::set<std::string> seen;
    while (!cur->parent.empty()) {
      if (!seen.insert(cur->id).second) {
        out.push_back({m.id, "cycle in map parent chain"});
        depth = -1;
        break;
      }
      const MapScope* p = nest.find_map(cur->parent);
      if (!p) break;
      cur = p;
      ++depth;
    }
    if (depth >= 0 && depth != m.level)
      out.push_back({m.id, "level does not equal the count of enclosing map scopes"});
    // Vectorization only on the innermost scope.
    if (m.schedule.vector_width > 1 && child_count.count(m.id))
      out.push_back({m.id, "vector_width > 1 on a non-innermost map"});
  }

  // Extent expressions reference only outer iterators (or data).
  for (const auto& m : nest.maps) {
    std::vector<std::string> outer;
    for (const MapScope* s : nest.map_chain()) {
      if (s->id == m.id) break;
      for (const auto& p : s->params) outer.push_back(p);
    }
    for (const auto& e : m.extents) {
      std::vector<std::string> used;
      collect_iterators(*e.begin, used);
      collect_iterators(*e.end, used);
      for (const auto& u : used)
        if (std::find(outer.begin(), outer.end(), u) == outer.end())
          out.push_back({m.id, "extent references iterator '" + u + "' not in an outer scope"});
    }
  }

  // Body scope checks.
  {
    NameScopeChecker checker{nest, out, {}};
    for (const auto& it : nest.nest_iterators()) checker.names.insert(it);
    checker.check_stmts(nest.body);
  }

  // Memlets.
  std::set<std::string> memlet_ids;
  for (const auto& m : nest.memlets) {
    if (!memlet_ids.insert(m.id).second) out.push_back({m.id, "duplicate memlet id"});
    if (!nest.find_array(m.array)) out.push_back({m.id, "memlet references undeclared array '" + m.array + "'"});
    for (const NodeRef* r : {&m.src, &m.dst}) {
      if (r->kind == NodeRef::Kind::Array && !nest.find_array(r->name))
        out.push_back({m.id, "memlet endpoint references undeclared array '" + r->name + "'"});
      if ((r->kind == NodeRef::Kind::MapEntry || r->kind == NodeRef::Kind::MapExit) &&
          !nest.find_map(r->name))
        out.push_back({m.id, "memlet endpoint references unknown map '" + r->name + "'"});
    }
    const DataArray* a = nest.find_array(m.array);
    if (a && a->shape.size() != m.subscripts.size())
      out.push_back({m.id, "memlet subscripts rank differs from array rank"});
    // Subscript iterators must exist in the nest or be body-locals; the body
    // checker covers body sites, here we accept any nest iterator or any
    // name (sequential-loop iterators are body-scoped and not visible here).
    Memlet copy = m;
    analyze_memlet(nest, copy);
    if (copy.is_affine != m.is_affine || copy.is_dynamic != m.is_dynamic)
      out.push_back({m.id, "memlet affine/dynamic flags inconsistent with subscripts"});
    // Direction/position consistency.
    const bool read = m.direction == Direction::Read;
    if (read) {
      const bool src_ok = m.src.kind == NodeRef::Kind::Array || m.src.kind == NodeRef::Kind::MapEntry;
      const bool dst_ok = m.dst.kind == NodeRef::Kind::MapEntry || m.dst.kind == NodeRef::Kind::Body;
      if (!src_ok || !dst_ok) out.push_back({m.id, "read memlet has invalid endpoints"});
    } else {
      const bool src_ok = m.src.kind == NodeRef::Kind::Body || m.src.kind == NodeRef::Kind::MapExit;
      const bool dst_ok = m.dst.kind == NodeRef::Kind::MapExit || m.dst.kind == NodeRef::Kind::Array;
      if (!src_ok || !dst_ok) out.push_back({m.id, "write memlet has invalid endpoints"});
    }
  }

  // Unmatched scopes: a map whose entry participates in the dataflow while
  // its exit does not (or vice versa).
  for (const auto& m : nest.maps) {
    bool entry_used = false, exit_used = false;
    for (const auto& e : nest.memlets) {
      for (const NodeRef* r : {&e.src, &e.dst}) {
        if (r->name != m.id) continue;
        if (r->kind == NodeRef::Kind::MapEntry) entry_used = true;
        if (r->kind == NodeRef::Kind::MapExit) exit_used = true;
      }
    }
    if (entry_used != exit_used) out.push_back({m.id, "unmatched map scope"});
  }

  // Acyclicity over the memlet graph.
  {
    std::map<std::string, std::vector<std::string>> adj;
    std::map<std::string, int> indeg;
    for (const auto& m : nest.memlets) {
      const std::string s = graph_node_key(m.src, true);
      const std::string d = graph_node_key(m.dst, false);
      adj[s].push_back(d);
      indeg.emplace(s, 0);
      indeg[d]++;
    }
    std::vector<std::string> queue;
    for (const auto& [k, v] : indeg)
      if (v == 0) queue.push_back(k);
    size_t processed = 0;
    while (!queue.empty()) {
      const std::string k = queue.back();
      queue.pop_back();
      ++processed;
      for (const auto& d : adj[k])
        if (--indeg[d] == 0) queue.push_back(d);
    }
    if (processed != indeg.size()) out.push_back({"", "graph not acyclic"});
  }

  // Memlet paths must chain from an access node to the body/entry (reads) or
  // from the body to an access node (writes), one segment per scope boundary.
  {
    std::map<SiteKey, std::vector<const Memlet*>> groups;
    for (const auto& m : nest.memlets)
      groups[{m.array, subs_text(m.subscripts), m.direction}].push_back(&m);
    for (auto& [key, segs] : groups) {
      const bool read = key.dir == Direction::Read;
      const Memlet* start = nullptr;
      for (const Memlet* s : segs) {
        const bool is_start = read ? s->src.kind == NodeRef::Kind::Array
                                   : s->src.kind == NodeRef::Kind::Body;
        if (is_start) {
          if (start) out.push_back({s->id, "duplicate path start for access " + key.array});
          start = s;
        }
      }
      if (!start) {
        out.push_back({segs.front()->id, "broken memlet path (no start segment)"});
        continue;
      }
      // Follow the chain.
      std::set<const Memlet*> used{start};
      const Memlet* cur = start;
      while (true) {
        const Memlet* next = nullptr;
        for (const Memlet* s : segs) {
          if (used.count(s)) continue;
          if (s->src == cur->dst) {
            if (next) out.push_back({s->id, "ambiguous memlet path"});
            next = s;
          }
        }
        if (!next) break;
        used.insert(next);
        cur = next;
      }
      if (used.size() != segs.size())
        out.push_back({segs.front()->id, "broken memlet path (disconnected segments)"});
      const bool end_ok = read ? (cur->dst.kind == NodeRef::Kind::Body ||
                                  cur->dst.kind == NodeRef::Kind::MapEntry)
                               : cur->dst.kind == NodeRef::Kind::Array;
      if (!end_ok) out.push_back({cur->id, "memlet path ends at an invalid node"});
      // Reduction must agree along the path.
      for (const Memlet* s : segs)
        if (s->reduction != start->reduction)
          out.push_back({s->id, "reduction differs along memlet path"});
    }
  }

  // Body access sites resolve to exactly one body-adjacent memlet each.
  {
    std::vector<BodySite> sites;
    collect_stmt_sites(nest.body, sites);
    for (const auto& site : sites) {
      int matches = 0;
      const Memlet* hit = nullptr;
      for (const auto& m : nest.memlets) {
        const bool body_adjacent = site.key.dir == Direction::Read
                                       ? m.dst.kind == NodeRef::Kind::Body
                                       : m.src.kind == NodeRef::Kind::Body;
        if (!body_adjacent || m.direction != site.key.dir) continue;
        if (m.array != site.key.array || subs_text(m.subscripts) != site.key.subs) continue;
        ++matches;
        hit = &m;
      }
      if (matches == 0)
        out.push_back({"#body", "no memlet declared for access " + site.key.array + "[" +
                                    site.key.subs + "]"});
      else if (matches > 1)
        out.push_back({"#body", "multiple memlets match access " + site.key.array + "[" +
                                    site.key.subs + "]"});
      else if (site.key.dir == Direction::Write && hit->reduction != site.reduce)
        out.push_back({hit->id, "memlet reduction does not match assignment operator"});
    }
    // Dynamic-extent reads resolve to entry-adjacent memlets of that map.
    for (const auto& m : nest.maps) {
      for (const auto& e : m.extents) {
        std::vector<BodySite> esites;
        collect_expr_sites(*e.begin, esites);
        collect_expr_sites(*e.end, esites);
        for (const auto& site : esites) {
          bool found = false;
          for (const auto& ml : nest.memlets)
            if (ml.dst.kind == NodeRef::Kind::MapEntry && ml.dst.name == m.id &&
                ml.array == site.key.array && subs_text(ml.subscripts) == site.key.subs)
              found = true;
          if (!found)
            out.push_back({m.id, "no memlet feeds dynamic extent access " + site.key.array +
                                     "[" + site.key.subs + "]"});
        }
      }
    }
    // Conversely, every body-adjacent memlet must be referenced.
    for (const auto& m : nest.memlets) {
      const bool body_adjacent = m.direction == Direction::Read
                                     ? m.dst.kind == NodeRef::Kind::Body
                                     : m.src.kind == NodeRef::Kind::Body;
      if (!body_adjacent) continue;
      bool used = false;
      for (const auto& site : sites)
        if (site.key.dir == m.direction && site.key.array == m.array &&
            site.key.subs == subs_text(m.subscripts))
          used = true;
      if (!used) out.push_back({m.id, "memlet not referenced by any body access"});
    }
  }

  // Conservative parallel-safety: plain writes must be injective per
  // iteration (every map param appears) and reads of a written array must
  // target the same element.
  {
    const std::vector<std::string> its = nest.nest_iterators();
    for (const auto& w : nest.memlets) {
      if (w.direction != Direction::Write || w.src.kind != NodeRef::Kind::Body) continue;
      if (w.reduction != ReduceOp::None) continue;
      for (const auto& it : its) {
        bool referenced = false;
        for (const auto& sub : w.subscripts)
          if (references_iterator(*sub, it)) referenced = true;
        if (!referenced)
          out.push_back({w.id, "plain write does not reference iterator '" + it +
                                   "' (write race across the parallel map)"});
      }
      for (const auto& r : nest.memlets) {
        if (r.direction != Direction::Read || r.dst.kind != NodeRef::Kind::Body) continue;
        if (r.array != w.array) continue;
        if (subs_text(r.subscripts) != subs_text(w.subscripts))
          out.push_back({r.id, "read of written array '" + w.array +
                                   "' at a different element (cross-iteration dependence)"});
      }
    }
  }

  return out;
}

LoopNest canonical_schedule(const LoopNest& nest, int64_t threads) {
  LoopNest result = nest;
  for (auto& m : result.maps) {
    if (m.parent.empty()) {
      m.schedule.parallel = true;
      m.schedule.assignment = Assignment::Static;
      m.schedule.chunk = 0;
      m.schedule.threads = threads;
      m.schedule.vector_width = 1;
    } else {
      m.schedule.parallel = false;
    }
  }
  return result;
}

const char* to_string(Storage s) { return s == Storage::Heap ? "heap" : "register"; }
const char* to_string(Direction d) { return d == Direction::Read ? "read" : "write"; }
const char* to_string(ReduceOp r) {
  switch (r) {
    case ReduceOp::None: return "none";
    case ReduceOp::Sum: return "sum";
    case ReduceOp::Min: return "min";
    case ReduceOp::Max: return "max";
  }
  return "?";
}
const char* to_string(Assignment a) { return a == Assignment::Static ? "static" : "dynamic"; }

}  // namespace perfembed::ir
