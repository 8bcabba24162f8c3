#include "perfembed/transform.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "perfembed/encoder.hpp"

namespace perfembed::transform {

using ir::LoopNest;
using ir::MapScope;

const char* to_string(TransformKind k) {
  switch (k) {
    case TransformKind::Interchange: return "interchange";
    case TransformKind::Tile: return "tile";
    case TransformKind::Parallelize: return "parallelize";
    case TransformKind::SetSchedule: return "set_schedule";
    case TransformKind::Vectorize: return "vectorize";
  }
  return "?";
}

Transformation Transformation::interchange(std::string a, std::string b) {
  Transformation t;
  t.kind = TransformKind::Interchange;
  t.map_a = std::move(a);
  t.map_b = std::move(b);
  return t;
}

Transformation Transformation::tile(std::string m, int64_t size) {
  Transformation t;
  t.kind = TransformKind::Tile;
  t.map_a = std::move(m);
  t.tile_size = size;
  return t;
}

Transformation Transformation::parallelize(std::string m, int64_t threads) {
  Transformation t;
  t.kind = TransformKind::Parallelize;
  t.map_a = std::move(m);
  t.threads = threads;
  return t;
}

Transformation Transformation::set_schedule_static(std::string m) {
  Transformation t;
  t.kind = TransformKind::SetSchedule;
  t.map_a = std::move(m);
  t.assignment = ir::Assignment::Static;
  return t;
}

Transformation Transformation::set_schedule_dynamic(std::string m, int64_t chunk) {
  Transformation t;
  t.kind = TransformKind::SetSchedule;
  t.map_a = std::move(m);
  t.assignment = ir::Assignment::Dynamic;
  t.chunk = chunk;
  return t;
}

Transformation Transformation::vectorize(std::string m, int width) {
  Transformation t;
  t.kind = TransformKind::Vectorize;
  t.map_a = std::move(m);
  t.vector_width = width;
  return t;
}

std::vector<std::string> Transformation::anchors() const {
  if (kind == TransformKind::Interchange) return {map_a + "#entry", map_b + "#entry"};
  return {map_a + "#entry"};
}

std::string Transformation::to_line() const {
  std::ostringstream os;
  os << to_string(kind) << " " << map_a;
  switch (kind) {
    case TransformKind::Interchange: os << " " << map_b; break;
    case TransformKind::Tile: os << " size " << tile_size; break;
    case TransformKind::Parallelize: os << " threads " << threads; break;
    case TransformKind::SetSchedule:
      if (assignment == ir::Assignment::Dynamic) os << " dynamic " << chunk;
      else os << " static";
      break;
    case TransformKind::Vectorize: os << " width " << vector_width; break;
  }
  return os.str();
}

Transformation Transformation::from_line(const std::string& line) {
  std::istringstream in(line);
  std::string kind_s, map_a;
  in >> kind_s >> map_a;
  if (!in) throw TransformError("bad transformation line: " + line);
  if (kind_s == "interchange") {
    std::string b;
    in >> b;
    return interchange(map_a, b);
  }
  std::string kw;
  if (kind_s == "tile") {
    int64_t s = 0;
    in >> kw >> s;
    return tile(map_a, s);
  }
  if (kind_s == "parallelize") {
    int64_t t = 0;
    in >> kw >> t;
    return parallelize(map_a, t);
  }
  if (kind_s == "set_schedule") {
    in >> kw;
    if (kw == "static") return set_schedule_static(map_a);
    int64_t c = 0;
    in >> c;
    return set_schedule_dynamic(map_a, c);
  }
  if (kind_s == "vectorize") {
    int w = 0;
    in >> kw >> w;
    return vectorize(map_a, w);
  }
  throw TransformError("unknown transformation kind: " + kind_s);
}

std::string sequence_to_text(const TransformationSequence& seq) {
  std::ostringstream os;
  os << "perfembed-sequence v1\n";
  for (const auto& t : seq) os << t.to_line() << "\n";
  return os.str();
}

TransformationSequence sequence_from_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "perfembed-sequence v1")
    throw TransformError("bad sequence header");
  TransformationSequence seq;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    seq.push_back(Transformation::from_line(line));
  }
  return seq;
}

// --- applicability ---------------------------------------------------------------

namespace {

const MapScope* child_of(const LoopNest& nest, const std::string& id) {
  for (const auto& m : nest.maps)
    if (m.parent == id) return &m;
  return nullptr;
}

// Element stride of the subscripts w.r.t. one iterator; nullopt if non-affine.
std::optional<int64_t> stride_in(const LoopNest& nest, const std::vector<ir::ExprPtr>& subs,
                                 const ir::DataArray& arr, const std::string& param) {
  const std::vector<std::string> its = nest.nest_iterators();
  auto pit = std::find(its.begin(), its.end(), param);
  if (pit == its.end()) return 0;
  const size_t pidx = static_cast<size_t>(pit - its.begin());
  int64_t stride = 0;
  for (size_t d = 0; d < subs.size(); ++d) {
    auto coeffs = ir::affine_coefficients(*subs[d], its);
    if (!coeffs) return std::nullopt;
    stride += (*coeffs)[pidx] * arr.strides[d];
  }
  return stride;
}

bool body_is_straight_line(const std::vector<ir::StmtPtr>& stmts) {
  for (const auto& sp : stmts) {
    if (std::holds_alternative<ir::IfStmt>(sp->node) ||
        std::holds_alternative<ir::ForStmt>(sp->node))
      return false;
  }
  return true;
}

void collect_float_types(const LoopNest& nest, std::set<ir::ElemType>& out) {
  for (const auto& a : nest.arrays)
    if (ir::is_float(a.elem_type)) out.insert(a.elem_type);
}

Applicability no(const std::string& reason) { return {false, reason}; }

}  // namespace

Applicability applicable(const Transformation& t, const LoopNest& nest) {
  const MapScope* a = nest.find_map(t.map_a);
  if (!a) return no("map '" + t.map_a + "' not found");

  switch (t.kind) {
    case TransformKind::Interchange: {
      const MapScope* b = nest.find_map(t.map_b);
      if (!b) return no("map '" + t.map_b + "' not found");
      if (b->parent != a->id) return no("maps not perfectly nested (not parent/child)");
      if (a->params.size() != 1 || b->params.size() != 1) return no("multi-dimensional map");
      if (a->schedule.vector_width > 1 || b->schedule.vector_width > 1)
        return no("vectorized map");
      for (const MapScope* m : {a, b})
        for (const auto& e : m->extents)
          if (ir::classify_extent(nest, *m, e) == ir::ExtentKind::Dynamic)
            return no("dynamic extent");
      for (const auto& e : b->extents) {
        if (e.begin && ir::references_iterator(*e.begin, a->params[0]))
          return no("inner extent depends on the interchanged iterator");
        if (e.end && ir::references_iterator(*e.end, a->params[0]))
          return no("inner extent depends on the interchanged iterator");
      }
      // Conservative dependence check: a floating-point reduction whose
      // subscripts mention neither iterator would be reordered by the swap.
      for (const auto& m : nest.memlets) {
        if (m.direction != ir::Direction::Write || m.src.kind != ir::NodeRef::Kind::Body)
          continue;
        if (m.reduction == ir::ReduceOp::None) continue;
        const ir::DataArray* arr = nest.find_array(m.array);
        if (!arr || !ir::is_float(arr->elem_type)) continue;
        bool refs_a = false, refs_b = false;
        for (const auto& sub : m.subscripts) {
          refs_a = refs_a || ir::references_iterator(*sub, a->params[0]);
          refs_b = refs_b || ir::references_iterator(*sub, b->params[0]);
        }
        if (!refs_a && !refs_b) return no("would reorder a floating-point reduction");
      }
      return {true, ""};
    }

    case TransformKind::Tile: {
      if (a->params.size() != 1) return no("multi-dimensional map");
      if (a->schedule.vector_width > 1) return no("vectorized map");
      const ir::Extent& e = a->extents[0];
      if (ir::classify_extent(nest, *a, e) != ir::ExtentKind::Constant)
        return no("dynamic extent");
      if (e.step != 1) return no("non-unit step");
      if (t.tile_size < 1) return no("tile size must be positive");
      if (static_cast<int>(nest.nest_iterators().size()) >= encoder::FeatureLayout::kMaxIters)
        return no("nest already at the maximum encodable depth");
      return {true, ""};
    }

    case TransformKind::Parallelize: {
      if (!a->parent.empty()) return no("only the outermost map is parallelized");
      if (t.threads < 1) return no("thread count must be positive");
      return {true, ""};
    }

    case TransformKind::SetSchedule: {
      if (!a->parent.empty()) return no("only the outermost map is scheduled");
      if (t.assignment == ir::Assignment::Dynamic && t.chunk < 1)
        return no("dynamic schedule requires a positive chunk");
      return {true, ""};
    }

    case TransformKind::Vectorize: {
      if (child_of(nest, a->id)) return no("not the innermost map");
      if (a->params.size() != 1) return no("multi-dimensional map");
      if (a->schedule.vector_width > 1) return no("already vectorized");
      const ir::Extent& e = a->extents[0];
      if (ir::classify_extent(nest, *a, e) == ir::ExtentKind::Dynamic)
        return no("dynamic extent");
      if (e.step != 1) return no("non-unit step");
      if (t.vector_width != 2 && t.vector_width != 4 && t.vector_width != 8)
        return no("vector width must be 2, 4 or 8");
      auto trip = ir::extent_trip_upper_bound(nest, *a, e);
      if (!trip || *trip < t.vector_width) return no("extent smaller than the vector width");
      if (!body_is_straight_line(nest.body)) return no("control flow in body");
      std::set<ir::ElemType> fts;
      collect_float_types(nest, fts);
      for (ir::ElemType ft : fts) {
        const int bits = t.vector_width * ir::bytes_per_element(ft) * 8;
        if (bits != 128 && bits != 256 && bits != 512)
          return no("width does not map to a packed operation");
      }
      for (const auto& m : nest.memlets) {
        if (m.direction != ir::Direction::Write || m.src.kind != ir::NodeRef::Kind::Body)
          continue;
        const ir::DataArray* arr = nest.find_array(m.array);
        auto s = stride_in(nest, m.subscripts, *arr, a->params[0]);
        if (!s || *s != 1) return no("store not unit-stride in the vectorized iterator");
      }
      return {true, ""};
    }
  }
  return no("unknown transformation");
}

// --- apply ------------------------------------------------------------------------

namespace {

void renumber_levels(LoopNest& nest) {
  for (auto& m : nest.maps) {
    int level = 0;
    std::string cur = m.parent;
    while (!cur.empty()) {
      ++level;
      cur = nest.find_map(cur)->parent;
    }
    m.level = level;
  }
  // Keep the vector in chain order (root to innermost).
  std::sort(nest.maps.begin(), nest.maps.end(),
            [](const MapScope& x, const MapScope& y) { return x.level < y.level; });
}

}  // namespace

LoopNest apply(const Transformation& t, const LoopNest& nest) {
  const Applicability a = applicable(t, nest);
  if (!a.ok)
    throw TransformError("cannot apply " + t.to_line() + ": " + a.reason);
  LoopNest out = nest;

  switch (t.kind) {
    case TransformKind::Interchange: {
      MapScope* ma = nullptr;
      MapScope* mb = nullptr;
      for (auto& m : out.maps) {
        if (m.id == t.map_a) ma = &m;
        if (m.id == t.map_b) mb = &m;
      }
      std::swap(ma->params, mb->params);
      std::swap(ma->extents, mb->extents);
      break;
    }

    case TransformKind::Tile: {
      MapScope* m = nullptr;
      for (auto& mm : out.maps)
        if (mm.id == t.map_a) m = &mm;
      const ir::Extent e = m->extents[0];
      // Constant bounds guaranteed by applicability.
      const auto b = ir::affine_coefficients(*e.begin, {});
      const auto en = ir::affine_coefficients(*e.end, {});
      const int64_t begin = (*b)[0], end = (*en)[0];
      const int64_t trip = std::max<int64_t>(end - begin, 0);
      const int64_t s = t.tile_size;
      const int64_t outer_trips = (trip + s - 1) / s;

      MapScope tile_loop;
      tile_loop.id = m->id + "_t";
      tile_loop.params = {m->params[0] + "_t"};
      tile_loop.extents = {ir::Extent{ir::Expr::int_lit(0), ir::Expr::int_lit(outer_trips), 1}};
      tile_loop.parent = m->parent;
      tile_loop.schedule = m->schedule;

      const ir::ExprPtr tp = ir::Expr::iter(tile_loop.params[0]);
      const ir::ExprPtr lo = ir::Expr::binary(
          ir::BinOp::Add, ir::Expr::int_lit(begin),
          ir::Expr::binary(ir::BinOp::Mul, tp, ir::Expr::int_lit(s)));
      const ir::ExprPtr hi = ir::Expr::binary(
          ir::BinOp::Min,
          ir::Expr::binary(ir::BinOp::Add, lo, ir::Expr::int_lit(s)),
          ir::Expr::int_lit(end));
      m->extents[0] = ir::Extent{lo, hi, 1};
      m->parent = tile_loop.id;
      m->schedule = ir::ScheduleAnnotation{};
      out.maps.push_back(std::move(tile_loop));
      break;
    }

    case TransformKind::Parallelize: {
      for (auto& m : out.maps)
        if (m.id == t.map_a) {
          m.schedule.parallel = true;
          m.schedule.threads = t.threads;
        }
      break;
    }

    case TransformKind::SetSchedule: {
      for (auto& m : out.maps)
        if (m.id == t.map_a) {
          m.schedule.assignment = t.assignment;
          m.schedule.chunk = t.assignment == ir::Assignment::Dynamic ? t.chunk : 0;
        }
      break;
    }

    case TransformKind::Vectorize: {
      for (auto& m : out.maps)
        if (m.id == t.map_a) m.schedule.vector_width = t.vector_width;
      break;
    }
  }

  renumber_levels(out);
  ir::analyze_all_memlets(out);
  const auto violations = ir::validate(out);
  if (!violations.empty())
    throw TransformError("apply produced an invalid nest: [" + violations.front().node + "] " +
                         violations.front().message);
  return out;
}

std::vector<std::string> induced_subgraph(const Transformation& t, const LoopNest& nest) {
  const Applicability a = applicable(t, nest);
  if (!a.ok) throw TransformError("induced_subgraph: " + a.reason);
  const encoder::EncodedGraph g = encoder::encode_static(nest);
  std::vector<std::string> out;
  std::set<std::string> memlets;
  for (const std::string& anchor : t.anchors()) {
    const int idx = g.index_of(anchor);
    if (idx < 0) throw TransformError("anchor node '" + anchor + "' not in encoding");
    out.push_back(anchor);
    for (const auto& [x, y] : g.edges) {
      if (x == idx && g.nodes[static_cast<size_t>(y)].kind == encoder::NodeKind::Memlet)
        memlets.insert(g.nodes[static_cast<size_t>(y)].origin);
      if (y == idx && g.nodes[static_cast<size_t>(x)].kind == encoder::NodeKind::Memlet)
        memlets.insert(g.nodes[static_cast<size_t>(x)].origin);
    }
  }
  out.insert(out.end(), memlets.begin(), memlets.end());
  return out;
}

// --- enumeration --------------------------------------------------------------------

namespace {

struct EnumState {
  std::set<std::string> tiled;
  std::set<std::pair<std::string, std::string>> interchanged;
  bool vectorized = false;
  bool scheduled = false;
  bool parallelized = false;
};

std::vector<Transformation> candidates(const LoopNest& nest, const SpaceLimits& limits,
                                       const EnumState& st) {
  std::vector<Transformation> out;
  const auto chain = nest.map_chain();
  // Interchange over adjacent pairs.
  for (size_t i = 0; i + 1 < chain.size(); ++i) {
    auto key = std::minmax(chain[i]->id, chain[i + 1]->id);
    if (st.interchanged.count({key.first, key.second})) continue;
    out.push_back(Transformation::interchange(chain[i]->id, chain[i + 1]->id));
  }
  // Tile.
  for (const MapScope* m : chain) {
    if (st.tiled.count(m->id)) continue;
    if (m->id.size() > 2 && m->id.rfind("_t") == m->id.size() - 2) continue;  // tile loop
    for (int64_t s : limits.tile_sizes) {
      if (m->params.size() == 1) {
        auto trip = ir::extent_trip_upper_bound(nest, *m, m->extents[0]);
        if (trip && *trip <= s) continue;  // tile as large as the loop
      }
      out.push_back(Transformation::tile(m->id, s));
    }
  }
  // Vectorize the innermost map.
  if (!st.vectorized && !chain.empty())
    for (int w : limits.vector_widths)
      out.push_back(Transformation::vectorize(chain.back()->id, w));
  // Parallelize the root.
  if (!st.parallelized && !chain.empty())
    for (int64_t tc : limits.thread_counts) {
      if (chain.front()->schedule.parallel && chain.front()->schedule.threads == tc) continue;
      out.push_back(Transformation::parallelize(chain.front()->id, tc));
    }
  // Scheduling of the root.
  if (!st.scheduled && !chain.empty()) {
    const auto& sched = chain.front()->schedule;
    for (int64_t c : limits.chunk_sizes)
      if (!(sched.assignment == ir::Assignment::Dynamic && sched.chunk == c))
        out.push_back(Transformation::set_schedule_dynamic(chain.front()->id, c));
    if (limits.include_static_schedule && sched.assignment != ir::Assignment::Static)
      out.push_back(Transformation::set_schedule_static(chain.front()->id));
  }
  return out;
}

void enumerate_rec(const LoopNest& nest, const SpaceLimits& limits, const EnumState& st,
                   TransformationSequence& prefix,
                   std::vector<TransformationSequence>& out) {
  if (static_cast<int>(prefix.size()) >= limits.max_length) return;
  for (const Transformation& t : candidates(nest, limits, st)) {
    if (!applicable(t, nest).ok) continue;
    LoopNest next = apply(t, nest);
    EnumState st2 = st;
    switch (t.kind) {
      case TransformKind::Interchange: {
        auto key = std::minmax(t.map_a, t.map_b);
        st2.interchanged.insert({key.first, key.second});
        break;
      }
      case TransformKind::Tile:
        st2.tiled.insert(t.map_a);
        st2.tiled.insert(t.map_a + "_t");
        break;
      case TransformKind::Vectorize: st2.vectorized = true; break;
      case TransformKind::Parallelize: st2.parallelized = true; break;
      case TransformKind::SetSchedule: st2.scheduled = true; break;
    }
    prefix.push_back(t);
    out.push_back(prefix);
    enumerate_rec(next, limits, st2, prefix, out);
    prefix.pop_back();
  }
}

}  // namespace

std::vector<TransformationSequence> enumerate_space(const LoopNest& nest,
                                                    const SpaceLimits& limits) {
  std::vector<TransformationSequence> out;
  out.emplace_back();  // empty sequence = baseline
  TransformationSequence prefix;
  EnumState st;
  enumerate_rec(nest, limits, st, prefix, out);
  return out;
}

}  // namespace perfembed::transform
