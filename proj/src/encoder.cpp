#include "perfembed/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "perfembed/util.hpp"

namespace perfembed::encoder {

namespace {

// Signed log scaling keeps magnitudes comparable across slots.
double slog(double x) { return x >= 0 ? std::log2(1.0 + x) : -std::log2(1.0 - x); }

constexpr int kKindOffset = 0;          // 5
constexpr int kDtypeOffset = 5;         // 5
constexpr int kBytesOffset = 10;        // 1
constexpr int kShapeOffset = 11;        // 4
constexpr int kTotalSizeOffset = 15;    // 1
constexpr int kStridesOffset = 16;      // 4
constexpr int kAlignOffset = 20;        // 1
constexpr int kArrOffsetOffset = 21;    // 1
constexpr int kTransientOffset = 22;    // 1
constexpr int kStorageOffset = 23;      // 2
constexpr int kMapLevelOffset = 25;     // 1
constexpr int kMapDimsOffset = 26;      // 1
constexpr int kMapExtentsOffset = 27;   // 4
constexpr int kMapStepsOffset = 31;     // 4
constexpr int kMapDynamicOffset = 35;   // 1
constexpr int kStartMatrixOffset = 36;  // 4 * 9
constexpr int kStopMatrixOffset = 72;   // 4 * 9
constexpr int kMemletStepsOffset = 108; // 4
constexpr int kMemletDynamicOffset = 112;
constexpr int kMemletIndirectOffset = 113;
constexpr int kMemletReductionOffset = 114;
constexpr int kReductionKindOffset = 115;  // 3
constexpr int kWidth = 118;

FeatureLayout build_layout() {
  FeatureLayout fl;
  fl.version = "pe-fl-v1.r4.i8";
  fl.width = kWidth;
  fl.slots = {
      {"kind", kKindOffset, 5},
      {"access.dtype", kDtypeOffset, 5},
      {"access.bytes_per_element", kBytesOffset, 1},
      {"access.shape", kShapeOffset, FeatureLayout::kMaxRank},
      {"access.total_size", kTotalSizeOffset, 1},
      {"access.strides", kStridesOffset, FeatureLayout::kMaxRank},
      {"access.alignment", kAlignOffset, 1},
      {"access.offset", kArrOffsetOffset, 1},
      {"access.transient", kTransientOffset, 1},
      {"access.storage", kStorageOffset, 2},
      {"map_entry.level", kMapLevelOffset, 1},
      {"map_entry.dims", kMapDimsOffset, 1},
      {"map_entry.extents", kMapExtentsOffset, FeatureLayout::kMaxRank},
      {"map_entry.steps", kMapStepsOffset, FeatureLayout::kMaxRank},
      {"map_entry.dynamic", kMapDynamicOffset, 1},
      {"memlet.start_matrix", kStartMatrixOffset,
       FeatureLayout::kMaxRank * (FeatureLayout::kMaxIters + 1)},
      {"memlet.stop_matrix", kStopMatrixOffset,
       FeatureLayout::kMaxRank * (FeatureLayout::kMaxIters + 1)},
      {"memlet.steps", kMemletStepsOffset, FeatureLayout::kMaxRank},
      {"memlet.is_dynamic", kMemletDynamicOffset, 1},
      {"memlet.is_indirect", kMemletIndirectOffset, 1},
      {"memlet.is_reduction", kMemletReductionOffset, 1},
      {"memlet.reduction_kind", kReductionKindOffset, 3},
  };
  return fl;
}

}  // namespace

int FeatureLayout::offset_of(const std::string& name) const {
  for (const auto& s : slots)
    if (s.name == name) return s.offset;
  throw EncodeError("unknown feature slot: " + name);
}

const FeatureLayout& feature_layout() {
  static const FeatureLayout fl = build_layout();
  return fl;
}

const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Access: return "access";
    case NodeKind::MapEntry: return "map_entry";
    case NodeKind::MapExit: return "map_exit";
    case NodeKind::Body: return "body";
    case NodeKind::Memlet: return "memlet";
  }
  return "?";
}

int EncodedGraph::index_of(const std::string& origin) const {
  for (size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].origin == origin) return static_cast<int>(i);
  return -1;
}

namespace {

// Interval of one nest iterator's range, for widening out-of-scope
// dimensions; nullopt when the range is data-dependent.
std::optional<ir::Interval> iterator_range(const ir::LoopNest& nest, const std::string& it) {
  std::map<std::string, ir::Interval> env;
  for (const ir::MapScope* s : nest.map_chain()) {
    for (size_t p = 0; p < s->params.size(); ++p) {
      const ir::Extent& e = s->extents[p];
      if (!e.end) return std::nullopt;
      auto b = ir::eval_interval(*e.begin, env);
      auto en = ir::eval_interval(*e.end, env);
      if (!b || !en) {
        if (s->params[p] == it) return std::nullopt;
        // A later iterator may still be resolvable only if it does not
        // depend on this one; record a degenerate range to keep going.
        return std::nullopt;
      }
      const ir::Interval range{b->lo, std::max(b->lo, en->hi - 1)};
      if (s->params[p] == it) return range;
      env[s->params[p]] = range;
    }
  }
  return std::nullopt;
}

}  // namespace

AccessMatrixEncoding encode_access(const ir::LoopNest& nest, const ir::Memlet& memlet) {
  AccessMatrixEncoding enc;
  enc.is_reduction = memlet.reduction != ir::ReduceOp::None;
  enc.reduction_kind = memlet.reduction;
  enc.is_dynamic = memlet.is_dynamic;

  const std::vector<std::string> all_its = nest.nest_iterators();
  const std::vector<std::string> in_scope = ir::segment_scope_iterators(nest, memlet);
  const size_t cols = all_its.size() + 1;

  // Indirect access: subscripts read arrays.
  for (const auto& sub : memlet.subscripts)
    if (ir::reads_arrays(*sub)) enc.is_indirect = true;
  if (enc.is_indirect) return enc;  // empty matrices + flag

  std::vector<std::vector<int64_t>> start, stop;
  std::vector<int64_t> steps;
  for (const auto& sub : memlet.subscripts) {
    auto coeffs = ir::affine_coefficients(*sub, all_its);
    if (!coeffs) {
      // Not affine even over the full iterator set (body-local iterators or
      // non-linear terms): non-affine access.
      enc.is_dynamic = true;
      return enc;
    }
    std::vector<int64_t> row_start(cols, 0), row_stop(cols, 0);
    int64_t step = 0;
    row_start[cols - 1] = (*coeffs)[all_its.size()];
    row_stop[cols - 1] = (*coeffs)[all_its.size()];
    for (size_t i = 0; i < all_its.size(); ++i) {
      const int64_t c = (*coeffs)[i];
      if (c == 0) continue;
      if (std::find(in_scope.begin(), in_scope.end(), all_its[i]) != in_scope.end()) {
        row_start[i] = c;
        row_stop[i] = c;
        continue;
      }
      // Out-of-scope iterator: widen this dimension over its range.
      auto range = iterator_range(nest, all_its[i]);
      if (!range) {
        enc.is_dynamic = true;  // data-dependent range
        return AccessMatrixEncoding{{},
                                    {},
                                    {},
                                    true,
                                    enc.is_indirect,
                                    enc.is_reduction,
                                    enc.reduction_kind};
      }
      if (c > 0) {
        row_start[cols - 1] += c * range->lo;
        row_stop[cols - 1] += c * range->hi;
      } else {
        row_start[cols - 1] += c * range->hi;
        row_stop[cols - 1] += c * range->lo;
      }
      step = step == 0 ? std::abs(c) : std::min(step, std::abs(c));
    }
    start.push_back(std::move(row_start));
    stop.push_back(std::move(row_stop));
    steps.push_back(step);
  }
  enc.start_matrix = std::move(start);
  enc.stop_matrix = std::move(stop);
  enc.steps = std::move(steps);
  return enc;
}

namespace {

void put_kind(std::vector<double>& f, NodeKind k) {
  f[static_cast<size_t>(kKindOffset + static_cast<int>(k))] = 1.0;
}

std::vector<double> access_features(const ir::DataArray& a) {
  std::vector<double> f(kWidth, 0.0);
  put_kind(f, NodeKind::Access);
  int dtype_idx = 0;
  switch (a.elem_type) {
    case ir::ElemType::F32: dtype_idx = 0; break;
    case ir::ElemType::F64: dtype_idx = 1; break;
    case ir::ElemType::I32: dtype_idx = 2; break;
    case ir::ElemType::I64: dtype_idx = 3; break;
    case ir::ElemType::Bool: dtype_idx = 4; break;
  }
  f[kDtypeOffset + dtype_idx] = 1.0;
  f[kBytesOffset] = static_cast<double>(a.bytes);
  if (a.shape.size() > FeatureLayout::kMaxRank)
    throw EncodeError("array '" + a.name + "' exceeds the maximum encodable rank");
  for (size_t d = 0; d < a.shape.size(); ++d)
    f[kShapeOffset + d] = a.shape[d] == ir::kDynamicDim ? 0.0 : slog(static_cast<double>(a.shape[d]));
  f[kTotalSizeOffset] = slog(static_cast<double>(a.total_elements()));
  for (size_t d = 0; d < a.strides.size() && d < FeatureLayout::kMaxRank; ++d)
    f[kStridesOffset + d] = slog(static_cast<double>(a.strides[d]));
  f[kAlignOffset] = slog(static_cast<double>(a.alignment));
  f[kArrOffsetOffset] = slog(static_cast<double>(a.offset));
  f[kTransientOffset] = a.transient ? 1.0 : 0.0;
  f[kStorageOffset + (a.storage == ir::Storage::Heap ? 0 : 1)] = 1.0;
  return f;
}

std::vector<double> map_entry_features(const ir::LoopNest& nest, const ir::MapScope& m) {
  std::vector<double> f(kWidth, 0.0);
  put_kind(f, NodeKind::MapEntry);
  f[kMapLevelOffset] = static_cast<double>(m.level);
  f[kMapDimsOffset] = static_cast<double>(m.params.size());
  if (m.params.size() > FeatureLayout::kMaxRank)
    throw EncodeError("map '" + m.id + "' exceeds the maximum encodable dimensionality");
  bool dynamic = false;
  for (size_t d = 0; d < m.extents.size(); ++d) {
    const ir::Extent& e = m.extents[d];
    if (ir::classify_extent(nest, m, e) == ir::ExtentKind::Dynamic) {
      dynamic = true;
      f[kMapExtentsOffset + d] = 0.0;
    } else {
      auto trip = ir::extent_trip_upper_bound(nest, m, e);
      if (!trip) {
        dynamic = true;
        f[kMapExtentsOffset + d] = 0.0;
      } else {
        f[kMapExtentsOffset + d] = slog(static_cast<double>(*trip));
      }
    }
    f[kMapStepsOffset + d] = static_cast<double>(e.step);
  }
  f[kMapDynamicOffset] = dynamic ? 1.0 : 0.0;
  return f;
}

std::vector<double> plain_features(NodeKind k) {
  std::vector<double> f(kWidth, 0.0);
  put_kind(f, k);
  return f;
}

std::vector<double> memlet_features(const ir::LoopNest& nest, const ir::Memlet& m) {
  std::vector<double> f(kWidth, 0.0);
  put_kind(f, NodeKind::Memlet);
  const AccessMatrixEncoding enc = encode_access(nest, m);
  const size_t iters = nest.nest_iterators().size();
  if (iters > FeatureLayout::kMaxIters)
    throw EncodeError("loop nest exceeds the maximum encodable iterator count");
  if (enc.start_matrix.size() > FeatureLayout::kMaxRank)
    throw EncodeError("memlet '" + m.id + "' exceeds the maximum encodable rank");
  constexpr int kCols = FeatureLayout::kMaxIters + 1;
  for (size_t r = 0; r < enc.start_matrix.size(); ++r) {
    const auto& row_s = enc.start_matrix[r];
    const auto& row_e = enc.stop_matrix[r];
    // Rows carry iterator columns first (padded), constant last.
    for (size_t c = 0; c + 1 < row_s.size(); ++c) {
      f[kStartMatrixOffset + r * kCols + c] = slog(static_cast<double>(row_s[c]));
      f[kStopMatrixOffset + r * kCols + c] = slog(static_cast<double>(row_e[c]));
    }
    f[kStartMatrixOffset + r * kCols + (kCols - 1)] = slog(static_cast<double>(row_s.back()));
    f[kStopMatrixOffset + r * kCols + (kCols - 1)] = slog(static_cast<double>(row_e.back()));
  }
  for (size_t r = 0; r < enc.steps.size() && r < FeatureLayout::kMaxRank; ++r)
    f[kMemletStepsOffset + r] = static_cast<double>(enc.steps[r]);
  f[kMemletDynamicOffset] = enc.is_dynamic ? 1.0 : 0.0;
  f[kMemletIndirectOffset] = enc.is_indirect ? 1.0 : 0.0;
  f[kMemletReductionOffset] = enc.is_reduction ? 1.0 : 0.0;
  if (enc.reduction_kind != ir::ReduceOp::None) {
    const int idx = enc.reduction_kind == ir::ReduceOp::Sum ? 0
                    : enc.reduction_kind == ir::ReduceOp::Min ? 1 : 2;
    f[kReductionKindOffset + idx] = 1.0;
  }
  return f;
}

std::string access_origin(const ir::NodeRef& ref, bool as_src) {
  return ref.name + (as_src ? "@in" : "@out");
}

std::string endpoint_origin(const ir::NodeRef& ref, bool as_src) {
  switch (ref.kind) {
    case ir::NodeRef::Kind::Array: return access_origin(ref, as_src);
    case ir::NodeRef::Kind::MapEntry: return ref.name + "#entry";
    case ir::NodeRef::Kind::MapExit: return ref.name + "#exit";
    case ir::NodeRef::Kind::Body: return "#body";
  }
  return "?";
}

}  // namespace

EncodedGraph encode_static(const ir::LoopNest& nest) {
  const auto violations = ir::validate(nest);
  if (!violations.empty())
    throw EncodeError("encode_static: invalid loop nest: " + violations.front().message);

  EncodedGraph g;
  g.layout_version = feature_layout().version;

  struct NodeInfo {
    NodeKind kind;
    std::vector<double> features;
  };
  std::map<std::string, NodeInfo> nodes;  // origin -> info
  std::vector<std::pair<std::string, std::string>> edges;

  for (const ir::MapScope* m : nest.map_chain()) {
    nodes[m->id + "#entry"] = {NodeKind::MapEntry, map_entry_features(nest, *m)};
    nodes[m->id + "#exit"] = {NodeKind::MapExit, plain_features(NodeKind::MapExit)};
  }
  nodes["#body"] = {NodeKind::Body, plain_features(NodeKind::Body)};

  for (const auto& m : nest.memlets) {
    const std::string src = endpoint_origin(m.src, true);
    const std::string dst = endpoint_origin(m.dst, false);
    if (m.src.kind == ir::NodeRef::Kind::Array)
      nodes.emplace(src, NodeInfo{NodeKind::Access, access_features(*nest.find_array(m.src.name))});
    if (m.dst.kind == ir::NodeRef::Kind::Array)
      nodes.emplace(dst, NodeInfo{NodeKind::Access, access_features(*nest.find_array(m.dst.name))});
    nodes[m.id] = {NodeKind::Memlet, memlet_features(nest, m)};
    edges.emplace_back(src, m.id);
    edges.emplace_back(m.id, dst);
  }

  // Topological order, ties by node id.
  std::map<std::string, std::vector<std::string>> adj;
  std::map<std::string, int> indeg;
  for (const auto& [id, info] : nodes) indeg[id] = 0;
  for (const auto& [a, b] : edges) {
    adj[a].push_back(b);
    indeg[b]++;
  }
  std::set<std::string> ready;
  for (const auto& [id, d] : indeg)
    if (d == 0) ready.insert(id);
  std::vector<std::string> order;
  while (!ready.empty()) {
    const std::string id = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(id);
    for (const auto& nxt : adj[id])
      if (--indeg[nxt] == 0) ready.insert(nxt);
  }
  if (order.size() != nodes.size()) throw EncodeError("encode_static: graph not acyclic");

  std::map<std::string, int> index;
  for (const auto& id : order) {
    index[id] = static_cast<int>(g.nodes.size());
    g.nodes.push_back({nodes[id].kind, id, std::move(nodes[id].features)});
  }
  for (const auto& [a, b] : edges) g.edges.emplace_back(index.at(a), index.at(b));
  return g;
}

std::string export_text(const EncodedGraph& g) {
  std::ostringstream os;
  os << "perfembed-encoding v1 layout " << g.layout_version << "\n";
  os << "nodes " << g.nodes.size() << " width "
     << (g.nodes.empty() ? feature_layout().width : static_cast<int>(g.nodes[0].features.size()))
     << "\n";
  for (size_t i = 0; i < g.nodes.size(); ++i) {
    os << "node " << i << " " << to_string(g.nodes[i].kind) << " " << g.nodes[i].origin;
    for (double v : g.nodes[i].features) os << " " << format_double(v);
    os << "\n";
  }
  os << "edges " << g.edges.size() << "\n";
  for (const auto& [a, b] : g.edges) os << "edge " << a << " " << b << "\n";
  return os.str();
}

}  // namespace perfembed::encoder
