#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "perfembed/expr.hpp"

namespace perfembed::ir {

enum class Storage { Heap, Register };
enum class Direction { Read, Write };
enum class ReduceOp { None, Sum, Min, Max };
enum class Assignment { Static, Dynamic };

// Shape entries: >= 1 for static dimensions, kDynamicDim for data-dependent.
constexpr int64_t kDynamicDim = -1;

struct DataArray {
  std::string name;
  ElemType elem_type = ElemType::F64;
  int bytes = 8;
  std::vector<int64_t> shape;    // elements per dim, kDynamicDim if unknown
  std::vector<int64_t> strides;  // in elements
  bool transient = false;
  int64_t alignment = 64;        // bytes
  int64_t offset = 0;            // elements
  Storage storage = Storage::Heap;

  int64_t total_elements() const;  // 0 if any dim dynamic
  bool operator==(const DataArray&) const = default;
};

struct ScheduleAnnotation {
  bool parallel = false;
  Assignment assignment = Assignment::Static;
  int64_t chunk = 0;  // > 0 iff assignment == Dynamic
  int64_t threads = 1;
  int vector_width = 1;  // lanes; innermost scope only

  bool operator==(const ScheduleAnnotation&) const = default;
};

struct Extent {
  ExprPtr begin;
  ExprPtr end;  // exclusive
  int64_t step = 1;
};

bool structurally_equal(const Extent& a, const Extent& b);

enum class ExtentKind { Constant, Affine, Dynamic };

struct MapScope {
  std::string id;
  std::vector<std::string> params;
  std::vector<Extent> extents;  // one per param
  int level = 0;                // number of enclosing map scopes
  std::string parent;           // empty for the root map
  ScheduleAnnotation schedule;
};

bool structurally_equal(const MapScope& a, const MapScope& b);

// --- Body statements -------------------------------------------------------

struct Stmt;
using StmtPtr = std::shared_ptr<const Stmt>;

struct AssignStmt {
  std::string target;               // array name, or local name if subscripts empty
  std::vector<ExprPtr> subscripts;  // empty => local scalar target
  ReduceOp reduce = ReduceOp::None;
  ExprPtr value;
};

struct LocalStmt {
  std::string name;
  ElemType type = ElemType::F64;
  ExprPtr init;
};

struct IfStmt {
  ExprPtr cond;
  std::vector<StmtPtr> then_body;
  std::vector<StmtPtr> else_body;
};

// C-style sequential loop: for (iter = init; cond; iter += step).
struct ForStmt {
  std::string iter;
  ExprPtr init;
  ExprPtr cond;
  int64_t step = 1;
  std::vector<StmtPtr> body;
};

struct Stmt {
  std::variant<AssignStmt, LocalStmt, IfStmt, ForStmt> node;
};

StmtPtr make_stmt(AssignStmt s);
StmtPtr make_stmt(LocalStmt s);
StmtPtr make_stmt(IfStmt s);
StmtPtr make_stmt(ForStmt s);

bool structurally_equal(const StmtPtr& a, const StmtPtr& b);

// --- Memlets and the dataflow graph ----------------------------------------

// Node references in memlets: an array name ("A"), "<map>.entry",
// "<map>.exit", or "body".
struct NodeRef {
  enum class Kind { Array, MapEntry, MapExit, Body };
  Kind kind = Kind::Body;
  std::string name;  // array or map id

  static std::optional<NodeRef> parse(const std::string& text);
  std::string to_text() const;
  bool operator==(const NodeRef&) const = default;
};

struct Memlet {
  std::string id;
  NodeRef src;
  NodeRef dst;
  std::string array;
  std::vector<ExprPtr> subscripts;  // innermost point access
  Direction direction = Direction::Read;
  bool is_affine = false;   // derived; see analyze_memlet
  bool is_dynamic = false;  // derived
  ReduceOp reduction = ReduceOp::None;
};

bool structurally_equal(const Memlet& a, const Memlet& b);

struct Violation {
  std::string node;
  std::string message;
};

struct LoopNest {
  std::vector<DataArray> arrays;
  std::vector<MapScope> maps;  // root first, then by nesting depth
  std::vector<StmtPtr> body;
  std::vector<Memlet> memlets;

  const DataArray* find_array(const std::string& name) const;
  const MapScope* find_map(const std::string& id) const;
  const MapScope& root_map() const;
  // Params of all maps from root to innermost (the nest's iterator order).
  std::vector<std::string> nest_iterators() const;
  // Maps ordered root -> innermost (validated nests form a chain).
  std::vector<const MapScope*> map_chain() const;
  int depth() const { return static_cast<int>(maps.size()); }
};

bool structurally_equal(const LoopNest& a, const LoopNest& b);

// Iterators in scope on a memlet segment: the params of every map scope that
// encloses the edge (see graph structure in the encoder).
std::vector<std::string> segment_scope_iterators(const LoopNest& nest, const Memlet& m);

// Recomputes is_affine / is_dynamic for one memlet segment. is_affine holds
// iff every subscript is an integer-affine function of the segment's in-scope
// iterators; is_dynamic flags indirect subscripts or a data-dependent range
// for an out-of-scope iterator.
void analyze_memlet(const LoopNest& nest, Memlet& m);
// Runs analyze_memlet over all memlets (builders call this once).
void analyze_all_memlets(LoopNest& nest);

ExtentKind classify_extent(const LoopNest& nest, const MapScope& map, const Extent& e);

// Upper bound on the trip count of one extent, via interval analysis over the
// enclosing iterators' ranges; nullopt for data-dependent extents.
std::optional<int64_t> extent_trip_upper_bound(const LoopNest& nest, const MapScope& map,
                                               const Extent& e);

std::vector<Violation> validate(const LoopNest& nest);

// Root map parallel/static with the given thread count, every inner map
// sequential. Idempotent.
LoopNest canonical_schedule(const LoopNest& nest, int64_t threads);

const char* to_string(Storage s);
const char* to_string(Direction d);
const char* to_string(ReduceOp r);
const char* to_string(Assignment a);

}  // namespace perfembed::ir
