#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "perfembed/ir.hpp"

namespace perfembed::transform {

enum class TransformKind { Interchange, Tile, Parallelize, SetSchedule, Vectorize };
const char* to_string(TransformKind k);

struct Transformation {
  TransformKind kind = TransformKind::Interchange;
  std::string map_a;  // primary map id
  std::string map_b;  // interchange partner
  int64_t tile_size = 0;
  int64_t threads = 0;
  ir::Assignment assignment = ir::Assignment::Static;
  int64_t chunk = 0;
  int vector_width = 1;

  // IR node ids the transformation touches (map entry nodes).
  std::vector<std::string> anchors() const;
  std::string to_line() const;
  static Transformation from_line(const std::string& line);

  static Transformation interchange(std::string a, std::string b);
  static Transformation tile(std::string m, int64_t size);
  static Transformation parallelize(std::string m, int64_t threads);
  static Transformation set_schedule_static(std::string m);
  static Transformation set_schedule_dynamic(std::string m, int64_t chunk);
  static Transformation vectorize(std::string m, int width);
};

using TransformationSequence = std::vector<Transformation>;

std::string sequence_to_text(const TransformationSequence& seq);
TransformationSequence sequence_from_text(const std::string& text);

struct TransformError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Applicability {
  bool ok = false;
  std::string reason;
};

Applicability applicable(const Transformation& t, const ir::LoopNest& nest);

// Applies an applicable transformation, returning a new valid nest with
// unchanged functional semantics. Throws TransformError (with the
// applicability reason) otherwise.
ir::LoopNest apply(const Transformation& t, const ir::LoopNest& nest);

// Encoded-graph node ids (origins) of the transformation's subgraph: the
// anchor map-entry nodes plus their incident memlet nodes, anchors first,
// then memlets by id.
std::vector<std::string> induced_subgraph(const Transformation& t, const ir::LoopNest& nest);

struct SpaceLimits {
  std::vector<int64_t> tile_sizes{8, 32};
  std::vector<int> vector_widths{4};
  std::vector<int64_t> chunk_sizes{8};
  std::vector<int64_t> thread_counts{};  // empty: no parallelize steps
  int max_length = 3;
  bool include_static_schedule = false;
};

// Every applicable transformation sequence up to max_length, in a
// deterministic order; the first element is always the empty sequence.
// Enumeration policy: per sequence, one tile per map (tile loops are never
// re-tiled), vectorize / set_schedule / parallelize at most once, and each
// unordered map pair interchanged at most once.
std::vector<TransformationSequence> enumerate_space(const ir::LoopNest& nest,
                                                    const SpaceLimits& limits);

}  // namespace perfembed::transform
