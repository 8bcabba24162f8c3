#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "perfembed/ir.hpp"

namespace perfembed::encoder {

// Fixed feature layout, versioned: encoding and model files carry the version
// string and refuse to mix layouts.
struct SlotInfo {
  std::string name;
  int offset;
  int width;
};

struct FeatureLayout {
  static constexpr int kMaxRank = 4;   // array dimensions
  static constexpr int kMaxIters = 8;  // iterator columns of access matrices
  std::string version;
  int width = 0;
  std::vector<SlotInfo> slots;

  int offset_of(const std::string& name) const;
};

const FeatureLayout& feature_layout();

enum class NodeKind : int { Access = 0, MapEntry, MapExit, Body, Memlet };
const char* to_string(NodeKind k);

// Polyhedral-style access range of one memlet segment. Matrices have one row
// per array dimension; columns follow the nest's iterator order (outermost
// first) with a trailing constant column. Non-affine accesses carry empty
// matrices and the matching flag.
struct AccessMatrixEncoding {
  std::vector<std::vector<int64_t>> start_matrix;
  std::vector<std::vector<int64_t>> stop_matrix;
  std::vector<int64_t> steps;
  bool is_dynamic = false;
  bool is_indirect = false;
  bool is_reduction = false;
  ir::ReduceOp reduction_kind = ir::ReduceOp::None;
};

struct EncodedNode {
  NodeKind kind = NodeKind::Body;
  std::string origin;  // IR node id; memlet nodes use the memlet id
  std::vector<double> features;
};

struct EncodedGraph {
  std::string layout_version;
  std::vector<EncodedNode> nodes;
  std::vector<std::pair<int, int>> edges;  // directed, indices into nodes

  int index_of(const std::string& origin) const;  // -1 if absent
};

struct EncodeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

AccessMatrixEncoding encode_access(const ir::LoopNest& nest, const ir::Memlet& memlet);

// Static graph encoding: every IR memlet becomes an intermediate node with
// two edges; node order is topological with ties broken by node id.
EncodedGraph encode_static(const ir::LoopNest& nest);

std::string export_text(const EncodedGraph& g);

}  // namespace perfembed::encoder
