#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "perfembed/expr.hpp"

namespace perfembed {

// Concrete storage for one array: raw little-endian element data.
struct ArrayBuffer {
  ir::ElemType type = ir::ElemType::F64;
  std::vector<int64_t> shape;
  std::vector<uint8_t> data;

  size_t elem_bytes() const { return static_cast<size_t>(ir::bytes_per_element(type)); }
  size_t elem_count() const { return data.empty() ? 0 : data.size() / elem_bytes(); }

  static ArrayBuffer make(ir::ElemType t, std::vector<int64_t> shape);

  double load_float(size_t idx) const;
  int64_t load_int(size_t idx) const;
  void store_float(size_t idx, double v);
  void store_int(size_t idx, int64_t v);

  bool operator==(const ArrayBuffer&) const = default;
};

// Input bindings: concrete arrays for every array of a nest (including
// transient outputs) plus anything read by dynamic extents.
struct InputBindings {
  std::map<std::string, ArrayBuffer> arrays;

  bool operator==(const InputBindings&) const = default;

  // Persists as <stem>.bind (text manifest) + <stem>.bin (raw blob).
  void save(const std::filesystem::path& stem) const;
  static InputBindings load(const std::filesystem::path& stem);
};

}  // namespace perfembed
