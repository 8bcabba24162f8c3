#include "perfembed/bindings.hpp"

#include <cstring>
#include <sstream>

#include "perfembed/util.hpp"

namespace perfembed {

ArrayBuffer ArrayBuffer::make(ir::ElemType t, std::vector<int64_t> shape) {
  ArrayBuffer b;
  b.type = t;
  b.shape = std::move(shape);
  int64_t n = 1;
  for (int64_t d : b.shape) n *= d;
  b.data.assign(static_cast<size_t>(n) * b.elem_bytes(), 0);
  return b;
}

double ArrayBuffer::load_float(size_t idx) const {
  if (type == ir::ElemType::F32) {
    float v;
    std::memcpy(&v, data.data() + idx * 4, 4);
    return v;
  }
  double v;
  std::memcpy(&v, data.data() + idx * 8, 8);
  return v;
}

int64_t ArrayBuffer::load_int(size_t idx) const {
  switch (type) {
    case ir::ElemType::I32: {
      int32_t v;
      std::memcpy(&v, data.data() + idx * 4, 4);
      return v;
    }
    case ir::ElemType::I64: {
      int64_t v;
      std::memcpy(&v, data.data() + idx * 8, 8);
      return v;
    }
    case ir::ElemType::Bool:
      return data[idx] != 0;
    default:
      return static_cast<int64_t>(load_float(idx));
  }
}

void ArrayBuffer::store_float(size_t idx, double v) {
  if (type == ir::ElemType::F32) {
    const float f = static_cast<float>(v);
    std::memcpy(data.data() + idx * 4, &f, 4);
  } else {
    std::memcpy(data.data() + idx * 8, &v, 8);
  }
}

void ArrayBuffer::store_int(size_t idx, int64_t v) {
  switch (type) {
    case ir::ElemType::I32: {
      const int32_t x = static_cast<int32_t>(v);
      std::memcpy(data.data() + idx * 4, &x, 4);
      break;
    }
    case ir::ElemType::I64:
      std::memcpy(data.data() + idx * 8, &v, 8);
      break;
    case ir::ElemType::Bool:
      data[idx] = v != 0 ? 1 : 0;
      break;
    default:
      store_float(idx, static_cast<double>(v));
  }
}

void InputBindings::save(const std::filesystem::path& stem) const {
  std::ostringstream manifest;
  manifest << "perfembed-bindings v1\n";
  std::vector<uint8_t> blob;
  for (const auto& [name, buf] : arrays) {
    manifest << name << " " << ir::to_string(buf.type) << " [";
    for (size_t i = 0; i < buf.shape.size(); ++i) {
      if (i) manifest << ",";
      manifest << buf.shape[i];
    }
    manifest << "] offset " << blob.size() << " bytes " << buf.data.size() << "\n";
    blob.insert(blob.end(), buf.data.begin(), buf.data.end());
  }
  write_text_file(stem.string() + ".bind", manifest.str());
  write_binary_file(stem.string() + ".bin", blob.data(), blob.size());
}

InputBindings InputBindings::load(const std::filesystem::path& stem) {
  const std::string manifest = read_text_file(stem.string() + ".bind");
  const std::vector<uint8_t> blob = read_binary_file(stem.string() + ".bin");
  InputBindings out;
  std::istringstream in(manifest);
  std::string line;
  if (!std::getline(in, line) || line != "perfembed-bindings v1")
    throw IoError("bad bindings manifest header: " + stem.string());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string name, type_s, shape_s, kw1, kw2;
    size_t offset = 0, bytes = 0;
    ls >> name >> type_s >> shape_s >> kw1 >> offset >> kw2 >> bytes;
    if (!ls || kw1 != "offset" || kw2 != "bytes")
      throw IoError("bad bindings manifest line: " + line);
    auto et = ir::elem_type_from_string(type_s);
    if (!et) throw IoError("bad element type in bindings: " + type_s);
    ArrayBuffer buf;
    buf.type = *et;
    // shape like [2,3]
    std::string dims = shape_s.substr(1, shape_s.size() - 2);
    std::istringstream ds(dims);
    std::string d;
    while (std::getline(ds, d, ','))
      if (!d.empty()) buf.shape.push_back(std::stoll(d));
    if (offset + bytes > blob.size()) throw IoError("bindings blob too short");
    buf.data.assign(blob.begin() + static_cast<ptrdiff_t>(offset),
                    blob.begin() + static_cast<ptrdiff_t>(offset + bytes));
    out.arrays.emplace(name, std::move(buf));
  }
  return out;
}

}  // namespace perfembed
