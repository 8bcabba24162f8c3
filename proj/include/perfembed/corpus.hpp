#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "perfembed/bindings.hpp"
#include "perfembed/ir.hpp"

namespace perfembed::corpus {

enum class KernelKind {
  Map,
  Reduction,
  Stencil,
  Matmul,
  MinplusMatmul,
  BooleanMask,
  CsrSpmm,
  CsrSpmv,
  PrimeFilter,
  Blur,
  Histogram,
};

const char* to_string(KernelKind k);
KernelKind kernel_kind_from_string(const std::string& s);
std::vector<KernelKind> all_kinds();

struct KernelSpec {
  KernelKind kind = KernelKind::Map;
  std::map<std::string, int64_t> sizes;
  uint64_t seed = 0;
  ir::ElemType dtype = ir::ElemType::F64;

  int64_t size(const std::string& name) const;  // throws on missing parameter
  std::string to_line() const;
  static KernelSpec from_line(const std::string& line);
};

struct CorpusError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Deterministic kernel generation: a validated, canonically scheduled nest
// plus seeded concrete inputs (outputs zeroed, min-plus outputs +1e30).
std::pair<ir::LoopNest, InputBindings> generate_kernel(const KernelSpec& spec);

struct SparseMatrixCSR {
  int64_t rows = 0, cols = 0;
  std::vector<int64_t> row_ptr;
  std::vector<int64_t> col_idx;
  std::vector<double> values;
  int64_t nnz() const { return static_cast<int64_t>(col_idx.size()); }
};

// Matrix Market coordinate reader (real/integer/pattern, general/symmetric).
// Symmetric inputs are expanded, duplicates summed, pattern entries become 1.
SparseMatrixCSR load_matrix_market(const std::filesystem::path& path);
SparseMatrixCSR parse_matrix_market(const std::string& text);

// Synthetic CSR with uniform (exactly nnz_per_row entries per row) or
// power-law row lengths (Pareto tail with the given exponent).
SparseMatrixCSR synth_csr(int64_t rows, int64_t cols, int64_t nnz_per_row, bool power_law,
                          double exponent, uint64_t seed);

// SpMM / SpMV nests over an explicit sparse matrix.
std::pair<ir::LoopNest, InputBindings> spmm_from_csr(const SparseMatrixCSR& m,
                                                     int64_t dense_cols, ir::ElemType dtype,
                                                     uint64_t seed);
std::pair<ir::LoopNest, InputBindings> spmv_from_csr(const SparseMatrixCSR& m,
                                                     ir::ElemType dtype, uint64_t seed);

struct DatasetCounts {
  int train = 300;
  int val = 60;
  int test = 60;
};

// Per-kind size presets are indexed 0..3; a range narrows the draw.
struct SizeRanges {
  int min_preset = 0;
  int max_preset = 3;
};

struct ManifestEntry {
  std::string id;
  std::string split;  // train | val | test
  KernelSpec spec;
  std::string nest_path;      // relative to the manifest directory
  std::string bindings_stem;  // relative stem (.bind/.bin appended)
};

struct CorpusManifest {
  uint64_t seed = 0;
  std::string ranges_note;
  std::vector<ManifestEntry> entries;

  std::string serialize() const;
  static CorpusManifest parse(const std::string& text);
  std::vector<const ManifestEntry*> split(const std::string& name) const;
};

// Generates nests + bindings under outdir (nests/, bindings/) and returns the
// manifest (also written to outdir/manifest.txt). Reproducible from seed.
CorpusManifest generate_dataset(const DatasetCounts& counts, const SizeRanges& ranges,
                                uint64_t seed, const std::filesystem::path& outdir);

KernelSpec preset_spec(KernelKind kind, int preset, uint64_t seed);

}  // namespace perfembed::corpus
