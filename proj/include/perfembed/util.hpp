#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace perfembed {

// Deterministic xoshiro256** generator. All randomness in the toolkit flows
// through this type so results are reproducible across platforms and stdlib
// implementations (std::uniform_* distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();
  // Uniform integer in [lo, hi] (inclusive).
  int64_t uniform_int(int64_t lo, int64_t hi);
  // Uniform double in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  // Standard normal via Box-Muller.
  double normal();
  // Fisher-Yates shuffle of indices [0, n).
  std::vector<size_t> permutation(size_t n);

 private:
  uint64_t s_[4];
};

// FNV-1a over a byte string; used for model fingerprints.
uint64_t fnv1a(const void* data, size_t n, uint64_t h = 1469598103934665603ull);
std::string to_hex(uint64_t v);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

std::vector<uint8_t> read_binary_file(const std::filesystem::path& path);
void write_binary_file(const std::filesystem::path& path, const void* data, size_t n);

// Exact decimal round-trip formatting for doubles (shortest representation).
std::string format_double(double v);

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace perfembed
