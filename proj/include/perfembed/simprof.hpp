#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "perfembed/bindings.hpp"
#include "perfembed/ir.hpp"

namespace perfembed::simprof {

// Simulated machine. Caches are fully associative LRU with 64-byte lines;
// L1/L2 are private per thread, L3 is shared.
struct MachineConfig {
  int64_t threads = 4;
  int64_t l1_bytes = 32 * 1024;
  int64_t l2_bytes = 1024 * 1024;
  int64_t l3_bytes = 8 * 1024 * 1024;
  int64_t lat_l1 = 4;
  int64_t lat_l2 = 14;
  int64_t lat_l3 = 40;
  int64_t lat_mem = 200;
  int64_t op_cost = 1;
  int64_t mispredict_penalty = 15;
  int64_t dispatch_cycles = 50;  // per dynamically claimed chunk

  static constexpr int64_t kLineBytes = 64;

  std::string serialize() const;                    // key = value lines
  static MachineConfig parse(const std::string&);   // missing keys keep defaults
  uint64_t fingerprint() const;
};

// The 19 simulated counters (one slot per hardware counter of the dynamic
// encoding; enum order is the documented export order).
struct CounterSet {
  int64_t instructions = 0;
  int64_t fp32_scalar = 0, fp32_p128 = 0, fp32_p256 = 0, fp32_p512 = 0;
  int64_t fp64_scalar = 0, fp64_p128 = 0, fp64_p256 = 0, fp64_p512 = 0;
  int64_t branches = 0, branch_mispredicts = 0;
  int64_t loads = 0, stores = 0;
  int64_t mem_read_lines = 0, mem_write_lines = 0;
  int64_t l3_lines_in = 0, l3_writeback_lines = 0;
  int64_t l1d_replacement = 0, l1d_evict = 0;

  static constexpr int kCount = 19;
  int64_t get(int i) const;
  static const char* name(int i);
  CounterSet& operator+=(const CounterSet& o);
};

// 95 = 19 counters x {min, max, mean, std, sum} over threads, counter-major.
struct DynamicProfile {
  static constexpr int kSize = 95;
  std::array<double, kSize> values{};
  static std::string column_name(int i);
};

// The 20 target metrics, in documented order.
enum class Target : int {
  RuntimeCycles = 0,
  Ipc,
  MemReadBandwidth,   // bytes / cycle
  MemWriteBandwidth,
  L3LoadBandwidth,    // L3 -> L2 fills
  L3EvictBandwidth,   // L2 -> L3 writebacks
  L2LoadBandwidth,    // L2 -> L1 fills
  L2EvictBandwidth,   // L1 -> L2 writebacks
  L1MissRatio,
  L2MissRatio,
  L3MissRatio,
  BranchRate,
  MispredictRatio,
  Fp32ScalarRate,
  Fp32PackedRate,
  Fp64ScalarRate,
  Fp64PackedRate,
  LoadRate,
  StoreRate,
  ArithmeticIntensity,  // flops per byte moved from/to main memory
};

struct TargetMetrics {
  static constexpr int kSize = 20;
  std::array<double, kSize> values{};
  double operator[](Target t) const { return values[static_cast<int>(t)]; }
  static const char* name(int i);
};

struct TraceStats {
  uint64_t unique_lines = 0;
  uint64_t unique_bytes() const { return unique_lines * MachineConfig::kLineBytes; }
};

struct SimResult {
  std::vector<CounterSet> per_thread;
  std::vector<int64_t> thread_cycles;
  int64_t runtime_cycles = 0;  // max over threads
  TraceStats trace;
  CounterSet totals() const;
};

struct SimOptions {
  // If > 0, only the first N outermost iterations run (canonical order).
  int64_t max_outer_iterations = 0;
  bool force_single_thread = false;
};

struct SimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Deterministic machine simulation. Mutates the bound arrays (the nest's
// functional effect) and returns per-thread counters and cycles.
SimResult simulate(const ir::LoopNest& nest, InputBindings& inputs,
                   const MachineConfig& machine, const SimOptions& options = {});

// Plain interpreter: canonical sequential iteration order, no machine model.
// Used as the functional oracle for simulate and the transformation checks.
void interpret_reference(const ir::LoopNest& nest, InputBindings& inputs);

DynamicProfile aggregate_profile(const SimResult& result);
TargetMetrics compute_targets(const SimResult& result, const MachineConfig& machine);

// Warmup pass (caches persist, array contents restored) followed by one
// measured pass; returns the measured pass's profile and targets.
std::pair<DynamicProfile, TargetMetrics> measure(const ir::LoopNest& nest,
                                                 InputBindings& inputs,
                                                 const MachineConfig& machine);

std::string profile_csv(const DynamicProfile& p);
std::string targets_csv(const TargetMetrics& t);
DynamicProfile profile_from_csv(const std::string& text);
TargetMetrics targets_from_csv(const std::string& text);

}  // namespace perfembed::simprof
