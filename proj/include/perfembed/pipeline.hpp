#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "perfembed/corpus.hpp"
#include "perfembed/model.hpp"
#include "perfembed/tuning.hpp"

namespace perfembed::pipeline {

namespace fs = std::filesystem;

// Small-cache machine used for the desk-scale experiments, so that the
// generated corpus spans cache-resident and streaming behavior.
simprof::MachineConfig desk_machine();
simprof::MachineConfig machine_from_flag(const std::string& flag);  // desk|default|<file>

ir::LoopNest load_nest(const fs::path& corpus_dir, const corpus::ManifestEntry& e);
InputBindings load_bindings(const fs::path& corpus_dir, const corpus::ManifestEntry& e);
corpus::CorpusManifest load_manifest(const fs::path& corpus_dir);

// profile: measured profile/targets per nest -> <profiles>/<id>.profile.csv,
// <id>.targets.csv and a summary file.
void run_profile(const fs::path& corpus_dir, const fs::path& profiles_dir,
                 const simprof::MachineConfig& machine);

std::vector<model::Sample> load_samples(const fs::path& corpus_dir,
                                        const fs::path& profiles_dir,
                                        const corpus::CorpusManifest& manifest,
                                        const std::string& split);

model::Model run_train(const fs::path& corpus_dir, const fs::path& profiles_dir,
                       const model::TrainConfig& tc, const model::ModelConfig& mc,
                       const fs::path& model_file, const fs::path& history_csv);

struct DbBuildRow {
  std::string id;
  size_t space_size = 0;
  double baseline_cost = 0.0;
  double best_cost = 0.0;
  bool stored = false;
};

struct DbBuildReport {
  std::vector<DbBuildRow> rows;
  std::string to_csv() const;
  static DbBuildReport from_csv(const std::string& text);
};

// dbbuild over one split; oracle results are persisted next to the db file.
tuning::Database run_dbbuild(const fs::path& corpus_dir, const corpus::CorpusManifest& manifest,
                             const std::string& split, const model::Model& m,
                             const simprof::MachineConfig& machine,
                             const transform::SpaceLimits& limits, const fs::path& db_file,
                             const fs::path& report_csv, DbBuildReport* report_out = nullptr);

struct TuneEvalRow {
  std::string id;
  double baseline = 0.0;
  double transfer_cost = 0.0;
  double oracle_cost = 0.0;
  size_t space_size = 0;
  int evaluations = 0;
  std::string chosen_neighbor;
};

struct TuneEvalReport {
  std::vector<TuneEvalRow> rows;
  std::string to_csv() const;
};

// Leave-one-out transfer tuning over a split, compared against the stored
// oracle results.
TuneEvalReport run_tune_eval(const fs::path& corpus_dir, const corpus::CorpusManifest& manifest,
                             const std::string& split, const tuning::Database& db,
                             const model::Model& m, const simprof::MachineConfig& machine,
                             int k, const DbBuildReport& oracle,
                             const fs::path& out_csv);

struct SimilarityEvalResult {
  // metric -> (model mean CoV, baseline mean CoV)
  std::map<std::string, std::pair<double, double>> cov;
  int excluded_model = 0;
  int excluded_baseline = 0;
  std::string to_csv() const;
};

// Table-1 analog on one split: model embeddings vs z-scored reuse-distance
// features, CoV over {main memory, L3, L2 bandwidth, data locality}.
SimilarityEvalResult run_similarity_eval(const fs::path& corpus_dir,
                                         const corpus::CorpusManifest& manifest,
                                         const std::string& split, const model::Model& m,
                                         const simprof::MachineConfig& machine,
                                         const fs::path& out_csv,
                                         const fs::path& embeddings_csv);

struct SpmmOptions {
  int train_matrices = 24;
  int test_uniform = 5;
  int test_power_law = 5;
  int64_t rows = 384;
  int64_t kdim = 384;
  int64_t nnz_per_row = 8;
  int64_t dense_cols = 512;  // scalable down via CLI flag
  double exponent = 1.6;
  int64_t chunk = 8;
  uint64_t seed = 77;
};

struct SpmmRow {
  std::string id;
  bool power_law = false;
  double static_cost = 0.0;
  double dynamic_cost = 0.0;
  bool optimal_dynamic = false;
  bool decided_dynamic = false;
  std::string neighbor;
  bool correct = false;
};

struct SpmmReport {
  std::vector<SpmmRow> rows;  // test matrices only
  int correct = 0;
  std::string to_csv() const;
};

// SpMM scheduling study: database of labeled matrices, 1-NN schedule decision
// on held-out matrices, compared against the simulator-optimal schedule.
SpmmReport run_spmm(const SpmmOptions& opt, const model::Model& m,
                    const simprof::MachineConfig& machine, const fs::path& out_csv);

}  // namespace perfembed::pipeline
