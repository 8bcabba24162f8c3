#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "perfembed/encoder.hpp"
#include "perfembed/model.hpp"
#include "perfembed/similarity.hpp"
#include "perfembed/transform.hpp"

namespace perfembed::tuning {

struct TuningError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- minimum-cost bipartite assignment ------------------------------------------

// n sources (rows) to m >= n targets (columns); entries >= 0 or +infinity.
struct AssignmentProblem {
  Eigen::MatrixXd cost;
};

struct AssignmentResult {
  std::vector<int> assignment;  // source -> target
  double total_cost = 0.0;
};

// Minimum total cost injective assignment of every row to a distinct column.
// Returns nullopt when no finite-cost assignment exists. Among all optima the
// lexicographically smallest assignment vector is returned.
std::optional<AssignmentResult> hungarian(const AssignmentProblem& p);

// --- optimization database -------------------------------------------------------

struct SubgraphNode {
  std::string origin;
  encoder::NodeKind kind = encoder::NodeKind::Body;
  Eigen::VectorXd embedding;
};

struct DbStep {
  transform::Transformation transformation;
  std::vector<SubgraphNode> subgraph;  // anchors first, then incident memlets
};

struct DbEntry {
  std::string id;
  Eigen::VectorXd nest_embedding;
  std::vector<SubgraphNode> node_embeddings;  // original nest, encoding order
  encoder::EncodedGraph encoded_graph;
  std::string nest_text;  // serialized original nest
  std::vector<DbStep> steps;
  double baseline_cost = 0.0;
  double optimized_cost = 0.0;
};

struct Database {
  std::string model_fingerprint;
  int embed_dim = 0;
  std::vector<DbEntry> entries;

  void add(DbEntry entry);  // rejects duplicate ids and cost regressions
  const DbEntry* find(const std::string& id) const;
  std::vector<std::pair<std::string, double>> query(const Eigen::VectorXd& nest_embedding,
                                                    int k, const std::string& exclude = "") const;
};

void db_save(const Database& db, const std::filesystem::path& path);
Database db_load(const std::filesystem::path& path,
                 const std::string& expect_fingerprint = "");

// --- matching and transfer -------------------------------------------------------

struct MatchOutcome {
  bool ok = false;
  std::string skip_reason;
  transform::Transformation instantiated;
};

// Matches one stored step onto the target nest: squared-l2 cost between the
// stored subgraph embeddings and every target node embedding, cross-type
// pairs at infinity, Hungarian assignment, anchors mapped through it, then an
// applicability check on the instantiated transformation.
MatchOutcome match_transformation(const DbStep& step,
                                  const ir::LoopNest& target_nest,
                                  const encoder::EncodedGraph& target_graph,
                                  const Eigen::MatrixXd& target_node_embeddings);

struct NeighborOutcome {
  std::string neighbor_id;
  double distance = 0.0;
  transform::TransformationSequence applied;
  std::vector<std::string> skipped;  // "<step>: <reason>"
  double cost = 0.0;
  bool failed = false;
  std::string failure;
};

struct TuneReport {
  std::string target_id;
  double baseline_cost = 0.0;
  double best_cost = 0.0;
  std::string chosen_neighbor;  // empty = baseline kept
  transform::TransformationSequence chosen_sequence;
  std::vector<NeighborOutcome> neighbors;
  int evaluations_used = 0;

  std::string to_text() const;
};

// Transfer tuning (k-NN + per-step matching + simulate-and-pick-best).
// The baseline is always a candidate, so the result never regresses.
TuneReport transfer_tune(const ir::LoopNest& target, const InputBindings& inputs,
                         const Database& db, const model::Model& m,
                         const simprof::MachineConfig& machine, int k,
                         const std::string& exclude_id = "");

struct BruteForceResult {
  transform::TransformationSequence best_sequence;
  double best_cost = 0.0;
  double baseline_cost = 0.0;
  size_t space_size = 0;
};

// Exhaustive oracle: simulates every sequence in the enumerated space.
BruteForceResult brute_force_tune(const ir::LoopNest& nest, const InputBindings& inputs,
                                  const simprof::MachineConfig& machine,
                                  const transform::SpaceLimits& limits);

// Measured tuning cost of a nest (warmup + measured pass runtime).
double tuning_cost(const ir::LoopNest& nest, const InputBindings& inputs,
                   const simprof::MachineConfig& machine);

// Embeds a nest under its current schedule: simulate -> profile -> encode ->
// forward. Returns the encoded graph, per-node embeddings and nest embedding.
struct EmbeddedNest {
  encoder::EncodedGraph graph;
  Eigen::MatrixXd node_embeddings;
  Eigen::VectorXd nest_embedding;
};
EmbeddedNest embed_nest(const ir::LoopNest& nest, const InputBindings& inputs,
                        const model::Model& m, const simprof::MachineConfig& machine);

// Database construction for one nest: brute-force oracle + per-step source
// subgraphs captured on the evolving source. Returns nullopt when the oracle
// found no improvement over the baseline.
std::optional<DbEntry> build_db_entry(const std::string& id, const ir::LoopNest& nest,
                                      const InputBindings& inputs, const model::Model& m,
                                      const simprof::MachineConfig& machine,
                                      const transform::SpaceLimits& limits,
                                      BruteForceResult* oracle_out = nullptr);

}  // namespace perfembed::tuning
