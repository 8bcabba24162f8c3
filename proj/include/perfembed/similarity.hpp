#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "perfembed/bindings.hpp"
#include "perfembed/ir.hpp"
#include "perfembed/simprof.hpp"

namespace perfembed::similarity {

// Exact nearest-neighbor index over fixed-dimension embeddings, squared
// Euclidean metric. Immutable after construction; queries are thread-safe.
class EmbeddingIndex {
 public:
  void add(std::string id, Eigen::VectorXd vec);
  size_t size() const { return entries_.size(); }
  int dim() const;
  const Eigen::VectorXd& vector_of(const std::string& id) const;
  const std::vector<std::pair<std::string, Eigen::VectorXd>>& entries() const {
    return entries_;
  }

  // Ascending by distance, ties by id; `exclude` is dropped from candidates.
  // k larger than the candidate count returns every candidate.
  std::vector<std::pair<std::string, double>> knn(const Eigen::VectorXd& query, int k,
                                                  const std::string& exclude = "") const;

 private:
  std::vector<std::pair<std::string, Eigen::VectorXd>> entries_;
};

struct SimilarityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SimilarityReport {
  double mean_cov = 0.0;
  int neighborhoods = 0;
  int excluded_zero_mean = 0;
};

// Mean 3-NN coefficient of variation: for each entry, the population CoV of
// the metric over {entry} + its k nearest neighbors; zero-mean neighborhoods
// are excluded and counted.
SimilarityReport performance_similarity(const EmbeddingIndex& index,
                                        const std::map<std::string, double>& metric_values,
                                        int k = 3);

struct BaselineFeatures {
  double cache_miss_ratio = 0.0;
  double bytes_read = 0.0;
  double bytes_written = 0.0;
  double arithmetic_intensity = 0.0;

  Eigen::VectorXd to_vector() const;
};

// Reuse-distance-style baseline: single-threaded cold simulation of the first
// 500 outermost iterations.
BaselineFeatures reuse_distance_features(const ir::LoopNest& nest, InputBindings inputs,
                                         const simprof::MachineConfig& machine,
                                         int64_t max_iterations = 500);

// Q/D data locality: unique bytes touched (cache-line granularity) over bytes
// moved from and to main memory in a cold run; clamped to (0, 1].
double data_locality(const ir::LoopNest& nest, InputBindings inputs,
                     const simprof::MachineConfig& machine);

// CSV export: id, label columns, then the embedding values.
std::string export_embeddings(const EmbeddingIndex& index,
                              const std::map<std::string, std::vector<std::string>>& labels,
                              const std::vector<std::string>& label_names);

}  // namespace perfembed::similarity
