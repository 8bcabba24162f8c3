#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "perfembed/encoder.hpp"
#include "perfembed/simprof.hpp"

namespace perfembed::model {

struct ModelConfig {
  int embed_dim = 128;
  int gnn_layers = 3;
  int attention_heads = 4;
  int mlp_hidden = 256;
  uint64_t seed = 0x5eed;

  void check() const;  // embed_dim divisible by heads, positive sizes
};

struct TrainConfig {
  int epochs = 20;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 16;
  uint64_t seed = 0xdead;
};

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Elementwise feature normalizer: optional log1p followed by z-scoring.
struct Normalizer {
  bool log1p = false;
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  Eigen::VectorXd invert(const Eigen::VectorXd& v) const;
  static Normalizer fit(const std::vector<Eigen::VectorXd>& rows, bool log1p);
};

// All trainable tensors live in one flat vector; named views are created on
// demand from the layout. This keeps Adam, gradient checks, and persistence
// trivial and bit-exact.
struct Model {
  ModelConfig config;
  std::string layout_version;
  int feature_width = 0;
  Eigen::VectorXd params;
  Normalizer profile_norm;  // 95 dynamic features
  Normalizer target_norm;   // 20 targets

  uint64_t fingerprint() const;
};

Model init_model(const ModelConfig& config);

struct ForwardResult {
  Eigen::MatrixXd node_embeddings;  // N x embed_dim, graph node order
  Eigen::VectorXd nest_embedding;   // embed_dim
  Eigen::VectorXd prediction;       // 20, normalized target space
};

ForwardResult forward(const Model& model, const encoder::EncodedGraph& graph,
                      const simprof::DynamicProfile& profile);

double mae_loss(const Eigen::VectorXd& prediction, const Eigen::VectorXd& target);

// Loss plus gradient of the MAE w.r.t. every parameter (normalized targets).
std::pair<double, Eigen::VectorXd> loss_and_gradient(const Model& model,
                                                     const encoder::EncodedGraph& graph,
                                                     const simprof::DynamicProfile& profile,
                                                     const Eigen::VectorXd& target_normalized);

struct Sample {
  std::string id;
  encoder::EncodedGraph graph;
  simprof::DynamicProfile profile;
  simprof::TargetMetrics targets;
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
};

Model train(const std::vector<Sample>& train_split, const std::vector<Sample>& val_split,
            const TrainConfig& tc, const ModelConfig& mc, TrainHistory* history = nullptr);

// Denormalized prediction in original metric units.
Eigen::VectorXd predict_targets(const Model& model, const encoder::EncodedGraph& graph,
                                const simprof::DynamicProfile& profile);

// Pearson correlation per metric between denormalized predictions and true
// targets; degenerate (zero-variance) metrics report 0.
std::vector<double> pearson_per_metric(const Model& model, const std::vector<Sample>& samples);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace perfembed::model
