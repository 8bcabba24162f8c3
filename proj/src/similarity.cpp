#include "perfembed/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "perfembed/util.hpp"

namespace perfembed::similarity {

void EmbeddingIndex::add(std::string id, Eigen::VectorXd vec) {
  for (const auto& [existing, v] : entries_)
    if (existing == id) throw SimilarityError("duplicate id in index: " + id);
  if (!entries_.empty() && entries_.front().second.size() != vec.size())
    throw SimilarityError("embedding dimension mismatch for id: " + id);
  entries_.emplace_back(std::move(id), std::move(vec));
}

int EmbeddingIndex::dim() const {
  return entries_.empty() ? 0 : static_cast<int>(entries_.front().second.size());
}

const Eigen::VectorXd& EmbeddingIndex::vector_of(const std::string& id) const {
  for (const auto& [eid, v] : entries_)
    if (eid == id) return v;
  throw SimilarityError("id not in index: " + id);
}

std::vector<std::pair<std::string, double>> EmbeddingIndex::knn(
    const Eigen::VectorXd& query, int k, const std::string& exclude) const {
  if (entries_.empty()) throw SimilarityError("knn on an empty index");
  if (k < 1) throw SimilarityError("knn: k must be >= 1");
  if (query.size() != entries_.front().second.size())
    throw SimilarityError("knn: query dimension mismatch");
  std::vector<std::pair<std::string, double>> all;
  all.reserve(entries_.size());
  for (const auto& [id, v] : entries_) {
    if (id == exclude) continue;
    all.emplace_back(id, (v - query).squaredNorm());
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second < b.second;
    return a.first < b.first;
  });
  if (static_cast<size_t>(k) < all.size()) all.resize(static_cast<size_t>(k));
  return all;
}

SimilarityReport performance_similarity(const EmbeddingIndex& index,
                                        const std::map<std::string, double>& metric_values,
                                        int k) {
  if (index.size() < static_cast<size_t>(k) + 1)
    throw SimilarityError("performance_similarity needs at least k+1 entries");
  SimilarityReport rep;
  double total = 0;
  for (const auto& [id, vec] : index.entries()) {
    auto mit = metric_values.find(id);
    if (mit == metric_values.end())
      throw SimilarityError("missing metric value for id: " + id);
    const auto nbrs = index.knn(vec, k, id);
    std::vector<double> values{mit->second};
    for (const auto& [nid, dist] : nbrs) values.push_back(metric_values.at(nid));
    double mean = 0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    if (std::abs(mean) < 1e-300) {
      rep.excluded_zero_mean++;
      continue;
    }
    double var = 0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    total += std::sqrt(var) / mean;
    rep.neighborhoods++;
  }
  if (rep.neighborhoods > 0) rep.mean_cov = total / rep.neighborhoods;
  return rep;
}

Eigen::VectorXd BaselineFeatures::to_vector() const {
  Eigen::VectorXd v(4);
  v << cache_miss_ratio, bytes_read, bytes_written, arithmetic_intensity;
  return v;
}

BaselineFeatures reuse_distance_features(const ir::LoopNest& nest, InputBindings inputs,
                                         const simprof::MachineConfig& machine,
                                         int64_t max_iterations) {
  simprof::SimOptions opt;
  opt.max_outer_iterations = max_iterations;
  opt.force_single_thread = true;
  const simprof::SimResult r = simprof::simulate(nest, inputs, machine, opt);
  const simprof::CounterSet t = r.totals();
  const simprof::TargetMetrics m = simprof::compute_targets(r, machine);
  BaselineFeatures f;
  f.cache_miss_ratio = m[simprof::Target::L1MissRatio];
  f.bytes_read =
      static_cast<double>(t.mem_read_lines) * simprof::MachineConfig::kLineBytes;
  f.bytes_written =
      static_cast<double>(t.mem_write_lines) * simprof::MachineConfig::kLineBytes;
  f.arithmetic_intensity = m[simprof::Target::ArithmeticIntensity];
  return f;
}

double data_locality(const ir::LoopNest& nest, InputBindings inputs,
                     const simprof::MachineConfig& machine) {
  const simprof::SimResult r = simprof::simulate(nest, inputs, machine);
  const simprof::CounterSet t = r.totals();
  const double q = static_cast<double>(r.trace.unique_bytes());
  const double d =
      static_cast<double>(t.mem_read_lines + t.mem_write_lines) * simprof::MachineConfig::kLineBytes;
  if (d <= 0.0) return 1.0;  // everything stayed in cache
  return std::min(q / d, 1.0);
}

std::string export_embeddings(const EmbeddingIndex& index,
                              const std::map<std::string, std::vector<std::string>>& labels,
                              const std::vector<std::string>& label_names) {
  std::ostringstream os;
  os << "id";
  for (const auto& name : label_names) os << "," << name;
  for (int i = 0; i < index.dim(); ++i) os << ",e" << i;
  os << "\n";
  for (const auto& [id, vec] : index.entries()) {
    os << id;
    auto lit = labels.find(id);
    for (size_t li = 0; li < label_names.size(); ++li)
      os << "," << (lit != labels.end() && li < lit->second.size() ? lit->second[li] : "");
    for (int i = 0; i < vec.size(); ++i) os << "," << format_double(vec[i]);
    os << "\n";
  }
  return os.str();
}

}  // namespace perfembed::similarity
