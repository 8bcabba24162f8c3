#include "perfembed/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "perfembed/ir_text.hpp"
#include "perfembed/util.hpp"

namespace perfembed::tuning {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Shortest-augmenting-path assignment for rectangular matrices (n <= m).
// Returns nullopt if some row cannot be matched at finite cost.
std::optional<AssignmentResult> solve_assignment(const MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  // Potentials and matching; columns are 1-based internally (0 = virtual).
  std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(m) + 1, 0.0);
  std::vector<int> match(static_cast<size_t>(m) + 1, 0);  // column -> row (1-based)
  for (int i = 1; i <= n; ++i) {
    std::vector<double> minv(static_cast<size_t>(m) + 1, kInf);
    std::vector<int> way(static_cast<size_t>(m) + 1, 0);
    std::vector<bool> used(static_cast<size_t>(m) + 1, false);
    int j0 = 0;
    match[0] = i;
    do {
      used[static_cast<size_t>(j0)] = true;
      const int i0 = match[static_cast<size_t>(j0)];
      double delta = kInf;
      int j1 = -1;
      for (int j = 1; j <= m; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const double c = cost(i0 - 1, j - 1);
        const double cur = c - u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      if (!(delta < kInf)) return std::nullopt;  // no augmenting path at finite cost
      for (int j = 0; j <= m; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(match[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<size_t>(j0)] != 0);
    // Augment along the path.
    while (j0 != 0) {
      const int j1 = way[static_cast<size_t>(j0)];
      match[static_cast<size_t>(j0)] = match[static_cast<size_t>(j1)];
      j0 = j1;
    }
  }
  AssignmentResult r;
  r.assignment.assign(static_cast<size_t>(n), -1);
  for (int j = 1; j <= m; ++j)
    if (match[static_cast<size_t>(j)] != 0)
      r.assignment[static_cast<size_t>(match[static_cast<size_t>(j)] - 1)] = j - 1;
  r.total_cost = 0;
  for (int i = 0; i < n; ++i) r.total_cost += cost(i, r.assignment[static_cast<size_t>(i)]);
  if (!std::isfinite(r.total_cost)) return std::nullopt;
  return r;
}

}  // namespace

std::optional<AssignmentResult> hungarian(const AssignmentProblem& p) {
  const int n = static_cast<int>(p.cost.rows());
  const int m = static_cast<int>(p.cost.cols());
  if (n < 1) throw TuningError("assignment problem needs at least one source");
  if (n > m) throw TuningError("assignment problem needs n <= m");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      const double c = p.cost(i, j);
      if (c < 0 || std::isnan(c))
        throw TuningError("assignment costs must be >= 0 or +infinity");
    }
  auto base = solve_assignment(p.cost);
  if (!base) return std::nullopt;
  const double best = base->total_cost;
  // Lexicographic refinement: pin row by row to the smallest column that
  // still achieves the optimum.
  MatrixXd cost = p.cost;
  AssignmentResult out;
  out.assignment.assign(static_cast<size_t>(n), -1);
  out.total_cost = best;
  const double tol = 1e-9 * std::max(1.0, std::abs(best));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      if (!std::isfinite(cost(i, j))) continue;
      bool taken = false;
      for (int i2 = 0; i2 < i; ++i2) taken = taken || out.assignment[static_cast<size_t>(i2)] == j;
      if (taken) continue;
      const Eigen::RowVectorXd saved = cost.row(i);
      cost.row(i).setConstant(kInf);
      cost(i, j) = saved(j);
      auto trial = solve_assignment(cost);
      if (trial && trial->total_cost <= best + tol) {
        out.assignment[static_cast<size_t>(i)] = j;
        break;  // keep the pin
      }
      cost.row(i) = saved;
    }
    if (out.assignment[static_cast<size_t>(i)] < 0)
      throw TuningError("lexicographic refinement failed");  // unreachable
  }
  out.total_cost = 0;
  for (int i = 0; i < n; ++i) out.total_cost += p.cost(i, out.assignment[static_cast<size_t>(i)]);
  return out;
}

// --- database ---------------------------------------------------------------------

void Database::add(DbEntry entry) {
  if (entry.optimized_cost > entry.baseline_cost)
    throw TuningError("db entry '" + entry.id + "' regresses over its baseline");
  if (find(entry.id)) throw TuningError("duplicate db entry id: " + entry.id);
  if (embed_dim == 0) embed_dim = static_cast<int>(entry.nest_embedding.size());
  if (embed_dim != static_cast<int>(entry.nest_embedding.size()))
    throw TuningError("db entry embedding dimension mismatch");
  entries.push_back(std::move(entry));
}

const DbEntry* Database::find(const std::string& id) const {
  for (const auto& e : entries)
    if (e.id == id) return &e;
  return nullptr;
}

std::vector<std::pair<std::string, double>> Database::query(const VectorXd& nest_embedding,
                                                            int k,
                                                            const std::string& exclude) const {
  similarity::EmbeddingIndex idx;
  for (const auto& e : entries) idx.add(e.id, e.nest_embedding);
  return idx.knn(nest_embedding, k, exclude);
}

namespace {

nlohmann::json vec_json(const VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

VectorXd json_vec(const nlohmann::json& a) {
  VectorXd v(a.size());
  for (size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i];
  return v;
}

nlohmann::json subgraph_json(const std::vector<SubgraphNode>& nodes) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& n : nodes)
    out.push_back({{"origin", n.origin},
                   {"kind", encoder::to_string(n.kind)},
                   {"embedding", vec_json(n.embedding)}});
  return out;
}

encoder::NodeKind kind_from_string(const std::string& s) {
  for (int k = 0; k <= static_cast<int>(encoder::NodeKind::Memlet); ++k)
    if (s == encoder::to_string(static_cast<encoder::NodeKind>(k)))
      return static_cast<encoder::NodeKind>(k);
  throw TuningError("unknown node kind: " + s);
}

std::vector<SubgraphNode> subgraph_from_json(const nlohmann::json& a) {
  std::vector<SubgraphNode> out;
  for (const auto& n : a) {
    SubgraphNode sn;
    sn.origin = n.at("origin");
    sn.kind = kind_from_string(n.at("kind"));
    sn.embedding = json_vec(n.at("embedding"));
    out.push_back(std::move(sn));
  }
  return out;
}

nlohmann::json graph_json(const encoder::EncodedGraph& g) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : g.nodes)
    nodes.push_back({{"kind", encoder::to_string(n.kind)},
                     {"origin", n.origin},
                     {"features", n.features}});
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [a, b] : g.edges) edges.push_back({a, b});
  return {{"layout", g.layout_version}, {"nodes", nodes}, {"edges", edges}};
}

encoder::EncodedGraph graph_from_json(const nlohmann::json& j) {
  encoder::EncodedGraph g;
  g.layout_version = j.at("layout");
  for (const auto& n : j.at("nodes")) {
    encoder::EncodedNode en;
    en.kind = kind_from_string(n.at("kind"));
    en.origin = n.at("origin");
    en.features = n.at("features").get<std::vector<double>>();
    g.nodes.push_back(std::move(en));
  }
  for (const auto& e : j.at("edges")) g.edges.emplace_back(e.at(0), e.at(1));
  return g;
}

}  // namespace

void db_save(const Database& db, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "perfembed-db v1";
  j["model_fingerprint"] = db.model_fingerprint;
  j["embed_dim"] = db.embed_dim;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : db.entries) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : e.steps)
      steps.push_back({{"transformation", s.transformation.to_line()},
                       {"subgraph", subgraph_json(s.subgraph)}});
    entries.push_back({{"id", e.id},
                       {"nest_embedding", vec_json(e.nest_embedding)},
                       {"node_embeddings", subgraph_json(e.node_embeddings)},
                       {"encoded_graph", graph_json(e.encoded_graph)},
                       {"nest", e.nest_text},
                       {"steps", steps},
                       {"baseline_cost", e.baseline_cost},
                       {"optimized_cost", e.optimized_cost}});
  }
  j["entries"] = std::move(entries);
  write_text_file(path, j.dump());
}

Database db_load(const std::filesystem::path& path, const std::string& expect_fingerprint) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw TuningError("corrupt database file " + path.string() + ": " + e.what());
  }
  try {
    if (j.at("format") != "perfembed-db v1") throw TuningError("unknown database format");
    Database db;
    db.model_fingerprint = j.at("model_fingerprint");
    db.embed_dim = j.at("embed_dim");
    if (!expect_fingerprint.empty() && db.model_fingerprint != expect_fingerprint)
      throw TuningError("database was built with model fingerprint " + db.model_fingerprint +
                        " but " + expect_fingerprint + " was expected");
    for (const auto& ej : j.at("entries")) {
      DbEntry e;
      e.id = ej.at("id");
      e.nest_embedding = json_vec(ej.at("nest_embedding"));
      e.node_embeddings = subgraph_from_json(ej.at("node_embeddings"));
      e.encoded_graph = graph_from_json(ej.at("encoded_graph"));
      e.nest_text = ej.at("nest");
      for (const auto& sj : ej.at("steps")) {
        DbStep s;
        s.transformation = transform::Transformation::from_line(sj.at("transformation"));
        s.subgraph = subgraph_from_json(sj.at("subgraph"));
        e.steps.push_back(std::move(s));
      }
      e.baseline_cost = ej.at("baseline_cost");
      e.optimized_cost = ej.at("optimized_cost");
      db.add(std::move(e));
    }
    return db;
  } catch (const nlohmann::json::exception& e) {
    throw TuningError("corrupt database file " + path.string() + ": " + e.what());
  }
}

// --- matching ----------------------------------------------------------------------

MatchOutcome match_transformation(const DbStep& step, const ir::LoopNest& target_nest,
                                  const encoder::EncodedGraph& target_graph,
                                  const MatrixXd& target_node_embeddings) {
  MatchOutcome out;
  const int n = static_cast<int>(step.subgraph.size());
  const int m = static_cast<int>(target_graph.nodes.size());
  if (n == 0) {
    out.skip_reason = "empty source subgraph";
    return out;
  }
  if (m < n) {
    out.skip_reason = "target smaller than the source subgraph";
    return out;
  }
  if (target_node_embeddings.rows() != m ||
      target_node_embeddings.cols() != step.subgraph[0].embedding.size()) {
    out.skip_reason = "embedding dimension mismatch";
    return out;
  }
  MatrixXd cost(n, m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      if (step.subgraph[static_cast<size_t>(i)].kind !=
          target_graph.nodes[static_cast<size_t>(j)].kind) {
        cost(i, j) = kInf;
        continue;
      }
      cost(i, j) = (step.subgraph[static_cast<size_t>(i)].embedding -
                    target_node_embeddings.row(j).transpose())
                       .squaredNorm();
    }
  }
  auto res = hungarian(AssignmentProblem{std::move(cost)});
  if (!res) {
    out.skip_reason = "infeasible matching (no finite-cost assignment)";
    return out;
  }

  // Map the anchors through the assignment to target map ids.
  const auto anchors = step.transformation.anchors();
  std::vector<std::string> mapped;
  for (const auto& anchor : anchors) {
    int src_idx = -1;
    for (int i = 0; i < n; ++i)
      if (step.subgraph[static_cast<size_t>(i)].origin == anchor) src_idx = i;
    if (src_idx < 0) {
      out.skip_reason = "anchor missing from the stored subgraph";
      return out;
    }
    const int tgt = res->assignment[static_cast<size_t>(src_idx)];
    const std::string& origin = target_graph.nodes[static_cast<size_t>(tgt)].origin;
    const auto pos = origin.find("#entry");
    if (pos == std::string::npos) {
      out.skip_reason = "anchor matched to a non-map node";
      return out;
    }
    mapped.push_back(origin.substr(0, pos));
  }

  transform::Transformation inst = step.transformation;
  inst.map_a = mapped[0];
  if (mapped.size() > 1) inst.map_b = mapped[1];
  const auto app = transform::applicable(inst, target_nest);
  if (!app.ok) {
    out.skip_reason = "instantiated transformation not applicable: " + app.reason;
    return out;
  }
  out.ok = true;
  out.instantiated = inst;
  return out;
}

// --- costs and embedding -------------------------------------------------------------

double tuning_cost(const ir::LoopNest& nest, const InputBindings& inputs,
                   const simprof::MachineConfig& machine) {
  InputBindings copy = inputs;
  auto [profile, targets] = simprof::measure(nest, copy, machine);
  return targets[simprof::Target::RuntimeCycles];
}

EmbeddedNest embed_nest(const ir::LoopNest& nest, const InputBindings& inputs,
                        const model::Model& m, const simprof::MachineConfig& machine) {
  InputBindings copy = inputs;
  auto [profile, targets] = simprof::measure(nest, copy, machine);
  EmbeddedNest out;
  out.graph = encoder::encode_static(nest);
  const model::ForwardResult f = model::forward(m, out.graph, profile);
  out.node_embeddings = f.node_embeddings;
  out.nest_embedding = f.nest_embedding;
  return out;
}

// --- transfer tuning -----------------------------------------------------------------

std::string TuneReport::to_text() const {
  std::ostringstream os;
  os << "perfembed-tune-report v1\n";
  os << "target " << target_id << "\n";
  os << "baseline_cost " << format_double(baseline_cost) << "\n";
  os << "best_cost " << format_double(best_cost) << "\n";
  os << "chosen_neighbor " << (chosen_neighbor.empty() ? "<baseline>" : chosen_neighbor) << "\n";
  os << "evaluations_used " << evaluations_used << "\n";
  os << "chosen_sequence " << chosen_sequence.size() << "\n";
  for (const auto& t : chosen_sequence) os << "  " << t.to_line() << "\n";
  for (const auto& nb : neighbors) {
    os << "neighbor " << nb.neighbor_id << " distance " << format_double(nb.distance);
    if (nb.failed) {
      os << " failed: " << nb.failure << "\n";
      continue;
    }
    os << " cost " << format_double(nb.cost) << " applied " << nb.applied.size() << " skipped "
       << nb.skipped.size() << "\n";
    for (const auto& t : nb.applied) os << "  applied " << t.to_line() << "\n";
    for (const auto& s : nb.skipped) os << "  skipped " << s << "\n";
  }
  return os.str();
}

TuneReport transfer_tune(const ir::LoopNest& target, const InputBindings& inputs,
                         const Database& db, const model::Model& m,
                         const simprof::MachineConfig& machine, int k,
                         const std::string& exclude_id) {
  if (db.entries.empty()) throw TuningError("empty database");
  if (!db.model_fingerprint.empty() && db.model_fingerprint != to_hex(m.fingerprint()))
    throw TuningError("database/model fingerprint mismatch");

  TuneReport report;
  report.target_id = exclude_id;
  const ir::LoopNest canonical =
      ir::canonical_schedule(target, target.root_map().schedule.threads > 0
                                         ? target.root_map().schedule.threads
                                         : machine.threads);
  const EmbeddedNest base_embed = embed_nest(canonical, inputs, m, machine);
  report.baseline_cost = tuning_cost(target, inputs, machine);
  report.evaluations_used = 1;  // the baseline simulation

  const auto neighbors = db.query(base_embed.nest_embedding, k, exclude_id);

  struct Candidate {
    double cost;
    double distance;
    std::string id;
    transform::TransformationSequence seq;
  };
  std::vector<Candidate> candidates;

  for (const auto& [nid, dist] : neighbors) {
    const DbEntry* entry = db.find(nid);
    NeighborOutcome nb;
    nb.neighbor_id = nid;
    nb.distance = dist;
    try {
      ir::LoopNest cur = target;
      EmbeddedNest cur_embed = base_embed;
      bool dirty = false;  // re-embed only after an applied step
      for (size_t si = 0; si < entry->steps.size(); ++si) {
        if (dirty) {
          cur_embed = embed_nest(cur, inputs, m, machine);
          dirty = false;
        }
        const MatchOutcome mo = match_transformation(entry->steps[si], cur, cur_embed.graph,
                                                     cur_embed.node_embeddings);
        if (!mo.ok) {
          nb.skipped.push_back(entry->steps[si].transformation.to_line() + ": " +
                               mo.skip_reason);
          continue;
        }
        cur = transform::apply(mo.instantiated, cur);
        nb.applied.push_back(mo.instantiated);
        dirty = true;
      }
      nb.cost = tuning_cost(cur, inputs, machine);
      report.evaluations_used++;
      candidates.push_back({nb.cost, dist, nid, nb.applied});
    } catch (const std::exception& e) {
      nb.failed = true;
      nb.failure = e.what();
    }
    report.neighbors.push_back(std::move(nb));
  }

  // Baseline always competes; deterministic tie-breaking by (cost, distance, id).
  report.best_cost = report.baseline_cost;
  report.chosen_neighbor.clear();
  report.chosen_sequence.clear();
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.id < b.id;
  });
  if (!candidates.empty() && candidates.front().cost <= report.baseline_cost) {
    report.best_cost = candidates.front().cost;
    report.chosen_neighbor = candidates.front().id;
    report.chosen_sequence = candidates.front().seq;
  }
  return report;
}

BruteForceResult brute_force_tune(const ir::LoopNest& nest, const InputBindings& inputs,
                                  const simprof::MachineConfig& machine,
                                  const transform::SpaceLimits& limits) {
  const auto space = transform::enumerate_space(nest, limits);
  BruteForceResult out;
  out.space_size = space.size();
  bool first = true;
  for (const auto& seq : space) {
    ir::LoopNest cur = nest;
    for (const auto& t : seq) cur = transform::apply(t, cur);
    const double cost = tuning_cost(cur, inputs, machine);
    if (seq.empty()) out.baseline_cost = cost;
    if (first || cost < out.best_cost) {
      out.best_cost = cost;
      out.best_sequence = seq;
      first = false;
    }
  }
  return out;
}

std::optional<DbEntry> build_db_entry(const std::string& id, const ir::LoopNest& nest,
                                      const InputBindings& inputs, const model::Model& m,
                                      const simprof::MachineConfig& machine,
                                      const transform::SpaceLimits& limits,
                                      BruteForceResult* oracle_out) {
  const BruteForceResult oracle = brute_force_tune(nest, inputs, machine, limits);
  if (oracle_out) *oracle_out = oracle;
  if (oracle.best_sequence.empty()) return std::nullopt;  // no improvement found

  DbEntry e;
  e.id = id;
  e.nest_text = ir::serialize(nest);
  e.baseline_cost = oracle.baseline_cost;
  e.optimized_cost = oracle.best_cost;

  const EmbeddedNest base = embed_nest(nest, inputs, m, machine);
  e.encoded_graph = base.graph;
  e.nest_embedding = base.nest_embedding;
  for (size_t i = 0; i < base.graph.nodes.size(); ++i)
    e.node_embeddings.push_back({base.graph.nodes[i].origin, base.graph.nodes[i].kind,
                                 base.node_embeddings.row(static_cast<Eigen::Index>(i))});

  // Capture each step's subgraph on the evolving source.
  ir::LoopNest cur = nest;
  EmbeddedNest cur_embed = base;
  for (const auto& t : oracle.best_sequence) {
    DbStep step;
    step.transformation = t;
    const auto origins = transform::induced_subgraph(t, cur);
    for (const auto& origin : origins) {
      const int idx = cur_embed.graph.index_of(origin);
      if (idx < 0) throw TuningError("subgraph node missing from encoding: " + origin);
      step.subgraph.push_back({origin, cur_embed.graph.nodes[static_cast<size_t>(idx)].kind,
                               cur_embed.node_embeddings.row(idx)});
    }
    e.steps.push_back(std::move(step));
    cur = transform::apply(t, cur);
    cur_embed = embed_nest(cur, inputs, m, machine);
  }
  return e;
}

}  // namespace perfembed::tuning
