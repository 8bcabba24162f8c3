#include "perfembed/pipeline.hpp"

#include <algorithm>
#include <sstream>

#include "perfembed/ir_text.hpp"
#include "perfembed/util.hpp"

namespace perfembed::pipeline {

simprof::MachineConfig desk_machine() {
  simprof::MachineConfig mc;
  mc.threads = 4;
  mc.l1_bytes = 4 * 1024;
  mc.l2_bytes = 32 * 1024;
  mc.l3_bytes = 256 * 1024;
  return mc;
}

simprof::MachineConfig machine_from_flag(const std::string& flag) {
  if (flag.empty() || flag == "desk") return desk_machine();
  if (flag == "default") return simprof::MachineConfig{};
  return simprof::MachineConfig::parse(read_text_file(flag));
}

ir::LoopNest load_nest(const fs::path& corpus_dir, const corpus::ManifestEntry& e) {
  return ir::parse_loopnest(read_text_file(corpus_dir / e.nest_path));
}

InputBindings load_bindings(const fs::path& corpus_dir, const corpus::ManifestEntry& e) {
  return InputBindings::load(corpus_dir / e.bindings_stem);
}

corpus::CorpusManifest load_manifest(const fs::path& corpus_dir) {
  return corpus::CorpusManifest::parse(read_text_file(corpus_dir / "manifest.txt"));
}

void run_profile(const fs::path& corpus_dir, const fs::path& profiles_dir,
                 const simprof::MachineConfig& machine) {
  const auto manifest = load_manifest(corpus_dir);
  fs::create_directories(profiles_dir);
  std::ostringstream summary;
  summary << "perfembed-profile-summary v1 machine_fingerprint "
          << to_hex(machine.fingerprint()) << "\n";
  for (const auto& e : manifest.entries) {
    const ir::LoopNest nest = load_nest(corpus_dir, e);
    InputBindings inputs = load_bindings(corpus_dir, e);
    auto [profile, targets] = simprof::measure(nest, inputs, machine);
    write_text_file(profiles_dir / (e.id + ".profile.csv"), simprof::profile_csv(profile));
    write_text_file(profiles_dir / (e.id + ".targets.csv"), simprof::targets_csv(targets));
    summary << e.id << " runtime_cycles "
            << format_double(targets[simprof::Target::RuntimeCycles]) << "\n";
  }
  write_text_file(profiles_dir / "summary.txt", summary.str());
}

std::vector<model::Sample> load_samples(const fs::path& corpus_dir,
                                        const fs::path& profiles_dir,
                                        const corpus::CorpusManifest& manifest,
                                        const std::string& split) {
  std::vector<model::Sample> out;
  for (const auto* e : manifest.split(split)) {
    model::Sample s;
    s.id = e->id;
    s.graph = encoder::encode_static(load_nest(corpus_dir, *e));
    s.profile =
        simprof::profile_from_csv(read_text_file(profiles_dir / (e->id + ".profile.csv")));
    s.targets =
        simprof::targets_from_csv(read_text_file(profiles_dir / (e->id + ".targets.csv")));
    out.push_back(std::move(s));
  }
  return out;
}

model::Model run_train(const fs::path& corpus_dir, const fs::path& profiles_dir,
                       const model::TrainConfig& tc, const model::ModelConfig& mc,
                       const fs::path& model_file, const fs::path& history_csv) {
  const auto manifest = load_manifest(corpus_dir);
  const auto train_split = load_samples(corpus_dir, profiles_dir, manifest, "train");
  const auto val_split = load_samples(corpus_dir, profiles_dir, manifest, "val");
  model::TrainHistory history;
  model::Model m = model::train(train_split, val_split, tc, mc, &history);
  model::save_model(m, model_file);
  std::ostringstream os;
  os << "epoch,train_loss,val_loss\n";
  for (size_t i = 0; i < history.train_loss.size(); ++i)
    os << i << "," << format_double(history.train_loss[i]) << ","
       << format_double(history.val_loss[i]) << "\n";
  write_text_file(history_csv, os.str());
  return m;
}

std::string DbBuildReport::to_csv() const {
  std::ostringstream os;
  os << "id,space_size,baseline_cost,best_cost,stored\n";
  for (const auto& r : rows)
    os << r.id << "," << r.space_size << "," << format_double(r.baseline_cost) << ","
       << format_double(r.best_cost) << "," << (r.stored ? 1 : 0) << "\n";
  return os.str();
}

DbBuildReport DbBuildReport::from_csv(const std::string& text) {
  DbBuildReport rep;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    DbBuildRow r;
    std::string cell;
    std::getline(ls, r.id, ',');
    std::getline(ls, cell, ',');
    r.space_size = std::stoull(cell);
    std::getline(ls, cell, ',');
    r.baseline_cost = std::stod(cell);
    std::getline(ls, cell, ',');
    r.best_cost = std::stod(cell);
    std::getline(ls, cell, ',');
    r.stored = cell == "1";
    rep.rows.push_back(std::move(r));
  }
  return rep;
}

tuning::Database run_dbbuild(const fs::path& corpus_dir, const corpus::CorpusManifest& manifest,
                             const std::string& split, const model::Model& m,
                             const simprof::MachineConfig& machine,
                             const transform::SpaceLimits& limits, const fs::path& db_file,
                             const fs::path& report_csv, DbBuildReport* report_out) {
  tuning::Database db;
  db.model_fingerprint = to_hex(m.fingerprint());
  db.embed_dim = m.config.embed_dim;
  DbBuildReport report;
  for (const auto* e : manifest.split(split)) {
    const ir::LoopNest nest = load_nest(corpus_dir, *e);
    const InputBindings inputs = load_bindings(corpus_dir, *e);
    tuning::BruteForceResult oracle;
    auto entry = tuning::build_db_entry(e->id, nest, inputs, m, machine, limits, &oracle);
    DbBuildRow row{e->id, oracle.space_size, oracle.baseline_cost, oracle.best_cost,
                   entry.has_value()};
    report.rows.push_back(row);
    if (entry) db.add(std::move(*entry));
  }
  tuning::db_save(db, db_file);
  write_text_file(report_csv, report.to_csv());
  if (report_out) *report_out = report;
  return db;
}

std::string TuneEvalReport::to_csv() const {
  std::ostringstream os;
  os << "id,baseline,transfer_cost,oracle_cost,space_size,evaluations,chosen_neighbor\n";
  for (const auto& r : rows)
    os << r.id << "," << format_double(r.baseline) << "," << format_double(r.transfer_cost)
       << "," << format_double(r.oracle_cost) << "," << r.space_size << "," << r.evaluations
       << "," << (r.chosen_neighbor.empty() ? "<baseline>" : r.chosen_neighbor) << "\n";
  return os.str();
}

TuneEvalReport run_tune_eval(const fs::path& corpus_dir, const corpus::CorpusManifest& manifest,
                             const std::string& split, const tuning::Database& db,
                             const model::Model& m, const simprof::MachineConfig& machine,
                             int k, const DbBuildReport& oracle, const fs::path& out_csv) {
  std::map<std::string, DbBuildRow> oracle_by_id;
  for (const auto& r : oracle.rows) oracle_by_id[r.id] = r;
  TuneEvalReport rep;
  for (const auto* e : manifest.split(split)) {
    const ir::LoopNest nest = load_nest(corpus_dir, *e);
    const InputBindings inputs = load_bindings(corpus_dir, *e);
    const tuning::TuneReport tr = tuning::transfer_tune(nest, inputs, db, m, machine, k, e->id);
    TuneEvalRow row;
    row.id = e->id;
    row.baseline = tr.baseline_cost;
    row.transfer_cost = tr.best_cost;
    row.evaluations = tr.evaluations_used;
    row.chosen_neighbor = tr.chosen_neighbor;
    auto oit = oracle_by_id.find(e->id);
    if (oit != oracle_by_id.end()) {
      row.oracle_cost = oit->second.best_cost;
      row.space_size = oit->second.space_size;
    }
    rep.rows.push_back(std::move(row));
  }
  write_text_file(out_csv, rep.to_csv());
  return rep;
}

std::string SimilarityEvalResult::to_csv() const {
  std::ostringstream os;
  os << "metric,model_cov,baseline_cov\n";
  for (const auto& [name, pair] : cov)
    os << name << "," << format_double(pair.first) << "," << format_double(pair.second) << "\n";
  os << "excluded_model," << excluded_model << ",\n";
  os << "excluded_baseline," << excluded_baseline << ",\n";
  return os.str();
}

SimilarityEvalResult run_similarity_eval(const fs::path& corpus_dir,
                                         const corpus::CorpusManifest& manifest,
                                         const std::string& split, const model::Model& m,
                                         const simprof::MachineConfig& machine,
                                         const fs::path& out_csv,
                                         const fs::path& embeddings_csv) {
  similarity::EmbeddingIndex model_index;
  std::vector<std::pair<std::string, Eigen::VectorXd>> baseline_raw;
  std::map<std::string, std::map<std::string, double>> metrics;  // metric -> id -> value
  std::map<std::string, std::vector<std::string>> labels;
  const auto entries = manifest.split(split);
  for (const auto* e : entries) {
    const ir::LoopNest nest = load_nest(corpus_dir, *e);
    const InputBindings inputs = load_bindings(corpus_dir, *e);
    const tuning::EmbeddedNest emb = tuning::embed_nest(nest, inputs, m, machine);
    model_index.add(e->id, emb.nest_embedding);
    labels[e->id] = {corpus::to_string(e->spec.kind), e->split};

    InputBindings copy = inputs;
    auto [profile, targets] = simprof::measure(nest, copy, machine);
    metrics["mem_bandwidth"][e->id] = targets[simprof::Target::MemReadBandwidth] +
                                      targets[simprof::Target::MemWriteBandwidth];
    metrics["l3_bandwidth"][e->id] =
        targets[simprof::Target::L3LoadBandwidth] + targets[simprof::Target::L3EvictBandwidth];
    metrics["l2_bandwidth"][e->id] =
        targets[simprof::Target::L2LoadBandwidth] + targets[simprof::Target::L2EvictBandwidth];
    metrics["data_locality"][e->id] = similarity::data_locality(nest, inputs, machine);

    const similarity::BaselineFeatures bf =
        similarity::reuse_distance_features(nest, inputs, machine);
    baseline_raw.emplace_back(e->id, bf.to_vector());
  }

  // Z-score the 4 baseline features over the split before building the index.
  similarity::EmbeddingIndex baseline_index;
  {
    std::vector<Eigen::VectorXd> rows;
    for (const auto& [id, v] : baseline_raw) rows.push_back(v);
    const model::Normalizer norm = model::Normalizer::fit(rows, false);
    for (const auto& [id, v] : baseline_raw) baseline_index.add(id, norm.apply(v));
  }

  SimilarityEvalResult out;
  for (const auto& [name, values] : metrics) {
    const auto mr = similarity::performance_similarity(model_index, values, 3);
    const auto br = similarity::performance_similarity(baseline_index, values, 3);
    out.cov[name] = {mr.mean_cov, br.mean_cov};
    out.excluded_model += mr.excluded_zero_mean;
    out.excluded_baseline += br.excluded_zero_mean;
  }
  write_text_file(out_csv, out.to_csv());
  write_text_file(embeddings_csv,
                  similarity::export_embeddings(model_index, labels, {"kind", "split"}));
  return out;
}

std::string SpmmReport::to_csv() const {
  std::ostringstream os;
  os << "id,power_law,static_cost,dynamic_cost,optimal,decision,neighbor,correct\n";
  for (const auto& r : rows)
    os << r.id << "," << (r.power_law ? 1 : 0) << "," << format_double(r.static_cost) << ","
       << format_double(r.dynamic_cost) << "," << (r.optimal_dynamic ? "dynamic" : "static")
       << "," << (r.decided_dynamic ? "dynamic" : "static") << "," << r.neighbor << ","
       << (r.correct ? 1 : 0) << "\n";
  os << "correct_total," << correct << ",,,,,,\n";
  return os.str();
}

SpmmReport run_spmm(const SpmmOptions& opt, const model::Model& m,
                    const simprof::MachineConfig& machine, const fs::path& out_csv) {
  Rng rng(opt.seed);
  struct Instance {
    std::string id;
    bool power_law;
    ir::LoopNest nest;
    InputBindings inputs;
    double static_cost, dynamic_cost;
  };

  auto make_instance = [&](const std::string& id, bool power_law, uint64_t seed) {
    // Vary row count and density around the base configuration.
    const int64_t rows = opt.rows / 2 + static_cast<int64_t>(seed % 5) * (opt.rows / 8);
    const int64_t nnz = std::max<int64_t>(2, opt.nnz_per_row - 2 + static_cast<int64_t>(seed % 5));
    const corpus::SparseMatrixCSR mat =
        corpus::synth_csr(rows, opt.kdim, nnz, power_law, opt.exponent, seed);
    auto [nest, inputs] = corpus::spmm_from_csr(mat, opt.dense_cols, ir::ElemType::F64, seed);
    Instance inst{id, power_law, std::move(nest), std::move(inputs), 0, 0};
    inst.static_cost = tuning::tuning_cost(inst.nest, inst.inputs, machine);
    const auto dyn = transform::Transformation::set_schedule_dynamic(
        inst.nest.root_map().id, opt.chunk);
    inst.dynamic_cost =
        tuning::tuning_cost(transform::apply(dyn, inst.nest), inst.inputs, machine);
    return inst;
  };

  tuning::Database db;
  db.model_fingerprint = to_hex(m.fingerprint());
  db.embed_dim = m.config.embed_dim;
  for (int i = 0; i < opt.train_matrices; ++i) {
    const bool power_law = i % 2 == 1;
    Instance inst = make_instance("train" + std::to_string(i), power_law, rng.next_u64());
    const tuning::EmbeddedNest emb = tuning::embed_nest(inst.nest, inst.inputs, m, machine);
    tuning::DbEntry e;
    e.id = inst.id;
    e.nest_embedding = emb.nest_embedding;
    e.nest_text = ir::serialize(inst.nest);
    e.encoded_graph = emb.graph;
    e.baseline_cost = inst.static_cost;
    e.optimized_cost = std::min(inst.static_cost, inst.dynamic_cost);
    if (inst.dynamic_cost < inst.static_cost) {
      tuning::DbStep step;
      step.transformation =
          transform::Transformation::set_schedule_dynamic(inst.nest.root_map().id, opt.chunk);
      const auto origins = transform::induced_subgraph(step.transformation, inst.nest);
      for (const auto& origin : origins) {
        const int idx = emb.graph.index_of(origin);
        step.subgraph.push_back({origin, emb.graph.nodes[static_cast<size_t>(idx)].kind,
                                 emb.node_embeddings.row(idx)});
      }
      e.steps.push_back(std::move(step));
    }
    db.add(std::move(e));
  }

  SpmmReport rep;
  const int total_test = opt.test_uniform + opt.test_power_law;
  for (int i = 0; i < total_test; ++i) {
    const bool power_law = i >= opt.test_uniform;
    Instance inst = make_instance("test" + std::to_string(i), power_law, rng.next_u64());
    const tuning::EmbeddedNest emb = tuning::embed_nest(inst.nest, inst.inputs, m, machine);
    const auto nn = db.query(emb.nest_embedding, 1);
    SpmmRow row;
    row.id = inst.id;
    row.power_law = power_law;
    row.static_cost = inst.static_cost;
    row.dynamic_cost = inst.dynamic_cost;
    row.optimal_dynamic = inst.dynamic_cost < inst.static_cost;
    row.neighbor = nn.front().first;
    row.decided_dynamic = !db.find(nn.front().first)->steps.empty();
    row.correct = row.decided_dynamic == row.optimal_dynamic;
    rep.correct += row.correct ? 1 : 0;
    rep.rows.push_back(std::move(row));
  }
  write_text_file(out_csv, rep.to_csv());
  return rep;
}

}  // namespace perfembed::pipeline
