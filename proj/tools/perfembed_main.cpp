// Command-line driver: corpus generation, profiling, training, database
// construction, transfer tuning, similarity evaluation, and the SpMM
// scheduling study.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "perfembed/ir_text.hpp"
#include "perfembed/pipeline.hpp"
#include "perfembed/util.hpp"

namespace fs = std::filesystem;
using namespace perfembed;

namespace {

transform::SpaceLimits limits_from_flags(const std::vector<int64_t>& tiles,
                                         const std::vector<int>& widths,
                                         const std::vector<int64_t>& chunks, int max_len) {
  transform::SpaceLimits l;
  if (!tiles.empty()) l.tile_sizes = tiles;
  if (!widths.empty()) l.vector_widths = widths;
  if (!chunks.empty()) l.chunk_sizes = chunks;
  l.max_length = max_len;
  return l;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"performance-embedding toolkit for parallel loop nests"};
  app.require_subcommand(1);

  std::string corpus_dir = "corpus";
  std::string profiles_dir;
  std::string model_file = "model.json";
  std::string db_file = "db.json";
  std::string out_dir = "out";
  std::string machine_flag = "desk";
  uint64_t seed = 42;

  // gen
  auto* gen = app.add_subcommand("gen", "generate the synthetic corpus");
  int train_n = 300, val_n = 60, test_n = 60;
  int min_preset = 0, max_preset = 3;
  gen->add_option("--corpus", corpus_dir, "corpus output directory");
  gen->add_option("--train", train_n);
  gen->add_option("--val", val_n);
  gen->add_option("--test", test_n);
  gen->add_option("--min-preset", min_preset);
  gen->add_option("--max-preset", max_preset);
  gen->add_option("--seed", seed);

  // profile
  auto* profile = app.add_subcommand("profile", "simulate and store dynamic profiles/targets");
  profile->add_option("--corpus", corpus_dir);
  profile->add_option("--profiles", profiles_dir, "profiles output directory (default <corpus>/profiles)");
  profile->add_option("--machine", machine_flag, "desk | default | <config file>");

  // train
  auto* train = app.add_subcommand("train", "train the embedding model");
  int epochs = 20, batch = 16, embed_dim = 128, layers = 3, heads = 4, hidden = 256;
  double lr = 1e-3;
  uint64_t train_seed = 0xdead, init_seed = 0x5eed;
  train->add_option("--corpus", corpus_dir);
  train->add_option("--profiles", profiles_dir);
  train->add_option("--model", model_file);
  train->add_option("--epochs", epochs);
  train->add_option("--lr", lr);
  train->add_option("--batch", batch);
  train->add_option("--embed-dim", embed_dim);
  train->add_option("--layers", layers);
  train->add_option("--heads", heads);
  train->add_option("--hidden", hidden);
  train->add_option("--train-seed", train_seed);
  train->add_option("--init-seed", init_seed);

  // dbbuild
  auto* dbbuild = app.add_subcommand("dbbuild", "brute-force oracle + optimization database");
  std::string split = "train";
  std::vector<int64_t> tiles, chunks;
  std::vector<int> widths;
  int max_len = 3;
  dbbuild->add_option("--corpus", corpus_dir);
  dbbuild->add_option("--model", model_file);
  dbbuild->add_option("--db", db_file);
  dbbuild->add_option("--split", split);
  dbbuild->add_option("--machine", machine_flag);
  dbbuild->add_option("--tiles", tiles);
  dbbuild->add_option("--widths", widths);
  dbbuild->add_option("--chunks", chunks);
  dbbuild->add_option("--max-len", max_len);

  // tune
  auto* tune = app.add_subcommand("tune", "transfer-tune nests against the database");
  int k = 5;
  std::string target_nest, target_bindings;
  tune->add_option("--corpus", corpus_dir);
  tune->add_option("--model", model_file);
  tune->add_option("--db", db_file);
  tune->add_option("--split", split);
  tune->add_option("--machine", machine_flag);
  tune->add_option("--k", k);
  tune->add_option("--out", out_dir);
  tune->add_option("--nest", target_nest, "tune a single nest file instead of a split");
  tune->add_option("--bindings", target_bindings, "bindings stem for --nest");

  // eval
  auto* eval = app.add_subcommand("eval", "similarity evaluation (CoV) + embedding export");
  eval->add_option("--corpus", corpus_dir);
  eval->add_option("--model", model_file);
  eval->add_option("--split", split);
  eval->add_option("--machine", machine_flag);
  eval->add_option("--out", out_dir);

  // spmm
  auto* spmm = app.add_subcommand("spmm", "SpMM scheduling-decision study");
  pipeline::SpmmOptions sopt;
  spmm->add_option("--model", model_file);
  spmm->add_option("--machine", machine_flag);
  spmm->add_option("--out", out_dir);
  spmm->add_option("--train-matrices", sopt.train_matrices);
  spmm->add_option("--rows", sopt.rows);
  spmm->add_option("--kdim", sopt.kdim);
  spmm->add_option("--nnz-row", sopt.nnz_per_row);
  spmm->add_option("--cols", sopt.dense_cols);
  spmm->add_option("--seed", sopt.seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      corpus::DatasetCounts counts{train_n, val_n, test_n};
      corpus::SizeRanges ranges{min_preset, max_preset};
      const auto manifest = corpus::generate_dataset(counts, ranges, seed, corpus_dir);
      std::cout << "generated " << manifest.entries.size() << " nests under " << corpus_dir
                << "\n";
      return 0;
    }
    if (profiles_dir.empty()) profiles_dir = (fs::path(corpus_dir) / "profiles").string();
    const simprof::MachineConfig machine = pipeline::machine_from_flag(machine_flag);

    if (profile->parsed()) {
      pipeline::run_profile(corpus_dir, profiles_dir, machine);
      std::cout << "profiles written to " << profiles_dir << "\n";
      return 0;
    }
    if (train->parsed()) {
      model::TrainConfig tc;
      tc.epochs = epochs;
      tc.learning_rate = lr;
      tc.batch_size = batch;
      tc.seed = train_seed;
      model::ModelConfig mc;
      mc.embed_dim = embed_dim;
      mc.gnn_layers = layers;
      mc.attention_heads = heads;
      mc.mlp_hidden = hidden;
      mc.seed = init_seed;
      const fs::path history = fs::path(model_file).replace_extension(".history.csv");
      pipeline::run_train(corpus_dir, profiles_dir, tc, mc, model_file, history);
      std::cout << "model written to " << model_file << "\n";
      return 0;
    }
    if (dbbuild->parsed()) {
      const model::Model m = model::load_model(model_file);
      const auto manifest = pipeline::load_manifest(corpus_dir);
      const auto limits = limits_from_flags(tiles, widths, chunks, max_len);
      const fs::path report = fs::path(db_file).replace_extension(".report.csv");
      const auto db = pipeline::run_dbbuild(corpus_dir, manifest, split, m, machine, limits,
                                            db_file, report);
      std::cout << "database with " << db.entries.size() << " entries written to " << db_file
                << "\n";
      return 0;
    }
    if (tune->parsed()) {
      const model::Model m = model::load_model(model_file);
      const tuning::Database db = tuning::db_load(db_file, to_hex(m.fingerprint()));
      fs::create_directories(out_dir);
      if (!target_nest.empty()) {
        const ir::LoopNest nest = ir::parse_loopnest(read_text_file(target_nest));
        const InputBindings inputs = InputBindings::load(target_bindings);
        const auto report = tuning::transfer_tune(nest, inputs, db, m, machine, k);
        write_text_file(fs::path(out_dir) / "tune_report.txt", report.to_text());
        std::cout << report.to_text();
        return 0;
      }
      const auto manifest = pipeline::load_manifest(corpus_dir);
      const fs::path oracle_csv = fs::path(db_file).replace_extension(".report.csv");
      const auto oracle = pipeline::DbBuildReport::from_csv(read_text_file(oracle_csv));
      const auto rep = pipeline::run_tune_eval(corpus_dir, manifest, split, db, m, machine, k,
                                               oracle, fs::path(out_dir) / "tune_eval.csv");
      int within = 0, regressions = 0;
      for (const auto& r : rep.rows) {
        if (r.transfer_cost <= 1.10 * r.oracle_cost) ++within;
        if (r.transfer_cost > r.baseline) ++regressions;
      }
      std::cout << "tuned " << rep.rows.size() << " nests; within 10% of oracle: " << within
                << "; regressions: " << regressions << "\n";
      return 0;
    }
    if (eval->parsed()) {
      const model::Model m = model::load_model(model_file);
      const auto manifest = pipeline::load_manifest(corpus_dir);
      fs::create_directories(out_dir);
      const auto res = pipeline::run_similarity_eval(
          corpus_dir, manifest, split, m, machine, fs::path(out_dir) / "similarity.csv",
          fs::path(out_dir) / "embeddings.csv");
      std::cout << res.to_csv();
      return 0;
    }
    if (spmm->parsed()) {
      const model::Model m = model::load_model(model_file);
      fs::create_directories(out_dir);
      const auto rep = pipeline::run_spmm(sopt, m, machine, fs::path(out_dir) / "spmm.csv");
      std::cout << "spmm decisions correct for " << rep.correct << " of " << rep.rows.size()
                << " held-out matrices\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
