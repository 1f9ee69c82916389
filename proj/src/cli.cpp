//
// Project ringkit - Copyright 2026 ringkit authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "ringkit/cli.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ringkit/error.h"
#include "ringkit/selfcheck.h"
#include "ringkit/tensor.h"
#include "ringkit/train.h"

namespace ringkit::cli {
namespace {

  namespace fs = std::filesystem;
  using nlohmann::ordered_json;
  using namespace ringkit::train;

  const std::vector<double> kLrGrid { 1e-3, 5e-4, 1e-4, 5e-5 };

  // Usage problems (bad flags, missing columns, invalid configs) versus
  // problems with the data itself.
  int exit_code_for(ErrorCode c) {
    switch (c) {
    case ErrorCode::kMissingColumn:
    case ErrorCode::kInvalidConfig:
      return kUsage;
    default:
      return kData;
    }
  }

  struct GlobalOptions {
    int threads = 0;
    CLI::Option *threads_opt = nullptr;

    int resolved() const {
      return resolve_threads(threads_opt->count() ? std::optional(threads)
                                                  : std::nullopt);
    }
  };

  struct DataSource {
    std::string graphs;
    std::string csv;
    std::string smiles_col = "smiles";
    std::vector<std::string> targets;

    void add_to(CLI::App *app, bool with_targets) {
      auto *g = app->add_option("--graphs", graphs,
                                "JSONL graph file from build-graphs");
      auto *c = app->add_option("--csv", csv, "CSV file with a SMILES column");
      g->excludes(c);
      app->add_option("--smiles-col", smiles_col,
                      "SMILES column of --csv")
          ->capture_default_str();
      if (with_targets)
        app->add_option("--targets", targets,
                        "Target columns of --csv, or names for the y values "
                        "of --graphs (comma separated)")
            ->delimiter(',');
    }

    Dataset load(int threads, std::ostream &err,
                 const std::vector<std::string> &fallback_targets) const {
      const std::vector<std::string> &names =
          targets.empty() ? fallback_targets : targets;
      if (!graphs.empty())
        return load_jsonl(graphs, names);
      if (csv.empty())
        throw Error(ErrorCode::kInvalidConfig, "one of --graphs or --csv is "
                                               "required");
      if (names.empty())
        throw Error(ErrorCode::kInvalidConfig, "--targets is required with "
                                               "--csv");
      return load_csv(csv, smiles_col, names, { true, threads, &err });
    }
  };

  void write_text(const fs::path &path, const std::string &text) {
    if (path.has_parent_path())
      fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    f << text;
    if (!f)
      throw Error(ErrorCode::kIo, "cannot write " + path.string());
  }

  struct CorpusStats {
    std::size_t graphs = 0;
    double atoms = 0, bonds = 0, rings = 0, ring_edges = 0;

    void add(const HierGraph &h) {
      ++graphs;
      atoms += h.atom_graph.num_atoms();
      bonds += h.atom_graph.num_bonds();
      rings += h.ring_graph.num_rings();
      ring_edges += static_cast<double>(h.ring_graph.connections.size());
    }

    ordered_json to_json() const {
      const double n = std::max<double>(1.0, static_cast<double>(graphs));
      ordered_json j;
      j["graphs"] = graphs;
      j["avg_atoms"] = atoms / n;
      j["avg_bonds"] = bonds / n;
      j["avg_rings"] = rings / n;
      j["avg_ring_edges"] = ring_edges / n;
      return j;
    }
  };

  // ---- build-graphs --------------------------------------------------------

  struct BuildGraphs {
    std::string in, out, smiles_col = "smiles";
    std::vector<std::string> target_cols;
    bool no_virtual = false;

    void setup(CLI::App *app) {
      app->add_option("--in", in, "Input CSV (header row)")->required();
      app->add_option("--smiles-col", smiles_col, "SMILES column name")
          ->capture_default_str();
      app->add_option("--target-cols", target_cols,
                      "Target columns copied into each record's y "
                      "(comma separated)")
          ->delimiter(',');
      app->add_option("--out", out, "Output JSONL path")->required();
      app->add_flag("--no-virtual", no_virtual,
                    "Omit the virtual molecule node");
    }

    int run(int threads, std::ostream &out_s, std::ostream &err) const {
      const Dataset ds = load_csv(in, smiles_col, target_cols,
                                  { !no_virtual, threads, &err });
      std::string text;
      CorpusStats stats;
      for (const HierGraph &h: ds.graphs) {
        text += serialize(h);
        text += '\n';
        stats.add(h);
      }
      write_text(out, text);
      ordered_json j;
      j["rows"] = ds.rows_read;
      j["graphs"] = ds.size();
      j["rejects"] = ds.rejects.size();
      j["avg_atoms"] = stats.to_json()["avg_atoms"];
      j["avg_bonds"] = stats.to_json()["avg_bonds"];
      j["avg_rings"] = stats.to_json()["avg_rings"];
      j["out"] = out;
      out_s << j.dump() << '\n';
      return kOk;
    }
  };

  // ---- stats ---------------------------------------------------------------

  struct Stats {
    DataSource src;

    void setup(CLI::App *app) { src.add_to(app, false); }

    int run(int threads, std::ostream &out, std::ostream &err) const {
      CorpusStats stats;
      std::size_t rejects = 0;
      if (!src.graphs.empty()) {
        for (const HierGraph &h: load_jsonl(src.graphs).graphs)
          stats.add(h);
      } else if (!src.csv.empty()) {
        const Dataset ds =
            load_csv(src.csv, src.smiles_col, {}, { true, threads, &err });
        rejects = ds.rejects.size();
        for (const HierGraph &h: ds.graphs)
          stats.add(h);
      } else {
        throw Error(ErrorCode::kInvalidConfig,
                    "one of --graphs or --csv is required");
      }
      ordered_json j = stats.to_json();
      j["rejects"] = rejects;
      out << j.dump() << '\n';
      return kOk;
    }
  };

  // ---- train ---------------------------------------------------------------

  double selection_score(const TrainResult &r) {
    const EpochLog &e = r.log.at(static_cast<std::size_t>(r.best_epoch - 1));
    const std::vector<double> &mae = e.val_mae.empty() ? e.train_mae
                                                       : e.val_mae;
    const Standardization &st = r.best.standardization;
    double s = 0;
    for (std::size_t t = 0; t < mae.size(); ++t)
      s += st.enabled[t] ? mae[t] / st.std[t] : mae[t];
    return s / static_cast<double>(mae.size());
  }

  std::string lr_label(double lr) {
    std::ostringstream s;
    s << lr;
    return s.str();
  }

  struct Train {
    DataSource src;
    std::string profile = "desk", config_path, out, precision, split_file,
                attn_norm;
    std::uint64_t seed = 0;
    int epochs = 0, batch_size = 0;
    double max_lr = 0;
    bool lr_sweep = false, no_standardize = false, no_virtual = false,
         dry_run = false;
    CLI::App *app = nullptr;

    void setup(CLI::App *a) {
      app = a;
      src.add_to(app, true);
      app->add_option("--profile", profile,
                      "Model size: desk (L=4, d=128, C=4, d_p=16) or paper "
                      "(L=8, d=512, C=4, d_p=32)")
          ->check(CLI::IsMember({ "desk", "paper" }))
          ->capture_default_str();
      app->add_option("--config", config_path,
                      "JSON file of training/model settings; flags win over "
                      "it, it wins over the profile")
          ->check(CLI::ExistingFile);
      app->add_option("--seed", seed, "Seed for split, init and shuffling");
      app->add_option("--out", out,
                      "Output directory (checkpoint, metrics.jsonl, "
                      "split.txt)")
          ->required();
      app->add_option("--epochs", epochs, "Training epochs")
          ->check(CLI::PositiveNumber);
      app->add_option("--batch-size", batch_size, "Graphs per batch")
          ->check(CLI::PositiveNumber);
      app->add_option("--max-lr", max_lr, "Peak one-cycle learning rate");
      app->add_flag("--lr-sweep", lr_sweep,
                    "Train once per max_lr in {1e-3, 5e-4, 1e-4, 5e-5} and "
                    "keep the best validation run");
      app->add_option("--precision", precision, "f32 or f64")
          ->check(CLI::IsMember({ "f32", "f64" }));
      app->add_option("--split-file", split_file,
                      "Explicit train/val/test index file (default: seeded "
                      "6:2:2 random split)");
      app->add_option("--attn-norm", attn_norm,
                      "Ring attention normalization: softmax or linear")
          ->check(CLI::IsMember({ "softmax", "linear" }));
      app->add_flag("--no-standardize", no_standardize,
                    "Train on raw targets instead of per-task z-scores");
      app->add_flag("--no-virtual", no_virtual,
                    "Disable the virtual ring node (ablation)");
      app->add_flag("--dry-run", dry_run,
                    "Print the resolved configuration and exit");
    }

    bool given(const char *name) const { return app->count(name) > 0; }

    TrainConfig resolve(int threads) const {
      TrainConfig c;
      c.model = profile == "paper" ? model::ModelConfig::paper()
                                   : model::ModelConfig::desk();
      if (!config_path.empty()) {
        std::ifstream f(config_path);
        const nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
        if (j.is_discarded())
          throw Error(ErrorCode::kInvalidConfig,
                      config_path + " is not valid JSON");
        c = TrainConfig::from_json(j, c);
      }
      if (given("--seed"))
        c.seed = seed;
      if (given("--epochs"))
        c.epochs = epochs;
      if (given("--batch-size"))
        c.batch_size = batch_size;
      if (given("--max-lr"))
        c.max_lr = max_lr;
      if (given("--precision"))
        c.precision = parse_precision(precision);
      if (given("--split-file"))
        c.split_file = split_file;
      if (given("--attn-norm"))
        c.model.attn_norm = model::parse_attn_norm(attn_norm);
      if (no_standardize)
        c.standardize = false;
      if (no_virtual)
        c.model.use_virtual = false;
      c.threads = threads;
      c.validate();
      return c;
    }

    int run(int threads, std::ostream &out_s, std::ostream &err) const {
      TrainConfig config = resolve(threads);
      const model::ModelConfig &m = config.model;
      err << "config: L=" << m.layers << " d=" << m.hidden << " C=" << m.heads
          << " d_p=" << m.pe_dim << " attn=" << model::attn_norm_name(m.attn_norm)
          << " virtual=" << (m.use_virtual ? "on" : "off")
          << " epochs=" << config.epochs << " batch=" << config.batch_size
          << " max_lr=" << config.max_lr << " seed=" << config.seed << '\n';
      {
        ordered_json echo;
        echo["config"] = config.to_json();
        out_s << echo.dump() << '\n';
      }
      if (dry_run)
        return kOk;

      Dataset ds = src.load(threads, err, {});
      if (std::none_of(ds.graphs.begin(), ds.graphs.end(),
                       [](const HierGraph &h) {
                         return h.ring_graph.has_virtual;
                       })
          && config.model.use_virtual) {
        err << "note: input graphs carry no virtual node; training without "
               "one\n";
        config.model.use_virtual = false;
      }
      apply_split(ds, config);
      const fs::path dir(out);
      fs::create_directories(dir);
      write_text(dir / "split.txt", split_to_text(ds));
      write_text(dir / "config.json", config.to_json().dump(2) + "\n");

      std::vector<double> grid { config.max_lr };
      if (lr_sweep)
        grid = kLrGrid;
      std::optional<TrainResult> best;
      std::string best_metrics;
      double best_lr = 0, best_score = 0;
      ordered_json sweep = ordered_json::array();
      for (double lr: grid) {
        TrainConfig c = config;
        c.max_lr = lr;
        std::ostringstream metrics;
        TrainResult r = train::train(ds, c, &metrics);
        const double score = selection_score(r);
        err << "max_lr=" << lr << " best_epoch=" << r.best_epoch
            << " score=" << score << '\n';
        if (lr_sweep) {
          write_text(dir / "sweep" / ("metrics_lr" + lr_label(lr) + ".jsonl"),
                     metrics.str());
          sweep.push_back({ { "max_lr", lr },
                            { "best_epoch", r.best_epoch },
                            { "score", score } });
        }
        if (!best || score < best_score) {
          best_score = score;
          best_lr = lr;
          best_metrics = metrics.str();
          best = std::move(r);
        }
      }
      write_text(dir / "metrics.jsonl", best_metrics);
      save_model(dir, best->best);

      ordered_json j;
      j["out"] = out;
      j["records"] = ds.size();
      j["train"] = ds.indices(Split::kTrain).size();
      j["val"] = ds.indices(Split::kVal).size();
      j["test"] = ds.indices(Split::kTest).size();
      j["max_lr"] = best_lr;
      j["best_epoch"] = best->best_epoch;
      j["final_train_mae"] = best->log.back().train_mae;
      j["best_val_mae"] =
          best->log.at(static_cast<std::size_t>(best->best_epoch - 1)).val_mae;
      const EvalResult test =
          evaluate(best->best, ds, Split::kTest, 64, threads);
      j["test_mae"] = test.mae;
      j["test_oov_rings"] = test.oov_rings;
      if (lr_sweep)
        j["sweep"] = sweep;
      out_s << j.dump() << '\n';
      return kOk;
    }
  };

  // ---- eval ----------------------------------------------------------------

  struct Eval {
    std::string model_dir, split = "test", split_file;
    DataSource src;

    void setup(CLI::App *app) {
      app->add_option("--model", model_dir, "Directory written by train")
          ->required();
      src.add_to(app, true);
      app->add_option("--split", split,
                      "train, val, test or all (records of the split file)")
          ->check(CLI::IsMember({ "train", "val", "test", "all" }))
          ->capture_default_str();
      app->add_option("--split-file", split_file,
                      "Split file (default: split.txt next to the model)");
    }

    int run(int threads, std::ostream &out, std::ostream &err) const {
      const ModelBundle bundle = load_model(model_dir);
      Dataset ds = src.load(threads, err, bundle.target_names);
      std::optional<Split> which;
      if (split != "all") {
        which = parse_split(split);
        fs::path file = split_file;
        if (file.empty())
          file = fs::path(model_dir) / "split.txt";
        if (!fs::exists(file))
          throw Error(ErrorCode::kIo, "no split file at " + file.string()
                                          + " (use --split all)");
        split_from_file(ds, file);
      }
      const EvalResult r = evaluate(bundle, ds, which, 64, threads);
      ordered_json j = r.to_json(bundle.target_names);
      j["split"] = split;
      out << j.dump() << '\n';
      return kOk;
    }
  };

  // ---- predict -------------------------------------------------------------

  struct Predict {
    std::string model_dir, in, smiles_col = "smiles", out_path;
    std::vector<std::string> smiles;

    void setup(CLI::App *app) {
      app->add_option("--model", model_dir, "Directory written by train")
          ->required();
      app->add_option("--smiles", smiles, "SMILES strings to score");
      app->add_option("--in", in, "CSV file of SMILES to score");
      app->add_option("--smiles-col", smiles_col, "SMILES column of --in")
          ->capture_default_str();
      app->add_option("--out", out_path,
                      "Write JSONL here instead of stdout");
    }

    int run(int threads, std::ostream &out, std::ostream &) const {
      const ModelBundle bundle = load_model(model_dir);
      std::vector<std::string> queries = smiles;
      if (!in.empty()) {
        const std::vector<std::string> col = read_csv_column(in, smiles_col);
        queries.insert(queries.end(), col.begin(), col.end());
      }
      if (queries.empty())
        throw Error(ErrorCode::kInvalidConfig, "give --smiles or --in");

      std::string text;
      for (const Prediction &p: predict(bundle, queries, 64, threads)) {
        ordered_json j;
        j["smiles"] = p.smiles;
        j["status"] = p.status;
        if (p.status == "ok") {
          ordered_json values;
          for (std::size_t t = 0; t < p.values.size(); ++t)
            values[bundle.target_names[t]] = p.values[t];
          j["values"] = std::move(values);
        } else {
          j["error"] = p.error;
        }
        text += j.dump() + "\n";
      }
      if (out_path.empty())
        out << text;
      else
        write_text(out_path, text);
      return kOk;
    }
  };

  // ---- gradcheck -----------------------------------------------------------

  struct GradCheck {
    bool full = false;
    std::uint64_t seed = 20240611;
    std::string inject;

    void setup(CLI::App *app) {
      app->add_flag("--full", full,
                    "Also check the whole model (L=2, d=16, C=2, d_p=4) on a "
                    "3-molecule batch");
      app->add_option("--seed", seed, "Seed for the op-level shapes and data")
          ->capture_default_str();
#ifdef RINGKIT_FAULT_INJECTION
      app->add_option("--inject-fault", inject,
                      "Negate the adjoint of this op (sabotage test)");
#endif
    }

    int run(int, std::ostream &out, std::ostream &err) const {
      if (!inject.empty()) {
        const std::optional<tensor::Op> op = tensor::parse_op_name(inject);
        if (!op)
          throw Error(ErrorCode::kInvalidConfig, "unknown op " + inject);
        tensor::testing::set_flipped_adjoint(op);
      }
      const selfcheck::SuiteResult ops = selfcheck::op_suite(seed);
      ordered_json j;
      j["ops"] = ops.to_json();
      bool passed = ops.passed;
      if (full) {
        const selfcheck::SuiteResult model = selfcheck::full_model_suite();
        j["full"] = model.to_json();
        passed = passed && model.passed;
      }
      tensor::testing::set_flipped_adjoint(std::nullopt);
      j["passed"] = passed;
      out << j.dump() << '\n';
      if (!passed) {
        err << "gradient check failed\n";
        return kNumeric;
      }
      return kOk;
    }
  };

}  // namespace

int run(const std::vector<std::string> &args, std::ostream &out,
        std::ostream &err) {
  CLI::App app { "Hierarchical ring graphs and ring-aware graph transformers "
                 "for molecular property regression.",
                 "ringkit" };
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");
  GlobalOptions global;
  global.threads_opt =
      app.add_option("--threads", global.threads,
                     "Worker cap for graph building and evaluation "
                     "(default: RINGKIT_THREADS or 1)")
          ->check(CLI::PositiveNumber);

  BuildGraphs build;
  Stats stats;
  Train train_cmd;
  Eval eval;
  Predict pred;
  GradCheck grad;
  CLI::App *build_app = app.add_subcommand(
      "build-graphs", "SMILES CSV to hierarchical graph JSONL");
  build.setup(build_app);
  CLI::App *stats_app = app.add_subcommand(
      "stats", "Corpus summary: graphs, average atoms, bonds and rings");
  stats.setup(stats_app);
  CLI::App *train_app = app.add_subcommand(
      "train", "Train a model (Adam, one-cycle schedule, MAE loss)");
  train_cmd.setup(train_app);
  CLI::App *eval_app =
      app.add_subcommand("eval", "Per-task MAE of a trained model");
  eval.setup(eval_app);
  CLI::App *pred_app =
      app.add_subcommand("predict", "Predict properties for SMILES");
  pred.setup(pred_app);
  CLI::App *grad_app = app.add_subcommand(
      "gradcheck", "Finite-difference check of the autodiff engine");
  grad.setup(grad_app);
  for (CLI::App *sub: app.get_subcommands({}))
    sub->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  CLI::App *active = nullptr;
  try {
    const int threads = global.resolved();
    if (build_app->parsed()) {
      active = build_app;
      return build.run(threads, out, err);
    }
    if (stats_app->parsed()) {
      active = stats_app;
      return stats.run(threads, out, err);
    }
    if (train_app->parsed()) {
      active = train_app;
      return train_cmd.run(threads, out, err);
    }
    if (eval_app->parsed()) {
      active = eval_app;
      return eval.run(threads, out, err);
    }
    if (pred_app->parsed()) {
      active = pred_app;
      return pred.run(threads, out, err);
    }
    active = grad_app;
    return grad.run(threads, out, err);
  } catch (const Error &e) {
    err << "error: " << e.what() << '\n';
    const int code = exit_code_for(e.code());
    if (code == kUsage && active)
      err << active->help();
    return code;
  } catch (const fs::filesystem_error &e) {
    err << "error: " << e.what() << '\n';
    return kData;
  } catch (const nlohmann::json::exception &e) {
    err << "error: " << e.what() << '\n';
    return kData;
  }
}

}  // namespace ringkit::cli
