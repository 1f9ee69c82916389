//
// Project ringkit - Copyright 2026 ringkit authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef RINGKIT_TRAIN_H_
#define RINGKIT_TRAIN_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ringkit/hiergraph.h"
#include "ringkit/model.h"

namespace ringkit::train {

enum class Split : std::uint8_t {
  kUnassigned,
  kTrain,
  kVal,
  kTest,
};

std::string_view split_name(Split s);
Split parse_split(std::string_view name);  // throws InvalidConfig

enum class Precision : std::uint8_t {
  kF32,
  kF64,
};

std::string_view precision_name(Precision p);
Precision parse_precision(std::string_view name);  // throws InvalidConfig

struct Rejection {
  std::size_t row = 0;  // 1-based data row (header excluded)
  std::string smiles;
  std::string reason;
};

/// Per-task z-score parameters. A disabled task passes through unchanged.
struct Standardization {
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<bool> enabled;

  static Standardization identity(std::size_t tasks);

  double forward(std::size_t task, double y) const;
  double inverse(std::size_t task, double z) const;

  nlohmann::json to_json() const;
  static Standardization from_json(const nlohmann::json &j);

  bool operator==(const Standardization &) const = default;
};

struct Dataset {
  std::vector<std::string> target_names;
  std::vector<std::string> smiles;
  /// Graphs carry their raw (unstandardized) targets.
  std::vector<HierGraph> graphs;
  std::vector<Split> split;
  std::vector<Rejection> rejects;
  std::size_t rows_read = 0;

  std::size_t size() const { return graphs.size(); }
  std::vector<std::size_t> indices(Split s) const;
};

struct LoadOptions {
  bool add_virtual = true;
  /// Graph building fans out over this many workers; results keep file order.
  int threads = 1;
  /// Rejections are also reported here when set.
  std::ostream *log = nullptr;
};

/// Reads a headered UTF-8 CSV. Rows whose SMILES fails to parse or whose
/// targets are not finite numbers are rejected, not fatal. Throws Io,
/// MissingColumn and EmptyDataset.
Dataset load_csv(const std::filesystem::path &path, std::string_view smiles_col,
                 const std::vector<std::string> &target_cols,
                 const LoadOptions &options = {});

/// One column of a headered CSV, in row order (blank lines skipped). Throws
/// Io and MissingColumn.
std::vector<std::string> read_csv_column(const std::filesystem::path &path,
                                         std::string_view column);

/// Reads serialized HierGraph records. target_names labels the "y" vector;
/// when empty, names default to y0, y1, ... Throws Io, SchemaError and
/// EmptyDataset.
Dataset load_jsonl(const std::filesystem::path &path,
                   std::vector<std::string> target_names = {});

struct SplitRatios {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

/// Seeded shuffle, then a train/val/test cut. Identical on every platform
/// for a given seed. Throws InvalidConfig when the ratios do not sum to 1.
void split_random(Dataset &ds, std::uint64_t seed, SplitRatios ratios = {});

/// Applies an explicit split: "train", "val" and "test" header lines, each
/// followed by 0-based record indices one per line. Unlisted records stay
/// unassigned. Throws IndexOutOfRange, OverlappingSplits, SchemaError, Io.
void split_from_text(Dataset &ds, std::string_view text);
void split_from_file(Dataset &ds, const std::filesystem::path &path);
std::string split_to_text(const Dataset &ds);

/// Mean and population std of each task over the training split. A task with
/// zero spread is left unstandardized, with a warning on log.
Standardization fit_standardization(const Dataset &ds, bool enabled,
                                    std::ostream *log = nullptr);

struct TrainConfig {
  int epochs = 100;
  int batch_size = 32;
  double max_lr = 1e-3;
  std::uint64_t seed = 0;
  Precision precision = Precision::kF32;
  model::ModelConfig model = model::ModelConfig::desk();
  bool standardize = true;
  /// Empty means a seeded random split with ratios.
  std::string split_file;
  SplitRatios ratios;
  int threads = 1;

  /// Throws InvalidConfig.
  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep the values of base.
  static TrainConfig from_json(const nlohmann::json &j,
                               const TrainConfig &base);
};

/// Assigns splits from config.split_file, else randomly with config.seed.
void apply_split(Dataset &ds, const TrainConfig &config);

/// Everything needed to run a trained model: weights plus the vocabulary
/// and target scaling they were trained against.
struct ModelBundle {
  model::ModelConfig config;
  model::FeatureDims dims;
  Vocabulary vocab;
  std::vector<std::string> target_names;
  Standardization standardization;
  Precision precision = Precision::kF32;
  /// Values are exactly representable in the bundle precision.
  model::ModelParams<double> params;
};

void save_model(const std::filesystem::path &dir, const ModelBundle &bundle);
/// Throws Io, SchemaError, VocabMismatch.
ModelBundle load_model(const std::filesystem::path &dir);

struct EpochLog {
  int epoch = 0;
  std::vector<double> train_mae;  // original units, per task
  std::vector<double> val_mae;  // empty without a validation split
  double lr = 0.0;  // last rate used in the epoch

  nlohmann::ordered_json to_json() const;
};

struct TrainResult {
  ModelBundle best;  // lowest validation error (last epoch without val)
  int best_epoch = 0;
  std::vector<EpochLog> log;
  std::vector<double> lr_trace;  // one entry per optimizer step
};

/// Adam under a one-cycle schedule on the training split. The per-epoch
/// train MAE averages each training graph's error as seen by its batch
/// before that batch's update. Deterministic for a given config; the thread
/// count never changes results. progress, when set, gets one JSONL line per
/// epoch.
TrainResult train(const Dataset &ds, const TrainConfig &config,
                  std::ostream *progress = nullptr);

struct EvalResult {
  std::vector<double> mae;  // original units, per task
  std::size_t count = 0;
  long oov_rings = 0;

  nlohmann::ordered_json to_json(
      const std::vector<std::string> &target_names) const;
};

/// Records of the given split (all records when split is nullopt).
EvalResult evaluate(const ModelBundle &bundle, const Dataset &ds,
                    std::optional<Split> split, int batch_size = 64,
                    int threads = 1);

/// De-standardized predictions, one row per graph.
std::vector<std::vector<double>> predict_graphs(
    const ModelBundle &bundle, const std::vector<const HierGraph *> &graphs,
    int batch_size = 64, int threads = 1);

struct Prediction {
  std::string smiles;
  std::string status;  // "ok" or "parse_error"
  std::string error;
  std::vector<double> values;
};

std::vector<Prediction> predict(const ModelBundle &bundle,
                                const std::vector<std::string> &smiles,
                                int batch_size = 64, int threads = 1);

/// Worker count from an explicit request, else RINGKIT_THREADS, else 1.
int resolve_threads(std::optional<int> requested);

}  // namespace ringkit::train

#endif  // RINGKIT_TRAIN_H_
