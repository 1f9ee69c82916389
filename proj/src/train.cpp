//
// Project ringkit - Copyright 2026 ringkit authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "ringkit/train.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "ringkit/checkpoint.h"
#include "ringkit/error.h"
#include "ringkit/optim.h"

namespace ringkit::train {

using model::EncodedGraph;
using model::ModelParams;
using tensor::Tensor;

std::string_view split_name(Split s) {
  switch (s) {
  case Split::kTrain:
    return "train";
  case Split::kVal:
    return "val";
  case Split::kTest:
    return "test";
  case Split::kUnassigned:
    break;
  }
  return "unassigned";
}

Split parse_split(std::string_view name) {
  if (name == "train")
    return Split::kTrain;
  if (name == "val")
    return Split::kVal;
  if (name == "test")
    return Split::kTest;
  throw Error(ErrorCode::kInvalidConfig,
              "split must be train, val or test, got " + std::string(name));
}

std::string_view precision_name(Precision p) {
  return p == Precision::kF32 ? "f32" : "f64";
}

Precision parse_precision(std::string_view name) {
  if (name == "f32")
    return Precision::kF32;
  if (name == "f64")
    return Precision::kF64;
  throw Error(ErrorCode::kInvalidConfig,
              "precision must be f32 or f64, got " + std::string(name));
}

// ---------------------------------------------------------------------------
// Standardization

Standardization Standardization::identity(std::size_t tasks) {
  return { std::vector<double>(tasks, 0.0), std::vector<double>(tasks, 1.0),
           std::vector<bool>(tasks, false) };
}

double Standardization::forward(std::size_t task, double y) const {
  return enabled[task] ? (y - mean[task]) / std[task] : y;
}

double Standardization::inverse(std::size_t task, double z) const {
  return enabled[task] ? z * std[task] + mean[task] : z;
}

nlohmann::json Standardization::to_json() const {
  return { { "mean", mean }, { "std", std }, { "enabled", enabled } };
}

Standardization Standardization::from_json(const nlohmann::json &j) {
  Standardization s;
  try {
    s.mean = j.at("mean").get<std::vector<double>>();
    s.std = j.at("std").get<std::vector<double>>();
    s.enabled = j.at("enabled").get<std::vector<bool>>();
  } catch (const nlohmann::json::exception &e) {
    throw SchemaError(std::string("standardization: ") + e.what(), 1);
  }
  if (s.std.size() != s.mean.size() || s.enabled.size() != s.mean.size())
    throw SchemaError("standardization arrays differ in length", 1);
  return s;
}

std::vector<std::size_t> Dataset::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == s)
      out.push_back(i);
  }
  return out;
}

int resolve_threads(std::optional<int> requested) {
  if (requested)
    return std::max(1, *requested);
  if (const char *env = std::getenv("RINGKIT_THREADS")) {
    int n = 0;
    const std::string_view v(env);
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
    if (ec == std::errc() && ptr == v.data() + v.size() && n >= 1)
      return n;
  }
  return 1;
}

namespace {

  // Runs fn(i) for i in [0, n) across up to `threads` workers. Each index
  // writes only its own output slot, so results never depend on scheduling.
  template <class Fn>
  void parallel_for(std::size_t n, int threads, Fn &&fn) {
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(std::max(1, threads)), n);
    if (workers <= 1) {
      for (std::size_t i = 0; i < n; ++i)
        fn(i);
      return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += workers)
            fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (std::thread &t: pool)
      t.join();
    for (const std::exception_ptr &e: errors) {
      if (e)
        std::rethrow_exception(e);
    }
  }

  // Unbiased draw in [0, n) from the raw 64-bit stream (the standard
  // distributions are implementation-defined, this is not).
  std::uint64_t bounded(std::mt19937_64 &rng, std::uint64_t n) {
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max()
        - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do
      x = rng();
    while (x >= limit);
    return x % n;
  }

  template <class V>
  void shuffle(std::vector<V> &v, std::mt19937_64 &rng) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[bounded(rng, i)]);
  }

  // Minimal RFC 4180 reader: quoted fields, doubled quotes, CRLF.
  std::vector<std::vector<std::string>> parse_csv(std::istream &in) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false, any = false;
    char ch;
    while (in.get(ch)) {
      any = true;
      if (quoted) {
        if (ch == '"') {
          if (in.peek() == '"') {
            field += '"';
            in.get();
          } else {
            quoted = false;
          }
        } else {
          field += ch;
        }
      } else if (ch == '"') {
        quoted = true;
      } else if (ch == ',') {
        row.push_back(std::move(field));
        field.clear();
      } else if (ch == '\n' || ch == '\r') {
        if (ch == '\r' && in.peek() == '\n')
          in.get();
        row.push_back(std::move(field));
        field.clear();
        rows.push_back(std::move(row));
        row.clear();
        any = false;
      } else {
        field += ch;
      }
    }
    if (any) {
      row.push_back(std::move(field));
      rows.push_back(std::move(row));
    }
    return rows;
  }

  std::optional<double> parse_number(std::string_view s) {
    while (!s.empty() && s.front() == ' ')
      s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ')
      s.remove_suffix(1);
    if (s.empty())
      return std::nullopt;
    double v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
      return std::nullopt;
    return v;
  }

  bool is_blank(const std::vector<std::string> &row) {
    return row.size() == 1 && row[0].empty();
  }

}  // namespace

// ---------------------------------------------------------------------------
// Loading

Dataset load_csv(const std::filesystem::path &path, std::string_view smiles_col,
                 const std::vector<std::string> &target_cols,
                 const LoadOptions &options) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::vector<std::vector<std::string>> rows = parse_csv(in);
  if (rows.empty())
    throw Error(ErrorCode::kEmptyDataset, path.string() + " has no header");

  std::vector<std::string> &header = rows.front();
  if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF"))
    header[0].erase(0, 3);
  const auto column = [&](std::string_view name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw Error(ErrorCode::kMissingColumn,
                  "column '" + std::string(name) + "' not in " + path.string());
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t smiles_idx = column(smiles_col);
  std::vector<std::size_t> target_idx;
  for (const std::string &c: target_cols)
    target_idx.push_back(column(c));

  struct Slot {
    std::optional<HierGraph> graph;
    std::string smiles;
    std::string reason;
  };
  std::vector<std::size_t> data_rows;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (!is_blank(rows[r]))
      data_rows.push_back(r);
  }
  std::vector<Slot> slots(data_rows.size());
  parallel_for(data_rows.size(), options.threads, [&](std::size_t k) {
    const std::vector<std::string> &row = rows[data_rows[k]];
    Slot &slot = slots[k];
    if (row.size() != header.size()) {
      slot.smiles = smiles_idx < row.size() ? row[smiles_idx] : "";
      slot.reason = "expected " + std::to_string(header.size())
                    + " fields, found " + std::to_string(row.size());
      return;
    }
    slot.smiles = row[smiles_idx];
    std::vector<double> y;
    for (std::size_t t = 0; t < target_idx.size(); ++t) {
      const std::optional<double> v = parse_number(row[target_idx[t]]);
      if (!v) {
        slot.reason = "NonFiniteTarget: column '" + target_cols[t]
                      + "' value '" + row[target_idx[t]] + "'";
        return;
      }
      y.push_back(*v);
    }
    try {
      HierGraph h = build_hier_graph(slot.smiles, options.add_virtual);
      h.targets = std::move(y);
      slot.graph = std::move(h);
    } catch (const Error &e) {
      slot.reason = e.what();
    }
  });

  Dataset ds;
  ds.target_names = target_cols;
  ds.rows_read = data_rows.size();
  for (std::size_t k = 0; k < slots.size(); ++k) {
    Slot &s = slots[k];
    if (s.graph) {
      ds.smiles.push_back(std::move(s.smiles));
      ds.graphs.push_back(std::move(*s.graph));
    } else {
      Rejection rej { data_rows[k], std::move(s.smiles), std::move(s.reason) };
      if (options.log)
        *options.log << "rejected row " << rej.row << " ('" << rej.smiles
                     << "'): " << rej.reason << '\n';
      ds.rejects.push_back(std::move(rej));
    }
  }
  ds.split.assign(ds.graphs.size(), Split::kUnassigned);
  if (ds.graphs.empty())
    throw Error(ErrorCode::kEmptyDataset,
                "no usable rows in " + path.string() + " ("
                    + std::to_string(ds.rejects.size()) + " rejected)");
  return ds;
}

std::vector<std::string> read_csv_column(const std::filesystem::path &path,
                                         std::string_view column) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::vector<std::vector<std::string>> rows = parse_csv(in);
  if (rows.empty())
    throw Error(ErrorCode::kMissingColumn, path.string() + " has no header");
  std::vector<std::string> &header = rows.front();
  if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF"))
    header[0].erase(0, 3);
  const auto it = std::find(header.begin(), header.end(), column);
  if (it == header.end())
    throw Error(ErrorCode::kMissingColumn, "column '" + std::string(column)
                                               + "' not in " + path.string());
  const auto col = static_cast<std::size_t>(it - header.begin());
  std::vector<std::string> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (!is_blank(rows[r]))
      out.push_back(col < rows[r].size() ? rows[r][col] : "");
  }
  return out;
}

Dataset load_jsonl(const std::filesystem::path &path,
                   std::vector<std::string> target_names) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::kIo, "cannot read " + path.string());
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r")
      continue;
    HierGraph h = deserialize(line, line_no);
    if (target_names.empty() && ds.graphs.empty()) {
      for (std::size_t t = 0; t < h.targets.size(); ++t)
        target_names.push_back("y" + std::to_string(t));
    }
    if (h.targets.size() != target_names.size())
      throw SchemaError("expected " + std::to_string(target_names.size())
                            + " targets, found "
                            + std::to_string(h.targets.size()),
                        line_no);
    for (double v: h.targets) {
      if (!std::isfinite(v))
        throw SchemaError("non-finite target", line_no);
    }
    ds.smiles.push_back(h.atom_graph.source_smiles);
    ds.graphs.push_back(std::move(h));
  }
  if (ds.graphs.empty())
    throw Error(ErrorCode::kEmptyDataset, path.string() + " has no records");
  ds.target_names = std::move(target_names);
  ds.rows_read = ds.graphs.size();
  ds.split.assign(ds.graphs.size(), Split::kUnassigned);
  return ds;
}

// ---------------------------------------------------------------------------
// Splits

void split_random(Dataset &ds, std::uint64_t seed, SplitRatios ratios) {
  const double total = ratios.train + ratios.val + ratios.test;
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0
      || std::abs(total - 1.0) > 1e-9)
    throw Error(ErrorCode::kInvalidConfig, "split ratios must sum to 1");
  const std::size_t n = ds.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  shuffle(order, rng);
  const auto n_train = static_cast<std::size_t>(std::llround(ratios.train * n));
  const auto n_val = std::min(
      n - n_train, static_cast<std::size_t>(std::llround(ratios.val * n)));
  ds.split.assign(n, Split::kTest);
  for (std::size_t k = 0; k < n; ++k) {
    if (k < n_train)
      ds.split[order[k]] = Split::kTrain;
    else if (k < n_train + n_val)
      ds.split[order[k]] = Split::kVal;
  }
}

void split_from_text(Dataset &ds, std::string_view text) {
  std::vector<Split> assignment(ds.size(), Split::kUnassigned);
  std::optional<Split> current;
  std::size_t line_no = 0;
  std::istringstream in { std::string(text) };
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
      line.pop_back();
    if (line.empty())
      continue;
    if (line == "train" || line == "val" || line == "test") {
      current = parse_split(line);
      continue;
    }
    if (!current)
      throw SchemaError("index before any train/val/test header", line_no);
    std::size_t idx = 0;
    const auto [ptr, ec] =
        std::from_chars(line.data(), line.data() + line.size(), idx);
    if (ec != std::errc() || ptr != line.data() + line.size())
      throw SchemaError("not an index: '" + line + "'", line_no);
    if (idx >= ds.size())
      throw Error(ErrorCode::kIndexOutOfRange,
                  "index " + std::to_string(idx) + " on line "
                      + std::to_string(line_no) + " but the dataset has "
                      + std::to_string(ds.size()) + " records");
    if (assignment[idx] != Split::kUnassigned)
      throw Error(ErrorCode::kOverlappingSplits,
                  "index " + std::to_string(idx) + " listed twice (line "
                      + std::to_string(line_no) + ")");
    assignment[idx] = *current;
  }
  ds.split = std::move(assignment);
}

void split_from_file(Dataset &ds, const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  split_from_text(ds, buf.str());
}

std::string split_to_text(const Dataset &ds) {
  std::string out;
  for (const Split s: { Split::kTrain, Split::kVal, Split::kTest }) {
    out += split_name(s);
    out += '\n';
    for (std::size_t i: ds.indices(s))
      out += std::to_string(i) + '\n';
  }
  return out;
}

Standardization fit_standardization(const Dataset &ds, bool enabled,
                                    std::ostream *log) {
  const std::size_t tasks = ds.target_names.size();
  Standardization s = Standardization::identity(tasks);
  if (!enabled)
    return s;
  const std::vector<std::size_t> train = ds.indices(Split::kTrain);
  if (train.empty())
    throw Error(ErrorCode::kEmptyDataset, "training split is empty");
  for (std::size_t t = 0; t < tasks; ++t) {
    double sum = 0;
    for (std::size_t i: train)
      sum += ds.graphs[i].targets[t];
    const double mean = sum / static_cast<double>(train.size());
    double ss = 0;
    for (std::size_t i: train) {
      const double d = ds.graphs[i].targets[t] - mean;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(train.size()));
    s.mean[t] = mean;
    if (sd > 0 && std::isfinite(sd)) {
      s.std[t] = sd;
      s.enabled[t] = true;
    } else if (log) {
      *log << "warning: target '" << ds.target_names[t]
           << "' is constant on the training split; standardization "
              "disabled for it\n";
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Configuration

void TrainConfig::validate() const {
  if (epochs < 1)
    throw Error(ErrorCode::kInvalidConfig, "epochs must be >= 1");
  if (batch_size < 1)
    throw Error(ErrorCode::kInvalidConfig, "batch_size must be >= 1");
  if (!(max_lr > 0.0 && max_lr < 1.0))
    throw Error(ErrorCode::kInvalidConfig, "max_lr must lie in (0, 1)");
  if (threads < 1)
    throw Error(ErrorCode::kInvalidConfig, "threads must be >= 1");
  model.validate();
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j = { { "epochs", epochs },
                       { "batch_size", batch_size },
                       { "max_lr", max_lr },
                       { "seed", seed },
                       { "precision", precision_name(precision) },
                       { "standardize", standardize },
                       { "split_file", split_file },
                       { "ratios", { ratios.train, ratios.val, ratios.test } },
                       { "model", model.to_json() } };
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json &j,
                                   const TrainConfig &base) {
  if (!j.is_object())
    throw Error(ErrorCode::kInvalidConfig, "config must be a JSON object");
  TrainConfig c = base;
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_lr = j.value("max_lr", c.max_lr);
    c.seed = j.value("seed", c.seed);
    if (j.contains("precision"))
      c.precision = parse_precision(j.at("precision").get<std::string>());
    c.standardize = j.value("standardize", c.standardize);
    c.split_file = j.value("split_file", c.split_file);
    if (j.contains("ratios")) {
      const auto r = j.at("ratios").get<std::vector<double>>();
      if (r.size() != 3)
        throw Error(ErrorCode::kInvalidConfig, "ratios needs 3 numbers");
      c.ratios = { r[0], r[1], r[2] };
    }
    // Model keys may sit under "model" or at the top level.
    nlohmann::json m = c.model.to_json();
    for (const char *key: { "L", "d", "C", "d_p", "max_degree", "attn_norm",
                            "use_virtual", "n_targets" }) {
      if (j.contains(key))
        m[key] = j.at(key);
    }
    if (j.contains("model")) {
      if (!j.at("model").is_object())
        throw Error(ErrorCode::kInvalidConfig, "model must be an object");
      m.update(j.at("model"));
    }
    c.model = model::ModelConfig::from_json(m);
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::kInvalidConfig, e.what());
  }
  c.validate();
  return c;
}

void apply_split(Dataset &ds, const TrainConfig &config) {
  if (config.split_file.empty())
    split_random(ds, config.seed, config.ratios);
  else
    split_from_file(ds, config.split_file);
}

// ---------------------------------------------------------------------------
// Bundles

void save_model(const std::filesystem::path &dir, const ModelBundle &bundle) {
  nlohmann::json meta;
  meta["config"] = bundle.config.to_json();
  meta["dims"] = { { "atom", bundle.dims.atom },
                   { "bond", bundle.dims.bond },
                   { "ring", bundle.dims.ring },
                   { "connection", bundle.dims.connection } };
  meta["vocab"] = bundle.vocab.to_json();
  meta["target_names"] = bundle.target_names;
  meta["standardization"] = bundle.standardization.to_json();
  if (bundle.precision == Precision::kF32) {
    const ModelParams<float> p = bundle.params.cast<float>();
    tensor::save_checkpoint(dir, tensor::Checkpoint<float> { p.names, p.tensors,
                                                             meta });
  } else {
    tensor::save_checkpoint(dir, tensor::Checkpoint<double> {
                                     bundle.params.names,
                                     bundle.params.tensors, meta });
  }
}

ModelBundle load_model(const std::filesystem::path &dir) {
  tensor::Checkpoint<double> ckpt = tensor::load_checkpoint<double>(dir);
  const nlohmann::json &meta = ckpt.metadata;
  ModelBundle b;
  try {
    b.config = model::ModelConfig::from_json(meta.at("config"));
    const nlohmann::json &d = meta.at("dims");
    b.dims = { d.at("atom").get<int>(), d.at("bond").get<int>(),
               d.at("ring").get<int>(), d.at("connection").get<int>() };
    b.vocab = Vocabulary::from_json(meta.at("vocab"));
    b.target_names = meta.at("target_names").get<std::vector<std::string>>();
    b.standardization = Standardization::from_json(meta.at("standardization"));
  } catch (const nlohmann::json::exception &e) {
    throw SchemaError(std::string("model manifest: ") + e.what(), 1);
  } catch (const Error &e) {
    if (e.code() == ErrorCode::kSchemaError)
      throw;
    throw SchemaError(std::string("model manifest: ") + e.what(), 1);
  }
  if (b.dims != model::FeatureDims::from_vocabulary(b.vocab))
    throw Error(ErrorCode::kVocabMismatch,
                "vocabulary widths disagree with the stored feature dims");
  if (b.target_names.size() != static_cast<std::size_t>(b.config.n_targets)
      || b.standardization.mean.size() != b.target_names.size())
    throw SchemaError("target count disagrees with n_targets", 1);
  std::ifstream manifest(dir / "manifest.json");
  const nlohmann::json m = nlohmann::json::parse(manifest, nullptr, false);
  b.precision = parse_precision(m.value("precision", std::string("f64")));
  b.params = ModelParams<double>::from_tensors(b.config, b.dims, ckpt.names,
                                               std::move(ckpt.params));
  return b;
}

nlohmann::ordered_json EpochLog::to_json() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["train_mae"] = train_mae;
  j["val_mae"] = val_mae;
  j["lr"] = lr;
  return j;
}

nlohmann::ordered_json EvalResult::to_json(
    const std::vector<std::string> &target_names) const {
  nlohmann::ordered_json j;
  j["count"] = count;
  j["targets"] = target_names;
  j["mae"] = mae;
  j["oov_rings"] = oov_rings;
  return j;
}

// ---------------------------------------------------------------------------
// Training and inference

namespace {

  std::vector<EncodedGraph> encode_all(const std::vector<const HierGraph *> &gs,
                                       const Vocabulary &vocab,
                                       const Standardization &st, int threads) {
    std::vector<EncodedGraph> out(gs.size());
    parallel_for(gs.size(), threads, [&](std::size_t i) {
      out[i] = model::encode_graph(*gs[i], vocab);
      for (std::size_t t = 0; t < out[i].targets.size(); ++t)
        out[i].targets[t] = st.forward(t, out[i].targets[t]);
    });
    return out;
  }

  // Standardized-scale predictions for graphs, batched in order. Batches
  // run on separate tapes so the split across workers cannot change values.
  template <class T>
  std::vector<std::vector<double>> predict_encoded(
      const ModelParams<T> &params, const std::vector<EncodedGraph> &enc,
      int batch_size, int threads) {
    const std::size_t n = enc.size();
    const std::size_t bs = static_cast<std::size_t>(std::max(1, batch_size));
    const std::size_t batches = (n + bs - 1) / bs;
    const std::size_t tasks = static_cast<std::size_t>(params.config.n_targets);
    std::vector<std::vector<double>> out(n, std::vector<double>(tasks));
    parallel_for(batches, threads, [&](std::size_t b) {
      const std::size_t lo = b * bs, hi = std::min(n, lo + bs);
      const auto batch = model::make_batch<T>(
          std::span<const EncodedGraph>(enc).subspan(lo, hi - lo),
          params.config, params.dims);
      const Tensor<T> pred = model::predict_batch(batch, params);
      for (std::size_t i = lo; i < hi; ++i) {
        for (std::size_t t = 0; t < tasks; ++t)
          out[i][t] = static_cast<double>(pred.at(i - lo, t));
      }
    });
    return out;
  }

  std::vector<double> mae_original(const std::vector<std::vector<double>> &z,
                                   const std::vector<const HierGraph *> &gs,
                                   const Standardization &st) {
    const std::size_t tasks = st.mean.size();
    std::vector<double> sum(tasks, 0.0);
    for (std::size_t i = 0; i < gs.size(); ++i) {
      for (std::size_t t = 0; t < tasks; ++t)
        sum[t] += std::abs(st.inverse(t, z[i][t]) - gs[i]->targets[t]);
    }
    for (double &s: sum)
      s /= static_cast<double>(std::max<std::size_t>(1, gs.size()));
    return sum;
  }

  std::vector<const HierGraph *> select(const Dataset &ds,
                                        const std::vector<std::size_t> &idx) {
    std::vector<const HierGraph *> out;
    for (std::size_t i: idx)
      out.push_back(&ds.graphs[i]);
    return out;
  }

  // Validation score used for model selection: task errors on the
  // standardized scale, averaged, so tasks with large units do not dominate.
  double selection_score(const std::vector<double> &mae,
                         const Standardization &st) {
    double s = 0;
    for (std::size_t t = 0; t < mae.size(); ++t)
      s += st.enabled[t] ? mae[t] / st.std[t] : mae[t];
    return s / static_cast<double>(std::max<std::size_t>(1, mae.size()));
  }

  template <class T>
  TrainResult train_impl(const Dataset &ds, TrainConfig config,
                         std::ostream *progress) {
    const std::vector<std::size_t> train_idx = ds.indices(Split::kTrain);
    const std::vector<std::size_t> val_idx = ds.indices(Split::kVal);
    if (train_idx.empty())
      throw Error(ErrorCode::kEmptyDataset, "training split is empty");
    const std::size_t tasks = ds.target_names.size();
    if (tasks == 0)
      throw Error(ErrorCode::kInvalidConfig, "no target columns");
    config.model.n_targets = static_cast<int>(tasks);
    config.validate();

    SignatureCounts counts;
    for (std::size_t i: train_idx)
      counts.add(ds.graphs[i]);
    TrainResult result;
    ModelBundle &best = result.best;
    best.config = config.model;
    best.vocab = Vocabulary::from_counts(counts);
    best.dims = model::FeatureDims::from_vocabulary(best.vocab);
    best.target_names = ds.target_names;
    best.standardization =
        fit_standardization(ds, config.standardize, progress ? &std::cerr
                                                             : nullptr);
    best.precision = std::is_same_v<T, float> ? Precision::kF32
                                              : Precision::kF64;
    const Standardization &st = best.standardization;

    const std::vector<const HierGraph *> train_graphs = select(ds, train_idx);
    const std::vector<const HierGraph *> val_graphs = select(ds, val_idx);
    const std::vector<EncodedGraph> train_enc =
        encode_all(train_graphs, best.vocab, st, config.threads);
    const std::vector<EncodedGraph> val_enc =
        encode_all(val_graphs, best.vocab, st, config.threads);

    ModelParams<T> params =
        ModelParams<T>::init(config.model, best.dims, config.seed);
    tensor::Adam<T> adam(params.tensors);

    const std::size_t n = train_idx.size();
    const std::size_t bs = static_cast<std::size_t>(config.batch_size);
    const std::int64_t per_epoch = static_cast<std::int64_t>((n + bs - 1) / bs);
    const std::int64_t total = per_epoch * config.epochs;
    std::mt19937_64 rng(config.seed ^ 0x5851F42D4C957F2DULL);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    double best_score = std::numeric_limits<double>::infinity();
    std::int64_t step = 0;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
      shuffle(order, rng);
      std::vector<double> abs_sum(tasks, 0.0);
      double lr = 0;
      for (std::size_t lo = 0; lo < n; lo += bs) {
        const std::size_t hi = std::min(n, lo + bs);
        std::vector<const EncodedGraph *> members;
        for (std::size_t k = lo; k < hi; ++k)
          members.push_back(&train_enc[order[k]]);
        const auto batch = model::make_batch<T>(
            std::span<const EncodedGraph *const>(members), config.model,
            best.dims);

        tensor::Tape<T> tape;
        const model::BoundParams<T> bound = model::bind(tape, params, true);
        const tensor::Var<T> pred = model::forward(batch, bound);
        const tensor::Var<T> loss = model::mae_loss(pred, batch.targets);
        for (std::size_t r = 0; r < members.size(); ++r) {
          const HierGraph &g = *train_graphs[order[lo + r]];
          for (std::size_t t = 0; t < tasks; ++t)
            abs_sum[t] += std::abs(
                st.inverse(t, static_cast<double>(pred.value().at(r, t)))
                - g.targets[t]);
        }
        const tensor::Gradients<T> grads = tape.backward(loss);
        std::vector<Tensor<T>> g;
        g.reserve(bound.vars.size());
        for (const tensor::Var<T> &v: bound.vars)
          g.push_back(grads.has(v) ? grads[v] : Tensor<T>(v.shape()));
        lr = tensor::onecycle_lr(step, total, config.max_lr);
        adam.step(params.tensors, g, lr);
        result.lr_trace.push_back(lr);
        ++step;
      }

      EpochLog entry;
      entry.epoch = epoch;
      entry.lr = lr;
      for (double s: abs_sum)
        entry.train_mae.push_back(s / static_cast<double>(n));
      double score = selection_score(entry.train_mae, st);
      if (!val_enc.empty()) {
        entry.val_mae = mae_original(
            predict_encoded(params, val_enc, 64, config.threads), val_graphs,
            st);
        score = selection_score(entry.val_mae, st);
      }
      // Without a validation split the final epoch is kept.
      if (val_enc.empty() || score < best_score || result.log.empty()) {
        best_score = score;
        best.params = params.template cast<double>();
        result.best_epoch = epoch;
      }
      if (progress)
        *progress << entry.to_json().dump() << '\n' << std::flush;
      result.log.push_back(std::move(entry));
    }
    return result;
  }

  std::vector<std::vector<double>> predict_standardized(
      const ModelBundle &bundle, const std::vector<EncodedGraph> &enc,
      int batch_size, int threads) {
    if (bundle.precision == Precision::kF32)
      return predict_encoded(bundle.params.cast<float>(), enc, batch_size,
                             threads);
    return predict_encoded(bundle.params, enc, batch_size, threads);
  }

}  // namespace

TrainResult train(const Dataset &ds, const TrainConfig &config,
                  std::ostream *progress) {
  if (config.precision == Precision::kF32)
    return train_impl<float>(ds, config, progress);
  return train_impl<double>(ds, config, progress);
}

EvalResult evaluate(const ModelBundle &bundle, const Dataset &ds,
                    std::optional<Split> split, int batch_size, int threads) {
  if (ds.target_names.size() != bundle.target_names.size())
    throw Error(ErrorCode::kShapeMismatch,
                "dataset has " + std::to_string(ds.target_names.size())
                    + " targets, model predicts "
                    + std::to_string(bundle.target_names.size()));
  std::vector<std::size_t> idx;
  if (split) {
    idx = ds.indices(*split);
  } else {
    idx.resize(ds.size());
    std::iota(idx.begin(), idx.end(), 0);
  }
  const std::vector<const HierGraph *> graphs = select(ds, idx);
  const std::vector<EncodedGraph> enc =
      encode_all(graphs, bundle.vocab, bundle.standardization, threads);
  EvalResult r;
  r.count = graphs.size();
  for (const EncodedGraph &e: enc)
    r.oov_rings += e.oov_rings;
  if (graphs.empty()) {
    r.mae.assign(bundle.target_names.size(), 0.0);
    return r;
  }
  r.mae = mae_original(predict_standardized(bundle, enc, batch_size, threads),
                       graphs, bundle.standardization);
  return r;
}

std::vector<std::vector<double>> predict_graphs(
    const ModelBundle &bundle, const std::vector<const HierGraph *> &graphs,
    int batch_size, int threads) {
  std::vector<EncodedGraph> enc(graphs.size());
  parallel_for(graphs.size(), threads, [&](std::size_t i) {
    enc[i] = model::encode_graph(*graphs[i], bundle.vocab);
    enc[i].targets.clear();
  });
  std::vector<std::vector<double>> z =
      predict_standardized(bundle, enc, batch_size, threads);
  for (std::vector<double> &row: z) {
    for (std::size_t t = 0; t < row.size(); ++t)
      row[t] = bundle.standardization.inverse(t, row[t]);
  }
  return z;
}

std::vector<Prediction> predict(const ModelBundle &bundle,
                                const std::vector<std::string> &smiles,
                                int batch_size, int threads) {
  std::vector<Prediction> out(smiles.size());
  std::vector<std::optional<HierGraph>> graphs(smiles.size());
  parallel_for(smiles.size(), threads, [&](std::size_t i) {
    out[i].smiles = smiles[i];
    try {
      graphs[i] = build_hier_graph(smiles[i], bundle.config.use_virtual);
      out[i].status = "ok";
    } catch (const Error &e) {
      out[i].status = "parse_error";
      out[i].error = e.what();
    }
  });
  std::vector<const HierGraph *> ok;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    if (graphs[i]) {
      ok.push_back(&*graphs[i]);
      where.push_back(i);
    }
  }
  const std::vector<std::vector<double>> values =
      predict_graphs(bundle, ok, batch_size, threads);
  for (std::size_t k = 0; k < where.size(); ++k)
    out[where[k]].values = values[k];
  return out;
}

}  // namespace ringkit::train
