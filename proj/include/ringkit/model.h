//
// Project ringkit - Copyright 2026 ringkit authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef RINGKIT_MODEL_H_
#define RINGKIT_MODEL_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ringkit/hiergraph.h"
#include "ringkit/tensor.h"

namespace ringkit::model {

using tensor::Tape;
using tensor::Tensor;
using tensor::Var;

enum class AttnNorm {
  kSoftmax,
  /// Raw scores divided by their (epsilon-guarded) neighborhood sum.
  kLinear,
};

std::string_view attn_norm_name(AttnNorm n);
AttnNorm parse_attn_norm(std::string_view name);  // throws InvalidConfig

struct ModelConfig {
  int layers = 8;
  int hidden = 512;
  int heads = 4;
  int pe_dim = 32;
  /// Degrees above this share the last positional-encoding row.
  int max_degree = 16;
  AttnNorm attn_norm = AttnNorm::kSoftmax;
  bool use_virtual = true;
  int n_targets = 1;

  static ModelConfig paper() { return {}; }
  static ModelConfig desk();

  /// Throws InvalidConfig.
  void validate() const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json &j);

  bool operator==(const ModelConfig &) const = default;
};

/// Input widths fixed by the featurizer and the vocabulary.
struct FeatureDims {
  int atom = kAtomFeatureDim;
  int bond = kBondFeatureDim;
  int ring = 1;
  int connection = 2;

  static FeatureDims from_vocabulary(const Vocabulary &v);
  bool operator==(const FeatureDims &) const = default;
};

/// Index of a parameter tensor inside ModelParams; -1 when absent.
struct Linear {
  int w = -1;
  int b = -1;
};

struct Mlp2 {
  Linear first;
  Linear second;
};

struct AtomLayerParams {
  Linear edge;  // W_e, b_e
  int eps = -1;
  Mlp2 mlp;
};

struct RingLayerParams {
  Mlp2 z;
  /// d x d each; head c owns columns [c*d/C, (c+1)*d/C).
  int wq = -1, wk = -1, wv = -1;
  int ws = -1, wo = -1;
  Mlp2 ffn;  // d -> 2d -> d
};

struct InterLayerParams {
  int eps = -1;
  Mlp2 mlp;
};

struct FuseParams {
  Mlp2 atom;
  Mlp2 ring;
};

struct ParamLayout {
  int w_atom = -1;
  int w_ring = -1;
  int degree_pe = -1;
  int virtual_embed = -1;
  std::vector<AtomLayerParams> atom;
  std::vector<RingLayerParams> ring;
  std::vector<InterLayerParams> inter;
  std::vector<FuseParams> fuse;
  Linear readout;
};

/// Named parameter tensors. Weights are stored input-major (in x out) so a
/// linear map is x W + b.
template <class T>
struct ModelParams {
  ModelConfig config;
  FeatureDims dims;
  ParamLayout layout;
  std::vector<std::string> names;
  std::vector<Tensor<T>> tensors;

  /// Xavier-uniform weights, zero biases and epsilons, reproducible for a
  /// given seed on every platform.
  static ModelParams init(const ModelConfig &config, const FeatureDims &dims,
                          std::uint64_t seed);
  /// Same layout with every tensor zero.
  static ModelParams zeros(const ModelConfig &config, const FeatureDims &dims);
  /// Attaches loaded tensors; throws VocabMismatch on any shape difference.
  static ModelParams from_tensors(const ModelConfig &config,
                                  const FeatureDims &dims,
                                  const std::vector<std::string> &names,
                                  std::vector<Tensor<T>> tensors);

  std::size_t count() const;
  int index_of(std::string_view name) const;  // -1 when absent

  template <class U>
  ModelParams<U> cast() const;
};

/// Per-molecule arrays derived once from a HierGraph and a vocabulary.
struct EncodedGraph {
  int num_atoms = 0;
  std::vector<double> atom_x;  // num_atoms x dims.atom
  std::vector<std::pair<int, int>> bonds;
  std::vector<double> bond_x;  // bonds x dims.bond
  int num_rings = 0;
  std::vector<double> ring_x;  // num_rings x dims.ring
  std::vector<int> ring_degree;  // real ring-graph degree
  /// Real ring connections with their connection-type index.
  std::vector<std::pair<int, int>> ring_edges;
  std::vector<int> ring_edge_type;
  std::vector<std::pair<int, int>> inter;  // (ring, atom)
  std::vector<double> targets;
  int oov_rings = 0;
};

EncodedGraph encode_graph(const HierGraph &h, const Vocabulary &vocab);

/// A packed batch. Ring nodes are laid out as every real ring of every graph
/// first, then one virtual node per graph when use_virtual is set.
template <class T>
struct BatchedGraph {
  int num_graphs = 0;
  int num_atoms = 0;
  int num_real_rings = 0;
  int num_virtual = 0;

  Tensor<T> atom_x;
  /// Directed atom edges (both directions of each bond).
  std::vector<int> atom_src, atom_dst;
  Tensor<T> atom_edge_x;
  std::vector<int> atom_graph;

  Tensor<T> ring_x;  // real rings only
  std::vector<int> ring_pe;  // PE row per ring node, virtual rows included
  std::vector<int> ring_graph;  // real rings only
  std::vector<int> real_rows, virtual_rows;

  /// Directed ring edges sorted by destination; edge_offsets has
  /// num_ring_nodes() + 1 entries.
  std::vector<int> ring_src, ring_dst, ring_edge_type;
  std::vector<int> edge_offsets;
  Tensor<T> ring_edge_x;

  std::vector<int> inter_ring, inter_atom;

  Tensor<T> targets;  // num_graphs x n_targets (may be empty)

  int num_ring_nodes() const { return num_real_rings + num_virtual; }
};

template <class T>
BatchedGraph<T> make_batch(std::span<const EncodedGraph *const> graphs,
                           const ModelConfig &config, const FeatureDims &dims);

template <class T>
BatchedGraph<T> make_batch(std::span<const EncodedGraph> graphs,
                           const ModelConfig &config, const FeatureDims &dims);

/// Parameter handles on a tape, indexable by the layout.
template <class T>
struct BoundParams {
  const ModelParams<T> *params = nullptr;
  std::vector<Var<T>> vars;

  const Var<T> &operator[](int index) const { return vars.at(index); }
};

/// Leaves for every parameter (trainable or constant).
template <class T>
BoundParams<T> bind(Tape<T> &tape, const ModelParams<T> &params,
                    bool trainable);

template <class T>
struct ForwardTrace {
  std::vector<Tensor<T>> atom_layers;  // h_A^0 .. h_A^L
  std::vector<Tensor<T>> ring_layers;  // h_R^0 .. h_R^L, virtual rows last
  /// Per layer, per directed ring edge (ordered like the batch), per head.
  std::vector<Tensor<T>> attention;
  std::size_t readout_width = 0;
};

template <class T>
struct Embeddings {
  Var<T> atom;
  Var<T> ring;
};

template <class T>
Embeddings<T> init_embeddings(const BatchedGraph<T> &batch,
                              const BoundParams<T> &p);

template <class T>
Var<T> atom_mp_layer(int layer, const Var<T> &atom_h,
                     const BatchedGraph<T> &batch, const BoundParams<T> &p);

/// attention_out, when given, receives the per-edge per-head weights.
template <class T>
Var<T> ring_attention_layer(int layer, const Var<T> &ring_h,
                            const BatchedGraph<T> &batch,
                            const BoundParams<T> &p,
                            Tensor<T> *attention_out = nullptr);

template <class T>
struct InterOutput {
  Var<T> atom;
  Var<T> ring;  // real rings only
};

template <class T>
InterOutput<T> inter_mp_layer(int layer, const Var<T> &atom_h,
                              const Var<T> &ring_h,
                              const BatchedGraph<T> &batch,
                              const BoundParams<T> &p);

/// Fuses atoms with MLP_A and real rings with MLP_R; virtual rows of
/// ring_attn carry over unchanged.
template <class T>
Embeddings<T> fuse(int layer, const Var<T> &atom_mp, const Var<T> &ring_attn,
                   const InterOutput<T> &inter, const BatchedGraph<T> &batch,
                   const BoundParams<T> &p);

/// Predictions (num_graphs x n_targets). Throws VocabMismatch when the batch
/// widths disagree with the parameters.
template <class T>
Var<T> forward(const BatchedGraph<T> &batch, const BoundParams<T> &p,
               ForwardTrace<T> *trace = nullptr);

/// mean |pred - target|. Throws ShapeMismatch and NonFiniteTarget.
template <class T>
Var<T> mae_loss(const Var<T> &pred, const Tensor<T> &target);

/// Convenience: forward with constant parameters, values only.
template <class T>
Tensor<T> predict_batch(const BatchedGraph<T> &batch,
                        const ModelParams<T> &params);

}  // namespace ringkit::model

#endif  // RINGKIT_MODEL_H_
