//
// Project ringkit - Copyright 2026 ringkit authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "ringkit/model.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ringkit/error.h"
#include "ringkit/ops.h"

namespace ringkit::model {

using tensor::Shape;
using tensor::shape_string;

std::string_view attn_norm_name(AttnNorm n) {
  return n == AttnNorm::kSoftmax ? "softmax" : "linear";
}

AttnNorm parse_attn_norm(std::string_view name) {
  if (name == "softmax")
    return AttnNorm::kSoftmax;
  if (name == "linear")
    return AttnNorm::kLinear;
  throw Error(ErrorCode::kInvalidConfig,
              "attn_norm must be softmax or linear, got " + std::string(name));
}

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.layers = 4;
  c.hidden = 128;
  c.heads = 4;
  c.pe_dim = 16;
  return c;
}

void ModelConfig::validate() const {
  const auto fail = [](const std::string &what) {
    throw Error(ErrorCode::kInvalidConfig, what);
  };
  if (layers < 1)
    fail("L must be >= 1");
  if (hidden < 1 || heads < 1 || hidden % heads != 0)
    fail("d must be a positive multiple of C");
  if (pe_dim < 1 || pe_dim >= hidden)
    fail("d_p must satisfy 0 < d_p < d");
  if (max_degree < 0)
    fail("max_degree must be >= 0");
  if (n_targets < 1)
    fail("n_targets must be >= 1");
}

nlohmann::json ModelConfig::to_json() const {
  return { { "L", layers },
           { "d", hidden },
           { "C", heads },
           { "d_p", pe_dim },
           { "max_degree", max_degree },
           { "attn_norm", attn_norm_name(attn_norm) },
           { "use_virtual", use_virtual },
           { "n_targets", n_targets } };
}

ModelConfig ModelConfig::from_json(const nlohmann::json &j) {
  ModelConfig c;
  try {
    c.layers = j.value("L", c.layers);
    c.hidden = j.value("d", c.hidden);
    c.heads = j.value("C", c.heads);
    c.pe_dim = j.value("d_p", c.pe_dim);
    c.max_degree = j.value("max_degree", c.max_degree);
    c.attn_norm = parse_attn_norm(
        j.value("attn_norm", std::string(attn_norm_name(c.attn_norm))));
    c.use_virtual = j.value("use_virtual", c.use_virtual);
    c.n_targets = j.value("n_targets", c.n_targets);
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::kInvalidConfig, e.what());
  }
  c.validate();
  return c;
}

FeatureDims FeatureDims::from_vocabulary(const Vocabulary &v) {
  FeatureDims d;
  d.ring = v.ring_dim();
  d.connection = v.connection_dim();
  return d;
}

// ---------------------------------------------------------------------------
// Parameters

namespace {

  enum class InitKind {
    kXavier,
    kZero,
  };

  struct ParamSpec {
    std::string name;
    Shape shape;
    InitKind init;
  };

  class LayoutBuilder {
  public:
    int add(std::string name, Shape shape, InitKind init) {
      specs.push_back({ std::move(name), std::move(shape), init });
      return static_cast<int>(specs.size()) - 1;
    }

    Linear linear(const std::string &name, int in, int out, bool bias) {
      Linear l;
      l.w = add(name + ".w", { std::size_t(in), std::size_t(out) },
                InitKind::kXavier);
      if (bias)
        l.b = add(name + ".b", { std::size_t(out) }, InitKind::kZero);
      return l;
    }

    Mlp2 mlp(const std::string &name, int in, int hidden, int out) {
      return { linear(name + ".0", in, hidden, true),
               linear(name + ".1", hidden, out, true) };
    }

    std::vector<ParamSpec> specs;
  };

  std::pair<ParamLayout, std::vector<ParamSpec>>
  plan(const ModelConfig &c, const FeatureDims &dims) {
    c.validate();
    const int d = c.hidden;
    LayoutBuilder b;
    ParamLayout lay;
    lay.w_atom = b.linear("atom_embed", dims.atom, d, false).w;
    lay.w_ring = b.linear("ring_embed", dims.ring, d - c.pe_dim, false).w;
    lay.degree_pe = b.add("degree_pe",
                          { std::size_t(c.max_degree + 2),
                            std::size_t(c.pe_dim) },
                          InitKind::kXavier);
    lay.virtual_embed = b.add("virtual_embed",
                              { 1, std::size_t(d - c.pe_dim) },
                              InitKind::kXavier);
    for (int l = 0; l < c.layers; ++l) {
      const std::string p = std::to_string(l);
      AtomLayerParams a;
      a.edge = b.linear("atom." + p + ".edge", dims.bond, d, true);
      a.eps = b.add("atom." + p + ".eps", { 1 }, InitKind::kZero);
      a.mlp = b.mlp("atom." + p + ".mlp", d, d, d);
      lay.atom.push_back(a);

      RingLayerParams r;
      r.z = b.mlp("ring." + p + ".z", d + dims.connection, d, d);
      r.wq = b.linear("ring." + p + ".q", d, d, false).w;
      r.wk = b.linear("ring." + p + ".k", d, d, false).w;
      r.wv = b.linear("ring." + p + ".v", d, d, false).w;
      r.ws = b.linear("ring." + p + ".s", d, d, false).w;
      r.wo = b.linear("ring." + p + ".o", d, d, false).w;
      r.ffn = b.mlp("ring." + p + ".ffn", d, 2 * d, d);
      lay.ring.push_back(r);

      InterLayerParams i;
      i.eps = b.add("inter." + p + ".eps", { 1 }, InitKind::kZero);
      i.mlp = b.mlp("inter." + p + ".mlp", d, d, d);
      lay.inter.push_back(i);

      FuseParams f;
      f.atom = b.mlp("fuse." + p + ".atom", 2 * d, d, d);
      f.ring = b.mlp("fuse." + p + ".ring", 2 * d, d, d);
      lay.fuse.push_back(f);
    }
    lay.readout = b.linear("readout", 2 * d * (c.layers + 1), c.n_targets,
                           true);
    return { lay, std::move(b.specs) };
  }

  // Top 53 bits of a 64-bit draw; identical on every standard library.
  double unit_uniform(std::mt19937_64 &rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
  }

}  // namespace

template <class T>
ModelParams<T> ModelParams<T>::init(const ModelConfig &config,
                                    const FeatureDims &dims,
                                    std::uint64_t seed) {
  auto [layout, specs] = plan(config, dims);
  ModelParams<T> p;
  p.config = config;
  p.dims = dims;
  p.layout = layout;
  std::mt19937_64 rng(seed);
  for (const ParamSpec &s: specs) {
    Tensor<T> t(s.shape);
    if (s.init == InitKind::kXavier) {
      const double fan_in = static_cast<double>(s.shape[0]);
      const double fan_out = static_cast<double>(s.shape.back());
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      for (T &v: t.values())
        v = static_cast<T>((2.0 * unit_uniform(rng) - 1.0) * limit);
    }
    p.names.push_back(s.name);
    p.tensors.push_back(std::move(t));
  }
  return p;
}

template <class T>
ModelParams<T> ModelParams<T>::zeros(const ModelConfig &config,
                                     const FeatureDims &dims) {
  auto [layout, specs] = plan(config, dims);
  ModelParams<T> p;
  p.config = config;
  p.dims = dims;
  p.layout = layout;
  for (const ParamSpec &s: specs) {
    p.names.push_back(s.name);
    p.tensors.emplace_back(s.shape);
  }
  return p;
}

template <class T>
ModelParams<T> ModelParams<T>::from_tensors(
    const ModelConfig &config, const FeatureDims &dims,
    const std::vector<std::string> &names, std::vector<Tensor<T>> tensors) {
  ModelParams<T> p = zeros(config, dims);
  if (names.size() != p.names.size() || tensors.size() != p.tensors.size())
    throw Error(ErrorCode::kVocabMismatch,
                "checkpoint holds " + std::to_string(tensors.size())
                    + " tensors, the configuration needs "
                    + std::to_string(p.tensors.size()));
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] != p.names[i] || tensors[i].shape() != p.tensors[i].shape())
      throw Error(ErrorCode::kVocabMismatch,
                  "parameter " + names[i] + " "
                      + shape_string(tensors[i].shape()) + " does not match "
                      + p.names[i] + " " + shape_string(p.tensors[i].shape()));
  }
  p.tensors = std::move(tensors);
  return p;
}

template <class T>
std::size_t ModelParams<T>::count() const {
  std::size_t n = 0;
  for (const Tensor<T> &t: tensors)
    n += t.size();
  return n;
}

template <class T>
int ModelParams<T>::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name)
      return static_cast<int>(i);
  }
  return -1;
}

template <class T>
template <class U>
ModelParams<U> ModelParams<T>::cast() const {
  ModelParams<U> out;
  out.config = config;
  out.dims = dims;
  out.layout = layout;
  out.names = names;
  for (const Tensor<T> &t: tensors)
    out.tensors.push_back(t.template cast<U>());
  return out;
}

// ---------------------------------------------------------------------------
// Encoding and batching

EncodedGraph encode_graph(const HierGraph &h, const Vocabulary &vocab) {
  EncodedGraph e;
  const AtomGraph &g = h.atom_graph;
  const AtomFeatures f = featurize_atom_graph(g);
  e.num_atoms = g.num_atoms();
  e.atom_x = f.nodes.values;
  for (const Bond &b: g.bonds)
    e.bonds.emplace_back(b.begin, b.end);
  e.bond_x = f.edges.values;

  const RingGraph &rg = h.ring_graph;
  const RingEncoding enc = encode_ring_attributes(h, vocab);
  e.num_rings = rg.num_rings();
  e.ring_x = enc.nodes.values;
  e.ring_degree = rg.real_degrees();
  for (const RingConnection &c: rg.connections) {
    e.ring_edges.emplace_back(c.ring_a, c.ring_b);
    e.ring_edge_type.push_back(vocab.connection_index(c.signature));
  }
  e.inter = h.inter_edges;
  e.targets = h.targets;
  e.oov_rings = enc.oov_rings;
  return e;
}

namespace {

  template <class T>
  Tensor<T> rows_to_tensor(const std::vector<double> &values,
                           std::size_t cols) {
    const std::size_t rows = cols == 0 ? 0 : values.size() / cols;
    Tensor<T> t = Tensor<T>::matrix(rows, cols);
    std::copy(values.begin(), values.end(), t.data());
    return t;
  }

}  // namespace

template <class T>
BatchedGraph<T> make_batch(std::span<const EncodedGraph *const> graphs,
                           const ModelConfig &config, const FeatureDims &dims) {
  BatchedGraph<T> b;
  b.num_graphs = static_cast<int>(graphs.size());

  std::vector<double> atom_x, edge_x, ring_x;
  std::vector<int> src, dst, type;
  bool have_targets = !graphs.empty();
  for (const EncodedGraph *g: graphs) {
    have_targets = have_targets
                   && static_cast<int>(g->targets.size()) == config.n_targets;
    if (g->atom_x.size() != std::size_t(g->num_atoms) * dims.atom
        || g->bond_x.size() != g->bonds.size() * dims.bond
        || g->ring_x.size() != std::size_t(g->num_rings) * dims.ring)
      throw Error(ErrorCode::kVocabMismatch,
                  "encoded graph widths do not match the feature dimensions");
  }

  int atom_off = 0, ring_off = 0;
  for (int gi = 0; gi < b.num_graphs; ++gi) {
    const EncodedGraph &g = *graphs[gi];
    atom_x.insert(atom_x.end(), g.atom_x.begin(), g.atom_x.end());
    for (int a = 0; a < g.num_atoms; ++a)
      b.atom_graph.push_back(gi);
    for (std::size_t k = 0; k < g.bonds.size(); ++k) {
      const auto [u, v] = g.bonds[k];
      const auto row = g.bond_x.begin() + k * dims.bond;
      b.atom_src.push_back(atom_off + u);
      b.atom_dst.push_back(atom_off + v);
      edge_x.insert(edge_x.end(), row, row + dims.bond);
      b.atom_src.push_back(atom_off + v);
      b.atom_dst.push_back(atom_off + u);
      edge_x.insert(edge_x.end(), row, row + dims.bond);
    }

    ring_x.insert(ring_x.end(), g.ring_x.begin(), g.ring_x.end());
    for (int r = 0; r < g.num_rings; ++r) {
      b.ring_graph.push_back(gi);
      b.ring_pe.push_back(std::min(g.ring_degree[r], config.max_degree));
      b.real_rows.push_back(ring_off + r);
    }
    for (std::size_t k = 0; k < g.ring_edges.size(); ++k) {
      const auto [u, v] = g.ring_edges[k];
      src.push_back(ring_off + u);
      dst.push_back(ring_off + v);
      type.push_back(g.ring_edge_type[k]);
      src.push_back(ring_off + v);
      dst.push_back(ring_off + u);
      type.push_back(g.ring_edge_type[k]);
    }
    for (const auto &[r, a]: g.inter) {
      b.inter_ring.push_back(ring_off + r);
      b.inter_atom.push_back(atom_off + a);
    }
    atom_off += g.num_atoms;
    ring_off += g.num_rings;
  }
  b.num_atoms = atom_off;
  b.num_real_rings = ring_off;

  if (config.use_virtual) {
    b.num_virtual = b.num_graphs;
    ring_off = 0;
    for (int gi = 0; gi < b.num_graphs; ++gi) {
      const int v = b.num_real_rings + gi;
      for (int r = 0; r < graphs[gi]->num_rings; ++r) {
        src.push_back(ring_off + r);
        dst.push_back(v);
        type.push_back(Vocabulary::kVirtual);
        src.push_back(v);
        dst.push_back(ring_off + r);
        type.push_back(Vocabulary::kVirtual);
      }
      ring_off += graphs[gi]->num_rings;
      b.ring_pe.push_back(config.max_degree + 1);
      b.virtual_rows.push_back(v);
    }
  }

  // Stable sort of directed ring edges by destination.
  std::vector<int> order(src.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&dst](int x, int y) { return dst[x] < dst[y]; });
  const int n_nodes = b.num_ring_nodes();
  b.edge_offsets.assign(n_nodes + 1, 0);
  b.ring_edge_x = Tensor<T>::matrix(order.size(), dims.connection);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const int e = order[k];
    if (type[e] < 0 || type[e] >= dims.connection)
      throw Error(ErrorCode::kVocabMismatch,
                  "connection type index outside the vocabulary");
    b.ring_src.push_back(src[e]);
    b.ring_dst.push_back(dst[e]);
    b.ring_edge_type.push_back(type[e]);
    b.ring_edge_x.at(k, type[e]) = T(1);
    ++b.edge_offsets[dst[e] + 1];
  }
  for (int i = 0; i < n_nodes; ++i)
    b.edge_offsets[i + 1] += b.edge_offsets[i];

  b.atom_x = rows_to_tensor<T>(atom_x, dims.atom);
  b.atom_edge_x = rows_to_tensor<T>(edge_x, dims.bond);
  b.ring_x = rows_to_tensor<T>(ring_x, dims.ring);

  if (have_targets) {
    b.targets = Tensor<T>::matrix(b.num_graphs, config.n_targets);
    for (int gi = 0; gi < b.num_graphs; ++gi) {
      for (int t = 0; t < config.n_targets; ++t)
        b.targets.at(gi, t) = static_cast<T>(graphs[gi]->targets[t]);
    }
  }
  return b;
}

template <class T>
BatchedGraph<T> make_batch(std::span<const EncodedGraph> graphs,
                           const ModelConfig &config, const FeatureDims &dims) {
  std::vector<const EncodedGraph *> ptrs;
  for (const EncodedGraph &g: graphs)
    ptrs.push_back(&g);
  return make_batch<T>(std::span<const EncodedGraph *const>(ptrs), config,
                       dims);
}

// ---------------------------------------------------------------------------
// Layers

template <class T>
BoundParams<T> bind(Tape<T> &tape, const ModelParams<T> &params,
                    bool trainable) {
  BoundParams<T> b;
  b.params = &params;
  b.vars.reserve(params.tensors.size());
  for (const Tensor<T> &t: params.tensors)
    b.vars.push_back(tape.leaf(t, trainable));
  return b;
}

namespace {

  template <class T>
  Var<T> linear(const Var<T> &x, const Linear &l, const BoundParams<T> &p) {
    Var<T> y = tensor::matmul(x, p[l.w]);
    return l.b >= 0 ? tensor::add(y, p[l.b]) : y;
  }

  template <class T>
  Var<T> mlp(const Var<T> &x, const Mlp2 &m, const BoundParams<T> &p) {
    return linear(tensor::relu(linear(x, m.first, p)), m.second, p);
  }

  // GIN pre-activation: (1 + eps) h + m.
  template <class T>
  Var<T> gin_input(const Var<T> &h, const Var<T> &m, const Var<T> &eps) {
    return tensor::add(tensor::add(h, tensor::scale_by(h, eps)), m);
  }

  template <class T>
  Tensor<T> head_sum_matrix(int d, int heads) {
    Tensor<T> hs = Tensor<T>::matrix(d, heads);
    const int width = d / heads;
    for (int j = 0; j < d; ++j)
      hs.at(j, j / width) = T(1);
    return hs;
  }

  template <class T>
  Tensor<T> transpose(const Tensor<T> &m) {
    Tensor<T> t = Tensor<T>::matrix(m.cols(), m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
      for (std::size_t c = 0; c < m.cols(); ++c)
        t.at(c, r) = m.at(r, c);
    }
    return t;
  }

  template <class T>
  Var<T> concat2(const Var<T> &a, const Var<T> &b) {
    const Var<T> parts[] = { a, b };
    return tensor::concat<T>(parts);
  }

  template <class T>
  Var<T> concat_rows2(const Var<T> &a, const Var<T> &b) {
    const Var<T> parts[] = { a, b };
    return tensor::concat_rows<T>(parts);
  }

}  // namespace

template <class T>
Embeddings<T> init_embeddings(const BatchedGraph<T> &batch,
                              const BoundParams<T> &p) {
  const ParamLayout &lay = p.params->layout;
  Tape<T> &tape = p[lay.w_atom].tape();
  if (p[lay.w_ring].rows() != batch.ring_x.cols()
      || p[lay.w_atom].rows() != batch.atom_x.cols())
    throw Error(ErrorCode::kShapeMismatch,
                "feature widths " + std::to_string(batch.atom_x.cols()) + "/"
                    + std::to_string(batch.ring_x.cols())
                    + " do not match the embedding matrices");

  Embeddings<T> e;
  e.atom = tensor::matmul(tape.constant(batch.atom_x), p[lay.w_atom]);

  const std::span<const int> pe(batch.ring_pe);
  const std::size_t nr = batch.num_real_rings;
  const Var<T> real = concat2(
      tensor::matmul(tape.constant(batch.ring_x), p[lay.w_ring]),
      tensor::gather_rows(p[lay.degree_pe], pe.subspan(0, nr)));
  const std::vector<int> zeros(batch.num_virtual, 0);
  const Var<T> virt =
      concat2(tensor::gather_rows(p[lay.virtual_embed],
                                  std::span<const int>(zeros)),
              tensor::gather_rows(p[lay.degree_pe], pe.subspan(nr)));
  e.ring = concat_rows2(real, virt);
  return e;
}

template <class T>
Var<T> atom_mp_layer(int layer, const Var<T> &atom_h,
                     const BatchedGraph<T> &batch, const BoundParams<T> &p) {
  const AtomLayerParams &lp = p.params->layout.atom.at(layer);
  Tape<T> &tape = atom_h.tape();
  const Var<T> edge = linear(tape.constant(batch.atom_edge_x), lp.edge, p);
  const Var<T> msg = tensor::relu(
      tensor::add(tensor::gather_rows(atom_h, batch.atom_src), edge));
  const Var<T> agg =
      tensor::segment_sum(msg, batch.atom_dst, batch.num_atoms);
  return mlp(gin_input(atom_h, agg, p[lp.eps]), lp.mlp, p);
}

template <class T>
Var<T> ring_attention_layer(int layer, const Var<T> &ring_h,
                            const BatchedGraph<T> &batch,
                            const BoundParams<T> &p,
                            Tensor<T> *attention_out) {
  const RingLayerParams &lp = p.params->layout.ring.at(layer);
  const ModelConfig &c = p.params->config;
  Tape<T> &tape = ring_h.tape();
  const std::size_t n = batch.num_ring_nodes();

  const Var<T> z = mlp(concat2(tensor::gather_rows(ring_h, batch.ring_src),
                               tape.constant(batch.ring_edge_x)),
                       lp.z, p);
  const Var<T> q = tensor::matmul(ring_h, p[lp.wq]);
  const Var<T> k = tensor::matmul(z, p[lp.wk]);
  const Var<T> v = tensor::matmul(z, p[lp.wv]);

  const Tensor<T> head_sum = head_sum_matrix<T>(c.hidden, c.heads);
  const Var<T> scores = tensor::scale(
      tensor::matmul(tensor::mul(tensor::gather_rows(q, batch.ring_dst), k),
                     tape.constant(head_sum)),
      static_cast<T>(1.0 / std::sqrt(static_cast<double>(c.hidden))));

  Var<T> alpha;
  if (c.attn_norm == AttnNorm::kSoftmax) {
    alpha = tensor::segment_softmax(scores, batch.edge_offsets);
  } else {
    const Var<T> denom = tensor::signed_eps(
        tensor::segment_sum(scores, batch.ring_dst, n), static_cast<T>(1e-8));
    alpha = tensor::div(scores, tensor::gather_rows(denom, batch.ring_dst));
  }
  if (attention_out)
    *attention_out = alpha.value();

  const Var<T> weighted = tensor::mul(
      v, tensor::matmul(alpha, tape.constant(transpose(head_sum))));
  const Var<T> agg = tensor::segment_sum(weighted, batch.ring_dst, n);
  const Var<T> h_hat = tensor::add(tensor::matmul(ring_h, p[lp.ws]),
                                   tensor::matmul(agg, p[lp.wo]));
  return mlp(tensor::add(h_hat, ring_h), lp.ffn, p);
}

template <class T>
InterOutput<T> inter_mp_layer(int layer, const Var<T> &atom_h,
                              const Var<T> &ring_h,
                              const BatchedGraph<T> &batch,
                              const BoundParams<T> &p) {
  const InterLayerParams &lp = p.params->layout.inter.at(layer);
  const Var<T> rings = tensor::gather_rows(ring_h, batch.real_rows);
  const Var<T> to_atoms = tensor::segment_sum(
      tensor::gather_rows(rings, batch.inter_ring), batch.inter_atom,
      batch.num_atoms);
  const Var<T> to_rings = tensor::segment_sum(
      tensor::gather_rows(atom_h, batch.inter_atom), batch.inter_ring,
      batch.num_real_rings);
  return { mlp(gin_input(atom_h, to_atoms, p[lp.eps]), lp.mlp, p),
           mlp(gin_input(rings, to_rings, p[lp.eps]), lp.mlp, p) };
}

template <class T>
Embeddings<T> fuse(int layer, const Var<T> &atom_mp, const Var<T> &ring_attn,
                   const InterOutput<T> &inter, const BatchedGraph<T> &batch,
                   const BoundParams<T> &p) {
  const FuseParams &lp = p.params->layout.fuse.at(layer);
  if (atom_mp.cols() != inter.atom.cols() || ring_attn.cols() != inter.ring.cols())
    throw Error(ErrorCode::kShapeMismatch, "fusion inputs differ in width");
  Embeddings<T> out;
  out.atom = mlp(concat2(atom_mp, inter.atom), lp.atom, p);
  const Var<T> real = mlp(
      concat2(tensor::gather_rows(ring_attn, batch.real_rows), inter.ring),
      lp.ring, p);
  out.ring =
      concat_rows2(real, tensor::gather_rows(ring_attn, batch.virtual_rows));
  return out;
}

template <class T>
Var<T> forward(const BatchedGraph<T> &batch, const BoundParams<T> &p,
               ForwardTrace<T> *trace) {
  const ModelParams<T> &params = *p.params;
  const ModelConfig &c = params.config;
  const FeatureDims &dims = params.dims;
  if (batch.atom_x.cols() != std::size_t(dims.atom)
      || batch.atom_edge_x.cols() != std::size_t(dims.bond)
      || batch.ring_x.cols() != std::size_t(dims.ring)
      || batch.ring_edge_x.cols() != std::size_t(dims.connection))
    throw Error(ErrorCode::kVocabMismatch,
                "batch feature widths (" + std::to_string(batch.atom_x.cols())
                    + ", " + std::to_string(batch.atom_edge_x.cols()) + ", "
                    + std::to_string(batch.ring_x.cols()) + ", "
                    + std::to_string(batch.ring_edge_x.cols())
                    + ") differ from the model's ("
                    + std::to_string(dims.atom) + ", "
                    + std::to_string(dims.bond) + ", "
                    + std::to_string(dims.ring) + ", "
                    + std::to_string(dims.connection) + ")");

  const std::size_t graphs = batch.num_graphs;
  std::vector<Var<T>> atom_pool, ring_pool;
  const auto pool = [&](const Embeddings<T> &h) {
    atom_pool.push_back(tensor::segment_sum(h.atom, batch.atom_graph, graphs));
    ring_pool.push_back(tensor::segment_sum(
        tensor::gather_rows(h.ring, batch.real_rows), batch.ring_graph,
        graphs));
    if (trace) {
      trace->atom_layers.push_back(h.atom.value());
      trace->ring_layers.push_back(h.ring.value());
    }
  };

  Embeddings<T> h = init_embeddings(batch, p);
  pool(h);
  for (int l = 0; l < c.layers; ++l) {
    Tensor<T> attention;
    const Var<T> a = atom_mp_layer(l, h.atom, batch, p);
    const Var<T> r = ring_attention_layer(l, h.ring, batch, p,
                                          trace ? &attention : nullptr);
    const InterOutput<T> i = inter_mp_layer(l, h.atom, h.ring, batch, p);
    h = fuse(l, a, r, i, batch, p);
    pool(h);
    if (trace)
      trace->attention.push_back(std::move(attention));
  }

  std::vector<Var<T>> parts = atom_pool;
  parts.insert(parts.end(), ring_pool.begin(), ring_pool.end());
  const Var<T> graph_repr = tensor::concat<T>(parts);
  if (trace)
    trace->readout_width = graph_repr.cols();
  return linear(graph_repr, params.layout.readout, p);
}

template <class T>
Var<T> mae_loss(const Var<T> &pred, const Tensor<T> &target) {
  if (pred.shape() != target.shape())
    throw Error(ErrorCode::kShapeMismatch,
                "prediction " + shape_string(pred.shape()) + " vs target "
                    + shape_string(target.shape()));
  for (T v: target.values()) {
    if (!std::isfinite(v))
      throw Error(ErrorCode::kNonFiniteTarget, "target contains NaN or inf");
  }
  Tape<T> &tape = pred.tape();
  return tensor::mean(tensor::abs(tensor::sub(pred, tape.constant(target))));
}

template <class T>
Tensor<T> predict_batch(const BatchedGraph<T> &batch,
                        const ModelParams<T> &params) {
  Tape<T> tape;
  const BoundParams<T> p = bind(tape, params, false);
  return forward(batch, p).value();
}

#define RINGKIT_INSTANTIATE_MODEL(T)                                          \
  template struct ModelParams<T>;                                             \
  template BatchedGraph<T> make_batch<T>(std::span<const EncodedGraph *const>,\
                                         const ModelConfig &,                 \
                                         const FeatureDims &);                \
  template BatchedGraph<T> make_batch<T>(std::span<const EncodedGraph>,       \
                                         const ModelConfig &,                 \
                                         const FeatureDims &);                \
  template BoundParams<T> bind(Tape<T> &, const ModelParams<T> &, bool);      \
  template Embeddings<T> init_embeddings(const BatchedGraph<T> &,             \
                                         const BoundParams<T> &);             \
  template Var<T> atom_mp_layer(int, const Var<T> &, const BatchedGraph<T> &, \
                                const BoundParams<T> &);                      \
  template Var<T> ring_attention_layer(int, const Var<T> &,                   \
                                       const BatchedGraph<T> &,               \
                                       const BoundParams<T> &, Tensor<T> *);  \
  template InterOutput<T> inter_mp_layer(int, const Var<T> &, const Var<T> &, \
                                         const BatchedGraph<T> &,             \
                                         const BoundParams<T> &);             \
  template Embeddings<T> fuse(int, const Var<T> &, const Var<T> &,            \
                              const InterOutput<T> &,                         \
                              const BatchedGraph<T> &,                        \
                              const BoundParams<T> &);                        \
  template Var<T> forward(const BatchedGraph<T> &, const BoundParams<T> &,    \
                          ForwardTrace<T> *);                                 \
  template Var<T> mae_loss(const Var<T> &, const Tensor<T> &);                \
  template Tensor<T> predict_batch(const BatchedGraph<T> &,                   \
                                   const ModelParams<T> &);

RINGKIT_INSTANTIATE_MODEL(float)
RINGKIT_INSTANTIATE_MODEL(double)

template ModelParams<double> ModelParams<float>::cast<double>() const;
template ModelParams<float> ModelParams<double>::cast<float>() const;
template ModelParams<float> ModelParams<float>::cast<float>() const;
template ModelParams<double> ModelParams<double>::cast<double>() const;

#undef RINGKIT_INSTANTIATE_MODEL

}  // namespace ringkit::model
