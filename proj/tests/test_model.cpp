//
// Project ringkit - Copyright 2026 ringkit authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "oracles.h"
#include "ringkit/error.h"
#include "ringkit/gradcheck.h"
#include "ringkit/model.h"
#include "ringkit/ops.h"

using namespace ringkit;
using namespace ringkit::model;
using ringkit::tensor::Tape;
using ringkit::tensor::Tensor;
using ringkit::tensor::Var;

namespace {

using Mat = std::vector<std::vector<double>>;

// ---- literal per-node / per-edge reference implementation -----------------

std::vector<double> row_times(const std::vector<double> &x,
                              const Tensor<double> &w) {
  std::vector<double> y(w.cols(), 0.0);
  for (std::size_t i = 0; i < w.rows(); ++i) {
    for (std::size_t j = 0; j < w.cols(); ++j)
      y[j] += x[i] * w.at(i, j);
  }
  return y;
}

std::vector<double> lin(const std::vector<double> &x, const Linear &l,
                        const ModelParams<double> &p) {
  std::vector<double> y = row_times(x, p.tensors[l.w]);
  if (l.b >= 0) {
    for (std::size_t j = 0; j < y.size(); ++j)
      y[j] += p.tensors[l.b][j];
  }
  return y;
}

std::vector<double> mlp2(const std::vector<double> &x, const Mlp2 &m,
                         const ModelParams<double> &p) {
  std::vector<double> h = lin(x, m.first, p);
  for (double &v: h)
    v = std::max(v, 0.0);
  return lin(h, m.second, p);
}

std::vector<double> plus(std::vector<double> a, const std::vector<double> &b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    a[i] += b[i];
  return a;
}

std::vector<double> times(std::vector<double> a, double s) {
  for (double &v: a)
    v *= s;
  return a;
}

std::vector<double> cat(std::vector<double> a, const std::vector<double> &b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

Mat to_mat(const Tensor<double> &t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c)
      m[r][c] = t.at(r, c);
  }
  return m;
}

Tensor<double> to_tensor(const Mat &m) {
  Tensor<double> t = Tensor<double>::matrix(m.size(), m.empty() ? 0 : m[0].size());
  for (std::size_t r = 0; r < m.size(); ++r) {
    for (std::size_t c = 0; c < m[r].size(); ++c)
      t.at(r, c) = m[r][c];
  }
  return t;
}

struct Fixture {
  std::vector<HierGraph> graphs;
  Vocabulary vocab;
  FeatureDims dims;
  std::vector<EncodedGraph> encoded;

  explicit Fixture(const std::vector<std::string> &smiles) {
    for (const std::string &s: smiles)
      graphs.push_back(build_hier_graph(s, true));
    vocab = Vocabulary::build(graphs);
    dims = FeatureDims::from_vocabulary(vocab);
    for (const HierGraph &h: graphs)
      encoded.push_back(encode_graph(h, vocab));
  }
};

struct Offsets {
  std::vector<int> atom, ring;
};

Offsets offsets_of(const std::vector<EncodedGraph> &gs) {
  Offsets o;
  int a = 0, r = 0;
  for (const EncodedGraph &g: gs) {
    o.atom.push_back(a);
    o.ring.push_back(r);
    a += g.num_atoms;
    r += g.num_rings;
  }
  return o;
}

Mat oracle_atom_layer(int l, const Mat &h, const std::vector<EncodedGraph> &gs,
                      const ModelParams<double> &p) {
  const AtomLayerParams &lp = p.layout.atom[l];
  const double eps = p.tensors[lp.eps][0];
  const Offsets off = offsets_of(gs);
  Mat out;
  for (std::size_t gi = 0; gi < gs.size(); ++gi) {
    const EncodedGraph &g = gs[gi];
    for (int i = 0; i < g.num_atoms; ++i) {
      std::vector<double> m(h[0].size(), 0.0);
      for (std::size_t k = 0; k < g.bonds.size(); ++k) {
        int j = -1;
        if (g.bonds[k].first == i)
          j = g.bonds[k].second;
        else if (g.bonds[k].second == i)
          j = g.bonds[k].first;
        if (j < 0)
          continue;
        const std::vector<double> e(g.bond_x.begin() + k * p.dims.bond,
                                    g.bond_x.begin() + (k + 1) * p.dims.bond);
        std::vector<double> msg = plus(h[off.atom[gi] + j], lin(e, lp.edge, p));
        for (double &v: msg)
          v = std::max(v, 0.0);
        m = plus(m, msg);
      }
      const std::vector<double> &hi = h[off.atom[gi] + i];
      out.push_back(mlp2(plus(times(hi, 1.0 + eps), m), lp.mlp, p));
    }
  }
  return out;
}

struct RingNeighbor {
  int node;
  int type;
};

// Neighborhoods in the batch's node numbering (real rings, then virtual).
std::vector<std::vector<RingNeighbor>>
ring_neighborhoods(const std::vector<EncodedGraph> &gs, bool use_virtual) {
  const Offsets off = offsets_of(gs);
  int total = 0;
  for (const EncodedGraph &g: gs)
    total += g.num_rings;
  std::vector<std::vector<RingNeighbor>> nb(
      total + (use_virtual ? gs.size() : 0));
  for (std::size_t gi = 0; gi < gs.size(); ++gi) {
    const EncodedGraph &g = gs[gi];
    for (std::size_t k = 0; k < g.ring_edges.size(); ++k) {
      const int a = off.ring[gi] + g.ring_edges[k].first;
      const int b = off.ring[gi] + g.ring_edges[k].second;
      nb[a].push_back({ b, g.ring_edge_type[k] });
      nb[b].push_back({ a, g.ring_edge_type[k] });
    }
    if (use_virtual) {
      const int v = total + static_cast<int>(gi);
      for (int r = 0; r < g.num_rings; ++r) {
        nb[off.ring[gi] + r].push_back({ v, Vocabulary::kVirtual });
        nb[v].push_back({ off.ring[gi] + r, Vocabulary::kVirtual });
      }
    }
  }
  return nb;
}

Mat oracle_ring_layer(int l, const Mat &h, const std::vector<EncodedGraph> &gs,
                      const ModelParams<double> &p,
                      std::vector<std::vector<std::vector<double>>> *alpha_out
                      = nullptr) {
  const RingLayerParams &lp = p.layout.ring[l];
  const int d = p.config.hidden, heads = p.config.heads, w = d / heads;
  const auto nb = ring_neighborhoods(gs, p.config.use_virtual);
  Mat out;
  for (std::size_t i = 0; i < nb.size(); ++i) {
    const std::vector<double> q = row_times(h[i], p.tensors[lp.wq]);
    std::vector<std::vector<double>> scores, values;
    for (const RingNeighbor &n: nb[i]) {
      std::vector<double> onehot(p.dims.connection, 0.0);
      onehot[n.type] = 1.0;
      const std::vector<double> z = mlp2(cat(h[n.node], onehot), lp.z, p);
      const std::vector<double> k = row_times(z, p.tensors[lp.wk]);
      values.push_back(row_times(z, p.tensors[lp.wv]));
      std::vector<double> s(heads, 0.0);
      for (int c = 0; c < heads; ++c) {
        for (int j = c * w; j < (c + 1) * w; ++j)
          s[c] += q[j] * k[j];
        s[c] /= std::sqrt(static_cast<double>(d));
      }
      scores.push_back(s);
    }
    std::vector<std::vector<double>> alpha(scores.size(),
                                           std::vector<double>(heads));
    for (int c = 0; c < heads; ++c) {
      if (p.config.attn_norm == AttnNorm::kSoftmax) {
        double mx = -1e300, total = 0;
        for (const auto &s: scores)
          mx = std::max(mx, s[c]);
        for (const auto &s: scores)
          total += std::exp(s[c] - mx);
        for (std::size_t e = 0; e < scores.size(); ++e)
          alpha[e][c] = std::exp(scores[e][c] - mx) / total;
      } else {
        double total = 0;
        for (const auto &s: scores)
          total += s[c];
        total += std::copysign(1e-8, total);
        for (std::size_t e = 0; e < scores.size(); ++e)
          alpha[e][c] = scores[e][c] / total;
      }
    }
    if (alpha_out)
      alpha_out->push_back(alpha);
    std::vector<double> agg(d, 0.0);
    for (std::size_t e = 0; e < values.size(); ++e) {
      for (int j = 0; j < d; ++j)
        agg[j] += alpha[e][j / w] * values[e][j];
    }
    const std::vector<double> h_hat = plus(row_times(h[i], p.tensors[lp.ws]),
                                           row_times(agg, p.tensors[lp.wo]));
    out.push_back(mlp2(plus(h_hat, h[i]), lp.ffn, p));
  }
  return out;
}

std::pair<Mat, Mat> oracle_inter_layer(int l, const Mat &ha, const Mat &hr,
                                       const std::vector<EncodedGraph> &gs,
                                       const ModelParams<double> &p) {
  const InterLayerParams &lp = p.layout.inter[l];
  const double eps = p.tensors[lp.eps][0];
  const Offsets off = offsets_of(gs);
  Mat ma(ha.size(), std::vector<double>(ha[0].size(), 0.0));
  Mat mr(hr.size(), std::vector<double>(ha[0].size(), 0.0));
  for (std::size_t gi = 0; gi < gs.size(); ++gi) {
    for (const auto &[r, a]: gs[gi].inter) {
      const int gr = off.ring[gi] + r, ga = off.atom[gi] + a;
      ma[ga] = plus(ma[ga], hr[gr]);
      mr[gr] = plus(mr[gr], ha[ga]);
    }
  }
  Mat oa, orr;
  for (std::size_t i = 0; i < ha.size(); ++i)
    oa.push_back(mlp2(plus(times(ha[i], 1.0 + eps), ma[i]), lp.mlp, p));
  for (std::size_t i = 0; i < hr.size(); ++i)
    orr.push_back(mlp2(plus(times(hr[i], 1.0 + eps), mr[i]), lp.mlp, p));
  return { oa, orr };
}

// ---- helpers ---------------------------------------------------------------

ModelConfig micro_config() {
  ModelConfig c;
  c.layers = 2;
  c.hidden = 16;
  c.heads = 2;
  c.pe_dim = 4;
  c.max_degree = 3;
  return c;
}

ModelParams<double> random_params(const ModelConfig &c, const FeatureDims &d,
                                  std::uint64_t seed) {
  ModelParams<double> p = ModelParams<double>::init(c, d, seed);
  // Non-zero epsilons and biases so every term is exercised.
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    const std::string &n = p.names[i];
    if (n.ends_with(".eps") || n.ends_with(".b")) {
      for (double &v: p.tensors[i].values())
        v = u(rng);
    }
  }
  return p;
}

Mat random_mat(std::mt19937_64 &rng, std::size_t rows, std::size_t cols) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat m(rows, std::vector<double>(cols));
  for (auto &r: m) {
    for (double &v: r)
      v = u(rng);
  }
  return m;
}

double max_abs_diff(const Mat &a, const Mat &b) {
  REQUIRE(a.size() == b.size());
  double worst = 0;
  for (std::size_t r = 0; r < a.size(); ++r) {
    REQUIRE(a[r].size() == b[r].size());
    for (std::size_t c = 0; c < a[r].size(); ++c)
      worst = std::max(worst, std::abs(a[r][c] - b[r][c]));
  }
  return worst;
}

const std::vector<std::string> kMolecules {
  "c1ccc2ccccc2c1",
  "c1ccc(s1)-c1ccc(s1)-c1cccs1",
  "CC(=O)Nc1ccc(O)cc1",
  "CCCC",
  "C1CC2(CC1)CCOC2",
  "c1ccc2c(c1)[nH]c1ccccc12",
};

}  // namespace

TEST_CASE("configuration") {
  const ModelConfig paper = ModelConfig::paper();
  CHECK(paper.layers == 8);
  CHECK(paper.hidden == 512);
  CHECK(paper.heads == 4);
  CHECK(paper.pe_dim == 32);
  const ModelConfig desk = ModelConfig::desk();
  CHECK(desk.layers == 4);
  CHECK(desk.hidden == 128);
  CHECK(desk.pe_dim == 16);
  CHECK(ModelConfig::from_json(desk.to_json()) == desk);

  ModelConfig bad = desk;
  bad.heads = 3;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = desk;
  bad.pe_dim = 128;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = desk;
  bad.layers = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("parameter shapes") {
  const FeatureDims dims { 37, 5, 11, 7 };
  const ModelParams<float> p = ModelParams<float>::init(ModelConfig::paper(),
                                                        dims, 1);
  const ParamLayout &lay = p.layout;
  CHECK(p.tensors[lay.w_atom].shape() == tensor::Shape { 37, 512 });
  CHECK(p.tensors[lay.w_ring].shape() == tensor::Shape { 11, 480 });
  CHECK(p.tensors[lay.degree_pe].shape() == tensor::Shape { 18, 32 });
  CHECK(p.tensors[lay.readout.w].shape() == tensor::Shape { 9216, 1 });
  CHECK(p.tensors[lay.ring[0].z.first.w].shape() == tensor::Shape { 519, 512 });
  CHECK(p.tensors[lay.ring[0].ffn.first.w].shape()
        == tensor::Shape { 512, 1024 });
  CHECK(p.tensors[lay.fuse[7].ring.first.w].shape()
        == tensor::Shape { 1024, 512 });
  CHECK(lay.atom.size() == 8);

  // Same seed, same parameters; another seed differs.
  CHECK(ModelParams<float>::init(ModelConfig::desk(), dims, 5).tensors
        == ModelParams<float>::init(ModelConfig::desk(), dims, 5).tensors);
  CHECK(ModelParams<float>::init(ModelConfig::desk(), dims, 5).tensors
        != ModelParams<float>::init(ModelConfig::desk(), dims, 6).tensors);
}

TEST_CASE("initial embeddings") {
  Fixture fx({ "c1ccccc1", "c1ccc2ccccc2c1" });
  const ModelConfig c = micro_config();
  ModelParams<double> p = random_params(c, fx.dims, 3);
  for (double &v: p.tensors[p.layout.w_ring].values())
    v = 0.0;
  const auto batch = make_batch<double>(fx.encoded, c, fx.dims);
  Tape<double> tape;
  const auto bound = bind(tape, p, false);
  const Embeddings<double> e = init_embeddings(batch, bound);

  CHECK(e.atom.cols() == 16u);
  CHECK(e.ring.cols() == 16u);
  REQUIRE(e.ring.rows() == 5u);  // 3 real rings + 2 virtual
  const Tensor<double> &pe = p.tensors[p.layout.degree_pe];
  const Tensor<double> &virt = p.tensors[p.layout.virtual_embed];
  // benzene: real degree 0; naphthalene rings: degree 1.
  const int expected_pe[] = { 0, 1, 1, c.max_degree + 1, c.max_degree + 1 };
  for (int r = 0; r < 5; ++r) {
    for (int j = 0; j < 12; ++j) {
      const double want = r < 3 ? 0.0 : virt[j];
      CHECK(e.ring.value().at(r, j) == want);
    }
    for (int j = 0; j < 4; ++j)
      CHECK(e.ring.value().at(r, 12 + j) == pe.at(expected_pe[r], j));
  }
}

TEST_CASE("atom message passing matches the per-edge oracle") {
  Fixture fx(kMolecules);
  const ModelConfig c = micro_config();
  const ModelParams<double> p = random_params(c, fx.dims, 11);
  const auto batch = make_batch<double>(fx.encoded, c, fx.dims);
  std::mt19937_64 rng(5);
  const Mat h = random_mat(rng, batch.num_atoms, 16);
  for (int l = 0; l < 2; ++l) {
    Tape<double> tape;
    const auto bound = bind(tape, p, false);
    const Var<double> out =
        atom_mp_layer(l, tape.constant(to_tensor(h)), batch, bound);
    CHECK(max_abs_diff(to_mat(out.value()), oracle_atom_layer(l, h, fx.encoded, p))
          < 1e-6);
  }
}

TEST_CASE("atom message passing edge cases") {
  const ModelConfig c = micro_config();
  SUBCASE("isolated atom") {
    Fixture fx({ "C" });
    const ModelParams<double> p = random_params(c, fx.dims, 2);
    const auto batch = make_batch<double>(fx.encoded, c, fx.dims);
    std::mt19937_64 rng(1);
    const Mat h = random_mat(rng, 1, 16);
    Tape<double> tape;
    const auto bound = bind(tape, p, false);
    const Mat out = to_mat(
        atom_mp_layer(0, tape.constant(to_tensor(h)), batch, bound).value());
    const double eps = p.tensors[p.layout.atom[0].eps][0];
    const Mat want { mlp2(times(h[0], 1.0 + eps), p.layout.atom[0].mlp, p) };
    CHECK(max_abs_diff(out, want) < 1e-12);
  }
  SUBCASE("symmetric pair") {
    Fixture fx({ "CC" });
    const ModelParams<double> p = random_params(c, fx.dims, 2);
    const auto batch = make_batch<double>(fx.encoded, c, fx.dims);
    std::mt19937_64 rng(1);
    Mat h = random_mat(rng, 1, 16);
    h.push_back(h[0]);
    Tape<double> tape;
    const auto bound = bind(tape, p, false);
    const Mat out = to_mat(
        atom_mp_layer(0, tape.constant(to_tensor(h)), batch, bound).value());
    CHECK(out[0] == out[1]);
  }
}

TEST_CASE("ring attention matches the per-edge oracle") {
  Fixture fx(kMolecules);
  for (const bool use_virtual: { true, false }) {
    for (const AttnNorm norm: { AttnNorm::kSoftmax, AttnNorm::kLinear }) {
      CAPTURE(use_virtual);
      CAPTURE(attn_norm_name(norm));
      ModelConfig c = micro_config();
      c.use_virtual = use_virtual;
      c.attn_norm = norm;
      const ModelParams<double> p = random_params(c, fx.dims, 21);
      const auto batch = make_batch<double>(fx.encoded, c, fx.dims);
      std::mt19937_64 rng(9);
      const Mat h = random_mat(rng, batch.num_ring_nodes(), 16);
      Tape<double> tape;
      const auto bound = bind(tape, p, false);
      Tensor<double> alpha;
      const Var<double> out = ring_attention_layer(
          1, tape.constant(to_tensor(h)), batch, bound, &alpha);
      std::vector<std::vector<std::vector<double>>> oracle_alpha;
      const Mat want = oracle_ring_layer(1, h, fx.encoded, p, &oracle_alpha);
      CHECK(max_abs_diff(to_mat(out.value()), want) < 1e-6);

      // Per-neighborhood weights, in oracle order, match as a multiset.
      for (int i = 0; i < batch.num_ring_nodes(); ++i) {
        std::vector<double> got, exp;
        for (int e = batch.edge_offsets[i]; e < batch.edge_offsets[i + 1]; ++e)
          got.push_back(alpha.at(e, 0));
        for (const auto &a: oracle_alpha[i])
          exp.push_back(a[0]);
        std::sort(got.begin(), got.end());
        std::sort(exp.begin(), exp.end());
        REQUIRE(got.size() == exp.size());
        for (std::size_t k = 0; k < got.size(); ++k)
          CHECK(std::abs(got[k] - exp[k]) < 1e-9);
      }
    }
  }
}

TEST_CASE("ring attention structure") {
  const ModelConfig c = micro_config();
  SUBCASE("single ring with virtual node") {
    Fixture fx({ "c1ccccc1" });
    const ModelParams<double> p = random_params(c, fx.dims, 4);
    const auto batch = make_batch<double>(fx.encoded, c, fx.dims);
    CHECK(batch.ring_src.size() == 2);
    Tape<double> tape;
    const auto bound = bind(tape, p, false);
    Tensor<double> alpha;
    std::mt19937_64 rng(2);
    ring_attention_layer(0, tape.constant(to_tensor(random_mat(rng, 2, 16))),
                         batch, bound, &alpha);
    for (double a: alpha.values())
      CHECK(a == doctest::Approx(1.0));
  }
  SUBCASE("naphthalene neighborhoods") {
    Fixture fx({ "c1ccc2ccccc2c1" });
    const auto batch = make_batch<double>(fx.encoded, c, fx.dims);
    REQUIRE(batch.num_ring_nodes() == 3);
    const auto neighbors = [&](int i) {
      std::set<int> s;
      for (int e = batch.edge_offsets[i]; e < batch.edge_offsets[i + 1]; ++e) {
        CHECK(batch.ring_dst[e] == i);
        s.insert(batch.ring_src[e]);
      }
      return s;
    };
    CHECK(neighbors(0) == std::set<int> { 1, 2 });
    CHECK(neighbors(1) == std::set<int> { 0, 2 });
    CHECK(neighbors(2) == std::set<int> { 0, 1 });
  }
  SUBCASE("isolated ring without virtual node passes W_s h through") {
    ModelConfig nv = c;
    nv.use_virtual = false;
    Fixture fx({ "c1ccccc1" });
    const ModelParams<double> p = random_params(nv, fx.dims, 4);
    const auto batch = make_batch<double>(fx.encoded, nv, fx.dims);
    CHECK(batch.ring_src.empty());
    std::mt19937_64 rng(2);
    const Mat h = random_mat(rng, 1, 16);
    Tape<double> tape;
    const auto bound = bind(tape, p, false);
    const Mat out = to_mat(
        ring_attention_layer(0, tape.constant(to_tensor(h)), batch, bound)
            .value());
    const RingLayerParams &lp = p.layout.ring[0];
    const Mat want { mlp2(plus(row_times(h[0], p.tensors[lp.ws]), h[0]),
                          lp.ffn, p) };
    CHECK(max_abs_diff(out, want) < 1e-12);
  }
}

TEST_CASE("inter-level message passing matches the oracle") {
  Fixture fx(kMolecules);
  const ModelConfig c = micro_config();
  const ModelParams<double> p = random_params(c, fx.dims, 31);
  const auto batch = make_batch<double>(fx.encoded, c, fx.dims);
  std::mt19937_64 rng(17);
  const Mat ha = random_mat(rng, batch.num_atoms, 16);
  const Mat hr_all = random_mat(rng, batch.num_ring_nodes(), 16);
  const Mat hr(hr_all.begin(), hr_all.begin() + batch.num_real_rings);
  Tape<double> tape;
  const auto bound = bind(tape, p, false);
  const InterOutput<double> out =
      inter_mp_layer(0, tape.constant(to_tensor(ha)),
                     tape.constant(to_tensor(hr_all)), batch, bound);
  const auto [want_a, want_r] = oracle_inter_layer(0, ha, hr, fx.encoded, p);
  CHECK(max_abs_diff(to_mat(out.atom.value()), want_a) < 1e-6);
  CHECK(max_abs_diff(to_mat(out.ring.value()), want_r) < 1e-6);
}

TEST_CASE("inter-level structure") {
  const ModelConfig c = micro_config();
  Fixture fx({ "c1ccccc1" });
  ModelParams<double> p = random_params(c, fx.dims, 8);
  const auto batch = make_batch<double>(fx.encoded, c, fx.dims);
  CHECK(batch.inter_atom.size() == 6);
  // With identity-like inspection: zero eps, compare pre-MLP sums via oracle.
  std::mt19937_64 rng(3);
  const Mat ha = random_mat(rng, 6, 16);
  const Mat hr = random_mat(rng, 2, 16);
  Tape<double> tape;
  const auto bound = bind(tape, p, false);
  const InterOutput<double> out = inter_mp_layer(
      0, tape.constant(to_tensor(ha)), tape.constant(to_tensor(hr)), batch,
      bound);
  const InterLayerParams &lp = p.layout.inter[0];
  const double eps = p.tensors[lp.eps][0];
  for (int a = 0; a < 6; ++a) {
    const std::vector<double> want =
        mlp2(plus(times(ha[a], 1 + eps), hr[0]), lp.mlp, p);
    for (int j = 0; j < 16; ++j)
      CHECK(out.atom.value().at(a, j) == doctest::Approx(want[j]));
  }
  std::vector<double> total(16, 0.0);
  for (int a = 0; a < 6; ++a)
    total = plus(total, ha[a]);
  const std::vector<double> want_r =
      mlp2(plus(times(hr[0], 1 + eps), total), lp.mlp, p);
  for (int j = 0; j < 16; ++j)
    CHECK(out.ring.value().at(0, j) == doctest::Approx(want_r[j]));

  Fixture chain({ "CCCC" });
  const ModelParams<double> q = random_params(c, chain.dims, 8);
  const auto cb = make_batch<double>(chain.encoded, c, chain.dims);
  CHECK(cb.inter_atom.empty());
  const Mat h4 = random_mat(rng, 4, 16);
  Tape<double> t2;
  const auto b2 = bind(t2, q, false);
  const InterOutput<double> o2 = inter_mp_layer(
      0, t2.constant(to_tensor(h4)),
      t2.constant(to_tensor(random_mat(rng, 1, 16))), cb, b2);
  const double eps2 = q.tensors[q.layout.inter[0].eps][0];
  for (int a = 0; a < 4; ++a) {
    const auto want = mlp2(times(h4[a], 1 + eps2), q.layout.inter[0].mlp, q);
    for (int j = 0; j < 16; ++j)
      CHECK(o2.atom.value().at(a, j) == doctest::Approx(want[j]));
  }
  CHECK(o2.ring.rows() == 0);
}

TEST_CASE("fusion") {
  const ModelConfig c = micro_config();
  Fixture fx({ "c1ccc2ccccc2c1", "CCc1ccsc1" });
  ModelParams<double> p = random_params(c, fx.dims, 12);
  const auto batch = make_batch<double>(fx.encoded, c, fx.dims);
  std::mt19937_64 rng(4);
  const Mat a = random_mat(rng, batch.num_atoms, 16);
  const Mat r = random_mat(rng, batch.num_ring_nodes(), 16);
  const Mat ia = random_mat(rng, batch.num_atoms, 16);
  const Mat ir = random_mat(rng, batch.num_real_rings, 16);

  const auto run = [&](const ModelParams<double> &params, const Mat &inter_a) {
    Tape<double> tape;
    const auto bound = bind(tape, params, false);
    const InterOutput<double> inter { tape.constant(to_tensor(inter_a)),
                                      tape.constant(to_tensor(ir)) };
    const Embeddings<double> e =
        fuse(0, tape.constant(to_tensor(a)), tape.constant(to_tensor(r)), inter,
             batch, bound);
    return std::make_pair(to_mat(e.atom.value()), to_mat(e.ring.value()));
  };

  const auto [fa, fr] = run(p, ia);
  CHECK(fa[0].size() == 16);
  CHECK(fr.size() == static_cast<std::size_t>(batch.num_ring_nodes()));
  // Virtual rows carry over.
  for (int v: batch.virtual_rows)
    CHECK(fr[v] == r[v]);

  // Permuting the inter-level input across atoms changes the result.
  Mat shuffled = ia;
  std::rotate(shuffled.begin(), shuffled.begin() + 1, shuffled.end());
  CHECK(max_abs_diff(run(p, shuffled).first, fa) > 1e-3);

  // Zero weights leave only the output bias.
  ModelParams<double> z = p;
  const FuseParams &fp = z.layout.fuse[0];
  for (int idx: { fp.atom.first.w, fp.atom.second.w, fp.ring.first.w,
                  fp.ring.second.w }) {
    for (double &v: z.tensors[idx].values())
      v = 0.0;
  }
  const auto [za, zr] = run(z, ia);
  for (const auto &row: za) {
    for (int j = 0; j < 16; ++j)
      CHECK(row[j] == z.tensors[fp.atom.second.b][j]);
  }
  for (int rr: batch.real_rows) {
    for (int j = 0; j < 16; ++j)
      CHECK(zr[rr][j] == z.tensors[fp.ring.second.b][j]);
  }
}

TEST_CASE("forward invariants") {
  Fixture fx(kMolecules);
  const ModelConfig c = micro_config();
  const ModelParams<double> p = random_params(c, fx.dims, 41);

  SUBCASE("attention normalization and shape ladder") {
    const auto batch = make_batch<double>(fx.encoded, c, fx.dims);
    Tape<double> tape;
    ForwardTrace<double> trace;
    const Var<double> pred = forward(batch, bind(tape, p, false), &trace);
    CHECK(pred.rows() == kMolecules.size());
    CHECK(pred.cols() == 1u);
    CHECK(trace.readout_width == 2u * 16u * 3u);
    REQUIRE(trace.attention.size() == 2);
    for (const Tensor<double> &alpha: trace.attention) {
      for (int i = 0; i < batch.num_ring_nodes(); ++i) {
        if (batch.edge_offsets[i] == batch.edge_offsets[i + 1])
          continue;
        for (int h = 0; h < c.heads; ++h) {
          double total = 0;
          for (int e = batch.edge_offsets[i]; e < batch.edge_offsets[i + 1]; ++e)
            total += alpha.at(e, h);
          CHECK(std::abs(total - 1.0) < 1e-6);
        }
      }
    }
    for (const auto &t: trace.atom_layers)
      CHECK(t.cols() == 16u);
    for (const auto &t: trace.ring_layers)
      CHECK(t.cols() == 16u);
  }

  SUBCASE("permutation invariance") {
    std::mt19937_64 rng(77);
    for (std::size_t m = 0; m < kMolecules.size(); ++m) {
      const AtomGraph g = parse_smiles(kMolecules[m]);
      const AtomGraph pg = oracle::permute_atoms(
          g, oracle::random_permutation(rng, g.num_atoms()));
      const EncodedGraph a = encode_graph(build_hier_graph(g, true), fx.vocab);
      const EncodedGraph b = encode_graph(build_hier_graph(pg, true), fx.vocab);
      const double ya = predict_batch(
          make_batch<double>(std::span<const EncodedGraph>(&a, 1), c, fx.dims),
          p)[0];
      const double yb = predict_batch(
          make_batch<double>(std::span<const EncodedGraph>(&b, 1), c, fx.dims),
          p)[0];
      CHECK(std::abs(ya - yb) < 1e-6);
    }
  }

  SUBCASE("batch independence and duplicates") {
    const Tensor<double> all =
        predict_batch(make_batch<double>(fx.encoded, c, fx.dims), p);
    for (std::size_t m = 0; m < fx.encoded.size(); ++m) {
      const Tensor<double> one = predict_batch(
          make_batch<double>(std::span<const EncodedGraph>(&fx.encoded[m], 1),
                             c, fx.dims),
          p);
      CHECK(std::abs(one[0] - all[m]) < 1e-6);
    }
    const std::vector<EncodedGraph> twice { fx.encoded[1], fx.encoded[1] };
    const Tensor<double> dup =
        predict_batch(make_batch<double>(twice, c, fx.dims), p);
    CHECK(dup[0] == dup[1]);
  }

  SUBCASE("virtual ablation is structural") {
    ModelConfig nv = c;
    nv.use_virtual = false;
    const auto batch = make_batch<double>(fx.encoded, nv, fx.dims);
    CHECK(batch.num_virtual == 0);
    CHECK(batch.num_ring_nodes() == batch.num_real_rings);
    for (std::size_t e = 0; e < batch.ring_src.size(); ++e) {
      CHECK(batch.ring_edge_type[e] != Vocabulary::kVirtual);
      CHECK(batch.ring_src[e] < batch.num_real_rings);
      CHECK(batch.ring_dst[e] < batch.num_real_rings);
    }
    const ModelParams<double> q = random_params(nv, fx.dims, 41);
    CHECK(predict_batch(batch, q).rows() == kMolecules.size());
  }

  SUBCASE("zero readout predicts zero") {
    ModelParams<double> z = p;
    for (double &v: z.tensors[z.layout.readout.w].values())
      v = 0.0;
    for (double &v: z.tensors[z.layout.readout.b].values())
      v = 0.0;
    const Tensor<double> y =
        predict_batch(make_batch<double>(fx.encoded, c, fx.dims), z);
    for (double v: y.values())
      CHECK(v == 0.0);
  }
}

TEST_CASE("vocabulary mismatch") {
  Fixture fx(kMolecules);
  const ModelConfig c = micro_config();
  FeatureDims other = fx.dims;
  other.ring += 1;
  const ModelParams<double> p = random_params(c, other, 1);
  const auto batch = make_batch<double>(fx.encoded, c, fx.dims);
  Tape<double> tape;
  try {
    forward(batch, bind(tape, p, false));
    FAIL("expected VocabMismatch");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::kVocabMismatch);
  }
  const ModelParams<double> good = random_params(c, fx.dims, 1);
  CHECK_THROWS_AS(ModelParams<double>::from_tensors(c, other, good.names,
                                                     good.tensors),
                  Error);
}

TEST_CASE("mae loss") {
  Tape<double> tape;
  const Var<double> pred =
      tape.parameter(Tensor<double>({ 2, 1 }, { 1.0, 2.0 }));
  CHECK(mae_loss(pred, Tensor<double>({ 2, 1 }, { 1.0, 2.0 })).value()[0]
        == 0.0);
  CHECK(mae_loss(pred, Tensor<double>({ 2, 1 }, { 0.0, 1.0 })).value()[0]
        == 1.0);
  CHECK(mae_loss(pred, Tensor<double>({ 2, 1 }, { 1.5, 3.5 })).value()[0]
        == 1.0);
  try {
    mae_loss(pred, Tensor<double>({ 1, 2 }, { 1.0, 2.0 }));
    FAIL("expected ShapeMismatch");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::kShapeMismatch);
  }
  try {
    mae_loss(pred, Tensor<double>({ 2, 1 }, { 1.0, NAN }));
    FAIL("expected NonFiniteTarget");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::kNonFiniteTarget);
  }
}

TEST_CASE("full-model gradient check") {
  Fixture fx({ "c1ccc2ccccc2c1", "c1ccc(s1)-c1cccs1", "CC(=O)Nc1ccc(O)cc1" });
  ModelConfig c = micro_config();
  c.max_degree = 16;
  const ModelParams<double> p = ModelParams<double>::init(c, fx.dims, 2024);
  const auto batch = make_batch<double>(fx.encoded, c, fx.dims);
  const Tensor<double> target({ 3, 1 }, { 0.3, -1.2, 2.0 });

  const tensor::GradCheckReport report = tensor::grad_check(
      [&](Tape<double> &tape, std::span<const Var<double>> leaves) {
        BoundParams<double> bound;
        bound.params = &p;
        bound.vars.assign(leaves.begin(), leaves.end());
        (void)tape;
        return mae_loss(forward(batch, bound), target);
      },
      p.tensors, p.names, { 1e-5, 1e-4 });
  CAPTURE(report.max_rel_error);
  CHECK(report.passed);
  CHECK(report.max_rel_error < 1e-4);
}

// Non-zero biases and epsilons push the tiniest attention gradients below the
// resolution of a 1e-5 central difference; a wider step still pins them.
TEST_CASE("full-model gradient check with random biases") {
  Fixture fx({ "c1ccc2ccccc2c1", "c1ccc(s1)-c1cccs1", "CC(=O)Nc1ccc(O)cc1" });
  ModelConfig c = micro_config();
  const ModelParams<double> p = random_params(c, fx.dims, 2024);
  const auto batch = make_batch<double>(fx.encoded, c, fx.dims);
  const Tensor<double> target({ 3, 1 }, { 0.3, -1.2, 2.0 });

  const tensor::GradCheckReport report = tensor::grad_check(
      [&](Tape<double> &, std::span<const Var<double>> leaves) {
        BoundParams<double> bound;
        bound.params = &p;
        bound.vars.assign(leaves.begin(), leaves.end());
        return mae_loss(forward(batch, bound), target);
      },
      p.tensors, p.names, { 1e-3, 1e-4 });
  CAPTURE(report.max_rel_error);
  CHECK(report.passed);
}
