//
// Project ringkit - Copyright 2026 ringkit authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "ringkit/selfcheck.h"

#include <algorithm>
#include <functional>
#include <map>
#include <random>

#include "ringkit/gradcheck.h"
#include "ringkit/hiergraph.h"
#include "ringkit/model.h"
#include "ringkit/ops.h"

namespace ringkit::selfcheck {

using tensor::LossBuilder;
using tensor::Tape;
using T64 = tensor::Tensor<double>;
using V64 = tensor::Var<double>;

nlohmann::ordered_json SuiteResult::to_json() const {
  nlohmann::ordered_json j;
  j["passed"] = passed;
  j["tol"] = tol;
  j["max_rel_error"] = max_rel_error;
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const CheckEntry &e: entries) {
    list.push_back({ { "name", e.name },
                     { "max_rel_error", e.max_rel_error },
                     { "excluded", e.excluded },
                     { "passed", e.passed } });
  }
  j["checks"] = std::move(list);
  return j;
}

namespace {

  double uniform(std::mt19937_64 &rng, double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
  }

  T64 random_tensor(std::mt19937_64 &rng, tensor::Shape shape,
                    double lo = -1.0, double hi = 1.0) {
    T64 t(std::move(shape));
    for (double &v: t.values())
      v = uniform(rng, lo, hi);
    return t;
  }

  // Contracts an output with fixed weights so each element gets its own
  // adjoint.
  V64 weighted_sum(const V64 &y, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return tensor::sum(tensor::mul(
        y, y.tape().constant(random_tensor(rng, y.shape(), 0.5, 1.5))));
  }

  struct OpCase {
    const char *name;
    LossBuilder loss;
    std::vector<T64> inputs;
  };

  std::vector<OpCase> op_cases(std::mt19937_64 &rng) {
    using namespace tensor;
    const std::size_t n = 2 + rng() % 4, k = 1 + rng() % 4, m = 1 + rng() % 4;
    const auto r = [&](std::size_t a, std::size_t b, double lo = -1.0,
                       double hi = 1.0) {
      return random_tensor(rng, { a, b }, lo, hi);
    };
    std::vector<OpCase> c;
    c.push_back({ "matmul",
                  [](Tape<double> &, std::span<const V64> p) {
                    return weighted_sum(matmul(p[0], p[1]), 1);
                  },
                  { r(n, k), r(k, m) } });
    c.push_back({ "add",
                  [](Tape<double> &, std::span<const V64> p) {
                    return weighted_sum(add(p[0], p[1]), 2);
                  },
                  { r(n, m), r(1, m) } });
    c.push_back({ "sub",
                  [](Tape<double> &, std::span<const V64> p) {
                    return weighted_sum(sub(p[0], p[1]), 3);
                  },
                  { r(n, m), r(n, m) } });
    c.push_back({ "mul",
                  [](Tape<double> &, std::span<const V64> p) {
                    return weighted_sum(mul(p[0], p[1]), 4);
                  },
                  { r(n, m), r(n, m) } });
    c.push_back({ "div",
                  [](Tape<double> &, std::span<const V64> p) {
                    return weighted_sum(div(p[0], p[1]), 5);
                  },
                  { r(n, m), r(n, m, 0.5, 2.0) } });
    c.push_back({ "scale",
                  [](Tape<double> &, std::span<const V64> p) {
                    return weighted_sum(scale(p[0], -1.7), 6);
                  },
                  { r(n, m) } });
    c.push_back({ "scale_by",
                  [](Tape<double> &, std::span<const V64> p) {
                    return weighted_sum(scale_by(p[0], p[1]), 7);
                  },
                  { r(n, m), random_tensor(rng, { 1 }) } });
    c.push_back({ "concat",
                  [](Tape<double> &, std::span<const V64> p) {
                    return weighted_sum(concat(p), 8);
                  },
                  { r(n, m), r(n, k) } });
    c.push_back({ "concat_rows",
                  [](Tape<double> &, std::span<const V64> p) {
                    return weighted_sum(concat_rows(p), 9);
                  },
                  { r(n, m), r(k, m) } });
    c.push_back({ "slice",
                  [m](Tape<double> &, std::span<const V64> p) {
                    return weighted_sum(slice(p[0], 1, m + 1), 10);
                  },
                  { r(n, m + 2) } });
    c.push_back({ "relu",
                  [](Tape<double> &, std::span<const V64> p) {
                    return weighted_sum(relu(p[0]), 11);
                  },
                  { r(n, m) } });
    c.push_back({ "exp",
                  [](Tape<double> &, std::span<const V64> p) {
                    return weighted_sum(exp(p[0]), 12);
                  },
                  { r(n, m) } });
    c.push_back({ "log",
                  [](Tape<double> &, std::span<const V64> p) {
                    return weighted_sum(log(p[0]), 13);
                  },
                  { r(n, m, 0.5, 3.0) } });
    c.push_back({ "abs",
                  [](Tape<double> &, std::span<const V64> p) {
                    return weighted_sum(abs(p[0]), 14);
                  },
                  { r(n, m) } });
    c.push_back({ "softmax_rows",
                  [](Tape<double> &, std::span<const V64> p) {
                    return weighted_sum(softmax_rows(p[0]), 15);
                  },
                  { r(n, m + 1, -3.0, 3.0) } });
    c.push_back({ "segment_softmax",
                  [n](Tape<double> &, std::span<const V64> p) {
                    const std::vector<int> off { 0, 1, static_cast<int>(n),
                                                 static_cast<int>(n) };
                    return weighted_sum(segment_softmax(p[0], off), 16);
                  },
                  { r(n, m, -3.0, 3.0) } });
    c.push_back({ "segment_sum",
                  [n](Tape<double> &, std::span<const V64> p) {
                    std::vector<int> ids(n);
                    for (std::size_t i = 0; i < n; ++i)
                      ids[i] = static_cast<int>((i * 7) % 3);
                    return weighted_sum(segment_sum(p[0], ids, 4), 17);
                  },
                  { r(n, m) } });
    c.push_back({ "gather_rows",
                  [n](Tape<double> &, std::span<const V64> p) {
                    const std::vector<int> idx { 0, static_cast<int>(n - 1),
                                                 0, 1 };
                    return weighted_sum(gather_rows(p[0], idx), 18);
                  },
                  { r(n, m) } });
    c.push_back({ "sum",
                  [](Tape<double> &, std::span<const V64> p) {
                    return sum(mul(p[0], p[0]));
                  },
                  { r(n, m) } });
    c.push_back({ "mean",
                  [](Tape<double> &, std::span<const V64> p) {
                    return mean(mul(p[0], p[0]));
                  },
                  { r(n, m) } });
    c.push_back({ "signed_eps",
                  [](Tape<double> &, std::span<const V64> p) {
                    return weighted_sum(signed_eps(p[0], 1e-3), 19);
                  },
                  { r(n, m, 0.2, 1.0) } });
    return c;
  }

  void finish(SuiteResult &s) {
    for (const CheckEntry &e: s.entries) {
      s.max_rel_error = std::max(s.max_rel_error, e.max_rel_error);
      s.passed = s.passed && e.passed;
    }
  }

}  // namespace

SuiteResult op_suite(std::uint64_t seed, int trials, double tol) {
  std::mt19937_64 rng(seed);
  SuiteResult s;
  s.tol = tol;
  std::map<std::string, std::size_t> slot;
  for (int trial = 0; trial < trials; ++trial) {
    for (OpCase &c: op_cases(rng)) {
      const tensor::GradCheckReport r =
          tensor::grad_check(c.loss, std::move(c.inputs), {}, { 1e-5, tol });
      auto [it, fresh] = slot.try_emplace(c.name, s.entries.size());
      if (fresh)
        s.entries.push_back({ c.name });
      CheckEntry &e = s.entries[it->second];
      e.max_rel_error = std::max(e.max_rel_error, r.max_rel_error);
      e.excluded += r.excluded;
      e.passed = e.passed && r.passed;
    }
  }
  finish(s);
  return s;
}

SuiteResult full_model_suite(std::uint64_t seed, double tol) {
  using namespace model;
  std::vector<HierGraph> graphs;
  for (const char *smi:
       { "c1ccc2ccccc2c1", "c1ccc(s1)-c1cccs1", "CC(=O)Nc1ccc(O)cc1" })
    graphs.push_back(build_hier_graph(smi, true));
  const Vocabulary vocab = Vocabulary::build(graphs);
  const FeatureDims dims = FeatureDims::from_vocabulary(vocab);
  std::vector<EncodedGraph> encoded;
  for (const HierGraph &h: graphs)
    encoded.push_back(encode_graph(h, vocab));

  ModelConfig c;
  c.layers = 2;
  c.hidden = 16;
  c.heads = 2;
  c.pe_dim = 4;
  const ModelParams<double> p = ModelParams<double>::init(c, dims, seed);
  const BatchedGraph<double> batch = make_batch<double>(encoded, c, dims);
  const T64 target({ 3, 1 }, { 0.3, -1.2, 2.0 });

  const tensor::GradCheckReport r = tensor::grad_check(
      [&](Tape<double> &, std::span<const V64> leaves) {
        BoundParams<double> bound;
        bound.params = &p;
        bound.vars.assign(leaves.begin(), leaves.end());
        return mae_loss(forward(batch, bound), target);
      },
      p.tensors, p.names, { 1e-5, tol });
  SuiteResult s;
  s.tol = tol;
  for (const tensor::ParamCheck &pc: r.params)
    s.entries.push_back({ pc.name, pc.max_rel_error, pc.excluded, pc.passed });
  finish(s);
  return s;
}

}  // namespace ringkit::selfcheck
