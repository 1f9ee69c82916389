//
// Project ringkit - Copyright 2026 ringkit authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "oracles.h"
#include "ringkit/error.h"
#include "ringkit/rings.h"

using namespace ringkit;

namespace {

std::vector<int> ring_sizes(const std::vector<Ring> &rings) {
  std::vector<int> out;
  for (const Ring &r: rings)
    out.push_back(r.size());
  std::sort(out.begin(), out.end());
  return out;
}

RingGraph ring_graph_of(const std::string &smiles, bool add_virtual = true) {
  AtomGraph g = parse_smiles(smiles);
  return build_ring_graph(g, add_virtual);
}

}  // namespace

TEST_CASE("simple ring sets") {
  AtomGraph benzene = parse_smiles("c1ccccc1");
  CHECK(ring_sizes(find_smallest_rings(benzene)) == std::vector<int> { 6 });

  AtomGraph naph = parse_smiles("c1ccc2ccccc2c1");
  CHECK(ring_sizes(find_smallest_rings(naph)) == std::vector<int> { 6, 6 });

  AtomGraph butane = parse_smiles("CCCC");
  CHECK(find_smallest_rings(butane).empty());

  AtomGraph quater = parse_smiles("c1ccc(s1)-c1ccc(s1)-c1ccc(s1)-c1cccs1");
  CHECK(ring_sizes(find_smallest_rings(quater))
        == std::vector<int> { 5, 5, 5, 5 });

  // Induced-cycle semantics keep the bridging six-ring that SSSR would drop.
  AtomGraph norbornane = parse_smiles("C1CC2CCC1C2");
  CHECK(ring_sizes(find_smallest_rings(norbornane))
        == std::vector<int> { 5, 5, 6 });

  AtomGraph cubane = parse_smiles("C12C3C4C1C5C2C3C45");
  const auto cube = find_smallest_rings(cubane);
  // Six square faces plus four induced hexagons around antipodal pairs.
  CHECK(cube.size() == 10);
}

TEST_CASE("ring limit") {
  AtomGraph naph = parse_smiles("c1ccc2ccccc2c1");
  RingOptions tight;
  tight.max_rings = 1;
  CHECK_THROWS_AS(find_smallest_rings(naph, tight), Error);
}

TEST_CASE("canonical cycle order") {
  const std::vector<int> c { 4, 9, 2, 7 };
  CHECK(canonical_cycle_order(c) == std::vector<int> { 2, 7, 4, 9 });
  const std::vector<int> d { 2, 9, 4, 7 };
  CHECK(canonical_cycle_order(d) == std::vector<int> { 2, 7, 4, 9 });
}

TEST_CASE("ring signatures") {
  AtomGraph benzene = parse_smiles("c1ccccc1");
  const auto b = find_smallest_rings(benzene);
  CHECK(b[0].signature == "6:c.c.c.c.c.c");

  AtomGraph thiophene = parse_smiles("c1ccsc1");
  const auto t = find_smallest_rings(thiophene);
  CHECK(t[0].signature == "5:c.c.c.c.s");

  AtomGraph pyridine = parse_smiles("c1ccncc1");
  CHECK(find_smallest_rings(pyridine)[0].signature != b[0].signature);

  AtomGraph cyclohexane = parse_smiles("C1CCCCC1");
  CHECK(find_smallest_rings(cyclohexane)[0].signature == "6:C.C.C.C.C.C");
}

TEST_CASE("signature oracle over rotations and reflections") {
  // Independent minimum over all 2n readings.
  const auto oracle_sig = [](const std::vector<int> &cyc, const AtomGraph &g) {
    const int n = static_cast<int>(cyc.size());
    std::string best;
    for (int dir = 0; dir < 2; ++dir) {
      for (int s = 0; s < n; ++s) {
        std::string cand;
        for (int k = 0; k < n; ++k) {
          const int idx = dir == 0 ? (s + k) % n : (s - k + n) % n;
          if (k > 0)
            cand += '.';
          cand += g.atoms[cyc[idx]].token();
        }
        if (best.empty() || cand < best)
          best = cand;
      }
    }
    return std::to_string(n) + ":" + best;
  };

  std::mt19937_64 rng(7);
  for (const auto &rec: oracle::read_smi(RINGKIT_TEST_DATA_DIR
                                         "/ring_fixture.smi")) {
    CAPTURE(rec.name);
    AtomGraph g = parse_smiles(rec.smiles);
    for (const Ring &r: find_smallest_rings(g)) {
      CHECK(r.signature == oracle_sig(r.atoms, g));
      std::vector<int> rotated = r.atoms;
      std::rotate(rotated.begin(),
                  rotated.begin() + rng() % rotated.size(), rotated.end());
      if (rng() % 2)
        std::reverse(rotated.begin(), rotated.end());
      CHECK(ring_signature(rotated, g) == r.signature);
    }
  }
}

TEST_CASE("connections") {
  const RingGraph naph = ring_graph_of("c1ccc2ccccc2c1");
  REQUIRE(naph.connections.size() == 1);
  CHECK(naph.connections[0].kind == ConnectionKind::kShared);
  CHECK(naph.connections[0].signature == "S:2:C,C");
  CHECK(naph.connections[0].atoms.size() == 2);

  const RingGraph biphenyl = ring_graph_of("c1ccc(-c2ccccc2)cc1");
  REQUIRE(biphenyl.connections.size() == 1);
  CHECK(biphenyl.connections[0].kind == ConnectionKind::kChain);
  CHECK(biphenyl.connections[0].signature == "C:-");

  const RingGraph spiro = ring_graph_of("C1CCC2(CC1)CCCC2");
  REQUIRE(spiro.connections.size() == 1);
  CHECK(spiro.connections[0].signature == "S:1:C");

  const RingGraph bibenzyl = ring_graph_of("c1ccccc1CCc1ccccc1");
  REQUIRE(bibenzyl.connections.size() == 1);
  CHECK(bibenzyl.connections[0].signature == "C:-C-C-");

  const RingGraph stilbene = ring_graph_of("c1ccccc1/C=C/c1ccccc1");
  REQUIRE(stilbene.connections.size() == 1);
  CHECK(stilbene.connections[0].signature == "C:-C=C-");

  // Asymmetric chain reads the same from both ends.
  const RingGraph ester = ring_graph_of("c1ccccc1C(=O)Oc1ccccc1");
  REQUIRE(ester.connections.size() == 1);
  CHECK(ester.connections[0].signature == "C:-C-O-");

  // A chain longer than chain_max yields no edge.
  AtomGraph longer = parse_smiles("C1CC1CCCCCCCCCC1CC1");
  RingOptions opts;
  opts.chain_max = 8;
  CHECK(build_ring_graph(longer, false, opts).connections.empty());
  opts.chain_max = 11;
  CHECK(build_ring_graph(longer, false, opts).connections.size() == 1);

  // Paths through a third ring do not count as chains.
  const RingGraph terphenyl = ring_graph_of("c1ccc(cc1)-c1ccc(cc1)-c1ccccc1");
  CHECK(terphenyl.connections.size() == 2);
}

TEST_CASE("ring graph assembly") {
  const RingGraph benzene = ring_graph_of("c1ccccc1");
  CHECK(benzene.num_rings() == 1);
  CHECK(benzene.num_nodes() == 2);
  CHECK(benzene.virtual_index() == 1);
  CHECK(benzene.connections.empty());

  const RingGraph naph = ring_graph_of("c1ccc2ccccc2c1");
  CHECK(naph.num_nodes() == 3);
  CHECK(naph.connections.size() == 1);
  CHECK(naph.real_degrees() == std::vector<int> { 1, 1 });

  const RingGraph butane = ring_graph_of("CCCC", false);
  CHECK(butane.num_nodes() == 0);
  const RingGraph butane_v = ring_graph_of("CCCC", true);
  CHECK(butane_v.num_nodes() == 1);
}

TEST_CASE("oracle equivalence on random graphs") {
  std::mt19937_64 rng(20240611);
  int compared = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 3 + static_cast<int>(rng() % 10);
    const double p = 0.1 + 0.8 * (trial % 9) / 8.0;
    const auto nb = oracle::random_graph(rng, n, p);
    const auto got = oracle::as_vertex_sets(
        find_chordless_cycles(nb, 24, 1 << 20));
    const auto want = oracle::induced_cycles_by_subsets(nb, 24);
    CAPTURE(trial);
    CHECK(got == want);
    ++compared;
  }
  CHECK(compared == 1000);
}

TEST_CASE("oracle equivalence on the molecule fixture") {
  const auto fixture = oracle::read_smi(RINGKIT_TEST_DATA_DIR
                                        "/ring_fixture.smi");
  REQUIRE(fixture.size() >= 50);
  for (const auto &rec: fixture) {
    CAPTURE(rec.name);
    AtomGraph g = parse_smiles(rec.smiles);
    std::set<oracle::VertexSet> got;
    for (const Ring &r: find_smallest_rings(g))
      got.insert(oracle::VertexSet(r.atoms.begin(), r.atoms.end()));
    CHECK(got == oracle::induced_cycles_by_paths(g.neighbor_lists(), 24));
  }
}

TEST_CASE("ring membership closure and chain constraints") {
  for (const auto &rec: oracle::read_smi(RINGKIT_TEST_DATA_DIR
                                         "/ring_fixture.smi")) {
    CAPTURE(rec.name);
    AtomGraph g = parse_smiles(rec.smiles);
    const RingGraph rg = build_ring_graph(g, true);

    std::vector<bool> member(g.num_atoms(), false);
    std::set<std::pair<int, int>> ring_bonds;
    for (const Ring &r: rg.rings) {
      for (int k = 0; k < r.size(); ++k) {
        const int a = r.atoms[k], b = r.atoms[(k + 1) % r.size()];
        member[a] = true;
        ring_bonds.insert({ std::min(a, b), std::max(a, b) });
      }
    }
    for (int i = 0; i < g.num_atoms(); ++i)
      CHECK(g.atoms[i].in_ring == member[i]);
    for (const Bond &b: g.bonds) {
      const bool cyclic = ring_bonds.count(
          { std::min(b.begin, b.end), std::max(b.begin, b.end) });
      CHECK(b.in_ring == cyclic);
    }

    std::set<std::pair<int, int>> pairs;
    for (const RingConnection &c: rg.connections) {
      CHECK(c.ring_a < c.ring_b);
      CHECK(pairs.insert({ c.ring_a, c.ring_b }).second);
      if (c.kind == ConnectionKind::kShared) {
        CHECK(!c.atoms.empty());
        continue;
      }
      REQUIRE(c.atoms.size() >= 2);
      for (std::size_t k = 1; k + 1 < c.atoms.size(); ++k)
        CHECK_FALSE(g.atoms[c.atoms[k]].in_ring);
      for (std::size_t k = 0; k + 1 < c.atoms.size(); ++k) {
        const int b = g.find_bond(c.atoms[k], c.atoms[k + 1]);
        REQUIRE(b >= 0);
        CHECK(g.bonds[b].order != BondOrder::kAromatic);
      }
    }
  }
}

TEST_CASE("relabeling invariance") {
  std::mt19937_64 rng(99);
  for (const auto &rec: oracle::read_smi(RINGKIT_TEST_DATA_DIR
                                         "/ring_fixture.smi")) {
    CAPTURE(rec.name);
    AtomGraph g = parse_smiles(rec.smiles);
    const auto perm = oracle::random_permutation(rng, g.num_atoms());
    AtomGraph pg = oracle::permute_atoms(g, perm);
    const RingGraph a = build_ring_graph(g, true);
    const RingGraph b = build_ring_graph(pg, true);

    using Key = std::tuple<oracle::VertexSet, std::string>;
    std::set<Key> ra, rb;
    std::map<oracle::VertexSet, int> index_a, index_b;
    for (int i = 0; i < a.num_rings(); ++i) {
      oracle::VertexSet s;
      for (int v: a.rings[i].atoms)
        s.insert(perm[v]);
      ra.insert({ s, a.rings[i].signature });
      index_a[s] = i;
    }
    for (int i = 0; i < b.num_rings(); ++i) {
      const oracle::VertexSet s(b.rings[i].atoms.begin(),
                                b.rings[i].atoms.end());
      rb.insert({ s, b.rings[i].signature });
      index_b[s] = i;
    }
    CHECK(ra == rb);

    // Connections keyed by the (relabeled) vertex sets of their rings.
    const auto conn_keys = [](const RingGraph &rg,
                              const std::map<oracle::VertexSet, int> &idx) {
      std::vector<oracle::VertexSet> by_index(idx.size());
      for (const auto &[s, i]: idx)
        by_index[i] = s;
      std::set<std::tuple<oracle::VertexSet, oracle::VertexSet, std::string>>
          out;
      for (const RingConnection &c: rg.connections) {
        auto x = by_index[c.ring_a], y = by_index[c.ring_b];
        if (y < x)
          std::swap(x, y);
        out.insert({ x, y, c.signature });
      }
      return out;
    };
    CHECK(conn_keys(a, index_a) == conn_keys(b, index_b));
  }
}
