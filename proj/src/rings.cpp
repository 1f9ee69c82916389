//
// Project ringkit - Copyright 2026 ringkit authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "ringkit/rings.h"

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <utility>

#include "ringkit/error.h"

namespace ringkit {

std::string_view connection_kind_name(ConnectionKind kind) {
  return kind == ConnectionKind::kShared ? "shared" : "chain";
}

std::vector<int> RingGraph::real_degrees() const {
  std::vector<int> deg(rings.size(), 0);
  for (const RingConnection &c: connections) {
    ++deg[c.ring_a];
    ++deg[c.ring_b];
  }
  return deg;
}

std::vector<int> canonical_cycle_order(std::span<const int> cycle) {
  const int n = static_cast<int>(cycle.size());
  if (n == 0)
    return {};
  const int start = static_cast<int>(
      std::min_element(cycle.begin(), cycle.end()) - cycle.begin());
  const int next = cycle[(start + 1) % n];
  const int prev = cycle[(start + n - 1) % n];
  const int step = next <= prev ? 1 : n - 1;

  std::vector<int> out;
  out.reserve(n);
  for (int i = 0, j = start; i < n; ++i, j = (j + step) % n)
    out.push_back(cycle[j]);
  return out;
}

namespace {
  class ChordlessCycleFinder {
  public:
    ChordlessCycleFinder(const std::vector<std::vector<int>> &neighbors,
                         int max_size, int max_count)
        : nbrs_(neighbors), n_(static_cast<int>(neighbors.size())),
          max_size_(max_size), max_count_(max_count),
          adj_(static_cast<std::size_t>(n_) * n_, 0), on_path_(n_, 0) {
      for (int u = 0; u < n_; ++u) {
        for (int v: nbrs_[u])
          adj_[index(u, v)] = 1;
      }
    }

    std::vector<std::vector<int>> run() {
      for (root_ = 0; root_ < n_; ++root_) {
        for (int u: nbrs_[root_]) {
          if (u <= root_)
            continue;
          path_ = { root_, u };
          on_path_[root_] = on_path_[u] = 1;
          extend();
          on_path_[root_] = on_path_[u] = 0;
        }
      }
      for (auto &c: cycles_)
        c = canonical_cycle_order(c);
      std::sort(cycles_.begin(), cycles_.end());
      return std::move(cycles_);
    }

  private:
    std::size_t index(int u, int v) const {
      return static_cast<std::size_t>(u) * n_ + v;
    }

    // path_ is an induced path whose only vertex adjacent to root_ is
    // path_[1]. Every vertex on it is greater than root_.
    void extend() {
      const int last = path_.back();
      for (int v: nbrs_[last]) {
        if (v <= root_ || on_path_[v])
          continue;
        bool chord = false;
        for (std::size_t k = 1; k + 1 < path_.size(); ++k) {
          if (adj_[index(v, path_[k])]) {
            chord = true;
            break;
          }
        }
        if (chord)
          continue;

        if (adj_[index(v, root_)]) {
          // Each cycle is reached once per direction; keep one.
          if (path_[1] < v) {
            path_.push_back(v);
            cycles_.push_back(path_);
            path_.pop_back();
            if (static_cast<int>(cycles_.size()) > max_count_)
              throw Error(ErrorCode::kRingLimitExceeded,
                          "more than " + std::to_string(max_count_)
                              + " rings");
          }
          continue;
        }

        if (static_cast<int>(path_.size()) + 1 < max_size_) {
          path_.push_back(v);
          on_path_[v] = 1;
          extend();
          on_path_[v] = 0;
          path_.pop_back();
        }
      }
    }

    const std::vector<std::vector<int>> &nbrs_;
    int n_;
    int max_size_;
    int max_count_;
    std::vector<char> adj_;
    std::vector<char> on_path_;
    std::vector<int> path_;
    int root_ = 0;
    std::vector<std::vector<int>> cycles_;
  };

  // Atoms and bonds that lie on some cycle; chords of a cycle are cyclic
  // themselves, so induced cycles never need bridge edges.
  std::vector<std::vector<int>> cyclic_neighbors(const AtomGraph &g) {
    const int n = g.num_atoms();
    std::vector<int> disc(n, -1), low(n, 0);
    std::vector<char> bridge(g.bonds.size(), 0);
    int timer = 0;

    std::function<void(int, int)> dfs = [&](int u, int via) {
      disc[u] = low[u] = timer++;
      for (int bi: g.adjacency[u]) {
        if (bi == via)
          continue;
        const int v = g.bonds[bi].other(u);
        if (disc[v] < 0) {
          dfs(v, bi);
          low[u] = std::min(low[u], low[v]);
          if (low[v] > disc[u])
            bridge[bi] = 1;
        } else {
          low[u] = std::min(low[u], disc[v]);
        }
      }
    };
    for (int i = 0; i < n; ++i) {
      if (disc[i] < 0)
        dfs(i, -1);
    }

    std::vector<std::vector<int>> out(n);
    for (int u = 0; u < n; ++u) {
      for (int bi: g.adjacency[u]) {
        if (!bridge[bi])
          out[u].push_back(g.bonds[bi].other(u));
      }
    }
    return out;
  }

  struct ChainCandidate {
    int bonds = 0;
    std::string text;
    std::vector<int> atoms;
  };

  std::string chain_text(const AtomGraph &g, std::span<const int> path) {
    std::string out;
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
      const int bi = g.find_bond(path[k], path[k + 1]);
      out += bond_symbol(g.bonds[bi].order);
      if (k + 2 < path.size())
        out += g.atoms[path[k + 1]].element;
    }
    return out;
  }

  bool better(const ChainCandidate &a, const ChainCandidate &b) {
    if (a.bonds != b.bonds)
      return a.bonds < b.bonds;
    return a.text < b.text;
  }
}  // namespace

std::vector<std::vector<int>>
find_chordless_cycles(const std::vector<std::vector<int>> &neighbors,
                      int max_size, int max_count) {
  if (max_size < 3)
    return {};
  return ChordlessCycleFinder(neighbors, max_size, max_count).run();
}

std::string ring_signature(std::span<const int> cycle, const AtomGraph &g) {
  const int n = static_cast<int>(cycle.size());
  std::vector<std::string> tokens;
  tokens.reserve(n);
  for (int a: cycle)
    tokens.push_back(g.atoms[a].token());

  std::string best;
  bool have = false;
  for (int start = 0; start < n; ++start) {
    for (int dir: { 1, n - 1 }) {
      std::string s;
      for (int i = 0, j = start; i < n; ++i, j = (j + dir) % n) {
        if (i > 0)
          s += '.';
        s += tokens[j];
      }
      if (!have || s < best) {
        best = std::move(s);
        have = true;
      }
    }
  }
  return std::to_string(n) + ":" + best;
}

std::vector<Ring> find_smallest_rings(AtomGraph &g,
                                      const RingOptions &options) {
  const std::vector<std::vector<int>> cycles = find_chordless_cycles(
      cyclic_neighbors(g), options.max_ring_size, options.max_rings);

  for (Atom &a: g.atoms)
    a.in_ring = false;
  for (Bond &b: g.bonds)
    b.in_ring = false;

  std::vector<Ring> rings;
  rings.reserve(cycles.size());
  for (const std::vector<int> &c: cycles) {
    const int n = static_cast<int>(c.size());
    for (int i = 0; i < n; ++i) {
      g.atoms[c[i]].in_ring = true;
      g.bonds[g.find_bond(c[i], c[(i + 1) % n])].in_ring = true;
    }
    rings.push_back({ c, ring_signature(c, g) });
  }
  return rings;
}

std::vector<RingConnection>
find_ring_connections(const AtomGraph &g, const std::vector<Ring> &rings,
                      const RingOptions &options) {
  const int nr = static_cast<int>(rings.size());
  const int na = g.num_atoms();

  // membership[atom] = rings containing it
  std::vector<std::vector<int>> membership(na);
  std::vector<std::vector<char>> in_ring(nr, std::vector<char>(na, 0));
  for (int r = 0; r < nr; ++r) {
    for (int a: rings[r].atoms) {
      membership[a].push_back(r);
      in_ring[r][a] = 1;
    }
  }

  std::vector<std::vector<int>> shared(static_cast<std::size_t>(nr) * nr);
  for (int a = 0; a < na; ++a) {
    const std::vector<int> &m = membership[a];
    for (std::size_t i = 0; i < m.size(); ++i) {
      for (std::size_t j = i + 1; j < m.size(); ++j)
        shared[static_cast<std::size_t>(m[i]) * nr + m[j]].push_back(a);
    }
  }

  // Best chain per (lower ring, higher ring).
  std::map<std::pair<int, int>, ChainCandidate> chains;
  std::vector<int> path;
  std::vector<char> on_path(na, 0);

  auto offer = [&](int from_ring, int to_atom) {
    for (int to_ring: membership[to_atom]) {
      if (to_ring == from_ring
          || !shared[static_cast<std::size_t>(std::min(from_ring, to_ring))
                         * nr
                     + std::max(from_ring, to_ring)]
                  .empty())
        continue;
      bool disjoint = true;
      for (int a: rings[to_ring].atoms) {
        if (in_ring[from_ring][a]) {
          disjoint = false;
          break;
        }
      }
      if (!disjoint)
        continue;

      ChainCandidate cand;
      cand.bonds = static_cast<int>(path.size()) - 1;
      std::string fwd = chain_text(g, path);
      std::vector<int> rev_path(path.rbegin(), path.rend());
      std::string rev = chain_text(g, rev_path);
      cand.text = std::min(fwd, rev);
      cand.atoms = from_ring < to_ring ? path : rev_path;

      const auto key = std::minmax(from_ring, to_ring);
      auto it = chains.find(key);
      if (it == chains.end() || better(cand, it->second))
        chains[key] = std::move(cand);
    }
  };

  std::function<void(int, int)> walk = [&](int from_ring, int depth) {
    const int last = path.back();
    for (int bi: g.adjacency[last]) {
      const Bond &b = g.bonds[bi];
      if (b.order == BondOrder::kAromatic)
        continue;
      const int next = b.other(last);
      if (on_path[next] || in_ring[from_ring][next])
        continue;
      path.push_back(next);
      on_path[next] = 1;
      if (!membership[next].empty()) {
        offer(from_ring, next);
      } else if (depth + 1 < options.chain_max && !g.atoms[next].in_ring) {
        walk(from_ring, depth + 1);
      }
      on_path[next] = 0;
      path.pop_back();
    }
  };

  for (int r = 0; r < nr; ++r) {
    for (int a: rings[r].atoms) {
      path.assign(1, a);
      on_path[a] = 1;
      walk(r, 0);
      on_path[a] = 0;
    }
  }

  std::vector<RingConnection> out;
  for (int i = 0; i < nr; ++i) {
    for (int j = i + 1; j < nr; ++j) {
      const std::vector<int> &common =
          shared[static_cast<std::size_t>(i) * nr + j];
      if (!common.empty()) {
        std::vector<std::string> els;
        for (int a: common)
          els.push_back(g.atoms[a].element);
        std::sort(els.begin(), els.end());
        std::string sig = "S:" + std::to_string(common.size()) + ":";
        for (std::size_t k = 0; k < els.size(); ++k) {
          if (k > 0)
            sig += ',';
          sig += els[k];
        }
        out.push_back({ i, j, ConnectionKind::kShared, std::move(sig),
                        common });
        continue;
      }
      auto it = chains.find({ i, j });
      if (it != chains.end()) {
        out.push_back({ i, j, ConnectionKind::kChain, "C:" + it->second.text,
                        it->second.atoms });
      }
    }
  }
  return out;
}

RingGraph build_ring_graph(AtomGraph &g, bool add_virtual,
                           const RingOptions &options) {
  RingGraph rg;
  rg.rings = find_smallest_rings(g, options);
  rg.connections = find_ring_connections(g, rg.rings, options);
  rg.has_virtual = add_virtual;
  return rg;
}

}  // namespace ringkit
