//
// Project ringkit - Copyright 2026 ringkit authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "ringkit/hiergraph.h"

#include <algorithm>
#include <set>
#include <tuple>

#include "ringkit/error.h"

namespace ringkit {

using nlohmann::ordered_json;

bool HierGraph::structurally_equal(const HierGraph &other) const {
  return atom_graph.structurally_equal(other.atom_graph)
         && ring_graph == other.ring_graph && inter_edges == other.inter_edges
         && targets == other.targets;
}

HierGraph build_hier_graph(AtomGraph atom_graph, bool add_virtual,
                           const RingOptions &options) {
  HierGraph h;
  h.atom_graph = std::move(atom_graph);
  h.ring_graph = build_ring_graph(h.atom_graph, add_virtual, options);
  for (int r = 0; r < h.ring_graph.num_rings(); ++r) {
    for (int a: h.ring_graph.rings[r].atoms)
      h.inter_edges.emplace_back(r, a);
  }
  return h;
}

HierGraph build_hier_graph(std::string_view smiles, bool add_virtual,
                           const RingOptions &options) {
  return build_hier_graph(parse_smiles(smiles), add_virtual, options);
}

void SignatureCounts::add(const HierGraph &h) {
  for (const Ring &r: h.ring_graph.rings)
    ++rings[r.signature];
  for (const RingConnection &c: h.ring_graph.connections)
    ++connections[c.signature];
}

void SignatureCounts::merge(const SignatureCounts &other) {
  for (const auto &[sig, n]: other.rings)
    rings[sig] += n;
  for (const auto &[sig, n]: other.connections)
    connections[sig] += n;
}

Vocabulary::Vocabulary() {
  ring_types_ = { std::string(kOovToken) };
  connection_types_ = { std::string(kOovToken),
                        std::string(kVirtualSignature) };
  ring_lookup_.emplace(ring_types_[0], kOov);
  connection_lookup_.emplace(connection_types_[0], kOov);
  connection_lookup_.emplace(connection_types_[1], kVirtual);
}

namespace {
  std::vector<std::string> by_frequency(const std::map<std::string, long> &m) {
    std::vector<std::pair<std::string, long>> items(m.begin(), m.end());
    std::sort(items.begin(), items.end(), [](const auto &a, const auto &b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    std::vector<std::string> out;
    out.reserve(items.size());
    for (auto &[sig, n]: items)
      out.push_back(std::move(sig));
    return out;
  }
}  // namespace

Vocabulary Vocabulary::from_counts(const SignatureCounts &counts) {
  Vocabulary v;
  for (std::string &sig: by_frequency(counts.rings)) {
    v.ring_lookup_.emplace(sig, v.ring_dim());
    v.ring_types_.push_back(std::move(sig));
  }
  for (std::string &sig: by_frequency(counts.connections)) {
    if (v.connection_lookup_.contains(sig))
      continue;
    v.connection_lookup_.emplace(sig, v.connection_dim());
    v.connection_types_.push_back(std::move(sig));
  }
  return v;
}

Vocabulary Vocabulary::build(std::span<const HierGraph> corpus) {
  if (corpus.empty())
    throw Error(ErrorCode::kEmptyCorpus, "vocabulary needs training graphs");
  SignatureCounts counts;
  for (const HierGraph &h: corpus)
    counts.add(h);
  return from_counts(counts);
}

int Vocabulary::ring_index(std::string_view signature) const {
  auto it = ring_lookup_.find(signature);
  return it == ring_lookup_.end() ? kOov : it->second;
}

int Vocabulary::connection_index(std::string_view signature) const {
  auto it = connection_lookup_.find(signature);
  return it == connection_lookup_.end() ? kOov : it->second;
}

nlohmann::json Vocabulary::to_json() const {
  return { { "ring_types", ring_types_ },
           { "connection_types", connection_types_ } };
}

Vocabulary Vocabulary::from_json(const nlohmann::json &j) {
  Vocabulary v;
  const auto rings = j.at("ring_types").get<std::vector<std::string>>();
  const auto conns = j.at("connection_types").get<std::vector<std::string>>();
  if (rings.empty() || rings[0] != kOovToken || conns.size() < 2
      || conns[0] != kOovToken || conns[1] != kVirtualSignature)
    throw Error(ErrorCode::kVocabMismatch, "reserved vocabulary slots missing");
  v.ring_types_ = rings;
  v.connection_types_ = conns;
  v.ring_lookup_.clear();
  v.connection_lookup_.clear();
  for (int i = 0; i < v.ring_dim(); ++i)
    v.ring_lookup_.emplace(v.ring_types_[i], i);
  for (int i = 0; i < v.connection_dim(); ++i)
    v.connection_lookup_.emplace(v.connection_types_[i], i);
  return v;
}

RingEncoding encode_ring_attributes(const HierGraph &h, const Vocabulary &v) {
  const RingGraph &rg = h.ring_graph;
  const int nr = rg.num_rings();
  const int n_edges = static_cast<int>(rg.connections.size())
                      + (rg.has_virtual ? nr : 0);

  RingEncoding out;
  out.nodes = FeatureMatrix(nr, v.ring_dim());
  out.edges = FeatureMatrix(n_edges, v.connection_dim());
  for (int r = 0; r < nr; ++r) {
    const int idx = v.ring_index(rg.rings[r].signature);
    out.oov_rings += idx == Vocabulary::kOov ? 1 : 0;
    out.nodes.at(r, idx) = 1;
  }
  int row = 0;
  for (const RingConnection &c: rg.connections) {
    out.edges.at(row++, v.connection_index(c.signature)) = 1;
    out.edge_endpoints.emplace_back(c.ring_a, c.ring_b);
  }
  if (rg.has_virtual) {
    for (int r = 0; r < nr; ++r) {
      out.edges.at(row++, Vocabulary::kVirtual) = 1;
      out.edge_endpoints.emplace_back(r, rg.virtual_index());
    }
  }
  return out;
}

std::string serialize(const HierGraph &h) {
  const AtomGraph &g = h.atom_graph;
  const RingGraph &rg = h.ring_graph;

  ordered_json j;
  j["v"] = 1;
  j["smiles"] = g.source_smiles;
  ordered_json atoms = ordered_json::array();
  for (const Atom &a: g.atoms) {
    atoms.push_back({ { "el", a.element },
                      { "ar", a.aromatic ? 1 : 0 },
                      { "chg", a.formal_charge },
                      { "hs", a.total_h() },
                      { "ih", a.implicit_h } });
  }
  j["atoms"] = std::move(atoms);
  ordered_json bonds = ordered_json::array();
  for (const Bond &b: g.bonds)
    bonds.push_back({ b.begin, b.end, bond_order_name(b.order) });
  j["bonds"] = std::move(bonds);
  ordered_json rings = ordered_json::array(), sigs = ordered_json::array();
  for (const Ring &r: rg.rings) {
    rings.push_back(r.atoms);
    sigs.push_back(r.signature);
  }
  j["rings"] = std::move(rings);
  j["ring_sigs"] = std::move(sigs);
  ordered_json conns = ordered_json::array();
  for (const RingConnection &c: rg.connections) {
    conns.push_back({ c.ring_a, c.ring_b, connection_kind_name(c.kind),
                      c.signature, c.atoms });
  }
  j["conns"] = std::move(conns);
  ordered_json inter = ordered_json::array();
  for (const auto &[r, a]: h.inter_edges)
    inter.push_back({ r, a });
  j["inter"] = std::move(inter);
  j["virtual"] = rg.has_virtual ? 1 : 0;
  j["y"] = h.targets;
  return j.dump();
}

namespace {
  template <class T>
  T field(const nlohmann::json &obj, const char *key, std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end())
      throw SchemaError(std::string("missing field '") + key + "'", line);
    try {
      return it->get<T>();
    } catch (const nlohmann::json::exception &e) {
      throw SchemaError(std::string("bad field '") + key + "': " + e.what(),
                        line);
    }
  }

  void require(bool ok, const std::string &what, std::size_t line) {
    if (!ok)
      throw SchemaError(what, line);
  }
}  // namespace

HierGraph deserialize(std::string_view line, std::size_t line_number) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error &e) {
    throw SchemaError(std::string("invalid JSON: ") + e.what(), line_number);
  }
  require(j.is_object(), "record is not an object", line_number);
  require(field<int>(j, "v", line_number) == 1, "unsupported version",
          line_number);

  HierGraph h;
  AtomGraph &g = h.atom_graph;
  g.source_smiles = field<std::string>(j, "smiles", line_number);

  const auto atoms = field<nlohmann::json>(j, "atoms", line_number);
  require(atoms.is_array(), "'atoms' is not an array", line_number);
  for (const auto &a: atoms) {
    require(a.is_object(), "atom is not an object", line_number);
    Atom atom;
    atom.element = field<std::string>(a, "el", line_number);
    atom.aromatic = field<int>(a, "ar", line_number) != 0;
    atom.formal_charge = field<int>(a, "chg", line_number);
    const int hs = field<int>(a, "hs", line_number);
    atom.implicit_h = a.contains("ih") ? field<int>(a, "ih", line_number) : 0;
    atom.explicit_h = hs - atom.implicit_h;
    require(atom.explicit_h >= 0 && atom.implicit_h >= 0,
            "negative hydrogen count", line_number);
    g.atoms.push_back(std::move(atom));
    g.adjacency.emplace_back();
  }

  const int na = g.num_atoms();
  auto atom_ok = [na](int i) { return i >= 0 && i < na; };

  for (const auto &b: field<nlohmann::json>(j, "bonds", line_number)) {
    require(b.is_array() && b.size() == 3, "bond must be [i,j,order]",
            line_number);
    int u = 0, v = 0;
    std::string order_name;
    try {
      u = b[0].get<int>();
      v = b[1].get<int>();
      order_name = b[2].get<std::string>();
    } catch (const nlohmann::json::exception &e) {
      throw SchemaError(std::string("bad bond: ") + e.what(), line_number);
    }
    const auto order = parse_bond_order_name(order_name);
    require(order.has_value(), "unknown bond order '" + order_name + "'",
            line_number);
    require(atom_ok(u) && atom_ok(v), "bond atom index out of range",
            line_number);
    require(g.add_bond(u, v, *order) >= 0, "self loop or duplicate bond",
            line_number);
  }

  RingGraph &rg = h.ring_graph;
  const auto rings =
      field<std::vector<std::vector<int>>>(j, "rings", line_number);
  const auto sigs = field<std::vector<std::string>>(j, "ring_sigs", line_number);
  require(rings.size() == sigs.size(), "rings/ring_sigs length mismatch",
          line_number);
  for (std::size_t r = 0; r < rings.size(); ++r) {
    const auto &cycle = rings[r];
    require(cycle.size() >= 3, "ring smaller than 3 atoms", line_number);
    for (std::size_t k = 0; k < cycle.size(); ++k) {
      const int a = cycle[k], b = cycle[(k + 1) % cycle.size()];
      require(atom_ok(a), "ring atom index out of range", line_number);
      const int bi = g.find_bond(a, b);
      require(bi >= 0, "ring atoms are not bonded", line_number);
      g.atoms[a].in_ring = true;
      g.bonds[bi].in_ring = true;
    }
    rg.rings.push_back({ cycle, sigs[r] });
  }

  const int nr = rg.num_rings();
  for (const auto &c: field<nlohmann::json>(j, "conns", line_number)) {
    require(c.is_array() && (c.size() == 4 || c.size() == 5),
            "conn must be [ri,rj,kind,sig(,atoms)]", line_number);
    RingConnection conn;
    std::string kind;
    try {
      conn.ring_a = c[0].get<int>();
      conn.ring_b = c[1].get<int>();
      kind = c[2].get<std::string>();
      conn.signature = c[3].get<std::string>();
      if (c.size() == 5)
        conn.atoms = c[4].get<std::vector<int>>();
    } catch (const nlohmann::json::exception &e) {
      throw SchemaError(std::string("bad conn: ") + e.what(), line_number);
    }
    require(conn.ring_a >= 0 && conn.ring_a < conn.ring_b && conn.ring_b < nr,
            "conn ring index out of range", line_number);
    require(kind == "shared" || kind == "chain",
            "unknown conn kind '" + kind + "'", line_number);
    conn.kind = kind == "shared" ? ConnectionKind::kShared
                                 : ConnectionKind::kChain;
    for (int a: conn.atoms)
      require(atom_ok(a), "conn atom index out of range", line_number);
    rg.connections.push_back(std::move(conn));
  }

  std::set<std::pair<int, int>> membership;
  for (int r = 0; r < nr; ++r) {
    for (int a: rg.rings[r].atoms)
      membership.emplace(r, a);
  }
  const auto inter =
      field<std::vector<std::pair<int, int>>>(j, "inter", line_number);
  require(inter.size() == membership.size(),
          "inter edges do not cover ring membership", line_number);
  std::set<std::pair<int, int>> seen;
  for (const auto &e: inter) {
    require(membership.contains(e), "inter edge outside ring membership",
            line_number);
    require(seen.insert(e).second, "duplicate inter edge", line_number);
  }
  h.inter_edges = inter;

  rg.has_virtual = j.contains("virtual")
                   && field<int>(j, "virtual", line_number) != 0;
  h.targets = field<std::vector<double>>(j, "y", line_number);
  return h;
}

}  // namespace ringkit
