//
// Project ringkit - Copyright 2026 ringkit authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef RINGKIT_HIERGRAPH_H_
#define RINGKIT_HIERGRAPH_H_

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ringkit/rings.h"
#include "ringkit/smiles.h"

namespace ringkit {

/// The three-level graph {G_A, G_R, G_I} of one molecule.
struct HierGraph {
  AtomGraph atom_graph;
  RingGraph ring_graph;
  /// (ring index, atom index), one entry per membership pair, ordered by
  /// ring then by the ring's cyclic atom order.
  std::vector<std::pair<int, int>> inter_edges;
  std::vector<double> targets;

  bool structurally_equal(const HierGraph &other) const;
};

HierGraph build_hier_graph(std::string_view smiles, bool add_virtual,
                           const RingOptions &options = {});
HierGraph build_hier_graph(AtomGraph atom_graph, bool add_virtual,
                           const RingOptions &options = {});

/// Signature counts over a corpus. Merging is commutative, so partial counts
/// from parallel workers can be reduced in any order.
struct SignatureCounts {
  std::map<std::string, long> rings;
  std::map<std::string, long> connections;

  void add(const HierGraph &h);
  void merge(const SignatureCounts &other);
  bool empty() const { return rings.empty() && connections.empty(); }
};

class Vocabulary {
public:
  static constexpr int kOov = 0;
  static constexpr int kVirtual = 1;
  static constexpr std::string_view kOovToken = "<oov>";

  Vocabulary();

  /// Signatures sorted by (frequency desc, signature asc) after the
  /// reserved slots. Throws EmptyCorpus when the corpus has no graphs.
  static Vocabulary build(std::span<const HierGraph> corpus);
  static Vocabulary from_counts(const SignatureCounts &counts);

  int ring_index(std::string_view signature) const;
  int connection_index(std::string_view signature) const;

  /// d_{V_R} and d_{E_R}.
  int ring_dim() const { return static_cast<int>(ring_types_.size()); }
  int connection_dim() const {
    return static_cast<int>(connection_types_.size());
  }

  const std::vector<std::string> &ring_types() const { return ring_types_; }
  const std::vector<std::string> &connection_types() const {
    return connection_types_;
  }

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json &j);

  bool operator==(const Vocabulary &) const = default;

private:
  std::vector<std::string> ring_types_;
  std::vector<std::string> connection_types_;
  std::map<std::string, int, std::less<>> ring_lookup_;
  std::map<std::string, int, std::less<>> connection_lookup_;
};

struct RingEncoding {
  /// |V_R| x d_{V_R}, one row per real ring.
  FeatureMatrix nodes;
  /// One row per undirected ring edge: real connections first, in order,
  /// then one virtual edge per ring when the graph has a virtual node.
  FeatureMatrix edges;
  /// Endpoints of each edge row; virtual edges use the virtual node index.
  std::vector<std::pair<int, int>> edge_endpoints;
  int oov_rings = 0;
};

RingEncoding encode_ring_attributes(const HierGraph &h, const Vocabulary &v);

/// One JSON object per line; no trailing newline.
std::string serialize(const HierGraph &h);
/// Throws SchemaError carrying line_number.
HierGraph deserialize(std::string_view line, std::size_t line_number = 1);

}  // namespace ringkit

#endif  // RINGKIT_HIERGRAPH_H_
