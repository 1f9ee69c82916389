//
// Project ringkit - Copyright 2026 ringkit authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef RINGKIT_RINGS_H_
#define RINGKIT_RINGS_H_

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ringkit/smiles.h"

namespace ringkit {

struct RingOptions {
  int max_ring_size = 24;
  int max_rings = 256;
  /// Longest ring-to-ring chain considered, in bonds.
  int chain_max = 8;
};

/// A smallest ring: an induced (chordless) simple cycle of the atom graph.
struct Ring {
  /// Cyclic order starting at the lowest atom index, walking towards the
  /// smaller of its two ring neighbors.
  std::vector<int> atoms;
  std::string signature;

  int size() const { return static_cast<int>(atoms.size()); }

  bool operator==(const Ring &) const = default;
};

enum class ConnectionKind {
  kShared,
  kChain,
};

std::string_view connection_kind_name(ConnectionKind kind);

struct RingConnection {
  int ring_a = -1;  // ring_a < ring_b
  int ring_b = -1;
  ConnectionKind kind = ConnectionKind::kShared;
  std::string signature;
  /// kShared: the shared atoms, ascending. kChain: the path from an atom of
  /// ring_a to an atom of ring_b, endpoints included.
  std::vector<int> atoms;

  bool operator==(const RingConnection &) const = default;
};

/// Reserved connection signature of virtual edges.
inline constexpr std::string_view kVirtualSignature = "V";

struct RingGraph {
  std::vector<Ring> rings;
  std::vector<RingConnection> connections;
  /// When set, node index rings.size() is the virtual molecule node joined
  /// to every ring.
  bool has_virtual = false;

  int num_rings() const { return static_cast<int>(rings.size()); }
  int num_nodes() const { return num_rings() + (has_virtual ? 1 : 0); }
  int virtual_index() const { return has_virtual ? num_rings() : -1; }

  /// Ring-graph degree counting real connections only.
  std::vector<int> real_degrees() const;

  bool operator==(const RingGraph &) const = default;
};

/// All induced simple cycles of length 3..max_size of an undirected simple
/// graph, each in canonical cyclic order, sorted. Throws RingLimitExceeded
/// when more than max_count cycles exist.
std::vector<std::vector<int>>
find_chordless_cycles(const std::vector<std::vector<int>> &neighbors,
                      int max_size, int max_count);

/// Rotates/reflects a cycle so it starts at its smallest vertex and
/// continues towards the smaller neighbor.
std::vector<int> canonical_cycle_order(std::span<const int> cycle);

/// Smallest rings of g; also rewrites the in_ring flags of atoms and bonds.
std::vector<Ring> find_smallest_rings(AtomGraph &g,
                                      const RingOptions &options = {});

/// size ":" + minimal dot-joined token string over all rotations and both
/// orientations, e.g. "5:c.c.c.c.s".
std::string ring_signature(std::span<const int> cycle, const AtomGraph &g);

std::vector<RingConnection>
find_ring_connections(const AtomGraph &g, const std::vector<Ring> &rings,
                      const RingOptions &options = {});

RingGraph build_ring_graph(AtomGraph &g, bool add_virtual,
                           const RingOptions &options = {});

}  // namespace ringkit

#endif  // RINGKIT_RINGS_H_
