//
// Project ringkit - Copyright 2026 ringkit authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef RINGKIT_SMILES_H_
#define RINGKIT_SMILES_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ringkit {

enum class BondOrder : std::uint8_t {
  kSingle,
  kDouble,
  kTriple,
  kAromatic,
};

std::string_view bond_order_name(BondOrder order);
std::optional<BondOrder> parse_bond_order_name(std::string_view name);
/// SMILES bond symbol ("-", "=", "#", ":").
char bond_symbol(BondOrder order);

struct Atom {
  std::string element;
  bool aromatic = false;
  int formal_charge = 0;
  int explicit_h = 0;
  int implicit_h = 0;
  int degree = 0;
  bool in_ring = false;

  int total_h() const { return explicit_h + implicit_h; }

  /// Element symbol as it appears in ring signatures: lowercase when
  /// aromatic ("c", "se"), canonical capitalization otherwise.
  std::string token() const;

  bool operator==(const Atom &) const = default;
};

struct Bond {
  int begin = -1;
  int end = -1;
  BondOrder order = BondOrder::kSingle;
  bool in_ring = false;

  int other(int atom) const { return atom == begin ? end : begin; }

  bool operator==(const Bond &) const = default;
};

/// Undirected simple molecular graph. Atom order equals SMILES token order.
struct AtomGraph {
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;
  /// Per-atom incident bond indices, in bond creation order.
  std::vector<std::vector<int>> adjacency;
  std::string source_smiles;
  /// Set when stereo markers were present and dropped.
  bool stereo_ignored = false;

  int num_atoms() const { return static_cast<int>(atoms.size()); }
  int num_bonds() const { return static_cast<int>(bonds.size()); }

  /// Index of the bond joining a and b, or -1.
  int find_bond(int a, int b) const;

  /// Appends a bond and updates adjacency and degrees. Rejects self loops and
  /// duplicate edges by returning -1.
  int add_bond(int a, int b, BondOrder order);

  /// Per-atom neighbor lists (atom indices), ordered like `adjacency`.
  std::vector<std::vector<int>> neighbor_lists() const;

  /// Equality over atoms, bonds and source text; the stereo flag is a
  /// diagnostic and does not participate.
  bool structurally_equal(const AtomGraph &other) const;
};

/// Supported elements in feature-slot order. Bracket atoms outside this list
/// are accepted and mapped to the trailing "other" slot.
std::span<const std::string_view> supported_elements();
/// Feature slot of an element symbol; supported_elements().size() for
/// "other".
int element_slot(std::string_view symbol);

/// Parses a single-molecule SMILES string. Throws SmilesError.
AtomGraph parse_smiles(std::string_view text);

/// Implicit hydrogen count for an organic-subset atom given the orders of
/// its incident bonds. Aromatic bonds count 1.5 and the sum is floored.
/// Throws Error(kValenceError) when every allowed valence is exceeded.
int compute_implicit_hydrogens(const Atom &atom,
                               std::span<const BondOrder> incident_orders);

/// Dense row-major feature block.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, std::size_t c)
      : rows(r), cols(c), values(r * c, 0.0) { }

  double &at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

inline constexpr int kNumElementSlots = 17;
inline constexpr int kNumDegreeSlots = 7;
inline constexpr int kNumHydrogenSlots = 5;
inline constexpr int kNumChargeSlots = 6;
inline constexpr int kMinChargeSlot = -2;
inline constexpr int kAtomFeatureDim =
    kNumElementSlots + kNumDegreeSlots + kNumHydrogenSlots + kNumChargeSlots
    + 2;
inline constexpr int kBondFeatureDim = 5;

struct AtomFeatures {
  FeatureMatrix nodes;  // |V_A| x kAtomFeatureDim
  FeatureMatrix edges;  // |E_A| x kBondFeatureDim, one row per bond
};

/// One-hot atom/bond featurization. Expects ring flags to be set.
AtomFeatures featurize_atom_graph(const AtomGraph &g);

}  // namespace ringkit

#endif  // RINGKIT_SMILES_H_
