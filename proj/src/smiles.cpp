//
// Project ringkit - Copyright 2026 ringkit authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "ringkit/smiles.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <map>
#include <utility>

#include "ringkit/error.h"

namespace ringkit {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
  case ErrorCode::kEmptyInput:
    return "EmptyInput";
  case ErrorCode::kNonAscii:
    return "NonAscii";
  case ErrorCode::kSyntax:
    return "SyntaxError";
  case ErrorCode::kUnclosedRing:
    return "UnclosedRing";
  case ErrorCode::kUnclosedBranch:
    return "UnclosedBranch";
  case ErrorCode::kUnknownElement:
    return "UnknownElement";
  case ErrorCode::kValenceError:
    return "ValenceError";
  case ErrorCode::kDisconnectedInput:
    return "DisconnectedInput";
  case ErrorCode::kNonRingAromatic:
    return "NonRingAromatic";
  case ErrorCode::kRingLimitExceeded:
    return "RingLimitExceeded";
  case ErrorCode::kEmptyCorpus:
    return "EmptyCorpus";
  case ErrorCode::kSchemaError:
    return "SchemaError";
  case ErrorCode::kShapeMismatch:
    return "ShapeMismatch";
  case ErrorCode::kNotScalar:
    return "NotScalar";
  case ErrorCode::kDetachedTensor:
    return "DetachedTensor";
  case ErrorCode::kOutOfRange:
    return "OutOfRange";
  case ErrorCode::kNonFiniteTarget:
    return "NonFiniteTarget";
  case ErrorCode::kVocabMismatch:
    return "VocabMismatch";
  case ErrorCode::kMissingColumn:
    return "MissingColumn";
  case ErrorCode::kEmptyDataset:
    return "EmptyDataset";
  case ErrorCode::kIndexOutOfRange:
    return "IndexOutOfRange";
  case ErrorCode::kOverlappingSplits:
    return "OverlappingSplits";
  case ErrorCode::kInvalidConfig:
    return "InvalidConfig";
  case ErrorCode::kIo:
    return "IoError";
  }
  return "Unknown";
}

std::string_view bond_order_name(BondOrder order) {
  switch (order) {
  case BondOrder::kSingle:
    return "single";
  case BondOrder::kDouble:
    return "double";
  case BondOrder::kTriple:
    return "triple";
  case BondOrder::kAromatic:
    return "aromatic";
  }
  return "single";
}

std::optional<BondOrder> parse_bond_order_name(std::string_view name) {
  if (name == "single")
    return BondOrder::kSingle;
  if (name == "double")
    return BondOrder::kDouble;
  if (name == "triple")
    return BondOrder::kTriple;
  if (name == "aromatic")
    return BondOrder::kAromatic;
  return std::nullopt;
}

char bond_symbol(BondOrder order) {
  switch (order) {
  case BondOrder::kSingle:
    return '-';
  case BondOrder::kDouble:
    return '=';
  case BondOrder::kTriple:
    return '#';
  case BondOrder::kAromatic:
    return ':';
  }
  return '-';
}

std::string Atom::token() const {
  if (!aromatic)
    return element;
  std::string out = element;
  for (char &c: out)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

int AtomGraph::find_bond(int a, int b) const {
  if (a < 0 || a >= num_atoms())
    return -1;
  for (int bi: adjacency[a]) {
    if (bonds[bi].other(a) == b)
      return bi;
  }
  return -1;
}

int AtomGraph::add_bond(int a, int b, BondOrder order) {
  if (a == b || find_bond(a, b) >= 0)
    return -1;
  const int id = num_bonds();
  bonds.push_back({ a, b, order, false });
  adjacency[a].push_back(id);
  adjacency[b].push_back(id);
  ++atoms[a].degree;
  ++atoms[b].degree;
  return id;
}

std::vector<std::vector<int>> AtomGraph::neighbor_lists() const {
  std::vector<std::vector<int>> out(atoms.size());
  for (int i = 0; i < num_atoms(); ++i) {
    out[i].reserve(adjacency[i].size());
    for (int bi: adjacency[i])
      out[i].push_back(bonds[bi].other(i));
  }
  return out;
}

bool AtomGraph::structurally_equal(const AtomGraph &other) const {
  return atoms == other.atoms && bonds == other.bonds
         && adjacency == other.adjacency
         && source_smiles == other.source_smiles;
}

namespace {
  constexpr std::array<std::string_view, 16> kSupported {
    "H", "B", "C", "N", "O", "F", "Si", "P",
    "S", "Cl", "Se", "Ge", "Br", "Sn", "Te", "I",
  };

  // clang-format off
  constexpr std::array<std::string_view, 118> kPeriodicTable {
    "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg",
    "Al", "Si", "P",  "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr",
    "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr",
    "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd",
    "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
    "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf",
    "Ta", "W",  "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po",
    "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U",  "Np", "Pu", "Am", "Cm",
    "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs",
    "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og",
  };
  // clang-format on

  bool is_element(std::string_view s) {
    return std::find(kPeriodicTable.begin(), kPeriodicTable.end(), s)
           != kPeriodicTable.end();
  }

  // Ascending allowed valences for organic-subset hydrogen filling.
  std::span<const int> default_valences(std::string_view el) {
    static constexpr int kOne[] = { 1 }, kTwo[] = { 2 }, kThree[] = { 3 },
                         kFour[] = { 4 }, kThreeFive[] = { 3, 5 },
                         kTwoFourSix[] = { 2, 4, 6 };
    if (el == "B")
      return kThree;
    if (el == "C" || el == "Si" || el == "Ge" || el == "Sn")
      return kFour;
    if (el == "N" || el == "P")
      return kThreeFive;
    if (el == "O" || el == "Te")
      return kTwo;
    if (el == "S" || el == "Se")
      return kTwoFourSix;
    if (el == "F" || el == "Cl" || el == "Br" || el == "I")
      return kOne;
    return {};
  }

  struct PendingBond {
    std::optional<BondOrder> order;
    std::size_t position = 0;
  };

  struct RingOpening {
    int atom;
    std::optional<BondOrder> order;
    std::size_t position;
  };

  class SmilesParser {
  public:
    explicit SmilesParser(std::string_view text): text_(text) { }

    AtomGraph parse();

  private:
    [[noreturn]] void fail(ErrorCode code, const std::string &what,
                           std::size_t pos) const {
      throw SmilesError(code, what, pos);
    }

    void add_atom(Atom atom, bool bracket, std::size_t pos);
    void parse_organic();
    void parse_bracket();
    void parse_ring_closure();
    void connect(int a, int b, std::optional<BondOrder> order,
                 std::size_t pos);
    void finalize();

    std::string_view text_;
    std::size_t pos_ = 0;
    AtomGraph g_;
    std::vector<char> bracket_;
    // Bonds whose order was inferred (no explicit symbol) between two
    // aromatic atoms; demoted to single when they turn out acyclic.
    std::vector<char> implicit_aromatic_;
    int prev_ = -1;
    std::optional<BondOrder> pending_;
    std::size_t pending_pos_ = 0;
    std::vector<std::pair<int, std::size_t>> branches_;
    std::map<int, RingOpening> open_rings_;
  };

  AtomGraph SmilesParser::parse() {
    if (text_.empty())
      fail(ErrorCode::kEmptyInput, "empty SMILES", 0);
    for (std::size_t i = 0; i < text_.size(); ++i) {
      if (static_cast<unsigned char>(text_[i]) > 127)
        fail(ErrorCode::kNonAscii, "non-ASCII byte", i);
    }
    g_.source_smiles = std::string(text_);

    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      switch (c) {
      case '(':
        if (prev_ < 0)
          fail(ErrorCode::kSyntax, "branch without preceding atom", pos_);
        if (pending_)
          fail(ErrorCode::kSyntax, "bond symbol before branch", pos_);
        branches_.emplace_back(prev_, pos_);
        ++pos_;
        break;
      case ')':
        if (branches_.empty())
          fail(ErrorCode::kSyntax, "unmatched ')'", pos_);
        if (pending_)
          fail(ErrorCode::kSyntax, "dangling bond symbol", pending_pos_);
        prev_ = branches_.back().first;
        branches_.pop_back();
        ++pos_;
        break;
      case '-':
      case '=':
      case '#':
      case ':':
      case '/':
      case '\\': {
        if (pending_)
          fail(ErrorCode::kSyntax, "consecutive bond symbols", pos_);
        if (prev_ < 0)
          fail(ErrorCode::kSyntax, "bond without preceding atom", pos_);
        BondOrder order = BondOrder::kSingle;
        if (c == '=')
          order = BondOrder::kDouble;
        else if (c == '#')
          order = BondOrder::kTriple;
        else if (c == ':')
          order = BondOrder::kAromatic;
        else if (c == '/' || c == '\\')
          g_.stereo_ignored = true;
        pending_ = order;
        pending_pos_ = pos_;
        ++pos_;
        break;
      }
      case '.':
        fail(ErrorCode::kDisconnectedInput, "'.' separated components", pos_);
      case '[':
        parse_bracket();
        break;
      case '%':
      case '0':
      case '1':
      case '2':
      case '3':
      case '4':
      case '5':
      case '6':
      case '7':
      case '8':
      case '9':
        parse_ring_closure();
        break;
      case '$':
        fail(ErrorCode::kSyntax, "quadruple bonds are not supported", pos_);
      default:
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '*') {
          parse_organic();
          break;
        }
        fail(ErrorCode::kSyntax, std::string("unexpected character '") + c
                                     + "'",
             pos_);
      }
    }

    if (!branches_.empty())
      fail(ErrorCode::kUnclosedBranch, "unclosed '('", branches_.back().second);
    if (!open_rings_.empty()) {
      const auto &[num, ring] = *open_rings_.begin();
      fail(ErrorCode::kUnclosedRing,
           "ring closure " + std::to_string(num) + " never closed",
           ring.position);
    }
    if (pending_)
      fail(ErrorCode::kSyntax, "dangling bond symbol", pending_pos_);

    finalize();
    return std::move(g_);
  }

  void SmilesParser::add_atom(Atom atom, bool bracket, std::size_t pos) {
    const int id = g_.num_atoms();
    g_.atoms.push_back(std::move(atom));
    g_.adjacency.emplace_back();
    bracket_.push_back(bracket ? 1 : 0);
    if (prev_ >= 0)
      connect(prev_, id, pending_, pending_ ? pending_pos_ : pos);
    else if (id > 0)
      fail(ErrorCode::kSyntax, "atom without connection", pos);
    pending_.reset();
    prev_ = id;
  }

  void SmilesParser::connect(int a, int b, std::optional<BondOrder> order,
                             std::size_t pos) {
    bool inferred = false;
    if (!order) {
      const bool both_aromatic = g_.atoms[a].aromatic && g_.atoms[b].aromatic;
      order = both_aromatic ? BondOrder::kAromatic : BondOrder::kSingle;
      inferred = both_aromatic;
    }
    if (a == b)
      fail(ErrorCode::kSyntax, "atom bonded to itself", pos);
    if (g_.add_bond(a, b, *order) < 0)
      fail(ErrorCode::kSyntax, "duplicate bond", pos);
    implicit_aromatic_.push_back(inferred ? 1 : 0);
  }

  void SmilesParser::parse_organic() {
    const std::size_t start = pos_;
    const char c = text_[pos_];
    if (c == '*')
      fail(ErrorCode::kUnknownElement, "wildcard atoms are not supported",
           start);

    Atom atom;
    if (pos_ + 1 < text_.size()) {
      const std::string_view two = text_.substr(pos_, 2);
      if (two == "Cl" || two == "Br") {
        atom.element = std::string(two);
        pos_ += 2;
        add_atom(std::move(atom), false, start);
        return;
      }
    }

    switch (c) {
    case 'B':
    case 'C':
    case 'N':
    case 'O':
    case 'P':
    case 'S':
    case 'F':
    case 'I':
      atom.element = std::string(1, c);
      break;
    case 'b':
    case 'c':
    case 'n':
    case 'o':
    case 'p':
    case 's':
      atom.element = std::string(
          1, static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
      atom.aromatic = true;
      break;
    default:
      fail(ErrorCode::kUnknownElement,
           std::string("'") + c + "' is not an organic-subset element", start);
    }
    ++pos_;
    add_atom(std::move(atom), false, start);
  }

  void SmilesParser::parse_bracket() {
    const std::size_t start = pos_;
    const std::size_t close = text_.find(']', pos_);
    if (close == std::string_view::npos)
      fail(ErrorCode::kSyntax, "unterminated bracket atom", start);
    std::size_t i = pos_ + 1;
    auto peek = [&]() -> char { return i < close ? text_[i] : '\0'; };
    auto digit = [](char ch) {
      return std::isdigit(static_cast<unsigned char>(ch)) != 0;
    };

    // Isotope is accepted and dropped.
    while (digit(peek()))
      ++i;

    Atom atom;
    const char first = peek();
    if (first == '\0')
      fail(ErrorCode::kSyntax, "empty bracket atom", start);
    if (first == '*')
      fail(ErrorCode::kUnknownElement, "wildcard atoms are not supported", i);
    if (std::islower(static_cast<unsigned char>(first))) {
      // Aromatic: two-letter forms first.
      const std::string_view rest = text_.substr(i, close - i);
      if (rest.starts_with("se") || rest.starts_with("te")
          || rest.starts_with("as")) {
        atom.element = std::string(1, static_cast<char>(std::toupper(first)))
                       + text_[i + 1];
        i += 2;
      } else if (first == 'b' || first == 'c' || first == 'n' || first == 'o'
                 || first == 'p' || first == 's') {
        atom.element = std::string(1, static_cast<char>(std::toupper(first)));
        i += 1;
      } else {
        fail(ErrorCode::kUnknownElement,
             std::string("unknown aromatic symbol '") + first + "'", i);
      }
      atom.aromatic = true;
    } else if (std::isupper(static_cast<unsigned char>(first))) {
      const char second = i + 1 < close ? text_[i + 1] : '\0';
      if (std::islower(static_cast<unsigned char>(second))
          && is_element(text_.substr(i, 2))) {
        atom.element = std::string(text_.substr(i, 2));
        i += 2;
      } else if (is_element(text_.substr(i, 1))) {
        atom.element = std::string(text_.substr(i, 1));
        i += 1;
      } else {
        fail(ErrorCode::kUnknownElement,
             "unknown element in '"
                 + std::string(text_.substr(start, close - start + 1)) + "'",
             i);
      }
    } else {
      fail(ErrorCode::kSyntax, "malformed bracket atom", i);
    }

    if (peek() == '@') {
      g_.stereo_ignored = true;
      while (peek() == '@')
        ++i;
      // Extended chirality classes such as @TH1 or @OH12.
      while (std::isupper(static_cast<unsigned char>(peek())) && peek() != 'H')
        ++i;
      while (digit(peek()))
        ++i;
    }

    if (peek() == 'H') {
      ++i;
      int count = 1;
      if (digit(peek())) {
        count = 0;
        while (digit(peek()))
          count = count * 10 + (text_[i++] - '0');
      }
      atom.explicit_h = count;
    }

    if (peek() == '+' || peek() == '-') {
      const char sign = peek();
      ++i;
      int magnitude = 1;
      if (digit(peek())) {
        magnitude = 0;
        while (digit(peek()))
          magnitude = magnitude * 10 + (text_[i++] - '0');
      } else {
        while (peek() == sign) {
          ++magnitude;
          ++i;
        }
      }
      atom.formal_charge = sign == '+' ? magnitude : -magnitude;
      if (atom.formal_charge < -4 || atom.formal_charge > 4)
        fail(ErrorCode::kSyntax, "formal charge outside [-4, 4]", i);
    }

    if (peek() == ':') {
      ++i;
      while (digit(peek()))
        ++i;
    }

    if (i != close)
      fail(ErrorCode::kSyntax,
           "unexpected '" + std::string(1, text_[i]) + "' in bracket atom", i);

    pos_ = close + 1;
    add_atom(std::move(atom), true, start);
  }

  void SmilesParser::parse_ring_closure() {
    const std::size_t start = pos_;
    if (prev_ < 0)
      fail(ErrorCode::kSyntax, "ring closure without preceding atom", start);
    int num = 0;
    if (text_[pos_] == '%') {
      if (pos_ + 2 >= text_.size() || !std::isdigit(text_[pos_ + 1])
          || !std::isdigit(text_[pos_ + 2]))
        fail(ErrorCode::kSyntax, "'%' must be followed by two digits", start);
      num = (text_[pos_ + 1] - '0') * 10 + (text_[pos_ + 2] - '0');
      pos_ += 3;
    } else {
      num = text_[pos_] - '0';
      pos_ += 1;
    }

    auto it = open_rings_.find(num);
    if (it == open_rings_.end()) {
      open_rings_.emplace(num, RingOpening { prev_, pending_, start });
      pending_.reset();
      return;
    }

    const RingOpening opening = it->second;
    open_rings_.erase(it);
    std::optional<BondOrder> order = pending_;
    if (opening.order) {
      if (order && *order != *opening.order)
        fail(ErrorCode::kSyntax, "conflicting ring-closure bond symbols",
             start);
      order = opening.order;
    }
    connect(opening.atom, prev_, order, start);
    pending_.reset();
  }

  // Marks bonds that lie on at least one cycle (non-bridges).
  std::vector<char> cyclic_bonds(const AtomGraph &g) {
    const int n = g.num_atoms();
    std::vector<int> disc(n, -1), low(n, 0);
    std::vector<char> cyclic(g.bonds.size(), 1);
    int timer = 0;

    struct Frame {
      int atom;
      int via_bond;
      std::size_t next;
    };
    std::vector<Frame> stack;
    for (int root = 0; root < n; ++root) {
      if (disc[root] >= 0)
        continue;
      stack.push_back({ root, -1, 0 });
      disc[root] = low[root] = timer++;
      while (!stack.empty()) {
        Frame &f = stack.back();
        if (f.next < g.adjacency[f.atom].size()) {
          const int bi = g.adjacency[f.atom][f.next++];
          if (bi == f.via_bond)
            continue;
          const int nb = g.bonds[bi].other(f.atom);
          if (disc[nb] < 0) {
            disc[nb] = low[nb] = timer++;
            stack.push_back({ nb, bi, 0 });
          } else {
            low[f.atom] = std::min(low[f.atom], disc[nb]);
          }
          continue;
        }
        const Frame done = f;
        stack.pop_back();
        if (!stack.empty()) {
          const int parent = stack.back().atom;
          low[parent] = std::min(low[parent], low[done.atom]);
          if (low[done.atom] > disc[parent])
            cyclic[done.via_bond] = 0;
        }
      }
    }
    return cyclic;
  }

  void SmilesParser::finalize() {
    const std::vector<char> cyclic = cyclic_bonds(g_);

    for (int bi = 0; bi < g_.num_bonds(); ++bi) {
      Bond &b = g_.bonds[bi];
      if (b.order != BondOrder::kAromatic)
        continue;
      if (!cyclic[bi]) {
        // An aromatic bond can only exist inside a ring.
        b.order = BondOrder::kSingle;
        continue;
      }
      if (!implicit_aromatic_[bi]
          && !(g_.atoms[b.begin].aromatic && g_.atoms[b.end].aromatic))
        fail(ErrorCode::kSyntax, "aromatic bond between non-aromatic atoms",
             0);
    }

    std::vector<BondOrder> orders;
    for (int i = 0; i < g_.num_atoms(); ++i) {
      Atom &atom = g_.atoms[i];
      if (atom.aromatic) {
        const bool on_cycle =
            std::any_of(g_.adjacency[i].begin(), g_.adjacency[i].end(),
                        [&](int bi) { return cyclic[bi] != 0; });
        if (!on_cycle)
          throw SmilesError(ErrorCode::kNonRingAromatic,
                            "aromatic atom " + std::to_string(i)
                                + " is not in a ring",
                            0);
      }
      if (bracket_[i])
        continue;
      orders.clear();
      for (int bi: g_.adjacency[i])
        orders.push_back(g_.bonds[bi].order);
      try {
        atom.implicit_h = compute_implicit_hydrogens(atom, orders);
      } catch (const Error &e) {
        throw SmilesError(ErrorCode::kValenceError,
                          "atom " + std::to_string(i) + " (" + atom.element
                              + ") exceeds every allowed valence",
                          0);
      }
    }
  }
}  // namespace

std::span<const std::string_view> supported_elements() {
  return kSupported;
}

int element_slot(std::string_view symbol) {
  for (std::size_t i = 0; i < kSupported.size(); ++i) {
    if (kSupported[i] == symbol)
      return static_cast<int>(i);
  }
  return static_cast<int>(kSupported.size());
}

AtomGraph parse_smiles(std::string_view text) {
  return SmilesParser(text).parse();
}

int compute_implicit_hydrogens(const Atom &atom,
                               std::span<const BondOrder> incident_orders) {
  const std::span<const int> valences = default_valences(atom.element);
  if (valences.empty())
    return 0;

  double sum = 0;
  for (BondOrder o: incident_orders) {
    switch (o) {
    case BondOrder::kSingle:
      sum += 1;
      break;
    case BondOrder::kDouble:
      sum += 2;
      break;
    case BondOrder::kTriple:
      sum += 3;
      break;
    case BondOrder::kAromatic:
      sum += 1.5;
      break;
    }
  }
  const int used = static_cast<int>(std::floor(sum)) + atom.explicit_h;

  // Aromatic atoms fill only up to their lowest valence; the lone-pair
  // donors (pyrrole-type n, furan o, thiophene s) clamp to zero.
  if (atom.aromatic)
    return std::max(0, valences.front() - used);

  for (int v: valences) {
    if (v >= used)
      return v - used;
  }
  throw Error(ErrorCode::kValenceError,
              atom.element + " with bond-order sum " + std::to_string(used));
}

AtomFeatures featurize_atom_graph(const AtomGraph &g) {
  AtomFeatures out {
    FeatureMatrix(g.atoms.size(), kAtomFeatureDim),
    FeatureMatrix(g.bonds.size(), kBondFeatureDim),
  };

  for (std::size_t i = 0; i < g.atoms.size(); ++i) {
    const Atom &a = g.atoms[i];
    int col = 0;
    out.nodes.at(i, col + element_slot(a.element)) = 1;
    col += kNumElementSlots;
    out.nodes.at(i, col + std::min(a.degree, kNumDegreeSlots - 1)) = 1;
    col += kNumDegreeSlots;
    out.nodes.at(i, col + std::min(a.total_h(), kNumHydrogenSlots - 1)) = 1;
    col += kNumHydrogenSlots;
    const int charge =
        std::clamp(a.formal_charge, kMinChargeSlot,
                   kMinChargeSlot + kNumChargeSlots - 1);
    out.nodes.at(i, col + charge - kMinChargeSlot) = 1;
    col += kNumChargeSlots;
    out.nodes.at(i, col++) = a.aromatic ? 1 : 0;
    out.nodes.at(i, col++) = a.in_ring ? 1 : 0;
  }

  for (std::size_t i = 0; i < g.bonds.size(); ++i) {
    const Bond &b = g.bonds[i];
    out.edges.at(i, static_cast<int>(b.order)) = 1;
    out.edges.at(i, 4) = b.in_ring ? 1 : 0;
  }
  return out;
}

}  // namespace ringkit
