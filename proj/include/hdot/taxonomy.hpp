#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hdot/error.hpp"
#include "hdot/rng.hpp"

namespace hdot {

/// Rooted semantic tree over class names.
///
/// Levels are numbered from the root: level 1 holds the root's children and
/// level num_levels() is the deepest leaf level. A Taxonomy is immutable once
/// parsed, so concurrent queries are safe.
class Taxonomy {
 public:
  using NodeId = std::size_t;

  struct Edge {
    NodeId parent;
    NodeId child;
    std::size_t line;  // source line, 1-based; 0 when built programmatically
  };

  /// Parses the `parent<TAB>child` edge-list format. Blank lines and lines
  /// starting with '#' are skipped; the root is the only node that never
  /// appears as a child.
  static Taxonomy parse(std::string_view text);

  /// Builds a taxonomy from (parent, child) name pairs, validated exactly as
  /// parse() would validate the equivalent file.
  static Taxonomy from_edges(const std::vector<std::pair<std::string, std::string>>& edges);

  /// Edge list in input order, one `parent\tchild` per line.
  std::string serialize() const;

  std::size_t size() const noexcept { return names_.size(); }
  NodeId root() const noexcept { return root_; }
  const std::string& name(NodeId v) const { return names_.at(v); }
  std::optional<NodeId> find(std::string_view name) const;
  /// Throws InvalidArgument for an unknown name.
  NodeId id(std::string_view name) const;

  std::optional<NodeId> parent(NodeId v) const;
  const std::vector<NodeId>& children(NodeId v) const { return children_.at(v); }
  std::size_t depth(NodeId v) const { return depth_.at(v); }
  bool is_leaf(NodeId v) const { return children_.at(v).empty(); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  /// Leaves ordered lexicographically by name.
  const std::vector<NodeId>& leaves() const noexcept { return leaves_; }

  /// Maximum leaf depth, written |V| in level-weight formulas.
  std::size_t num_levels() const noexcept { return num_levels_; }

  /// Edges (parent, child) from the root down to v; length == depth(v).
  std::vector<std::pair<NodeId, NodeId>> root_path(NodeId v) const;

  /// Tree-induced error |L_a| + |L_b| - 2 |L_a n L_b| over root-path links.
  std::size_t tie_distance(NodeId a, NodeId b) const;
  std::size_t tie_distance(std::string_view a, std::string_view b) const {
    return tie_distance(id(a), id(b));
  }

  /// Ancestor of `leaf` at depth `level`. Leaves shallower than `level`
  /// represent themselves (self-padding).
  NodeId lift_to_level(NodeId leaf, std::size_t level) const;

  /// Order-independent hash of the edge set.
  std::uint64_t hash() const;

 private:
  static bool valid_name(std::string_view s);
  NodeId intern(const std::string& name);
  void finalize(std::size_t last_line);
  void check_node(NodeId v) const;

  std::vector<std::string> names_;
  std::unordered_map<std::string, NodeId> ids_;
  std::vector<std::optional<NodeId>> parent_;
  std::vector<std::size_t> parent_line_;
  std::vector<std::size_t> first_line_;
  std::vector<std::vector<NodeId>> children_;
  std::vector<std::size_t> depth_;
  std::vector<Edge> edges_;
  std::vector<NodeId> leaves_;
  NodeId root_ = 0;
  std::size_t num_levels_ = 0;
};

/// Class list of one level, ordered lexicographically by node name.
struct LevelIndex {
  std::size_t level = 0;
  std::vector<std::string> classes;
  std::vector<Taxonomy::NodeId> nodes;
  std::map<std::string, std::size_t, std::less<>> index;

  std::size_t size() const noexcept { return classes.size(); }

  std::size_t index_of(std::string_view name) const {
    auto it = index.find(name);
    if (it == index.end()) {
      throw InvalidArgument("class '" + std::string(name) + "' is not at level " +
                            std::to_string(level));
    }
    return it->second;
  }
};

/// Classes at level `level`: the distinct lifts of every leaf.
LevelIndex make_level_index(const Taxonomy& t, std::size_t level);

enum class WeightMode { eq3_magnitude, eq3_literal, uniform, leaf_only };

std::string_view to_string(WeightMode m);
WeightMode parse_weight_mode(std::string_view s);

/// Information-gain style level weight.
///   eq3_literal:   log(|V| - l) - log(|V|)
///   eq3_magnitude: log(|V|) - log(|V| - l)
///   uniform:       1
/// Eq3 modes require |V| - l >= 1.
double level_weight(std::size_t num_levels, std::size_t level, WeightMode mode);

inline double level_weight(const Taxonomy& t, std::size_t level, WeightMode mode) {
  return level_weight(t.num_levels(), level, mode);
}

/// Weights for levels 1..|V| used by the combined multi-level loss.
///
/// In eq3 modes the leaf level (l = |V|) has no leaf-count decrease left to
/// measure, so |V^l| is clamped at 1 there and it shares the weight of level
/// |V| - 1. A single-level tree has nothing to weigh and gets weight 1.
/// leaf_only puts weight 1 on the leaf level and 0 elsewhere.
std::vector<double> level_weights(std::size_t num_levels, WeightMode mode);

// ---------------------------------------------------------------------------

inline bool Taxonomy::valid_name(std::string_view s) {
  if (s.empty()) return false;
  return std::none_of(s.begin(), s.end(), [](unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
  });
}

inline Taxonomy::NodeId Taxonomy::intern(const std::string& name) {
  auto [it, inserted] = ids_.emplace(name, names_.size());
  if (inserted) {
    names_.push_back(name);
    parent_.emplace_back();
    parent_line_.push_back(0);
    first_line_.push_back(0);
    children_.emplace_back();
  }
  return it->second;
}

inline Taxonomy Taxonomy::parse(std::string_view text) {
  Taxonomy t;
  std::map<std::pair<NodeId, NodeId>, std::size_t> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos || line.find('\t', tab + 1) != std::string_view::npos) {
      throw ParseError(line_no, "expected exactly one tab between parent and child");
    }
    std::string parent_name(line.substr(0, tab));
    std::string child_name(line.substr(tab + 1));
    if (!valid_name(parent_name) || !valid_name(child_name)) {
      throw ParseError(line_no, "node names must be non-empty and contain no whitespace");
    }
    if (parent_name == child_name) {
      throw ParseError(line_no, "cycle: node " + child_name + " is its own parent");
    }
    NodeId p = t.intern(parent_name);
    NodeId c = t.intern(child_name);
    if (t.first_line_[p] == 0) t.first_line_[p] = line_no;
    if (t.first_line_[c] == 0) t.first_line_[c] = line_no;

    auto [it, inserted] = seen.emplace(std::make_pair(p, c), line_no);
    if (!inserted) {
      throw ParseError(line_no, "duplicate edge " + parent_name + " -> " + child_name +
                                    " (first on line " + std::to_string(it->second) + ")");
    }
    if (t.parent_[c]) {
      throw ParseError(line_no, "node " + child_name + " has two parents: " +
                                    t.names_[*t.parent_[c]] + " (line " +
                                    std::to_string(t.parent_line_[c]) + ") and " + parent_name);
    }
    t.parent_[c] = p;
    t.parent_line_[c] = line_no;
    t.children_[p].push_back(c);
    t.edges_.push_back({p, c, line_no});
  }
  t.finalize(line_no);
  return t;
}

inline Taxonomy Taxonomy::from_edges(
    const std::vector<std::pair<std::string, std::string>>& edges) {
  std::string text;
  for (const auto& [p, c] : edges) {
    text += p;
    text += '\t';
    text += c;
    text += '\n';
  }
  return parse(text);
}

inline void Taxonomy::finalize(std::size_t last_line) {
  if (edges_.empty()) {
    throw ParseError(std::max<std::size_t>(last_line, 1), "empty taxonomy: no edges");
  }
  std::vector<NodeId> roots;
  for (NodeId v = 0; v < names_.size(); ++v) {
    if (!parent_[v]) roots.push_back(v);
  }
  if (roots.size() > 1) {
    std::sort(roots.begin(), roots.end(),
              [&](NodeId a, NodeId b) { return first_line_[a] < first_line_[b]; });
    throw ParseError(first_line_[roots[1]], "multiple roots: " + names_[roots[0]] + " and " +
                                                names_[roots[1]]);
  }

  // Nodes unreachable from the unique root (or every node, when no root
  // exists) sit on a parent cycle.
  depth_.assign(names_.size(), 0);
  std::vector<bool> reached(names_.size(), false);
  if (!roots.empty()) {
    root_ = roots.front();
    std::queue<NodeId> q;
    q.push(root_);
    reached[root_] = true;
    while (!q.empty()) {
      NodeId v = q.front();
      q.pop();
      for (NodeId c : children_[v]) {
        depth_[c] = depth_[v] + 1;
        reached[c] = true;
        q.push(c);
      }
    }
  }
  auto unreached = std::find(reached.begin(), reached.end(), false);
  if (unreached != reached.end()) {
    NodeId v = static_cast<NodeId>(unreached - reached.begin());
    std::vector<bool> on_walk(names_.size(), false);
    while (!on_walk[v]) {
      on_walk[v] = true;
      v = *parent_[v];
    }
    throw ParseError(parent_line_[v], "cycle through node " + names_[v]);
  }

  for (NodeId v = 0; v < names_.size(); ++v) {
    if (children_[v].empty()) {
      leaves_.push_back(v);
      num_levels_ = std::max(num_levels_, depth_[v]);
    }
  }
  std::sort(leaves_.begin(), leaves_.end(),
            [&](NodeId a, NodeId b) { return names_[a] < names_[b]; });
}

inline std::string Taxonomy::serialize() const {
  std::string out;
  for (const auto& e : edges_) {
    out += names_[e.parent];
    out += '\t';
    out += names_[e.child];
    out += '\n';
  }
  return out;
}

inline std::optional<Taxonomy::NodeId> Taxonomy::find(std::string_view name) const {
  auto it = ids_.find(std::string(name));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

inline Taxonomy::NodeId Taxonomy::id(std::string_view name) const {
  auto v = find(name);
  if (!v) throw InvalidArgument("unknown node '" + std::string(name) + "'");
  return *v;
}

inline void Taxonomy::check_node(NodeId v) const {
  if (v >= names_.size()) throw InvalidArgument("unknown node id " + std::to_string(v));
}

inline std::optional<Taxonomy::NodeId> Taxonomy::parent(NodeId v) const {
  check_node(v);
  return parent_[v];
}

inline std::vector<std::pair<Taxonomy::NodeId, Taxonomy::NodeId>> Taxonomy::root_path(
    NodeId v) const {
  check_node(v);
  std::vector<std::pair<NodeId, NodeId>> path;
  path.reserve(depth_[v]);
  for (NodeId cur = v; parent_[cur]; cur = *parent_[cur]) path.emplace_back(*parent_[cur], cur);
  std::reverse(path.begin(), path.end());
  return path;
}

inline std::size_t Taxonomy::tie_distance(NodeId a, NodeId b) const {
  const auto la = root_path(a);
  const auto lb = root_path(b);
  // Root paths in a tree share exactly their common prefix.
  std::size_t common = 0;
  while (common < la.size() && common < lb.size() && la[common] == lb[common]) ++common;
  return la.size() + lb.size() - 2 * common;
}

inline Taxonomy::NodeId Taxonomy::lift_to_level(NodeId leaf, std::size_t level) const {
  check_node(leaf);
  if (!is_leaf(leaf)) throw InvalidArgument("node '" + names_[leaf] + "' is not a leaf");
  if (level < 1 || level > num_levels_) {
    throw InvalidArgument("level " + std::to_string(level) + " outside [1, " +
                          std::to_string(num_levels_) + "]");
  }
  NodeId v = leaf;
  while (depth_[v] > level) v = *parent_[v];
  return v;
}

inline std::uint64_t Taxonomy::hash() const {
  std::vector<std::string> lines;
  lines.reserve(edges_.size());
  for (const auto& e : edges_) lines.push_back(names_[e.parent] + '\t' + names_[e.child]);
  std::sort(lines.begin(), lines.end());
  std::uint64_t h = fnv1a("");
  for (const auto& l : lines) h = fnv1a(l + '\n', h);
  return h;
}

inline LevelIndex make_level_index(const Taxonomy& t, std::size_t level) {
  LevelIndex idx;
  idx.level = level;
  for (auto leaf : t.leaves()) {
    auto v = t.lift_to_level(leaf, level);
    idx.index.emplace(t.name(v), 0);
  }
  for (auto& [name, i] : idx.index) {
    i = idx.classes.size();
    idx.classes.push_back(name);
    idx.nodes.push_back(t.id(name));
  }
  return idx;
}

inline std::string_view to_string(WeightMode m) {
  switch (m) {
    case WeightMode::eq3_magnitude: return "eq3-magnitude";
    case WeightMode::eq3_literal: return "eq3-literal";
    case WeightMode::uniform: return "uniform";
    case WeightMode::leaf_only: return "leaf-only";
  }
  return "?";
}

inline WeightMode parse_weight_mode(std::string_view s) {
  if (s == "eq3-magnitude" || s == "info-gain") return WeightMode::eq3_magnitude;
  if (s == "eq3-literal") return WeightMode::eq3_literal;
  if (s == "uniform" || s == "equal") return WeightMode::uniform;
  if (s == "leaf-only") return WeightMode::leaf_only;
  throw InvalidArgument("unknown weight mode '" + std::string(s) + "'");
}

inline double level_weight(std::size_t num_levels, std::size_t level, WeightMode mode) {
  switch (mode) {
    case WeightMode::uniform:
      return 1.0;
    case WeightMode::leaf_only:
      return level == num_levels ? 1.0 : 0.0;
    case WeightMode::eq3_literal:
    case WeightMode::eq3_magnitude: {
      if (level < 1 || level >= num_levels) {
        throw InvalidArgument("eq3 weight needs |V| - l >= 1 (|V|=" + std::to_string(num_levels) +
                              ", l=" + std::to_string(level) + ")");
      }
      const double shrunk = std::log(static_cast<double>(num_levels - level));
      const double full = std::log(static_cast<double>(num_levels));
      return mode == WeightMode::eq3_literal ? shrunk - full : full - shrunk;
    }
  }
  return 0.0;
}

inline std::vector<double> level_weights(std::size_t num_levels, WeightMode mode) {
  std::vector<double> w(num_levels, 0.0);
  if (num_levels == 1 && mode != WeightMode::eq3_literal) return {1.0};
  if (num_levels == 1) return {-1.0};
  for (std::size_t l = 1; l <= num_levels; ++l) {
    if (mode == WeightMode::eq3_literal || mode == WeightMode::eq3_magnitude) {
      if (l < num_levels) {
        w[l - 1] = level_weight(num_levels, l, mode);
      } else {
        const double full = std::log(static_cast<double>(num_levels));
        w[l - 1] = mode == WeightMode::eq3_literal ? -full : full;
      }
    } else {
      w[l - 1] = level_weight(num_levels, l, mode);
    }
  }
  return w;
}

}  // namespace hdot
