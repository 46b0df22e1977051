#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mersar/error.hpp"
#include "mersar/pmf.hpp"

namespace mersar {

using NodeAddress = std::uint32_t;

/// One branch slot of a tree-memory node. When `stop` is set the payload is
/// the output code, otherwise it is the address of the next node.
struct SubNode {
  bool stop = true;
  std::uint32_t payload = 0;

  static constexpr SubNode leaf(Code code) { return {true, code}; }
  static constexpr SubNode node(NodeAddress address) { return {false, address}; }

  friend constexpr bool operator==(const SubNode&, const SubNode&) = default;
};

/// Tree-memory record: a threshold and the two successors. The true branch
/// (x below the reference) narrows to [lb, threshold), the false branch to
/// [threshold, ub).
struct TreeNode {
  Code threshold = 0;
  SubNode branch_true;
  SubNode branch_false;

  friend constexpr bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Full binary comparison tree over 2^bits codes stored as 2^bits - 1 nodes.
/// The root lives at address 0.
struct DecisionTree {
  static constexpr NodeAddress kRoot = 0;

  int bits = 0;
  std::vector<TreeNode> nodes;

  std::size_t code_count() const { return std::size_t{1} << bits; }
  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

// --- validation ------------------------------------------------------------

enum class TreeViolation {
  None,
  BadBits,
  WrongNodeCount,
  BadAddress,
  Cycle,
  SharedNode,
  UnreachableNode,
  CodeOutOfRange,
  DuplicateLeaf,
  MissingLeaf,
  ThresholdOutsideInterval,
  LeafMismatch,
};

inline const char* to_string(TreeViolation v) {
  switch (v) {
    case TreeViolation::None: return "none";
    case TreeViolation::BadBits: return "bad-bits";
    case TreeViolation::WrongNodeCount: return "wrong-node-count";
    case TreeViolation::BadAddress: return "bad-address";
    case TreeViolation::Cycle: return "cycle";
    case TreeViolation::SharedNode: return "shared-node";
    case TreeViolation::UnreachableNode: return "unreachable-node";
    case TreeViolation::CodeOutOfRange: return "code-out-of-range";
    case TreeViolation::DuplicateLeaf: return "duplicate-leaf";
    case TreeViolation::MissingLeaf: return "missing-leaf";
    case TreeViolation::ThresholdOutsideInterval: return "threshold-outside-interval";
    case TreeViolation::LeafMismatch: return "leaf-mismatch";
  }
  return "unknown";
}

/// First invariant violation found, or success.
struct TreeValidation {
  TreeViolation violation = TreeViolation::None;
  std::string message;
  std::optional<NodeAddress> node;

  bool ok() const { return violation == TreeViolation::None; }
};

namespace detail {

inline TreeValidation violation(TreeViolation v, std::string msg,
                                std::optional<NodeAddress> node = std::nullopt) {
  return {v, std::move(msg), node};
}

// Structural pass: the node graph must be a tree rooted at 0 and the stop
// slots must carry every code exactly once.
inline TreeValidation check_structure(const DecisionTree& tree) {
  const std::size_t n = tree.nodes.size();
  enum class Mark : std::uint8_t { Unseen, OnPath, Done };
  std::vector<Mark> mark(n, Mark::Unseen);
  std::vector<std::uint8_t> leaf_seen(tree.code_count(), 0);

  struct Frame {
    NodeAddress node;
    int next_branch;
  };

  auto walk_from = [&](NodeAddress start, bool collect_leaves) -> TreeValidation {
    std::vector<Frame> stack{{start, 0}};
    mark[start] = Mark::OnPath;
    while (!stack.empty()) {
      Frame& top = stack.back();
      if (top.next_branch == 2) {
        mark[top.node] = Mark::Done;
        stack.pop_back();
        continue;
      }
      const TreeNode& node = tree.nodes[top.node];
      const SubNode sub = top.next_branch == 0 ? node.branch_true : node.branch_false;
      const NodeAddress here = top.node;
      ++top.next_branch;
      if (sub.stop) {
        if (!collect_leaves) continue;
        if (sub.payload >= tree.code_count()) {
          return violation(TreeViolation::CodeOutOfRange,
                           "stop code " + std::to_string(sub.payload) + " out of range", here);
        }
        if (leaf_seen[sub.payload]++) {
          return violation(TreeViolation::DuplicateLeaf,
                           "code " + std::to_string(sub.payload) + " appears on more than one leaf",
                           here);
        }
        continue;
      }
      if (sub.payload >= n) {
        return violation(TreeViolation::BadAddress,
                         "node address " + std::to_string(sub.payload) + " out of range", here);
      }
      switch (mark[sub.payload]) {
        case Mark::OnPath:
          return violation(TreeViolation::Cycle,
                           "reference to node " + std::to_string(sub.payload) + " closes a cycle",
                           here);
        case Mark::Done:
          return violation(TreeViolation::SharedNode,
                           "node " + std::to_string(sub.payload) + " is referenced twice", here);
        case Mark::Unseen:
          mark[sub.payload] = Mark::OnPath;
          stack.push_back({sub.payload, 0});
          break;
      }
    }
    return {};
  };

  if (auto r = walk_from(DecisionTree::kRoot, true); !r.ok()) return r;

  for (NodeAddress a = 0; a < n; ++a) {
    if (mark[a] != Mark::Unseen) continue;
    // Unreachable nodes either form a detached cycle or are orphans.
    if (auto r = walk_from(a, false); !r.ok()) {
      if (r.violation == TreeViolation::Cycle || r.violation == TreeViolation::BadAddress) return r;
    }
    return violation(TreeViolation::UnreachableNode,
                     "node " + std::to_string(a) + " is not reachable from the root", a);
  }

  for (std::size_t c = 0; c < leaf_seen.size(); ++c) {
    if (!leaf_seen[c]) {
      return violation(TreeViolation::MissingLeaf, "code " + std::to_string(c) + " has no leaf");
    }
  }
  return {};
}

// Semantic pass on a structurally sound tree: thresholds split their
// governing intervals and every leaf sits on a size-1 interval holding its code.
inline TreeValidation check_intervals(const DecisionTree& tree) {
  struct Item {
    NodeAddress node;
    Interval iv;
  };
  std::vector<Item> stack{{DecisionTree::kRoot, {0, static_cast<Code>(tree.code_count())}}};
  while (!stack.empty()) {
    const Item item = stack.back();
    stack.pop_back();
    const TreeNode& node = tree.nodes[item.node];
    if (!(item.iv.lb < node.threshold && node.threshold < item.iv.ub)) {
      return violation(TreeViolation::ThresholdOutsideInterval,
                       "threshold " + std::to_string(node.threshold) + " not inside [" +
                           std::to_string(item.iv.lb) + "," + std::to_string(item.iv.ub) + ")",
                       item.node);
    }
    const Interval below{item.iv.lb, node.threshold};
    const Interval above{node.threshold, item.iv.ub};
    for (const auto& [sub, iv] : {std::pair{node.branch_true, below}, std::pair{node.branch_false, above}}) {
      if (sub.stop) {
        if (iv.size() != 1 || iv.lb != sub.payload) {
          return violation(TreeViolation::LeafMismatch,
                           "leaf code " + std::to_string(sub.payload) + " does not match interval [" +
                               std::to_string(iv.lb) + "," + std::to_string(iv.ub) + ")",
                           item.node);
        }
      } else {
        stack.push_back({sub.payload, iv});
      }
    }
  }
  return {};
}

}  // namespace detail

inline TreeValidation validate_tree(const DecisionTree& tree) {
  if (tree.bits < 1 || tree.bits > kMaxBits) {
    return detail::violation(TreeViolation::BadBits, "bits " + std::to_string(tree.bits) +
                                                         " outside [1," +
                                                         std::to_string(kMaxBits) + "]");
  }
  const std::size_t expected = tree.code_count() - 1;
  if (tree.nodes.size() != expected) {
    return detail::violation(TreeViolation::WrongNodeCount,
                             "tree has " + std::to_string(tree.nodes.size()) +
                                 " nodes, expected " + std::to_string(expected));
  }
  if (auto r = detail::check_structure(tree); !r.ok()) return r;
  return detail::check_intervals(tree);
}

inline void require_valid(const DecisionTree& tree) {
  if (auto r = validate_tree(tree); !r.ok()) {
    throw Error(ErrorKind::InvalidTree, std::string(to_string(r.violation)) + ": " + r.message);
  }
}

// --- depth statistics --------------------------------------------------------

/// Number of comparisons on the root-to-leaf path of every code.
inline std::vector<int> tree_depths(const DecisionTree& tree) {
  require_valid(tree);
  std::vector<int> depth(tree.code_count(), 0);
  struct Item {
    NodeAddress node;
    int depth;
  };
  std::vector<Item> stack{{DecisionTree::kRoot, 1}};
  while (!stack.empty()) {
    const Item item = stack.back();
    stack.pop_back();
    for (const SubNode& sub : {tree.nodes[item.node].branch_true, tree.nodes[item.node].branch_false}) {
      if (sub.stop) {
        depth[sub.payload] = item.depth;
      } else {
        stack.push_back({sub.payload, item.depth + 1});
      }
    }
  }
  return depth;
}

/// Kraft equality sum 2^-d == 1, checked with integer carries from the
/// deepest level upwards so arbitrarily deep trees cannot overflow.
inline bool kraft_equality(std::span<const int> depths) {
  if (depths.empty()) return false;
  std::map<int, std::uint64_t> per_level;
  for (int d : depths) {
    if (d < 0) return false;
    ++per_level[d];
  }
  std::uint64_t carry = 0;
  int level = per_level.rbegin()->first;
  auto it = per_level.rbegin();
  while (level > 0) {
    if (it != per_level.rend() && it->first == level) {
      carry += it->second;
      ++it;
    }
    if (carry % 2 != 0) return false;
    carry /= 2;
    --level;
  }
  const std::uint64_t at_root = carry + ((it != per_level.rend() && it->first == 0) ? it->second : 0);
  return at_root == 1;
}

/// Average number of comparison cycles, sum_n p_n * depth(n).
inline double expected_length(const DecisionTree& tree, const Pmf& pmf) {
  if (tree.bits != pmf.bits()) {
    throw Error(ErrorKind::BitsMismatch, "tree has " + std::to_string(tree.bits) +
                                             " bits, pmf has " + std::to_string(pmf.bits()));
  }
  const std::vector<int> depth = tree_depths(tree);
  // Group masses by depth so fixed-depth trees reproduce integer lengths.
  std::map<int, std::vector<double>> by_depth;
  for (std::size_t c = 0; c < depth.size(); ++c) by_depth[depth[c]].push_back(pmf.probs()[c]);
  std::vector<double> terms;
  terms.reserve(by_depth.size());
  for (const auto& [d, masses] : by_depth) terms.push_back(d * detail::compensated_sum(masses));
  return detail::compensated_sum(terms);
}

// --- text dump ---------------------------------------------------------------

namespace detail {

inline std::string format_subnode(const SubNode& s) {
  return (s.stop ? "stop:" : "node:") + std::to_string(s.payload);
}

inline SubNode parse_subnode(const std::string& token, std::size_t line_no) {
  const auto colon = token.find(':');
  const std::string tag = token.substr(0, colon);
  if (colon == std::string::npos || (tag != "stop" && tag != "node")) {
    throw Error(ErrorKind::ParseError,
                "line " + std::to_string(line_no) + ": bad branch '" + token + "'");
  }
  const std::string digits = token.substr(colon + 1);
  if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) {
    throw Error(ErrorKind::ParseError,
                "line " + std::to_string(line_no) + ": bad branch payload '" + token + "'");
  }
  const auto value = static_cast<std::uint32_t>(std::stoul(digits));
  return tag == "stop" ? SubNode::leaf(value) : SubNode::node(value);
}

}  // namespace detail

/// Writes the tree dump format:
///
///     tree bits=2 builder=mer nodes=3
///     0 3 node:1 stop:3
///
/// One record per node: address, threshold, true branch, false branch.
inline void write_tree(std::ostream& out, const DecisionTree& tree, const std::string& builder) {
  out << "tree bits=" << tree.bits << " builder=" << builder << " nodes=" << tree.nodes.size()
      << '\n';
  for (std::size_t a = 0; a < tree.nodes.size(); ++a) {
    const TreeNode& n = tree.nodes[a];
    out << a << ' ' << n.threshold << ' ' << detail::format_subnode(n.branch_true) << ' '
        << detail::format_subnode(n.branch_false) << '\n';
  }
}

inline std::string tree_to_string(const DecisionTree& tree, const std::string& builder) {
  std::ostringstream out;
  write_tree(out, tree, builder);
  return out.str();
}

struct ParsedTree {
  DecisionTree tree;
  std::string builder;
};

/// Reads one tree in the dump format. The result is not validated.
inline ParsedTree read_tree(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string::npos) break;
  }
  std::istringstream header(line);
  std::string word, bits_kv, builder_kv, nodes_kv;
  header >> word >> bits_kv >> builder_kv >> nodes_kv;
  if (word != "tree" || bits_kv.rfind("bits=", 0) != 0 || builder_kv.rfind("builder=", 0) != 0 ||
      nodes_kv.rfind("nodes=", 0) != 0) {
    throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": bad tree header");
  }
  ParsedTree out;
  std::size_t count = 0;
  try {
    out.tree.bits = std::stoi(bits_kv.substr(5));
    count = std::stoul(nodes_kv.substr(6));
  } catch (const std::exception&) {
    throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": bad tree header");
  }
  out.builder = builder_kv.substr(8);
  out.tree.nodes.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) {
      throw Error(ErrorKind::ParseError, "truncated tree: expected " + std::to_string(count) +
                                             " node records");
    }
    ++line_no;
    std::istringstream rec(line);
    std::size_t address = 0;
    Code threshold = 0;
    std::string t, f, extra;
    if (!(rec >> address >> threshold >> t >> f) || (rec >> extra) || address != i) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": bad node record");
    }
    out.tree.nodes[i] = {threshold, detail::parse_subnode(t, line_no), detail::parse_subnode(f, line_no)};
  }
  return out;
}

}  // namespace mersar
