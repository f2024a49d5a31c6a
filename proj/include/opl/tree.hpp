#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <span>
#include <string>
#include <vector>

#include "opl/errors.hpp"

namespace opl {

/// Axis-aligned binary decision tree mapping contexts to arm indices.
/// Internal nodes route left iff x[feature] <= threshold; leaves hold an arm.
/// Immutable after construction; composed bottom-up via leaf()/split().
class TreePolicy {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int action = 0;  // payload when leaf
    int left = -1;
    int right = -1;
  };

  TreePolicy() : nodes_(1, Node{}), root_(0) {}  // bare action-0 leaf

  static TreePolicy leaf(int action) {
    if (action < 0) throw ValidationError("leaf-action", "leaf action must be nonnegative");
    TreePolicy t;
    t.nodes_[0].action = action;
    return t;
  }

  static TreePolicy split(int feature, double threshold, const TreePolicy& left,
                          const TreePolicy& right) {
    if (feature < 0) throw ValidationError("split-feature", "split feature must be nonnegative");
    TreePolicy t;
    t.nodes_.reserve(left.nodes_.size() + right.nodes_.size() + 1);
    const int l = t.graft(left, left.root_);
    const int r = t.graft(right, right.root_);
    Node root;
    root.feature = feature;
    root.threshold = threshold;
    root.left = l;
    root.right = r;
    t.nodes_.push_back(root);
    t.root_ = static_cast<int>(t.nodes_.size()) - 1;
    return t;
  }

  /// Deterministic routing; boundary x[f] == threshold goes left.
  int predict(std::span<const double> x) const {
    if (max_feature() >= static_cast<int>(x.size()))
      throw ValidationError("dimension-mismatch", "context shorter than tree feature range");
    int i = root_;
    while (nodes_[i].feature >= 0) {
      const Node& n = nodes_[i];
      i = (x[static_cast<std::size_t>(n.feature)] <= n.threshold) ? n.left : n.right;
    }
    return nodes_[i].action;
  }

  int depth() const { return depth_below(root_); }

  /// Largest feature index referenced, or -1 for a bare leaf.
  int max_feature() const {
    int m = -1;
    for (const Node& n : nodes_)
      if (n.feature > m) m = n.feature;
    return m;
  }

  int max_action() const {
    int m = 0;
    for (const Node& n : nodes_)
      if (n.feature < 0 && n.action > m) m = n.action;
    return m;
  }

  /// Single-line nested form, thresholds at 17 significant digits so the
  /// round trip through parse() is bit-faithful.
  std::string text() const { return print_node(root_); }

  static TreePolicy parse(const std::string& s) {
    std::size_t pos = 0;
    TreePolicy t = parse_node(s, pos);
    skip_ws(s, pos);
    if (pos != s.size())
      throw ValidationError("tree-parse", "trailing characters after tree text");
    return t;
  }

  bool operator==(const TreePolicy& other) const {
    return same_subtree(*this, root_, other, other.root_);
  }

  const std::vector<Node>& nodes() const { return nodes_; }
  int root() const { return root_; }

 private:
  std::vector<Node> nodes_;
  int root_ = 0;

  int graft(const TreePolicy& src, int idx) {
    const Node& n = src.nodes_[static_cast<std::size_t>(idx)];
    Node copy = n;
    if (n.feature >= 0) {
      copy.left = graft(src, n.left);
      copy.right = graft(src, n.right);
    }
    nodes_.push_back(copy);
    return static_cast<int>(nodes_.size()) - 1;
  }

  int depth_below(int idx) const {
    const Node& n = nodes_[static_cast<std::size_t>(idx)];
    if (n.feature < 0) return 0;
    return 1 + std::max(depth_below(n.left), depth_below(n.right));
  }

  static bool same_subtree(const TreePolicy& a, int ia, const TreePolicy& b, int ib) {
    const Node& na = a.nodes_[static_cast<std::size_t>(ia)];
    const Node& nb = b.nodes_[static_cast<std::size_t>(ib)];
    if ((na.feature < 0) != (nb.feature < 0)) return false;
    if (na.feature < 0) return na.action == nb.action;
    if (na.feature != nb.feature) return false;
    // bit comparison so +-inf and signed zeros round-trip exactly
    if (!(na.threshold == nb.threshold) &&
        !(std::isnan(na.threshold) && std::isnan(nb.threshold)))
      return false;
    return same_subtree(a, na.left, b, nb.left) && same_subtree(a, na.right, b, nb.right);
  }

  static std::string format_threshold(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
  }

  std::string print_node(int idx) const {
    const Node& n = nodes_[static_cast<std::size_t>(idx)];
    if (n.feature < 0) return "leaf(a=" + std::to_string(n.action) + ")";
    return "node(f=" + std::to_string(n.feature) + ", t=" + format_threshold(n.threshold) +
           ", L=" + print_node(n.left) + ", R=" + print_node(n.right) + ")";
  }

  static void skip_ws(const std::string& s, std::size_t& pos) {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }

  static void expect(const std::string& s, std::size_t& pos, const char* token) {
    skip_ws(s, pos);
    const std::size_t len = std::char_traits<char>::length(token);
    if (s.compare(pos, len, token) != 0)
      throw ValidationError("tree-parse",
                            "expected '" + std::string(token) + "' at offset " + std::to_string(pos));
    pos += len;
  }

  static int parse_int(const std::string& s, std::size_t& pos) {
    skip_ws(s, pos);
    char* end = nullptr;
    const long v = std::strtol(s.c_str() + pos, &end, 10);
    if (end == s.c_str() + pos) throw ValidationError("tree-parse", "expected integer");
    pos = static_cast<std::size_t>(end - s.c_str());
    return static_cast<int>(v);
  }

  static double parse_double(const std::string& s, std::size_t& pos) {
    skip_ws(s, pos);
    char* end = nullptr;
    const double v = std::strtod(s.c_str() + pos, &end);
    if (end == s.c_str() + pos) throw ValidationError("tree-parse", "expected number");
    pos = static_cast<std::size_t>(end - s.c_str());
    return v;
  }

  static TreePolicy parse_node(const std::string& s, std::size_t& pos) {
    skip_ws(s, pos);
    if (s.compare(pos, 5, "leaf(") == 0) {
      pos += 5;
      expect(s, pos, "a=");
      const int a = parse_int(s, pos);
      expect(s, pos, ")");
      return leaf(a);
    }
    expect(s, pos, "node(");
    expect(s, pos, "f=");
    const int f = parse_int(s, pos);
    expect(s, pos, ",");
    expect(s, pos, "t=");
    const double th = parse_double(s, pos);
    expect(s, pos, ",");
    expect(s, pos, "L=");
    TreePolicy l = parse_node(s, pos);
    expect(s, pos, ",");
    expect(s, pos, "R=");
    TreePolicy r = parse_node(s, pos);
    expect(s, pos, ")");
    return split(f, th, l, r);
  }
};

/// Policy class description: complete depth-L axis-aligned trees over
/// dim-dimensional contexts with one of `arms` actions per leaf.
struct TreeClassSpec {
  int depth = 2;
  int dim = 1;
  int arms = 2;

  void validate() const {
    if (depth < 1) throw ValidationError("tree-class", "depth must be >= 1");
    if (dim < 1) throw ValidationError("tree-class", "dimension must be >= 1");
    if (arms < 1) throw ValidationError("tree-class", "arm count must be >= 1");
  }
};

}  // namespace opl
