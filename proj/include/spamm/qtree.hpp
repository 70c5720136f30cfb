#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <vector>

#include "spamm/dense.hpp"

namespace spamm {

struct QuadNode;

/// Shared, immutable subtree. A null pointer is the explicit zero marker:
/// the spanned block is identically zero and its norm is 0.
using NodePtr = std::shared_ptr<const QuadNode>;

/// One node of the quadtree. Leaves own a dense row-major block of
/// block_size x block_size entries; interior nodes own four children in
/// the order [00, 01, 10, 11].
struct QuadNode {
  double norm = 0.0;
  std::vector<double> block;
  std::array<NodePtr, 4> child{};

  bool is_leaf() const noexcept { return !block.empty(); }
};

inline double node_norm(const NodePtr &node) noexcept {
  return node ? node->norm : 0.0;
}

/// Square matrix stored as a quadtree of dense leaf blocks with Frobenius
/// norms on every node.
///
/// The logical dimension n is padded to block_size * 2^depth; everything
/// outside the logical window is exactly zero and is carried by zero
/// markers wherever a whole block falls outside. Values are immutable: every
/// operation returns a new matrix, possibly sharing subtrees with its inputs.
class HierMatrix {
public:
  static constexpr std::size_t kDefaultBlockSize = 16;
  static constexpr std::size_t kMaxBlockSize = 64;

  HierMatrix() = default;
  HierMatrix(std::size_t logical_dim, std::size_t block_size, NodePtr root);

  static HierMatrix zeros(std::size_t n,
                          std::size_t block_size = kDefaultBlockSize);
  static HierMatrix identity(std::size_t n,
                             std::size_t block_size = kDefaultBlockSize);

  std::size_t logical_dim() const noexcept { return logical_dim_; }
  std::size_t padded_dim() const noexcept { return padded_dim_; }
  std::size_t block_size() const noexcept { return block_size_; }
  std::size_t depth() const noexcept { return depth_; }
  /// Number of leaf blocks along one side, padded_dim / block_size.
  std::size_t blocks_per_side() const noexcept { return padded_dim_ / block_size_; }

  const NodePtr &root() const noexcept { return root_; }
  double norm() const noexcept { return node_norm(root_); }

  std::size_t nonzero_count() const noexcept { return nonzero_count_; }
  std::size_t allocation_count() const noexcept { return allocation_count_; }

private:
  std::size_t logical_dim_ = 0;
  std::size_t padded_dim_ = 0;
  std::size_t block_size_ = kDefaultBlockSize;
  std::size_t depth_ = 0;
  NodePtr root_;
  std::size_t nonzero_count_ = 0;
  std::size_t allocation_count_ = 0;
};

/// Number of quadtree levels needed so that block_size * 2^depth >= n.
std::size_t tree_depth(std::size_t n, std::size_t block_size);

/// Equal logical and padded dimensions and equal block size.
bool same_shape(const HierMatrix &a, const HierMatrix &b) noexcept;

HierMatrix build(const DenseMatrix &dense,
                 std::size_t block_size = HierMatrix::kDefaultBlockSize);
DenseMatrix to_dense(const HierMatrix &m);

/// a + beta * b.
HierMatrix add(const HierMatrix &a, const HierMatrix &b, double beta = 1.0);

/// a * m + b * I, with the identity restricted to the logical window.
HierMatrix scale_shift(const HierMatrix &m, double a, double b);

double trace(const HierMatrix &m);
HierMatrix transpose(const HierMatrix &m);

/// Drops entries with |m_ij| < tau_drop.
HierMatrix sparsify(const HierMatrix &m, double tau_drop);

double frobenius(const HierMatrix &m) noexcept;

/// y = m x over the logical window.
DenseVector multiply_vector(const HierMatrix &m, const DenseVector &x);

/// Leaf construction helper: computes the norm and returns a zero marker
/// when every entry is exactly zero.
NodePtr make_leaf(std::vector<double> block);

/// Node-level a + beta * b for two subtrees of equal span.
NodePtr add_nodes(const NodePtr &a, const NodePtr &b, double beta = 1.0);

/// Interior construction helper: computes the norm from the children and
/// collapses to a zero marker when all four are zero markers.
NodePtr make_interior(std::array<NodePtr, 4> child);

/// Visits every allocated node depth-first. The callback receives the node
/// and its depth (root at 0).
template <class Fn>
void for_each_node(const NodePtr &node, Fn &&fn, std::size_t depth = 0) {
  if (!node)
    return;
  fn(*node, depth);
  if (!node->is_leaf())
    for (const auto &c : node->child)
      for_each_node(c, fn, depth + 1);
}

} // namespace spamm
