#include "spamm/qtree.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spamm/error.hpp"

namespace spamm {

namespace {

void check_block_size(std::size_t block_size) {
  if (block_size < 1 || block_size > HierMatrix::kMaxBlockSize)
    throw InvalidArgument("block size must be in [1, " +
                          std::to_string(HierMatrix::kMaxBlockSize) +
                          "], got " + std::to_string(block_size));
}

void check_same_shape(const HierMatrix &a, const HierMatrix &b,
                      const char *what) {
  if (!same_shape(a, b))
    throw ShapeError(std::string(what) + ": shape mismatch (" +
                     std::to_string(a.logical_dim()) + "/" +
                     std::to_string(a.block_size()) + " vs " +
                     std::to_string(b.logical_dim()) + "/" +
                     std::to_string(b.block_size()) + ")");
}

// Quadrant offsets for child index c of a node spanning `half`*2 rows.
constexpr std::size_t row_of(std::size_t c) { return c >> 1; }
constexpr std::size_t col_of(std::size_t c) { return c & 1; }

NodePtr build_node(const DenseMatrix &d, std::size_t row0, std::size_t col0,
                   std::size_t size, std::size_t nb) {
  const auto n = static_cast<std::size_t>(d.rows());
  if (row0 >= n || col0 >= n)
    return nullptr;
  if (size == nb) {
    std::vector<double> block(nb * nb, 0.0);
    const std::size_t rmax = std::min(nb, n - row0);
    const std::size_t cmax = std::min(nb, n - col0);
    for (std::size_t i = 0; i < rmax; ++i)
      for (std::size_t j = 0; j < cmax; ++j)
        block[i * nb + j] = d(static_cast<Eigen::Index>(row0 + i),
                              static_cast<Eigen::Index>(col0 + j));
    return make_leaf(std::move(block));
  }
  const std::size_t half = size / 2;
  std::array<NodePtr, 4> child;
  for (std::size_t c = 0; c < 4; ++c)
    child[c] = build_node(d, row0 + row_of(c) * half, col0 + col_of(c) * half,
                          half, nb);
  return make_interior(std::move(child));
}

void scatter_node(const NodePtr &node, DenseMatrix &out, std::size_t row0,
                  std::size_t col0, std::size_t size, std::size_t nb) {
  if (!node)
    return;
  const auto n = static_cast<std::size_t>(out.rows());
  if (node->is_leaf()) {
    const std::size_t rmax = std::min(nb, n - row0);
    const std::size_t cmax = std::min(nb, n - col0);
    for (std::size_t i = 0; i < rmax; ++i)
      for (std::size_t j = 0; j < cmax; ++j)
        out(static_cast<Eigen::Index>(row0 + i),
            static_cast<Eigen::Index>(col0 + j)) = node->block[i * nb + j];
    return;
  }
  const std::size_t half = size / 2;
  for (std::size_t c = 0; c < 4; ++c)
    scatter_node(node->child[c], out, row0 + row_of(c) * half,
                 col0 + col_of(c) * half, half, nb);
}

NodePtr scaled(const NodePtr &node, double s) {
  if (!node || s == 0.0)
    return nullptr;
  if (s == 1.0)
    return node;
  if (node->is_leaf()) {
    std::vector<double> block(node->block);
    for (auto &v : block)
      v *= s;
    return make_leaf(std::move(block));
  }
  std::array<NodePtr, 4> child;
  for (std::size_t c = 0; c < 4; ++c)
    child[c] = scaled(node->child[c], s);
  return make_interior(std::move(child));
}

NodePtr add_node(const NodePtr &a, const NodePtr &b, double beta) {
  if (!b || beta == 0.0)
    return a;
  if (!a)
    return scaled(b, beta);
  if (a->is_leaf()) {
    std::vector<double> block(a->block);
    for (std::size_t i = 0; i < block.size(); ++i)
      block[i] += beta * b->block[i];
    return make_leaf(std::move(block));
  }
  std::array<NodePtr, 4> child;
  for (std::size_t c = 0; c < 4; ++c)
    child[c] = add_node(a->child[c], b->child[c], beta);
  return make_interior(std::move(child));
}

// a * node + b * I on the diagonal block starting at `offset`.
NodePtr shift_diag(const NodePtr &node, double a, double b, std::size_t offset,
                   std::size_t size, std::size_t nb, std::size_t n) {
  if (offset >= n)
    return scaled(node, a);
  if (size == nb) {
    std::vector<double> block =
        node ? node->block : std::vector<double>(nb * nb, 0.0);
    if (a != 1.0)
      for (auto &v : block)
        v *= a;
    const std::size_t dmax = std::min(nb, n - offset);
    for (std::size_t i = 0; i < dmax; ++i)
      block[i * nb + i] += b;
    return make_leaf(std::move(block));
  }
  const std::size_t half = size / 2;
  std::array<NodePtr, 4> child{};
  if (node)
    child = node->child;
  child[0] = shift_diag(child[0], a, b, offset, half, nb, n);
  child[1] = scaled(child[1], a);
  child[2] = scaled(child[2], a);
  child[3] = shift_diag(child[3], a, b, offset + half, half, nb, n);
  return make_interior(std::move(child));
}

double trace_node(const NodePtr &node, std::size_t nb) {
  if (!node)
    return 0.0;
  if (node->is_leaf()) {
    double t = 0.0;
    for (std::size_t i = 0; i < nb; ++i)
      t += node->block[i * nb + i];
    return t;
  }
  return trace_node(node->child[0], nb) + trace_node(node->child[3], nb);
}

NodePtr transpose_node(const NodePtr &node, std::size_t nb) {
  if (!node)
    return nullptr;
  if (node->is_leaf()) {
    std::vector<double> block(nb * nb);
    for (std::size_t i = 0; i < nb; ++i)
      for (std::size_t j = 0; j < nb; ++j)
        block[j * nb + i] = node->block[i * nb + j];
    return make_leaf(std::move(block));
  }
  return make_interior({transpose_node(node->child[0], nb),
                        transpose_node(node->child[2], nb),
                        transpose_node(node->child[1], nb),
                        transpose_node(node->child[3], nb)});
}

NodePtr sparsify_node(const NodePtr &node, double tau_drop) {
  if (!node)
    return nullptr;
  if (node->is_leaf()) {
    std::vector<double> block(node->block);
    for (auto &v : block)
      if (std::abs(v) < tau_drop)
        v = 0.0;
    return make_leaf(std::move(block));
  }
  std::array<NodePtr, 4> child;
  for (std::size_t c = 0; c < 4; ++c)
    child[c] = sparsify_node(node->child[c], tau_drop);
  return make_interior(std::move(child));
}

void matvec_node(const NodePtr &node, const double *x, double *y,
                 std::size_t size, std::size_t nb) {
  if (!node)
    return;
  if (node->is_leaf()) {
    for (std::size_t i = 0; i < nb; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < nb; ++j)
        acc += node->block[i * nb + j] * x[j];
      y[i] += acc;
    }
    return;
  }
  const std::size_t half = size / 2;
  for (std::size_t c = 0; c < 4; ++c)
    matvec_node(node->child[c], x + col_of(c) * half, y + row_of(c) * half,
                half, nb);
}

} // namespace

NodePtr add_nodes(const NodePtr &a, const NodePtr &b, double beta) {
  return add_node(a, b, beta);
}

NodePtr make_leaf(std::vector<double> block) {
  double sq = 0.0;
  for (double v : block)
    sq += v * v;
  if (sq == 0.0)
    return nullptr;
  auto node = std::make_shared<QuadNode>();
  node->norm = std::sqrt(sq);
  node->block = std::move(block);
  return node;
}

NodePtr make_interior(std::array<NodePtr, 4> child) {
  double sq = 0.0;
  bool any = false;
  for (const auto &c : child) {
    if (c) {
      any = true;
      sq += c->norm * c->norm;
    }
  }
  if (!any)
    return nullptr;
  auto node = std::make_shared<QuadNode>();
  node->norm = std::sqrt(sq);
  node->child = std::move(child);
  return node;
}

std::size_t tree_depth(std::size_t n, std::size_t block_size) {
  check_block_size(block_size);
  std::size_t depth = 0;
  for (std::size_t span = block_size; span < n; span *= 2)
    ++depth;
  return depth;
}

HierMatrix::HierMatrix(std::size_t logical_dim, std::size_t block_size,
                       NodePtr root)
    : logical_dim_(logical_dim), block_size_(block_size),
      depth_(tree_depth(logical_dim, block_size)), root_(std::move(root)) {
  if (logical_dim < 1)
    throw InvalidArgument("matrix dimension must be positive");
  padded_dim_ = block_size_ << depth_;
  for_each_node(root_, [&](const QuadNode &node, std::size_t) {
    if (!node.is_leaf())
      return;
    ++allocation_count_;
    nonzero_count_ += static_cast<std::size_t>(
        std::count_if(node.block.begin(), node.block.end(),
                      [](double v) { return v != 0.0; }));
  });
}

HierMatrix HierMatrix::zeros(std::size_t n, std::size_t block_size) {
  return HierMatrix(n, block_size, nullptr);
}

HierMatrix HierMatrix::identity(std::size_t n, std::size_t block_size) {
  return scale_shift(zeros(n, block_size), 0.0, 1.0);
}

bool same_shape(const HierMatrix &a, const HierMatrix &b) noexcept {
  return a.logical_dim() == b.logical_dim() &&
         a.block_size() == b.block_size() && a.padded_dim() == b.padded_dim();
}

HierMatrix build(const DenseMatrix &dense, std::size_t block_size) {
  if (dense.rows() != dense.cols())
    throw ShapeError("build: matrix must be square, got " +
                     std::to_string(dense.rows()) + "x" +
                     std::to_string(dense.cols()));
  if (dense.rows() < 1)
    throw InvalidArgument("build: empty matrix");
  check_block_size(block_size);
  const auto n = static_cast<std::size_t>(dense.rows());
  const std::size_t padded = block_size << tree_depth(n, block_size);
  return HierMatrix(n, block_size, build_node(dense, 0, 0, padded, block_size));
}

DenseMatrix to_dense(const HierMatrix &m) {
  const auto n = static_cast<Eigen::Index>(m.logical_dim());
  DenseMatrix out = DenseMatrix::Zero(n, n);
  scatter_node(m.root(), out, 0, 0, m.padded_dim(), m.block_size());
  return out;
}

HierMatrix add(const HierMatrix &a, const HierMatrix &b, double beta) {
  check_same_shape(a, b, "add");
  return HierMatrix(a.logical_dim(), a.block_size(),
                    add_node(a.root(), b.root(), beta));
}

HierMatrix scale_shift(const HierMatrix &m, double a, double b) {
  if (b == 0.0)
    return HierMatrix(m.logical_dim(), m.block_size(), scaled(m.root(), a));
  return HierMatrix(m.logical_dim(), m.block_size(),
                    shift_diag(m.root(), a, b, 0, m.padded_dim(),
                               m.block_size(), m.logical_dim()));
}

double trace(const HierMatrix &m) { return trace_node(m.root(), m.block_size()); }

HierMatrix transpose(const HierMatrix &m) {
  return HierMatrix(m.logical_dim(), m.block_size(),
                    transpose_node(m.root(), m.block_size()));
}

HierMatrix sparsify(const HierMatrix &m, double tau_drop) {
  if (!(tau_drop >= 0.0))
    throw InvalidArgument("sparsify: drop tolerance must be nonnegative");
  if (tau_drop == 0.0)
    return m;
  return HierMatrix(m.logical_dim(), m.block_size(),
                    sparsify_node(m.root(), tau_drop));
}

double frobenius(const HierMatrix &m) noexcept { return m.norm(); }

DenseVector multiply_vector(const HierMatrix &m, const DenseVector &x) {
  if (static_cast<std::size_t>(x.size()) != m.logical_dim())
    throw ShapeError("multiply_vector: vector length mismatch");
  std::vector<double> xp(m.padded_dim(), 0.0), yp(m.padded_dim(), 0.0);
  std::copy(x.data(), x.data() + x.size(), xp.begin());
  matvec_node(m.root(), xp.data(), yp.data(), m.padded_dim(), m.block_size());
  return Eigen::Map<const DenseVector>(yp.data(), x.size());
}

} // namespace spamm
