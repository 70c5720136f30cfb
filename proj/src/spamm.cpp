#include "spamm/spamm.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <future>
#include <string>
#include <thread>

#include "spamm/error.hpp"

namespace spamm {

namespace {

std::size_t initial_worker_count() {
  if (const char *env = std::getenv("SPAMM_THREADS")) {
    char *end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1)
      return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::atomic<std::size_t> &workers() {
  static std::atomic<std::size_t> count{initial_worker_count()};
  return count;
}

struct Context {
  double threshold;
  std::size_t nb;
  std::size_t spawn_depth;
};

struct Sink {
  MultiplyStats stats;
  VolumeLog *log;
};

std::uint64_t cube(std::uint64_t x) { return x * x * x; }

void record_cull(Sink &sink, const Context &ctx, std::size_t depth,
                 std::size_t size, std::size_t i0, std::size_t j0,
                 std::size_t k0) {
  auto &per_depth = sink.stats.culled_subtrees_per_depth;
  if (per_depth.size() <= depth)
    per_depth.resize(depth + 1, 0);
  ++per_depth[depth];
  sink.stats.leaf_products_culled += cube(size / ctx.nb);
  if (sink.log)
    sink.log->boxes.push_back({i0, j0, k0, size, BoxStatus::culled});
}

NodePtr leaf_product(const QuadNode &a, const QuadNode &b, std::size_t nb) {
  using Block =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto n = static_cast<Eigen::Index>(nb);
  std::vector<double> out(nb * nb);
  Eigen::Map<Block> c(out.data(), n, n);
  c.noalias() = Eigen::Map<const Block>(a.block.data(), n, n) *
                Eigen::Map<const Block>(b.block.data(), n, n);
  return make_leaf(std::move(out));
}

// Product over the sub-cube with origin (i0, j0, k0) and edge `size`.
NodePtr product_node(const NodePtr &a, const NodePtr &b, std::size_t size,
                     std::size_t i0, std::size_t j0, std::size_t k0,
                     std::size_t depth, const Context &ctx, Sink &sink) {
  if (!a || !b || a->norm * b->norm < ctx.threshold) {
    record_cull(sink, ctx, depth, size, i0, j0, k0);
    return nullptr;
  }
  if (a->is_leaf()) {
    ++sink.stats.leaf_products_performed;
    if (sink.log)
      sink.log->boxes.push_back({i0, j0, k0, size, BoxStatus::performed});
    return leaf_product(*a, *b, ctx.nb);
  }

  const std::size_t half = size / 2;
  auto quadrant = [&](std::size_t q, Sink &local) {
    const std::size_t r = q >> 1, c = q & 1;
    const std::size_t i = i0 + r * half, j = j0 + c * half;
    NodePtr first = product_node(a->child[2 * r], b->child[c], half, i, j, k0,
                                 depth + 1, ctx, local);
    NodePtr second = product_node(a->child[2 * r + 1], b->child[2 + c], half, i,
                                  j, k0 + half, depth + 1, ctx, local);
    // Fixed order: first term plus second term.
    return add_nodes(first, second);
  };

  std::array<NodePtr, 4> child;
  if (depth < ctx.spawn_depth) {
    std::array<VolumeLog, 4> logs;
    std::array<Sink, 4> locals;
    std::array<std::future<NodePtr>, 4> tasks;
    for (std::size_t q = 0; q < 4; ++q) {
      locals[q].log = sink.log ? &logs[q] : nullptr;
      tasks[q] = std::async(std::launch::async,
                            [&, q] { return quadrant(q, locals[q]); });
    }
    for (std::size_t q = 0; q < 4; ++q) {
      child[q] = tasks[q].get();
      sink.stats.merge(locals[q].stats);
      if (sink.log)
        sink.log->boxes.insert(sink.log->boxes.end(), logs[q].boxes.begin(),
                               logs[q].boxes.end());
    }
  } else {
    for (std::size_t q = 0; q < 4; ++q)
      child[q] = quadrant(q, sink);
  }
  return make_interior(std::move(child));
}

} // namespace

std::string_view to_string(BoxStatus s) noexcept {
  return s == BoxStatus::performed ? "performed" : "culled";
}

void MultiplyStats::merge(const MultiplyStats &other) {
  leaf_products_performed += other.leaf_products_performed;
  leaf_products_culled += other.leaf_products_culled;
  if (culled_subtrees_per_depth.size() < other.culled_subtrees_per_depth.size())
    culled_subtrees_per_depth.resize(other.culled_subtrees_per_depth.size(), 0);
  for (std::size_t d = 0; d < other.culled_subtrees_per_depth.size(); ++d)
    culled_subtrees_per_depth[d] += other.culled_subtrees_per_depth[d];
}

double error_bound(std::size_t n, double tau, double norm_a, double norm_b) {
  const auto nn = static_cast<double>(n);
  return nn * nn * tau * norm_a * norm_b;
}

double elementwise_error_bound(std::size_t n, double tau, double norm_a,
                               double norm_b) {
  return static_cast<double>(n) * tau * norm_a * norm_b;
}

MultiplyResult multiply(const HierMatrix &a, const HierMatrix &b, double tau,
                        VolumeLog *log) {
  if (!same_shape(a, b))
    throw ShapeError("multiply: shape mismatch (" +
                     std::to_string(a.logical_dim()) + "/" +
                     std::to_string(a.block_size()) + " vs " +
                     std::to_string(b.logical_dim()) + "/" +
                     std::to_string(b.block_size()) + ")");
  if (!(tau >= 0.0))
    throw InvalidArgument("multiply: tau must be nonnegative");

  // Spawn 4^d tasks at the top d levels, enough to cover the workers.
  std::size_t spawn_depth = 0;
  for (std::size_t tasks = 1; tasks < worker_count() && spawn_depth < a.depth();
       tasks *= 4)
    ++spawn_depth;

  const Context ctx{tau * a.norm() * b.norm(), a.block_size(), spawn_depth};
  Sink sink{{}, log};
  sink.stats.leaf_products_possible = cube(a.blocks_per_side());
  if (log) {
    log->padded_dim = a.padded_dim();
    log->block_size = a.block_size();
    log->boxes.clear();
  }
  NodePtr root =
      product_node(a.root(), b.root(), a.padded_dim(), 0, 0, 0, 0, ctx, sink);
  return {HierMatrix(a.logical_dim(), a.block_size(), std::move(root)),
          std::move(sink.stats)};
}

HierMatrix multiply_exact(const HierMatrix &a, const HierMatrix &b) {
  return multiply(a, b, 0.0).product;
}

std::size_t worker_count() { return workers().load(); }

void set_worker_count(std::size_t n) { workers().store(std::max<std::size_t>(1, n)); }

} // namespace spamm
