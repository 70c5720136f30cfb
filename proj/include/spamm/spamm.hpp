#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "spamm/qtree.hpp"

namespace spamm {

enum class BoxStatus { performed, culled };

std::string_view to_string(BoxStatus s) noexcept;

/// Axis-aligned cube in product-tensor index space (i, j, k), where the
/// product is c_ij = sum_k a_ik b_kj. Coordinates and side are in matrix
/// entries, not blocks.
struct VolumeBox {
  std::size_t i_lo = 0;
  std::size_t j_lo = 0;
  std::size_t k_lo = 0;
  std::size_t side = 0;
  BoxStatus status = BoxStatus::performed;

  friend bool operator==(const VolumeBox &, const VolumeBox &) = default;
};

/// Record of one multiply: a performed box per leaf task and a culled box
/// per occluded (or zero-marker) subtree pair. The boxes tile the padded
/// N^3 cube exactly.
struct VolumeLog {
  std::size_t padded_dim = 0;
  std::size_t block_size = 0;
  std::vector<VolumeBox> boxes;
};

struct MultiplyStats {
  std::uint64_t leaf_products_performed = 0;
  std::uint64_t leaf_products_possible = 0;
  /// Culled volume in units of leaf products.
  std::uint64_t leaf_products_culled = 0;
  /// Number of culled subtree pairs, indexed by recursion depth.
  std::vector<std::uint64_t> culled_subtrees_per_depth;

  double volume_fraction() const noexcept {
    return leaf_products_possible == 0
               ? 0.0
               : static_cast<double>(leaf_products_performed) /
                     static_cast<double>(leaf_products_possible);
  }

  void merge(const MultiplyStats &other);
};

struct MultiplyResult {
  HierMatrix product;
  MultiplyStats stats;
};

/// Cull predicate: ||a_node|| ||b_node|| < tau ||a|| ||b||. Strict, so a
/// pair exactly at the threshold is kept and tau = 0 never culls.
inline bool occlusion_test(double norm_a_node, double norm_b_node, double tau,
                           double norm_a_root, double norm_b_root) noexcept {
  return norm_a_node * norm_b_node < tau * norm_a_root * norm_b_root;
}

/// Normwise bound on ||a (x)_tau b - a b||_F: n^2 tau ||a|| ||b||.
double error_bound(std::size_t n, double tau, double norm_a, double norm_b);

/// Elementwise bound on |(a (x)_tau b - a b)_ij|: n tau ||a|| ||b||.
double elementwise_error_bound(std::size_t n, double tau, double norm_a,
                               double norm_b);

/// SpAMM product a (x)_tau b.
///
/// Descends both quadtrees together. A pair of sub-blocks is skipped when
/// occlusion_test holds against the root norms of a and b captured at entry;
/// surviving leaf pairs are multiplied densely. Each result quadrant is the
/// canonical 2x2 block sum c_rc = a_r0 b_0c + a_r1 b_1c, accumulated first
/// term then second. When `log` is non-null every performed leaf task and
/// every culled subtree is appended to it.
///
/// Quadrants near the root may run as concurrent tasks (see
/// set_worker_count); partial results, statistics and log entries are
/// merged in quadrant order, so the output is bitwise identical to the
/// serial run.
MultiplyResult multiply(const HierMatrix &a, const HierMatrix &b, double tau,
                        VolumeLog *log = nullptr);

/// Recursive GEMM, i.e. multiply with tau = 0 and no logging.
HierMatrix multiply_exact(const HierMatrix &a, const HierMatrix &b);

/// Upper bound on concurrent tasks used by multiply. Initialized from the
/// SPAMM_THREADS environment variable, else the hardware concurrency.
std::size_t worker_count();
void set_worker_count(std::size_t n);

} // namespace spamm
