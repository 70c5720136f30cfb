#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "spamm/dense.hpp"
#include "spamm/error.hpp"
#include "spamm/sqrt_iter.hpp"

namespace spamm::frechet {

/// Which previous iterate a perturbation is applied to.
enum class Perturbed { y, z };

/// Unit-norm perturbation direction.
class Direction {
public:
  /// Normalizes `d`; throws InvalidArgument on a zero matrix.
  Direction(const DenseMatrix &d, Perturbed channel);

  const DenseMatrix &unit() const noexcept { return unit_; }
  Perturbed channel() const noexcept { return channel_; }

private:
  DenseMatrix unit_;
  Perturbed channel_;
};

/// Derivative of h_alpha with respect to its argument, including the
/// (1 - 2 eps) factor of the stabilizing map.
double h_prime(double alpha, double eps = 0.0) noexcept;

/// Dense h_alpha[stab_eps(x)].
DenseMatrix ns_map(const DenseMatrix &x, double alpha, double eps = 0.0);

/// Exact dense dual step: returns y_k, z_k, x_k from y_{k-1}, z_{k-1}.
struct DualIterate {
  DenseMatrix y, z, x;
};
DualIterate dual_map(const DenseMatrix &y_prev, const DenseMatrix &z_prev,
                     double alpha, double eps = 0.0);

/// Exact dense single step: z_k = z h[z^T s z], x_k = z_k^T s z_k.
struct SingleIterate {
  DenseMatrix z, x;
};
SingleIterate single_map(const DenseMatrix &z_prev, const DenseMatrix &s,
                         double alpha, double eps = 0.0);

/// Directional derivative of x_k with respect to z_{k-1} in the dual
/// instance:
///   y_{k-1} h' D y_{k-1} z_k + y_k D h[x_{k-1}] + y_k z_{k-1} y_{k-1} h' D.
DenseMatrix x_wrt_z(const DenseMatrix &y_prev, const DenseMatrix &z_prev,
                    const Direction &dir, double alpha, double eps = 0.0);

/// Directional derivative of x_k with respect to y_{k-1} in the dual
/// instance:
///   h[x_{k-1}] D z_k + h' D z_{k-1} y_{k-1} z_k + y_k z_{k-1} h' D z_{k-1}.
DenseMatrix x_wrt_y(const DenseMatrix &y_prev, const DenseMatrix &z_prev,
                    const Direction &dir, double alpha, double eps = 0.0);

/// Directional derivative of x_k = z_k^T s z_k with respect to z_{k-1} in
/// the single instance (full product rule).
DenseMatrix x_wrt_z_single(const DenseMatrix &z_prev, const DenseMatrix &s,
                           const Direction &dir, double alpha,
                           double eps = 0.0);

/// Near-fixed-point forms: D (z_k - z_{k-1}) for a y direction and
/// (y_k - y_{k-1}) D for a z direction.
DenseMatrix limit_forms(const DenseMatrix &y_k, const DenseMatrix &y_prev,
                        const DenseMatrix &z_k, const DenseMatrix &z_prev,
                        const Direction &dir);

/// Single-instance near-fixed-point form
///   (z_k - z_{k-1})^T s D + D^T s (z_k - z_{k-1}).
DenseMatrix single_limit_form(const DenseMatrix &z_k, const DenseMatrix &z_prev,
                              const DenseMatrix &s, const Direction &dir);

/// First-order bound on the z displacement after one step:
///   ||z|| (tau n^2 ||h|| + |h'| dy ||z||) + dz (||h|| + ||y||).
double displacement_bound(double z_prev_norm, double h_norm,
                          double y_prev_norm, double dy_prev, double dz_prev,
                          double tau, std::size_t n, double alpha);

struct ErrorFlowRecord {
  std::size_t k = 0;
  double t_approx = 0.0;
  double t_reference = 0.0;
  double alpha = 1.0;
  double eps = 0.0;
  /// Norms of the derivatives along the unit previous errors; 0 when the
  /// previous displacement vanished (or, for y, in the single instance).
  double deriv_y = 0.0;
  double deriv_z = 0.0;
  /// Norms of full derivative minus limit form, same conventions.
  double limit_gap_y = 0.0;
  double limit_gap_z = 0.0;
  double dy = 0.0;
  double dz = 0.0;
  double dx = 0.0;
  /// displacement_bound evaluated with the measured step k-1 quantities.
  double dz_bound = 0.0;
  /// Frobenius norm of z_k, used for the relative growth test.
  double z_norm = 0.0;
};

struct ErrorFlow {
  std::vector<ErrorFlowRecord> records;
  bool bifurcated = false;
  std::optional<std::size_t> bifurcation_step;
  RunStatus status = RunStatus::max_iter;
};

/// Raised when the exact reference iteration itself fails.
class ReferenceDivergence : public Error {
public:
  using Error::Error;
};

struct FlowOptions {
  std::size_t dense_cap = 512;
  /// Bifurcation: relative z displacement grows by `growth` over `window`
  /// steps once it exceeds `floor`.
  double growth = 10.0;
  std::size_t window = 3;
  double floor = 1e-8;
};

/// Runs the SpAMM iteration and an exact dense reference in lockstep for up
/// to n_steps, sharing the map parameters chosen from the SpAMM trace
/// error. Stops early once both runs have converged or the SpAMM run has
/// diverged.
ErrorFlow track_error_flow(const HierMatrix &s, const IterationConfig &cfg,
                           std::size_t n_steps, const FlowOptions &opts = {});

} // namespace spamm::frechet
