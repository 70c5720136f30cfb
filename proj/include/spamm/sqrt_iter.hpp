#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "spamm/error.hpp"
#include "spamm/qtree.hpp"
#include "spamm/spamm.hpp"

namespace spamm {

enum class Channel { dual, single };

std::string_view to_string(Channel c) noexcept;
Channel channel_from_string(std::string_view s);

/// amp / (1 + exp(-rate (t - mid))). The alpha schedule adds 1 to this.
struct Sigmoid {
  double amp;
  double rate;
  double mid;

  double operator()(double t) const noexcept;
};

struct IterationConfig {
  Channel mode = Channel::dual;
  /// Threshold for the z-channel and x products.
  double tau = 0.0;
  /// Threshold for the sensitive y-channel product; 0.01 * tau when unset.
  std::optional<double> tau_s;
  std::size_t block_size = HierMatrix::kDefaultBlockSize;
  std::size_t max_iter = 100;
  double convergence_tol = 1e-10;
  bool scaling_enabled = true;
  Sigmoid alpha_sigmoid{1.85, 50.0, 0.35};
  Sigmoid eps_sigmoid{0.1, 75.0, 0.30};
  /// Spectral rescaling: power-iteration steps and safety inflation.
  std::size_t power_iters = 100;
  double rescale_inflation = 1.01;
  /// Divergence: |t_k| above factor * max(min |t|, tol) for `window`
  /// consecutive steps, or any non-finite value.
  double divergence_factor = 10.0;
  std::size_t divergence_window = 3;

  double sensitive_tau() const noexcept { return tau_s.value_or(0.01 * tau); }

  /// Throws InvalidArgument when the configuration is inconsistent.
  void validate() const;
};

/// Per-step record. Step 0 is the initial state and carries no products.
struct HistoryRow {
  std::size_t k = 0;
  double t = 0.0;
  double alpha = 1.0;
  double eps = 0.0;
  MultiplyStats y_stats;
  MultiplyStats z_stats;
  MultiplyStats x_stats;
};

struct MapParams {
  double alpha = 1.0;
  double eps = 0.0;
};

/// Channel state after step k, on the rescaled problem. In the single
/// instance y holds the product s z_k, which converges to s^{1/2} as well.
struct IterationState {
  std::size_t k = 0;
  HierMatrix s;
  HierMatrix y;
  HierMatrix z;
  HierMatrix x;
  double t = 1.0;
  double s_max = 1.0;
  std::vector<HistoryRow> history;
};

enum class RunStatus { converged, max_iter, diverged };

std::string_view to_string(RunStatus s) noexcept;

struct IterationResult {
  HierMatrix sqrt;     ///< y, approximating s^{1/2}
  HierMatrix inv_sqrt; ///< z, approximating s^{-1/2}
  std::vector<HistoryRow> history;
  RunStatus status = RunStatus::max_iter;
  double s_max = 1.0;
  std::size_t iterations = 0;

  bool converged() const noexcept { return status == RunStatus::converged; }
};

/// Raised when an iterate becomes non-finite. The history up to and
/// including the failing step is preserved.
class DivergenceError : public Error {
public:
  DivergenceError(const std::string &what, std::vector<HistoryRow> history)
      : Error(what), history_(std::move(history)) {}
  const std::vector<HistoryRow> &history() const noexcept { return history_; }

private:
  std::vector<HistoryRow> history_;
};

struct Rescaled {
  HierMatrix matrix;
  double s_max;
};

/// Divides s by an inflated power-iteration estimate of its largest
/// eigenvalue so the spectrum lands in (0, 1].
Rescaled rescale_spectrum(const HierMatrix &s, std::size_t iters = 100,
                          double inflation = 1.01);

/// Newton-Schulz map h_alpha[x] = (sqrt(alpha)/2) (3 I - alpha x).
HierMatrix logistic_map(const HierMatrix &x, double alpha);

/// (1 - 2 eps) x + eps I: maps the eigenvalue range [0, 1] to [eps, 1 - eps].
HierMatrix stabilize(const HierMatrix &x, double eps);

double alpha_schedule(double t, const IterationConfig &cfg = {});
double epsilon_schedule(double t, const IterationConfig &cfg = {});

/// (n - tr x) / n over the logical dimension.
double trace_error(const HierMatrix &x);

/// Scheduled eps at or below this value is replaced by 0.
inline constexpr double kStabilizationCutoff = 1e-6;

/// Map parameters used for the step following a state with trace error t.
MapParams map_params(double t, const IterationConfig &cfg);

/// State at k = 0 for an already rescaled s: y = x = s, z = I.
IterationState initial_state(const HierMatrix &s_scaled, double s_max,
                             const IterationConfig &cfg);

/// One step of the dual instance:
///   h = h_alpha[stab(x)],  y <- h (x)_{tau_s} y,  z <- z (x)_tau h,
///   x <- y (x)_tau z.
IterationState dual_step(const IterationState &state,
                         const IterationConfig &cfg);

/// One step of the single instance:
///   z <- z (x)_tau h_alpha[stab(x)],  y <- s (x)_{tau_s} z,
///   x <- z^T (x)_tau y.
IterationState single_step(const IterationState &state,
                           const IterationConfig &cfg);

IterationState step(const IterationState &state, const IterationConfig &cfg);

/// Called after every completed step with the new (rescaled) state.
using StepObserver = std::function<void(const IterationState &)>;

/// Full iteration from an unscaled s. Returns factors of the original s.
IterationResult run(const HierMatrix &s, const IterationConfig &cfg,
                    const StepObserver &observer = {});

/// Divergence predicate over a trace-error history.
bool diverging(const std::vector<HistoryRow> &history,
               const IterationConfig &cfg);

} // namespace spamm
