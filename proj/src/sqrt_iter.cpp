#include "spamm/sqrt_iter.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace spamm {

std::string_view to_string(Channel c) noexcept {
  return c == Channel::dual ? "dual" : "single";
}

Channel channel_from_string(std::string_view s) {
  if (s == "dual")
    return Channel::dual;
  if (s == "single")
    return Channel::single;
  throw InvalidArgument("unknown iteration mode '" + std::string(s) +
                        "' (expected dual or single)");
}

std::string_view to_string(RunStatus s) noexcept {
  switch (s) {
  case RunStatus::converged:
    return "converged";
  case RunStatus::max_iter:
    return "max_iter";
  case RunStatus::diverged:
    return "diverged";
  }
  return "unknown";
}

double Sigmoid::operator()(double t) const noexcept {
  return amp / (1.0 + std::exp(-rate * (t - mid)));
}

void IterationConfig::validate() const {
  if (!(tau >= 0.0))
    throw InvalidArgument("tau must be nonnegative");
  const double ts = sensitive_tau();
  if (!(ts >= 0.0) || ts > tau)
    throw InvalidArgument("tau_s must satisfy 0 <= tau_s <= tau");
  if (max_iter < 1)
    throw InvalidArgument("max_iter must be at least 1");
  if (!(convergence_tol > 0.0))
    throw InvalidArgument("convergence tolerance must be positive");
  for (const Sigmoid &sg : {alpha_sigmoid, eps_sigmoid})
    if (!(sg.amp > 0.0 && sg.rate > 0.0 && sg.mid > 0.0))
      throw InvalidArgument("schedule parameters must be positive");
  if (eps_sigmoid.amp >= 0.5)
    throw InvalidArgument("stabilization amplitude must be below 0.5");
  if (!(rescale_inflation >= 1.0))
    throw InvalidArgument("rescale inflation must be at least 1");
}

Rescaled rescale_spectrum(const HierMatrix &s, std::size_t iters,
                          double inflation) {
  if (s.norm() == 0.0)
    throw InvalidArgument("rescale_spectrum: zero matrix");
  const auto n = static_cast<Eigen::Index>(s.logical_dim());
  DenseVector v = DenseVector::Ones(n) / std::sqrt(static_cast<double>(n));
  double estimate = 0.0;
  for (std::size_t it = 0; it < std::max<std::size_t>(iters, 1); ++it) {
    DenseVector w = multiply_vector(s, v);
    estimate = v.dot(w);
    const double len = w.norm();
    if (len == 0.0)
      break;
    v = w / len;
  }
  if (!(estimate > 0.0))
    throw InvalidArgument(
        "rescale_spectrum: power iteration found no positive eigenvalue");
  const double s_max = estimate * inflation;
  return {scale_shift(s, 1.0 / s_max, 0.0), s_max};
}

HierMatrix logistic_map(const HierMatrix &x, double alpha) {
  if (!(alpha >= 1.0))
    throw InvalidArgument("logistic_map: alpha must be >= 1");
  const double root = std::sqrt(alpha);
  return scale_shift(x, -alpha * root / 2.0, 1.5 * root);
}

HierMatrix stabilize(const HierMatrix &x, double eps) {
  if (!(eps >= 0.0 && eps < 0.5))
    throw InvalidArgument("stabilize: eps must lie in [0, 0.5)");
  if (eps == 0.0)
    return x;
  return scale_shift(x, 1.0 - 2.0 * eps, eps);
}

double alpha_schedule(double t, const IterationConfig &cfg) {
  return 1.0 + cfg.alpha_sigmoid(t);
}

double epsilon_schedule(double t, const IterationConfig &cfg) {
  return cfg.eps_sigmoid(t);
}

double trace_error(const HierMatrix &x) {
  const auto n = static_cast<double>(x.logical_dim());
  return (n - trace(x)) / n;
}

MapParams map_params(double t, const IterationConfig &cfg) {
  if (!cfg.scaling_enabled)
    return {};
  // Schedules are defined on [0, 1]; clamp excursions from approximate
  // products.
  const double tc = std::clamp(t, 0.0, 1.0);
  // Stabilization is switched off once it is negligible, so every consumer
  // of the parameters applies the same map.
  const double eps = epsilon_schedule(tc, cfg);
  return {alpha_schedule(tc, cfg), eps > kStabilizationCutoff ? eps : 0.0};
}

IterationState initial_state(const HierMatrix &s_scaled, double s_max,
                             const IterationConfig &cfg) {
  IterationState st;
  st.k = 0;
  st.s = s_scaled;
  st.y = s_scaled;
  st.x = s_scaled;
  st.z = HierMatrix::identity(s_scaled.logical_dim(), s_scaled.block_size());
  st.t = trace_error(st.x);
  st.s_max = s_max;
  st.history.push_back({0, st.t, 1.0, 0.0, {}, {}, {}});
  (void)cfg;
  return st;
}

namespace {

HierMatrix mapped(const HierMatrix &x, const MapParams &p) {
  const HierMatrix xs = p.eps > 0.0 ? stabilize(x, p.eps) : x;
  return logistic_map(xs, p.alpha);
}

void check_finite(IterationState &next) {
  const bool ok = std::isfinite(next.y.norm()) && std::isfinite(next.z.norm()) &&
                  std::isfinite(next.x.norm()) && std::isfinite(next.t);
  if (!ok)
    throw DivergenceError("iteration produced non-finite values at k = " +
                              std::to_string(next.k),
                          next.history);
}

} // namespace

IterationState dual_step(const IterationState &state,
                         const IterationConfig &cfg) {
  const MapParams p = map_params(state.t, cfg);
  const HierMatrix h = mapped(state.x, p);

  IterationState next;
  next.k = state.k + 1;
  next.s = state.s;
  next.s_max = state.s_max;
  HistoryRow row{next.k, 0.0, p.alpha, p.eps, {}, {}, {}};

  auto y = multiply(h, state.y, cfg.sensitive_tau());
  auto z = multiply(state.z, h, cfg.tau);
  auto x = multiply(y.product, z.product, cfg.tau);
  next.y = std::move(y.product);
  next.z = std::move(z.product);
  next.x = std::move(x.product);
  row.y_stats = std::move(y.stats);
  row.z_stats = std::move(z.stats);
  row.x_stats = std::move(x.stats);

  next.t = trace_error(next.x);
  row.t = next.t;
  next.history = state.history;
  next.history.push_back(std::move(row));
  check_finite(next);
  return next;
}

IterationState single_step(const IterationState &state,
                           const IterationConfig &cfg) {
  const MapParams p = map_params(state.t, cfg);
  const HierMatrix h = mapped(state.x, p);

  IterationState next;
  next.k = state.k + 1;
  next.s = state.s;
  next.s_max = state.s_max;
  HistoryRow row{next.k, 0.0, p.alpha, p.eps, {}, {}, {}};

  auto z = multiply(state.z, h, cfg.tau);
  // Rightmost product s z_k carries the sensitive threshold.
  auto y = multiply(state.s, z.product, cfg.sensitive_tau());
  auto x = multiply(transpose(z.product), y.product, cfg.tau);
  next.y = std::move(y.product);
  next.z = std::move(z.product);
  next.x = std::move(x.product);
  row.y_stats = std::move(y.stats);
  row.z_stats = std::move(z.stats);
  row.x_stats = std::move(x.stats);

  next.t = trace_error(next.x);
  row.t = next.t;
  next.history = state.history;
  next.history.push_back(std::move(row));
  check_finite(next);
  return next;
}

IterationState step(const IterationState &state, const IterationConfig &cfg) {
  return cfg.mode == Channel::dual ? dual_step(state, cfg)
                                   : single_step(state, cfg);
}

bool diverging(const std::vector<HistoryRow> &history,
               const IterationConfig &cfg) {
  if (history.empty())
    return false;
  if (!std::isfinite(history.back().t))
    return true;
  const std::size_t w = cfg.divergence_window;
  if (w == 0 || history.size() <= w)
    return false;
  double best = std::abs(history.front().t);
  for (const auto &r : history)
    best = std::min(best, std::abs(r.t));
  const double limit = cfg.divergence_factor * std::max(best, cfg.convergence_tol);
  return std::all_of(history.end() - static_cast<std::ptrdiff_t>(w),
                     history.end(),
                     [&](const HistoryRow &r) { return std::abs(r.t) > limit; });
}

IterationResult run(const HierMatrix &s, const IterationConfig &cfg,
                    const StepObserver &observer) {
  cfg.validate();
  if (s.block_size() != cfg.block_size)
    throw ShapeError("run: matrix block size " + std::to_string(s.block_size()) +
                     " differs from configured " +
                     std::to_string(cfg.block_size));
  const Rescaled rs = rescale_spectrum(s, cfg.power_iters, cfg.rescale_inflation);
  IterationState st = initial_state(rs.matrix, rs.s_max, cfg);

  IterationResult result;
  result.s_max = rs.s_max;
  result.status = RunStatus::max_iter;
  if (std::abs(st.t) < cfg.convergence_tol)
    result.status = RunStatus::converged;

  while (result.status == RunStatus::max_iter && st.k < cfg.max_iter) {
    try {
      st = step(st, cfg);
    } catch (const DivergenceError &e) {
      result.status = RunStatus::diverged;
      result.history = e.history();
      break;
    }
    if (observer)
      observer(st);
    if (std::abs(st.t) < cfg.convergence_tol)
      result.status = RunStatus::converged;
    else if (diverging(st.history, cfg))
      result.status = RunStatus::diverged;
  }

  if (result.history.empty())
    result.history = st.history;
  result.iterations = result.history.back().k;
  const double root = std::sqrt(rs.s_max);
  result.sqrt = scale_shift(st.y, root, 0.0);
  result.inv_sqrt = scale_shift(st.z, 1.0 / root, 0.0);
  return result;
}

} // namespace spamm
