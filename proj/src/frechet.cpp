#include "spamm/frechet.hpp"

#include <cmath>
#include <string>

namespace spamm::frechet {

namespace {

void check_square_same(const DenseMatrix &a, const DenseMatrix &b,
                       const char *what) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows())
    throw ShapeError(std::string(what) + ": shape mismatch");
}

} // namespace

Direction::Direction(const DenseMatrix &d, Perturbed channel)
    : channel_(channel) {
  if (d.rows() != d.cols())
    throw ShapeError("Direction: matrix must be square");
  const double len = d.norm();
  if (!(len > 0.0) || !std::isfinite(len))
    throw InvalidArgument("Direction: needs a nonzero finite matrix");
  unit_ = d / len;
}

double h_prime(double alpha, double eps) noexcept {
  return -alpha * std::sqrt(alpha) * (1.0 - 2.0 * eps) / 2.0;
}

DenseMatrix ns_map(const DenseMatrix &x, double alpha, double eps) {
  const double root = std::sqrt(alpha);
  DenseMatrix h = h_prime(alpha, eps) * x;
  h.diagonal().array() += root / 2.0 * (3.0 - alpha * eps);
  return h;
}

DualIterate dual_map(const DenseMatrix &y_prev, const DenseMatrix &z_prev,
                     double alpha, double eps) {
  check_square_same(y_prev, z_prev, "dual_map");
  const DenseMatrix h = ns_map(y_prev * z_prev, alpha, eps);
  DualIterate out;
  out.y = h * y_prev;
  out.z = z_prev * h;
  out.x = out.y * out.z;
  return out;
}

SingleIterate single_map(const DenseMatrix &z_prev, const DenseMatrix &s,
                         double alpha, double eps) {
  check_square_same(z_prev, s, "single_map");
  const DenseMatrix h = ns_map(z_prev.transpose() * s * z_prev, alpha, eps);
  SingleIterate out;
  out.z = z_prev * h;
  out.x = out.z.transpose() * s * out.z;
  return out;
}

DenseMatrix x_wrt_z(const DenseMatrix &y_prev, const DenseMatrix &z_prev,
                    const Direction &dir, double alpha, double eps) {
  if (dir.channel() != Perturbed::z)
    throw InvalidArgument("x_wrt_z: direction must perturb z");
  check_square_same(y_prev, z_prev, "x_wrt_z");
  check_square_same(y_prev, dir.unit(), "x_wrt_z");
  const DenseMatrix &d = dir.unit();
  const double hp = h_prime(alpha, eps);
  const DenseMatrix h = ns_map(y_prev * z_prev, alpha, eps);
  const DenseMatrix y_k = h * y_prev;
  const DenseMatrix z_k = z_prev * h;
  return hp * (y_prev * d * y_prev * z_k) + y_k * d * h +
         hp * (y_k * z_prev * y_prev * d);
}

DenseMatrix x_wrt_y(const DenseMatrix &y_prev, const DenseMatrix &z_prev,
                    const Direction &dir, double alpha, double eps) {
  if (dir.channel() != Perturbed::y)
    throw InvalidArgument("x_wrt_y: direction must perturb y");
  check_square_same(y_prev, z_prev, "x_wrt_y");
  check_square_same(y_prev, dir.unit(), "x_wrt_y");
  const DenseMatrix &d = dir.unit();
  const double hp = h_prime(alpha, eps);
  const DenseMatrix h = ns_map(y_prev * z_prev, alpha, eps);
  const DenseMatrix y_k = h * y_prev;
  const DenseMatrix z_k = z_prev * h;
  return h * d * z_k + hp * (d * z_prev * y_prev * z_k) +
         hp * (y_k * z_prev * d * z_prev);
}

DenseMatrix x_wrt_z_single(const DenseMatrix &z_prev, const DenseMatrix &s,
                           const Direction &dir, double alpha, double eps) {
  if (dir.channel() != Perturbed::z)
    throw InvalidArgument("x_wrt_z_single: direction must perturb z");
  check_square_same(z_prev, s, "x_wrt_z_single");
  check_square_same(z_prev, dir.unit(), "x_wrt_z_single");
  const DenseMatrix &d = dir.unit();
  const DenseMatrix sz = s * z_prev;
  const DenseMatrix h = ns_map(z_prev.transpose() * sz, alpha, eps);
  const DenseMatrix z_k = z_prev * h;
  const DenseMatrix dx = d.transpose() * sz + sz.transpose() * d;
  const DenseMatrix dz_k = d * h + h_prime(alpha, eps) * (z_prev * dx);
  const DenseMatrix s_zk = s * z_k;
  return dz_k.transpose() * s_zk + s_zk.transpose() * dz_k;
}

DenseMatrix limit_forms(const DenseMatrix &y_k, const DenseMatrix &y_prev,
                        const DenseMatrix &z_k, const DenseMatrix &z_prev,
                        const Direction &dir) {
  if (dir.channel() == Perturbed::y)
    return dir.unit() * (z_k - z_prev);
  return (y_k - y_prev) * dir.unit();
}

DenseMatrix single_limit_form(const DenseMatrix &z_k, const DenseMatrix &z_prev,
                              const DenseMatrix &s, const Direction &dir) {
  const DenseMatrix dz = z_k - z_prev;
  return dz.transpose() * s * dir.unit() + dir.unit().transpose() * s * dz;
}

double displacement_bound(double z_prev_norm, double h_norm,
                          double y_prev_norm, double dy_prev, double dz_prev,
                          double tau, std::size_t n, double alpha) {
  const auto nn = static_cast<double>(n);
  return z_prev_norm *
             (tau * nn * nn * h_norm +
              std::abs(h_prime(alpha)) * dy_prev * z_prev_norm) +
         dz_prev * (h_norm + y_prev_norm);
}

ErrorFlow track_error_flow(const HierMatrix &s, const IterationConfig &cfg,
                           std::size_t n_steps, const FlowOptions &opts) {
  cfg.validate();
  const std::size_t n = s.logical_dim();
  if (n > opts.dense_cap)
    throw InvalidArgument("track_error_flow: dimension " + std::to_string(n) +
                          " exceeds dense cap " +
                          std::to_string(opts.dense_cap));

  const Rescaled rs =
      spamm::rescale_spectrum(s, cfg.power_iters, cfg.rescale_inflation);
  IterationState approx = initial_state(rs.matrix, rs.s_max, cfg);

  const DenseMatrix s_ref = to_dense(rs.matrix);
  DenseMatrix y = s_ref;
  DenseMatrix z = DenseMatrix::Identity(s_ref.rows(), s_ref.cols());
  DenseMatrix x = s_ref;

  ErrorFlow flow;
  ErrorFlowRecord start;
  start.k = 0;
  start.t_approx = approx.t;
  start.t_reference = approx.t;
  start.z_norm = z.norm();
  flow.records.push_back(start);

  const auto nd = static_cast<double>(n);
  for (std::size_t k = 1; k <= n_steps; ++k) {
    const ErrorFlowRecord &prev = flow.records.back();
    const MapParams p = map_params(approx.t, cfg);

    const DenseMatrix y_tilde = to_dense(approx.y);
    const DenseMatrix z_tilde = to_dense(approx.z);
    const DenseMatrix err_y = y_tilde - y;
    const DenseMatrix err_z = z_tilde - z;

    ErrorFlowRecord rec;
    rec.k = k;
    rec.alpha = p.alpha;
    rec.eps = p.eps;

    // Bound inputs come from the approximate step k-1 state.
    const HierMatrix x_in = p.eps > 0.0 ? stabilize(approx.x, p.eps) : approx.x;
    const double h_norm = logistic_map(x_in, p.alpha).norm();
    const double tau_z = cfg.tau;
    rec.dz_bound = displacement_bound(approx.z.norm(), h_norm, approx.y.norm(),
                                      prev.dy, prev.dz, tau_z, n, p.alpha);

    DenseMatrix y_next, z_next, x_next;
    if (cfg.mode == Channel::dual) {
      DualIterate it = dual_map(y, z, p.alpha, p.eps);
      y_next = std::move(it.y);
      z_next = std::move(it.z);
      x_next = std::move(it.x);
    } else {
      SingleIterate it = single_map(z, s_ref, p.alpha, p.eps);
      z_next = std::move(it.z);
      x_next = std::move(it.x);
      y_next = s_ref * z_next;
    }

    if (cfg.mode == Channel::dual) {
      if (err_y.norm() > 0.0) {
        const Direction dir(err_y, Perturbed::y);
        const DenseMatrix d = x_wrt_y(y, z, dir, p.alpha, p.eps);
        rec.deriv_y = d.norm();
        rec.limit_gap_y = (d - limit_forms(y_next, y, z_next, z, dir)).norm();
      }
      if (err_z.norm() > 0.0) {
        const Direction dir(err_z, Perturbed::z);
        const DenseMatrix d = x_wrt_z(y, z, dir, p.alpha, p.eps);
        rec.deriv_z = d.norm();
        rec.limit_gap_z = (d - limit_forms(y_next, y, z_next, z, dir)).norm();
      }
    } else if (err_z.norm() > 0.0) {
      const Direction dir(err_z, Perturbed::z);
      const DenseMatrix d = x_wrt_z_single(z, s_ref, dir, p.alpha, p.eps);
      rec.deriv_z = d.norm();
      rec.limit_gap_z = (d - single_limit_form(z_next, z, s_ref, dir)).norm();
    }

    y = std::move(y_next);
    z = std::move(z_next);
    x = std::move(x_next);
    rec.t_reference = (nd - x.trace()) / nd;
    if (!std::isfinite(rec.t_reference) || !std::isfinite(z.norm()))
      throw ReferenceDivergence("reference iteration diverged at k = " +
                                std::to_string(k));

    bool approx_failed = false;
    try {
      approx = step(approx, cfg);
    } catch (const DivergenceError &) {
      approx_failed = true;
    }
    if (approx_failed) {
      flow.status = RunStatus::diverged;
      flow.bifurcated = true;
      flow.bifurcation_step = k;
      break;
    }

    rec.t_approx = approx.t;
    rec.dy = (to_dense(approx.y) - y).norm();
    rec.dz = (to_dense(approx.z) - z).norm();
    rec.dx = (to_dense(approx.x) - x).norm();
    rec.z_norm = z.norm();
    flow.records.push_back(rec);

    if (!flow.bifurcated && flow.records.size() > opts.window) {
      const ErrorFlowRecord &back =
          flow.records[flow.records.size() - 1 - opts.window];
      const double rel_now = rec.dz / rec.z_norm;
      const double rel_then = back.dz / back.z_norm;
      if (rel_then > 0.0 && rel_now > opts.floor &&
          rel_now > opts.growth * rel_then) {
        flow.bifurcated = true;
        flow.bifurcation_step = k;
      }
    }

    if (diverging(approx.history, cfg)) {
      flow.status = RunStatus::diverged;
      flow.bifurcated = true;
      if (!flow.bifurcation_step)
        flow.bifurcation_step = k;
      break;
    }
    const bool approx_done = std::abs(approx.t) < cfg.convergence_tol;
    const bool ref_done = std::abs(rec.t_reference) < cfg.convergence_tol;
    if (approx_done)
      flow.status = RunStatus::converged;
    if (approx_done && ref_done)
      break;
  }
  return flow;
}

} // namespace spamm::frechet
