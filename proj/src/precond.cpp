#include "spamm/precond.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spamm/error.hpp"
#include "spamm/spamm.hpp"

namespace spamm::precond {

ShiftedMatrix tikhonov_shift(const HierMatrix &s, double mu) {
  if (!(mu >= 0.0))
    throw InvalidArgument("tikhonov_shift: mu must be nonnegative");
  return {s, mu, mu == 0.0 ? s : scale_shift(s, 1.0, mu)};
}

double shifted_condition(double s_min, double s_max, double mu) {
  if (!(s_min >= 0.0) || s_max < s_min)
    throw InvalidArgument("shifted_condition: need 0 <= s_min <= s_max");
  const double den = std::sqrt(s_min * s_min + mu * mu);
  if (den == 0.0)
    throw InvalidArgument("shifted_condition: zero denominator");
  return std::sqrt(s_max * s_max + mu * mu) / den;
}

double exact_shifted_condition(double s_min, double s_max, double mu) {
  if (!(s_min >= 0.0) || s_max < s_min)
    throw InvalidArgument("exact_shifted_condition: need 0 <= s_min <= s_max");
  if (s_min + mu == 0.0)
    throw InvalidArgument("exact_shifted_condition: zero denominator");
  return (s_max + mu) / (s_min + mu);
}

Slice build_slice(const HierMatrix &s, double mu, double tau0, double tau_s,
                  const IterationConfig &cfg) {
  if (cfg.mode != Channel::dual)
    throw InvalidArgument("build_slice: slices are built with the dual instance");
  IterationConfig c = cfg;
  c.tau = tau0;
  c.tau_s = tau_s;
  const ShiftedMatrix shifted = tikhonov_shift(s, mu);
  IterationResult r = run(shifted.realized, c);
  if (r.status == RunStatus::diverged)
    throw DivergenceError("build_slice: iteration diverged (mu = " +
                              std::to_string(mu) +
                              ", tau0 = " + std::to_string(tau0) + ")",
                          r.history);
  Slice slice;
  slice.z_factor = std::move(r.inv_sqrt);
  slice.tau0 = tau0;
  slice.mu = mu;
  slice.iterations = r.iterations;
  slice.final_trace_error = r.history.back().t;
  slice.status = r.status;
  return slice;
}

HierMatrix residual(const HierMatrix &s, const ProductRepresentation &rep,
                    double mu_next, double tau_next) {
  HierMatrix m = tikhonov_shift(s, mu_next).realized;
  for (const Slice &slice : rep.slices) {
    if (!same_shape(slice.z_factor, s))
      throw ShapeError("residual: slice shape differs from matrix");
    const HierMatrix right = multiply(m, slice.z_factor, tau_next).product;
    m = multiply(transpose(slice.z_factor), right, tau_next).product;
  }
  return m;
}

ProductRepresentation extend(const ProductRepresentation &rep,
                             const HierMatrix &s, double mu_next, double tau0,
                             double tau_next, const IterationConfig &cfg) {
  if (!rep.empty() && !(mu_next < rep.slices.back().mu))
    throw InvalidArgument("extend: mu must strictly decrease (got " +
                          std::to_string(mu_next) + " after " +
                          std::to_string(rep.slices.back().mu) + ")");
  if (!(mu_next >= 0.0))
    throw InvalidArgument("extend: mu must be nonnegative");
  const HierMatrix r = residual(s, rep, mu_next, tau_next);
  // The residual already carries the shift.
  const double tau_s = cfg.tau_s ? std::min(*cfg.tau_s, tau0) : 0.01 * tau0;
  Slice slice;
  try {
    slice = build_slice(r, 0.0, tau0, tau_s, cfg);
  } catch (const DivergenceError &e) {
    throw DivergenceError("extend: slice " + std::to_string(rep.slices.size()) +
                              " diverged (mu = " + std::to_string(mu_next) +
                              ", tau0 = " + std::to_string(tau0) + ")",
                          e.history());
  }
  slice.mu = mu_next;
  slice.tau_apply = tau_next;
  ProductRepresentation out = rep;
  out.slices.push_back(std::move(slice));
  return out;
}

HierMatrix apply(const ProductRepresentation &rep, const HierMatrix &m,
                 double tau_apply) {
  HierMatrix out = m;
  for (const Slice &slice : rep.slices)
    out = multiply(transpose(slice.z_factor), out, tau_apply).product;
  return out;
}

HierMatrix riley_correction(const Slice &slice, double mu, int order,
                            double tau) {
  if (order < 0 || order > 2)
    throw InvalidArgument("riley_correction: order must be 0, 1 or 2");
  const HierMatrix &z = slice.z_factor;
  if (order == 0 || mu == 0.0)
    return z;
  const HierMatrix inv = multiply(z, z, tau).product;
  HierMatrix series = scale_shift(inv, mu / 2.0, 1.0);
  if (order == 2) {
    const HierMatrix inv2 = multiply(inv, inv, tau).product;
    series = add(series, inv2, 3.0 * mu * mu / 8.0);
  }
  return multiply(z, series, tau).product;
}

double congruence_check(const ProductRepresentation &rep, const HierMatrix &s,
                        double tau) {
  const HierMatrix r = residual(s, rep, 0.0, tau);
  const HierMatrix diff = scale_shift(r, 1.0, -1.0);
  return diff.norm() / std::sqrt(static_cast<double>(s.logical_dim()));
}

DenseMatrix dense_congruence(const ProductRepresentation &rep,
                             const DenseMatrix &s) {
  DenseMatrix m = s;
  for (const Slice &slice : rep.slices) {
    const DenseMatrix z = to_dense(slice.z_factor);
    m = z.transpose() * m * z;
  }
  return m;
}

} // namespace spamm::precond
