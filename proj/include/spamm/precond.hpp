#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "spamm/qtree.hpp"
#include "spamm/sqrt_iter.hpp"

namespace spamm::precond {

/// s + mu I, keeping the unshifted base.
struct ShiftedMatrix {
  HierMatrix base;
  double mu = 0.0;
  HierMatrix realized;
};

ShiftedMatrix tikhonov_shift(const HierMatrix &s, double mu);

/// sqrt(s_max^2 + mu^2) / sqrt(s_min^2 + mu^2): the regularized condition
/// estimate in its published form.
double shifted_condition(double s_min, double s_max, double mu);

/// (s_max + mu) / (s_min + mu): the actual condition number of s + mu I for
/// symmetric positive semidefinite s.
double exact_shifted_condition(double s_min, double s_max, double mu);

/// One regularized inverse-factor slice, z ~ (r + mu I)^{-1/2} for the
/// matrix r it was built from.
struct Slice {
  HierMatrix z_factor;
  double tau0 = 0.0;
  double mu = 0.0;
  /// Threshold used when this slice is applied inside the representation.
  double tau_apply = 0.0;
  std::size_t iterations = 0;
  double final_trace_error = 0.0;
  RunStatus status = RunStatus::max_iter;
};

/// Inverse factor as a telescoping product of slices, coarsest first.
///
/// With Z = z_0 z_1 ... z_m the factor satisfies Z^T s Z ~ I. Each z_i is
/// built from the residual z_{i-1}^T ... z_0^T (s + mu_i I) z_0 ... z_{i-1},
/// so the left-acting form Z^T = z_m^T ... z_0^T lists the newest slice
/// leftmost.
struct ProductRepresentation {
  std::vector<Slice> slices;
  std::string target;

  bool empty() const noexcept { return slices.empty(); }
};

/// Builds a slice from s + mu I with the dual instance at (tau0, tau_s).
/// Throws DivergenceError if the iteration diverges and InvalidArgument if
/// cfg asks for the single instance.
Slice build_slice(const HierMatrix &s, double mu, double tau0, double tau_s,
                  const IterationConfig &cfg);

/// Z^T (x)_tau (s + mu I) (x)_tau Z, evaluated as nested congruences
/// z_i^T (x) M (x) z_i from the oldest slice outwards.
HierMatrix residual(const HierMatrix &s, const ProductRepresentation &rep,
                    double mu_next, double tau_next);

/// Appends a slice built from residual(s, rep, mu_next, tau_next). mu values
/// must strictly decrease.
ProductRepresentation extend(const ProductRepresentation &rep,
                             const HierMatrix &s, double mu_next, double tau0,
                             double tau_next, const IterationConfig &cfg);

/// Z^T m = z_m^T (x) ... (x) z_0^T (x) m.
HierMatrix apply(const ProductRepresentation &rep, const HierMatrix &m,
                 double tau_apply);

/// Riley's series s^{-1/2} ~ s_mu^{-1/2} (I + mu/2 s_mu^{-1}
/// + 3 mu^2/8 s_mu^{-2}) truncated at `order` (0, 1 or 2), with
/// s_mu^{-1} = z (x)_tau z.
HierMatrix riley_correction(const Slice &slice, double mu, int order,
                            double tau);

/// ||Z^T (x)_tau s (x)_tau Z - I||_F / sqrt(n).
double congruence_check(const ProductRepresentation &rep, const HierMatrix &s,
                        double tau);

/// Dense Z^T s Z with exact arithmetic, for spectral diagnostics.
DenseMatrix dense_congruence(const ProductRepresentation &rep,
                             const DenseMatrix &s);

} // namespace spamm::precond
