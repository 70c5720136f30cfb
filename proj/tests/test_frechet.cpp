#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "spamm/frechet.hpp"
#include "spamm/io.hpp"
#include "support/oracles.hpp"

using namespace spamm;
using namespace spamm::frechet;
using oracle::DenseMatrix;

namespace {

// Dual iterate state near the middle of a run on a well-conditioned matrix,
// produced with plain dense arithmetic.
struct Pair {
  DenseMatrix y, z;
};

Pair mid_run_state(std::size_t n, std::mt19937_64 &rng, int steps) {
  const DenseMatrix s = oracle::spd_with_condition(n, 20.0, rng) * 0.9;
  DenseMatrix y = s, z = DenseMatrix::Identity(n, n);
  for (int k = 0; k < steps; ++k) {
    const DenseMatrix h = 1.5 * DenseMatrix::Identity(n, n) - 0.5 * y * z;
    y = h * y;
    z = z * h;
  }
  return {y, z};
}

// x_k = h[stab(y z)] y z h[stab(y z)] written out independently.
DenseMatrix dual_x(const DenseMatrix &y, const DenseMatrix &z, double alpha,
                   double eps) {
  const auto n = y.rows();
  const DenseMatrix xs =
      (1.0 - 2.0 * eps) * (y * z) + eps * DenseMatrix::Identity(n, n);
  const DenseMatrix h = std::sqrt(alpha) / 2.0 *
                        (3.0 * DenseMatrix::Identity(n, n) - alpha * xs);
  return h * y * z * h;
}

DenseMatrix single_x(const DenseMatrix &z, const DenseMatrix &s, double alpha,
                     double eps) {
  const auto n = z.rows();
  const DenseMatrix xs = (1.0 - 2.0 * eps) * (z.transpose() * s * z) +
                         eps * DenseMatrix::Identity(n, n);
  const DenseMatrix h = std::sqrt(alpha) / 2.0 *
                        (3.0 * DenseMatrix::Identity(n, n) - alpha * xs);
  const DenseMatrix zk = z * h;
  return zk.transpose() * s * zk;
}

double rel(const DenseMatrix &a, const DenseMatrix &b) {
  return oracle::frob(a - b) / oracle::frob(b);
}

} // namespace

TEST_CASE("h_prime and ns_map") {
  CHECK(h_prime(1.0) == -0.5);
  CHECK(h_prime(4.0) == -4.0);
  CHECK(h_prime(4.0, 0.25) == -2.0);
  DenseMatrix x = DenseMatrix::Identity(3, 3) * 0.1;
  const DenseMatrix h = ns_map(x, 2.85);
  CHECK(h(1, 1) == doctest::Approx(std::sqrt(2.85) / 2 * (3 - 0.285)).epsilon(1e-15));
  CHECK(h(0, 1) == 0.0);
}

TEST_CASE("dual_map and single_map match written-out recursions") {
  std::mt19937_64 rng(31);
  const Pair p = mid_run_state(8, rng, 2);
  const DualIterate it = dual_map(p.y, p.z, 1.7, 0.05);
  CHECK(rel(it.x, dual_x(p.y, p.z, 1.7, 0.05)) <= 1e-13);
  CHECK(rel(it.x, it.y * it.z) <= 1e-15);

  const DenseMatrix s = oracle::spd_with_condition(8, 10.0, rng);
  const SingleIterate si = single_map(DenseMatrix::Identity(8, 8), s, 1.3, 0.02);
  CHECK(rel(si.x, single_x(DenseMatrix::Identity(8, 8), s, 1.3, 0.02)) <= 1e-13);
  CHECK_THROWS_AS(dual_map(p.y, DenseMatrix::Identity(7, 7), 1.0), ShapeError);
}

TEST_CASE("directional derivatives agree with central differences") {
  std::mt19937_64 rng(32);
  const double h = 1e-6;
  for (int trial = 0; trial < 4; ++trial) {
    const Pair p = mid_run_state(8, rng, trial);
    const double alpha = 1.0 + 0.5 * trial;
    const double eps = trial % 2 ? 0.07 : 0.0;
    const DenseMatrix raw = oracle::random_matrix(8, rng);

    const Direction dz(raw, Perturbed::z);
    const DenseMatrix fd_z =
        (dual_x(p.y, p.z + h * dz.unit(), alpha, eps) -
         dual_x(p.y, p.z - h * dz.unit(), alpha, eps)) /
        (2 * h);
    CHECK(rel(x_wrt_z(p.y, p.z, dz, alpha, eps), fd_z) <= 1e-5);

    const Direction dy(raw, Perturbed::y);
    const DenseMatrix fd_y =
        (dual_x(p.y + h * dy.unit(), p.z, alpha, eps) -
         dual_x(p.y - h * dy.unit(), p.z, alpha, eps)) /
        (2 * h);
    CHECK(rel(x_wrt_y(p.y, p.z, dy, alpha, eps), fd_y) <= 1e-5);

    const DenseMatrix s = oracle::spd_with_condition(8, 30.0, rng);
    const DenseMatrix fd_s =
        (single_x(p.z + h * dz.unit(), s, alpha, eps) -
         single_x(p.z - h * dz.unit(), s, alpha, eps)) /
        (2 * h);
    CHECK(rel(x_wrt_z_single(p.z, s, dz, alpha, eps), fd_s) <= 1e-5);
  }
}

TEST_CASE("derivatives are linear in the direction") {
  std::mt19937_64 rng(33);
  const Pair p = mid_run_state(6, rng, 1);
  const DenseMatrix a = oracle::random_matrix(6, rng);
  const DenseMatrix b = oracle::random_matrix(6, rng);
  // Direction normalizes, so compare unnormalized combinations by scaling.
  auto lin = [&](const DenseMatrix &d) -> DenseMatrix {
    return x_wrt_z(p.y, p.z, Direction(d, Perturbed::z), 1.4) * d.norm();
  };
  CHECK(rel(lin(a + 2.0 * b), lin(a) + 2.0 * lin(b)) <= 1e-12);
  CHECK(rel(lin(-3.0 * a), -3.0 * lin(a)) <= 1e-12);
}

TEST_CASE("direction validation") {
  CHECK_THROWS_AS(Direction(DenseMatrix::Zero(3, 3), Perturbed::y),
                  InvalidArgument);
  CHECK_THROWS_AS(Direction(DenseMatrix::Zero(3, 2), Perturbed::y), ShapeError);
  const Direction d(DenseMatrix::Identity(4, 4), Perturbed::y);
  CHECK(d.unit().norm() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(x_wrt_z(DenseMatrix::Identity(4, 4), DenseMatrix::Identity(4, 4),
                          d, 1.0),
                  InvalidArgument);
}

TEST_CASE("limit forms approach the derivative near the fixed point") {
  std::mt19937_64 rng(34);
  const DenseMatrix raw = oracle::random_matrix(8, rng);
  double last_z = 1e300, last_y = 1e300;
  for (int steps : {2, 6, 12}) {
    std::mt19937_64 r2(35);
    const Pair p = mid_run_state(8, r2, steps);
    const DualIterate it = dual_map(p.y, p.z, 1.0);
    const Direction dz(raw, Perturbed::z), dy(raw, Perturbed::y);
    const double gz =
        (x_wrt_z(p.y, p.z, dz, 1.0) - limit_forms(it.y, p.y, it.z, p.z, dz)).norm();
    const double gy =
        (x_wrt_y(p.y, p.z, dy, 1.0) - limit_forms(it.y, p.y, it.z, p.z, dy)).norm();
    CHECK(gz < last_z);
    CHECK(gy < last_y);
    last_z = gz;
    last_y = gy;
  }
  CHECK(last_z <= 1e-6);
  CHECK(last_y <= 1e-6);
}

TEST_CASE("displacement_bound arithmetic") {
  CHECK(displacement_bound(1, 1, 1, 1, 1, 0.0, 10, 1.0) == 2.5);
  CHECK(displacement_bound(2, 3, 4, 0, 0, 1e-3, 10, 1.0) ==
        doctest::Approx(2 * 1e-3 * 100 * 3).epsilon(1e-15));
  CHECK(displacement_bound(1, 1, 1, 0, 0, 0.0, 10, 2.0) == 0.0);
}

TEST_CASE("exact flow has no displacement") {
  io::SyntheticSpec spec;
  spec.n = 48;
  spec.decay_rate = 0.5;
  spec.diagonal_shift = 0.2;
  IterationConfig c;
  c.block_size = 8;
  c.tau = 0.0;
  for (Channel mode : {Channel::dual, Channel::single}) {
    c.mode = mode;
    const ErrorFlow f = track_error_flow(build(io::gen_decay(spec), 8), c, 40);
    CHECK(f.status == RunStatus::converged);
    CHECK_FALSE(f.bifurcated);
    for (const auto &r : f.records) {
      CHECK(r.dz <= 1e-12 * std::max(1.0, r.z_norm));
      CHECK(r.dy <= 1e-12 * std::max(1.0, r.z_norm));
      CHECK(std::abs(r.t_approx - r.t_reference) <= 1e-12);
    }
  }
}

TEST_CASE("bound covers the measured displacement") {
  io::SyntheticSpec spec;
  spec.n = 64;
  spec.decay_rate = 0.5;
  spec.diagonal_shift = 0.2;
  IterationConfig c;
  c.block_size = 8;
  c.tau_s = 1e-7;
  c.tau = 1e-5;
  const ErrorFlow f = track_error_flow(build(io::gen_decay(spec), 8), c, 40);
  REQUIRE(f.records.size() > 2);
  for (std::size_t k = 1; k < f.records.size(); ++k) {
    const auto &r = f.records[k];
    // The first-order bound needs room for rounding when dz is tiny.
    CHECK(r.dz <= 1.01 * r.dz_bound + 1e-13 * r.z_norm);
  }
}

TEST_CASE("flow rejects oversized inputs") {
  FlowOptions o;
  o.dense_cap = 16;
  IterationConfig c;
  c.block_size = 8;
  CHECK_THROWS_AS(track_error_flow(HierMatrix::identity(32, 8), c, 5, o),
                  InvalidArgument);
}
