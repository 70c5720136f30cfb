#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "spamm/error.hpp"
#include "spamm/io.hpp"
#include "spamm/precond.hpp"
#include "support/oracles.hpp"

using namespace spamm;
using namespace spamm::precond;
using oracle::DenseMatrix;

namespace {

IterationConfig slice_config(std::size_t nb) {
  IterationConfig c;
  c.block_size = nb;
  return c;
}

DenseMatrix graded_instance(std::size_t n, double kappa) {
  io::SyntheticSpec spec;
  spec.n = n;
  spec.decay_rate = 1.0;
  spec.target_condition = kappa;
  spec.surgery = io::Surgery::graded;
  spec.seed = 3;
  DenseMatrix s = io::gen_decay(spec);
  return s / oracle::eigenvalues(s).maxCoeff();
}

} // namespace

TEST_CASE("tikhonov_shift") {
  DenseMatrix d = DenseMatrix::Zero(3, 3);
  d(0, 0) = 2.0;
  const ShiftedMatrix m = tikhonov_shift(build(d, 2), 0.5);
  CHECK(m.mu == 0.5);
  CHECK(to_dense(m.base) == d);
  CHECK(to_dense(m.realized) == d + 0.5 * DenseMatrix::Identity(3, 3));
  CHECK(to_dense(tikhonov_shift(build(d, 2), 0.0).realized) == d);
  CHECK_THROWS_AS(tikhonov_shift(build(d, 2), -1.0), InvalidArgument);
}

TEST_CASE("condition estimates") {
  CHECK(shifted_condition(0.0, 1.0, 0.1) ==
        doctest::Approx(std::sqrt(1.01) / 0.1).epsilon(1e-15));
  CHECK(shifted_condition(0.0, 1.0, 0.1) == doctest::Approx(10.0499).epsilon(1e-5));
  CHECK(exact_shifted_condition(0.0, 1.0, 0.1) == doctest::Approx(11.0));
  CHECK(shifted_condition(1e-3, 1.0, 0.0) == doctest::Approx(1000.0));
  CHECK(exact_shifted_condition(1e-3, 1.0, 0.0) == doctest::Approx(1000.0));
  // Both tend to the unshifted condition as mu -> 0 and to 1 as mu grows.
  CHECK(shifted_condition(1e-5, 1.0, 1e-12) == doctest::Approx(1e5).epsilon(1e-6));
  CHECK(exact_shifted_condition(1e-5, 1.0, 1e-12) ==
        doctest::Approx(1e5).epsilon(1e-6));
  CHECK(shifted_condition(1e-5, 1.0, 1e6) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(exact_shifted_condition(1e-5, 1.0, 1e6) ==
        doctest::Approx(1.0).epsilon(1e-5));
  double last_a = 1e300, last_b = 1e300;
  for (double mu : {1e-4, 1e-3, 1e-2, 1e-1, 1.0}) {
    CHECK(shifted_condition(1e-5, 1.0, mu) < last_a);
    CHECK(exact_shifted_condition(1e-5, 1.0, mu) < last_b);
    last_a = shifted_condition(1e-5, 1.0, mu);
    last_b = exact_shifted_condition(1e-5, 1.0, mu);
  }
  CHECK_THROWS_AS(shifted_condition(0.0, 1.0, 0.0), InvalidArgument);
  CHECK_THROWS_AS(exact_shifted_condition(2.0, 1.0, 0.1), InvalidArgument);

  // Against eigenvalues of a realized shift.
  std::mt19937_64 rng(41);
  const DenseMatrix s = oracle::spd_with_condition(24, 1e4, rng);
  const DenseMatrix shifted = to_dense(tikhonov_shift(build(s, 4), 1e-2).realized);
  const Eigen::VectorXd l = oracle::eigenvalues(s);
  CHECK(oracle::condition(shifted) ==
        doctest::Approx(exact_shifted_condition(l.minCoeff(), l.maxCoeff(), 1e-2))
            .epsilon(1e-8));
}

TEST_CASE("slice of the identity") {
  const Slice sl = build_slice(HierMatrix::identity(16, 4), 0.1, 0.0, 0.0,
                               slice_config(4));
  CHECK(sl.status == RunStatus::converged);
  CHECK(sl.mu == 0.1);
  const DenseMatrix z = to_dense(sl.z_factor);
  CHECK(oracle::frob(z - DenseMatrix::Identity(16, 16) / std::sqrt(1.1)) <= 1e-9);

  IterationConfig single = slice_config(4);
  single.mode = Channel::single;
  CHECK_THROWS_AS(build_slice(HierMatrix::identity(16, 4), 0.1, 0.0, 0.0, single),
                  InvalidArgument);
}

TEST_CASE("slices, residual and apply against dense arithmetic") {
  const DenseMatrix s = graded_instance(64, 1e4);
  const HierMatrix hs = build(s, 8);
  const IterationConfig cfg = slice_config(8);

  ProductRepresentation rep;
  rep = extend(rep, hs, 1e-1, 0.0, 0.0, cfg);
  rep = extend(rep, hs, 1e-3, 0.0, 0.0, cfg);
  REQUIRE(rep.slices.size() == 2);
  CHECK(rep.slices[0].status == RunStatus::converged);
  CHECK(rep.slices[1].status == RunStatus::converged);

  const DenseMatrix z0 = to_dense(rep.slices[0].z_factor);
  const DenseMatrix z1 = to_dense(rep.slices[1].z_factor);
  // The first slice is (s + mu_0 I)^{-1/2}.
  const DenseMatrix want0 =
      oracle::inv_sqrt(s + 1e-1 * DenseMatrix::Identity(64, 64));
  CHECK(oracle::frob(z0 - want0) <= 1e-7 * oracle::frob(want0));

  // Nested congruence, newest slice outermost.
  const DenseMatrix shifted = s + 1e-4 * DenseMatrix::Identity(64, 64);
  const DenseMatrix want_r = z1.transpose() * z0.transpose() * shifted * z0 * z1;
  const DenseMatrix got_r = to_dense(residual(hs, rep, 1e-4, 0.0));
  CHECK(oracle::frob(got_r - want_r) <= 1e-10 * oracle::frob(want_r));
  CHECK(oracle::frob(dense_congruence(rep, shifted) - want_r) <=
        1e-10 * oracle::frob(want_r));

  std::mt19937_64 rng(42);
  const DenseMatrix m = oracle::random_matrix(64, rng);
  const DenseMatrix want_a = z1.transpose() * z0.transpose() * m;
  CHECK(oracle::frob(to_dense(apply(rep, build(m, 8), 0.0)) - want_a) <=
        1e-12 * oracle::frob(want_a));

  // Each slice brings the residual closer to the identity.
  const double c1 = oracle::condition(dense_congruence(
      ProductRepresentation{{rep.slices[0]}, ""}, s));
  const double c2 = oracle::condition(dense_congruence(rep, s));
  CHECK(c1 < oracle::condition(s));
  CHECK(c2 < c1);
  CHECK(congruence_check(rep, hs, 0.0) < 1.0);
}

TEST_CASE("extend rejects non-decreasing shifts") {
  const HierMatrix i = HierMatrix::identity(8, 4);
  ProductRepresentation rep = extend({}, i, 0.1, 0.0, 0.0, slice_config(4));
  CHECK_THROWS_AS(extend(rep, i, 0.1, 0.0, 0.0, slice_config(4)), InvalidArgument);
  CHECK_THROWS_AS(extend(rep, i, 0.2, 0.0, 0.0, slice_config(4)), InvalidArgument);
  CHECK_THROWS_AS(extend(rep, i, -0.1, 0.0, 0.0, slice_config(4)), InvalidArgument);
  CHECK_NOTHROW(extend(rep, i, 0.05, 0.0, 0.0, slice_config(4)));
}

TEST_CASE("extend derives the sensitive threshold from tau0") {
  IterationConfig c = slice_config(8);
  c.tau = 1e-8;
  const HierMatrix hs = build(graded_instance(64, 1e3), 8);
  ProductRepresentation rep;
  CHECK_NOTHROW(rep = extend(rep, hs, 0.1, 1e-3, 1e-3, c));
  REQUIRE(rep.slices.size() == 1);
  CHECK(rep.slices[0].tau0 == 1e-3);
  CHECK(rep.slices[0].tau_apply == 1e-3);
}

TEST_CASE("riley correction follows the scalar series") {
  // For s = lambda I the corrected factor is scalar.
  for (double lambda : {0.2, 0.5, 1.0}) {
    const double mu = 0.05;
    const HierMatrix s = scale_shift(HierMatrix::zeros(8, 4), 0.0, lambda);
    const Slice sl = build_slice(s, mu, 0.0, 0.0, slice_config(4));
    const double zs = 1.0 / std::sqrt(lambda + mu);
    const double q = mu / (lambda + mu);
    const double want[3] = {zs, zs * (1 + q / 2), zs * (1 + q / 2 + 3 * q * q / 8)};
    for (int order = 0; order <= 2; ++order) {
      const DenseMatrix r = to_dense(riley_correction(sl, mu, order, 0.0));
      CHECK(r(3, 3) == doctest::Approx(want[order]).epsilon(1e-9));
      CHECK(r(0, 1) == 0.0);
    }
    // Higher orders get closer to lambda^{-1/2}.
    const double exact = 1.0 / std::sqrt(lambda);
    CHECK(std::abs(want[2] - exact) < std::abs(want[1] - exact));
    CHECK(std::abs(want[1] - exact) < std::abs(want[0] - exact));
    CHECK_THROWS_AS(riley_correction(sl, mu, 3, 0.0), InvalidArgument);
  }
}

TEST_CASE("congruence_check of an exact factor") {
  std::mt19937_64 rng(43);
  const DenseMatrix s = oracle::spd_with_condition(32, 50.0, rng);
  ProductRepresentation rep = extend({}, build(s, 8), 0.0, 0.0, 0.0, slice_config(8));
  CHECK(congruence_check(rep, build(s, 8), 0.0) <= 1e-9);
}
