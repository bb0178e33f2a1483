#include <doctest.h>

#include <random>

#include "epiflow/errors.hpp"
#include "epiflow/geometry.hpp"
#include "testing/fixtures.hpp"

using namespace epiflow;

namespace {

// F proportional to [t]x for K = I, R = I, t = (1,0,0).
FundamentalMatrix pure_x_translation_f() {
  Eigen::Matrix3d m;
  m << 0, 0, 0, 0, 0, -1, 0, 1, 0;
  return FundamentalMatrix(m);
}

}  // namespace

TEST_CASE("fundamental_from_pose matches the hand-expanded cross product") {
  RelativePose pose;
  pose.translation = Eigen::Vector3d(1, 0, 0);
  const FundamentalMatrix f =
      fundamental_from_pose(CameraIntrinsics::identity(), CameraIntrinsics::identity(), pose);
  Eigen::Matrix3d expected;
  expected << 0, 0, 0, 0, 0, -1, 0, 1, 0;
  expected /= expected.norm();
  // Up to overall sign.
  const double diff = std::min((f.matrix() - expected).norm(), (f.matrix() + expected).norm());
  CHECK(diff < 1e-15);
}

TEST_CASE("fundamental_from_pose satisfies the epipolar constraint on projections") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto scene = testing::random_scene(rng, 20);
    const FundamentalMatrix f = fundamental_from_pose(scene.ka, scene.kb, scene.pose);
    for (std::size_t i = 0; i < scene.points_a.size(); ++i) {
      const Eigen::Vector3d xa = scene.points_a[i].homogeneous().normalized();
      const Eigen::Vector3d xb = scene.points_b[i].homogeneous().normalized();
      CHECK(std::abs(xb.dot(f.matrix() * xa)) < 1e-9);
    }
    // rank 2: smallest singular value vanishes relative to the largest
    const Eigen::JacobiSVD<Eigen::Matrix3d> svd(f.matrix());
    CHECK(svd.singularValues()(2) / svd.singularValues()(0) < 1e-9);
    CHECK(f.matrix().norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("fundamental_from_pose rejects zero translation") {
  RelativePose pose;  // t = 0
  CHECK_THROWS_AS(
      fundamental_from_pose(CameraIntrinsics::identity(), CameraIntrinsics::identity(), pose),
      ZeroTranslation);
}

TEST_CASE("epipolar_line of the x-translation F") {
  const auto f = pure_x_translation_f();
  const EpipolarLine l = epipolar_line(f, {2, 3});
  // (0,-1,3) up to the unit-Frobenius scale
  CHECK(l.a == doctest::Approx(0.0));
  CHECK(l.b * 3.0 == doctest::Approx(-l.c));
  CHECK(l.normal_norm() > 0.0);
}

TEST_CASE("epipolar_distance examples and degeneracy") {
  const auto f = pure_x_translation_f();
  CHECK(epipolar_distance(f, {2, 3}, {5, 3}) == doctest::Approx(0.0));
  CHECK(epipolar_distance(f, {2, 3}, {5, 4.5}) == doctest::Approx(1.5));
  // The epipole of A is the null direction (1,0,0): no finite pixel reaches
  // it for this F, so use a rank-2 matrix whose epipole sits at pixel (5,3).
  Eigen::Matrix3d me;
  me << 1, 1, -8, 2, -1, -7, 0, 1, -3;
  const FundamentalMatrix fe(me);
  const Eigen::Vector3d at_epipole = fe.matrix() * Eigen::Vector3d(5, 3, 1);
  REQUIRE(at_epipole.norm() < 1e-12);
  CHECK_THROWS_AS(epipolar_distance(fe, {5, 3}, {1, 1}), DegenerateLine);
}

TEST_CASE("epipolar_distance is invariant to the stored scale of F") {
  // FundamentalMatrix normalizes, so scaling the input must not matter.
  Eigen::Matrix3d m;
  m << 0, 0, 0, 0, 0, -1, 0, 1, 0;
  for (const double lambda : {-3.0, 0.01, 7.0}) {
    const FundamentalMatrix f(lambda * m);
    CHECK(epipolar_distance(f, {2, 3}, {5, 4.5}) == doctest::Approx(1.5));
    CHECK(sed(f, {2, 3}, {5, 4.5}) == doctest::Approx(3.0));
  }
}

TEST_CASE("sed examples and symmetry") {
  const auto f = pure_x_translation_f();
  CHECK(sed(f, {2, 3}, {5, 3}) == doctest::Approx(0.0));
  CHECK(sed(f, {2, 3}, {5, 4.5}) == doctest::Approx(3.0));
  CHECK(sed(f.transposed(), {5, 4.5}, {2, 3}) == doctest::Approx(3.0));

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> coord(0.0, 100.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto scene = testing::random_scene(rng, 1);
    const FundamentalMatrix fr = fundamental_from_pose(scene.ka, scene.kb, scene.pose);
    const Eigen::Vector2d x(coord(rng), coord(rng));
    const Eigen::Vector2d xp(coord(rng), coord(rng));
    const auto fwd = sed_value_and_gradient(fr, x, xp);
    const auto bwd = sed_value_and_gradient(fr.transposed(), xp, x);
    REQUIRE(fwd.has_value());
    REQUIRE(bwd.has_value());
    CHECK(fwd->value == doctest::Approx(bwd->value).epsilon(1e-12));
  }
}

TEST_CASE("sed_gradient: hand case, zero at minimum, finite differences") {
  const auto f = pure_x_translation_f();

  // First term's gradient is (0, +1) at xp above the line.
  const EpipolarLine l = epipolar_line(f, {2, 3});
  const double residual = l.a * 5.0 + l.b * 4.5 + l.c;
  const Eigen::Vector2d first_term_grad =
      (residual > 0 ? 1.0 : -1.0) * Eigen::Vector2d(l.a, l.b) / l.normal_norm();
  CHECK(first_term_grad.x() == doctest::Approx(0.0));
  CHECK(first_term_grad.y() == doctest::Approx(1.0));

  // Point on both epipolar lines: subgradient 0.
  CHECK(sed_gradient(f, {2, 3}, {5, 3}).norm() == doctest::Approx(0.0));

  // Central differences on random nondegenerate configurations.
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> coord(5.0, 95.0);
  const double h = 1e-4;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto scene = testing::random_scene(rng, 1);
    const FundamentalMatrix fr = fundamental_from_pose(scene.ka, scene.kb, scene.pose);
    const Eigen::Vector2d x(coord(rng), coord(rng));
    const Eigen::Vector2d xp(coord(rng), coord(rng));
    const auto eval = sed_value_and_gradient(fr, x, xp);
    if (!eval || eval->value < 1e-3) continue;  // stay off the |.| kink
    for (int c = 0; c < 2; ++c) {
      Eigen::Vector2d plus = xp, minus = xp;
      plus[c] += h;
      minus[c] -= h;
      const double numeric = (sed(fr, x, plus) - sed(fr, x, minus)) / (2.0 * h);
      worst = std::max(worst,
                       std::abs(eval->gradient[c] - numeric) / std::max(std::abs(numeric), 1e-6));
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("pose validation rejects non-rotations") {
  RelativePose pose;
  pose.rotation(0, 0) = 2.0;
  pose.translation = Eigen::Vector3d(1, 0, 0);
  CHECK_THROWS_AS(
      fundamental_from_pose(CameraIntrinsics::identity(), CameraIntrinsics::identity(), pose),
      ValidationError);
}

TEST_CASE("intrinsics matrix inverse is exact") {
  const CameraIntrinsics k{120.0, 95.0, 31.5, 24.0, 2.5};
  CHECK((k.matrix() * k.inverse_matrix() - Eigen::Matrix3d::Identity()).norm() < 1e-12);
}
