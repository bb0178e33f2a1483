#include <doctest.h>

#include <random>

#include "epiflow/errors.hpp"
#include "epiflow/metrics.hpp"
#include "epiflow/model_fit.hpp"
#include "testing/fixtures.hpp"

using namespace epiflow;

namespace {

Eigen::Matrix3d sample_homography(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> small(-0.15, 0.15);
  std::uniform_real_distribution<double> shift(-8.0, 8.0);
  Eigen::Matrix3d h = Eigen::Matrix3d::Identity();
  h(0, 0) += small(rng);
  h(0, 1) += small(rng);
  h(1, 0) += small(rng);
  h(1, 1) += small(rng);
  h(0, 2) = shift(rng);
  h(1, 2) = shift(rng);
  h(2, 0) = small(rng) * 1e-3;
  h(2, 1) = small(rng) * 1e-3;
  return h;
}

CorrespondenceSet exact_h_matches(std::mt19937_64& rng, const Eigen::Matrix3d& h, int n) {
  std::uniform_real_distribution<double> coord(0.0, 100.0);
  CorrespondenceSet set;
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d a(coord(rng), coord(rng));
    set.a.push_back(a);
    set.b.push_back((h * a.homogeneous()).hnormalized());
  }
  return set;
}

}  // namespace

TEST_CASE("homography normalization conventions") {
  Eigen::Matrix3d m = 3.0 * Eigen::Matrix3d::Identity();
  const Homography h(m);
  CHECK(h.matrix()(2, 2) == doctest::Approx(1.0));
  CHECK_THROWS_AS(Homography(Eigen::Matrix3d::Zero()), ValidationError);
}

TEST_CASE("ransac homography recovers an exact model") {
  std::mt19937_64 rng(101);
  const Eigen::Matrix3d gt = sample_homography(rng);
  const CorrespondenceSet matches = exact_h_matches(rng, gt, 100);
  RansacConfig cfg;
  cfg.seed = 1;
  const HomographyFit fit = fit_homography_ransac(matches.a, matches.b, cfg);
  CHECK(fit.inlier_count == 100);
  const auto [err, correct] = corner_correctness(fit.h, Homography(gt), 100, 100, 5.0);
  CHECK(err < 1e-6);
  CHECK(correct);
}

TEST_CASE("ransac homography: 70% inliers with noise, corner error < 0.5 px") {
  std::mt19937_64 rng(103);
  const Eigen::Matrix3d gt = sample_homography(rng);
  CorrespondenceSet matches = exact_h_matches(rng, gt, 70);
  std::normal_distribution<double> noise(0.0, 0.5);
  for (auto& b : matches.b) b += Eigen::Vector2d(noise(rng), noise(rng));
  std::uniform_real_distribution<double> uniform(0.0, 100.0);
  for (int i = 0; i < 30; ++i) {
    matches.a.push_back({uniform(rng), uniform(rng)});
    matches.b.push_back({uniform(rng), uniform(rng)});
  }
  RansacConfig cfg;
  cfg.threshold = 3.0;
  cfg.seed = 7;
  const HomographyFit fit = fit_homography_ransac(matches.a, matches.b, cfg);
  const auto [err, correct] = corner_correctness(fit.h, Homography(gt), 100, 100, 5.0);
  CHECK(err < 0.5);
  // Recall over the 70 true inliers.
  std::size_t recalled = 0;
  for (int i = 0; i < 70; ++i) recalled += fit.inliers[static_cast<std::size_t>(i)];
  CHECK(recalled >= 66);  // >= 0.95 * 70
}

TEST_CASE("ransac homography is deterministic and errors are typed") {
  std::mt19937_64 rng(107);
  const Eigen::Matrix3d gt = sample_homography(rng);
  CorrespondenceSet matches = exact_h_matches(rng, gt, 40);
  std::uniform_real_distribution<double> uniform(0.0, 100.0);
  for (int i = 0; i < 20; ++i) {
    matches.a.push_back({uniform(rng), uniform(rng)});
    matches.b.push_back({uniform(rng), uniform(rng)});
  }
  RansacConfig cfg;
  cfg.seed = 11;
  const HomographyFit first = fit_homography_ransac(matches.a, matches.b, cfg);
  const HomographyFit second = fit_homography_ransac(matches.a, matches.b, cfg);
  CHECK((first.h.matrix() - second.h.matrix()).norm() == 0.0);
  CHECK(first.inliers == second.inliers);

  CorrespondenceSet three;
  three.a = {{0, 0}, {1, 0}, {0, 1}};
  three.b = three.a;
  CHECK_THROWS_AS(fit_homography_ransac(three.a, three.b, cfg), InsufficientMatches);
}

TEST_CASE("ransac inlier set is invariant under a similarity reparameterization") {
  std::mt19937_64 rng(109);
  const Eigen::Matrix3d gt = sample_homography(rng);
  CorrespondenceSet matches = exact_h_matches(rng, gt, 50);
  std::normal_distribution<double> noise(0.0, 0.4);
  for (auto& b : matches.b) b += Eigen::Vector2d(noise(rng), noise(rng));
  std::uniform_real_distribution<double> uniform(0.0, 100.0);
  for (int i = 0; i < 25; ++i) {
    matches.a.push_back({uniform(rng), uniform(rng)});
    matches.b.push_back({uniform(rng), uniform(rng)});
  }
  RansacConfig cfg;
  cfg.seed = 13;
  const HomographyFit base = fit_homography_ransac(matches.a, matches.b, cfg);

  // Similarity map on both sides; the symmetric transfer error scales by s,
  // so scale the threshold along with it.
  const double s = 2.0;
  const Eigen::Rotation2Dd rot(0.4);
  CorrespondenceSet mapped;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    mapped.a.push_back(s * (rot * matches.a[i]) + Eigen::Vector2d(10, -20));
    mapped.b.push_back(s * (rot * matches.b[i]) + Eigen::Vector2d(10, -20));
  }
  RansacConfig scaled = cfg;
  scaled.threshold = cfg.threshold * s;
  const HomographyFit remapped = fit_homography_ransac(mapped.a, mapped.b, scaled);
  CHECK(remapped.inliers == base.inliers);
}

TEST_CASE("eight-point recovers F from noiseless correspondences") {
  std::mt19937_64 rng(113);
  for (int trial = 0; trial < 10; ++trial) {
    const auto scene = testing::random_scene(rng, 20);
    const FundamentalMatrix gt = fundamental_from_pose(scene.ka, scene.kb, scene.pose);
    const FundamentalMatrix est = fit_fundamental_8pt(scene.points_a, scene.points_b);
    const double dist = std::min((est.matrix() - gt.matrix()).norm(),
                                 (est.matrix() + gt.matrix()).norm());
    CHECK(dist < 1e-6);
    // Residuals on unit-normalized homogeneous inputs.
    for (std::size_t i = 0; i < scene.points_a.size(); ++i) {
      const Eigen::Vector3d xa = scene.points_a[i].homogeneous().normalized();
      const Eigen::Vector3d xb = scene.points_b[i].homogeneous().normalized();
      CHECK(std::abs(xb.dot(est.matrix() * xa)) < 1e-9);
    }
    // Exact rank 2.
    const Eigen::JacobiSVD<Eigen::Matrix3d> svd(est.matrix());
    CHECK(svd.singularValues()(2) < 1e-15);
  }
}

TEST_CASE("eight-point rejects degenerate inputs") {
  CorrespondenceSet seven;
  for (int i = 0; i < 7; ++i) {
    seven.a.push_back({static_cast<double>(i), 0.0});
    seven.b.push_back({static_cast<double>(i), 1.0});
  }
  CHECK_THROWS_AS(fit_fundamental_8pt(seven.a, seven.b), InsufficientMatches);

  CorrespondenceSet collinear;
  for (int i = 0; i < 8; ++i) {
    collinear.a.push_back({static_cast<double>(i), 2.0 * i + 1.0});
    collinear.b.push_back({static_cast<double>(i) + 3.0, 2.0 * i});
  }
  CHECK_THROWS_AS(fit_fundamental_8pt(collinear.a, collinear.b), DegenerateConfiguration);
}

TEST_CASE("eight-point with mild noise keeps inlier SED small") {
  std::mt19937_64 rng(127);
  const auto scene = testing::random_scene(rng, 60);
  CorrespondenceSet noisy;
  noisy.a = scene.points_a;
  noisy.b = scene.points_b;
  std::normal_distribution<double> noise(0.0, 0.2);
  for (auto& b : noisy.b) b += Eigen::Vector2d(noise(rng), noise(rng));
  const FundamentalMatrix est = fit_fundamental_8pt(noisy.a, noisy.b);
  double mean_sed = 0.0;
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    mean_sed += sed(est, noisy.a[i], noisy.b[i]);
  }
  mean_sed /= static_cast<double>(noisy.size());
  CHECK(mean_sed < 1.0);
}

TEST_CASE("pose_from_essential closes the loop with fundamental_from_pose") {
  std::mt19937_64 rng(131);
  for (int trial = 0; trial < 10; ++trial) {
    const auto scene = testing::random_scene(rng, 25);
    const FundamentalMatrix f = fundamental_from_pose(scene.ka, scene.kb, scene.pose);
    const RelativePose recovered =
        pose_from_essential(f, scene.ka, scene.kb, scene.points_a, scene.points_b);
    const PoseAngularErrors err = pose_angular_errors(recovered, scene.pose);
    CHECK(err.rotation_deg * 3.14159265358979 / 180.0 < 1e-6);
    CHECK(err.translation_deg * 3.14159265358979 / 180.0 < 1e-6);
  }
}

TEST_CASE("pose_from_essential via the eight-point estimate") {
  std::mt19937_64 rng(137);
  const auto scene = testing::random_scene(rng, 30);
  const FundamentalMatrix est = fit_fundamental_8pt(scene.points_a, scene.points_b);
  const RelativePose recovered =
      pose_from_essential(est, scene.ka, scene.kb, scene.points_a, scene.points_b);
  const PoseAngularErrors err = pose_angular_errors(recovered, scene.pose);
  CHECK(err.rotation_deg < 1e-4);
  CHECK(err.translation_deg < 1e-4);
  CHECK(recovered.translation.norm() == doctest::Approx(1.0));
}

TEST_CASE("cheirality ambiguity is reported, not guessed") {
  // A single correspondence whose triangulation lands behind the cameras for
  // every candidate: the fabricated pair violates the epipolar constraint of
  // the fabricated E entirely, so no candidate reaches a strict majority.
  Eigen::Matrix3d m;
  m << 0, 0, 0, 0, 0, -1, 0, 1, 0;  // valid essential matrix of t=(1,0,0)
  const FundamentalMatrix f(m);
  const CameraIntrinsics k = CameraIntrinsics::identity();
  // The correspondence (0,0) <-> (0,0) triangulates to the translation axis:
  // depth is zero/undefined for all four candidates.
  std::vector<Eigen::Vector2d> pa{{0.0, 0.0}};
  std::vector<Eigen::Vector2d> pb{{0.0, 0.0}};
  CHECK_THROWS_AS(pose_from_essential(f, k, k, pa, pb), CheiralityAmbiguous);
}
