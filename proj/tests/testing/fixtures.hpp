#pragma once

// Shared synthetic fixtures: random two-view scenes with exact
// correspondences, planar (homography-induced) dense flows, and a triplet
// fixture with an occluder. Test-only code.

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <optional>
#include <random>
#include <vector>

#include "epiflow/flow_field.hpp"
#include "epiflow/geometry.hpp"
#include "epiflow/model_fit.hpp"

namespace epiflow::testing {

inline CameraIntrinsics random_intrinsics(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> f(80.0, 140.0);
  std::uniform_real_distribution<double> c(30.0, 60.0);
  return CameraIntrinsics{f(rng), f(rng), c(rng), c(rng), 0.0};
}

inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng, double max_angle_rad) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Eigen::Vector3d axis(unit(rng), unit(rng), unit(rng));
  if (axis.norm() < 1e-9) axis = Eigen::Vector3d::UnitZ();
  std::uniform_real_distribution<double> angle(0.0, max_angle_rad);
  return Eigen::AngleAxisd(angle(rng), axis.normalized()).toRotationMatrix();
}

struct TwoViewScene {
  CameraIntrinsics ka, kb;
  RelativePose pose;
  std::vector<Eigen::Vector2d> points_a, points_b;  // exact correspondences
};

/// Random pose + n 3D points visible in both views, projected exactly.
inline TwoViewScene random_scene(std::mt19937_64& rng, int n_points,
                                 double max_angle_rad = 0.35) {
  TwoViewScene scene;
  scene.ka = random_intrinsics(rng);
  scene.kb = random_intrinsics(rng);
  scene.pose.rotation = random_rotation(rng, max_angle_rad);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Eigen::Vector3d t(unit(rng), unit(rng), 0.3 * unit(rng));
  while (t.norm() < 0.1) t = Eigen::Vector3d(unit(rng), unit(rng), 0.3 * unit(rng));
  scene.pose.translation = t;

  std::uniform_real_distribution<double> lateral(-2.0, 2.0);
  std::uniform_real_distribution<double> depth(4.0, 9.0);
  while (static_cast<int>(scene.points_a.size()) < n_points) {
    const Eigen::Vector3d x_a(lateral(rng), lateral(rng), depth(rng));
    const Eigen::Vector3d x_b = scene.pose.rotation * x_a + scene.pose.translation;
    if (x_b.z() < 0.5) continue;
    scene.points_a.push_back((scene.ka.matrix() * x_a).hnormalized());
    scene.points_b.push_back((scene.kb.matrix() * x_b).hnormalized());
  }
  return scene;
}

struct PlanarScene {
  CameraIntrinsics k;
  RelativePose pose;
  Eigen::Matrix3d homography;  // image A -> image B
  FundamentalMatrix f;
  int width, height;

  PlanarScene(int w, int h, double angle_rad, const Eigen::Vector3d& translation,
              const Eigen::Vector3d& plane_normal, double plane_d)
      : k{0.7 * w, 0.7 * w, (w - 1) / 2.0, (h - 1) / 2.0, 0.0},
        f(Eigen::Matrix3d::Identity()),
        width(w),
        height(h) {
    pose.rotation =
        Eigen::AngleAxisd(angle_rad, Eigen::Vector3d(0.2, 1.0, 0.1).normalized()).toRotationMatrix();
    pose.translation = translation;
    const Eigen::Vector3d n = plane_normal.normalized();
    homography = k.matrix() *
                 (pose.rotation + pose.translation * n.transpose() / plane_d) *
                 k.inverse_matrix();
    f = fundamental_from_pose(k, k, pose);
  }

  Eigen::Vector2d map_ab(const Eigen::Vector2d& x) const {
    return (homography * x.homogeneous()).hnormalized();
  }
  Eigen::Vector2d map_ba(const Eigen::Vector2d& x) const {
    return (homography.inverse() * x.homogeneous()).hnormalized();
  }

  /// Exact dense flows induced by the homography; all pixels valid.
  FlowField flow_ab() const {
    FlowField flow(width, height);
    for (int v = 0; v < height; ++v)
      for (int u = 0; u < width; ++u)
        flow.set(u, v, map_ab(Eigen::Vector2d(u, v)) - Eigen::Vector2d(u, v));
    return flow;
  }
  FlowField flow_ba() const {
    FlowField flow(width, height);
    for (int v = 0; v < height; ++v)
      for (int u = 0; u < width; ++u)
        flow.set(u, v, map_ba(Eigen::Vector2d(u, v)) - Eigen::Vector2d(u, v));
    return flow;
  }
};

/// Mild default planar fixture whose displacements stay a few pixels.
inline PlanarScene default_planar_scene(int w = 48, int h = 36) {
  return PlanarScene(w, h, 0.03, Eigen::Vector3d(0.25, 0.1, 0.05),
                     Eigen::Vector3d(0.1, -0.05, 1.0), 6.0);
}

/// Random flow field with fractional parts kept away from cell boundaries and
/// abs/L1 kinks, so finite differences stay clean.
inline FlowField random_smooth_flow(std::mt19937_64& rng, int w, int h, double magnitude) {
  std::uniform_real_distribution<double> base(-magnitude, magnitude);
  std::uniform_real_distribution<double> frac(0.2, 0.8);
  FlowField flow(w, h);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const double du = std::floor(base(rng)) + frac(rng);
      const double dv = std::floor(base(rng)) + frac(rng);
      flow.set(u, v, Eigen::Vector2d(du, dv));
    }
  }
  return flow;
}

}  // namespace epiflow::testing
