#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

#include "epiflow/geometry.hpp"

namespace epiflow {

/// Plane-induced projective map, stored with h33 = 1 when that entry is well
/// away from zero, unit Frobenius norm otherwise.
class Homography {
public:
  explicit Homography(const Eigen::Matrix3d& m);

  const Eigen::Matrix3d& matrix() const { return m_; }
  Eigen::Vector2d apply(const Eigen::Vector2d& x) const;
  Homography inverse() const;

private:
  Eigen::Matrix3d m_;
};

struct RansacConfig {
  double threshold = 3.0;      // pixels; symmetric transfer error for H
  int max_iterations = 2000;
  double confidence = 0.9999;  // adaptive termination target
  std::uint64_t seed = 0;

  void validate() const;
};

/// Correspondences as parallel point lists (a[i] <-> b[i]).
struct CorrespondenceSet {
  std::vector<Eigen::Vector2d> a;
  std::vector<Eigen::Vector2d> b;

  std::size_t size() const { return a.size(); }
};

struct HomographyFit {
  Homography h;
  std::vector<std::uint8_t> inliers;  // per input pair, under the refit model
  std::size_t inlier_count = 0;
};

/// 4-point RANSAC with normalized DLT hypotheses, symmetric transfer error
/// (forward + backward reprojection distance) inlier test, adaptive
/// (1 - w^4) termination, and a final normalized-DLT refit on the inliers.
/// Deterministic for a fixed seed. Throws InsufficientMatches (< 4 pairs) or
/// NoModel (no hypothesis reached 4 inliers).
HomographyFit fit_homography_ransac(std::span<const Eigen::Vector2d> a,
                                    std::span<const Eigen::Vector2d> b, const RansacConfig& cfg);

/// Normalized DLT on all given pairs (used for the RANSAC refit; exposed for
/// exact fixtures). Requires >= 4 pairs.
Homography fit_homography_dlt(std::span<const Eigen::Vector2d> a,
                              std::span<const Eigen::Vector2d> b);

/// Hartley-normalized eight-point solution with rank-2 enforcement. Throws
/// InsufficientMatches (< 8) or DegenerateConfiguration (rank-deficient
/// design matrix, e.g. collinear points).
FundamentalMatrix fit_fundamental_8pt(std::span<const Eigen::Vector2d> a,
                                      std::span<const Eigen::Vector2d> b);

/// E = Kb^T F Ka projected to equal singular values; the four-fold (R, t)
/// ambiguity is resolved by majority cheirality over the given matches. Translation is
/// returned unit-norm. Throws CheiralityAmbiguous when no candidate wins a
/// strict majority.
RelativePose pose_from_essential(const FundamentalMatrix& f, const CameraIntrinsics& ka,
                                 const CameraIntrinsics& kb, std::span<const Eigen::Vector2d> pa,
                                 std::span<const Eigen::Vector2d> pb);

}  // namespace epiflow
