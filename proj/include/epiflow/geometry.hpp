#pragma once

#include <Eigen/Core>

#include <optional>

namespace epiflow {

/// Pinhole intrinsics. The induced calibration matrix is
///   [fx skew cx; 0 fy cy; 0 0 1]
/// with pixel coordinates (u, v) = (column, row) and the origin at the
/// top-left pixel center.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double skew = 0.0;

  static CameraIntrinsics identity() { return {}; }

  Eigen::Matrix3d matrix() const;
  Eigen::Matrix3d inverse_matrix() const;

  /// Throws ValidationError unless fx > 0 and fy > 0.
  void validate() const;
};

/// Rigid transform from camera-A coordinates to camera-B coordinates.
/// The translation scale is arbitrary (SfM-style supervision).
struct RelativePose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  /// Throws ValidationError unless rotation is orthonormal with det +1
  /// (both to 1e-9).
  void validate() const;
};

/// 3x3 rank-2 matrix with the convention  x_b^T * m * x_a = 0  for
/// homogeneous pixels x_a of image A and x_b of image B. Stored normalized to
/// unit Frobenius norm; the B-to-A matrix is the transpose.
class FundamentalMatrix {
public:
  /// Normalizes the given matrix to unit Frobenius norm.
  /// Throws ValidationError on a (numerically) zero matrix.
  explicit FundamentalMatrix(const Eigen::Matrix3d& m);

  const Eigen::Matrix3d& matrix() const { return m_; }
  FundamentalMatrix transposed() const { return FundamentalMatrix(m_.transpose()); }

private:
  Eigen::Matrix3d m_;
};

/// Image line {(u, v) : a*u + b*v + c = 0}, coefficients in pixel units.
struct EpipolarLine {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  /// Norm of the line normal (a, b); ~0 marks a degenerate line.
  double normal_norm() const;
};

/// F = Kb^-T [t]x R Ka^-1, unit Frobenius norm.
/// Throws ZeroTranslation when |t| < 1e-12 (undefined for pure rotation).
FundamentalMatrix fundamental_from_pose(const CameraIntrinsics& ka, const CameraIntrinsics& kb,
                                        const RelativePose& pose);

/// Line in B on which the correspondence of pixel x of A must lie: F * [x; 1].
EpipolarLine epipolar_line(const FundamentalMatrix& f, const Eigen::Vector2d& x);

/// Perpendicular distance (pixels) from xp in B to the epipolar line of x.
/// Throws DegenerateLine when the line normal is below 1e-12.
double epipolar_distance(const FundamentalMatrix& f, const Eigen::Vector2d& x,
                         const Eigen::Vector2d& xp);

/// Sum of the two epipolar distances (F forward, F^T backward).
/// Throws DegenerateLine when either line is degenerate.
double sed(const FundamentalMatrix& f, const Eigen::Vector2d& x, const Eigen::Vector2d& xp);

/// Analytic d(sed)/d(xp). Subgradient 0 where the epipolar residual is
/// exactly zero. Throws DegenerateLine as above.
Eigen::Vector2d sed_gradient(const FundamentalMatrix& f, const Eigen::Vector2d& x,
                             const Eigen::Vector2d& xp);

struct SedEvaluation {
  double value;
  Eigen::Vector2d gradient;  // w.r.t. xp
};

/// Non-throwing combined evaluation used by the per-pixel loss loops.
/// nullopt marks a degenerate configuration (pixel near an epipole).
std::optional<SedEvaluation> sed_value_and_gradient(const FundamentalMatrix& f,
                                                    const Eigen::Vector2d& x,
                                                    const Eigen::Vector2d& xp);

}  // namespace epiflow
