#include "epiflow/geometry.hpp"

#include <cmath>

#include "epiflow/errors.hpp"

namespace epiflow {

namespace {

constexpr double kDegenerateNormal = 1e-12;

Eigen::Matrix3d cross_matrix(const Eigen::Vector3d& t) {
  Eigen::Matrix3d m;
  m << 0.0, -t.z(), t.y(),  //
      t.z(), 0.0, -t.x(),   //
      -t.y(), t.x(), 0.0;
  return m;
}

}  // namespace

Eigen::Matrix3d CameraIntrinsics::matrix() const {
  Eigen::Matrix3d k;
  k << fx, skew, cx,  //
      0.0, fy, cy,    //
      0.0, 0.0, 1.0;
  return k;
}

Eigen::Matrix3d CameraIntrinsics::inverse_matrix() const {
  // Closed form for the upper-triangular calibration matrix.
  Eigen::Matrix3d k;
  k << 1.0 / fx, -skew / (fx * fy), (skew * cy - cx * fy) / (fx * fy),  //
      0.0, 1.0 / fy, -cy / fy,                                          //
      0.0, 0.0, 1.0;
  return k;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw ValidationError("intrinsics require fx > 0 and fy > 0");
  if (!std::isfinite(fx) || !std::isfinite(fy) || !std::isfinite(cx) || !std::isfinite(cy) ||
      !std::isfinite(skew)) {
    throw ValidationError("intrinsics must be finite");
  }
}

void RelativePose::validate() const {
  const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).norm();
  if (!(ortho < 1e-9)) throw ValidationError("rotation is not orthonormal (tolerance 1e-9)");
  if (!(std::abs(rotation.determinant() - 1.0) < 1e-9)) {
    throw ValidationError("rotation determinant is not +1 (tolerance 1e-9)");
  }
}

FundamentalMatrix::FundamentalMatrix(const Eigen::Matrix3d& m) {
  const double n = m.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw ValidationError("fundamental matrix must be nonzero and finite");
  }
  m_ = m / n;
}

double EpipolarLine::normal_norm() const { return std::hypot(a, b); }

FundamentalMatrix fundamental_from_pose(const CameraIntrinsics& ka, const CameraIntrinsics& kb,
                                        const RelativePose& pose) {
  ka.validate();
  kb.validate();
  pose.validate();
  if (pose.translation.norm() < 1e-12) throw ZeroTranslation();
  const Eigen::Matrix3d f = kb.inverse_matrix().transpose() * cross_matrix(pose.translation) *
                            pose.rotation * ka.inverse_matrix();
  return FundamentalMatrix(f);
}

EpipolarLine epipolar_line(const FundamentalMatrix& f, const Eigen::Vector2d& x) {
  const Eigen::Vector3d l = f.matrix() * x.homogeneous();
  return EpipolarLine{l.x(), l.y(), l.z()};
}

double epipolar_distance(const FundamentalMatrix& f, const Eigen::Vector2d& x,
                         const Eigen::Vector2d& xp) {
  const EpipolarLine l = epipolar_line(f, x);
  const double n = l.normal_norm();
  if (n < kDegenerateNormal) throw DegenerateLine();
  return std::abs(l.a * xp.x() + l.b * xp.y() + l.c) / n;
}

double sed(const FundamentalMatrix& f, const Eigen::Vector2d& x, const Eigen::Vector2d& xp) {
  const auto eval = sed_value_and_gradient(f, x, xp);
  if (!eval) throw DegenerateLine();
  return eval->value;
}

Eigen::Vector2d sed_gradient(const FundamentalMatrix& f, const Eigen::Vector2d& x,
                             const Eigen::Vector2d& xp) {
  const auto eval = sed_value_and_gradient(f, x, xp);
  if (!eval) throw DegenerateLine();
  return eval->gradient;
}

std::optional<SedEvaluation> sed_value_and_gradient(const FundamentalMatrix& f,
                                                    const Eigen::Vector2d& x,
                                                    const Eigen::Vector2d& xp) {
  const Eigen::Matrix3d& m = f.matrix();
  const Eigen::Vector3d line_b = m * x.homogeneous();            // epipolar line of x in B
  const Eigen::Vector3d line_a = m.transpose() * xp.homogeneous();  // epipolar line of xp in A
  const Eigen::Vector2d n1 = line_b.head<2>();
  const Eigen::Vector2d n2 = line_a.head<2>();
  const double n1_norm = n1.norm();
  const double n2_norm = n2.norm();
  if (n1_norm < kDegenerateNormal || n2_norm < kDegenerateNormal) return std::nullopt;

  // Both point-line numerators equal the epipolar residual s = xp~^T F x~.
  const double s = line_b.dot(xp.homogeneous());
  const double inv_sum = 1.0 / n1_norm + 1.0 / n2_norm;

  SedEvaluation eval;
  eval.value = std::abs(s) * inv_sum;
  if (s == 0.0) {
    eval.gradient.setZero();  // subgradient at the kink
    return eval;
  }
  const double sign = s > 0.0 ? 1.0 : -1.0;
  // d|s|/dxp = sign(s) * n1; the second term's normal n2 also moves with xp.
  eval.gradient = sign * inv_sum * n1 -
                  std::abs(s) / (n2_norm * n2_norm * n2_norm) * (m.topLeftCorner<2, 2>() * n2);
  return eval;
}

}  // namespace epiflow
