#include "epiflow/model_fit.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "epiflow/errors.hpp"

namespace epiflow {

namespace {

// Hartley normalization: centroid to origin, mean distance sqrt(2).
Eigen::Matrix3d normalizing_transform(std::span<const Eigen::Vector2d> pts) {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += (p - centroid).norm();
  mean_dist /= static_cast<double>(pts.size());
  const double s = mean_dist > 1e-12 ? std::sqrt(2.0) / mean_dist : 1.0;
  Eigen::Matrix3d t;
  t << s, 0.0, -s * centroid.x(),  //
      0.0, s, -s * centroid.y(),   //
      0.0, 0.0, 1.0;
  return t;
}

Eigen::Vector2d transform_point(const Eigen::Matrix3d& t, const Eigen::Vector2d& p) {
  return (t * p.homogeneous()).hnormalized();
}

// DLT homography on already-paired points; indices select the subset.
Eigen::Matrix3d homography_dlt_impl(std::span<const Eigen::Vector2d> a,
                                    std::span<const Eigen::Vector2d> b,
                                    std::span<const std::size_t> idx) {
  const Eigen::Matrix3d ta = normalizing_transform(a);
  const Eigen::Matrix3d tb = normalizing_transform(b);
  Eigen::MatrixXd design(2 * idx.size(), 9);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const Eigen::Vector2d pa = transform_point(ta, a[idx[r]]);
    const Eigen::Vector2d pb = transform_point(tb, b[idx[r]]);
    const double x = pa.x(), y = pa.y(), xp = pb.x(), yp = pb.y();
    design.row(2 * r) << 0, 0, 0, -x, -y, -1, yp * x, yp * y, yp;
    design.row(2 * r + 1) << x, y, 1, 0, 0, 0, -xp * x, -xp * y, -xp;
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeFullV);
  const Eigen::VectorXd hvec = svd.matrixV().col(8);
  Eigen::Matrix3d h;
  h << hvec(0), hvec(1), hvec(2), hvec(3), hvec(4), hvec(5), hvec(6), hvec(7), hvec(8);
  return tb.inverse() * h * ta;
}

bool three_collinear(const Eigen::Vector2d& p, const Eigen::Vector2d& q,
                     const Eigen::Vector2d& r) {
  const Eigen::Vector2d u = q - p;
  const Eigen::Vector2d v = r - p;
  return std::abs(u.x() * v.y() - u.y() * v.x()) < 1e-9;
}

bool degenerate_quad(std::span<const Eigen::Vector2d> pts, const std::size_t idx[4]) {
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      for (int k = j + 1; k < 4; ++k)
        if (three_collinear(pts[idx[i]], pts[idx[j]], pts[idx[k]])) return true;
  return false;
}

double symmetric_transfer_error(const Homography& h, const Homography& h_inv,
                                const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return (h.apply(a) - b).norm() + (h_inv.apply(b) - a).norm();
}

// Triangulated depths of a normalized-coordinate match under [I|0], [R|t].
std::pair<double, double> triangulated_depths(const Eigen::Matrix3d& r, const Eigen::Vector3d& t,
                                              const Eigen::Vector3d& xa,
                                              const Eigen::Vector3d& xb) {
  Eigen::Matrix<double, 3, 4> p1 = Eigen::Matrix<double, 3, 4>::Zero();
  p1.leftCols<3>().setIdentity();
  Eigen::Matrix<double, 3, 4> p2;
  p2.leftCols<3>() = r;
  p2.col(3) = t;

  Eigen::Matrix4d design;
  design.row(0) = xa.x() * p1.row(2) - xa.z() * p1.row(0);
  design.row(1) = xa.y() * p1.row(2) - xa.z() * p1.row(1);
  design.row(2) = xb.x() * p2.row(2) - xb.z() * p2.row(0);
  design.row(3) = xb.y() * p2.row(2) - xb.z() * p2.row(1);
  const Eigen::JacobiSVD<Eigen::Matrix4d> svd(design, Eigen::ComputeFullV);
  Eigen::Vector4d xh = svd.matrixV().col(3);
  if (std::abs(xh(3)) < 1e-15) return {0.0, 0.0};
  xh /= xh(3);
  const double z1 = xh(2);
  const double z2 = (p2 * xh)(2);
  return {z1, z2};
}

}  // namespace

Homography::Homography(const Eigen::Matrix3d& m) {
  const double det = m.determinant();
  if (!(std::abs(det) > 1e-12)) throw ValidationError("homography must be invertible");
  if (std::abs(m(2, 2)) > 1e-8 * m.norm()) {
    m_ = m / m(2, 2);
  } else {
    m_ = m / m.norm();
  }
}

Eigen::Vector2d Homography::apply(const Eigen::Vector2d& x) const {
  return (m_ * x.homogeneous()).hnormalized();
}

Homography Homography::inverse() const { return Homography(m_.inverse()); }

void RansacConfig::validate() const {
  if (!(threshold > 0.0)) throw ValidationError("ransac threshold must be > 0");
  if (max_iterations < 1) throw ValidationError("ransac iteration budget must be >= 1");
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw ValidationError("ransac confidence must lie in (0, 1)");
  }
}

Homography fit_homography_dlt(std::span<const Eigen::Vector2d> a,
                              std::span<const Eigen::Vector2d> b) {
  if (a.size() != b.size()) throw ValidationError("point lists differ in length");
  if (a.size() < 4) throw InsufficientMatches("homography needs >= 4 matches");
  std::vector<std::size_t> idx(a.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return Homography(homography_dlt_impl(a, b, idx));
}

HomographyFit fit_homography_ransac(std::span<const Eigen::Vector2d> a,
                                    std::span<const Eigen::Vector2d> b, const RansacConfig& cfg) {
  cfg.validate();
  if (a.size() != b.size()) throw ValidationError("point lists differ in length");
  const std::size_t n = a.size();
  if (n < 4) throw InsufficientMatches("homography needs >= 4 matches, got " + std::to_string(n));

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  std::size_t best_count = 0;
  std::vector<std::uint8_t> best_mask;
  double required = cfg.max_iterations;

  for (int iter = 0; iter < cfg.max_iterations && iter < required; ++iter) {
    std::size_t idx[4];
    for (int k = 0; k < 4;) {
      const std::size_t candidate = pick(rng);
      bool dup = false;
      for (int j = 0; j < k; ++j) dup = dup || idx[j] == candidate;
      if (!dup) idx[k++] = candidate;
    }
    if (degenerate_quad(a, idx) || degenerate_quad(b, idx)) continue;

    Eigen::Matrix3d hm;
    try {
      hm = homography_dlt_impl(a, b, std::span<const std::size_t>(idx, 4));
    } catch (const Error&) {
      continue;
    }
    if (!(std::abs(hm.determinant()) > 1e-12)) continue;
    const Homography h(hm);
    const Homography h_inv = h.inverse();

    std::vector<std::uint8_t> mask(n, 0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (symmetric_transfer_error(h, h_inv, a[i], b[i]) <= cfg.threshold) {
        mask[i] = 1;
        ++count;
      }
    }
    if (count > best_count) {
      best_count = count;
      best_mask = std::move(mask);
      // Standard adaptive termination: enough iterations that a pure-inlier
      // sample was drawn with the requested confidence.
      const double w = static_cast<double>(count) / static_cast<double>(n);
      const double denom = std::log(std::max(1e-300, 1.0 - std::pow(w, 4)));
      required = denom < 0.0 ? std::ceil(std::log(1.0 - cfg.confidence) / denom)
                             : cfg.max_iterations;
    }
  }

  if (best_count < 4) throw NoModel("ransac found no homography with >= 4 inliers");

  std::vector<std::size_t> inlier_idx;
  inlier_idx.reserve(best_count);
  for (std::size_t i = 0; i < n; ++i) {
    if (best_mask[i]) inlier_idx.push_back(i);
  }
  const Homography refit(homography_dlt_impl(a, b, inlier_idx));
  const Homography refit_inv = refit.inverse();

  HomographyFit fit{refit, std::vector<std::uint8_t>(n, 0), 0};
  for (std::size_t i = 0; i < n; ++i) {
    if (symmetric_transfer_error(refit, refit_inv, a[i], b[i]) <= cfg.threshold) {
      fit.inliers[i] = 1;
      ++fit.inlier_count;
    }
  }
  return fit;
}

FundamentalMatrix fit_fundamental_8pt(std::span<const Eigen::Vector2d> a,
                                      std::span<const Eigen::Vector2d> b) {
  if (a.size() != b.size()) throw ValidationError("point lists differ in length");
  const std::size_t n = a.size();
  if (n < 8) throw InsufficientMatches("eight-point needs >= 8 matches, got " + std::to_string(n));

  const Eigen::Matrix3d ta = normalizing_transform(a);
  const Eigen::Matrix3d tb = normalizing_transform(b);
  Eigen::MatrixXd design(n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d pa = transform_point(ta, a[i]);
    const Eigen::Vector2d pb = transform_point(tb, b[i]);
    const double u = pa.x(), v = pa.y(), up = pb.x(), vp = pb.y();
    design.row(static_cast<Eigen::Index>(i)) << up * u, up * v, up, vp * u, vp * v, vp, u, v, 1.0;
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // A unique (up to scale) null vector needs eight well-separated singular
  // values; collinear or otherwise degenerate inputs collapse that.
  if (sv(7) < 1e-10 * sv(0)) {
    throw DegenerateConfiguration("eight-point design matrix is rank deficient");
  }
  const Eigen::VectorXd fvec = svd.matrixV().col(8);
  Eigen::Matrix3d fhat;
  fhat << fvec(0), fvec(1), fvec(2), fvec(3), fvec(4), fvec(5), fvec(6), fvec(7), fvec(8);

  // Rank-2 enforcement: zero the smallest singular value.
  Eigen::JacobiSVD<Eigen::Matrix3d> fsvd(fhat, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d s = fsvd.singularValues();
  s(2) = 0.0;
  const Eigen::Matrix3d f2 = fsvd.matrixU() * s.asDiagonal() * fsvd.matrixV().transpose();
  return FundamentalMatrix(tb.transpose() * f2 * ta);
}

RelativePose pose_from_essential(const FundamentalMatrix& f, const CameraIntrinsics& ka,
                                 const CameraIntrinsics& kb, std::span<const Eigen::Vector2d> pa,
                                 std::span<const Eigen::Vector2d> pb) {
  ka.validate();
  kb.validate();
  if (pa.size() != pb.size()) throw ValidationError("point lists differ in length");
  if (pa.empty()) throw ValidationError("cheirality needs at least one match");

  const Eigen::Matrix3d e = kb.matrix().transpose() * f.matrix() * ka.matrix();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d v = svd.matrixV();
  if (u.determinant() < 0.0) u = -u;
  if (v.determinant() < 0.0) v = -v;

  Eigen::Matrix3d w;
  w << 0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0;
  const Eigen::Matrix3d r1 = u * w * v.transpose();
  const Eigen::Matrix3d r2 = u * w.transpose() * v.transpose();
  const Eigen::Vector3d tu = u.col(2);

  const Eigen::Matrix3d ka_inv = ka.inverse_matrix();
  const Eigen::Matrix3d kb_inv = kb.inverse_matrix();

  struct Candidate {
    Eigen::Matrix3d r;
    Eigen::Vector3d t;
    std::size_t in_front = 0;
  };
  Candidate candidates[4] = {{r1, tu}, {r1, -tu}, {r2, tu}, {r2, -tu}};

  for (auto& c : candidates) {
    for (std::size_t i = 0; i < pa.size(); ++i) {
      const Eigen::Vector3d xa = ka_inv * pa[i].homogeneous();
      const Eigen::Vector3d xb = kb_inv * pb[i].homogeneous();
      const auto [z1, z2] = triangulated_depths(c.r, c.t, xa, xb);
      if (z1 > 0.0 && z2 > 0.0) ++c.in_front;
    }
  }

  const Candidate* best = &candidates[0];
  bool unique_best = true;
  for (int k = 1; k < 4; ++k) {
    if (candidates[k].in_front > best->in_front) {
      best = &candidates[k];
      unique_best = true;
    } else if (candidates[k].in_front == best->in_front) {
      unique_best = false;
    }
  }
  if (!unique_best || 2 * best->in_front <= pa.size()) throw CheiralityAmbiguous();

  RelativePose pose;
  pose.rotation = best->r;
  pose.translation = best->t.normalized();
  return pose;
}

}  // namespace epiflow
