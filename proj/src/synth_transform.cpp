#include "epiflow/synth_transform.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <sstream>

#include "epiflow/errors.hpp"

namespace epiflow {

namespace {

constexpr double kPi = 3.14159265358979323846;

double tps_kernel(double r2) {
  // U(r) = r^2 log(r^2) with U(0) = 0.
  return r2 > 0.0 ? r2 * std::log(r2) : 0.0;
}

std::vector<Eigen::Vector2d> tps_control_grid(int width, int height, int grid_size) {
  std::vector<Eigen::Vector2d> controls;
  controls.reserve(static_cast<std::size_t>(grid_size) * grid_size);
  for (int i = 0; i < grid_size; ++i) {
    for (int j = 0; j < grid_size; ++j) {
      const double u = grid_size > 1 ? static_cast<double>(j) / (grid_size - 1) : 0.5;
      const double v = grid_size > 1 ? static_cast<double>(i) / (grid_size - 1) : 0.5;
      controls.emplace_back(u * (width - 1), v * (height - 1));
    }
  }
  return controls;
}

void append_number(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), " %.17g", v);
  out += buf;
}

}  // namespace

TransformSpec TransformSpec::affine(int width, int height, const Eigen::Matrix<double, 2, 3>& m) {
  if (width < 1 || height < 1) throw ValidationError("transform domain must be positive");
  const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  if (!(std::abs(det) > 1e-6)) throw ValidationError("affine linear part is (near) singular");
  TransformSpec t;
  t.kind_ = TransformKind::Affine;
  t.width_ = width;
  t.height_ = height;
  t.affine_ = m;
  return t;
}

TransformSpec TransformSpec::tps(int width, int height, int grid_size,
                                 const std::vector<Eigen::Vector2d>& displacements) {
  if (width < 1 || height < 1) throw ValidationError("transform domain must be positive");
  if (grid_size < 2) throw ValidationError("tps control grid must be at least 2x2");
  const int n = grid_size * grid_size;
  if (static_cast<int>(displacements.size()) != n) {
    throw ValidationError("tps displacement count does not match control grid");
  }

  TransformSpec t;
  t.kind_ = TransformKind::Tps;
  t.width_ = width;
  t.height_ = height;
  t.grid_size_ = grid_size;
  t.controls_ = tps_control_grid(width, height, grid_size);
  t.displacements_ = displacements;

  // Interpolation system [K P; P^T 0] [w; a] = [target; 0], one RHS per
  // output dimension.
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n + 3, n + 3);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + 3, 2);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      l(i, j) = tps_kernel((t.controls_[i] - t.controls_[j]).squaredNorm());
    }
    l(i, n) = 1.0;
    l(i, n + 1) = t.controls_[i].x();
    l(i, n + 2) = t.controls_[i].y();
    l(n, i) = 1.0;
    l(n + 1, i) = t.controls_[i].x();
    l(n + 2, i) = t.controls_[i].y();
    rhs.row(i) = (t.controls_[i] + displacements[i]).transpose();
  }
  const Eigen::MatrixXd sol = Eigen::FullPivLU<Eigen::MatrixXd>(l).solve(rhs);

  t.weights_.resize(n);
  for (int i = 0; i < n; ++i) t.weights_[i] = sol.row(i).transpose();
  t.affine_.col(0) << sol(n + 1, 0), sol(n + 1, 1);
  t.affine_.col(1) << sol(n + 2, 0), sol(n + 2, 1);
  t.affine_.col(2) << sol(n, 0), sol(n, 1);

  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d target = t.controls_[i] + displacements[i];
    if ((t.forward(t.controls_[i]) - target).norm() > 1e-9) {
      throw NumericalError("tps interpolation conditions not met");
    }
  }
  return t;
}

Eigen::Vector2d TransformSpec::forward(const Eigen::Vector2d& x) const {
  Eigen::Vector2d y = affine_ * x.homogeneous();
  if (kind_ == TransformKind::Tps) {
    for (std::size_t i = 0; i < controls_.size(); ++i) {
      y += weights_[i] * tps_kernel((x - controls_[i]).squaredNorm());
    }
  }
  return y;
}

Eigen::Vector2d TransformSpec::inverse(const Eigen::Vector2d& y, double tol,
                                       int max_iterations) const {
  const Eigen::Matrix2d lin = affine_.leftCols<2>();
  const Eigen::Vector2d offset = affine_.col(2);
  if (kind_ == TransformKind::Affine) {
    return lin.inverse() * (y - offset);
  }

  Eigen::Vector2d x = y;
  if (std::abs(lin.determinant()) > 1e-12) x = lin.inverse() * (y - offset);
  for (int it = 0; it < max_iterations; ++it) {
    const Eigen::Vector2d residual = forward(x) - y;
    if (residual.norm() <= tol) return x;
    Eigen::Matrix2d jac = lin;
    for (std::size_t i = 0; i < controls_.size(); ++i) {
      const Eigen::Vector2d d = x - controls_[i];
      const double r2 = d.squaredNorm();
      if (r2 > 0.0) jac += (std::log(r2) + 1.0) * 2.0 * weights_[i] * d.transpose();
    }
    const double det = jac.determinant();
    if (!(std::abs(det) > 1e-12)) {
      throw NoConvergence("tps inverse: singular Jacobian during Newton iteration");
    }
    x -= jac.inverse() * residual;
  }
  if ((forward(x) - y).norm() <= tol) return x;
  throw NoConvergence("tps inverse: Newton iteration did not reach tolerance");
}

std::string TransformSpec::serialize() const {
  std::string out;
  if (kind_ == TransformKind::Affine) {
    out = "affine " + std::to_string(width_) + " " + std::to_string(height_);
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 3; ++c) append_number(out, affine_(r, c));
    }
  } else {
    out = "tps " + std::to_string(width_) + " " + std::to_string(height_) + " " +
          std::to_string(grid_size_);
    for (const auto& d : displacements_) {
      append_number(out, d.x());
      append_number(out, d.y());
    }
  }
  return out;
}

TransformSpec TransformSpec::parse(const std::string& line) {
  std::istringstream in(line);
  std::string kind;
  int w = 0;
  int h = 0;
  if (!(in >> kind >> w >> h)) throw IoError("transform record: missing kind or domain");
  if (kind == "affine") {
    Eigen::Matrix<double, 2, 3> m;
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 3; ++c) {
        if (!(in >> m(r, c))) throw IoError("transform record: truncated affine parameters");
      }
    }
    return TransformSpec::affine(w, h, m);
  }
  if (kind == "tps") {
    int g = 0;
    if (!(in >> g)) throw IoError("transform record: missing tps grid size");
    std::vector<Eigen::Vector2d> disp(static_cast<std::size_t>(g) * g);
    for (auto& d : disp) {
      if (!(in >> d.x() >> d.y())) throw IoError("transform record: truncated tps displacements");
    }
    return TransformSpec::tps(w, h, g, disp);
  }
  throw IoError("transform record: unknown kind '" + kind + "'");
}

TransformSampler::TransformSampler(std::uint64_t seed, int width, int height)
    : rng_(seed), width_(width), height_(height) {
  if (width < 1 || height < 1) throw ValidationError("sampler domain must be positive");
}

TransformSpec TransformSampler::sample() {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  return coin(rng_) < 0.5 ? sample_affine() : sample_tps();
}

TransformSpec TransformSampler::sample_affine() {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> scale_dist(scale_min, scale_max);
  for (int attempt = 0; attempt < 100; ++attempt) {
    const double theta = unit(rng_) * rotation_deg * kPi / 180.0;
    const double shear = unit(rng_) * shear_deg * kPi / 180.0;
    const double s = scale_dist(rng_);
    const double tx = unit(rng_) * translation_frac * width_;
    const double ty = unit(rng_) * translation_frac * height_;

    Eigen::Matrix2d rot;
    rot << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    Eigen::Matrix2d sh = Eigen::Matrix2d::Identity();
    sh(0, 1) = std::tan(shear);
    const Eigen::Matrix2d lin = s * rot * sh;
    if (!(std::abs(lin.determinant()) > 1e-6)) continue;

    // Rotate/scale about the image center, then translate.
    const Eigen::Vector2d center((width_ - 1) / 2.0, (height_ - 1) / 2.0);
    Eigen::Matrix<double, 2, 3> m;
    m.leftCols<2>() = lin;
    m.col(2) = center + Eigen::Vector2d(tx, ty) - lin * center;
    return TransformSpec::affine(width_, height_, m);
  }
  throw SamplingExhausted();
}

TransformSpec TransformSampler::sample_tps() {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const int n = tps_grid * tps_grid;
  std::vector<Eigen::Vector2d> disp(static_cast<std::size_t>(n));
  for (auto& d : disp) {
    d.x() = unit(rng_) * tps_jitter_frac * width_;
    d.y() = unit(rng_) * tps_jitter_frac * height_;
  }
  return TransformSpec::tps(width_, height_, tps_grid, disp);
}

FlowField dense_flow_from_transform(const TransformSpec& t, const PixelGrid& grid,
                                    FlowDirection direction) {
  FlowField flow(grid.width, grid.height);
  for (int v = 0; v < grid.height; ++v) {
    for (int u = 0; u < grid.width; ++u) {
      const Eigen::Vector2d x(u, v);
      Eigen::Vector2d target;
      bool ok = true;
      if (direction == FlowDirection::Forward) {
        target = t.forward(x);
      } else {
        try {
          target = t.inverse(x);
        } catch (const NoConvergence&) {
          ok = false;
          target = x;
        }
      }
      ok = ok && target.x() >= 0.0 && target.x() <= grid.width - 1.0 && target.y() >= 0.0 &&
           target.y() <= grid.height - 1.0;
      flow.set(u, v, ok ? Eigen::Vector2d(target - x) : Eigen::Vector2d::Zero(), ok);
    }
  }
  return flow;
}

}  // namespace epiflow
