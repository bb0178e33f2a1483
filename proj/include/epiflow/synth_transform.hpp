#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "epiflow/flow_field.hpp"

namespace epiflow {

enum class TransformKind { Affine, Tps };
enum class FlowDirection { Forward, Inverse };

/// Invertible planar warp: either a 2x3 affine map or a thin-plate spline
/// interpolating per-control-point displacements on a regular GxG grid
/// spanning the image. TPS kernel U(r) = r^2 log(r^2), U(0) = 0, pure
/// interpolation (no bending regularizer).
class TransformSpec {
public:
  /// Throws ValidationError when the 2x2 linear part has |det| <= 1e-6.
  static TransformSpec affine(int width, int height, const Eigen::Matrix<double, 2, 3>& m);

  /// Control points on a regular grid_size x grid_size lattice over
  /// [0, W-1] x [0, H-1]; displacements are interpolated exactly.
  static TransformSpec tps(int width, int height, int grid_size,
                           const std::vector<Eigen::Vector2d>& displacements);

  TransformKind kind() const { return kind_; }
  int width() const { return width_; }
  int height() const { return height_; }

  Eigen::Vector2d forward(const Eigen::Vector2d& x) const;

  /// Affine: closed form. TPS: Newton iteration on forward() started from the
  /// inverse of the spline's affine part; throws NoConvergence when the
  /// residual stays above tol after max_iterations steps.
  Eigen::Vector2d inverse(const Eigen::Vector2d& y, double tol = 1e-6,
                          int max_iterations = 50) const;

  /// Single-line text record; parse() restores it exactly.
  std::string serialize() const;
  static TransformSpec parse(const std::string& line);

  // TPS internals, exposed for tests.
  const std::vector<Eigen::Vector2d>& control_points() const { return controls_; }
  const std::vector<Eigen::Vector2d>& displacements() const { return displacements_; }
  const Eigen::Matrix<double, 2, 3>& affine_part() const { return affine_; }

private:
  TransformSpec() = default;

  TransformKind kind_ = TransformKind::Affine;
  int width_ = 0;
  int height_ = 0;
  int grid_size_ = 0;
  Eigen::Matrix<double, 2, 3> affine_ = Eigen::Matrix<double, 2, 3>::Zero();
  std::vector<Eigen::Vector2d> controls_;       // tps only
  std::vector<Eigen::Vector2d> displacements_;  // tps only
  std::vector<Eigen::Vector2d> weights_;        // tps kernel weights (solved)
};

/// Seeded generator of random transforms; draws affine or TPS with equal
/// probability. Ranges are engineering defaults (the construction only needs
/// "random smooth invertible warps").
class TransformSampler {
public:
  TransformSampler(std::uint64_t seed, int width, int height);

  double rotation_deg = 25.0;
  double scale_min = 0.75;
  double scale_max = 1.33;
  double translation_frac = 0.15;  // of image size, per axis
  double shear_deg = 10.0;
  double tps_jitter_frac = 0.10;  // max control displacement, of image size
  int tps_grid = 3;

  /// Throws SamplingExhausted after 100 rejected degenerate affine draws.
  TransformSpec sample();

private:
  TransformSpec sample_affine();
  TransformSpec sample_tps();

  std::mt19937_64 rng_;
  int width_;
  int height_;
};

/// Per-pixel flow T(x) - x (Forward) or T^-1(x) - x (Inverse). The mask is
/// false where the target leaves [0, W-1] x [0, H-1] or inversion fails.
FlowField dense_flow_from_transform(const TransformSpec& t, const PixelGrid& grid,
                                    FlowDirection direction);

inline TransformSpec sample_transform(TransformSampler& sampler) { return sampler.sample(); }

}  // namespace epiflow
