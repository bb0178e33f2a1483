#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <vector>

namespace epiflow {

/// Row-major pixel lattice, (u, v) = (column, row).
struct PixelGrid {
  int width = 0;
  int height = 0;

  bool contains(int u, int v) const { return u >= 0 && u < width && v >= 0 && v < height; }
  std::size_t size() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
};

/// Dense offset field: a pixel x of the source image maps to x + vector(x) in
/// the target image. Carries a per-pixel validity mask. Construction is
/// single-owner; reads are freely concurrent afterwards.
class FlowField {
public:
  FlowField() = default;
  /// Zero flow, all pixels valid.
  FlowField(int width, int height);

  int width() const { return grid_.width; }
  int height() const { return grid_.height; }
  const PixelGrid& grid() const { return grid_; }

  const Eigen::Vector2d& vector_at(int u, int v) const { return vectors_[index(u, v)]; }
  bool valid_at(int u, int v) const { return valid_[index(u, v)] != 0; }

  void set(int u, int v, const Eigen::Vector2d& vec, bool valid = true);
  void set_valid(int u, int v, bool valid) { valid_[index(u, v)] = valid ? 1 : 0; }

  const std::vector<Eigen::Vector2d>& vectors() const { return vectors_; }
  const std::vector<std::uint8_t>& validity() const { return valid_; }

  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * static_cast<std::size_t>(grid_.width) +
           static_cast<std::size_t>(u);
  }

private:
  PixelGrid grid_;
  std::vector<Eigen::Vector2d> vectors_;
  std::vector<std::uint8_t> valid_;
};

/// Integer-location lookup: x + flow(x). Ignores the validity mask.
/// Throws OutOfBounds when x is outside the grid.
Eigen::Vector2d apply(const FlowField& flow, const Eigen::Vector2i& x);

/// Bilinear interpolation of the four cell corners around p. nullopt when p
/// leaves [0, W-1] x [0, H-1] or any corner of the (clamped) cell is masked
/// invalid. At the right/bottom border the cell is shifted inward so the
/// result stays exact at integer coordinates.
std::optional<Eigen::Vector2d> sample(const FlowField& flow, const Eigen::Vector2d& p);

/// sample() plus everything the chain rule needs: corner indices, weights and
/// the spatial Jacobian d(value)/dp of the interpolant.
struct BilinearSample {
  Eigen::Vector2d value;
  Eigen::Matrix2d jacobian;
  int corner_u[4];
  int corner_v[4];
  double weight[4];
};
std::optional<BilinearSample> sample_detailed(const FlowField& flow, const Eigen::Vector2d& p);

/// Round-trip error | f_ab(x + f_ba(x)) + f_ba(x) |. nullopt when x itself is
/// masked invalid or the forward point leaves fab's sampling domain.
/// Throws OutOfBounds when x is outside fba's grid.
std::optional<double> cycle_distance(const FlowField& fab, const FlowField& fba,
                                     const Eigen::Vector2i& x);

}  // namespace epiflow
