#include "epiflow/flow_field.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "epiflow/errors.hpp"

namespace epiflow {

FlowField::FlowField(int width, int height) {
  if (width < 1 || height < 1) throw ValidationError("flow field dimensions must be positive");
  grid_ = PixelGrid{width, height};
  vectors_.assign(grid_.size(), Eigen::Vector2d::Zero());
  valid_.assign(grid_.size(), 1);
}

void FlowField::set(int u, int v, const Eigen::Vector2d& vec, bool valid) {
  vectors_[index(u, v)] = vec;
  valid_[index(u, v)] = valid ? 1 : 0;
}

Eigen::Vector2d apply(const FlowField& flow, const Eigen::Vector2i& x) {
  if (!flow.grid().contains(x.x(), x.y())) {
    throw OutOfBounds("pixel (" + std::to_string(x.x()) + ", " + std::to_string(x.y()) +
                      ") outside " + std::to_string(flow.width()) + "x" +
                      std::to_string(flow.height()) + " grid");
  }
  return x.cast<double>() + flow.vector_at(x.x(), x.y());
}

std::optional<BilinearSample> sample_detailed(const FlowField& flow, const Eigen::Vector2d& p) {
  const int w = flow.width();
  const int h = flow.height();
  if (!(p.x() >= 0.0) || !(p.x() <= w - 1.0) || !(p.y() >= 0.0) || !(p.y() <= h - 1.0)) {
    return std::nullopt;
  }
  const int u0 = std::clamp(static_cast<int>(std::floor(p.x())), 0, std::max(w - 2, 0));
  const int v0 = std::clamp(static_cast<int>(std::floor(p.y())), 0, std::max(h - 2, 0));
  const int u1 = std::min(u0 + 1, w - 1);
  const int v1 = std::min(v0 + 1, h - 1);
  if (!flow.valid_at(u0, v0) || !flow.valid_at(u1, v0) || !flow.valid_at(u0, v1) ||
      !flow.valid_at(u1, v1)) {
    return std::nullopt;
  }
  const double fu = p.x() - u0;
  const double fv = p.y() - v0;
  const Eigen::Vector2d& c00 = flow.vector_at(u0, v0);
  const Eigen::Vector2d& c10 = flow.vector_at(u1, v0);
  const Eigen::Vector2d& c01 = flow.vector_at(u0, v1);
  const Eigen::Vector2d& c11 = flow.vector_at(u1, v1);

  BilinearSample s;
  s.value = (1.0 - fu) * (1.0 - fv) * c00 + fu * (1.0 - fv) * c10 + (1.0 - fu) * fv * c01 +
            fu * fv * c11;
  s.jacobian.col(0) = (1.0 - fv) * (c10 - c00) + fv * (c11 - c01);
  s.jacobian.col(1) = (1.0 - fu) * (c01 - c00) + fu * (c11 - c10);
  s.corner_u[0] = u0; s.corner_v[0] = v0; s.weight[0] = (1.0 - fu) * (1.0 - fv);
  s.corner_u[1] = u1; s.corner_v[1] = v0; s.weight[1] = fu * (1.0 - fv);
  s.corner_u[2] = u0; s.corner_v[2] = v1; s.weight[2] = (1.0 - fu) * fv;
  s.corner_u[3] = u1; s.corner_v[3] = v1; s.weight[3] = fu * fv;
  return s;
}

std::optional<Eigen::Vector2d> sample(const FlowField& flow, const Eigen::Vector2d& p) {
  const auto s = sample_detailed(flow, p);
  if (!s) return std::nullopt;
  return s->value;
}

std::optional<double> cycle_distance(const FlowField& fab, const FlowField& fba,
                                     const Eigen::Vector2i& x) {
  const Eigen::Vector2d forward = apply(fba, x);
  if (!fba.valid_at(x.x(), x.y())) return std::nullopt;
  const auto back = sample(fab, forward);
  if (!back) return std::nullopt;
  return (*back + forward - x.cast<double>()).norm();
}

}  // namespace epiflow
