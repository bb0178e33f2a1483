#include "epiflow/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "epiflow/errors.hpp"

namespace epiflow {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Shared dense-evaluation walk: calls fn(epe, gt_norm) per evaluated pixel.
template <typename Fn>
std::size_t for_each_masked(const FlowField& pred, const FlowField& gt,
                            const std::vector<std::uint8_t>* extra_mask, Fn&& fn) {
  if (pred.width() != gt.width() || pred.height() != gt.height()) {
    throw ValidationError("flow fields differ in shape");
  }
  if (extra_mask != nullptr && extra_mask->size() != gt.grid().size()) {
    throw ValidationError("mask size does not match flow field");
  }
  std::size_t count = 0;
  for (int v = 0; v < gt.height(); ++v) {
    for (int u = 0; u < gt.width(); ++u) {
      if (!pred.valid_at(u, v) || !gt.valid_at(u, v)) continue;
      if (extra_mask != nullptr && (*extra_mask)[gt.index(u, v)] == 0) continue;
      fn((pred.vector_at(u, v) - gt.vector_at(u, v)).norm(), gt.vector_at(u, v).norm());
      ++count;
    }
  }
  return count;
}

}  // namespace

double aepe(const FlowField& pred, const FlowField& gt,
            const std::vector<std::uint8_t>* extra_mask) {
  double sum = 0.0;
  const std::size_t n = for_each_masked(pred, gt, extra_mask, [&](double epe, double) { sum += epe; });
  if (n == 0) throw EmptyMask();
  return sum / static_cast<double>(n);
}

double f1_outlier_rate(const FlowField& pred, const FlowField& gt,
                       const std::vector<std::uint8_t>* extra_mask) {
  std::size_t outliers = 0;
  const std::size_t n = for_each_masked(pred, gt, extra_mask, [&](double epe, double gt_norm) {
    if (epe > 3.0 && epe > 0.05 * gt_norm) ++outliers;
  });
  if (n == 0) throw EmptyMask();
  return static_cast<double>(outliers) / static_cast<double>(n);
}

std::map<double, double> accuracy_at(std::span<const double> endpoint_errors,
                                     std::span<const double> thresholds) {
  if (endpoint_errors.empty()) throw EmptySet();
  std::map<double, double> acc;
  for (const double t : thresholds) {
    std::size_t correct = 0;
    for (const double e : endpoint_errors) {
      if (e < t) ++correct;  // strict: "smaller than eps"
    }
    acc[t] = static_cast<double>(correct) / static_cast<double>(endpoint_errors.size());
  }
  return acc;
}

std::map<double, double> accuracy_at(const FlowField& pred, const FlowField& gt,
                                     std::span<const double> thresholds,
                                     const std::vector<std::uint8_t>* extra_mask) {
  std::vector<double> errors;
  for_each_masked(pred, gt, extra_mask, [&](double epe, double) { errors.push_back(epe); });
  return accuracy_at(errors, thresholds);
}

FlowErrorStats flow_error_stats(const FlowField& pred, const FlowField& gt,
                                std::span<const double> acc_thresholds,
                                const std::vector<std::uint8_t>* extra_mask) {
  FlowErrorStats stats;
  std::vector<double> errors;
  double sum = 0.0;
  std::size_t outliers = 0;
  stats.count = for_each_masked(pred, gt, extra_mask, [&](double epe, double gt_norm) {
    sum += epe;
    if (epe > 3.0 && epe > 0.05 * gt_norm) ++outliers;
    errors.push_back(epe);
  });
  if (stats.count == 0) throw EmptyMask();
  stats.aepe = sum / static_cast<double>(stats.count);
  stats.f1 = static_cast<double>(outliers) / static_cast<double>(stats.count);
  stats.acc_at = accuracy_at(errors, acc_thresholds);
  return stats;
}

MatchEvalStats mma(std::span<const Eigen::Vector2d> pa, std::span<const Eigen::Vector2d> pb,
                   const Homography& gt_h, std::span<const double> thresholds,
                   std::size_t num_features) {
  if (pa.size() != pb.size()) throw ValidationError("point lists differ in length");
  if (pa.empty()) throw EmptyMatches();
  MatchEvalStats stats;
  stats.num_matches = pa.size();
  stats.num_features = num_features;
  std::vector<double> errors(pa.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    errors[i] = (gt_h.apply(pa[i]) - pb[i]).norm();
  }
  for (const double t : thresholds) {
    std::size_t correct = 0;
    for (const double e : errors) {
      if (e <= t) ++correct;
    }
    stats.mma[t] = static_cast<double>(correct) / static_cast<double>(errors.size());
  }
  return stats;
}

std::pair<double, bool> corner_correctness(const Homography& est, const Homography& gt, int width,
                                           int height, double eps) {
  const Eigen::Vector2d corners[4] = {{0.0, 0.0},
                                      {static_cast<double>(width - 1), 0.0},
                                      {0.0, static_cast<double>(height - 1)},
                                      {static_cast<double>(width - 1), static_cast<double>(height - 1)}};
  double sum = 0.0;
  for (const auto& c : corners) sum += (est.apply(c) - gt.apply(c)).norm();
  const double avg = sum / 4.0;
  return {avg, avg < eps};
}

PoseAngularErrors pose_angular_errors(const RelativePose& est, const RelativePose& gt,
                                      double threshold_deg) {
  if (est.translation.norm() < 1e-12 || gt.translation.norm() < 1e-12) throw ZeroTranslation();
  PoseAngularErrors out;
  const double cos_rot =
      std::clamp(((est.rotation.transpose() * gt.rotation).trace() - 1.0) / 2.0, -1.0, 1.0);
  out.rotation_deg = std::acos(cos_rot) * 180.0 / kPi;
  const double cos_trans = std::clamp(
      est.translation.normalized().dot(gt.translation.normalized()), -1.0, 1.0);
  out.translation_deg = std::acos(cos_trans) * 180.0 / kPi;
  out.correct_at["rotation"] = out.rotation_deg < threshold_deg;
  out.correct_at["translation"] = out.translation_deg < threshold_deg;
  return out;
}

}  // namespace epiflow
