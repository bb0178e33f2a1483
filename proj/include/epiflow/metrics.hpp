#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "epiflow/flow_field.hpp"
#include "epiflow/geometry.hpp"
#include "epiflow/model_fit.hpp"

namespace epiflow {

struct FlowErrorStats {
  double aepe = 0.0;
  double f1 = 0.0;
  std::map<double, double> acc_at;
  std::size_t count = 0;
};

struct MatchEvalStats {
  std::map<double, double> mma;
  std::size_t num_matches = 0;
  std::size_t num_features = 0;
};

/// Mean endpoint error over pixels valid in both fields (and in extra_mask
/// when given). Throws EmptyMask.
double aepe(const FlowField& pred, const FlowField& gt,
            const std::vector<std::uint8_t>* extra_mask = nullptr);

/// Fraction of evaluated pixels that are outliers under the standard flow
/// benchmark rule: EPE > 3 px AND EPE > 5% of |gt|.
double f1_outlier_rate(const FlowField& pred, const FlowField& gt,
                       const std::vector<std::uint8_t>* extra_mask = nullptr);

/// Per-threshold fraction of endpoint errors strictly below the threshold
/// ("smaller than eps"). Throws EmptySet.
std::map<double, double> accuracy_at(std::span<const double> endpoint_errors,
                                     std::span<const double> thresholds);
std::map<double, double> accuracy_at(const FlowField& pred, const FlowField& gt,
                                     std::span<const double> thresholds,
                                     const std::vector<std::uint8_t>* extra_mask = nullptr);

/// aepe + f1 + accuracy in one pass over the shared mask.
FlowErrorStats flow_error_stats(const FlowField& pred, const FlowField& gt,
                                std::span<const double> acc_thresholds,
                                const std::vector<std::uint8_t>* extra_mask = nullptr);

/// Mean matching accuracy: per threshold, the fraction of matches whose
/// reprojection error under the ground-truth homography is <= threshold
/// (inclusive, per the MMA lineage convention). Throws EmptyMatches.
MatchEvalStats mma(std::span<const Eigen::Vector2d> pa, std::span<const Eigen::Vector2d> pb,
                   const Homography& gt_h, std::span<const double> thresholds,
                   std::size_t num_features = 0);

/// Mean displacement of the four image corners under est vs gt; correct iff
/// the mean is strictly below eps.
std::pair<double, bool> corner_correctness(const Homography& est, const Homography& gt, int width,
                                           int height, double eps = 5.0);

struct PoseAngularErrors {
  double rotation_deg = 0.0;
  double translation_deg = 0.0;
  std::map<std::string, bool> correct_at;  // keys "rotation", "translation"
};

/// Rotation angle between the two rotations and the angle between the two
/// translation directions, in degrees; correctness of each component at the
/// given threshold. Throws ZeroTranslation.
PoseAngularErrors pose_angular_errors(const RelativePose& est, const RelativePose& gt,
                                      double threshold_deg = 10.0);

}  // namespace epiflow
