#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "epiflow/flow_field.hpp"

namespace epiflow {

/// Sparse features with unit-L2 descriptors (columns of the D x N matrix).
class KeypointSet {
public:
  KeypointSet() = default;

  /// Normalizes descriptors to unit L2 norm; throws ValidationError on a
  /// zero-norm descriptor or mismatched sizes.
  static KeypointSet create(std::vector<Eigen::Vector2d> points, Eigen::MatrixXd descriptors);

  std::size_t size() const { return points_.size(); }
  int descriptor_dim() const { return static_cast<int>(descriptors_.rows()); }
  const std::vector<Eigen::Vector2d>& points() const { return points_; }
  const Eigen::MatrixXd& descriptors() const { return descriptors_; }
  Eigen::VectorXd descriptor(std::size_t i) const { return descriptors_.col(static_cast<Eigen::Index>(i)); }

private:
  std::vector<Eigen::Vector2d> points_;
  Eigen::MatrixXd descriptors_;  // D x N, unit columns
};

struct Match {
  std::size_t index_a;
  std::size_t index_b;
  int stage;          // 1 = flow-guided, 2 = descriptor supplement
  double similarity;  // descriptor dot product
};

/// One-to-one correspondence set, canonically sorted by index_a.
struct MatchSet {
  std::vector<Match> pairs;
};

/// Per-query selected target index; nullopt = unmatched.
using DirectedMatches = std::vector<std::optional<std::size_t>>;

/// Flow-guided directed matching: each query a_i is warped by the
/// (bilinearly sampled) flow and matched to the most similar descriptor among
/// candidates within radius_px of the warped point. Unmatched when the flow
/// sample is invalid or the candidate circle is empty. Ties break toward the
/// lowest candidate index.
DirectedMatches stage1_directed(const KeypointSet& a, const KeypointSet& b, const FlowField& fba,
                                double radius_px);

/// Keeps (i, j) iff mba[i] = j and mab[j] = i.
std::vector<std::pair<std::size_t, std::size_t>> mutual_filter(const DirectedMatches& mba,
                                                               const DirectedMatches& mab);

/// Global nearest-descriptor matching restricted to the stage-1 leftovers on
/// the query sides (candidates are the full sets), kept only under mutual
/// reciprocity. Returns stage-1 plus the supplements, disjoint on both sides.
MatchSet stage2_supplement(const KeypointSet& a, const KeypointSet& b, const MatchSet& stage1);

/// Full two-stage pipeline: stage-1 in both directions, mutual filter,
/// stage-2 supplement. Deterministic; output sorted by index_a.
MatchSet match(const KeypointSet& a, const KeypointSet& b, const FlowField& fba,
               const FlowField& fab, double radius_px = 5.0);

}  // namespace epiflow
