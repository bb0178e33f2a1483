#include "epiflow/matcher.hpp"

#include <algorithm>

#include "epiflow/errors.hpp"

namespace epiflow {

KeypointSet KeypointSet::create(std::vector<Eigen::Vector2d> points, Eigen::MatrixXd descriptors) {
  if (static_cast<std::size_t>(descriptors.cols()) != points.size()) {
    throw ValidationError("keypoint count does not match descriptor count");
  }
  for (Eigen::Index i = 0; i < descriptors.cols(); ++i) {
    const double n = descriptors.col(i).norm();
    if (!(n > 1e-12)) throw ValidationError("descriptor " + std::to_string(i) + " has zero norm");
    descriptors.col(i) /= n;
  }
  KeypointSet set;
  set.points_ = std::move(points);
  set.descriptors_ = std::move(descriptors);
  return set;
}

DirectedMatches stage1_directed(const KeypointSet& a, const KeypointSet& b, const FlowField& fba,
                                double radius_px) {
  if (radius_px < 0.0) throw ValidationError("matching radius must be >= 0");
  DirectedMatches out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto flow = sample(fba, a.points()[i]);
    if (!flow) continue;
    const Eigen::Vector2d warped = a.points()[i] + *flow;
    double best_sim = -std::numeric_limits<double>::infinity();
    std::optional<std::size_t> best;
    for (std::size_t j = 0; j < b.size(); ++j) {
      if ((b.points()[j] - warped).norm() > radius_px) continue;
      const double sim = a.descriptors().col(static_cast<Eigen::Index>(i))
                             .dot(b.descriptors().col(static_cast<Eigen::Index>(j)));
      if (sim > best_sim) {
        best_sim = sim;
        best = j;
      }
    }
    out[i] = best;
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> mutual_filter(const DirectedMatches& mba,
                                                               const DirectedMatches& mab) {
  std::vector<std::pair<std::size_t, std::size_t>> kept;
  for (std::size_t i = 0; i < mba.size(); ++i) {
    if (!mba[i]) continue;
    const std::size_t j = *mba[i];
    if (j < mab.size() && mab[j] && *mab[j] == i) kept.emplace_back(i, j);
  }
  return kept;
}

namespace {

double similarity(const KeypointSet& a, const KeypointSet& b, std::size_t i, std::size_t j) {
  return a.descriptors().col(static_cast<Eigen::Index>(i))
      .dot(b.descriptors().col(static_cast<Eigen::Index>(j)));
}

// Global nearest descriptor of query i (from qs) among all candidates.
std::optional<std::size_t> nearest_descriptor(const KeypointSet& qs, std::size_t i,
                                              const KeypointSet& cs) {
  if (cs.size() == 0) return std::nullopt;
  std::size_t best = 0;
  double best_sim = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < cs.size(); ++j) {
    const double sim = qs.descriptors().col(static_cast<Eigen::Index>(i))
                           .dot(cs.descriptors().col(static_cast<Eigen::Index>(j)));
    if (sim > best_sim) {
      best_sim = sim;
      best = j;
    }
  }
  return best;
}

}  // namespace

MatchSet stage2_supplement(const KeypointSet& a, const KeypointSet& b, const MatchSet& stage1) {
  std::vector<char> a_used(a.size(), 0);
  std::vector<char> b_used(b.size(), 0);
  for (const auto& m : stage1.pairs) {
    a_used[m.index_a] = 1;
    b_used[m.index_b] = 1;
  }

  // Directed nearest-descriptor maps for the leftovers; candidates span the
  // full opposite set, so a leftover whose best candidate was consumed in
  // stage 1 simply fails reciprocity.
  std::vector<std::optional<std::size_t>> fwd(a.size());
  std::vector<std::optional<std::size_t>> bwd(b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a_used[i]) fwd[i] = nearest_descriptor(a, i, b);
  }
  for (std::size_t j = 0; j < b.size(); ++j) {
    if (!b_used[j]) bwd[j] = nearest_descriptor(b, j, a);
  }

  MatchSet out = stage1;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a_used[i] || !fwd[i]) continue;
    const std::size_t j = *fwd[i];
    if (b_used[j] || !bwd[j] || *bwd[j] != i) continue;
    out.pairs.push_back(Match{i, j, 2, similarity(a, b, i, j)});
  }
  std::sort(out.pairs.begin(), out.pairs.end(),
            [](const Match& x, const Match& y) { return x.index_a < y.index_a; });
  return out;
}

MatchSet match(const KeypointSet& a, const KeypointSet& b, const FlowField& fba,
               const FlowField& fab, double radius_px) {
  const DirectedMatches mba = stage1_directed(a, b, fba, radius_px);
  const DirectedMatches mab = stage1_directed(b, a, fab, radius_px);
  MatchSet stage1;
  for (const auto& [i, j] : mutual_filter(mba, mab)) {
    stage1.pairs.push_back(Match{i, j, 1, similarity(a, b, i, j)});
  }
  return stage2_supplement(a, b, stage1);
}

}  // namespace epiflow
