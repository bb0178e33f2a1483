#pragma once

#include <Eigen/Core>

#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "epiflow/flow_field.hpp"
#include "epiflow/geometry.hpp"
#include "epiflow/synth_transform.hpp"

namespace epiflow {

enum class Reduction { Sum, MeanOverContributing };

/// Weights, cycle-filter thresholds and reduction mode shared by all losses.
struct LossConfig {
  double w_sed = 1.0;
  double w_cyc = 1.0;
  double w_bit = 1.0;
  double alpha = 3.0;  // cycle absolute threshold, pixels
  double beta = 0.05;  // cycle relative threshold
  Reduction reduction = Reduction::MeanOverContributing;

  void validate() const;

  /// Flat key=value text: w_sed, w_cyc, w_bit, alpha, beta, reduction.
  static LossConfig from_key_values(const std::map<std::string, std::string>& kv);
  std::map<std::string, std::string> to_key_values() const;
};

/// Scalar loss decomposition. total is the weighted sum of per_term values;
/// count holds the number of contributing pixels per term.
struct LossReport {
  double total = 0.0;
  std::map<std::string, double> per_term;
  std::map<std::string, std::size_t> count;
};

/// Per-pixel d(loss)/d(flow vector); exactly zero on pixels that did not
/// contribute.
class GradField {
public:
  GradField() = default;
  GradField(int width, int height)
      : width_(width), height_(height),
        grads_(static_cast<std::size_t>(width) * height, Eigen::Vector2d::Zero()) {}

  int width() const { return width_; }
  int height() const { return height_; }
  const Eigen::Vector2d& at(int u, int v) const { return grads_[index(u, v)]; }
  void add(int u, int v, const Eigen::Vector2d& g) { grads_[index(u, v)] += g; }
  void scale(double s) {
    for (auto& g : grads_) g *= s;
  }
  const std::vector<Eigen::Vector2d>& data() const { return grads_; }

private:
  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(u);
  }
  int width_ = 0;
  int height_ = 0;
  std::vector<Eigen::Vector2d> grads_;
};

/// Sum (or mean) of sed(F, x, x + f(x)) over valid, non-degenerate pixels of
/// fba. The gradient field holds d(term)/d(flow); the report's total already
/// carries cfg.w_sed. Throws EmptySupport when nothing contributes.
std::pair<LossReport, GradField> loss_sed(const FlowField& fba, const FundamentalMatrix& f,
                                          const LossConfig& cfg);

/// Adaptive cycle-consistency loss: pixel x contributes its round-trip
/// distance d(x) iff d(x) <= max(alpha, beta * |fba(x)|). The filter mask is
/// held fixed (stop-gradient); gradients reach both fields through the
/// bilinear sampling chain rule. Returns (report, d/d fba, d/d fab).
std::tuple<LossReport, GradField, GradField> loss_cycle(const FlowField& fba,
                                                        const FlowField& fab,
                                                        const LossConfig& cfg);

struct BitDirections {
  bool forward = true;   // the B'<-B sum
  bool backward = true;  // the B<-B' sum
};

/// Bidirectional transform loss: L1 deviation of the predicted flows from the
/// exact flows induced by t and its inverse. Pixels whose target leaves the
/// image (or whose inversion fails) are excluded. Gradients are the per
/// component sign pattern. Returns (report, d/d fbpb, d/d fbbp).
std::tuple<LossReport, GradField, GradField> loss_bit(const FlowField& fbpb,
                                                      const FlowField& fbbp,
                                                      const TransformSpec& t,
                                                      const LossConfig& cfg,
                                                      BitDirections directions = {});

/// Same loss against precomputed ground-truth offset fields (their masks carry
/// the exclusions). The optimizer uses this to avoid re-inverting t per step.
std::tuple<LossReport, GradField, GradField> loss_bit_against(const FlowField& fbpb,
                                                              const FlowField& fbbp,
                                                              const FlowField& gt_forward,
                                                              const FlowField& gt_backward,
                                                              const LossConfig& cfg,
                                                              BitDirections directions = {});

/// Merges component reports: per_term entries with equal names are summed,
/// total = w_sed*sed + w_cyc*cyc + w_bit*bit.
LossReport loss_total(const std::vector<LossReport>& parts, const LossConfig& cfg);

/// Weight applied to a term name ("sed", "cyc", "bit").
double term_weight(const LossConfig& cfg, const std::string& term);

}  // namespace epiflow
