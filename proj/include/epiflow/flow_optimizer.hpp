#pragma once

#include <Eigen/Core>

#include <array>
#include <optional>
#include <vector>

#include "epiflow/flow_field.hpp"
#include "epiflow/geometry.hpp"
#include "epiflow/supervision.hpp"
#include "epiflow/synth_transform.hpp"

namespace epiflow {

enum class FlowModelKind { Constant, Grid };

/// Parametric flow field: either a single vector shared by all pixels or a
/// coarse control lattice (spacing in pixels) that is bilinearly upsampled to
/// the pixel grid. The lattice values are the optimizer's parameters; the
/// upsampled field is exact at lattice nodes.
class FlowModel {
public:
  static FlowModel constant(int width, int height, const Eigen::Vector2d& value);
  static FlowModel grid(int width, int height, int spacing);

  FlowModelKind kind() const { return kind_; }
  int width() const { return width_; }
  int height() const { return height_; }
  int spacing() const { return spacing_; }
  int lattice_width() const { return lattice_w_; }
  int lattice_height() const { return lattice_h_; }

  std::vector<Eigen::Vector2d>& values() { return values_; }
  const std::vector<Eigen::Vector2d>& values() const { return values_; }

  /// Densified field (all-valid mask).
  FlowField evaluate() const;

  /// Accumulates the transpose of the upsampling: lattice_grad[node] +=
  /// sum over pixels of bilinear_weight(node, pixel) * pixel_grad(pixel).
  void accumulate_parameter_gradient(const GradField& pixel_grad,
                                     std::vector<Eigen::Vector2d>& lattice_grad) const;

private:
  FlowModelKind kind_ = FlowModelKind::Constant;
  int width_ = 0;
  int height_ = 0;
  int spacing_ = 1;
  int lattice_w_ = 1;
  int lattice_h_ = 1;
  std::vector<Eigen::Vector2d> values_;
};

/// Densify m over grid; the grid must match the model domain.
FlowField evaluate_model(const FlowModel& m, const PixelGrid& grid);

/// Which of the objective terms are active. Mirrors the ablation axes:
/// sed, full vs adaptive cycle, and the two BiT directions.
struct OptimizerLossFlags {
  bool sed = true;
  bool cyc_full = false;
  bool cyc_adaptive = true;
  bool bit_forward = true;
  bool bit_backward = true;

  bool any() const { return sed || cyc_full || cyc_adaptive || bit_forward || bit_backward; }
};

struct OptimizerConfig {
  double step_size = 0.5;
  double momentum = 0.9;
  int max_iterations = 500;
  double grad_tolerance = 1e-6;
  OptimizerLossFlags losses;
  // Plateau step decay; the L1/absolute-value objectives need a shrinking
  // step to settle below pixel scale.
  double plateau_decay = 0.5;
  int plateau_patience = 10;

  void validate() const;
};

/// The four flow directions of the training triplet, as one parameter vector.
struct TripletModels {
  FlowModel fba;   // B <- A, on A's grid
  FlowModel fab;   // A <- B, on B's grid
  FlowModel fbpb;  // B' <- B, on B's grid
  FlowModel fbbp;  // B <- B', on B''s grid
};

/// Optional ground truth for the aepe_vs_gt trace column.
struct TripletGroundTruth {
  std::optional<FlowField> fba;
  std::optional<FlowField> fab;
};

struct ObjectiveEvaluation {
  LossReport report;
  // Lattice gradients of the total objective, same order as TripletModels.
  std::array<std::vector<Eigen::Vector2d>, 4> parameter_gradients;

  double gradient_norm() const;
};

/// One evaluation of the combined objective
///   w_sed * (sed(fba;F) + sed(fab;F^T))
/// + w_cyc * (cyc(fba,fab) + cyc(fab,fba))
/// + w_bit *  bit(fbpb,fbbp;T)
/// restricted to the enabled flags, with gradients pulled back through the
/// lattice upsampling. cyc_full disables the adaptive filter.
ObjectiveEvaluation evaluate_objective(const TripletModels& models, const FundamentalMatrix& f,
                                       const TransformSpec& t, const OptimizerLossFlags& flags,
                                       const LossConfig& loss_cfg);

struct OptimizeResult {
  TripletModels models;
  std::vector<LossReport> trace;      // one entry per evaluated iterate
  std::vector<double> aepe_trace;     // parallel to trace when gt supplied
};

/// First-order descent with momentum on all four lattices jointly. Stops at
/// the iteration budget or when the gradient norm falls below tolerance;
/// returns the best iterate seen, so the final total never exceeds the
/// initial one. Throws NoLossEnabled / DivergenceDetected.
OptimizeResult optimize_triplet(const TripletModels& init, const FundamentalMatrix& f,
                                const TransformSpec& t, const OptimizerConfig& cfg,
                                const LossConfig& loss_cfg,
                                const TripletGroundTruth* gt = nullptr);

}  // namespace epiflow
