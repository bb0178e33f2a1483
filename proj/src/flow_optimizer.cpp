#include "epiflow/flow_optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "epiflow/errors.hpp"

namespace epiflow {

namespace {

// Cell coordinates and weights of a pixel inside the lattice.
struct LatticeCell {
  int i0, j0, i1, j1;
  double fu, fv;
};

LatticeCell locate(int u, int v, int spacing, int lattice_w, int lattice_h) {
  const double cu = static_cast<double>(u) / spacing;
  const double cv = static_cast<double>(v) / spacing;
  LatticeCell c;
  c.j0 = std::min(static_cast<int>(std::floor(cu)), lattice_w - 2);
  c.i0 = std::min(static_cast<int>(std::floor(cv)), lattice_h - 2);
  c.j0 = std::max(c.j0, 0);
  c.i0 = std::max(c.i0, 0);
  c.j1 = std::min(c.j0 + 1, lattice_w - 1);
  c.i1 = std::min(c.i0 + 1, lattice_h - 1);
  c.fu = cu - c.j0;
  c.fv = cv - c.i0;
  return c;
}

double mean_epe(const FlowField& pred, const FlowField& gt) {
  double sum = 0.0;
  std::size_t n = 0;
  for (int v = 0; v < pred.height(); ++v) {
    for (int u = 0; u < pred.width(); ++u) {
      if (!gt.valid_at(u, v) || !pred.valid_at(u, v)) continue;
      sum += (pred.vector_at(u, v) - gt.vector_at(u, v)).norm();
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

}  // namespace

FlowModel FlowModel::constant(int width, int height, const Eigen::Vector2d& value) {
  if (width < 1 || height < 1) throw ValidationError("flow model domain must be positive");
  FlowModel m;
  m.kind_ = FlowModelKind::Constant;
  m.width_ = width;
  m.height_ = height;
  m.spacing_ = std::max(width, height);  // unused
  m.lattice_w_ = 1;
  m.lattice_h_ = 1;
  m.values_.assign(1, value);
  return m;
}

FlowModel FlowModel::grid(int width, int height, int spacing) {
  if (width < 1 || height < 1) throw ValidationError("flow model domain must be positive");
  if (spacing < 1) throw ValidationError("lattice spacing must be >= 1");
  FlowModel m;
  m.kind_ = FlowModelKind::Grid;
  m.width_ = width;
  m.height_ = height;
  m.spacing_ = spacing;
  m.lattice_w_ = std::max(2, (width - 2 + spacing) / spacing + 1);
  m.lattice_h_ = std::max(2, (height - 2 + spacing) / spacing + 1);
  m.values_.assign(static_cast<std::size_t>(m.lattice_w_) * m.lattice_h_,
                   Eigen::Vector2d::Zero());
  return m;
}

FlowField FlowModel::evaluate() const {
  FlowField field(width_, height_);
  if (kind_ == FlowModelKind::Constant) {
    for (int v = 0; v < height_; ++v)
      for (int u = 0; u < width_; ++u) field.set(u, v, values_[0]);
    return field;
  }
  for (int v = 0; v < height_; ++v) {
    for (int u = 0; u < width_; ++u) {
      const LatticeCell c = locate(u, v, spacing_, lattice_w_, lattice_h_);
      const auto node = [&](int i, int j) -> const Eigen::Vector2d& {
        return values_[static_cast<std::size_t>(i) * lattice_w_ + j];
      };
      field.set(u, v, (1.0 - c.fu) * (1.0 - c.fv) * node(c.i0, c.j0) +
                          c.fu * (1.0 - c.fv) * node(c.i0, c.j1) +
                          (1.0 - c.fu) * c.fv * node(c.i1, c.j0) +
                          c.fu * c.fv * node(c.i1, c.j1));
    }
  }
  return field;
}

void FlowModel::accumulate_parameter_gradient(const GradField& pixel_grad,
                                              std::vector<Eigen::Vector2d>& lattice_grad) const {
  if (pixel_grad.width() != width_ || pixel_grad.height() != height_) {
    throw ValidationError("gradient field does not match model domain");
  }
  lattice_grad.resize(values_.size(), Eigen::Vector2d::Zero());
  if (kind_ == FlowModelKind::Constant) {
    for (const auto& g : pixel_grad.data()) lattice_grad[0] += g;
    return;
  }
  for (int v = 0; v < height_; ++v) {
    for (int u = 0; u < width_; ++u) {
      const Eigen::Vector2d& g = pixel_grad.at(u, v);
      if (g.isZero()) continue;
      const LatticeCell c = locate(u, v, spacing_, lattice_w_, lattice_h_);
      const auto idx = [&](int i, int j) { return static_cast<std::size_t>(i) * lattice_w_ + j; };
      lattice_grad[idx(c.i0, c.j0)] += (1.0 - c.fu) * (1.0 - c.fv) * g;
      lattice_grad[idx(c.i0, c.j1)] += c.fu * (1.0 - c.fv) * g;
      lattice_grad[idx(c.i1, c.j0)] += (1.0 - c.fu) * c.fv * g;
      lattice_grad[idx(c.i1, c.j1)] += c.fu * c.fv * g;
    }
  }
}

FlowField evaluate_model(const FlowModel& m, const PixelGrid& grid) {
  if (grid.width != m.width() || grid.height != m.height()) {
    throw ValidationError("pixel grid does not match model domain");
  }
  return m.evaluate();
}

void OptimizerConfig::validate() const {
  if (!(step_size > 0.0)) throw ValidationError("step size must be > 0");
  if (max_iterations < 1) throw ValidationError("iteration budget must be >= 1");
  if (momentum < 0.0 || momentum >= 1.0) throw ValidationError("momentum must be in [0, 1)");
}

double ObjectiveEvaluation::gradient_norm() const {
  double sq = 0.0;
  for (const auto& grads : parameter_gradients)
    for (const auto& g : grads) sq += g.squaredNorm();
  return std::sqrt(sq);
}

namespace {

ObjectiveEvaluation evaluate_objective_impl(const TripletModels& models,
                                            const FundamentalMatrix& f, const TransformSpec& t,
                                            const OptimizerLossFlags& flags,
                                            const LossConfig& loss_cfg,
                                            const FlowField* bit_gt_fwd,
                                            const FlowField* bit_gt_bwd) {
  if (!flags.any()) throw NoLossEnabled();

  const FlowField fba = models.fba.evaluate();
  const FlowField fab = models.fab.evaluate();

  ObjectiveEvaluation out;
  for (std::size_t k = 0; k < 4; ++k) {
    const FlowModel& m = k == 0 ? models.fba : k == 1 ? models.fab : k == 2 ? models.fbpb
                                                                            : models.fbbp;
    out.parameter_gradients[k].assign(m.values().size(), Eigen::Vector2d::Zero());
  }
  std::vector<LossReport> parts;

  const auto pull_back = [&](const GradField& g, int direction, double weight) {
    GradField scaled = g;
    scaled.scale(weight);
    const FlowModel& m = direction == 0 ? models.fba : direction == 1 ? models.fab
                                       : direction == 2 ? models.fbpb : models.fbbp;
    m.accumulate_parameter_gradient(scaled, out.parameter_gradients[static_cast<std::size_t>(direction)]);
  };

  if (flags.sed) {
    auto [report_ab, grad_ab] = loss_sed(fba, f, loss_cfg);
    pull_back(grad_ab, 0, loss_cfg.w_sed);
    parts.push_back(std::move(report_ab));
    auto [report_ba, grad_ba] = loss_sed(fab, f.transposed(), loss_cfg);
    pull_back(grad_ba, 1, loss_cfg.w_sed);
    parts.push_back(std::move(report_ba));
  }

  if (flags.cyc_full || flags.cyc_adaptive) {
    LossConfig cyc_cfg = loss_cfg;
    if (flags.cyc_full) {
      cyc_cfg.alpha = std::numeric_limits<double>::infinity();
      cyc_cfg.beta = 0.0;
    }
    auto [report_a, ga_fba, ga_fab] = loss_cycle(fba, fab, cyc_cfg);
    pull_back(ga_fba, 0, loss_cfg.w_cyc);
    pull_back(ga_fab, 1, loss_cfg.w_cyc);
    parts.push_back(std::move(report_a));
    auto [report_b, gb_fab, gb_fba] = loss_cycle(fab, fba, cyc_cfg);
    pull_back(gb_fab, 1, loss_cfg.w_cyc);
    pull_back(gb_fba, 0, loss_cfg.w_cyc);
    parts.push_back(std::move(report_b));
  }

  if (flags.bit_forward || flags.bit_backward) {
    const FlowField fbpb = models.fbpb.evaluate();
    const FlowField fbbp = models.fbbp.evaluate();
    const BitDirections dirs{flags.bit_forward, flags.bit_backward};
    FlowField local_fwd, local_bwd;
    if (bit_gt_fwd == nullptr) {
      local_fwd = dense_flow_from_transform(t, PixelGrid{fbpb.width(), fbpb.height()},
                                            FlowDirection::Forward);
      local_bwd = dense_flow_from_transform(t, PixelGrid{fbbp.width(), fbbp.height()},
                                            FlowDirection::Inverse);
      bit_gt_fwd = &local_fwd;
      bit_gt_bwd = &local_bwd;
    }
    auto [report, g_fbpb, g_fbbp] =
        loss_bit_against(fbpb, fbbp, *bit_gt_fwd, *bit_gt_bwd, loss_cfg, dirs);
    pull_back(g_fbpb, 2, loss_cfg.w_bit);
    pull_back(g_fbbp, 3, loss_cfg.w_bit);
    parts.push_back(std::move(report));
  }

  out.report = loss_total(parts, loss_cfg);
  return out;
}

}  // namespace

ObjectiveEvaluation evaluate_objective(const TripletModels& models, const FundamentalMatrix& f,
                                       const TransformSpec& t, const OptimizerLossFlags& flags,
                                       const LossConfig& loss_cfg) {
  return evaluate_objective_impl(models, f, t, flags, loss_cfg, nullptr, nullptr);
}

OptimizeResult optimize_triplet(const TripletModels& init, const FundamentalMatrix& f,
                                const TransformSpec& t, const OptimizerConfig& cfg,
                                const LossConfig& loss_cfg, const TripletGroundTruth* gt) {
  cfg.validate();
  loss_cfg.validate();
  if (!cfg.losses.any()) throw NoLossEnabled();

  // T is fixed during optimization; precompute the BiT targets once.
  FlowField bit_fwd, bit_bwd;
  const bool uses_bit = cfg.losses.bit_forward || cfg.losses.bit_backward;
  if (uses_bit) {
    bit_fwd = dense_flow_from_transform(t, PixelGrid{init.fbpb.width(), init.fbpb.height()},
                                        FlowDirection::Forward);
    bit_bwd = dense_flow_from_transform(t, PixelGrid{init.fbbp.width(), init.fbbp.height()},
                                        FlowDirection::Inverse);
  }

  OptimizeResult result;
  result.models = init;
  TripletModels& models = result.models;
  FlowModel* blocks[4] = {&models.fba, &models.fab, &models.fbpb, &models.fbbp};

  std::array<std::vector<Eigen::Vector2d>, 4> velocity;
  for (std::size_t k = 0; k < 4; ++k) {
    velocity[k].assign(blocks[k]->values().size(), Eigen::Vector2d::Zero());
  }

  const auto record_aepe = [&]() {
    if (gt == nullptr) return;
    double sum = 0.0;
    int n = 0;
    if (gt->fba) { sum += mean_epe(models.fba.evaluate(), *gt->fba); ++n; }
    if (gt->fab) { sum += mean_epe(models.fab.evaluate(), *gt->fab); ++n; }
    result.aepe_trace.push_back(n > 0 ? sum / n : 0.0);
  };

  double step = cfg.step_size;
  double initial_total = 0.0;
  double best_total = std::numeric_limits<double>::infinity();
  TripletModels best = models;
  int stall = 0;

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    const ObjectiveEvaluation eval = evaluate_objective_impl(
        models, f, t, cfg.losses, loss_cfg, uses_bit ? &bit_fwd : nullptr,
        uses_bit ? &bit_bwd : nullptr);
    result.trace.push_back(eval.report);
    record_aepe();

    if (iter == 0) {
      initial_total = eval.report.total;
    } else if (eval.report.total > 10.0 * initial_total && eval.report.total > 1e-9) {
      throw DivergenceDetected("total loss exceeded 10x its initial value at iteration " +
                               std::to_string(iter));
    }

    if (eval.report.total < best_total - 1e-15) {
      best_total = eval.report.total;
      best = models;
      stall = 0;
    } else if (++stall >= cfg.plateau_patience) {
      // The L1 terms keep a constant-magnitude subgradient; shrink the step
      // and drop the built-up velocity to settle onto the minimizer.
      step *= cfg.plateau_decay;
      for (auto& block : velocity)
        for (auto& v : block) v.setZero();
      stall = 0;
    }

    if (eval.gradient_norm() < cfg.grad_tolerance) break;

    for (std::size_t k = 0; k < 4; ++k) {
      auto& params = blocks[k]->values();
      for (std::size_t i = 0; i < params.size(); ++i) {
        velocity[k][i] = cfg.momentum * velocity[k][i] - step * eval.parameter_gradients[k][i];
        params[i] += velocity[k][i];
      }
    }
  }

  // Evaluate the last iterate; if an earlier one was better, return that, so
  // the returned total never exceeds the initial one.
  ObjectiveEvaluation final_eval = evaluate_objective_impl(
      models, f, t, cfg.losses, loss_cfg, uses_bit ? &bit_fwd : nullptr,
      uses_bit ? &bit_bwd : nullptr);
  if (final_eval.report.total > best_total) {
    models = best;
    final_eval = evaluate_objective_impl(models, f, t, cfg.losses, loss_cfg,
                                         uses_bit ? &bit_fwd : nullptr,
                                         uses_bit ? &bit_bwd : nullptr);
  }
  result.trace.push_back(final_eval.report);
  record_aepe();
  return result;
}

}  // namespace epiflow
