#include "epiflow/supervision.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "epiflow/errors.hpp"
#include "epiflow/parallel.hpp"

namespace epiflow {

namespace {

double sign_or_zero(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

LossReport make_report(const std::string& term, double sum, std::size_t count, double weight,
                       Reduction reduction) {
  if (count == 0) throw EmptySupport(term);
  const double value = reduction == Reduction::Sum ? sum : sum / static_cast<double>(count);
  LossReport report;
  report.per_term[term] = value;
  report.count[term] = count;
  report.total = weight * value;
  return report;
}

}  // namespace

void LossConfig::validate() const {
  if (w_sed < 0.0 || w_cyc < 0.0 || w_bit < 0.0) throw ValidationError("loss weights must be >= 0");
  if (alpha < 0.0 || beta < 0.0) throw ValidationError("cycle thresholds must be >= 0");
}

LossConfig LossConfig::from_key_values(const std::map<std::string, std::string>& kv) {
  LossConfig cfg;
  for (const auto& [key, value] : kv) {
    try {
      if (key == "w_sed") cfg.w_sed = std::stod(value);
      else if (key == "w_cyc") cfg.w_cyc = std::stod(value);
      else if (key == "w_bit") cfg.w_bit = std::stod(value);
      else if (key == "alpha") cfg.alpha = std::stod(value);
      else if (key == "beta") cfg.beta = std::stod(value);
      else if (key == "reduction") {
        if (value == "sum") cfg.reduction = Reduction::Sum;
        else if (value == "mean-over-contributing" || value == "mean")
          cfg.reduction = Reduction::MeanOverContributing;
        else throw ValidationError("unknown reduction '" + value + "'");
      } else {
        throw ValidationError("unknown loss config key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw ValidationError("loss config key '" + key + "': not a number: '" + value + "'");
    }
  }
  cfg.validate();
  return cfg;
}

std::map<std::string, std::string> LossConfig::to_key_values() const {
  return {{"w_sed", format_double(w_sed)},
          {"w_cyc", format_double(w_cyc)},
          {"w_bit", format_double(w_bit)},
          {"alpha", format_double(alpha)},
          {"beta", format_double(beta)},
          {"reduction", reduction == Reduction::Sum ? "sum" : "mean-over-contributing"}};
}

std::pair<LossReport, GradField> loss_sed(const FlowField& fba, const FundamentalMatrix& f,
                                          const LossConfig& cfg) {
  cfg.validate();
  const int w = fba.width();
  const int h = fba.height();
  GradField grad(w, h);
  std::vector<double> row_sum(static_cast<std::size_t>(h), 0.0);
  std::vector<std::size_t> row_count(static_cast<std::size_t>(h), 0);

  parallel_rows(h, [&](int v) {
    for (int u = 0; u < w; ++u) {
      if (!fba.valid_at(u, v)) continue;
      const Eigen::Vector2d x(u, v);
      const Eigen::Vector2d xp = x + fba.vector_at(u, v);
      const auto eval = sed_value_and_gradient(f, x, xp);
      if (!eval) continue;  // near-epipole pixel: unsupervised
      row_sum[static_cast<std::size_t>(v)] += eval->value;
      row_count[static_cast<std::size_t>(v)] += 1;
      grad.add(u, v, eval->gradient);
    }
  });

  double sum = 0.0;
  std::size_t count = 0;
  for (int v = 0; v < h; ++v) {
    sum += row_sum[static_cast<std::size_t>(v)];
    count += row_count[static_cast<std::size_t>(v)];
  }
  auto report = make_report("sed", sum, count, cfg.w_sed, cfg.reduction);
  if (cfg.reduction == Reduction::MeanOverContributing) grad.scale(1.0 / static_cast<double>(count));
  return {std::move(report), std::move(grad)};
}

std::tuple<LossReport, GradField, GradField> loss_cycle(const FlowField& fba, const FlowField& fab,
                                                        const LossConfig& cfg) {
  cfg.validate();
  const int w = fba.width();
  const int h = fba.height();
  GradField grad_fba(w, h);
  GradField grad_fab(fab.width(), fab.height());
  double sum = 0.0;
  std::size_t count = 0;

  // Gradients scatter into fab at arbitrary rows, so this loop stays serial.
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      if (!fba.valid_at(u, v)) continue;
      const Eigen::Vector2d x(u, v);
      const Eigen::Vector2d flow = fba.vector_at(u, v);
      const auto back = sample_detailed(fab, x + flow);
      if (!back) continue;  // forward point left the sampling domain
      const Eigen::Vector2d round_trip = back->value + flow;
      const double d = round_trip.norm();
      const double threshold = std::max(cfg.alpha, cfg.beta * flow.norm());
      if (d > threshold) continue;  // adaptive occlusion filter (stop-gradient)
      sum += d;
      count += 1;
      if (d > 0.0) {
        const Eigen::Vector2d dir = round_trip / d;
        grad_fba.add(u, v, dir + back->jacobian.transpose() * dir);
        for (int k = 0; k < 4; ++k) {
          grad_fab.add(back->corner_u[k], back->corner_v[k], back->weight[k] * dir);
        }
      }
    }
  }

  auto report = make_report("cyc", sum, count, cfg.w_cyc, cfg.reduction);
  if (cfg.reduction == Reduction::MeanOverContributing) {
    const double inv = 1.0 / static_cast<double>(count);
    grad_fba.scale(inv);
    grad_fab.scale(inv);
  }
  return {std::move(report), std::move(grad_fba), std::move(grad_fab)};
}

namespace {

// One direction of the BiT sum: L1 distance of flow to gt on jointly valid
// pixels. Returns (sum, count), accumulates sign gradients.
std::pair<double, std::size_t> bit_direction(const FlowField& flow, const FlowField& gt,
                                             GradField& grad) {
  if (flow.width() != gt.width() || flow.height() != gt.height()) {
    throw ValidationError("bit loss: flow and ground-truth grids differ");
  }
  const int w = flow.width();
  const int h = flow.height();
  std::vector<double> row_sum(static_cast<std::size_t>(h), 0.0);
  std::vector<std::size_t> row_count(static_cast<std::size_t>(h), 0);
  parallel_rows(h, [&](int v) {
    for (int u = 0; u < w; ++u) {
      if (!flow.valid_at(u, v) || !gt.valid_at(u, v)) continue;
      const Eigen::Vector2d r = flow.vector_at(u, v) - gt.vector_at(u, v);
      row_sum[static_cast<std::size_t>(v)] += std::abs(r.x()) + std::abs(r.y());
      row_count[static_cast<std::size_t>(v)] += 1;
      grad.add(u, v, Eigen::Vector2d(sign_or_zero(r.x()), sign_or_zero(r.y())));
    }
  });
  double sum = 0.0;
  std::size_t count = 0;
  for (int v = 0; v < h; ++v) {
    sum += row_sum[static_cast<std::size_t>(v)];
    count += row_count[static_cast<std::size_t>(v)];
  }
  return {sum, count};
}

}  // namespace

std::tuple<LossReport, GradField, GradField> loss_bit_against(
    const FlowField& fbpb, const FlowField& fbbp, const FlowField& gt_forward,
    const FlowField& gt_backward, const LossConfig& cfg, BitDirections directions) {
  cfg.validate();
  if (!directions.forward && !directions.backward) {
    throw ValidationError("bit loss: no direction enabled");
  }
  GradField grad_fbpb(fbpb.width(), fbpb.height());
  GradField grad_fbbp(fbbp.width(), fbbp.height());
  double sum = 0.0;
  std::size_t count = 0;
  if (directions.forward) {
    const auto [s, c] = bit_direction(fbpb, gt_forward, grad_fbpb);
    sum += s;
    count += c;
  }
  if (directions.backward) {
    const auto [s, c] = bit_direction(fbbp, gt_backward, grad_fbbp);
    sum += s;
    count += c;
  }
  auto report = make_report("bit", sum, count, cfg.w_bit, cfg.reduction);
  if (cfg.reduction == Reduction::MeanOverContributing) {
    const double inv = 1.0 / static_cast<double>(count);
    grad_fbpb.scale(inv);
    grad_fbbp.scale(inv);
  }
  return {std::move(report), std::move(grad_fbpb), std::move(grad_fbbp)};
}

std::tuple<LossReport, GradField, GradField> loss_bit(const FlowField& fbpb, const FlowField& fbbp,
                                                      const TransformSpec& t, const LossConfig& cfg,
                                                      BitDirections directions) {
  const FlowField gt_forward =
      dense_flow_from_transform(t, PixelGrid{fbpb.width(), fbpb.height()}, FlowDirection::Forward);
  const FlowField gt_backward =
      dense_flow_from_transform(t, PixelGrid{fbbp.width(), fbbp.height()}, FlowDirection::Inverse);
  return loss_bit_against(fbpb, fbbp, gt_forward, gt_backward, cfg, directions);
}

double term_weight(const LossConfig& cfg, const std::string& term) {
  if (term == "sed") return cfg.w_sed;
  if (term == "cyc") return cfg.w_cyc;
  if (term == "bit") return cfg.w_bit;
  throw ValidationError("unknown loss term '" + term + "'");
}

LossReport loss_total(const std::vector<LossReport>& parts, const LossConfig& cfg) {
  LossReport merged;
  for (const auto& part : parts) {
    for (const auto& [term, value] : part.per_term) {
      merged.per_term[term] += value;
      auto it = part.count.find(term);
      merged.count[term] += it == part.count.end() ? 0 : it->second;
    }
  }
  merged.total = 0.0;
  for (const auto& [term, value] : merged.per_term) {
    merged.total += term_weight(cfg, term) * value;
  }
  return merged;
}

}  // namespace epiflow
