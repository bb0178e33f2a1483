#include <doctest.h>

#include <random>

#include "epiflow/errors.hpp"
#include "epiflow/supervision.hpp"
#include "testing/finite_diff.hpp"
#include "testing/fixtures.hpp"

using namespace epiflow;
using epiflow::testing::finite_difference_gradient;
using epiflow::testing::max_relative_gradient_error;

namespace {

FundamentalMatrix pure_x_translation_f() {
  Eigen::Matrix3d m;
  m << 0, 0, 0, 0, 0, -1, 0, 1, 0;
  return FundamentalMatrix(m);
}

FlowField constant_field(int w, int h, const Eigen::Vector2d& v) {
  FlowField flow(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) flow.set(x, y, v);
  return flow;
}

TransformSpec translation_transform(int w, int h, double tx, double ty) {
  Eigen::Matrix<double, 2, 3> m;
  m << 1, 0, tx, 0, 1, ty;
  return TransformSpec::affine(w, h, m);
}

}  // namespace

TEST_CASE("loss config: parse, serialize, validation") {
  const auto kv = parse_key_values("w_sed=2\nw_cyc=0.5\nalpha=4\nreduction=sum\n");
  const LossConfig cfg = LossConfig::from_key_values(kv);
  CHECK(cfg.w_sed == 2.0);
  CHECK(cfg.w_cyc == 0.5);
  CHECK(cfg.w_bit == 1.0);
  CHECK(cfg.alpha == 4.0);
  CHECK(cfg.reduction == Reduction::Sum);
  const LossConfig back = LossConfig::from_key_values(cfg.to_key_values());
  CHECK(back.alpha == cfg.alpha);
  CHECK(back.reduction == cfg.reduction);

  CHECK_THROWS_AS(LossConfig::from_key_values({{"bogus", "1"}}), ValidationError);
  CHECK_THROWS_AS(LossConfig::from_key_values({{"alpha", "-1"}}), ValidationError);
  CHECK_THROWS_AS(LossConfig::from_key_values({{"w_sed", "abc"}}), ValidationError);
}

TEST_CASE("loss_sed vanishes on the ground-truth planar flow") {
  const auto scene = testing::default_planar_scene(24, 18);
  const auto [report, grad] = loss_sed(scene.flow_ab(), scene.f, LossConfig{});
  CHECK(report.per_term.at("sed") < 1e-6);
  CHECK(report.count.at("sed") == 24 * 18);
}

TEST_CASE("loss_sed mean value on a constant field is 2|f_v|") {
  const LossConfig cfg;  // mean reduction
  const auto [report, grad] = loss_sed(constant_field(8, 6, {5, 2}), pure_x_translation_f(), cfg);
  CHECK(report.per_term.at("sed") == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(report.total == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(report.count.at("sed") == 48);

  LossConfig sum_cfg;
  sum_cfg.reduction = Reduction::Sum;
  const auto [sum_report, sum_grad] =
      loss_sed(constant_field(8, 6, {5, 2}), pure_x_translation_f(), sum_cfg);
  CHECK(sum_report.per_term.at("sed") == doctest::Approx(4.0 * 48).epsilon(1e-12));
}

TEST_CASE("loss_sed skips invalid pixels and reports empty support") {
  FlowField flow = constant_field(4, 3, {1, 1});
  for (int v = 0; v < 3; ++v)
    for (int u = 0; u < 4; ++u) flow.set_valid(u, v, false);
  CHECK_THROWS_AS(loss_sed(flow, pure_x_translation_f(), LossConfig{}), EmptySupport);
  flow.set_valid(2, 1, true);
  const auto [report, grad] = loss_sed(flow, pure_x_translation_f(), LossConfig{});
  CHECK(report.count.at("sed") == 1);
  CHECK(grad.at(0, 0).norm() == 0.0);
}

TEST_CASE("loss_sed gradient matches central finite differences") {
  const auto scene = testing::default_planar_scene(8, 6);
  std::mt19937_64 rng(61);

  // GT flow plus an offset keeps every pixel away from the |s| = 0 kink.
  FlowField flow = scene.flow_ab();
  std::uniform_real_distribution<double> offset(0.8, 1.6);
  for (int v = 0; v < 6; ++v) {
    for (int u = 0; u < 8; ++u) {
      flow.set(u, v, flow.vector_at(u, v) + Eigen::Vector2d(offset(rng), offset(rng)));
    }
  }

  for (const Reduction reduction : {Reduction::MeanOverContributing, Reduction::Sum}) {
    LossConfig cfg;
    cfg.reduction = reduction;
    const auto [report, analytic] = loss_sed(flow, scene.f, cfg);
    const GradField numeric = finite_difference_gradient(flow, [&](const FlowField& f) {
      return loss_sed(f, scene.f, cfg).first.per_term.at("sed");
    });
    CHECK(max_relative_gradient_error(analytic, numeric) < 1e-4);
  }
}

TEST_CASE("loss_cycle: exact inverse fields give zero loss and zero gradients") {
  const FlowField fba = constant_field(10, 8, {2, 0});
  const FlowField fab = constant_field(10, 8, {-2, 0});
  const auto [report, g_fba, g_fab] = loss_cycle(fba, fab, LossConfig{});
  CHECK(report.per_term.at("cyc") == doctest::Approx(0.0));
  for (int v = 0; v < 8; ++v) {
    for (int u = 0; u < 10; ++u) {
      CHECK(g_fba.at(u, v).norm() == 0.0);
      CHECK(g_fab.at(u, v).norm() == 0.0);
    }
  }
}

TEST_CASE("loss_cycle hand case: constant short return gives mean 1") {
  const FlowField fba = constant_field(10, 8, {2, 0});
  const FlowField fab = constant_field(10, 8, {-1, 0});
  LossConfig cfg;
  cfg.alpha = 3.0;
  cfg.beta = 0.05;
  const auto [report, g_fba, g_fab] = loss_cycle(fba, fab, cfg);
  CHECK(report.per_term.at("cyc") == doctest::Approx(1.0));
}

TEST_CASE("loss_cycle adaptive filter: d above max(alpha, beta|f|) contributes nothing") {
  // fba (4,0): round trip lands at +7 (fab is (3,0)), d = 7 > max(3, 0.2).
  // One clean row keeps the support non-empty.
  const int w = 12, h = 6;
  FlowField fba = constant_field(w, h, {4, 0});
  FlowField fab = constant_field(w, h, {3, 0});
  for (int u = 0; u < w; ++u) {
    fba.set(u, 0, {1.25, 0});
    fab.set(u, 0, {-1.25, 0});
  }
  LossConfig cfg;
  cfg.alpha = 3.0;
  cfg.beta = 0.05;
  const auto [report, g_fba, g_fab] = loss_cycle(fba, fab, cfg);
  // Only row 0 contributes; rows crossing into row 0's cells excluded too.
  for (int v = 2; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      CHECK(g_fba.at(u, v).norm() == 0.0);  // filtered: exactly zero gradient
    }
  }
  CHECK(report.count.at("cyc") >= static_cast<std::size_t>(w - 5));
  CHECK(report.per_term.at("cyc") < 0.5);  // the clean row has small d
}

TEST_CASE("loss_cycle filter monotonicity in alpha") {
  std::mt19937_64 rng(67);
  const FlowField fba = testing::random_smooth_flow(rng, 10, 8, 2.0);
  const FlowField fab = testing::random_smooth_flow(rng, 10, 8, 2.0);
  std::size_t previous = 0;
  for (const double alpha : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0}) {
    LossConfig cfg;
    cfg.alpha = alpha;
    cfg.beta = 0.0;
    std::size_t count = 0;
    try {
      const auto [report, g1, g2] = loss_cycle(fba, fab, cfg);
      count = report.count.at("cyc");
    } catch (const EmptySupport&) {
      count = 0;
    }
    CHECK(count >= previous);
    previous = count;
  }
}

TEST_CASE("loss_cycle gradients match central finite differences (both fields)") {
  std::mt19937_64 rng(71);
  const FlowField fba = testing::random_smooth_flow(rng, 8, 6, 1.8);
  const FlowField fab = testing::random_smooth_flow(rng, 8, 6, 1.8);
  LossConfig cfg;
  cfg.alpha = 50.0;  // keep every pixel far from the filter boundary
  cfg.beta = 0.0;

  const auto [report, analytic_fba, analytic_fab] = loss_cycle(fba, fab, cfg);
  REQUIRE(report.count.at("cyc") > 10);

  const GradField numeric_fba = finite_difference_gradient(fba, [&](const FlowField& f) {
    return std::get<0>(loss_cycle(f, fab, cfg)).per_term.at("cyc");
  });
  CHECK(max_relative_gradient_error(analytic_fba, numeric_fba) < 1e-4);

  const GradField numeric_fab = finite_difference_gradient(fab, [&](const FlowField& f) {
    return std::get<0>(loss_cycle(fba, f, cfg)).per_term.at("cyc");
  });
  CHECK(max_relative_gradient_error(analytic_fab, numeric_fab) < 1e-4);
}

TEST_CASE("loss_bit: identity transform and zero flows give zero") {
  const TransformSpec t = translation_transform(12, 9, 0, 0);
  const FlowField zero(12, 9);
  const auto [report, g1, g2] = loss_bit(zero, zero, t, LossConfig{});
  CHECK(report.per_term.at("bit") == doctest::Approx(0.0));
}

TEST_CASE("loss_bit: exact transform flows give zero on the interior") {
  const TransformSpec t = translation_transform(20, 10, 5, 0);
  const FlowField fwd = constant_field(20, 10, {5, 0});
  const FlowField bwd = constant_field(20, 10, {-5, 0});
  const auto [report, g1, g2] = loss_bit(fwd, bwd, t, LossConfig{});
  CHECK(report.per_term.at("bit") == doctest::Approx(0.0));
  // Each direction keeps only the 15 columns whose target stays visible.
  CHECK(report.count.at("bit") == 2 * 15 * 10);
}

TEST_CASE("loss_bit single-pixel L1 deviation") {
  const TransformSpec t = translation_transform(20, 10, 5, 0);
  FlowField fwd = constant_field(20, 10, {5, 0});
  const FlowField bwd = constant_field(20, 10, {-5, 0});
  fwd.set(3, 4, {4, 2});
  LossConfig cfg;
  cfg.reduction = Reduction::Sum;
  const auto [report, g_fwd, g_bwd] = loss_bit(fwd, bwd, t, cfg);
  CHECK(report.per_term.at("bit") == doctest::Approx(3.0));  // |4-5| + |2-0|
  CHECK(g_fwd.at(3, 4) == Eigen::Vector2d(-1, 1));
  CHECK(g_fwd.at(2, 2).norm() == 0.0);
}

TEST_CASE("loss_bit direction restriction reproduces the one-sided variant") {
  const TransformSpec t = translation_transform(20, 10, 5, 0);
  FlowField fwd = constant_field(20, 10, {4, 0});   // off by 1 everywhere
  const FlowField bwd = constant_field(20, 10, {-5, 0});
  LossConfig cfg;
  cfg.reduction = Reduction::Sum;
  const auto [full, f1, f2] = loss_bit(fwd, bwd, t, cfg);
  const auto [fwd_only, g1, g2] = loss_bit(fwd, bwd, t, cfg, BitDirections{true, false});
  const auto [bwd_only, h1, h2] = loss_bit(fwd, bwd, t, cfg, BitDirections{false, true});
  CHECK(fwd_only.per_term.at("bit") == doctest::Approx(150.0));  // 15*10 pixels, off by 1
  CHECK(bwd_only.per_term.at("bit") == doctest::Approx(0.0));
  CHECK(full.per_term.at("bit") ==
        doctest::Approx(fwd_only.per_term.at("bit") + bwd_only.per_term.at("bit")));
  // The disabled direction receives no gradient.
  for (int v = 0; v < 10; ++v)
    for (int u = 0; u < 20; ++u) CHECK(g2.at(u, v).norm() == 0.0);
}

TEST_CASE("loss_bit gradient matches finite differences") {
  std::mt19937_64 rng(73);
  std::uniform_real_distribution<double> jitter(-1.5, 1.5);
  std::vector<Eigen::Vector2d> disp(9);
  for (auto& d : disp) d = Eigen::Vector2d(jitter(rng), jitter(rng));
  const TransformSpec t = TransformSpec::tps(8, 6, 3, disp);
  // Offsets of ~0.3 keep every residual component away from the L1 kink.
  FlowField fwd = dense_flow_from_transform(t, PixelGrid{8, 6}, FlowDirection::Forward);
  FlowField bwd = dense_flow_from_transform(t, PixelGrid{8, 6}, FlowDirection::Inverse);
  std::uniform_real_distribution<double> off(0.25, 0.45);
  for (int v = 0; v < 6; ++v) {
    for (int u = 0; u < 8; ++u) {
      fwd.set(u, v, fwd.vector_at(u, v) + Eigen::Vector2d(off(rng), -off(rng)), fwd.valid_at(u, v));
      bwd.set(u, v, bwd.vector_at(u, v) + Eigen::Vector2d(-off(rng), off(rng)), bwd.valid_at(u, v));
    }
  }
  const LossConfig cfg;
  const auto [report, analytic_fwd, analytic_bwd] = loss_bit(fwd, bwd, t, cfg);
  const GradField numeric_fwd = finite_difference_gradient(fwd, [&](const FlowField& f) {
    return std::get<0>(loss_bit(f, bwd, t, cfg)).per_term.at("bit");
  });
  CHECK(max_relative_gradient_error(analytic_fwd, numeric_fwd) < 1e-4);
  const GradField numeric_bwd = finite_difference_gradient(bwd, [&](const FlowField& f) {
    return std::get<0>(loss_bit(fwd, f, t, cfg)).per_term.at("bit");
  });
  CHECK(max_relative_gradient_error(analytic_bwd, numeric_bwd) < 1e-4);
}

TEST_CASE("loss_total combines weighted terms") {
  LossConfig cfg;
  cfg.w_sed = 1.0;
  cfg.w_cyc = 0.1;
  cfg.w_bit = 1.0;
  LossReport sed_part, cyc_part, bit_part;
  sed_part.per_term["sed"] = 2.0;
  sed_part.count["sed"] = 10;
  cyc_part.per_term["cyc"] = 1.0;
  cyc_part.count["cyc"] = 10;
  bit_part.per_term["bit"] = 3.0;
  bit_part.count["bit"] = 10;
  const LossReport total = loss_total({sed_part, cyc_part, bit_part}, cfg);
  CHECK(total.total == doctest::Approx(5.1).epsilon(1e-12));
  CHECK(total.per_term.at("sed") == 2.0);

  cfg.w_sed = cfg.w_cyc = cfg.w_bit = 0.0;
  CHECK(loss_total({sed_part, cyc_part, bit_part}, cfg).total == doctest::Approx(0.0));

  cfg.w_sed = 1.0;
  const LossReport only_sed = loss_total({sed_part}, cfg);
  CHECK(only_sed.total == doctest::Approx(2.0));
}
