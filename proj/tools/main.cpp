// epiflow command line: epipolar-supervised flow toolkit.
//
// Exit codes: 0 success, 2 usage/validation, 3 numerical failure, 4 I/O.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "epiflow/errors.hpp"
#include "epiflow/flow_field.hpp"
#include "epiflow/flow_optimizer.hpp"
#include "epiflow/geometry.hpp"
#include "epiflow/io.hpp"
#include "epiflow/matcher.hpp"
#include "epiflow/metrics.hpp"
#include "epiflow/model_fit.hpp"
#include "epiflow/parallel.hpp"
#include "epiflow/supervision.hpp"
#include "epiflow/synth_transform.hpp"
#include "epiflow/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Run manifest: every subcommand drops one into its output directory so a
// rerun with equal inputs and config is verifiable byte-for-byte.
// ---------------------------------------------------------------------------

struct RunManifest {
  std::string command;
  json config = json::object();
  json inputs = json::object();
  std::uint64_t seed = 0;

  void add_input(const std::string& flag, const fs::path& path) {
    char digest[19];
    std::snprintf(digest, sizeof(digest), "0x%016llx",
                  static_cast<unsigned long long>(epiflow::fnv1a64_file(path)));
    inputs[flag] = {{"path", path.string()}, {"fnv1a64", std::string(digest)}};
  }

  void write(const fs::path& out_dir) const {
    json j;
    j["command"] = command;
    j["config"] = config;
    j["inputs"] = inputs;
    j["seed"] = seed;
    j["version"] = epiflow::kVersion;
    epiflow::write_file_text(out_dir / "manifest.json", j.dump(2) + "\n");
  }
};

fs::path prepare_out_dir(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw epiflow::IoError("cannot create output directory " + dir.string());
  return dir;
}

std::pair<int, int> parse_size(const std::string& size) {
  const auto x = size.find('x');
  if (x == std::string::npos) throw epiflow::ValidationError("--size must look like WxH");
  try {
    const int w = std::stoi(size.substr(0, x));
    const int h = std::stoi(size.substr(x + 1));
    if (w < 1 || h < 1) throw epiflow::ValidationError("--size must be positive");
    return {w, h};
  } catch (const std::invalid_argument&) {
    throw epiflow::ValidationError("--size must look like WxH");
  }
}

epiflow::FundamentalMatrix load_fundamental(const std::string& cams, const std::string& pose,
                                            const std::string& fmat, RunManifest& manifest) {
  if (!fmat.empty() && (!cams.empty() || !pose.empty())) {
    throw epiflow::ValidationError("--fmat and --cams/--pose are mutually exclusive");
  }
  if (!fmat.empty()) {
    manifest.add_input("fmat", fmat);
    return epiflow::read_fmat_file(fmat);
  }
  if (cams.empty() || pose.empty()) {
    throw epiflow::ValidationError("need either --fmat or both --cams and --pose");
  }
  manifest.add_input("cams", cams);
  manifest.add_input("pose", pose);
  const auto intr = epiflow::read_cameras_file(cams);
  const epiflow::CameraIntrinsics ka = intr.front();
  const epiflow::CameraIntrinsics kb = intr.size() > 1 ? intr[1] : intr.front();
  return epiflow::fundamental_from_pose(ka, kb, epiflow::read_pose_file(pose));
}

std::string csv_escape_free(double v) { return epiflow::format_full(v); }

void write_report_csv(const fs::path& path, const epiflow::LossReport& report) {
  std::string out = "term,value,count\n";
  for (const auto& [term, value] : report.per_term) {
    const auto it = report.count.find(term);
    out += term + "," + csv_escape_free(value) + "," +
           std::to_string(it == report.count.end() ? 0 : it->second) + "\n";
  }
  out += "total," + csv_escape_free(report.total) + ",\n";
  epiflow::write_file_text(path, out);
}

// ---------------------------------------------------------------------------
// sed-eval
// ---------------------------------------------------------------------------

struct SedEvalArgs {
  std::string flow, cams, pose, fmat, config, out;
};

void run_sed_eval(const SedEvalArgs& args) {
  RunManifest manifest;
  manifest.command = "sed-eval";
  manifest.add_input("flow", args.flow);

  epiflow::LossConfig cfg;
  if (!args.config.empty()) {
    manifest.add_input("config", args.config);
    cfg = epiflow::LossConfig::from_key_values(epiflow::read_key_values_file(args.config));
  }
  for (const auto& [k, v] : cfg.to_key_values()) manifest.config[k] = v;

  const epiflow::FundamentalMatrix f = load_fundamental(args.cams, args.pose, args.fmat, manifest);
  const epiflow::FlowField flow = epiflow::read_flo_file(args.flow);

  const auto [report, grad] = epiflow::loss_sed(flow, f, cfg);
  (void)grad;

  // Per-pixel SED map in .flo layout: (sed, 0), invalid where unsupervised.
  epiflow::FlowField sed_map(flow.width(), flow.height());
  for (int v = 0; v < flow.height(); ++v) {
    for (int u = 0; u < flow.width(); ++u) {
      bool ok = flow.valid_at(u, v);
      double value = 0.0;
      if (ok) {
        const Eigen::Vector2d x(u, v);
        const auto eval = epiflow::sed_value_and_gradient(f, x, x + flow.vector_at(u, v));
        ok = eval.has_value();
        if (ok) value = eval->value;
      }
      sed_map.set(u, v, Eigen::Vector2d(value, 0.0), ok);
    }
  }

  const fs::path out = prepare_out_dir(args.out);
  write_report_csv(out / "report.csv", report);
  epiflow::write_flo_file(out / "sed_map.flo", sed_map);
  manifest.write(out);
  std::cout << "sed total: " << report.total << " over " << report.count.at("sed")
            << " pixels\n";
}

// ---------------------------------------------------------------------------
// optimize
// ---------------------------------------------------------------------------

struct OptimizeArgs {
  std::string cams, pose, fmat, transform, size, config, out;
  std::string gt_flow_ab, gt_flow_ba;
  std::uint64_t seed = 0;
};

void run_optimize(const OptimizeArgs& args) {
  RunManifest manifest;
  manifest.command = "optimize";
  manifest.seed = args.seed;
  manifest.add_input("transform", args.transform);

  const auto [width, height] = parse_size(args.size);
  const epiflow::FundamentalMatrix f = load_fundamental(args.cams, args.pose, args.fmat, manifest);
  const epiflow::TransformSpec t =
      epiflow::TransformSpec::parse(epiflow::read_file_text(args.transform));

  epiflow::LossConfig loss_cfg;
  epiflow::OptimizerConfig opt_cfg;
  int lattice = 8;
  double init_noise = 0.0;
  if (!args.config.empty()) {
    manifest.add_input("config", args.config);
    auto kv = epiflow::read_key_values_file(args.config);
    std::map<std::string, std::string> loss_kv;
    const auto take = [&kv](const char* key) -> std::optional<std::string> {
      auto it = kv.find(key);
      if (it == kv.end()) return std::nullopt;
      std::string v = it->second;
      kv.erase(it);
      return v;
    };
    const auto take_double = [&take](const char* key, double& target) {
      if (auto v = take(key)) {
        try {
          target = std::stod(*v);
        } catch (const std::invalid_argument&) {
          throw epiflow::ValidationError(std::string("config key '") + key + "': not a number");
        }
      }
    };
    double iters = opt_cfg.max_iterations;
    take_double("step", opt_cfg.step_size);
    take_double("momentum", opt_cfg.momentum);
    take_double("iters", iters);
    opt_cfg.max_iterations = static_cast<int>(iters);
    take_double("grad_tol", opt_cfg.grad_tolerance);
    double lattice_d = lattice;
    take_double("lattice", lattice_d);
    lattice = static_cast<int>(lattice_d);
    take_double("init_noise", init_noise);
    if (auto v = take("sed")) opt_cfg.losses.sed = (*v == "1" || *v == "on" || *v == "true");
    if (auto v = take("cyc")) {
      opt_cfg.losses.cyc_full = *v == "full";
      opt_cfg.losses.cyc_adaptive = *v == "adaptive";
      if (*v != "full" && *v != "adaptive" && *v != "none") {
        throw epiflow::ValidationError("config key 'cyc' must be none|full|adaptive");
      }
    }
    if (auto v = take("bit")) {
      opt_cfg.losses.bit_forward = *v == "both" || *v == "forward";
      opt_cfg.losses.bit_backward = *v == "both" || *v == "backward";
      if (*v != "both" && *v != "forward" && *v != "backward" && *v != "none") {
        throw epiflow::ValidationError("config key 'bit' must be none|forward|backward|both");
      }
    }
    loss_cfg = epiflow::LossConfig::from_key_values(kv);  // rejects unknown keys
  }

  manifest.config["size"] = args.size;
  manifest.config["lattice"] = lattice;
  manifest.config["init_noise"] = init_noise;
  manifest.config["step"] = opt_cfg.step_size;
  manifest.config["momentum"] = opt_cfg.momentum;
  manifest.config["iters"] = opt_cfg.max_iterations;
  manifest.config["grad_tol"] = opt_cfg.grad_tolerance;
  manifest.config["sed"] = opt_cfg.losses.sed;
  manifest.config["cyc"] = opt_cfg.losses.cyc_full ? "full"
                           : opt_cfg.losses.cyc_adaptive ? "adaptive" : "none";
  manifest.config["bit"] = opt_cfg.losses.bit_forward && opt_cfg.losses.bit_backward ? "both"
                           : opt_cfg.losses.bit_forward ? "forward"
                           : opt_cfg.losses.bit_backward ? "backward" : "none";
  for (const auto& [k, v] : loss_cfg.to_key_values()) manifest.config[k] = v;

  epiflow::TripletModels models{
      epiflow::FlowModel::grid(width, height, lattice), epiflow::FlowModel::grid(width, height, lattice),
      epiflow::FlowModel::grid(width, height, lattice), epiflow::FlowModel::grid(width, height, lattice)};
  if (init_noise > 0.0) {
    std::mt19937_64 rng(args.seed);
    std::uniform_real_distribution<double> noise(-init_noise, init_noise);
    for (epiflow::FlowModel* m : {&models.fba, &models.fab, &models.fbpb, &models.fbbp}) {
      for (auto& v : m->values()) v = Eigen::Vector2d(noise(rng), noise(rng));
    }
  }

  epiflow::TripletGroundTruth gt;
  const epiflow::TripletGroundTruth* gt_ptr = nullptr;
  if (!args.gt_flow_ab.empty()) {
    manifest.add_input("gt-flow-ab", args.gt_flow_ab);
    gt.fba = epiflow::read_flo_file(args.gt_flow_ab);
    gt_ptr = &gt;
  }
  if (!args.gt_flow_ba.empty()) {
    manifest.add_input("gt-flow-ba", args.gt_flow_ba);
    gt.fab = epiflow::read_flo_file(args.gt_flow_ba);
    gt_ptr = &gt;
  }

  const epiflow::OptimizeResult result =
      epiflow::optimize_triplet(models, f, t, opt_cfg, loss_cfg, gt_ptr);

  const fs::path out = prepare_out_dir(args.out);
  epiflow::write_flo_file(out / "fba.flo", result.models.fba.evaluate());
  epiflow::write_flo_file(out / "fab.flo", result.models.fab.evaluate());
  epiflow::write_flo_file(out / "fbpb.flo", result.models.fbpb.evaluate());
  epiflow::write_flo_file(out / "fbbp.flo", result.models.fbbp.evaluate());

  std::string trace = "iter,total,sed,cyc,bit,aepe_vs_gt\n";
  for (std::size_t i = 0; i < result.trace.size(); ++i) {
    const auto& r = result.trace[i];
    const auto term = [&](const char* name) {
      const auto it = r.per_term.find(name);
      return it == r.per_term.end() ? std::string() : csv_escape_free(it->second);
    };
    trace += std::to_string(i) + "," + csv_escape_free(r.total) + "," + term("sed") + "," +
             term("cyc") + "," + term("bit") + ",";
    if (i < result.aepe_trace.size()) trace += csv_escape_free(result.aepe_trace[i]);
    trace += "\n";
  }
  epiflow::write_file_text(out / "trace.csv", trace);
  manifest.write(out);
  std::cout << "final total: " << result.trace.back().total << " after "
            << result.trace.size() - 1 << " iterations\n";
}

// ---------------------------------------------------------------------------
// match
// ---------------------------------------------------------------------------

struct MatchArgs {
  std::string kpts_a, kpts_b, flow_ab, flow_ba, out;
  double radius = 5.0;
};

void run_match(const MatchArgs& args) {
  RunManifest manifest;
  manifest.command = "match";
  manifest.add_input("kpts-a", args.kpts_a);
  manifest.add_input("kpts-b", args.kpts_b);
  manifest.add_input("flow-ab", args.flow_ab);
  manifest.add_input("flow-ba", args.flow_ba);
  manifest.config["radius"] = args.radius;

  const epiflow::KeypointSet a = epiflow::read_keypoints_file(args.kpts_a);
  const epiflow::KeypointSet b = epiflow::read_keypoints_file(args.kpts_b);
  const epiflow::FlowField fba = epiflow::read_flo_file(args.flow_ab);
  const epiflow::FlowField fab = epiflow::read_flo_file(args.flow_ba);

  const epiflow::MatchSet matches = epiflow::match(a, b, fba, fab, args.radius);

  std::string csv = "xa,ya,xb,yb,ia,ib,stage,similarity\n";
  for (const auto& m : matches.pairs) {
    const auto& pa = a.points()[m.index_a];
    const auto& pb = b.points()[m.index_b];
    csv += csv_escape_free(pa.x()) + "," + csv_escape_free(pa.y()) + "," +
           csv_escape_free(pb.x()) + "," + csv_escape_free(pb.y()) + "," +
           std::to_string(m.index_a) + "," + std::to_string(m.index_b) + "," +
           std::to_string(m.stage) + "," + csv_escape_free(m.similarity) + "\n";
  }
  const fs::path out = prepare_out_dir(args.out);
  epiflow::write_file_text(out / "matches.csv", csv);
  manifest.write(out);
  std::cout << matches.pairs.size() << " matches\n";
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string pred, gt, matches, gt_h, est_h, est_pose, gt_pose, metrics, size, out;
  double pose_threshold = 10.0;
};

void run_eval(const EvalArgs& args) {
  RunManifest manifest;
  manifest.command = "eval";
  std::vector<std::pair<std::string, double>> rows;

  std::vector<std::string> wanted;
  {
    std::istringstream in(args.metrics);
    std::string item;
    while (std::getline(in, item, ',')) {
      if (!item.empty()) wanted.push_back(item);
    }
  }
  const auto want = [&](const std::string& name) {
    return wanted.empty() || std::find(wanted.begin(), wanted.end(), name) != wanted.end();
  };

  if (!args.pred.empty() || !args.gt.empty()) {
    if (args.pred.empty() || args.gt.empty()) {
      throw epiflow::ValidationError("dense evaluation needs both --pred and --gt");
    }
    manifest.add_input("pred", args.pred);
    manifest.add_input("gt", args.gt);
    const epiflow::FlowField pred = epiflow::read_flo_file(args.pred);
    const epiflow::FlowField gt = epiflow::read_flo_file(args.gt);
    const double acc_thresholds[] = {1.0, 3.0, 5.0};
    const epiflow::FlowErrorStats stats = epiflow::flow_error_stats(pred, gt, acc_thresholds);
    if (want("aepe")) rows.emplace_back("aepe", stats.aepe);
    if (want("f1")) rows.emplace_back("f1", stats.f1);
    if (want("acc")) {
      for (const auto& [t, v] : stats.acc_at) {
        rows.emplace_back("acc@" + std::to_string(static_cast<int>(t)), v);
      }
    }
    rows.emplace_back("count", static_cast<double>(stats.count));
  } else if (!args.matches.empty() || !args.est_h.empty()) {
    if (args.gt_h.empty()) throw epiflow::ValidationError("--gt-h is required for match metrics");
    manifest.add_input("gt-h", args.gt_h);
    const epiflow::Homography gt_h = epiflow::read_homography_file(args.gt_h);
    if (!args.matches.empty() && want("mma")) {
      manifest.add_input("matches", args.matches);
      const epiflow::CorrespondenceSet m = epiflow::read_matches_csv_file(args.matches);
      std::vector<double> thresholds;
      for (int t = 1; t <= 10; ++t) thresholds.push_back(t);
      const epiflow::MatchEvalStats stats = epiflow::mma(m.a, m.b, gt_h, thresholds);
      for (const auto& [t, v] : stats.mma) {
        rows.emplace_back("mma@" + std::to_string(static_cast<int>(t)), v);
      }
      rows.emplace_back("num_matches", static_cast<double>(stats.num_matches));
    }
    if (!args.est_h.empty() && want("corners")) {
      if (args.size.empty()) throw epiflow::ValidationError("--size is required for corners");
      manifest.add_input("est-h", args.est_h);
      manifest.config["size"] = args.size;
      const auto [w, h] = parse_size(args.size);
      const epiflow::Homography est_h = epiflow::read_homography_file(args.est_h);
      const auto [err, correct] = epiflow::corner_correctness(est_h, gt_h, w, h);
      rows.emplace_back("corner_error", err);
      rows.emplace_back("corner_correct", correct ? 1.0 : 0.0);
    }
  } else if (!args.est_pose.empty() || !args.gt_pose.empty()) {
    if (args.est_pose.empty() || args.gt_pose.empty()) {
      throw epiflow::ValidationError("pose evaluation needs both --est-pose and --gt-pose");
    }
    manifest.add_input("est-pose", args.est_pose);
    manifest.add_input("gt-pose", args.gt_pose);
    manifest.config["pose_threshold"] = args.pose_threshold;
    const epiflow::RelativePose est = epiflow::read_pose_file(args.est_pose);
    const epiflow::RelativePose gt = epiflow::read_pose_file(args.gt_pose);
    const epiflow::PoseAngularErrors errors =
        epiflow::pose_angular_errors(est, gt, args.pose_threshold);
    rows.emplace_back("rot_err_deg", errors.rotation_deg);
    rows.emplace_back("trans_err_deg", errors.translation_deg);
    rows.emplace_back("rot_correct", errors.correct_at.at("rotation") ? 1.0 : 0.0);
    rows.emplace_back("trans_correct", errors.correct_at.at("translation") ? 1.0 : 0.0);
  } else {
    throw epiflow::ValidationError(
        "eval needs one of: --pred/--gt, --matches/--est-h with --gt-h, --est-pose/--gt-pose");
  }

  std::size_t name_width = 6;
  for (const auto& [name, _] : rows) name_width = std::max(name_width, name.size());
  std::string csv = "metric,value\n";
  for (const auto& [name, value] : rows) {
    csv += name + "," + csv_escape_free(value) + "\n";
    std::printf("%-*s  %.6g\n", static_cast<int>(name_width), name.c_str(), value);
  }
  if (!args.out.empty()) {
    const fs::path out = prepare_out_dir(args.out);
    epiflow::write_file_text(out / "metrics.csv", csv);
    manifest.write(out);
  }
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

struct FitArgs {
  std::string matches, model, cams, out;
  double threshold = 3.0;
  double confidence = 0.9999;
  int max_iters = 2000;
  std::uint64_t seed = 0;
};

void run_fit(const FitArgs& args) {
  RunManifest manifest;
  manifest.command = "fit";
  manifest.seed = args.seed;
  manifest.add_input("matches", args.matches);
  manifest.config["model"] = args.model;
  manifest.config["threshold"] = args.threshold;

  const epiflow::CorrespondenceSet m = epiflow::read_matches_csv_file(args.matches);
  const fs::path out = prepare_out_dir(args.out);

  std::vector<std::uint8_t> inliers;
  if (args.model == "homography") {
    manifest.config["confidence"] = args.confidence;
    manifest.config["max_iters"] = args.max_iters;
    epiflow::RansacConfig cfg;
    cfg.threshold = args.threshold;
    cfg.confidence = args.confidence;
    cfg.max_iterations = args.max_iters;
    cfg.seed = args.seed;
    const epiflow::HomographyFit fit = epiflow::fit_homography_ransac(m.a, m.b, cfg);
    epiflow::write_homography_file(out / "model.txt", fit.h);
    inliers = fit.inliers;
    std::cout << "homography with " << fit.inlier_count << "/" << m.size() << " inliers\n";
  } else if (args.model == "fundamental" || args.model == "pose") {
    const epiflow::FundamentalMatrix f = epiflow::fit_fundamental_8pt(m.a, m.b);
    inliers.assign(m.size(), 0);
    for (std::size_t i = 0; i < m.size(); ++i) {
      const auto eval = epiflow::sed_value_and_gradient(f, m.a[i], m.b[i]);
      inliers[i] = eval && eval->value <= args.threshold ? 1 : 0;
    }
    if (args.model == "fundamental") {
      epiflow::write_fmat_file(out / "model.txt", f);
      std::cout << "fundamental matrix fit on " << m.size() << " matches\n";
    } else {
      if (args.cams.empty()) throw epiflow::ValidationError("--cams is required for pose");
      manifest.add_input("cams", args.cams);
      const auto intr = epiflow::read_cameras_file(args.cams);
      const epiflow::CameraIntrinsics ka = intr.front();
      const epiflow::CameraIntrinsics kb = intr.size() > 1 ? intr[1] : intr.front();
      const epiflow::RelativePose pose = epiflow::pose_from_essential(f, ka, kb, m.a, m.b);
      epiflow::write_pose_file(out / "model.txt", pose);
      std::cout << "pose recovered from " << m.size() << " matches\n";
    }
  } else {
    throw epiflow::ValidationError("--model must be homography, fundamental or pose");
  }

  std::string csv = "index,inlier\n";
  for (std::size_t i = 0; i < inliers.size(); ++i) {
    csv += std::to_string(i) + "," + std::to_string(static_cast<int>(inliers[i])) + "\n";
  }
  epiflow::write_file_text(out / "inliers.csv", csv);
  manifest.write(out);
}

// ---------------------------------------------------------------------------
// warp (demo): backward-warp the target image through the flow.
// ---------------------------------------------------------------------------

struct WarpArgs {
  std::string image, flow, out;
};

void run_warp(const WarpArgs& args) {
  RunManifest manifest;
  manifest.command = "warp";
  manifest.add_input("image", args.image);
  manifest.add_input("flow", args.flow);

  const epiflow::Image img = epiflow::read_pnm_file(args.image);
  const epiflow::FlowField flow = epiflow::read_flo_file(args.flow);

  epiflow::Image warped;
  warped.width = flow.width();
  warped.height = flow.height();
  warped.channels = img.channels;
  warped.pixels.assign(
      static_cast<std::size_t>(warped.width) * warped.height * warped.channels, 0);
  for (int v = 0; v < flow.height(); ++v) {
    for (int u = 0; u < flow.width(); ++u) {
      if (!flow.valid_at(u, v)) continue;
      const Eigen::Vector2d p = Eigen::Vector2d(u, v) + flow.vector_at(u, v);
      if (p.x() < 0.0 || p.x() > img.width - 1.0 || p.y() < 0.0 || p.y() > img.height - 1.0) {
        continue;
      }
      const int x0 = std::min(static_cast<int>(p.x()), img.width - 2 >= 0 ? img.width - 2 : 0);
      const int y0 = std::min(static_cast<int>(p.y()), img.height - 2 >= 0 ? img.height - 2 : 0);
      const double fu = p.x() - x0;
      const double fv = p.y() - y0;
      for (int c = 0; c < img.channels; ++c) {
        const double value =
            (1 - fu) * (1 - fv) * img.at(x0, y0, c) + fu * (1 - fv) * img.at(x0 + 1, y0, c) +
            (1 - fu) * fv * img.at(x0, y0 + 1, c) + fu * fv * img.at(x0 + 1, y0 + 1, c);
        warped.pixels[(static_cast<std::size_t>(v) * warped.width + u) * warped.channels + c] =
            static_cast<std::uint8_t>(std::lround(std::clamp(value, 0.0, 255.0)));
      }
    }
  }
  const fs::path out = prepare_out_dir(args.out);
  epiflow::write_pnm_file(out / (img.channels == 1 ? "warped.pgm" : "warped.ppm"), warped);
  manifest.write(out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"epiflow: epipolar-supervised dense flow, matching and evaluation toolkit"};
  app.require_subcommand(1);

  int threads = 1;
  if (const char* env = std::getenv("EPIFLOW_THREADS")) {
    threads = std::max(1, std::atoi(env));
  }
  app.add_option("--threads", threads, "worker cap for per-pixel loops")->envname("");

  SedEvalArgs sed_args;
  auto* sed_cmd = app.add_subcommand("sed-eval", "evaluate the SED loss of a dense flow");
  sed_cmd->add_option("--flow", sed_args.flow, "dense A->B flow (.flo)")
      ->required()->check(CLI::ExistingFile);
  sed_cmd->add_option("--cams", sed_args.cams, "intrinsics records (camera A [and B])")
      ->check(CLI::ExistingFile);
  sed_cmd->add_option("--pose", sed_args.pose, "relative pose record")->check(CLI::ExistingFile);
  sed_cmd->add_option("--fmat", sed_args.fmat, "fundamental matrix (9 numbers)")
      ->check(CLI::ExistingFile);
  sed_cmd->add_option("--config", sed_args.config, "loss config (key=value)")
      ->check(CLI::ExistingFile);
  sed_cmd->add_option("--out", sed_args.out, "output directory")->required();

  OptimizeArgs opt_args;
  auto* opt_cmd = app.add_subcommand("optimize", "direct flow optimization on a triplet");
  opt_cmd->add_option("--cams", opt_args.cams, "intrinsics records")->check(CLI::ExistingFile);
  opt_cmd->add_option("--pose", opt_args.pose, "relative pose record")->check(CLI::ExistingFile);
  opt_cmd->add_option("--fmat", opt_args.fmat, "fundamental matrix (9 numbers)")
      ->check(CLI::ExistingFile);
  opt_cmd->add_option("--transform", opt_args.transform, "transform record")
      ->required()->check(CLI::ExistingFile);
  opt_cmd->add_option("--size", opt_args.size, "image size WxH")->required();
  opt_cmd->add_option("--config", opt_args.config, "loss+optimizer config (key=value)")
      ->check(CLI::ExistingFile);
  opt_cmd->add_option("--seed", opt_args.seed, "rng seed for the lattice init noise");
  opt_cmd->add_option("--gt-flow-ab", opt_args.gt_flow_ab, "ground-truth A->B flow for the trace")
      ->check(CLI::ExistingFile);
  opt_cmd->add_option("--gt-flow-ba", opt_args.gt_flow_ba, "ground-truth B->A flow for the trace")
      ->check(CLI::ExistingFile);
  opt_cmd->add_option("--out", opt_args.out, "output directory")->required();

  MatchArgs match_args;
  auto* match_cmd = app.add_subcommand("match", "two-stage flow-guided sparse matching");
  match_cmd->add_option("--kpts-a", match_args.kpts_a, "keypoints of image A (EPKP or CSV)")
      ->required()->check(CLI::ExistingFile);
  match_cmd->add_option("--kpts-b", match_args.kpts_b, "keypoints of image B")
      ->required()->check(CLI::ExistingFile);
  match_cmd->add_option("--flow-ab", match_args.flow_ab, "flow mapping A pixels into B (.flo)")
      ->required()->check(CLI::ExistingFile);
  match_cmd->add_option("--flow-ba", match_args.flow_ba, "flow mapping B pixels into A (.flo)")
      ->required()->check(CLI::ExistingFile);
  match_cmd->add_option("--radius", match_args.radius, "stage-1 candidate radius in pixels");
  match_cmd->add_option("--out", match_args.out, "output directory")->required();

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "evaluation metrics");
  eval_cmd->add_option("--pred", eval_args.pred, "predicted flow (.flo)")->check(CLI::ExistingFile);
  eval_cmd->add_option("--gt", eval_args.gt, "ground-truth flow (.flo)")->check(CLI::ExistingFile);
  eval_cmd->add_option("--matches", eval_args.matches, "matches CSV")->check(CLI::ExistingFile);
  eval_cmd->add_option("--gt-h", eval_args.gt_h, "ground-truth homography")->check(CLI::ExistingFile);
  eval_cmd->add_option("--est-h", eval_args.est_h, "estimated homography")->check(CLI::ExistingFile);
  eval_cmd->add_option("--est-pose", eval_args.est_pose, "estimated pose record")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--gt-pose", eval_args.gt_pose, "ground-truth pose record")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--metrics", eval_args.metrics,
                       "comma list: aepe,f1,acc | mma,corners (default: all applicable)");
  eval_cmd->add_option("--size", eval_args.size, "image size WxH (corners)");
  eval_cmd->add_option("--pose-threshold", eval_args.pose_threshold, "degrees");
  eval_cmd->add_option("--out", eval_args.out, "output directory");

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "estimate a geometric model from matches");
  fit_cmd->add_option("--matches", fit_args.matches, "matches CSV")
      ->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--model", fit_args.model, "homography | fundamental | pose")->required();
  fit_cmd->add_option("--cams", fit_args.cams, "intrinsics records (pose only)")
      ->check(CLI::ExistingFile);
  fit_cmd->add_option("--threshold", fit_args.threshold, "inlier threshold in pixels");
  fit_cmd->add_option("--confidence", fit_args.confidence, "ransac confidence");
  fit_cmd->add_option("--max-iters", fit_args.max_iters, "ransac iteration cap");
  fit_cmd->add_option("--seed", fit_args.seed, "ransac seed");
  fit_cmd->add_option("--out", fit_args.out, "output directory")->required();

  WarpArgs warp_args;
  auto* warp_cmd = app.add_subcommand("warp", "demo: warp an image through a flow");
  warp_cmd->add_option("--image", warp_args.image, "target image (binary PGM/PPM)")
      ->required()->check(CLI::ExistingFile);
  warp_cmd->add_option("--flow", warp_args.flow, "flow on the output grid (.flo)")
      ->required()->check(CLI::ExistingFile);
  warp_cmd->add_option("--out", warp_args.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  epiflow::set_max_threads(threads);

  try {
    if (*sed_cmd) run_sed_eval(sed_args);
    if (*opt_cmd) run_optimize(opt_args);
    if (*match_cmd) run_match(match_args);
    if (*eval_cmd) run_eval(eval_args);
    if (*fit_cmd) run_fit(fit_args);
    if (*warp_cmd) run_warp(warp_args);
  } catch (const epiflow::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const epiflow::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const epiflow::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
