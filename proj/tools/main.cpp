// SPDX-License-Identifier: Apache-2.0
//
// cdi3d: desk-scale image-to-3D pipeline driver.
//
// Subcommands mirror the pipeline stages: trajectory -> render-gt ->
// dvi-train/dvi-sample -> reconstruct -> extract -> eval, plus ablate. All
// stages share one output directory; stochastic stages require a seed (from
// --seed or the config) and rerunning with the same config and seed
// reproduces outputs byte for byte.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>

#include "cdi3d/ablation.hpp"
#include "cdi3d/config.hpp"
#include "cdi3d/dvi.hpp"
#include "cdi3d/errors.hpp"
#include "cdi3d/log.hpp"
#include "cdi3d/mesh.hpp"
#include "cdi3d/metrics.hpp"
#include "cdi3d/reconstruct.hpp"
#include "cdi3d/renderer.hpp"
#include "cdi3d/serialize.hpp"
#include "cdi3d/threading.hpp"

namespace {

using namespace cdi3d;
namespace fs = std::filesystem;

struct CliArgs {
  std::string config_path;
  std::string out_dir;
  std::optional<uint64_t> seed;
  int threads = 0;
};

uint64_t require_seed(const CliArgs& args, const RunConfig& cfg) {
  if (args.seed) return *args.seed;
  if (cfg.seed) return *cfg.seed;
  throw ConfigError("this subcommand is stochastic: pass --seed or set \"seed\" in the config");
}

RunConfig load_config(const CliArgs& args) {
  if (args.config_path.empty()) throw ConfigError("--config is required");
  RunConfig cfg = load_run_config(args.config_path);
  cfg.render.threads = args.threads;
  return cfg;
}

void ensure_out(const CliArgs& args) {
  if (args.out_dir.empty()) throw ConfigError("--out is required");
  std::error_code ec;
  fs::create_directories(args.out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + args.out_dir);
}

std::string view_stem(const fs::path& dir, int index) {
  char name[32];
  std::snprintf(name, sizeof name, "view_%03d", index);
  return (dir / name).string();
}

void write_view(const std::string& stem, const RenderedView& v) {
  write_ppm(stem + ".ppm", v.rgb);
  write_pfm(stem + "_depth.pfm", v.depth);
  write_pfm(stem + "_normal.pfm", v.normal);
  write_pgm(stem + "_mask.pgm", v.mask);
}

int cmd_trajectory(const CliArgs& args) {
  const RunConfig cfg = load_config(args);
  ensure_out(args);
  const auto poses = tilt_trajectory(cfg.trajectory);
  write_pose_file((fs::path(args.out_dir) / "poses.json").string(), poses);
  log_info("trajectory: wrote " + std::to_string(poses.size()) + " poses");
  return 0;
}

int cmd_render_gt(const CliArgs& args) {
  const RunConfig cfg = load_config(args);
  ensure_out(args);
  if (cfg.render.jitter) require_seed(args, cfg);  // jitter seeds per-view rngs
  const uint64_t seed = cfg.render.jitter ? require_seed(args, cfg) : 0;

  const auto poses = tilt_trajectory(cfg.trajectory);
  write_pose_file((fs::path(args.out_dir) / "poses.json").string(), poses);
  const FieldFn field = field_from_shape(cfg.shape);
  for (size_t i = 0; i < poses.size(); ++i) {
    const RenderedView v =
        render_view(field, poses[i].second, cfg.render,
                    seed_stream(seed, "render/" + poses[i].first.str()));
    write_view(view_stem(args.out_dir, static_cast<int>(i)), v);
  }
  log_info("render-gt: wrote " + std::to_string(poses.size()) + " views");
  return 0;
}

// Toy dataset for view interpolation: every interpolated pose is a target;
// its reference and condition are the two adjacent mains, picked by slot.
struct DviDataset {
  std::vector<DviBatchItem> items;  // t/eps filled per step
  DiffusionSchedule schedule;
  ConditionEncoder encoder;
  DenoiserParams denoiser;
};

DviDataset build_dvi_dataset(const RunConfig& cfg, uint64_t seed) {
  DviDataset ds;
  const int hw = cfg.dvi.image_size;
  ds.schedule =
      make_schedule(cfg.dvi.timesteps, cfg.dvi.beta_start, cfg.dvi.beta_end);
  Rng rng(seed_stream(seed, "dvi/init"));
  ds.encoder = make_condition_encoder(hw, hw, cfg.dvi.channels,
                                      cfg.dvi.cond_feature_dim, rng);
  ds.denoiser =
      make_denoiser(hw, hw, cfg.dvi.channels, cfg.dvi.t_embed_dim,
                    cfg.dvi.cond_feature_dim + 3, cfg.dvi.hidden, rng);

  RenderConfig rc = cfg.render;
  rc.width = rc.height = hw;
  rc.compute_normals = false;
  const FieldFn field = field_from_shape(cfg.shape);

  const auto traj = tilt_trajectory(cfg.trajectory);
  std::vector<Image> renders(traj.size());
  for (size_t i = 0; i < traj.size(); ++i)
    renders[i] = render_view(field, traj[i].second, rc).rgb;

  auto find_main = [&](int index) -> int {
    for (size_t i = 0; i < traj.size(); ++i)
      if (traj[i].first.is_main() && traj[i].first.main_index == index)
        return static_cast<int>(i);
    throw ConfigError("dvi dataset: missing main view");
  };

  for (size_t i = 0; i < traj.size(); ++i) {
    const ViewRole& role = traj[i].first;
    if (role.is_main()) continue;
    const RefCondAssignment rc_pick =
        assign_ref_cond(role.slot, cfg.trajectory.num_interp);
    const int left = role.main_index;
    const int right = (role.main_index + 1) % cfg.trajectory.num_main_views;
    const int ref_view = find_main(rc_pick.ref_index == 1 ? left : right);
    const int cond_view = find_main(rc_pick.cond_index == 1 ? left : right);

    DviBatchItem item;
    item.x0 = renders[i];
    item.x_ref = renders[ref_view];
    item.cond = embed_condition(
        ds.encoder, renders[cond_view],
        relative_pose(traj[cond_view].second, traj[i].second));
    ds.items.push_back(std::move(item));
  }
  if (ds.items.empty())
    throw ConfigError("dvi dataset: trajectory has no interpolated views");
  return ds;
}

int cmd_dvi_train(const CliArgs& args) {
  const RunConfig cfg = load_config(args);
  ensure_out(args);
  const uint64_t seed = require_seed(args, cfg);

  DviDataset ds = build_dvi_dataset(cfg, seed);
  Rng train_rng(seed_stream(seed, "dvi/train"));
  AdamState adam(ds.denoiser.mlp.param_count());

  std::ofstream csv(fs::path(args.out_dir) / "dvi_loss.csv");
  if (!csv) throw IoError("cannot open dvi_loss.csv");
  csv << "step,loss\n";

  const int pixels =
      cfg.dvi.image_size * cfg.dvi.image_size * cfg.dvi.channels;
  for (int step = 0; step < cfg.dvi.train_steps; ++step) {
    std::vector<DviBatchItem> batch(cfg.dvi.batch_size);
    for (auto& b : batch) {
      b = ds.items[static_cast<size_t>(
          train_rng.uniform_int(0, static_cast<int64_t>(ds.items.size()) - 1))];
      b.t = static_cast<int>(train_rng.uniform_int(0, ds.schedule.steps - 1));
      b.eps = Image(cfg.dvi.image_size, cfg.dvi.image_size, cfg.dvi.channels);
      for (int i = 0; i < pixels; ++i) b.eps.data[i] = train_rng.gaussian();
    }
    const double loss =
        dvi_train_step(ds.denoiser, adam, batch, ds.schedule, cfg.dvi.lr);
    char line[64];
    std::snprintf(line, sizeof line, "%d,%.9g\n", step, loss);
    csv << line;
    if (step % 50 == 0)
      log_info("dvi-train step " + std::to_string(step) + " loss=" +
               std::to_string(loss));
  }
  save_dvi_checkpoint((fs::path(args.out_dir) / "dvi").string(),
                      {ds.denoiser, ds.encoder, ds.schedule});
  log_info("dvi-train: checkpoint saved");
  return 0;
}

int cmd_dvi_sample(const CliArgs& args) {
  const RunConfig cfg = load_config(args);
  ensure_out(args);
  const uint64_t seed = require_seed(args, cfg);

  const DviCheckpoint ck =
      load_dvi_checkpoint((fs::path(args.out_dir) / "dvi").string());
  RenderConfig rc = cfg.render;
  rc.width = rc.height = ck.denoiser.image_h;
  rc.compute_normals = false;
  const FieldFn field = field_from_shape(cfg.shape);

  const auto traj = tilt_trajectory(cfg.trajectory);
  auto find_main = [&](int index) -> int {
    for (size_t i = 0; i < traj.size(); ++i)
      if (traj[i].first.is_main() && traj[i].first.main_index == index)
        return static_cast<int>(i);
    throw ConfigError("dvi-sample: missing main view");
  };

  int written = 0;
  for (size_t i = 0; i < traj.size(); ++i) {
    const ViewRole& role = traj[i].first;
    if (role.is_main()) continue;
    const RefCondAssignment pick =
        assign_ref_cond(role.slot, cfg.trajectory.num_interp);
    const int left = role.main_index;
    const int right = (role.main_index + 1) % cfg.trajectory.num_main_views;
    const Image ref =
        render_view(field, traj[find_main(pick.ref_index == 1 ? left : right)].second, rc)
            .rgb;
    const int cond_view = find_main(pick.cond_index == 1 ? left : right);
    const ConditionEmbedding cond = embed_condition(
        ck.encoder, render_view(field, traj[cond_view].second, rc).rgb,
        relative_pose(traj[cond_view].second, traj[i].second));

    Image sample = dvi_sample(ck.denoiser, ref, cond, ck.schedule,
                              seed_stream(seed, "dvi/sample/" + role.str()));
    for (auto& v : sample.data) v = std::clamp(v, 0.0, 1.0);
    std::string name = role.str();
    for (auto& ch : name)
      if (ch == ':') ch = '_';
    write_ppm((fs::path(args.out_dir) / ("dvi_sample_" + name + ".ppm")).string(),
              sample);
    ++written;
  }
  log_info("dvi-sample: wrote " + std::to_string(written) + " images");
  return 0;
}

int cmd_reconstruct(const CliArgs& args) {
  const RunConfig cfg = load_config(args);
  ensure_out(args);
  const uint64_t seed = require_seed(args, cfg);

  const auto traj = tilt_trajectory(cfg.trajectory);
  std::vector<CameraPose> poses;
  for (const auto& [role, pose] : traj) poses.push_back(pose);
  const SupervisionSet sup = render_supervision(cfg.shape, poses, cfg.render);

  const ReconstructResult res =
      reconstruct(sup, cfg.reconstruct, seed_stream(seed, "recon"));
  save_field_params((fs::path(args.out_dir) / "field").string(), res.params);
  write_loss_history_csv(
      (fs::path(args.out_dir) / "loss_history.csv").string(), res.history);

  nlohmann::json summary;
  summary["steps_run"] = res.steps_run;
  summary["diverged"] = res.diverged;
  summary["final_full"] = {{"total", res.final_full.total},
                           {"rgb", res.final_full.rgb},
                           {"depth", res.final_full.depth},
                           {"normal", res.final_full.normal},
                           {"mask", res.final_full.mask},
                           {"reg", res.final_full.reg}};
  std::ofstream out(fs::path(args.out_dir) / "reconstruct.json");
  if (!out) throw IoError("cannot open reconstruct.json");
  out << summary.dump(2) << '\n';
  log_info("reconstruct: " + std::to_string(res.steps_run) + " steps, final total=" +
           std::to_string(res.final_full.total));
  return 0;
}

int cmd_extract(const CliArgs& args) {
  const RunConfig cfg = load_config(args);
  ensure_out(args);
  const FieldParams fp =
      load_field_params((fs::path(args.out_dir) / "field").string());
  const TriangleMesh mesh =
      extract_field_mesh(fp, cfg.triplane.extract_grid, cfg.triplane.iso_fraction);
  save_obj((fs::path(args.out_dir) / "mesh.obj").string(), mesh);
  save_ply((fs::path(args.out_dir) / "mesh.ply").string(), mesh);
  log_info("extract: " + std::to_string(mesh.vertices.size()) + " vertices, " +
           std::to_string(mesh.faces.size()) + " faces");
  return 0;
}

int cmd_eval(const CliArgs& args) {
  const RunConfig cfg = load_config(args);
  ensure_out(args);
  const uint64_t seed = require_seed(args, cfg);
  const TriangleMesh pred =
      load_obj((fs::path(args.out_dir) / "mesh.obj").string());
  const TriangleMesh gt = extract_shape_mesh(cfg.shape, cfg.ablation.gt_grid);
  const EvalReport report = evaluate_protocol(gt, pred, cfg.metrics, seed);
  write_eval_report((fs::path(args.out_dir) / "eval.json").string(),
                    (fs::path(args.out_dir) / "eval_views.csv").string(),
                    report);
  char line[160];
  std::snprintf(line, sizeof line,
                "eval: chamfer=%.3g iou=%.4f fscore=%.4f psnr=%.2f ssim=%.4f",
                report.chamfer, report.volume_iou, report.f_score,
                report.psnr_mean, report.ssim_mean);
  log_info(line);
  return 0;
}

int cmd_ablate(const CliArgs& args) {
  const RunConfig cfg = load_config(args);
  ensure_out(args);
  const uint64_t seed = require_seed(args, cfg);
  const AblationReport report =
      run_ablation(cfg.ablation_shapes, cfg.ablation, seed);
  write_ablation_report((fs::path(args.out_dir) / "ablation.json").string(),
                        (fs::path(args.out_dir) / "ablation.txt").string(),
                        report);
  log_info("ablate: " + std::to_string(report.entries.size()) + " runs");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cdi3d: tilt-trajectory image-to-3D pipeline"};
  app.require_subcommand(1);

  CliArgs args;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config_path, "run config JSON");
    sub->add_option("--out", args.out_dir, "output directory");
    sub->add_option("--seed", args.seed, "master seed (overrides config)");
    sub->add_option("--threads", args.threads,
                    "render worker threads (0 = hardware)");
    return sub;
  };

  const auto* sub_trajectory =
      add_common(app.add_subcommand("trajectory", "write the camera trajectory"));
  const auto* sub_render =
      add_common(app.add_subcommand("render-gt", "render ground-truth views"));
  const auto* sub_dvi_train =
      add_common(app.add_subcommand("dvi-train", "train the view interpolator"));
  const auto* sub_dvi_sample =
      add_common(app.add_subcommand("dvi-sample", "sample interpolated views"));
  const auto* sub_reconstruct = add_common(
      app.add_subcommand("reconstruct", "fit the tri-plane field to renders"));
  const auto* sub_extract =
      add_common(app.add_subcommand("extract", "extract a mesh from the field"));
  const auto* sub_eval =
      add_common(app.add_subcommand("eval", "score the extracted mesh"));
  const auto* sub_ablate =
      add_common(app.add_subcommand("ablate", "trajectory ablation study"));

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(sub_trajectory)) return cmd_trajectory(args);
    if (app.got_subcommand(sub_render)) return cmd_render_gt(args);
    if (app.got_subcommand(sub_dvi_train)) return cmd_dvi_train(args);
    if (app.got_subcommand(sub_dvi_sample)) return cmd_dvi_sample(args);
    if (app.got_subcommand(sub_reconstruct)) return cmd_reconstruct(args);
    if (app.got_subcommand(sub_extract)) return cmd_extract(args);
    if (app.got_subcommand(sub_eval)) return cmd_eval(args);
    if (app.got_subcommand(sub_ablate)) return cmd_ablate(args);
  } catch (const ConfigError& e) {
    log_error(std::string("config error: ") + e.what());
    return 2;
  } catch (const NumericError& e) {
    log_error(std::string("numeric error: ") + e.what());
    return 3;
  } catch (const IoError& e) {
    log_error(std::string("io error: ") + e.what());
    return 4;
  }
  return 0;
}
