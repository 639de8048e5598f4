// Command-line front end: dataset generation, training, rendering,
// evaluation, and the cumulative constraint ablation.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include "pnrf/pnrf.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct CommonArgs {
  std::string config_path;
  std::string data_path;
  std::string out_path;
};

pnrf::SceneDataset load_dataset(const pnrf::RunConfig& cfg, const std::string& data_path) {
  pnrf::SceneDataset ds = pnrf::load_nerf_synthetic(data_path, cfg.dataset);
  if (cfg.depth_priors) pnrf::load_depth_priors(data_path, ds);
  return ds;
}

template <class S>
pnrf::RadianceField<S> field_from_checkpoint(const pnrf::RunConfig& cfg,
                                             const std::string& ckpt_path) {
  pnrf::RadianceField<S> field(cfg.setup.field, cfg.setup.pos_enc, cfg.setup.dir_enc,
                               cfg.setup.train.seed);
  field.load_entries(pnrf::load_checkpoint(ckpt_path));
  return field;
}

// Parse/validate work runs in `prepare` (failures exit 2), the actual job in
// `execute` (failures exit 1).
template <class Prepare>
int run_command(Prepare prepare) {
  std::function<int()> execute;
  try {
    execute = prepare();
  } catch (const std::exception& e) {
    std::cerr << "pnrf: config error: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    return execute();
  } catch (const std::exception& e) {
    std::cerr << "pnrf: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int cmd_train(const CommonArgs& args, const std::optional<std::string>& resume) {
  return run_command([&]() -> std::function<int()> {
    pnrf::RunConfig cfg = pnrf::load_run_config(args.config_path);
    return [=]() {
      pnrf::SceneDataset ds = load_dataset(cfg, args.data_path);
      pnrf::TrainResult res;
      if (cfg.setup.train.double_precision)
        res = pnrf::train<double>(ds, cfg.setup, args.out_path, resume);
      else
        res = pnrf::train<float>(ds, cfg.setup, args.out_path, resume);
      std::cout << pnrf::eval_report_to_json(res.report).dump(2) << "\n";
      std::cerr << "[pnrf] done: " << res.steps_run << " steps, checkpoint "
                << res.checkpoint_path << "\n";
      return kExitOk;
    };
  });
}

int cmd_gen_toy(const std::string& spec_path, const std::string& out_dir) {
  return run_command([&]() -> std::function<int()> {
    pnrf::ToySceneSpec spec = spec_path.empty()
                                  ? pnrf::ToySceneSpec::default_scene()
                                  : pnrf::ToySceneSpec::from_json(pnrf::load_json(spec_path));
    return [=]() {
      pnrf::write_toy_dataset(spec, out_dir);
      std::cerr << "[pnrf] toy dataset written to " << out_dir << "\n";
      return kExitOk;
    };
  });
}

int cmd_render(const std::string& config_path, const std::string& ckpt, const std::string& pose,
               const std::string& data_path, const std::string& out_png,
               const std::string& out_depth) {
  return run_command([&]() -> std::function<int()> {
    pnrf::RunConfig cfg = pnrf::load_run_config(config_path);
    return [=]() {
      pnrf::Camera cam;
      char* end = nullptr;
      const long index = std::strtol(pose.c_str(), &end, 10);
      if (end && *end == '\0' && !pose.empty()) {
        pnrf::check(!data_path.empty(), "render: --pose by index requires --data");
        pnrf::SceneDataset ds = load_dataset(cfg, data_path);
        pnrf::check(index >= 0 && index < static_cast<long>(ds.test.size()),
                    pnrf::cat("render: pose index ", index, " out of range (test split has ",
                              ds.test.size(), " views)"));
        cam = ds.test[index].camera;
      } else {
        const pnrf::json j = pnrf::load_json(pose);
        pnrf::expect_keys(j, "pose", {"transform_matrix", "camera_angle_x", "width", "height",
                                      "near", "far"});
        cam.width = j.at("width").get<int>();
        cam.height = j.at("height").get<int>();
        cam.focal = pnrf::focal_from_fov_x(j.at("camera_angle_x").get<double>(), cam.width);
        cam.near_t = j.value("near", cfg.dataset.near_t);
        cam.far_t = j.value("far", cfg.dataset.far_t);
        const auto& tm = j.at("transform_matrix");
        for (int r = 0; r < 4; ++r)
          for (int c = 0; c < 4; ++c) cam.transform.at(r, c) = tm.at(r).at(c).get<double>();
        cam.validate();
      }
      pnrf::RenderConfig rc;
      rc.n_samples = cfg.setup.train.n_samples;
      rc.stratified = false;
      rc.background = cfg.dataset.background;
      std::pair<pnrf::Image, pnrf::Image> out;
      if (cfg.setup.train.double_precision) {
        auto field = field_from_checkpoint<double>(cfg, ckpt);
        out = pnrf::render_image(field, cam, rc, cfg.setup.train.seed);
      } else {
        auto field = field_from_checkpoint<float>(cfg, ckpt);
        out = pnrf::render_image(field, cam, rc, cfg.setup.train.seed);
      }
      pnrf::write_png(out_png, out.first);
      if (!out_depth.empty()) pnrf::write_pfm(out_depth, out.second);
      std::cerr << "[pnrf] wrote " << out_png << "\n";
      return kExitOk;
    };
  });
}

int cmd_eval(const std::string& config_path, const std::string& ckpt, const std::string& data_path,
             const std::string& split, const std::string& out_json) {
  return run_command([&]() -> std::function<int()> {
    pnrf::RunConfig cfg = pnrf::load_run_config(config_path);
    pnrf::check_arg(split == "train" || split == "test" || split == "both",
                    pnrf::cat("eval: unknown split \"", split, "\""));
    return [=]() {
      pnrf::SceneDataset ds = load_dataset(cfg, data_path);
      pnrf::RenderConfig rc;
      rc.n_samples = cfg.setup.train.n_samples;
      rc.stratified = false;
      rc.background = cfg.dataset.background;
      const bool do_train = split != "test";
      const bool do_test = split != "train";
      pnrf::EvalReport rep;
      if (cfg.setup.train.double_precision) {
        auto field = field_from_checkpoint<double>(cfg, ckpt);
        rep = pnrf::evaluate(field, ds, do_train, do_test, rc, cfg.setup.train.seed);
      } else {
        auto field = field_from_checkpoint<float>(cfg, ckpt);
        rep = pnrf::evaluate(field, ds, do_train, do_test, rc, cfg.setup.train.seed);
      }
      const pnrf::json j = pnrf::eval_report_to_json(rep);
      std::cout << j.dump(2) << "\n";
      if (!out_json.empty()) {
        std::ofstream f(out_json);
        f << j.dump(2) << "\n";
        pnrf::check(f.good(), pnrf::cat("eval: failed writing ", out_json));
      }
      return kExitOk;
    };
  });
}

int cmd_ablate(const CommonArgs& args) {
  return run_command([&]() -> std::function<int()> {
    pnrf::RunConfig cfg = pnrf::load_run_config(args.config_path);
    return [=]() {
      pnrf::SceneDataset ds = load_dataset(cfg, args.data_path);
      std::vector<pnrf::AblationRow> rows =
          cfg.setup.train.double_precision
              ? pnrf::ablation_suite<double>(ds, cfg.setup, args.out_path)
              : pnrf::ablation_suite<float>(ds, cfg.setup, args.out_path);
      const std::string table = pnrf::write_ablation_table(rows, args.out_path);
      std::cout << "wrote " << table << "\n";
      return kExitOk;
    };
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"physics-guided sparse-view radiance field trainer"};
  app.require_subcommand(1);

  CommonArgs targs;
  std::string resume;
  CLI::App* train = app.add_subcommand("train", "train a radiance field on a dataset");
  train->add_option("--config", targs.config_path, "run config json")->required();
  train->add_option("--data", targs.data_path, "dataset directory")->required();
  train->add_option("--out", targs.out_path, "output directory")->required();
  train->add_option("--resume", resume, "checkpoint to resume from");

  std::string spec_path, gen_out;
  CLI::App* gen = app.add_subcommand("gen-toy", "generate a toy dataset with analytic depth");
  gen->add_option("--spec", spec_path, "toy scene spec json (omit for the built-in scene)");
  gen->add_option("--out", gen_out, "output dataset directory")->required();

  std::string r_config, r_ckpt, r_pose, r_data, r_out, r_depth;
  CLI::App* render = app.add_subcommand("render", "render a view from a checkpoint");
  render->add_option("--config", r_config, "run config json")->required();
  render->add_option("--ckpt", r_ckpt, "checkpoint file")->required();
  render->add_option("--pose", r_pose, "test view index, or a camera json file")->required();
  render->add_option("--data", r_data, "dataset directory (needed for --pose by index)");
  render->add_option("--out", r_out, "output png")->required();
  render->add_option("--depth-out", r_depth, "optional output pfm depth raster");

  std::string e_config, e_ckpt, e_data, e_split = "both", e_out;
  CLI::App* eval = app.add_subcommand("eval", "evaluate psnr on dataset splits");
  eval->add_option("--config", e_config, "run config json")->required();
  eval->add_option("--ckpt", e_ckpt, "checkpoint file")->required();
  eval->add_option("--data", e_data, "dataset directory")->required();
  eval->add_option("--split", e_split, "train|test|both");
  eval->add_option("--out", e_out, "write the report json here as well");

  CommonArgs aargs;
  CLI::App* ablate = app.add_subcommand("ablate", "run the cumulative constraint ablation");
  ablate->add_option("--config", aargs.config_path, "run config json")->required();
  ablate->add_option("--data", aargs.data_path, "dataset directory")->required();
  ablate->add_option("--out", aargs.out_path, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (*train)
    return cmd_train(targs, resume.empty() ? std::nullopt : std::make_optional(resume));
  if (*gen) return cmd_gen_toy(spec_path, gen_out);
  if (*render) return cmd_render(r_config, r_ckpt, r_pose, r_data, r_out, r_depth);
  if (*eval) return cmd_eval(e_config, e_ckpt, e_data, e_split, e_out);
  if (*ablate) return cmd_ablate(aargs);
  return kExitUsage;
}
