#pragma once

#include <cstdint>
#include <string>

#include "pnrf/dataset.hpp"
#include "pnrf/jsonutil.hpp"
#include "pnrf/train.hpp"

namespace pnrf {

// Whole-run configuration. Every hyperparameter lives in the JSON config (so
// a reproduction or ablation is a file diff); command-line flags carry only
// paths and overrides.
struct RunConfig {
  DatasetOptions dataset;
  bool depth_priors = true;
  TrainSetup setup;

  static RunConfig from_json(const json& j);
  json to_json() const;
};

namespace detail {

inline uint64_t fnv1a(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <class T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j[key].get<T>();
}

}  // namespace detail

inline RunConfig RunConfig::from_json(const json& j) {
  expect_keys(j, "config", {"dataset", "field", "train"});
  RunConfig cfg;
  using detail::get_if;

  if (j.contains("dataset")) {
    const json& jd = j["dataset"];
    expect_keys(jd, "config.dataset",
                {"background", "near", "far", "bounds", "train_views", "train_view_mode",
                 "train_view_list", "depth_priors"});
    if (jd.contains("background"))
      cfg.dataset.background = vec3_from_json(jd["background"], "config.dataset.background");
    get_if(jd, "near", cfg.dataset.near_t);
    get_if(jd, "far", cfg.dataset.far_t);
    if (jd.contains("bounds")) {
      expect_keys(jd["bounds"], "config.dataset.bounds", {"min", "max"});
      cfg.dataset.bounds.lo = vec3_from_json(jd["bounds"]["min"], "config.dataset.bounds.min");
      cfg.dataset.bounds.hi = vec3_from_json(jd["bounds"]["max"], "config.dataset.bounds.max");
    }
    get_if(jd, "train_views", cfg.dataset.train_views);
    get_if(jd, "train_view_mode", cfg.dataset.train_view_mode);
    if (jd.contains("train_view_list"))
      cfg.dataset.train_view_list = jd["train_view_list"].get<std::vector<int>>();
    get_if(jd, "depth_priors", cfg.depth_priors);
    check_arg(cfg.dataset.train_view_mode == "first" ||
                  cfg.dataset.train_view_mode == "evenly_spaced" ||
                  cfg.dataset.train_view_mode == "list",
              cat("config.dataset.train_view_mode: unknown mode \"", cfg.dataset.train_view_mode,
                  "\""));
  }

  if (j.contains("field")) {
    const json& jf = j["field"];
    expect_keys(jf, "config.field",
                {"hidden_width", "depth", "skip_layer", "color_head_width", "fusion_width",
                 "pos_frequencies", "dir_frequencies", "include_input"});
    get_if(jf, "hidden_width", cfg.setup.field.hidden_width);
    get_if(jf, "depth", cfg.setup.field.depth);
    get_if(jf, "skip_layer", cfg.setup.field.skip_layer);
    get_if(jf, "color_head_width", cfg.setup.field.color_head_width);
    get_if(jf, "fusion_width", cfg.setup.field.fusion_width);
    get_if(jf, "pos_frequencies", cfg.setup.pos_enc.num_frequencies);
    get_if(jf, "dir_frequencies", cfg.setup.dir_enc.num_frequencies);
    if (jf.contains("include_input")) {
      cfg.setup.pos_enc.include_input = jf["include_input"].get<bool>();
      cfg.setup.dir_enc.include_input = cfg.setup.pos_enc.include_input;
    }
  }

  if (j.contains("train")) {
    const json& jt = j["train"];
    expect_keys(jt, "config.train",
                {"iterations", "rays_per_batch", "patch_size", "n_samples", "lr0", "gamma",
                 "beta1", "beta2", "adam_eps", "seed", "eval_every", "test_every",
                 "checkpoint_every", "double_precision", "test_res_divisor", "test_views",
                 "pairs_per_step", "sparsity_points", "cv_pairs", "ranking_margin",
                 "prior_tie_eps", "occlusion_tol", "cv_color_weight", "cv_density_weight",
                 "stratified", "acc_eps", "weights", "schedule"});
    TrainConfig& t = cfg.setup.train;
    get_if(jt, "iterations", t.iterations);
    get_if(jt, "rays_per_batch", t.rays_per_batch);
    get_if(jt, "patch_size", t.patch_size);
    get_if(jt, "n_samples", t.n_samples);
    get_if(jt, "lr0", t.lr0);
    get_if(jt, "gamma", t.gamma);
    get_if(jt, "beta1", t.beta1);
    get_if(jt, "beta2", t.beta2);
    get_if(jt, "adam_eps", t.adam_eps);
    get_if(jt, "seed", t.seed);
    get_if(jt, "eval_every", t.eval_every);
    get_if(jt, "test_every", t.test_every);
    get_if(jt, "checkpoint_every", t.checkpoint_every);
    get_if(jt, "double_precision", t.double_precision);
    get_if(jt, "test_res_divisor", t.test_res_divisor);
    get_if(jt, "test_views", t.test_views);
    get_if(jt, "pairs_per_step", t.pairs_per_step);
    get_if(jt, "sparsity_points", t.sparsity_points);
    get_if(jt, "cv_pairs", t.cv_pairs);
    get_if(jt, "ranking_margin", t.ranking_margin);
    get_if(jt, "prior_tie_eps", t.prior_tie_eps);
    get_if(jt, "occlusion_tol", t.occlusion_tol);
    get_if(jt, "cv_color_weight", t.cv_color_weight);
    get_if(jt, "cv_density_weight", t.cv_density_weight);
    get_if(jt, "stratified", t.stratified);
    get_if(jt, "acc_eps", t.acc_eps);
    if (jt.contains("weights")) {
      expect_keys(jt["weights"], "config.train.weights", {"depth", "cv", "sparse", "reg"});
      get_if(jt["weights"], "depth", t.weights.lambda_depth);
      get_if(jt["weights"], "cv", t.weights.lambda_cv);
      get_if(jt["weights"], "sparse", t.weights.lambda_sparse);
      get_if(jt["weights"], "reg", t.weights.lambda_reg);
    }
    if (jt.contains("schedule")) {
      expect_keys(jt["schedule"], "config.train.schedule", {"thresholds", "values"});
      t.schedule.thresholds = jt["schedule"].at("thresholds").get<std::vector<int64_t>>();
      t.schedule.values = jt["schedule"].at("values").get<std::vector<double>>();
    }
    t.validate();
  }

  cfg.setup.config_hash = detail::fnv1a(cfg.to_json().dump());
  return cfg;
}

inline json RunConfig::to_json() const {
  json j;
  j["dataset"] = {{"background", vec3_to_json(dataset.background)},
                  {"near", dataset.near_t},
                  {"far", dataset.far_t},
                  {"bounds",
                   {{"min", vec3_to_json(dataset.bounds.lo)},
                    {"max", vec3_to_json(dataset.bounds.hi)}}},
                  {"train_views", dataset.train_views},
                  {"train_view_mode", dataset.train_view_mode},
                  {"train_view_list", dataset.train_view_list},
                  {"depth_priors", depth_priors}};
  j["field"] = {{"hidden_width", setup.field.hidden_width},
                {"depth", setup.field.depth},
                {"skip_layer", setup.field.skip_layer},
                {"color_head_width", setup.field.color_head_width},
                {"fusion_width", setup.field.fusion_width},
                {"pos_frequencies", setup.pos_enc.num_frequencies},
                {"dir_frequencies", setup.dir_enc.num_frequencies},
                {"include_input", setup.pos_enc.include_input}};
  const TrainConfig& t = setup.train;
  j["train"] = {{"iterations", t.iterations},
                {"rays_per_batch", t.rays_per_batch},
                {"patch_size", t.patch_size},
                {"n_samples", t.n_samples},
                {"lr0", t.lr0},
                {"gamma", t.gamma},
                {"beta1", t.beta1},
                {"beta2", t.beta2},
                {"adam_eps", t.adam_eps},
                {"seed", t.seed},
                {"eval_every", t.eval_every},
                {"test_every", t.test_every},
                {"checkpoint_every", t.checkpoint_every},
                {"double_precision", t.double_precision},
                {"test_res_divisor", t.test_res_divisor},
                {"test_views", t.test_views},
                {"pairs_per_step", t.pairs_per_step},
                {"sparsity_points", t.sparsity_points},
                {"cv_pairs", t.cv_pairs},
                {"ranking_margin", t.ranking_margin},
                {"prior_tie_eps", t.prior_tie_eps},
                {"occlusion_tol", t.occlusion_tol},
                {"cv_color_weight", t.cv_color_weight},
                {"cv_density_weight", t.cv_density_weight},
                {"stratified", t.stratified},
                {"acc_eps", t.acc_eps},
                {"weights",
                 {{"depth", t.weights.lambda_depth},
                  {"cv", t.weights.lambda_cv},
                  {"sparse", t.weights.lambda_sparse},
                  {"reg", t.weights.lambda_reg}}},
                {"schedule",
                 {{"thresholds", t.schedule.thresholds}, {"values", t.schedule.values}}}};
  return j;
}

inline RunConfig load_run_config(const std::string& path) {
  return RunConfig::from_json(load_json(path));
}

}  // namespace pnrf
