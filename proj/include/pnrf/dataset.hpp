#pragma once

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "pnrf/camera.hpp"
#include "pnrf/image.hpp"
#include "pnrf/jsonutil.hpp"
#include "pnrf/util.hpp"

namespace pnrf {

struct Frame {
  std::string name;  // file_path from the transforms file, "./" stripped
  Image image;       // RGB, alpha already composited over the background
  Camera camera;
  std::optional<Image> depth_prior;  // ordinal-only monocular depth, 1 channel
};

struct SceneDataset {
  std::vector<Frame> train;
  std::vector<Frame> test;
  Aabb bounds{{-4, -4, -4}, {4, 4, 4}};
  Vec3 background{1, 1, 1};
};

struct DatasetOptions {
  Vec3 background{1, 1, 1};
  double near_t = 2.0;
  double far_t = 6.0;
  Aabb bounds{{-4, -4, -4}, {4, 4, 4}};  // blender-scene extent default
  int train_views = 8;
  // "evenly_spaced" | "first" | "list"; which source frames become the
  // sparse training set.
  std::string train_view_mode = "evenly_spaced";
  std::vector<int> train_view_list;
  bool load_test = true;
};

namespace detail {

inline std::string strip_dot_slash(std::string s) {
  if (s.rfind("./", 0) == 0) s = s.substr(2);
  return s;
}

inline std::vector<Frame> load_split(const std::string& dir, const std::string& transforms_name,
                                     const DatasetOptions& opts) {
  namespace fs = std::filesystem;
  const std::string tpath = (fs::path(dir) / transforms_name).string();
  check(fs::exists(tpath), cat("dataset: missing transforms file: ", tpath));
  const json j = load_json(tpath);
  check(j.contains("camera_angle_x"), cat(tpath, ": missing camera_angle_x"));
  check(j.contains("frames") && j["frames"].is_array(), cat(tpath, ": missing frames array"));
  const double angle_x = j["camera_angle_x"].get<double>();

  std::vector<Frame> frames;
  for (const auto& jf : j["frames"]) {
    check(jf.contains("file_path") && jf.contains("transform_matrix"),
          cat(tpath, ": frame needs file_path and transform_matrix"));
    Frame f;
    f.name = strip_dot_slash(jf["file_path"].get<std::string>());
    const std::string img_path = (fs::path(dir) / (f.name + ".png")).string();
    check(fs::exists(img_path), cat("dataset: missing image: ", img_path));
    Image rgba = read_png(img_path);
    check(rgba.width == rgba.height,
          cat("dataset: non-square image ", img_path, " (", rgba.width, "x", rgba.height,
              "); camera_angle_x defines a single focal length"));
    f.image = composite_over(rgba, opts.background);

    const auto& tm = jf["transform_matrix"];
    check(tm.is_array() && tm.size() == 4, cat(tpath, ": transform_matrix must be 4x4"));
    for (int r = 0; r < 4; ++r) {
      check(tm[r].is_array() && tm[r].size() == 4, cat(tpath, ": transform_matrix must be 4x4"));
      for (int c = 0; c < 4; ++c) f.camera.transform.at(r, c) = tm[r][c].get<double>();
    }
    f.camera.width = f.image.width;
    f.camera.height = f.image.height;
    f.camera.focal = focal_from_fov_x(angle_x, f.image.width);
    f.camera.near_t = opts.near_t;
    f.camera.far_t = opts.far_t;
    f.camera.validate();
    frames.push_back(std::move(f));
  }
  check(!frames.empty(), cat(tpath, ": no frames"));
  for (const Frame& f : frames)
    check(f.image.width == frames[0].image.width && f.image.height == frames[0].image.height,
          cat("dataset: image dimensions differ across frames (", f.name, ")"));
  return frames;
}

inline std::vector<int> pick_train_indices(int available, const DatasetOptions& opts) {
  std::vector<int> idx;
  if (opts.train_view_mode == "list") {
    for (int i : opts.train_view_list) {
      check_arg(i >= 0 && i < available,
                cat("dataset: train view index ", i, " out of range [0,", available, ")"));
      idx.push_back(i);
    }
  } else {
    const int n = std::min(opts.train_views, available);
    check_arg(n > 0, "dataset: train_views must be positive");
    for (int k = 0; k < n; ++k)
      idx.push_back(opts.train_view_mode == "first" ? k
                                                    : static_cast<int>((static_cast<int64_t>(k) *
                                                                        available) /
                                                                       n));
  }
  return idx;
}

}  // namespace detail

// NeRF-synthetic layout: transforms_train.json / transforms_test.json with
// camera_angle_x and row-major camera-to-world matrices, images as PNG next
// to them. RGBA inputs are composited over the configured background and the
// sparse train split keeps only the configured view subset.
inline SceneDataset load_nerf_synthetic(const std::string& dir, const DatasetOptions& opts = {}) {
  SceneDataset ds;
  ds.background = opts.background;
  ds.bounds = opts.bounds;
  check_arg(ds.bounds.volume() > 0, "dataset: scene bounds must have positive volume");
  std::vector<Frame> all_train = detail::load_split(dir, "transforms_train.json", opts);
  for (int i : detail::pick_train_indices(static_cast<int>(all_train.size()), opts))
    ds.train.push_back(std::move(all_train[i]));
  if (opts.load_test) ds.test = detail::load_split(dir, "transforms_test.json", opts);
  return ds;
}

// Attaches one PFM depth prior per train frame ("<name>_depth.pfm"). Values
// are only ever used ordinally, so any monotone rescaling of a prior is
// equivalent. Missing files exclude the frame from pair sampling with a
// warning; dimension mismatches are hard errors.
inline void load_depth_priors(const std::string& dir, SceneDataset& ds) {
  namespace fs = std::filesystem;
  for (Frame& f : ds.train) {
    const std::string path = (fs::path(dir) / (f.name + "_depth.pfm")).string();
    if (!fs::exists(path)) {
      std::cerr << "[pnrf] warning: no depth prior for frame " << f.name
                << "; excluded from ranking pairs\n";
      f.depth_prior.reset();
      continue;
    }
    Image d = read_pfm(path);
    check(d.width == f.image.width && d.height == f.image.height,
          cat("depth prior ", path, ": ", d.width, "x", d.height, " does not match image ",
              f.image.width, "x", f.image.height));
    f.depth_prior = std::move(d);
  }
}

}  // namespace pnrf
