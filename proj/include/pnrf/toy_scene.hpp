#pragma once

#include <cmath>
#include <filesystem>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "pnrf/camera.hpp"
#include "pnrf/dataset.hpp"
#include "pnrf/image.hpp"
#include "pnrf/jsonutil.hpp"
#include "pnrf/util.hpp"

namespace pnrf {

// Lambertian sphere/box scenes with analytic intersections: the desk-scale
// stand-in for real captures. Ground-truth renders and exact depth come out
// of the same camera model the training renderer uses.

struct ToyPrimitive {
  enum class Type { kSphere, kBox };
  Type type = Type::kSphere;
  Vec3 center;      // sphere
  double radius = 1;
  Vec3 box_min, box_max;  // box
  Vec3 albedo{0.8, 0.8, 0.8};
};

struct CameraRing {
  int count = 8;
  double radius = 3.2;
  double elevation_deg = 25.0;
  double phase_deg = 0.0;
};

struct ToySceneSpec {
  uint64_t seed = 1;
  int width = 64, height = 64;
  double fov_x_deg = 40.0;
  Vec3 background{1, 1, 1};
  Aabb bounds{{-1.5, -1.5, -1.5}, {1.5, 1.5, 1.5}};
  Vec3 light_dir{-0.5, -0.3, -1.0};  // direction the light travels
  double ambient = 0.15;
  double near_t = 0.5, far_t = 7.0;
  std::vector<ToyPrimitive> primitives;
  CameraRing train_ring{8, 3.2, 25.0, 0.0};
  CameraRing test_ring{12, 3.2, 35.0, 11.25};

  void validate() const {
    check_arg(width > 0 && height > 0, "toy spec: empty image");
    check_arg(train_ring.count >= 2, "toy spec: camera ring needs at least 2 cameras");
    check_arg(bounds.volume() > 0, "toy spec: bounds must have positive volume");
    for (size_t i = 0; i < primitives.size(); ++i) {
      const ToyPrimitive& p = primitives[i];
      bool inside = true;
      if (p.type == ToyPrimitive::Type::kSphere) {
        const Vec3 r{p.radius, p.radius, p.radius};
        inside = bounds.contains(p.center - r) && bounds.contains(p.center + r);
      } else {
        inside = bounds.contains(p.box_min) && bounds.contains(p.box_max);
      }
      check_arg(inside, cat("toy spec: primitive ", i, " not inside scene bounds"));
    }
  }

  static ToySceneSpec default_scene() {
    ToySceneSpec s;
    ToyPrimitive sphere;
    sphere.type = ToyPrimitive::Type::kSphere;
    sphere.center = {0.0, 0.0, 0.25};
    sphere.radius = 0.55;
    sphere.albedo = {0.85, 0.25, 0.2};
    ToyPrimitive box;
    box.type = ToyPrimitive::Type::kBox;
    box.box_min = {-0.95, -0.95, -0.75};
    box.box_max = {0.95, 0.95, -0.35};
    box.albedo = {0.2, 0.45, 0.85};
    s.primitives = {sphere, box};
    return s;
  }

  static ToySceneSpec from_json(const json& j);
  json to_json() const;
};

struct ToyHit {
  double t = 0;
  Vec3 normal;
  Vec3 albedo;
};

namespace detail {

inline std::optional<double> intersect_sphere(const Ray& r, const Vec3& c, double rad) {
  const Vec3 oc = r.origin - c;
  const double b = dot(oc, r.direction);
  const double disc = b * b - (dot(oc, oc) - rad * rad);
  if (disc < 0) return std::nullopt;
  const double sq = std::sqrt(disc);
  const double t0 = -b - sq, t1 = -b + sq;
  if (t0 > 1e-9) return t0;
  if (t1 > 1e-9) return t1;
  return std::nullopt;
}

inline std::optional<std::pair<double, Vec3>> intersect_box(const Ray& r, const Vec3& lo,
                                                            const Vec3& hi) {
  double t_enter = -1e30, t_exit = 1e30;
  int axis = -1;
  for (int a = 0; a < 3; ++a) {
    const double o = r.origin[a], d = r.direction[a];
    const double l = lo[a], h = hi[a];
    if (std::abs(d) < 1e-12) {
      if (o < l || o > h) return std::nullopt;
      continue;
    }
    double t0 = (l - o) / d, t1 = (h - o) / d;
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > t_enter) {
      t_enter = t0;
      axis = a;
    }
    t_exit = std::min(t_exit, t1);
    if (t_enter > t_exit) return std::nullopt;
  }
  if (t_enter <= 1e-9 || axis < 0) return std::nullopt;  // inside or behind
  Vec3 n{0, 0, 0};
  const double sign = r.direction[axis] > 0 ? -1.0 : 1.0;
  if (axis == 0) n.x = sign;
  if (axis == 1) n.y = sign;
  if (axis == 2) n.z = sign;
  return std::pair{t_enter, n};
}

}  // namespace detail

inline std::optional<ToyHit> trace_toy_ray(const ToySceneSpec& spec, const Ray& r) {
  std::optional<ToyHit> best;
  for (const ToyPrimitive& p : spec.primitives) {
    if (p.type == ToyPrimitive::Type::kSphere) {
      if (auto t = detail::intersect_sphere(r, p.center, p.radius)) {
        if (!best || *t < best->t) {
          const Vec3 hitp = r.origin + r.direction * *t;
          best = ToyHit{*t, normalized(hitp - p.center), p.albedo};
        }
      }
    } else {
      if (auto hit = detail::intersect_box(r, p.box_min, p.box_max)) {
        if (!best || hit->first < best->t) best = ToyHit{hit->first, hit->second, p.albedo};
      }
    }
  }
  return best;
}

inline Vec3 shade_toy_hit(const ToySceneSpec& spec, const ToyHit& hit) {
  const Vec3 l = normalized(spec.light_dir);
  const double lambert = std::max(0.0, dot(hit.normal, -l));
  return hit.albedo * (spec.ambient + (1.0 - spec.ambient) * lambert);
}

inline Camera toy_camera(const ToySceneSpec& spec, const CameraRing& ring, int index) {
  const double phi = ring.phase_deg * std::numbers::pi / 180.0 +
                     2.0 * std::numbers::pi * index / ring.count;
  const double el = ring.elevation_deg * std::numbers::pi / 180.0;
  const Vec3 eye{ring.radius * std::cos(phi) * std::cos(el),
                 ring.radius * std::sin(phi) * std::cos(el), ring.radius * std::sin(el)};
  Camera cam;
  cam.transform = look_at(eye, Vec3{0, 0, 0}, Vec3{0, 0, 1});
  cam.width = spec.width;
  cam.height = spec.height;
  cam.focal = focal_from_fov_x(spec.fov_x_deg * std::numbers::pi / 180.0, spec.width);
  cam.near_t = spec.near_t;
  cam.far_t = spec.far_t;
  return cam;
}

// Renders one view: 8-bit-quantized color (so the PNG round trip is exact)
// plus the exact along-ray depth, far-plane sentinel where nothing is hit.
inline std::pair<Image, Image> render_toy_view(const ToySceneSpec& spec, const Camera& cam) {
  Image color(cam.width, cam.height, 3);
  Image depth(cam.width, cam.height, 1, static_cast<float>(cam.far_t));
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const Ray r = generate_ray(cam, x, y);
      Vec3 c = spec.background;
      if (auto hit = trace_toy_ray(spec, r)) {
        c = shade_toy_hit(spec, *hit);
        depth.at(x, y) = static_cast<float>(hit->t);
      }
      color.at(x, y, 0) = quantize8(static_cast<float>(c.x));
      color.at(x, y, 1) = quantize8(static_cast<float>(c.y));
      color.at(x, y, 2) = quantize8(static_cast<float>(c.z));
    }
  return {std::move(color), std::move(depth)};
}

// In-memory dataset with analytic depth priors attached to the train split.
inline SceneDataset generate_toy_scene(const ToySceneSpec& spec) {
  spec.validate();
  SceneDataset ds;
  ds.background = spec.background;
  ds.bounds = spec.bounds;
  auto make_split = [&](const CameraRing& ring, const std::string& split, bool with_prior) {
    std::vector<Frame> out;
    for (int i = 0; i < ring.count; ++i) {
      Frame f;
      f.name = cat(split, "/r_", i);
      f.camera = toy_camera(spec, ring, i);
      auto [color, depth] = render_toy_view(spec, f.camera);
      f.image = std::move(color);
      if (with_prior) f.depth_prior = std::move(depth);
      out.push_back(std::move(f));
    }
    return out;
  };
  ds.train = make_split(spec.train_ring, "train", true);
  ds.test = make_split(spec.test_ring, "test", false);
  return ds;
}

// Writes the toy dataset in the NeRF-synthetic directory layout so the
// trainer ingests generated and real scenes through the same loader.
inline void write_toy_dataset(const ToySceneSpec& spec, const std::string& dir) {
  namespace fs = std::filesystem;
  spec.validate();
  const double angle_x = spec.fov_x_deg * std::numbers::pi / 180.0;
  auto write_split = [&](const CameraRing& ring, const std::string& split, bool with_depth) {
    fs::create_directories(fs::path(dir) / split);
    json transforms;
    transforms["camera_angle_x"] = angle_x;
    transforms["frames"] = json::array();
    for (int i = 0; i < ring.count; ++i) {
      const Camera cam = toy_camera(spec, ring, i);
      auto [color, depth] = render_toy_view(spec, cam);
      const std::string stem = cat(split, "/r_", i);
      write_png((fs::path(dir) / (stem + ".png")).string(), color);
      if (with_depth) write_pfm((fs::path(dir) / (stem + "_depth.pfm")).string(), depth);
      json jf;
      jf["file_path"] = cat("./", stem);
      json rows = json::array();
      for (int r = 0; r < 4; ++r) {
        json row = json::array();
        for (int c = 0; c < 4; ++c) row.push_back(cam.transform.at(r, c));
        rows.push_back(row);
      }
      jf["transform_matrix"] = rows;
      transforms["frames"].push_back(jf);
    }
    std::ofstream f(fs::path(dir) / cat("transforms_", split, ".json"));
    f << transforms.dump(2) << "\n";
    check(f.good(), cat("toy scene: failed writing transforms_", split, ".json"));
  };
  write_split(spec.train_ring, "train", true);
  write_split(spec.test_ring, "test", false);
  std::ofstream f(fs::path(dir) / "scene.json");
  f << spec.to_json().dump(2) << "\n";
}

// Loader options matching how the generator laid the scene out.
inline DatasetOptions toy_dataset_options(const ToySceneSpec& spec) {
  DatasetOptions opts;
  opts.background = spec.background;
  opts.near_t = spec.near_t;
  opts.far_t = spec.far_t;
  opts.bounds = spec.bounds;
  opts.train_views = spec.train_ring.count;
  opts.train_view_mode = "first";
  return opts;
}

// ---- spec json ----

inline ToySceneSpec ToySceneSpec::from_json(const json& j) {
  expect_keys(j, "toy spec",
              {"seed", "width", "height", "fov_x_deg", "background", "bounds", "light_dir",
               "ambient", "near", "far", "primitives", "train_ring", "test_ring"});
  ToySceneSpec s;
  if (j.contains("seed")) s.seed = j["seed"].get<uint64_t>();
  if (j.contains("width")) s.width = j["width"].get<int>();
  if (j.contains("height")) s.height = j["height"].get<int>();
  if (j.contains("fov_x_deg")) s.fov_x_deg = j["fov_x_deg"].get<double>();
  if (j.contains("background")) s.background = vec3_from_json(j["background"], "toy spec.background");
  if (j.contains("bounds")) {
    expect_keys(j["bounds"], "toy spec.bounds", {"min", "max"});
    s.bounds.lo = vec3_from_json(j["bounds"]["min"], "toy spec.bounds.min");
    s.bounds.hi = vec3_from_json(j["bounds"]["max"], "toy spec.bounds.max");
  }
  if (j.contains("light_dir")) s.light_dir = vec3_from_json(j["light_dir"], "toy spec.light_dir");
  if (j.contains("ambient")) s.ambient = j["ambient"].get<double>();
  if (j.contains("near")) s.near_t = j["near"].get<double>();
  if (j.contains("far")) s.far_t = j["far"].get<double>();
  auto ring_from = [&](const json& jr, const std::string& where) {
    expect_keys(jr, where, {"count", "radius", "elevation_deg", "phase_deg"});
    CameraRing r;
    if (jr.contains("count")) r.count = jr["count"].get<int>();
    if (jr.contains("radius")) r.radius = jr["radius"].get<double>();
    if (jr.contains("elevation_deg")) r.elevation_deg = jr["elevation_deg"].get<double>();
    if (jr.contains("phase_deg")) r.phase_deg = jr["phase_deg"].get<double>();
    return r;
  };
  if (j.contains("train_ring")) s.train_ring = ring_from(j["train_ring"], "toy spec.train_ring");
  if (j.contains("test_ring")) s.test_ring = ring_from(j["test_ring"], "toy spec.test_ring");
  if (j.contains("primitives")) {
    s.primitives.clear();
    for (size_t i = 0; i < j["primitives"].size(); ++i) {
      const json& jp = j["primitives"][i];
      const std::string where = cat("toy spec.primitives[", i, "]");
      expect_keys(jp, where, {"type", "center", "radius", "min", "max", "albedo"});
      ToyPrimitive p;
      const std::string type = jp.at("type").get<std::string>();
      if (type == "sphere") {
        p.type = ToyPrimitive::Type::kSphere;
        p.center = vec3_from_json(jp.at("center"), where + ".center");
        p.radius = jp.at("radius").get<double>();
      } else if (type == "box") {
        p.type = ToyPrimitive::Type::kBox;
        p.box_min = vec3_from_json(jp.at("min"), where + ".min");
        p.box_max = vec3_from_json(jp.at("max"), where + ".max");
      } else {
        throw std::invalid_argument(cat(where, ": unknown primitive type \"", type, "\""));
      }
      if (jp.contains("albedo")) p.albedo = vec3_from_json(jp["albedo"], where + ".albedo");
      s.primitives.push_back(p);
    }
  } else {
    s.primitives = default_scene().primitives;
  }
  s.validate();
  return s;
}

inline json ToySceneSpec::to_json() const {
  json j;
  j["seed"] = seed;
  j["width"] = width;
  j["height"] = height;
  j["fov_x_deg"] = fov_x_deg;
  j["background"] = vec3_to_json(background);
  j["bounds"] = {{"min", vec3_to_json(bounds.lo)}, {"max", vec3_to_json(bounds.hi)}};
  j["light_dir"] = vec3_to_json(light_dir);
  j["ambient"] = ambient;
  j["near"] = near_t;
  j["far"] = far_t;
  j["train_ring"] = {{"count", train_ring.count},
                     {"radius", train_ring.radius},
                     {"elevation_deg", train_ring.elevation_deg},
                     {"phase_deg", train_ring.phase_deg}};
  j["test_ring"] = {{"count", test_ring.count},
                    {"radius", test_ring.radius},
                    {"elevation_deg", test_ring.elevation_deg},
                    {"phase_deg", test_ring.phase_deg}};
  j["primitives"] = json::array();
  for (const ToyPrimitive& p : primitives) {
    json jp;
    if (p.type == ToyPrimitive::Type::kSphere) {
      jp["type"] = "sphere";
      jp["center"] = vec3_to_json(p.center);
      jp["radius"] = p.radius;
    } else {
      jp["type"] = "box";
      jp["min"] = vec3_to_json(p.box_min);
      jp["max"] = vec3_to_json(p.box_max);
    }
    jp["albedo"] = vec3_to_json(p.albedo);
    j["primitives"].push_back(jp);
  }
  return j;
}

}  // namespace pnrf
