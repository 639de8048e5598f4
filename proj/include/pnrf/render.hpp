#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "pnrf/camera.hpp"
#include "pnrf/field.hpp"
#include "pnrf/image.hpp"
#include "pnrf/rng.hpp"
#include "pnrf/tape.hpp"
#include "pnrf/util.hpp"

namespace pnrf {

struct RenderConfig {
  int n_samples = 64;
  bool stratified = true;    // training default; evaluation renders use bin centers
  Vec3 background{1, 1, 1};  // NeRF-synthetic white
  int chunk_rays = 512;      // render_image tape size cap
  double acc_eps = 1e-4;     // below this a ray counts as empty
  double depth_eps = 1e-8;   // floor for the expected-depth division
};

// Quadrature points for a batch of rays: per-ray strictly increasing t values
// inside equal-width bins that partition [t_near, t_far].
struct SampleBatch {
  int n_rays = 0;
  int n_samples = 0;
  std::vector<double> ts;      // [R*S] sample positions along each ray
  std::vector<double> deltas;  // [R*S] interval widths; sums to t_far - t_near per ray
  std::vector<Vec3> points;    // [R*S] world-space sample positions
  std::vector<Vec3> dirs;      // [R*S] ray direction repeated per sample
};

inline SampleBatch sample_rays(const std::vector<Ray>& rays, int n_samples, bool stratified,
                               Pcg32& rng) {
  check_arg(n_samples >= 2, cat("sample_rays: need at least 2 samples, got ", n_samples));
  SampleBatch sb;
  sb.n_rays = static_cast<int>(rays.size());
  sb.n_samples = n_samples;
  sb.ts.reserve(rays.size() * n_samples);
  sb.deltas.reserve(rays.size() * n_samples);
  sb.points.reserve(rays.size() * n_samples);
  sb.dirs.reserve(rays.size() * n_samples);
  for (const Ray& r : rays) {
    const double w = (r.t_far - r.t_near) / n_samples;
    for (int k = 0; k < n_samples; ++k) {
      const double u = stratified ? rng.uniform() : 0.5;
      const double t = r.t_near + (k + u) * w;
      sb.ts.push_back(t);
      sb.deltas.push_back(w);
      sb.points.push_back(r.origin + r.direction * t);
      sb.dirs.push_back(r.direction);
    }
  }
  return sb;
}

// Differentiable emission-absorption compositing, all on the tape:
//   alpha_i = 1 - exp(-sigma_i * delta_i)
//   T_i     = exp(-sum_{j<i} sigma_j * delta_j)
//   w_i     = T_i * alpha_i
//   color   = sum_i w_i rgb_i + (1 - sum_i w_i) * background
//   depth   = sum_i w_i t_i / max(sum_i w_i, depth_eps)
template <class S>
struct RenderedRays {
  typename Tape<S>::Var color;    // [R,3]
  typename Tape<S>::Var depth;    // [R,1]
  typename Tape<S>::Var acc;      // [R,1]
  typename Tape<S>::Var weights;  // [R,S]
};

template <class S>
RenderedRays<S> volume_render(Tape<S>& tape, typename Tape<S>::Var sigma,
                              typename Tape<S>::Var rgb, const SampleBatch& sb,
                              const Vec3& background, double depth_eps = 1e-8) {
  using Var = typename Tape<S>::Var;
  const int r = sb.n_rays, s = sb.n_samples;
  check_arg(numel(tape.shape(sigma)) == static_cast<int64_t>(r) * s,
            cat("volume_render: sigma shape ", shape_str(tape.shape(sigma)), " for ", r, "x", s,
                " samples"));
  check_arg(all_finite(tape.values(sigma)) && all_finite(tape.values(rgb)),
            "volume_render: non-finite field inputs");
  for (double d : sb.deltas) check_arg(d > 0, "volume_render: intervals must be positive");

  std::vector<S> delta_v(sb.deltas.begin(), sb.deltas.end());
  std::vector<S> ts_v(sb.ts.begin(), sb.ts.end());
  Var delta = tape.constant(std::move(delta_v), {r, s});
  Var ts = tape.constant(std::move(ts_v), {r, s});

  Var sdel = tape.mul(tape.reshape(sigma, {r, s}), delta);
  Var alpha = tape.rsub_scalar(S(1), tape.exp(tape.mul_scalar(sdel, S(-1))));
  Var trans = tape.exp(tape.mul_scalar(tape.exclusive_cumsum_rows(sdel), S(-1)));
  Var weights = tape.mul(trans, alpha);
  Var acc = tape.row_sum(weights);
  Var depth = tape.div(tape.row_sum(tape.mul(weights, ts)),
                       tape.maximum_scalar(acc, static_cast<S>(depth_eps)));

  Var empty = tape.rsub_scalar(S(1), acc);  // background visibility
  std::vector<Var> channels;
  for (int c = 0; c < 3; ++c) {
    Var rgb_c = tape.reshape(tape.slice_cols(rgb, c, c + 1), {r, s});
    Var col = tape.row_sum(tape.mul(weights, rgb_c));
    channels.push_back(tape.add(col, tape.mul_scalar(empty, static_cast<S>(background[c]))));
  }
  RenderedRays<S> out;
  out.color = tape.concat_cols(channels);
  out.depth = depth;
  out.acc = acc;
  out.weights = weights;
  return out;
}

// Values read off the tape after a render, with the empty-ray depth rule
// applied (acc below acc_eps reports t_far and is excluded from ranking).
template <class S>
struct RenderReadout {
  std::vector<S> color;  // [R*3]
  std::vector<S> depth;  // [R] reported depth
  std::vector<S> acc;    // [R]
};

template <class S>
RenderReadout<S> read_rendered(const Tape<S>& tape, const RenderedRays<S>& rr,
                               const std::vector<Ray>& rays, double acc_eps) {
  RenderReadout<S> out;
  out.color = tape.values(rr.color);
  out.acc = tape.values(rr.acc);
  const std::vector<S>& d = tape.values(rr.depth);
  out.depth.resize(d.size());
  for (size_t i = 0; i < d.size(); ++i)
    out.depth[i] = out.acc[i] < static_cast<S>(acc_eps) ? static_cast<S>(rays[i].t_far) : d[i];
  return out;
}

// Full-frame render: color image plus depth raster. Deterministic given the
// seed; chunked so tape memory stays bounded.
template <class S>
std::pair<Image, Image> render_image(RadianceField<S>& field, const Camera& cam,
                                     const RenderConfig& cfg, uint64_t seed) {
  cam.validate();
  Image color(cam.width, cam.height, 3);
  Image depth(cam.width, cam.height, 1);
  Pcg32 rng(seed, 0x5bf03635e1cbb1edULL);
  std::vector<Ray> rays;
  std::vector<std::pair<int, int>> pixels;
  auto flush = [&]() {
    if (rays.empty()) return;
    Tape<S> tape;
    auto staged = field.stage(tape);
    SampleBatch sb = sample_rays(rays, cfg.n_samples, cfg.stratified, rng);
    auto enc = field.encode_positions(tape, sb.points);
    auto encd = field.encode_directions(tape, sb.dirs);
    auto fo = field.forward(tape, staged, enc.enc1, enc.enc2, encd, true);
    RenderedRays<S> rr = volume_render(tape, fo.sigma, fo.rgb, sb, cfg.background, cfg.depth_eps);
    RenderReadout<S> ro = read_rendered(tape, rr, rays, cfg.acc_eps);
    for (size_t i = 0; i < rays.size(); ++i) {
      const auto [x, y] = pixels[i];
      for (int c = 0; c < 3; ++c) color.at(x, y, c) = static_cast<float>(ro.color[i * 3 + c]);
      depth.at(x, y) = static_cast<float>(ro.depth[i]);
    }
    rays.clear();
    pixels.clear();
  };
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      rays.push_back(generate_ray(cam, x, y));
      pixels.emplace_back(x, y);
      if (static_cast<int>(rays.size()) >= cfg.chunk_rays) flush();
    }
  flush();
  return {std::move(color), std::move(depth)};
}

}  // namespace pnrf
