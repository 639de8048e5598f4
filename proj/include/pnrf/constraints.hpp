#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "pnrf/camera.hpp"
#include "pnrf/field.hpp"
#include "pnrf/geometry.hpp"
#include "pnrf/render.hpp"
#include "pnrf/rng.hpp"
#include "pnrf/tape.hpp"
#include "pnrf/util.hpp"

namespace pnrf {

// Fixed per-constraint weights (lambda_i). The defaults here are starting
// points meant to be tuned per scene in config files.
struct ConstraintWeights {
  double lambda_depth = 0.1;
  double lambda_cv = 0.05;
  double lambda_sparse = 0.01;
  double lambda_reg = 0.01;

  void validate() const {
    for (double l : {lambda_depth, lambda_cv, lambda_sparse, lambda_reg})
      check_arg(std::isfinite(l) && l >= 0, "constraint weights must be finite and >= 0");
  }
};

// Piecewise-constant curriculum multiplier alpha(t).
struct Schedule {
  std::vector<int64_t> thresholds{5000, 15000};
  std::vector<double> values{0.008, 0.025, 0.08};

  void validate() const {
    check_arg(values.size() == thresholds.size() + 1,
              "schedule: need exactly one more value than thresholds");
    for (size_t i = 1; i < thresholds.size(); ++i)
      check_arg(thresholds[i] > thresholds[i - 1], "schedule: thresholds must increase");
    for (double v : values) check_arg(std::isfinite(v) && v >= 0, "schedule: values must be >= 0");
  }

  double alpha(int64_t t) const {
    size_t k = 0;
    while (k < thresholds.size() && t >= thresholds[k]) ++k;
    return values[k];
  }
};

// Occurrences of degenerate batches; warnings, not errors.
struct ConstraintCounters {
  int64_t empty_pair_sets = 0;
  int64_t empty_correspondences = 0;
  int64_t patchless_batches = 0;
};

// ---- depth ranking (ordinal supervision from monocular priors) ----

// Pairs expose only the prior's ordering sign; the raw prior values never
// leave construction, which is what makes the loss invariant under monotone
// rescaling of the prior. Ties and self-pairs are rejected while sampling.
struct PairSet {
  struct Pair {
    int i = 0, j = 0;
    double sign = 1;  // sgn(D_M(i) - D_M(j))
  };
  std::vector<Pair> pairs;
  double margin = 1e-3;
};

inline PairSet build_pair_set(Pcg32& rng, const std::vector<double>& prior_depth,
                              const std::vector<bool>& valid, int count, double margin,
                              double tie_eps = 1e-6) {
  PairSet ps;
  ps.margin = margin;
  std::vector<int> idx;
  for (size_t k = 0; k < valid.size(); ++k)
    if (valid[k]) idx.push_back(static_cast<int>(k));
  if (idx.size() < 2) return ps;
  for (int draw = 0; draw < count; ++draw) {
    const int i = idx[rng.uniform_int(static_cast<int>(idx.size()))];
    const int j = idx[rng.uniform_int(static_cast<int>(idx.size()))];
    if (i == j) continue;
    const double d = prior_depth[i] - prior_depth[j];
    if (std::abs(d) < tie_eps) continue;  // no ordinal signal
    ps.pairs.push_back({i, j, d > 0 ? 1.0 : -1.0});
  }
  return ps;
}

// Hinge ranking loss: mean over pairs of max(0, margin - sign * (D_P(i) - D_P(j))).
template <class S>
typename Tape<S>::Var depth_ranking_loss(Tape<S>& tape, typename Tape<S>::Var depth,
                                         const PairSet& ps,
                                         ConstraintCounters* counters = nullptr) {
  if (ps.pairs.empty()) {
    if (counters) ++counters->empty_pair_sets;
    return tape.scalar(S(0));
  }
  std::vector<int> is, js;
  std::vector<S> signs;
  for (const auto& p : ps.pairs) {
    is.push_back(p.i);
    js.push_back(p.j);
    signs.push_back(static_cast<S>(p.sign));
  }
  const int n = static_cast<int>(ps.pairs.size());
  auto di = tape.gather_rows(depth, is);
  auto dj = tape.gather_rows(depth, js);
  auto s = tape.constant(std::move(signs), {n, 1});
  auto hinge = tape.relu(tape.rsub_scalar(static_cast<S>(ps.margin), tape.mul(s, tape.sub(di, dj))));
  return tape.mean(hinge);
}

// ---- rgb reconstruction ----

template <class S>
typename Tape<S>::Var rgb_loss(Tape<S>& tape, typename Tape<S>::Var pred,
                               typename Tape<S>::Var target) {
  check_arg(tape.shape(pred) == tape.shape(target),
            cat("rgb_loss: batch shapes differ ", shape_str(tape.shape(pred)), " vs ",
                shape_str(tape.shape(target))));
  return tape.mean(tape.square(tape.sub(pred, target)));
}

// ---- sparsity prior over the scene domain ----

inline std::vector<Vec3> sample_uniform_points(const Aabb& bounds, int n, Pcg32& rng) {
  check_arg(bounds.volume() > 0, "sparsity: degenerate scene bounds (zero volume)");
  check_arg(n >= 1, "sparsity: need at least one sample point");
  std::vector<Vec3> pts;
  pts.reserve(n);
  for (int i = 0; i < n; ++i)
    pts.push_back(Vec3{rng.uniform(bounds.lo.x, bounds.hi.x), rng.uniform(bounds.lo.y, bounds.hi.y),
                       rng.uniform(bounds.lo.z, bounds.hi.z)});
  return pts;
}

// Expectation of softplus of the raw density over uniform points in the
// scene bounds. The field's activated sigma is exactly softplus(raw), so the
// mean of sigma at the sampled points realizes the estimator.
template <class S>
typename Tape<S>::Var sparsity_loss(Tape<S>& tape, RadianceField<S>& field,
                                    const typename RadianceField<S>::Staged& staged,
                                    const Aabb& bounds, int n_points, Pcg32& rng) {
  const std::vector<Vec3> pts = sample_uniform_points(bounds, n_points, rng);
  auto enc = field.encode_positions(tape, pts);
  auto out = field.forward(tape, staged, enc.enc1, enc.enc2, {}, false);
  return tape.mean(out.sigma);
}

// ---- patch smoothness (discrete ray-gradient regularizer) ----

// Adjacent-pixel index pairs inside each s x s patch of a patch-major batch.
inline std::vector<std::pair<int, int>> patch_adjacency(int n_patches, int patch_size) {
  std::vector<std::pair<int, int>> pairs;
  const int s = patch_size;
  for (int p = 0; p < n_patches; ++p) {
    const int base = p * s * s;
    for (int r = 0; r < s; ++r)
      for (int c = 0; c < s; ++c) {
        if (c + 1 < s) pairs.emplace_back(base + r * s + c, base + r * s + c + 1);
        if (r + 1 < s) pairs.emplace_back(base + r * s + c, base + (r + 1) * s + c);
      }
  }
  return pairs;
}

// Mean over adjacent ray pairs of (depth difference)^2 + |color difference|^2.
template <class S>
typename Tape<S>::Var smoothness_loss(Tape<S>& tape, typename Tape<S>::Var depth,
                                      typename Tape<S>::Var color, int n_patches, int patch_size,
                                      ConstraintCounters* counters = nullptr) {
  const auto pairs = patch_adjacency(n_patches, patch_size);
  if (pairs.empty()) {
    if (counters) ++counters->patchless_batches;
    return tape.scalar(S(0));
  }
  std::vector<int> a, b;
  for (const auto& [i, j] : pairs) {
    a.push_back(i);
    b.push_back(j);
  }
  auto dd = tape.square(tape.sub(tape.gather_rows(depth, a), tape.gather_rows(depth, b)));
  auto dc = tape.row_sum(tape.square(tape.sub(tape.gather_rows(color, a), tape.gather_rows(color, b))));
  return tape.mean(tape.add(dd, dc));
}

// ---- cross-view consistency ----

// A candidate pair of rays meeting at a surface point: the view-A pixel was
// lifted through its rendered depth and reprojected into view B.
struct Correspondence {
  int a_index = 0;   // row in the view-A batch
  Vec3 point;        // surface estimate from view A
  Ray ray_b;         // view-B ray through the projected pixel
  double t_b = 0;    // depth the lifted point should have along ray_b
};

inline std::vector<Correspondence> project_correspondences(
    const std::vector<Ray>& rays_a, const std::vector<double>& depth_a,
    const std::vector<bool>& valid_a, const Camera& cam_b, int max_pairs, Pcg32& rng) {
  std::vector<int> idx;
  for (size_t k = 0; k < rays_a.size(); ++k)
    if (valid_a[k]) idx.push_back(static_cast<int>(k));
  // random subset, deterministic under the step rng
  std::vector<Correspondence> out;
  int attempts = std::min<int>(static_cast<int>(idx.size()), max_pairs * 4);
  for (int n = 0; n < attempts && static_cast<int>(out.size()) < max_pairs; ++n) {
    const int k = idx[rng.uniform_int(static_cast<int>(idx.size()))];
    const Vec3 x = rays_a[k].origin + rays_a[k].direction * depth_a[k];
    const Projection proj = project(cam_b, x);
    if (!proj.in_front || !proj.in_bounds) continue;
    Correspondence c;
    c.a_index = k;
    c.point = x;
    c.ray_b = generate_ray(cam_b, std::floor(proj.px), std::floor(proj.py));
    c.t_b = proj.t;
    out.push_back(c);
  }
  return out;
}

// Keeps candidates whose view-B depth agrees with the reprojected depth
// within a relative tolerance; disagreement means the point is occluded (or
// geometry is still wrong enough that B sees something else).
inline std::vector<int> occlusion_filter(const std::vector<Correspondence>& cands,
                                         const std::vector<double>& depth_b, double rel_tol) {
  std::vector<int> keep;
  for (size_t k = 0; k < cands.size(); ++k)
    if (std::abs(depth_b[k] - cands[k].t_b) <= rel_tol * std::abs(cands[k].t_b))
      keep.push_back(static_cast<int>(k));
  return keep;
}

// Spec-level convenience used by tests and tooling: candidates + occlusion
// check against any depth source for view B (rendered or analytic).
template <class DepthFn>
std::vector<Correspondence> find_correspondences(const std::vector<Ray>& rays_a,
                                                 const std::vector<double>& depth_a,
                                                 const std::vector<bool>& valid_a,
                                                 const Camera& cam_b, DepthFn depth_b_of_ray,
                                                 double rel_tol, int max_pairs, Pcg32& rng) {
  std::vector<Correspondence> cands =
      project_correspondences(rays_a, depth_a, valid_a, cam_b, max_pairs, rng);
  std::vector<double> depth_b;
  depth_b.reserve(cands.size());
  for (const Correspondence& c : cands) depth_b.push_back(depth_b_of_ray(c.ray_b));
  std::vector<Correspondence> kept;
  for (int k : occlusion_filter(cands, depth_b, rel_tol)) kept.push_back(cands[k]);
  return kept;
}

// mean_k [ w_color |c_a - c_b|^2 + w_density (sigma_a - sigma_b)^2 ].
// Both readings of ray-level field agreement are kept and individually
// weighted: rendered color along the two rays, and density at the two
// surface-point estimates.
template <class S>
typename Tape<S>::Var cross_view_loss(Tape<S>& tape, typename Tape<S>::Var colors_a,
                                      typename Tape<S>::Var colors_b,
                                      typename Tape<S>::Var sigma_a,
                                      typename Tape<S>::Var sigma_b, double color_weight = 1.0,
                                      double density_weight = 1.0,
                                      ConstraintCounters* counters = nullptr) {
  if (!colors_a.valid() || numel(tape.shape(colors_a)) == 0) {
    if (counters) ++counters->empty_correspondences;
    return tape.scalar(S(0));
  }
  auto color_term = tape.row_sum(tape.square(tape.sub(colors_a, colors_b)));
  auto density_term = tape.square(tape.sub(sigma_a, sigma_b));
  return tape.mean(tape.add(tape.mul_scalar(color_term, static_cast<S>(color_weight)),
                            tape.mul_scalar(density_term, static_cast<S>(density_weight))));
}

// ---- total loss (curriculum assembly) ----

struct LossBreakdown {
  double alpha = 0;
  double rgb = 0;
  double depth = 0, cv = 0, sparse = 0, reg = 0;                  // raw L_i
  double w_depth = 0, w_cv = 0, w_sparse = 0, w_reg = 0;          // lambda_i * L_i
  double total = 0;
};

// L_total = L_rgb + alpha(t) * sum_i lambda_i L_i. Invalid term handles mean
// the term was not computed this step and contribute zero.
template <class S>
std::pair<typename Tape<S>::Var, LossBreakdown> total_loss(
    Tape<S>& tape, int64_t t, typename Tape<S>::Var rgb, typename Tape<S>::Var depth_term,
    typename Tape<S>::Var cv_term, typename Tape<S>::Var sparse_term,
    typename Tape<S>::Var reg_term, const ConstraintWeights& w, const Schedule& schedule) {
  check_arg(t >= 0, "total_loss: negative step");
  LossBreakdown b;
  b.alpha = schedule.alpha(t);
  b.rgb = static_cast<double>(tape.value(rgb));
  typename Tape<S>::Var total = rgb;
  typename Tape<S>::Var aux;
  auto accumulate = [&](typename Tape<S>::Var term, double lambda, double& raw, double& weighted) {
    if (!term.valid() || lambda == 0) return;
    raw = static_cast<double>(tape.value(term));
    weighted = lambda * raw;
    auto scaled = tape.mul_scalar(term, static_cast<S>(lambda));
    aux = aux.valid() ? tape.add(aux, scaled) : scaled;
  };
  accumulate(depth_term, w.lambda_depth, b.depth, b.w_depth);
  accumulate(cv_term, w.lambda_cv, b.cv, b.w_cv);
  accumulate(sparse_term, w.lambda_sparse, b.sparse, b.w_sparse);
  accumulate(reg_term, w.lambda_reg, b.reg, b.w_reg);
  if (aux.valid()) total = tape.add(total, tape.mul_scalar(aux, static_cast<S>(b.alpha)));
  b.total = static_cast<double>(tape.value(total));
  return {total, b};
}

}  // namespace pnrf
