#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "oracles.hpp"
#include "pnrf/constraints.hpp"
#include "pnrf/toy_scene.hpp"

using pnrf::Camera;
using pnrf::ConstraintCounters;
using pnrf::ConstraintWeights;
using pnrf::EncodingConfig;
using pnrf::FieldConfig;
using pnrf::PairSet;
using pnrf::Pcg32;
using pnrf::RadianceField;
using pnrf::Ray;
using pnrf::Schedule;
using pnrf::Tape;
using pnrf::ToySceneSpec;
using pnrf::Vec3;

namespace {

FieldConfig tiny_cfg() {
  FieldConfig cfg;
  cfg.hidden_width = 8;
  cfg.depth = 2;
  cfg.skip_layer = 1;
  cfg.color_head_width = 6;
  cfg.fusion_width = 8;
  return cfg;
}

EncodingConfig enc(int l) {
  EncodingConfig e;
  e.num_frequencies = l;
  return e;
}

}  // namespace

TEST_CASE("schedule matches the published curriculum exactly", "[constraints]") {
  Schedule s;
  s.validate();
  CHECK(s.alpha(0) == 0.008);
  CHECK(s.alpha(4999) == 0.008);
  CHECK(s.alpha(5000) == 0.025);
  CHECK(s.alpha(14999) == 0.025);
  CHECK(s.alpha(15000) == 0.08);
  CHECK(s.alpha(150000) == 0.08);
}

TEST_CASE("rgb loss is channel mean squared error", "[constraints]") {
  Tape<double> t;
  auto a = t.constant({0.1, 0.2, 0.3, 0.4, 0.5, 0.6}, {2, 3});
  CHECK(t.value(pnrf::rgb_loss(t, a, a)) == 0.0);

  auto black = t.constant(std::vector<double>(6, 0.0), {2, 3});
  auto white = t.constant(std::vector<double>(6, 1.0), {2, 3});
  CHECK(t.value(pnrf::rgb_loss(t, black, white)) == 1.0);

  auto p = t.constant({0.5}, {1, 1});
  auto q = t.constant({0.7}, {1, 1});
  CHECK(t.value(pnrf::rgb_loss(t, p, q)) == Catch::Approx(0.04).margin(1e-15));

  auto wrong = t.constant({0.0, 0.0, 0.0}, {1, 3});
  CHECK_THROWS_WITH(pnrf::rgb_loss(t, a, wrong), Catch::Matchers::ContainsSubstring("rgb_loss"));
}

TEST_CASE("depth ranking hinge", "[constraints]") {
  SECTION("satisfied ordering with gap above margin gives zero") {
    Tape<double> t;
    auto depth = t.constant({1.0, 2.0, 3.0}, {3, 1});
    PairSet ps;
    ps.margin = 0.05;
    ps.pairs = {{2, 0, 1.0}, {1, 0, 1.0}, {0, 2, -1.0}};
    CHECK(t.value(pnrf::depth_ranking_loss(t, depth, ps)) == 0.0);
  }
  SECTION("inverted pair pays margin plus violation") {
    Tape<double> t;
    auto depth = t.constant({0.0, 0.5}, {2, 1});  // D_P(i) - D_P(j) = -0.5, sign +1
    PairSet ps;
    ps.margin = 0.05;
    ps.pairs = {{0, 1, 1.0}};
    CHECK(t.value(pnrf::depth_ranking_loss(t, depth, ps)) == Catch::Approx(0.55).margin(1e-15));
  }
  SECTION("empty pair set returns zero and counts a warning") {
    Tape<double> t;
    auto depth = t.constant({1.0}, {1, 1});
    ConstraintCounters counters;
    CHECK(t.value(pnrf::depth_ranking_loss(t, depth, PairSet{}, &counters)) == 0.0);
    CHECK(counters.empty_pair_sets == 1);
  }
  SECTION("matches the brute-force loop exactly on 10^4 random pairs") {
    Pcg32 rng(31);
    const int n = 900;
    std::vector<double> depth_v(n), prior(n);
    std::vector<bool> valid(n, true);
    for (int i = 0; i < n; ++i) {
      depth_v[i] = rng.uniform(0.5, 5.0);
      prior[i] = rng.uniform(0.0, 1.0);
    }
    PairSet ps = build_pair_set(rng, prior, valid, 10000, 1e-3);
    REQUIRE(ps.pairs.size() > 9000);

    Tape<double> t;
    const double got = t.value(pnrf::depth_ranking_loss(t, t.constant(depth_v, {n, 1}), ps));
    double acc = 0;
    for (const auto& p : ps.pairs)
      acc += std::max(0.0, ps.margin - p.sign * (depth_v[p.i] - depth_v[p.j]));
    CHECK(got == acc / static_cast<double>(ps.pairs.size()));
  }
}

TEST_CASE("pair sets expose only ordering signs", "[constraints]") {
  Pcg32 rng1(5), rng2(5);
  std::vector<double> prior{3.0, 1.0, 2.0, 5.0, 4.0, 0.5};
  std::vector<double> scaled;
  for (double p : prior) scaled.push_back(7.3 * p + 11.0);  // monotone transform
  std::vector<bool> valid(prior.size(), true);
  PairSet a = build_pair_set(rng1, prior, valid, 200, 1e-3);
  PairSet b = build_pair_set(rng2, scaled, valid, 200, 1e-3);
  REQUIRE(a.pairs.size() == b.pairs.size());
  for (size_t k = 0; k < a.pairs.size(); ++k) {
    CHECK(a.pairs[k].i == b.pairs[k].i);
    CHECK(a.pairs[k].j == b.pairs[k].j);
    CHECK(a.pairs[k].sign == b.pairs[k].sign);
  }

  // constant prior: every candidate is a tie, so no usable pairs survive
  std::vector<double> flat(prior.size(), 0.77);
  Pcg32 rng3(5);
  PairSet c = build_pair_set(rng3, flat, valid, 200, 1e-3);
  CHECK(c.pairs.empty());
}

TEST_CASE("smoothness penalizes adjacent differences", "[constraints]") {
  SECTION("constant patch costs nothing") {
    Tape<double> t;
    auto depth = t.constant(std::vector<double>(16, 2.5), {16, 1});
    auto color = t.constant(std::vector<double>(48, 0.3), {16, 3});
    CHECK(t.value(pnrf::smoothness_loss(t, depth, color, 1, 4)) == 0.0);
  }
  SECTION("a 0.1 depth step contributes 0.01 per adjacent pair") {
    Tape<double> t;
    std::vector<double> d(4, 1.0);  // one 2x2 patch
    d[1] = 1.1;                     // pixel (0,1)
    auto depth = t.constant(d, {4, 1});
    auto color = t.constant(std::vector<double>(12, 0.5), {4, 3});
    // pairs: (0,1) horizontal, (2,3) horizontal, (0,2) vertical, (1,3) vertical
    // pixel 1 differs from both neighbors -> two pairs at 0.01 each, mean over 4
    const double got = t.value(pnrf::smoothness_loss(t, depth, color, 1, 2));
    CHECK(got == Catch::Approx(2 * 0.01 / 4).margin(1e-15));
  }
  SECTION("matches the brute-force double loop exactly") {
    Pcg32 rng(3);
    const int patches = 5, s = 4, n = patches * s * s;
    std::vector<double> d(n), c(3 * n);
    for (double& v : d) v = rng.uniform(0.5, 3.0);
    for (double& v : c) v = rng.uniform(0, 1);
    Tape<double> t;
    const double got = t.value(
        pnrf::smoothness_loss(t, t.constant(d, {n, 1}), t.constant(c, {n, 3}), patches, s));
    double acc = 0;
    int count = 0;
    for (const auto& [i, j] : pnrf::patch_adjacency(patches, s)) {
      double pair = (d[i] - d[j]) * (d[i] - d[j]);
      for (int ch = 0; ch < 3; ++ch)
        pair += (c[3 * i + ch] - c[3 * j + ch]) * (c[3 * i + ch] - c[3 * j + ch]);
      acc += pair;
      ++count;
    }
    CHECK(got == acc / count);
  }
  SECTION("patchless batch returns zero with a warning") {
    Tape<double> t;
    ConstraintCounters counters;
    auto depth = t.constant({1.0}, {1, 1});
    auto color = t.constant({0.5, 0.5, 0.5}, {1, 3});
    CHECK(t.value(pnrf::smoothness_loss(t, depth, color, 0, 4, &counters)) == 0.0);
    CHECK(counters.patchless_batches == 1);
  }
}

TEST_CASE("cross-view consistency", "[constraints]") {
  SECTION("identical colors and densities cost nothing") {
    Tape<double> t;
    auto c = t.constant({0.2, 0.4, 0.6}, {1, 3});
    auto s = t.constant({1.5}, {1, 1});
    CHECK(t.value(pnrf::cross_view_loss(t, c, c, s, s)) == 0.0);
  }
  SECTION("a (0.1, 0, 0) color difference costs 0.01") {
    Tape<double> t;
    auto ca = t.constant({0.5, 0.4, 0.6}, {1, 3});
    auto cb = t.constant({0.6, 0.4, 0.6}, {1, 3});
    auto s = t.constant({1.5}, {1, 1});
    CHECK(t.value(pnrf::cross_view_loss(t, ca, cb, s, s)) == Catch::Approx(0.01).margin(1e-15));
  }
  SECTION("swapping the two rays leaves the loss unchanged") {
    Pcg32 rng(8);
    std::vector<double> ca(9), cb(9), sa(3), sb(3);
    for (auto* v : {&ca, &cb})
      for (double& x : *v) x = rng.uniform(0, 1);
    for (auto* v : {&sa, &sb})
      for (double& x : *v) x = rng.uniform(0, 3);
    Tape<double> t;
    const double fwd = t.value(pnrf::cross_view_loss(t, t.constant(ca, {3, 3}),
                                                     t.constant(cb, {3, 3}),
                                                     t.constant(sa, {3, 1}),
                                                     t.constant(sb, {3, 1})));
    Tape<double> t2;
    const double rev = t2.value(pnrf::cross_view_loss(t2, t2.constant(cb, {3, 3}),
                                                      t2.constant(ca, {3, 3}),
                                                      t2.constant(sb, {3, 1}),
                                                      t2.constant(sa, {3, 1})));
    CHECK(fwd == rev);
  }
  SECTION("matches the brute-force loop exactly") {
    Pcg32 rng(21);
    const int k = 64;
    std::vector<double> ca(3 * k), cb(3 * k), sa(k), sb(k);
    for (auto* v : {&ca, &cb})
      for (double& x : *v) x = rng.uniform(0, 1);
    for (auto* v : {&sa, &sb})
      for (double& x : *v) x = rng.uniform(0, 4);
    Tape<double> t;
    const double got = t.value(
        pnrf::cross_view_loss(t, t.constant(ca, {k, 3}), t.constant(cb, {k, 3}),
                              t.constant(sa, {k, 1}), t.constant(sb, {k, 1}), 1.0, 1.0));
    double acc = 0;
    for (int i = 0; i < k; ++i) {
      double term = 0;
      for (int c = 0; c < 3; ++c)
        term += (ca[3 * i + c] - cb[3 * i + c]) * (ca[3 * i + c] - cb[3 * i + c]);
      term *= 1.0;
      term += 1.0 * (sa[i] - sb[i]) * (sa[i] - sb[i]);
      acc += term;
    }
    CHECK(got == acc / k);
  }
  SECTION("no valid correspondences returns zero with a warning") {
    Tape<double> t;
    ConstraintCounters counters;
    CHECK(t.value(pnrf::cross_view_loss(t, {}, {}, {}, {}, 1.0, 1.0, &counters)) == 0.0);
    CHECK(counters.empty_correspondences == 1);
  }
}

TEST_CASE("correspondences on the toy sphere", "[constraints]") {
  ToySceneSpec spec;
  pnrf::ToyPrimitive sphere;
  sphere.type = pnrf::ToyPrimitive::Type::kSphere;
  sphere.center = {0, 0, 0};
  sphere.radius = 0.9;
  spec.primitives = {sphere};
  spec.width = spec.height = 49;  // odd: pixel (24,24) sits on the optical axis
  spec.train_ring = {8, 3.0, 0.0, 0.0};
  const Camera cam_a = pnrf::toy_camera(spec, spec.train_ring, 0);   // azimuth 0
  const Camera cam_b = pnrf::toy_camera(spec, spec.train_ring, 1);   // azimuth 45
  const Camera cam_far = pnrf::toy_camera(spec, spec.train_ring, 4); // azimuth 180, opposite side

  auto analytic_depth = [&](const Ray& r) {
    if (auto hit = pnrf::trace_toy_ray(spec, r)) return hit->t;
    return r.t_far;
  };

  // the center pixel hits the sphere point nearest to camera A
  const Ray center = pnrf::generate_ray(cam_a, 24, 24);
  const auto hit = pnrf::trace_toy_ray(spec, center);
  REQUIRE(hit.has_value());
  std::vector<Ray> rays_a{center};
  std::vector<double> depth_a{hit->t};
  std::vector<bool> valid{true};

  SECTION("visible from a nearby view: kept") {
    Pcg32 rng(2);
    auto kept = pnrf::find_correspondences(rays_a, depth_a, valid, cam_b, analytic_depth, 0.05,
                                           8, rng);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].a_index == 0);
    // the lifted point is the sphere surface point on the +x axis
    CHECK(kept[0].point.x == Catch::Approx(0.9).margin(1e-9));
  }
  SECTION("behind the sphere from the opposite view: rejected by occlusion") {
    Pcg32 rng(2);
    auto kept = pnrf::find_correspondences(rays_a, depth_a, valid, cam_far, analytic_depth, 0.05,
                                           8, rng);
    CHECK(kept.empty());
  }
  SECTION("projecting outside the image: rejected by the bounds test") {
    // corner ray missing the sphere, lifted at the far plane lands outside a
    // narrow-fov view B
    ToySceneSpec narrow = spec;
    narrow.fov_x_deg = 10.0;
    const Camera cam_n = pnrf::toy_camera(narrow, narrow.train_ring, 1);
    const Ray corner = pnrf::generate_ray(cam_a, 0, 0);
    REQUIRE_FALSE(pnrf::trace_toy_ray(spec, corner).has_value());
    Pcg32 rng(2);
    auto cands = pnrf::project_correspondences({corner}, {corner.t_far}, {true}, cam_n, 8, rng);
    CHECK(cands.empty());
  }
}

TEST_CASE("sparsity prior", "[constraints]") {
  const pnrf::Aabb bounds{{-1, -1, -1}, {1, 1, 1}};
  SECTION("all-zero parameters give softplus(0) = ln 2") {
    RadianceField<double> field(tiny_cfg(), enc(2), enc(1), 3);
    for (auto& [name, p] : field.named_params())
      for (double& v : p->values) v = 0.0;
    Pcg32 rng(4);
    Tape<double> t;
    auto staged = field.stage(t);
    const double loss = t.value(pnrf::sparsity_loss(t, field, staged, bounds, 256, rng));
    CHECK(loss == Catch::Approx(std::log(2.0)).margin(1e-12));
  }
  SECTION("strongly negative raw density drives the loss to zero") {
    RadianceField<double> field(tiny_cfg(), enc(2), enc(1), 3);
    for (auto& [name, p] : field.named_params()) {
      for (double& v : p->values) v = 0.0;
      if (name == "density.bias") p->values[0] = -45.0;
    }
    Pcg32 rng(4);
    Tape<double> t;
    auto staged = field.stage(t);
    CHECK(t.value(pnrf::sparsity_loss(t, field, staged, bounds, 128, rng)) < 1e-18);
  }
  SECTION("degenerate bounds are an error") {
    RadianceField<double> field(tiny_cfg(), enc(2), enc(1), 3);
    Pcg32 rng(4);
    Tape<double> t;
    auto staged = field.stage(t);
    const pnrf::Aabb flat{{0, 0, 0}, {1, 1, 0}};
    CHECK_THROWS_WITH(pnrf::sparsity_loss(t, field, staged, flat, 16, rng),
                      Catch::Matchers::ContainsSubstring("zero volume"));
  }
  SECTION("monte carlo estimates at 10^4 and 10^6 points agree within 3 SE") {
    RadianceField<double> field(tiny_cfg(), enc(2), enc(1), 123);
    Pcg32 rng(9);
    auto stats = [&](int total, int chunk) {
      double sum = 0, sumsq = 0;
      int done = 0;
      while (done < total) {
        const int n = std::min(chunk, total - done);
        Tape<double> t;
        auto staged = field.stage(t);
        auto enc_pts = field.encode_positions(t, pnrf::sample_uniform_points(bounds, n, rng));
        auto out = field.forward(t, staged, enc_pts.enc1, enc_pts.enc2, {}, false);
        for (double v : t.values(out.sigma)) {
          sum += v;
          sumsq += v * v;
        }
        done += n;
      }
      const double mean = sum / total;
      const double var = sumsq / total - mean * mean;
      return std::pair(mean, var);
    };
    auto [m_small, v_small] = stats(10000, 10000);
    auto [m_big, v_big] = stats(1000000, 50000);
    const double se = std::sqrt(v_small / 10000 + v_big / 1000000);
    CHECK(std::abs(m_small - m_big) <= 3 * se);
  }
}

TEST_CASE("total loss assembly", "[constraints]") {
  ConstraintWeights w;
  Schedule sched;
  SECTION("all auxiliary terms zero leaves exactly the rgb loss") {
    Tape<double> t;
    auto rgb = t.constant({0.37}, {1});
    auto zero = t.scalar(0.0);
    auto [total, b] = pnrf::total_loss(t, 100, rgb, zero, zero, zero, zero, w, sched);
    CHECK(t.value(total) == 0.37);
    CHECK(b.total == 0.37);
    CHECK(b.alpha == 0.008);
  }
  SECTION("worked example: 0.1 + 0.08 * 0.1 * 1.0") {
    ConstraintWeights w1;
    w1.lambda_depth = 0.1;
    w1.lambda_cv = w1.lambda_sparse = w1.lambda_reg = 0.0;
    Tape<double> t;
    auto [total, b] = pnrf::total_loss(t, 20000, t.scalar(0.1), t.scalar(1.0), {}, {}, {}, w1,
                                       sched);
    CHECK(t.value(total) == Catch::Approx(0.108).margin(1e-15));
    CHECK(b.w_depth == Catch::Approx(0.1).margin(1e-15));
    CHECK(b.alpha == 0.08);
  }
  SECTION("piecewise constant in t between breakpoints") {
    Tape<double> t;
    auto rgb = t.scalar(0.2);
    auto aux = t.scalar(0.5);
    double prev = -1;
    for (int64_t step : {5000, 7000, 14999}) {
      Tape<double> tt;
      auto [total, b] =
          pnrf::total_loss(tt, step, tt.scalar(0.2), tt.scalar(0.5), {}, {}, {}, w, sched);
      if (prev >= 0) CHECK(tt.value(total) == prev);
      prev = tt.value(total);
    }
    (void)rgb;
    (void)aux;
  }
  SECTION("lambda toggles express the ablation rows") {
    ConstraintWeights rgb_only;
    rgb_only.lambda_depth = rgb_only.lambda_cv = rgb_only.lambda_sparse = rgb_only.lambda_reg = 0;
    Tape<double> t;
    auto [total, b] = pnrf::total_loss(t, 20000, t.scalar(0.3), t.scalar(9.0), t.scalar(9.0),
                                       t.scalar(9.0), t.scalar(9.0), rgb_only, sched);
    CHECK(t.value(total) == 0.3);
    CHECK(b.w_depth == 0.0);
    CHECK(b.w_cv == 0.0);
    CHECK(b.w_sparse == 0.0);
    CHECK(b.w_reg == 0.0);
  }
}
