#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "oracles.hpp"
#include "pnrf/field.hpp"

using pnrf::EncodingConfig;
using pnrf::FieldConfig;
using pnrf::Pcg32;
using pnrf::RadianceField;
using pnrf::Tape;
using pnrf::Vec3;

namespace {

EncodingConfig enc(int l) {
  EncodingConfig e;
  e.num_frequencies = l;
  return e;
}

FieldConfig tiny_config() {
  FieldConfig cfg;
  cfg.hidden_width = 16;
  cfg.depth = 7;  // keep the full depth, shrink the width
  cfg.skip_layer = 4;
  cfg.color_head_width = 8;
  cfg.fusion_width = 16;
  return cfg;
}

Vec3 random_unit(Pcg32& rng) {
  while (true) {
    Vec3 v{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const double n = pnrf::norm(v);
    if (n > 0.1) return v / n;
  }
}

}  // namespace

TEST_CASE("default architecture parameter budget", "[field]") {
  RadianceField<float> field(FieldConfig{}, enc(10), enc(4), 1);
  const int64_t n = field.parameter_count();
  CHECK(n >= 600000);
  CHECK(n <= 750000);
  // branches: 2 * (63*192 + 2*192^2 + 255*192 + 3*192^2 + 7*192)
  // fusion 384*384+384, density 384+1, color (411*96+96) + (96*3+3)
  CHECK(n == 681508);
}

TEST_CASE("fresh network output ranges", "[field]") {
  RadianceField<float> field(tiny_config(), enc(4), enc(2), 7);
  Pcg32 rng(3);
  for (int i = 0; i < 50; ++i) {
    Vec3 p{rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
    auto s = field.eval(p, random_unit(rng));
    CHECK(std::isfinite(s.sigma));
    CHECK(s.sigma >= 0.f);
    for (float c : s.rgb) {
      CHECK(c >= 0.f);
      CHECK(c <= 1.f);
    }
  }
}

TEST_CASE("density is independent of view direction", "[field]") {
  RadianceField<float> field(tiny_config(), enc(4), enc(2), 11);
  Pcg32 rng(5);
  const Vec3 p{0.2, -0.4, 0.9};
  const float ref = field.eval(p, Vec3{0, 0, -1}).sigma;
  for (int i = 0; i < 100; ++i) {
    auto s = field.eval(p, random_unit(rng));
    CHECK(s.sigma == ref);  // bit-identical
  }
}

TEST_CASE("view direction must be unit length", "[field]") {
  RadianceField<float> field(tiny_config(), enc(4), enc(2), 11);
  CHECK_THROWS_WITH(field.eval(Vec3{0, 0, 0}, Vec3{0, 0, -2}),
                    Catch::Matchers::ContainsSubstring("unit length"));
}

TEST_CASE("non-finite parameters are reported with their layer", "[field]") {
  RadianceField<float> field(tiny_config(), enc(4), enc(2), 11);
  auto named = field.named_params();
  for (auto& [name, p] : named) {
    if (name == "branch1.layer3.weight") p->values[5] = NAN;
  }
  Tape<float> tape;
  CHECK_THROWS_WITH(field.stage(tape),
                    Catch::Matchers::ContainsSubstring("branch1.layer3.weight"));
}

TEST_CASE("checkpoint round trip is bit exact", "[field]") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "pnrf_field_ckpt_test.bin";
  RadianceField<float> a(tiny_config(), enc(4), enc(2), 21);
  pnrf::save_checkpoint(path.string(), a.checkpoint_entries());
  RadianceField<float> b(tiny_config(), enc(4), enc(2), 22);  // different init
  b.load_entries(pnrf::load_checkpoint(path.string()));
  auto pa = a.named_params();
  auto pb = b.named_params();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].first == pb[i].first);
    CHECK(pa[i].second->values == pb[i].second->values);
  }
  fs::remove(path);
}

TEST_CASE("corrupted checkpoint names the magic string", "[field]") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "pnrf_bad_ckpt.bin";
  {
    std::FILE* f = std::fopen(path.string().c_str(), "wb");
    std::fputs("JUNKJUNKJUNK", f);
    std::fclose(f);
  }
  CHECK_THROWS_WITH(pnrf::load_checkpoint(path.string()),
                    Catch::Matchers::ContainsSubstring("magic") &&
                        Catch::Matchers::ContainsSubstring("PNRF1"));
  fs::remove(path);
}

TEST_CASE("full network gradients match finite differences", "[field][grad]") {
  // h = 1e-4 central differences at 64-bit against the taped backward pass,
  // probing a few random weights of every tensor across 100 seeds.
  FieldConfig cfg = tiny_config();
  const double kTol = 1e-4;
  double worst = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    RadianceField<double> field(cfg, enc(3), enc(2), seed + 100);
    Pcg32 rng(seed);
    std::vector<Vec3> pts;
    std::vector<Vec3> dirs;
    for (int i = 0; i < 3; ++i) {
      pts.push_back(Vec3{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
      dirs.push_back(random_unit(rng));
    }
    auto loss_value = [&]() {
      Tape<double> t;
      auto st = field.stage(t);
      auto e = field.encode_positions(t, pts);
      auto ed = field.encode_directions(t, dirs);
      auto o = field.forward(t, st, e.enc1, e.enc2, ed, true);
      return t.value(t.add(t.mean(t.square(o.rgb)), t.mean(t.square(o.sigma))));
    };
    {
      Tape<double> tape;
      auto st = field.stage(tape);
      auto e = field.encode_positions(tape, pts);
      auto ed = field.encode_directions(tape, dirs);
      auto o = field.forward(tape, st, e.enc1, e.enc2, ed, true);
      tape.backward(tape.add(tape.mean(tape.square(o.rgb)), tape.mean(tape.square(o.sigma))));
    }
    auto named = field.named_params();
    pnrf::ParamTensor<double>& probe = *named[rng.uniform_int(static_cast<int>(named.size()))].second;
    const int n_probe = std::min<int>(4, static_cast<int>(probe.values.size()));
    for (int k = 0; k < n_probe; ++k) {
      const int idx = rng.uniform_int(static_cast<int>(probe.values.size()));
      const double saved = probe.values[idx];
      probe.values[idx] = saved + 1e-4;
      const double up = loss_value();
      probe.values[idx] = saved - 1e-4;
      const double down = loss_value();
      probe.values[idx] = saved;
      const double fd = (up - down) / 2e-4;
      worst = std::max(worst, pnrf::testing::rel_err(probe.grad[idx], fd));
    }
  }
  CHECK(worst < kTol);
}
