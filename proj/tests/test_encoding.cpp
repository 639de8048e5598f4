#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <numbers>

#include "pnrf/encoding.hpp"

using pnrf::EncodingConfig;
using pnrf::Vec3;

TEST_CASE("encoded dimension arithmetic", "[encoding]") {
  EncodingConfig cfg;  // L = 10, include_input
  CHECK(cfg.encoded_dim() == 63);
  cfg.include_input = false;
  CHECK(cfg.encoded_dim() == 60);
  cfg.num_frequencies = 4;
  cfg.include_input = true;
  CHECK(cfg.encoded_dim() == 27);
  CHECK(EncodingConfig::scales[0] == 1.0);
  CHECK(EncodingConfig::scales[1] == 2.0);
}

TEST_CASE("origin encodes to zeros and ones", "[encoding]") {
  EncodingConfig cfg;
  auto e = pnrf::encode_point<double>(Vec3{0, 0, 0}, cfg, 1.0);
  REQUIRE(e.size() == 63);
  for (int i = 0; i < 3; ++i) CHECK(e[i] == 0.0);
  for (int k = 0; k < cfg.num_frequencies; ++k) {
    for (int c = 0; c < 3; ++c) {
      CHECK(e[3 + 6 * k + c] == 0.0);       // sin block
      CHECK(e[3 + 6 * k + 3 + c] == 1.0);   // cos block
    }
  }
}

TEST_CASE("single frequency matches the definition", "[encoding]") {
  EncodingConfig cfg;
  cfg.num_frequencies = 1;
  const Vec3 x{0.3, -0.8, 1.1};
  auto e = pnrf::encode_point<double>(x, cfg, 1.0);
  REQUIRE(e.size() == 9);
  const double pi = std::numbers::pi;
  for (int c = 0; c < 3; ++c) {
    CHECK(e[c] == Catch::Approx(x[c]).margin(1e-15));
    CHECK(e[3 + c] == Catch::Approx(std::sin(pi * x[c])).margin(1e-15));
    CHECK(e[6 + c] == Catch::Approx(std::cos(pi * x[c])).margin(1e-15));
  }
  // the 2x scale multiplies coordinates before the sinusoids
  auto e2 = pnrf::encode_point<double>(x, cfg, 2.0);
  CHECK(e2[0] == Catch::Approx(2 * x.x).margin(1e-15));
  CHECK(e2[3] == Catch::Approx(std::sin(pi * 2 * x.x)).margin(1e-15));
}

TEST_CASE("frequencies double per octave", "[encoding]") {
  EncodingConfig cfg;
  cfg.num_frequencies = 3;
  const Vec3 x{0.123, 0, 0};
  auto e = pnrf::encode_point<double>(x, cfg, 1.0);
  const double pi = std::numbers::pi;
  CHECK(e[3 + 0] == Catch::Approx(std::sin(pi * x.x)).margin(1e-15));
  CHECK(e[3 + 6 + 0] == Catch::Approx(std::sin(2 * pi * x.x)).margin(1e-15));
  CHECK(e[3 + 12 + 0] == Catch::Approx(std::sin(4 * pi * x.x)).margin(1e-15));
}
