#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "pnrf/geometry.hpp"
#include "pnrf/util.hpp"

namespace pnrf {

// Sinusoidal coordinate encoding applied per scale. The two fixed scales
// multiply the input coordinates before encoding; each scale block feeds its
// own MLP branch.
struct EncodingConfig {
  int num_frequencies = 10;  // 10 for positions, 4 for view directions
  bool include_input = true;
  static constexpr std::array<double, 2> scales{1.0, 2.0};

  int encoded_dim() const { return (include_input ? 3 : 0) + 6 * num_frequencies; }
};

// Layout per 3-vector: [x*s, y*s, z*s (optional)], then for k = 0..L-1:
// sin(2^k * pi * x * s) for each component, cos likewise. Trig runs in the
// model scalar type; encodings are inputs, not oracle quantities.
template <class S>
void encode_point(const Vec3& p, const EncodingConfig& cfg, double scale, S* out) {
  const S sx = static_cast<S>(p.x * scale);
  const S sy = static_cast<S>(p.y * scale);
  const S sz = static_cast<S>(p.z * scale);
  int o = 0;
  if (cfg.include_input) {
    out[o++] = sx;
    out[o++] = sy;
    out[o++] = sz;
  }
  S freq = static_cast<S>(std::numbers::pi);
  for (int k = 0; k < cfg.num_frequencies; ++k) {
    out[o++] = std::sin(freq * sx);
    out[o++] = std::sin(freq * sy);
    out[o++] = std::sin(freq * sz);
    out[o++] = std::cos(freq * sx);
    out[o++] = std::cos(freq * sy);
    out[o++] = std::cos(freq * sz);
    freq *= S(2);
  }
}

template <class S>
std::vector<S> encode_point(const Vec3& p, const EncodingConfig& cfg, double scale) {
  std::vector<S> out(cfg.encoded_dim());
  encode_point(p, cfg, scale, out.data());
  return out;
}

// [N,3] points -> [N, encoded_dim] row-major buffer.
template <class S>
std::vector<S> encode_batch(const std::vector<Vec3>& points, const EncodingConfig& cfg,
                            double scale) {
  const int dim = cfg.encoded_dim();
  std::vector<S> out(points.size() * static_cast<size_t>(dim));
  for (size_t i = 0; i < points.size(); ++i) encode_point(points[i], cfg, scale, out.data() + i * dim);
  return out;
}

}  // namespace pnrf
