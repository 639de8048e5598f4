#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pnrf/checkpoint.hpp"
#include "pnrf/encoding.hpp"
#include "pnrf/geometry.hpp"
#include "pnrf/rng.hpp"
#include "pnrf/tape.hpp"
#include "pnrf/tensor.hpp"
#include "pnrf/util.hpp"

namespace pnrf {

struct FieldConfig {
  int hidden_width = 192;
  int depth = 7;             // linear layers per branch
  int skip_layer = 4;        // 0-based layer that re-concatenates the encoding
  int color_head_width = 96;
  int fusion_width = 384;    // branch concat is projected to this width

  bool operator==(const FieldConfig&) const = default;
};

template <class S>
struct FieldSample {
  S sigma = 0;      // softplus-activated density
  S raw_sigma = 0;  // pre-activation, kept for the sparsity prior
  std::array<S, 3> rgb{};
};

// Dual-branch radiance field: the two coordinate scales feed separate MLP
// branches whose outputs are fused by concatenation + linear projection.
// Density comes straight from the fused feature; color additionally sees the
// encoded view direction. Density therefore never depends on direction.
template <class S>
class RadianceField {
 public:
  using Var = typename Tape<S>::Var;

  RadianceField(FieldConfig cfg, EncodingConfig pos_enc, EncodingConfig dir_enc, uint64_t seed)
      : cfg_(cfg), pos_enc_(pos_enc), dir_enc_(dir_enc) {
    check_arg(cfg.depth >= 2, "field: depth must be at least 2");
    check_arg(cfg.skip_layer > 0 && cfg.skip_layer < cfg.depth,
              cat("field: skip_layer ", cfg.skip_layer, " outside (0, depth)"));
    Pcg32 rng(seed, 0x9e3779b97f4a7c15ULL);
    const int e = pos_enc_.encoded_dim();
    const int w = cfg.hidden_width;
    for (int b = 0; b < 2; ++b) {
      for (int l = 0; l < cfg.depth; ++l) {
        const int in = l == 0 ? e : (l == cfg.skip_layer ? w + e : w);
        add_linear(cat("branch", b, ".layer", l), in, w, rng);
      }
    }
    add_linear("fusion", 2 * w, cfg.fusion_width, rng);
    add_linear("density", cfg.fusion_width, 1, rng);
    add_linear("color_hidden", cfg.fusion_width + dir_enc_.encoded_dim(), cfg.color_head_width,
               rng);
    add_linear("color_out", cfg.color_head_width, 3, rng);
    if (cfg == FieldConfig{}) {
      const int64_t n = parameter_count();
      check(n >= 600000 && n <= 750000,
            cat("field: default architecture has ", n, " parameters, outside [0.60M, 0.75M]"));
    }
  }

  const FieldConfig& config() const { return cfg_; }
  const EncodingConfig& position_encoding() const { return pos_enc_; }
  const EncodingConfig& direction_encoding() const { return dir_enc_; }

  int64_t parameter_count() const {
    int64_t n = 0;
    for (const auto& [name, p] : params_) n += p.size();
    return n;
  }

  std::vector<ParamTensor<S>*> params() {
    std::vector<ParamTensor<S>*> out;
    for (auto& [name, p] : params_) out.push_back(&p);
    return out;
  }

  std::vector<std::pair<std::string, ParamTensor<S>*>> named_params() {
    std::vector<std::pair<std::string, ParamTensor<S>*>> out;
    for (auto& [name, p] : params_) out.emplace_back(name, &p);
    return out;
  }

  // Registers every parameter as a tape leaf. Reuse the staged handle for all
  // forward passes within one step so gradients accumulate on one leaf per
  // parameter.
  struct Staged {
    std::vector<Var> vars;
  };

  Staged stage(Tape<S>& tape) {
    Staged s;
    for (auto& [name, p] : params_) {
      check(all_finite(p.values), cat("field: non-finite parameter in ", name));
      s.vars.push_back(tape.leaf(p));
    }
    return s;
  }

  struct Output {
    Var raw_sigma;  // [N,1]
    Var sigma;      // [N,1]
    Var rgb;        // [N,3]; invalid when color head skipped
  };

  // enc1/enc2 are the scale-1/scale-2 encodings [N, pos_dim]; enc_dir is the
  // encoded view direction [N, dir_dim] and may be invalid when with_color is
  // false (density-only queries).
  Output forward(Tape<S>& tape, const Staged& st, Var enc1, Var enc2, Var enc_dir,
                 bool with_color = true) const {
    int cursor = 0;
    auto next = [&]() {
      Var w = st.vars[cursor];
      Var b = st.vars[cursor + 1];
      cursor += 2;
      return std::pair<Var, Var>(w, b);
    };
    auto linear = [&](Var x, std::pair<Var, Var> wb) {
      return tape.add_bias(tape.matmul(x, wb.first), wb.second);
    };

    std::array<Var, 2> branch_out;
    const std::array<Var, 2> enc{enc1, enc2};
    for (int b = 0; b < 2; ++b) {
      Var h = enc[b];
      for (int l = 0; l < cfg_.depth; ++l) {
        if (l == cfg_.skip_layer) h = tape.concat_cols({h, enc[b]});
        h = tape.relu(linear(h, next()));
      }
      branch_out[b] = h;
    }
    Var fused = tape.relu(linear(tape.concat_cols({branch_out[0], branch_out[1]}), next()));

    Output out;
    out.raw_sigma = linear(fused, next());
    out.sigma = tape.softplus(out.raw_sigma);

    auto color_hidden = next();
    auto color_out = next();
    if (with_color) {
      Var ch = tape.relu(linear(tape.concat_cols({fused, enc_dir}), color_hidden));
      out.rgb = tape.sigmoid(linear(ch, color_out));
    }
    return out;
  }

  // Builds the constant encoding inputs for a batch of sample positions.
  struct EncodedPoints {
    Var enc1, enc2;
  };

  EncodedPoints encode_positions(Tape<S>& tape, const std::vector<Vec3>& points) const {
    for (const Vec3& p : points)
      check_arg(std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z),
                "field: non-finite input position");
    const int dim = pos_enc_.encoded_dim();
    const int n = static_cast<int>(points.size());
    EncodedPoints e;
    e.enc1 = tape.constant(encode_batch<S>(points, pos_enc_, EncodingConfig::scales[0]), {n, dim});
    e.enc2 = tape.constant(encode_batch<S>(points, pos_enc_, EncodingConfig::scales[1]), {n, dim});
    return e;
  }

  Var encode_directions(Tape<S>& tape, const std::vector<Vec3>& dirs) const {
    for (const Vec3& d : dirs)
      check_arg(std::isfinite(d.x) && std::isfinite(d.y) && std::isfinite(d.z),
                "field: non-finite input view direction");
    const int dim = dir_enc_.encoded_dim();
    return tape.constant(encode_batch<S>(dirs, dir_enc_, 1.0), {static_cast<int>(dirs.size()), dim});
  }

  // Single-point convenience evaluation on a throwaway tape.
  FieldSample<S> eval(const Vec3& pos, const Vec3& dir) {
    check_arg(std::isfinite(pos.x) && std::isfinite(pos.y) && std::isfinite(pos.z),
              "field: non-finite input position");
    const double dn = norm(dir);
    check_arg(std::abs(dn - 1.0) <= 1e-6,
              cat("field: view direction not unit length (|d| = ", dn, ")"));
    Tape<S> tape;
    Staged st = stage(tape);
    EncodedPoints e = encode_positions(tape, {pos});
    Var ed = encode_directions(tape, {dir});
    Output o = forward(tape, st, e.enc1, e.enc2, ed, true);
    FieldSample<S> s;
    s.raw_sigma = tape.value(o.raw_sigma);
    s.sigma = tape.value(o.sigma);
    const std::vector<S>& rgb = tape.values(o.rgb);
    s.rgb = {rgb[0], rgb[1], rgb[2]};
    return s;
  }

  // ---- checkpoint round trip (format shared with the training state) ----

  CheckpointEntries checkpoint_entries() const {
    CheckpointEntries out;
    for (const auto& [name, p] : params_) {
      std::vector<float> data(p.values.size());
      for (size_t i = 0; i < data.size(); ++i) data[i] = static_cast<float>(p.values[i]);
      out.emplace_back(name, std::move(data));
    }
    return out;
  }

  void load_entries(const CheckpointEntries& entries) {
    for (auto& [name, p] : params_) {
      const std::vector<float>* data = find_entry(entries, name);
      check(data != nullptr, cat("checkpoint: missing entry \"", name, "\""));
      check(static_cast<int64_t>(data->size()) == p.size(),
            cat("checkpoint: entry \"", name, "\" has ", data->size(), " elements, expected ",
                p.size()));
      for (size_t i = 0; i < data->size(); ++i) p.values[i] = static_cast<S>((*data)[i]);
    }
  }

 private:
  void add_linear(const std::string& name, int in, int out, Pcg32& rng) {
    // Kaiming-style uniform fan-in init, biases zero.
    const double bound = std::sqrt(6.0 / in);
    std::vector<S> w(static_cast<size_t>(in) * out);
    for (S& x : w) x = static_cast<S>(rng.uniform(-bound, bound));
    params_.emplace_back(name + ".weight", ParamTensor<S>({in, out}, std::move(w)));
    params_.emplace_back(name + ".bias", ParamTensor<S>({out}, std::vector<S>(out, S(0))));
  }

  FieldConfig cfg_;
  EncodingConfig pos_enc_;
  EncodingConfig dir_enc_;
  std::vector<std::pair<std::string, ParamTensor<S>>> params_;
};

}  // namespace pnrf
