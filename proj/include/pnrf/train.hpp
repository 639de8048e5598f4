#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "pnrf/adam.hpp"
#include "pnrf/checkpoint.hpp"
#include "pnrf/constraints.hpp"
#include "pnrf/dataset.hpp"
#include "pnrf/field.hpp"
#include "pnrf/jsonutil.hpp"
#include "pnrf/metrics.hpp"
#include "pnrf/render.hpp"
#include "pnrf/rng.hpp"
#include "pnrf/tape.hpp"

namespace pnrf {

struct TrainConfig {
  int64_t iterations = 150000;
  int rays_per_batch = 1024;  // organized as (rays_per_batch / patch_size^2) patches
  int patch_size = 4;
  int n_samples = 64;
  double lr0 = 5e-4;
  double gamma = 0.998;  // per-step exponential decay: lr(t) = lr0 * gamma^t
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  uint64_t seed = 0;
  int64_t eval_every = 100;   // metrics row cadence
  int64_t test_every = 500;   // periodic test-psnr cadence
  int64_t checkpoint_every = 5000;
  bool double_precision = false;
  int test_res_divisor = 4;  // periodic test renders run at reduced resolution
  int test_views = 3;        // and on this many test views
  int pairs_per_step = 512;
  int sparsity_points = 1024;
  int cv_pairs = 96;
  double ranking_margin = 1e-3;
  double prior_tie_eps = 1e-6;
  double occlusion_tol = 0.05;
  double cv_color_weight = 1.0, cv_density_weight = 1.0;
  bool stratified = true;
  double acc_eps = 1e-4;
  ConstraintWeights weights;
  Schedule schedule;

  void validate() const {
    check_arg(iterations >= 0, "train: negative iteration count");
    check_arg(patch_size >= 1, "train: patch_size must be >= 1");
    check_arg(rays_per_batch > 0 && rays_per_batch % (patch_size * patch_size) == 0,
              cat("train: rays_per_batch (", rays_per_batch, ") must be divisible by patch_size^2 (",
                  patch_size * patch_size, ")"));
    check_arg(lr0 > 0, "train: lr0 must be positive");
    check_arg(gamma > 0 && gamma <= 1, "train: gamma must be in (0, 1]");
    check_arg(eval_every > 0 && test_every > 0, "train: logging cadences must be positive");
    check_arg(n_samples >= 2, "train: need at least 2 samples per ray");
    weights.validate();
    schedule.validate();
  }
};

struct TrainSetup {
  TrainConfig train;
  FieldConfig field;
  EncodingConfig pos_enc;            // 10 frequencies for positions
  EncodingConfig dir_enc{4, true};   // 4 for view directions
  uint64_t config_hash = 0;          // embedded in checkpoints to guard resumes
};

struct EvalViewReport {
  std::string name;
  double psnr = 0;
};

struct EvalReport {
  std::vector<EvalViewReport> train, test;
  std::optional<double> mean_train, mean_test, gap;
};

struct TrainResult {
  std::string checkpoint_path;
  std::string metrics_path;
  EvalReport report;
  ConstraintCounters counters;
  int64_t steps_run = 0;
  double best_test_psnr = -1;
  int64_t best_test_step = -1;
};

namespace detail {

inline Image downsample(const Image& img, int div) {
  if (div <= 1) return img;
  Image out(img.width / div, img.height / div, img.channels);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      for (int c = 0; c < out.channels; ++c) {
        float acc = 0;
        for (int dy = 0; dy < div; ++dy)
          for (int dx = 0; dx < div; ++dx) acc += img.at(x * div + dx, y * div + dy, c);
        out.at(x, y, c) = acc / static_cast<float>(div * div);
      }
  return out;
}

inline Camera scale_camera(const Camera& cam, int div) {
  Camera c = cam;
  c.width = cam.width / div;
  c.height = cam.height / div;
  c.focal = cam.focal / div;
  return c;
}

inline uint64_t mix_seed(uint64_t seed, uint64_t salt) {
  uint64_t x = seed ^ (salt * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL);
  x ^= x >> 29;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 32;
  return x;
}

}  // namespace detail

template <class S>
EvalReport evaluate(RadianceField<S>& field, const SceneDataset& data, bool eval_train,
                    bool eval_test, const RenderConfig& rc, uint64_t seed) {
  EvalReport report;
  auto run_split = [&](const std::vector<Frame>& frames, std::vector<EvalViewReport>& out) {
    check_arg(!frames.empty(), "evaluate: empty split");
    double acc = 0;
    for (size_t i = 0; i < frames.size(); ++i) {
      auto [img, depth] = render_image(field, frames[i].camera, rc, detail::mix_seed(seed, i));
      const double p = psnr(img, frames[i].image);
      out.push_back({frames[i].name, p});
      acc += p;
    }
    return acc / static_cast<double>(frames.size());
  };
  if (eval_train) report.mean_train = run_split(data.train, report.train);
  if (eval_test) report.mean_test = run_split(data.test, report.test);
  if (report.mean_train && report.mean_test) report.gap = *report.mean_train - *report.mean_test;
  return report;
}

inline json eval_report_to_json(const EvalReport& r) {
  json j;
  auto split = [](const std::vector<EvalViewReport>& views) {
    json arr = json::array();
    for (const auto& v : views) arr.push_back({{"view", v.name}, {"psnr", v.psnr}});
    return arr;
  };
  if (r.mean_train) {
    j["train"] = {{"mean_psnr", *r.mean_train}, {"views", split(r.train)}};
  }
  if (r.mean_test) {
    j["test"] = {{"mean_psnr", *r.mean_test}, {"views", split(r.test)}};
  }
  if (r.gap) j["gap"] = *r.gap;
  return j;
}

// The training loop: patch batches, Eq.-style curriculum loss assembly,
// Adam with per-step exponential LR decay, checkpoint/resume, dynamics CSV.
template <class S>
class Trainer {
 public:
  Trainer(const SceneDataset& data, const TrainSetup& setup)
      : data_(data),
        cfg_(setup.train),
        setup_(setup),
        field_(setup.field, setup.pos_enc, setup.dir_enc, setup.train.seed),
        rng_(setup.train.seed, 0x2545f4914f6cdd1dULL) {
    cfg_.validate();
    check_arg(data.train.size() >= 2, "train: need at least 2 training views");
    for (const Frame& f : data.train) {
      check_arg(f.image.width >= cfg_.patch_size && f.image.height >= cfg_.patch_size,
                "train: images smaller than the patch size");
    }
    adam_ = AdamState<S>::init(field_.params());
  }

  RadianceField<S>& field() { return field_; }
  const ConstraintCounters& counters() const { return counters_; }

  // ---- checkpointing ----

  void save_checkpoint(const std::string& path, int64_t next_step) {
    CheckpointEntries entries = field_.checkpoint_entries();
    auto named = field_.named_params();
    for (size_t i = 0; i < named.size(); ++i) {
      auto cast = [](const std::vector<S>& v) {
        std::vector<float> out(v.size());
        for (size_t k = 0; k < v.size(); ++k) out[k] = static_cast<float>(v[k]);
        return out;
      };
      entries.emplace_back("adam.m." + named[i].first, cast(adam_.m[i]));
      entries.emplace_back("adam.v." + named[i].first, cast(adam_.v[i]));
    }
    pnrf::save_checkpoint(path, entries);
    const auto [rs, ri] = rng_.state();
    json side;
    side["step"] = next_step;
    side["adam_t"] = adam_.t;
    side["adam_skipped"] = adam_.skipped;
    side["rng_state"] = cat(rs);
    side["rng_inc"] = cat(ri);
    side["config_hash"] = setup_.config_hash;
    side["precision"] = cfg_.double_precision ? "float64" : "float32";
    side["best_test_psnr"] = best_test_psnr_;
    side["best_test_step"] = best_test_step_;
    std::ofstream f(path + ".json");
    f << side.dump(2) << "\n";
    check(f.good(), cat("checkpoint: failed writing sidecar for ", path));
  }

  void resume(const std::string& path) {
    CheckpointEntries entries = pnrf::load_checkpoint(path);
    field_.load_entries(entries);
    auto named = field_.named_params();
    for (size_t i = 0; i < named.size(); ++i) {
      const std::vector<float>* m = find_entry(entries, "adam.m." + named[i].first);
      const std::vector<float>* v = find_entry(entries, "adam.v." + named[i].first);
      check(m && v, cat("checkpoint: missing optimizer moments for ", named[i].first));
      check(m->size() == adam_.m[i].size() && v->size() == adam_.v[i].size(),
            cat("checkpoint: moment size mismatch for ", named[i].first));
      for (size_t k = 0; k < m->size(); ++k) {
        adam_.m[i][k] = static_cast<S>((*m)[k]);
        adam_.v[i][k] = static_cast<S>((*v)[k]);
      }
    }
    const std::string side_path = path + ".json";
    check(std::filesystem::exists(side_path), cat("checkpoint: missing sidecar ", side_path));
    const json side = load_json(side_path);
    check(side.value("config_hash", uint64_t(0)) == setup_.config_hash,
          "checkpoint: config hash mismatch; refusing to resume with different settings");
    step0_ = side.at("step").get<int64_t>();
    adam_.t = side.at("adam_t").get<int64_t>();
    adam_.skipped = side.at("adam_skipped").get<int64_t>();
    rng_.set_state(std::stoull(side.at("rng_state").get<std::string>()),
                   std::stoull(side.at("rng_inc").get<std::string>()));
    best_test_psnr_ = side.value("best_test_psnr", -1.0);
    best_test_step_ = side.value("best_test_step", int64_t(-1));
  }

  // ---- the loop ----

  TrainResult run(const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const std::string metrics_path = (fs::path(out_dir) / "metrics.csv").string();
    const bool append = step0_ > 0 && fs::exists(metrics_path);
    std::ofstream metrics(metrics_path, append ? std::ios::app : std::ios::out);
    check(metrics.good(), cat("train: cannot open ", metrics_path));
    if (!append) metrics << kMetricsHeader << "\n";

    for (int64_t t = step0_; t < cfg_.iterations; ++t) {
      if (cfg_.checkpoint_every > 0 && t > step0_ && t % cfg_.checkpoint_every == 0)
        save_checkpoint((fs::path(out_dir) / cat("step_", t, ".ckpt")).string(), t);

      const LossBreakdown b = train_step(t);

      if (t % cfg_.eval_every == 0 || t == cfg_.iterations - 1) {
        MetricsRow row;
        row.step = t;
        row.alpha = b.alpha;
        row.lr = lr_at_step(cfg_.lr0, cfg_.gamma, t);
        row.loss_rgb = b.rgb;
        row.loss_depth = b.w_depth;
        row.loss_cv = b.w_cv;
        row.loss_sparse = b.w_sparse;
        row.loss_reg = b.w_reg;
        row.total = b.total;
        row.psnr_train = psnr_from_mse(b.rgb);
        if ((t % cfg_.test_every == 0 || t == cfg_.iterations - 1) && !data_.test.empty()) {
          const double tp = periodic_test_psnr(t);
          row.psnr_test = tp;
          if (tp > best_test_psnr_) {
            best_test_psnr_ = tp;
            best_test_step_ = t;
            save_checkpoint((fs::path(out_dir) / "best.ckpt").string(), t + 1);
          }
        }
        metrics << format_metrics_row(row) << "\n";
        metrics.flush();
      }
    }

    const std::string final_path = (fs::path(out_dir) / "final.ckpt").string();
    save_checkpoint(final_path, cfg_.iterations);

    TrainResult result;
    result.checkpoint_path = final_path;
    result.metrics_path = metrics_path;
    result.counters = counters_;
    result.steps_run = cfg_.iterations - step0_;
    result.best_test_psnr = best_test_psnr_;
    result.best_test_step = best_test_step_;
    RenderConfig rc = eval_render_config();
    result.report = evaluate(field_, data_, true, !data_.test.empty(), rc, cfg_.seed);
    std::ofstream report((fs::path(out_dir) / "report.json").string());
    report << eval_report_to_json(result.report).dump(2) << "\n";
    return result;
  }

  RenderConfig eval_render_config() const {
    RenderConfig rc;
    rc.n_samples = cfg_.n_samples;
    rc.stratified = false;
    rc.background = data_.background;
    rc.acc_eps = cfg_.acc_eps;
    return rc;
  }

 private:
  struct Batch {
    std::vector<Ray> rays;
    std::vector<int> view_of_ray;
    std::vector<S> target;        // [R*3]
    std::vector<double> prior;    // prior depth per ray (NaN when absent)
    int n_patches = 0;
  };

  Batch sample_batch() {
    Batch batch;
    const int ps = cfg_.patch_size;
    batch.n_patches = cfg_.rays_per_batch / (ps * ps);
    const int n_train = static_cast<int>(data_.train.size());
    for (int p = 0; p < batch.n_patches; ++p) {
      const int v = rng_.uniform_int(n_train);
      const Frame& f = data_.train[v];
      const int x0 = rng_.uniform_int(f.image.width - ps + 1);
      const int y0 = rng_.uniform_int(f.image.height - ps + 1);
      for (int r = 0; r < ps; ++r)
        for (int c = 0; c < ps; ++c) {
          const int x = x0 + c, y = y0 + r;
          batch.rays.push_back(generate_ray(f.camera, x, y));
          batch.view_of_ray.push_back(v);
          for (int ch = 0; ch < 3; ++ch)
            batch.target.push_back(static_cast<S>(f.image.at(x, y, ch)));
          batch.prior.push_back(f.depth_prior ? static_cast<double>(f.depth_prior->at(x, y))
                                              : std::numeric_limits<double>::quiet_NaN());
        }
    }
    return batch;
  }

  LossBreakdown train_step(int64_t t) {
    Tape<S> tape;
    auto staged = field_.stage(tape);
    Batch batch = sample_batch();
    const int n_rays = static_cast<int>(batch.rays.size());

    SampleBatch sb = sample_rays(batch.rays, cfg_.n_samples, cfg_.stratified, rng_);
    auto enc = field_.encode_positions(tape, sb.points);
    auto encd = field_.encode_directions(tape, sb.dirs);
    auto fo = field_.forward(tape, staged, enc.enc1, enc.enc2, encd, true);
    RenderedRays<S> rr = volume_render(tape, fo.sigma, fo.rgb, sb, data_.background);

    auto target = tape.constant(std::move(batch.target), {n_rays, 3});
    auto l_rgb = rgb_loss(tape, rr.color, target);

    // per-ray validity for ranking pairs and correspondences
    const std::vector<S>& acc_v = tape.values(rr.acc);
    const std::vector<S>& depth_v = tape.values(rr.depth);
    std::vector<double> depth_d(depth_v.begin(), depth_v.end());
    std::vector<bool> nonempty(n_rays);
    for (int i = 0; i < n_rays; ++i) nonempty[i] = acc_v[i] >= static_cast<S>(cfg_.acc_eps);

    using Var = typename Tape<S>::Var;
    Var l_depth, l_cv, l_sparse, l_reg;

    if (cfg_.weights.lambda_depth > 0) {
      std::vector<bool> valid(n_rays);
      for (int i = 0; i < n_rays; ++i) valid[i] = nonempty[i] && std::isfinite(batch.prior[i]);
      PairSet ps = build_pair_set(rng_, batch.prior, valid, cfg_.pairs_per_step,
                                  cfg_.ranking_margin, cfg_.prior_tie_eps);
      l_depth = depth_ranking_loss(tape, rr.depth, ps, &counters_);
    }
    if (cfg_.weights.lambda_cv > 0)
      l_cv = cross_view_term(tape, staged, batch, rr, depth_d, nonempty);
    if (cfg_.weights.lambda_sparse > 0)
      l_sparse = sparsity_loss(tape, field_, staged, data_.bounds, cfg_.sparsity_points, rng_);
    if (cfg_.weights.lambda_reg > 0)
      l_reg = smoothness_loss(tape, rr.depth, rr.color, batch.n_patches, cfg_.patch_size,
                              &counters_);

    auto [total, breakdown] =
        total_loss(tape, t, l_rgb, l_depth, l_cv, l_sparse, l_reg, cfg_.weights, cfg_.schedule);
    if (!std::isfinite(breakdown.total)) {
      throw std::runtime_error(
          cat("train: non-finite total loss at step ", t, " (rgb=", breakdown.rgb,
              " depth=", breakdown.depth, " cv=", breakdown.cv, " sparse=", breakdown.sparse,
              " reg=", breakdown.reg, "); aborting so the collapse is observable"));
    }

    tape.backward(total);
    AdamConfig<S> ac;
    ac.beta1 = cfg_.beta1;
    ac.beta2 = cfg_.beta2;
    ac.eps = cfg_.adam_eps;
    auto params = field_.params();
    adam_step(params, adam_, lr_at_step(cfg_.lr0, cfg_.gamma, t), ac);
    for (ParamTensor<S>* p : params) p->zero_grad();
    return breakdown;
  }

  typename Tape<S>::Var cross_view_term(Tape<S>& tape,
                                        const typename RadianceField<S>::Staged& staged,
                                        const Batch& batch, const RenderedRays<S>& rr,
                                        const std::vector<double>& depth_d,
                                        const std::vector<bool>& nonempty) {
    const int n_train = static_cast<int>(data_.train.size());
    const int view_b = rng_.uniform_int(n_train);
    const Camera& cam_b = data_.train[view_b].camera;
    std::vector<bool> valid(batch.rays.size());
    for (size_t i = 0; i < batch.rays.size(); ++i)
      valid[i] = nonempty[i] && batch.view_of_ray[i] != view_b;
    std::vector<Correspondence> cands =
        project_correspondences(batch.rays, depth_d, valid, cam_b, cfg_.cv_pairs, rng_);
    if (cands.empty()) {
      ++counters_.empty_correspondences;
      return tape.scalar(S(0));
    }

    std::vector<Ray> rays_b;
    for (const Correspondence& c : cands) rays_b.push_back(c.ray_b);
    SampleBatch sb_b = sample_rays(rays_b, cfg_.n_samples, cfg_.stratified, rng_);
    auto enc_b = field_.encode_positions(tape, sb_b.points);
    auto encd_b = field_.encode_directions(tape, sb_b.dirs);
    auto fo_b = field_.forward(tape, staged, enc_b.enc1, enc_b.enc2, encd_b, true);
    RenderedRays<S> rr_b = volume_render(tape, fo_b.sigma, fo_b.rgb, sb_b, data_.background);

    const std::vector<S>& depth_b_v = tape.values(rr_b.depth);
    std::vector<double> depth_b(depth_b_v.begin(), depth_b_v.end());
    std::vector<int> keep = occlusion_filter(cands, depth_b, cfg_.occlusion_tol);
    if (keep.empty()) {
      ++counters_.empty_correspondences;
      return tape.scalar(S(0));
    }

    // density agreement at the two surface-point estimates
    std::vector<Vec3> surface_points;
    std::vector<int> a_rows;
    for (int k : keep) {
      surface_points.push_back(cands[k].point);
      a_rows.push_back(cands[k].a_index);
    }
    for (int k : keep)
      surface_points.push_back(cands[k].ray_b.origin + cands[k].ray_b.direction * depth_b[k]);
    auto enc_pts = field_.encode_positions(tape, surface_points);
    auto fo_pts = field_.forward(tape, staged, enc_pts.enc1, enc_pts.enc2, {}, false);
    const int kcount = static_cast<int>(keep.size());
    std::vector<int> first(kcount), second(kcount);
    for (int i = 0; i < kcount; ++i) {
      first[i] = i;
      second[i] = kcount + i;
    }
    auto sigma_a = tape.gather_rows(fo_pts.sigma, first);
    auto sigma_b = tape.gather_rows(fo_pts.sigma, second);
    auto colors_a = tape.gather_rows(rr.color, a_rows);
    auto colors_b = tape.gather_rows(rr_b.color, keep);
    return cross_view_loss(tape, colors_a, colors_b, sigma_a, sigma_b, cfg_.cv_color_weight,
                           cfg_.cv_density_weight, &counters_);
  }

  double periodic_test_psnr(int64_t t) {
    RenderConfig rc = eval_render_config();
    const int n = std::min<int>(cfg_.test_views, static_cast<int>(data_.test.size()));
    double acc = 0;
    for (int i = 0; i < n; ++i) {
      const Frame& f = data_.test[i];
      const Camera cam = detail::scale_camera(f.camera, cfg_.test_res_divisor);
      const Image img =
          render_image(field_, cam, rc, detail::mix_seed(cfg_.seed, t * 131 + i)).first;
      acc += psnr(img, detail::downsample(f.image, cfg_.test_res_divisor));
    }
    return acc / n;
  }

  const SceneDataset& data_;
  TrainConfig cfg_;
  TrainSetup setup_;
  RadianceField<S> field_;
  AdamState<S> adam_;
  Pcg32 rng_;
  ConstraintCounters counters_;
  int64_t step0_ = 0;
  double best_test_psnr_ = -1;
  int64_t best_test_step_ = -1;
};

template <class S>
TrainResult train(const SceneDataset& data, const TrainSetup& setup, const std::string& out_dir,
                  const std::optional<std::string>& resume_path = std::nullopt) {
  Trainer<S> trainer(data, setup);
  if (resume_path) trainer.resume(*resume_path);
  return trainer.run(out_dir);
}

// ---- cumulative ablation over the constraint set ----

struct AblationRow {
  std::string label;
  double train_psnr = 0, test_psnr = 0, gap = 0;
};

inline const std::vector<std::string>& ablation_labels() {
  static const std::vector<std::string> labels{"RGB only", "+ Depth ranking",
                                               "+ Cross-view consistency", "+ Sparsity",
                                               "+ All constraints"};
  return labels;
}

// Runs the five cumulative configurations (each row enables one more
// constraint) with a shared seed and reports train/test/gap per row.
template <class S>
std::vector<AblationRow> ablation_suite(const SceneDataset& data, const TrainSetup& base,
                                        const std::string& out_dir) {
  const ConstraintWeights w = base.train.weights;
  std::vector<ConstraintWeights> rows(5);
  rows[0] = ConstraintWeights{0, 0, 0, 0};
  rows[1] = ConstraintWeights{w.lambda_depth, 0, 0, 0};
  rows[2] = ConstraintWeights{w.lambda_depth, w.lambda_cv, 0, 0};
  rows[3] = ConstraintWeights{w.lambda_depth, w.lambda_cv, w.lambda_sparse, 0};
  rows[4] = w;

  std::vector<AblationRow> out;
  for (size_t i = 0; i < rows.size(); ++i) {
    TrainSetup setup = base;
    setup.train.weights = rows[i];
    const std::string run_dir = (std::filesystem::path(out_dir) / cat("row_", i)).string();
    TrainResult res = train<S>(data, setup, run_dir);
    AblationRow row;
    row.label = ablation_labels()[i];
    row.train_psnr = res.report.mean_train.value_or(0);
    row.test_psnr = res.report.mean_test.value_or(0);
    row.gap = row.train_psnr - row.test_psnr;
    out.push_back(row);
    std::cerr << "[pnrf] ablation " << row.label << ": train " << row.train_psnr << " dB, test "
              << row.test_psnr << " dB, gap " << row.gap << " dB\n";
  }
  return out;
}

// Appends a fresh run file (never overwrites): ablation_<run_id>.csv.
inline std::string write_ablation_table(const std::vector<AblationRow>& rows,
                                        const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  int run_id = 0;
  while (fs::exists(fs::path(out_dir) / cat("ablation_", run_id, ".csv"))) ++run_id;
  const std::string path = (fs::path(out_dir) / cat("ablation_", run_id, ".csv")).string();
  std::ofstream f(path);
  f << "config,train_psnr,test_psnr,gap\n";
  for (const AblationRow& r : rows)
    f << '"' << r.label << "\"," << r.train_psnr << ',' << r.test_psnr << ',' << r.gap << "\n";
  check(f.good(), cat("ablation: failed writing ", path));
  return path;
}

}  // namespace pnrf
