// Command-line front end: synthetic sequence generation, feature training,
// tracking, evaluation, gradient checking and cost-curve diagnostics.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "deeplk/deeplk.hpp"

namespace fs = std::filesystem;
using namespace deeplk;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

struct FeatureFlags {
  std::string kind = "conv";
  std::string conv_spec = "8,8";
  std::string ckpt_path;
  bool mean_subtract = false;
  bool gradchan_no_value = false;
  bool conv_given = false;  // --conv passed explicitly
  std::uint64_t seed = 1;
};

void add_feature_flags(CLI::App* cmd, FeatureFlags& ff, bool with_ckpt = true) {
  cmd->add_option("--features", ff.kind, "Feature extractor: conv, identity, gradchan")
      ->check(CLI::IsMember({"conv", "identity", "gradchan"}))
      ->capture_default_str();
  cmd->add_option("--conv", ff.conv_spec,
                  "Conv out-channels per 3x3 layer, comma separated; ReLU between layers")
      ->capture_default_str();
  if (with_ckpt)
    cmd->add_option("--ckpt", ff.ckpt_path, "Checkpoint file with trained features");
  cmd->add_flag("--mean-subtract", ff.mean_subtract,
                "Subtract 0.5 from inputs before feature extraction");
  cmd->add_flag("--gradchan-no-value", ff.gradchan_no_value,
                "Drop the raw value channel from gradchan features");
}

std::vector<ConvSpec> parse_conv_spec(const std::string& spec) {
  std::vector<ConvSpec> layers;
  std::istringstream in(spec);
  std::string item;
  while (std::getline(in, item, ',')) {
    ConvSpec s;
    s.kernel_size = 3;
    try {
      s.out_channels = std::stoi(item);
    } catch (const std::exception&) {
      throw DataError("bad --conv entry: " + item);
    }
    layers.push_back(s);
  }
  if (layers.empty()) throw DataError("empty --conv spec");
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) layers[i].relu = true;
  return layers;
}

FeatureParams build_features(const FeatureFlags& ff, int in_channels) {
  if (!ff.ckpt_path.empty()) {
    const Checkpoint ckpt = load_checkpoint(ff.ckpt_path);
    return ckpt.params;
  }
  Rng rng(ff.seed);
  FeatureParams params;
  if (ff.kind == "identity")
    params = feature_init(ExtractorKind::kIdentity, in_channels, {}, rng);
  else if (ff.kind == "gradchan")
    params = feature_init(ExtractorKind::kGradChannels, in_channels, {}, rng);
  else
    params = feature_init(ExtractorKind::kConv, in_channels,
                          parse_conv_spec(ff.conv_spec), rng);
  params.mean_subtract = ff.mean_subtract;
  params.gradchan_value = !ff.gradchan_no_value;
  return params;
}

/// Directories that are sequences themselves, or every child sequence of a
/// parent directory, sorted by path.
std::vector<std::string> find_sequence_dirs(const std::string& root) {
  if (fs::is_directory(fs::path(root) / "frames")) return {root};
  std::vector<std::string> dirs;
  if (fs::is_directory(root))
    for (const auto& entry : fs::directory_iterator(root))
      if (entry.is_directory() && fs::is_directory(entry.path() / "frames"))
        dirs.push_back(entry.path().string());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty())
    throw DataError("no sequence directories (with frames/) found under " + root);
  return dirs;
}

Box parse_box_arg(const std::string& text) {
  double x, y, w, h;
  std::string s = text;
  std::replace(s.begin(), s.end(), ',', ' ');
  std::istringstream in(s);
  if (!(in >> x >> y >> w >> h) || w <= 0 || h <= 0)
    throw DataError("bad box argument (expected x,y,w,h): " + text);
  return Box::from_top_left(x, y, w, h);
}

template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < jobs; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = static_cast<std::size_t>(w); i < n; i += jobs) fn(i);
    });
  for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------------------

int run_synth(const SynthConfig& cfg, const std::string& out_dir,
              const std::string& ext) {
  const SynthSequence seq = synth_sequence(cfg);
  write_sequence(out_dir, seq, ext);
  std::printf("wrote %d frames to %s\n", cfg.frames, out_dir.c_str());
  return kExitOk;
}

int run_train(const std::string& data_dir, const std::string& out_path,
              const TrainConfig& cfg, const FeatureFlags& ff) {
  std::vector<TrainSequence> sequences;
  int channels = 1;
  for (const auto& dir : find_sequence_dirs(data_dir)) {
    const LoadedSequence loaded = load_sequence(dir);
    if (loaded.gt.empty())
      throw DataError("training sequence has no ground truth: " + dir);
    TrainSequence seq;
    seq.fps = loaded.fps;
    seq.gt = loaded.gt;
    for (std::size_t i = 0; i < loaded.size(); ++i)
      seq.frames.push_back(loaded.frame(i));
    channels = seq.frames.front().channels;
    sequences.push_back(std::move(seq));
  }
  FeatureFlags init_ff = ff;
  init_ff.seed = cfg.seed;
  const FeatureParams theta0 = build_features(init_ff, channels);

  const TrainResult result = train(sequences, cfg, theta0);
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e)
    std::printf("epoch %zu/%d loss=%.9g\n", e + 1, cfg.epochs, result.epoch_loss[e]);

  Checkpoint ckpt;
  ckpt.params = result.params;
  ckpt.config = cfg;
  ckpt.epoch = cfg.epochs;
  ckpt.running_loss = result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back();
  save_checkpoint(out_path, ckpt);
  std::printf("saved checkpoint %s\n", out_path.c_str());
  return kExitOk;
}

struct TrackFlags {
  std::string seq_dir;
  std::string out_path;
  std::string init_box;
  double alpha = -1.0;  // < 0: derive from sequence fps
  TrackerConfig cfg;
  int jobs = 1;
};

int run_track(const TrackFlags& tf, const FeatureFlags& ff) {
  const std::vector<std::string> dirs = find_sequence_dirs(tf.seq_dir);
  if (dirs.size() > 1 && !tf.out_path.empty())
    throw DataError("--out applies to a single sequence; omit it for multi-sequence runs");

  // Checkpoint config supplies template size/context/damping defaults; an
  // explicit --conv alongside --ckpt must agree with the stored spec.
  FeatureParams params;
  TrackerConfig base_cfg = tf.cfg;
  {
    const LoadedSequence probe = load_sequence(dirs.front());
    const Image first = probe.frame(0);
    params = build_features(ff, first.channels);
  }
  if (!ff.ckpt_path.empty()) {
    const Checkpoint ckpt = load_checkpoint(ff.ckpt_path);
    if (ff.conv_given) {
      Rng rng(1);
      FeatureParams requested =
          feature_init(ExtractorKind::kConv, ckpt.params.layers.empty()
                                                 ? 1
                                                 : ckpt.params.layers.front().in_channels,
                       parse_conv_spec(ff.conv_spec), rng);
      requested.mean_subtract = ckpt.params.mean_subtract;
      if (!same_extractor_spec(requested, ckpt.params))
        throw DataError("checkpoint layer spec (" + layer_spec_string(ckpt.params) +
                        ") does not match requested --conv spec (" +
                        layer_spec_string(requested) + ")");
    }
    if (base_cfg.template_size <= 0) base_cfg.template_size = ckpt.config.template_size;
    if (base_cfg.context <= 0) base_cfg.context = ckpt.config.context;
  }
  if (base_cfg.template_size <= 0) base_cfg.template_size = 64;
  if (base_cfg.context <= 0) base_cfg.context = 2.0;

  std::mutex io_mutex;
  std::vector<std::string> summaries(dirs.size());
  parallel_for(dirs.size(), tf.jobs, [&](std::size_t si) {
    const std::string& dir = dirs[si];
    const LoadedSequence seq = load_sequence(dir);
    Box box0;
    if (!tf.init_box.empty())
      box0 = parse_box_arg(tf.init_box);
    else if (!seq.gt.empty())
      box0 = seq.gt.front();
    else
      throw DataError("sequence has no ground truth; pass --init x,y,w,h: " + dir);

    TrackerConfig cfg = base_cfg;
    cfg.alpha = tf.alpha >= 0.0 ? tf.alpha : alpha_for_fps(seq.fps);

    Tracker tracker(seq.frame(0), box0, params, cfg);
    std::vector<Box> boxes{box0};
    std::vector<bool> failed{false};
    int failures = 0;
    for (std::size_t i = 1; i < seq.size(); ++i) {
      const auto result = tracker.track(seq.frame(i));
      boxes.push_back(result.box);
      failed.push_back(result.failed);
      failures += result.failed ? 1 : 0;
    }
    const std::string out = !tf.out_path.empty()
                                ? tf.out_path
                                : (fs::path(dir) / "results.txt").string();
    write_results(out, boxes, failed);
    char msg[512];
    std::snprintf(msg, sizeof msg, "%s: tracked %zu frames, %d failed -> %s",
                  dir.c_str(), seq.size(), failures, out.c_str());
    std::lock_guard<std::mutex> lock(io_mutex);
    summaries[si] = msg;
  });
  for (const auto& s : summaries) std::printf("%s\n", s.c_str());
  return kExitOk;
}

int run_eval(const std::string& seq_dir, const std::string& results_path,
             const std::string& csv_path, int jobs) {
  const std::vector<std::string> dirs = find_sequence_dirs(seq_dir);
  if (dirs.size() > 1 && !results_path.empty())
    throw DataError("--results applies to a single sequence");

  std::vector<SuccessCurve> curves(dirs.size());
  parallel_for(dirs.size(), jobs, [&](std::size_t si) {
    const LoadedSequence seq = load_sequence(dirs[si]);
    if (seq.gt.empty()) throw DataError("sequence has no ground truth: " + dirs[si]);
    const std::string rp = !results_path.empty()
                               ? results_path
                               : (fs::path(dirs[si]) / "results.txt").string();
    const auto [boxes, failed] = read_results(rp);
    if (boxes.size() != seq.gt.size())
      throw DataError("results/ground-truth count mismatch for " + dirs[si]);
    curves[si] = success_curve(boxes, seq.gt);
  });

  double auc_sum = 0.0;
  for (std::size_t si = 0; si < dirs.size(); ++si) {
    std::printf("%s auc=%.6f success@0.50=%.6f\n", dirs[si].c_str(), curves[si].auc,
                curves[si].success_at_050);
    auc_sum += curves[si].auc;
  }
  if (dirs.size() > 1)
    std::printf("mean auc=%.6f\n", auc_sum / static_cast<double>(dirs.size()));
  if (!csv_path.empty()) {
    if (dirs.size() > 1) throw DataError("--csv applies to a single sequence");
    std::ofstream out(csv_path);
    if (!out) throw DataError("cannot write CSV: " + csv_path);
    write_success_csv(out, curves.front());
  }
  return kExitOk;
}

struct GradcheckFlags {
  std::uint64_t seed = 7;
  std::string family = "translation";
  int size = 12;
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  double damping = 1e-4;
  int max_coords = -1;
};

int run_gradcheck(const GradcheckFlags& gf, const FeatureFlags& ff) {
  Rng rng(gf.seed);
  const Image texture = make_blurred_noise(48, 48, 1, rng, 2.0, 2);
  const Box box{24.0, 24.0, 16.0, 16.0};
  TrainConfig tc;
  tc.template_size = gf.size;
  const WarpFamily family = gf.family == "translation"
                                ? WarpFamily::kTranslation
                                : WarpFamily::kTranslationScale;
  tc.family = family;
  BoxPerturbation delta;
  delta.dx = 0.08;
  delta.dy = -0.05;
  delta.ds = family == WarpFamily::kTranslationScale ? 0.04 : 0.0;
  const LossSample sample =
      make_pair_at(texture, texture, box, box, delta, tc, nullptr, "gradcheck");

  FeatureFlags init_ff = ff;
  init_ff.seed = gf.seed;
  const FeatureParams theta = build_features(init_ff, 1);

  const GradCheckReport report =
      gradient_check(theta, sample, family, gf.damping, gf.epsilon, gf.tolerance,
                     gf.max_coords, gf.seed);
  std::printf("gradcheck: %s max_rel_err=%.9g checked=%d\n",
              report.pass ? "PASS" : "FAIL", report.max_rel_err, report.checked);
  std::printf("family = %s\n", gf.family.c_str());
  std::printf("epsilon = %.9g\n", gf.epsilon);
  std::printf("tolerance = %.9g\n", gf.tolerance);
  std::printf("worst_coordinate = %td\n", report.worst_coordinate);
  std::printf("analytic_at_worst = %.12g\n", report.analytic_at_worst);
  std::printf("numeric_at_worst = %.12g\n", report.numeric_at_worst);
  return report.pass ? kExitOk : kExitNumerical;
}

struct CostCurveFlags {
  std::string image_path;
  std::string source_path;
  std::string box_text;
  std::string out_path;
  double range = 8.0;
  double step = 0.5;
  int size = 64;
  double context = 2.0;
};

int run_costcurve(const CostCurveFlags& cf, const FeatureFlags& ff) {
  const Image image = load_image(cf.image_path);
  const Image source = cf.source_path.empty() ? image : load_image(cf.source_path);
  const Box box = parse_box_arg(cf.box_text);
  const FeatureParams params = build_features(ff, image.channels);
  const Patch tpl = crop_resize(image, box, cf.context, cf.size);
  const auto curve = cost_curve(params, tpl, source, cf.context, cf.range, cf.step);
  if (cf.out_path.empty()) {
    write_cost_csv(std::cout, curve);
  } else {
    std::ofstream out(cf.out_path);
    if (!out) throw DataError("cannot write CSV: " + cf.out_path);
    write_cost_csv(out, curve);
  }
  std::printf("local_minima=%d\n", count_local_minima(curve));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned-feature inverse-compositional Lucas-Kanade alignment and tracking"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Config file with key = value lines ('#' comments)");
  app.failure_message(CLI::FailureMessage::help);

  // synth
  SynthConfig synth_cfg;
  std::string synth_out, synth_ext = "pgm";
  auto* synth = app.add_subcommand("synth", "Generate a synthetic sequence with ground truth");
  synth->add_option("--out", synth_out, "Output sequence directory")->required();
  synth->add_option("--seed", synth_cfg.seed)->capture_default_str();
  synth->add_option("--frames", synth_cfg.frames)->capture_default_str();
  synth->add_option("--width", synth_cfg.width)->capture_default_str();
  synth->add_option("--height", synth_cfg.height)->capture_default_str();
  synth->add_option("--channels", synth_cfg.channels)->check(CLI::IsMember({1, 3}))
      ->capture_default_str();
  synth->add_option("--bx", synth_cfg.b_x, "Translation Laplace scale (fraction of box)")
      ->capture_default_str();
  synth->add_option("--bs", synth_cfg.b_s, "Log-scale Laplace scale")->capture_default_str();
  synth->add_option("--brightness-drift", synth_cfg.brightness_drift)->capture_default_str();
  synth->add_option("--box-w", synth_cfg.box_w)->capture_default_str();
  synth->add_option("--box-h", synth_cfg.box_h)->capture_default_str();
  synth->add_option("--fps", synth_cfg.fps)->capture_default_str();
  synth->add_option("--texture-cells", synth_cfg.texture_cells)->capture_default_str();
  synth->add_option("--ext", synth_ext, "Frame file format")
      ->check(CLI::IsMember({"pgm", "ppm", "png"}))->capture_default_str();

  // train
  TrainConfig train_cfg;
  std::string train_data, train_out, train_family = "translation_scale";
  FeatureFlags train_ff;
  auto* tr = app.add_subcommand("train", "Train feature extractor on sequences");
  tr->add_option("--data", train_data, "Sequence directory (or parent of several)")->required();
  tr->add_option("--out", train_out, "Output checkpoint path")->required();
  tr->add_option("--epochs", train_cfg.epochs)->capture_default_str();
  tr->add_option("--lr", train_cfg.learning_rate)->capture_default_str();
  tr->add_option("--batch", train_cfg.batch_size)->capture_default_str();
  tr->add_option("--samples-per-template", train_cfg.samples_per_template)
      ->capture_default_str();
  tr->add_option("--bx", train_cfg.b_translation)->capture_default_str();
  tr->add_option("--bs", train_cfg.b_scale)->capture_default_str();
  tr->add_option("--trunc", train_cfg.truncation)->capture_default_str();
  tr->add_option("--seed", train_cfg.seed)->capture_default_str();
  tr->add_option("--size", train_cfg.template_size)->capture_default_str();
  tr->add_option("--context", train_cfg.context)->capture_default_str();
  tr->add_option("--damping", train_cfg.damping)->capture_default_str();
  tr->add_option("--family", train_family)
      ->check(CLI::IsMember({"translation", "translation_scale"}))->capture_default_str();
  tr->add_option("--brightness-aug", train_cfg.brightness_aug)->capture_default_str();
  tr->add_option("--contrast-aug", train_cfg.contrast_aug)->capture_default_str();
  tr->add_option("--saturation-aug", train_cfg.saturation_aug)->capture_default_str();
  add_feature_flags(tr, train_ff, /*with_ckpt=*/false);

  // track
  TrackFlags track_flags;
  track_flags.cfg.template_size = 0;  // resolved from checkpoint or default
  track_flags.cfg.context = 0.0;
  FeatureFlags track_ff;
  auto* tk = app.add_subcommand("track", "Track a sequence from its first-frame box");
  tk->add_option("--seq", track_flags.seq_dir, "Sequence directory (or parent)")->required();
  tk->add_option("--out", track_flags.out_path, "Results file (single sequence)");
  tk->add_option("--init", track_flags.init_box, "Initial box x,y,w,h (default: first gt line)");
  tk->add_option("--alpha", track_flags.alpha, "Template adaptation rate (default: by fps)");
  tk->add_option("--size", track_flags.cfg.template_size);
  tk->add_option("--context", track_flags.cfg.context);
  tk->add_option("--damping", track_flags.cfg.damping);
  tk->add_option("--tol", track_flags.cfg.tol)->capture_default_str();
  tk->add_option("--phase1-iters", track_flags.cfg.phase1_iters)->capture_default_str();
  tk->add_option("--phase2-iters", track_flags.cfg.phase2_iters)->capture_default_str();
  tk->add_option("--jobs", track_flags.jobs)->capture_default_str();
  add_feature_flags(tk, track_ff);

  // eval
  std::string eval_seq, eval_results, eval_csv;
  int eval_jobs = 1;
  auto* ev = app.add_subcommand("eval", "Success plot and AUC from results + ground truth");
  ev->add_option("--seq", eval_seq, "Sequence directory (or parent)")->required();
  ev->add_option("--results", eval_results, "Results file (default: <seq>/results.txt)");
  ev->add_option("--csv", eval_csv, "Write the success curve as CSV");
  ev->add_option("--jobs", eval_jobs)->capture_default_str();

  // gradcheck
  GradcheckFlags gc;
  FeatureFlags gc_ff;
  gc_ff.conv_spec = "4";
  auto* g = app.add_subcommand("gradcheck", "Finite-difference check of the loss gradient");
  g->add_option("--seed", gc.seed)->capture_default_str();
  g->add_option("--family", gc.family)
      ->check(CLI::IsMember({"translation", "translation_scale"}))->capture_default_str();
  g->add_option("--size", gc.size, "Patch side")->capture_default_str();
  g->add_option("--epsilon", gc.epsilon)->capture_default_str();
  g->add_option("--tolerance", gc.tolerance)->capture_default_str();
  g->add_option("--damping", gc.damping)->capture_default_str();
  g->add_option("--max-coords", gc.max_coords, "Check at most this many coordinates")
      ->capture_default_str();
  add_feature_flags(g, gc_ff);

  // costcurve
  CostCurveFlags cc;
  FeatureFlags cc_ff;
  auto* c = app.add_subcommand("costcurve", "Feature-space SSD along horizontal shifts");
  c->add_option("--image", cc.image_path, "Template image")->required();
  c->add_option("--source", cc.source_path, "Source image (default: template image)");
  c->add_option("--box", cc.box_text, "Template box x,y,w,h")->required();
  c->add_option("--out", cc.out_path, "CSV path (default: stdout)");
  c->add_option("--range", cc.range)->capture_default_str();
  c->add_option("--step", cc.step)->capture_default_str();
  c->add_option("--size", cc.size)->capture_default_str();
  c->add_option("--context", cc.context)->capture_default_str();
  add_feature_flags(c, cc_ff);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  track_ff.conv_given = tk->count("--conv") > 0;

  try {
    if (synth->parsed()) return run_synth(synth_cfg, synth_out, synth_ext);
    if (tr->parsed()) {
      train_cfg.family = train_family == "translation" ? WarpFamily::kTranslation
                                                       : WarpFamily::kTranslationScale;
      return run_train(train_data, train_out, train_cfg, train_ff);
    }
    if (tk->parsed()) return run_track(track_flags, track_ff);
    if (ev->parsed()) return run_eval(eval_seq, eval_results, eval_csv, eval_jobs);
    if (g->parsed()) return run_gradcheck(gc, gc_ff);
    if (c->parsed()) return run_costcurve(cc, cc_ff);
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return kExitNumerical;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return kExitUsage;
}
