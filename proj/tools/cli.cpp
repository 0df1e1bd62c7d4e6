#include "cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include "bbtraj/data.hpp"
#include "bbtraj/errors.hpp"
#include "bbtraj/evaluation.hpp"
#include "bbtraj/training.hpp"
#include "bbtraj/weights.hpp"

namespace bbtraj::cli {
namespace {

namespace fs = std::filesystem;

std::string shortest(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <typename T>
std::string format_value(const T& v) {
  if constexpr (std::is_same_v<T, std::string>) {
    return v;
  } else if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_floating_point_v<T>) {
    return shortest(v);
  } else {
    return std::to_string(v);
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f || !(f << text)) throw IoError("cannot write '" + path.string() + "'");
}

template <typename F>
void write_file(const fs::path& path, F&& fill) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  fill(f);
  if (!f) throw IoError("failed writing '" + path.string() + "'");
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& text) {
  std::vector<int> out;
  for (const auto& s : split_list(text)) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw ConfigError("--" + key + ": '" + s + "' is not an integer");
    }
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("--" + key + ": empty list");
  return out;
}

/// Options of one subcommand, bound to variables. Values from `--config` are
/// installed as defaults before parsing so explicit flags win; the echo lists
/// every option with its final value in `key = value` form.
class CommandOptions {
 public:
  explicit CommandOptions(CLI::App* app) : app_(app) {
    app_->add_option("--config", config_path_,
                     "Flat 'key = value' file of options; explicit flags take precedence");
  }

  template <typename T>
  void add(const std::string& name, T& var, const std::string& desc) {
    auto* opt = app_->add_option("--" + name, var, desc);
    opt->default_str(format_value(var));
    entries_.push_back({name, [&var] { return format_value(var); },
                        [opt](const std::string& v) { opt->default_val(v); }});
  }

  void flag(const std::string& name, bool& var, const std::string& desc) {
    app_->add_flag("--" + name, var, desc);
    entries_.push_back({name, [&var] { return format_value(var); },
                        [&var, name](const std::string& v) { var = parse_bool(name, v); }});
  }

  void apply_file(const fs::path& path) {
    const auto kv = parse_key_values(read_text(path));
    for (const auto& [raw, value] : kv) {
      std::string key = raw;
      std::replace(key.begin(), key.end(), '_', '-');
      if (key == "config") continue;
      auto it = std::find_if(entries_.begin(), entries_.end(),
                             [&](const Entry& e) { return e.name == key; });
      if (it == entries_.end()) {
        throw ConfigError("config file '" + path.string() + "': unknown key '" + raw + "' for '" +
                          app_->get_name() + "'");
      }
      try {
        it->set(value);
      } catch (const CLI::Error& e) {
        throw ConfigError("config file '" + path.string() + "': bad value for '" + raw +
                          "': " + e.what());
      }
    }
  }

  std::string echo() const {
    std::string out = "# bbtraj " + app_->get_name() + "\n";
    for (const auto& e : entries_) out += e.name + " = " + e.get() + "\n";
    return out;
  }

  CLI::App* app() const { return app_; }

 private:
  struct Entry {
    std::string name;
    std::function<std::string()> get;
    std::function<void(const std::string&)> set;
  };
  CLI::App* app_;
  std::string config_path_;
  std::vector<Entry> entries_;
};

struct DataOptions {
  std::string data;
  std::string box_format = "center";
  double frame_rate = 30.0;
  int subsample = 1;

  void add(CommandOptions& o) {
    o.add("data", data, "Track CSV (video_id,track_id,frame,<box columns>)");
    o.add("box-format", box_format, "center (cx,cy,w,h) or corners (x1,y1,x2,y2)");
    o.add("frame-rate", frame_rate, "Frame rate of the input tracks, Hz");
    o.add("subsample", subsample, "Keep every n-th frame (e.g. 2 turns 30 Hz into 15 Hz)");
  }

  std::vector<Track> load(const std::string& path, const std::string& what) const {
    if (path.empty()) throw ConfigError("--" + what + " is required");
    TrackFormat fmt;
    if (box_format == "center") {
      fmt.box_format = BoxFormat::kCenter;
    } else if (box_format == "corners") {
      fmt.box_format = BoxFormat::kCorners;
    } else {
      throw ConfigError("--box-format must be 'center' or 'corners', got '" + box_format + "'");
    }
    fmt.frame_rate_hz = frame_rate;
    auto tracks = parse_tracks(fs::path(path), fmt);
    if (subsample != 1) {
      for (auto& t : tracks) t = bbtraj::subsample(t, subsample);
    }
    return tracks;
  }

  std::vector<Track> load() const { return load(data, "data"); }
};

struct TrainOptions {
  TrainConfig cfg;
  std::string decoder_init = "full";
  std::string mode = std::string(to_string(LossMode::kTrajAutoEnc));

  void add(CommandOptions& o) {
    o.add("k", cfg.model.k, "Observed frames");
    o.add("p", cfg.model.p, "Predicted frames");
    o.add("hidden", cfg.model.hidden, "LSTM hidden width");
    o.add("latent", cfg.model.latent, "Encoder summary width");
    o.add("decoder-init", decoder_init, "full (h and c) or hidden (h only) from the encoder");
    o.add("batch-size", cfg.batch_size, "Mini-tracks per batch");
    o.add("epochs", cfg.epochs, "Training epochs");
    o.add("lr", cfg.base_lr, "Initial learning rate");
    o.add("halve-every", cfg.halve_every, "Halve the learning rate every n epochs");
    o.add("alpha", cfg.loss.alpha, "Weight of the auto-encoder term");
    o.add("beta", cfg.loss.beta, "Weight of the trajectory (or delta) term");
    o.add("mode", mode, "traj-del, traj or traj+auto-enc");
    o.add("clip-norm", cfg.clip_norm, "Global gradient norm clip, 0 disables");
    o.add("threads", cfg.threads, "Threads for per-batch gradients");
    o.add("seed", cfg.seed, "Initialization and shuffling seed");
  }

  TrainConfig resolve() const {
    TrainConfig out = cfg;
    if (decoder_init == "full") {
      out.model.decoder_init = DecoderInit::kFullState;
    } else if (decoder_init == "hidden") {
      out.model.decoder_init = DecoderInit::kHiddenOnly;
    } else {
      throw ConfigError("--decoder-init must be 'full' or 'hidden', got '" + decoder_init + "'");
    }
    out.loss.mode = parse_loss_mode(mode);
    out.validate();
    return out;
  }
};

std::vector<MiniTrack> slice_or_fail(const std::vector<Track>& tracks, int window, int stride,
                                     const std::string& what) {
  auto mts = slice_minitracks(std::span<const Track>(tracks), window, stride);
  if (mts.empty()) {
    throw InputError(what + ": no track has the " + std::to_string(window) +
                     " consecutive frames needed for one mini-track");
  }
  return mts;
}

std::string epoch_line(const EpochStats& s, int epochs) {
  std::ostringstream line;
  line << "epoch " << (s.epoch + 1) << "/" << epochs << "  loss " << std::setprecision(6) << s.loss
       << "  auto_enc " << s.loss_auto_enc << "  traj " << s.loss_traj << "  lr " << s.lr << "  "
       << std::setprecision(3) << s.seconds << " s";
  return line.str();
}

// ---------------------------------------------------------------------------

struct SynthCommand {
  CommandOptions opts;
  SynthSpec spec;
  std::string kind = to_string(MotionKind::kConstantVelocity);
  std::string out;
  int count = 20;

  explicit SynthCommand(CLI::App* app) : opts(app) {
    opts.add("out", out, "Output track CSV");
    opts.add("count", count, "Number of tracks");
    opts.add("kind", kind, "constant-velocity, constant-acceleration, sinusoidal or stop-and-go");
    opts.add("length", spec.length, "Frames per track");
    opts.add("start-cx", spec.start_cx, "Start centre x, px");
    opts.add("start-cy", spec.start_cy, "Start centre y, px");
    opts.add("start-w", spec.start_w, "Start width, px");
    opts.add("start-h", spec.start_h, "Start height, px");
    opts.add("vx", spec.vx, "Velocity x, px/frame");
    opts.add("vy", spec.vy, "Velocity y, px/frame");
    opts.add("ax", spec.ax, "Acceleration x, px/frame^2");
    opts.add("ay", spec.ay, "Acceleration y, px/frame^2");
    opts.add("dw", spec.dw, "Width change, px/frame");
    opts.add("dh", spec.dh, "Height change, px/frame");
    opts.add("amplitude", spec.amplitude, "Sinusoidal lateral amplitude, px");
    opts.add("period", spec.period, "Sinusoidal period, frames");
    opts.add("stop-probability", spec.stop_probability, "Stop-and-go: chance of stopping after a moving segment");
    opts.add("min-segment", spec.min_segment, "Stop-and-go: shortest segment, frames");
    opts.add("max-segment", spec.max_segment, "Stop-and-go: longest segment, frames");
    opts.add("start-jitter", spec.start_jitter, "Per-track uniform jitter of the start centre, px");
    opts.add("velocity-jitter", spec.velocity_jitter, "Per-track uniform jitter of the velocity, px/frame");
    opts.add("accel-jitter", spec.accel_jitter, "Per-track uniform jitter of the acceleration");
    opts.add("noise", spec.noise_stddev, "Gaussian noise on cx, cy, w, h, px");
    opts.add("seed", spec.seed, "Random seed");
    opts.add("frame-rate", spec.frame_rate_hz, "Nominal frame rate, Hz");
    opts.add("video-id", spec.video_id, "video_id column value");
  }

  int run(std::ostream& o, std::ostream&) {
    if (out.empty()) throw ConfigError("--out is required");
    SynthSpec s = spec;
    s.kind = parse_motion_kind(kind);
    const auto tracks = synth_tracks(s, count);
    write_tracks(fs::path(out), tracks);
    write_text(fs::path(out + ".meta.txt"), opts.echo());
    o << "wrote " << tracks.size() << " tracks to " << out << "\n";
    return kOk;
  }
};

struct TrainCommand {
  CommandOptions opts;
  DataOptions data;
  TrainOptions train;
  std::string out;
  std::string test_data;
  int stride = 30;
  int folds = 0;
  std::uint64_t split_seed = 0;
  bool keep_checkpoints = false;

  explicit TrainCommand(CLI::App* app) : opts(app) {
    data.add(opts);
    opts.add("test-data", test_data, "Optional held-out track CSV for the final metrics");
    opts.add("out", out, "Run directory");
    train.add(opts);
    opts.add("stride", stride, "Sliding-window stride when cutting mini-tracks");
    opts.add("folds", folds, "Track-level cross-validation folds; 0 trains one model on all data");
    opts.add("split-seed", split_seed, "Seed of the fold assignment");
    opts.flag("keep-checkpoints", keep_checkpoints, "Keep a weight file for every epoch");
  }

  struct RunWriter {
    fs::path dir;
    std::string echo;
    bool keep;
    int epochs;
    std::ostream* err;
    TrainHistory history;
    double best = std::numeric_limits<double>::infinity();

    void on_epoch(const EpochStats& s, const ModelParams<double>& params) {
      history.epochs.push_back(s);
      const fs::path ck = dir / "checkpoints";
      save_model(params, echo, ck / "last.bbw");
      if (keep) {
        char name[32];
        std::snprintf(name, sizeof name, "epoch_%03d.bbw", s.epoch + 1);
        save_model(params, echo, ck / name);
      }
      if (s.loss < best) {
        best = s.loss;
        save_model(params, echo, ck / "best.bbw");
      }
      write_file(dir / "history.csv", [&](std::ostream& f) { write_history_csv(f, history); });
      *err << epoch_line(s, epochs) << "\n";
    }
  };

  void write_metrics(const fs::path& dir, const MetricReport& r) const {
    write_file(dir / "metrics.csv", [&](std::ostream& f) { write_metrics_csv(f, r); });
    write_file(dir / "per_step.csv", [&](std::ostream& f) { write_per_step_csv(f, r); });
  }

  int run(std::ostream& o, std::ostream& err) {
    if (out.empty()) throw ConfigError("--out is required");
    const TrainConfig cfg = train.resolve();
    const auto tracks = data.load();
    const int window = cfg.model.k + cfg.model.p;
    const fs::path root(out);
    make_dirs(root);
    const std::string echo = opts.echo();
    write_text(root / "config.txt", echo);

    if (folds >= 2) return run_folds(cfg, tracks, root, echo, o, err);

    const auto mts = slice_or_fail(tracks, window, stride, "train");
    err << "training on " << mts.size() << " mini-tracks from " << tracks.size() << " tracks\n";
    make_dirs(root / "checkpoints");
    RunWriter writer{root, echo, keep_checkpoints, cfg.epochs, &err, {}};
    const auto result = bbtraj::train(cfg, std::span<const MiniTrack>(mts),
                                      [&](const EpochStats& s, const ModelParams<double>& p) {
                                        writer.on_epoch(s, p);
                                      });
    write_file(root / "history.csv", [&](std::ostream& f) { write_history_csv(f, result.history); });
    save_model(result.params, echo, root / "model.bbw");

    // Score the stored single-precision weights, i.e. what predict will load.
    const auto stored = result.params.cast<float>();
    std::vector<MiniTrack> eval_set = mts;
    std::string eval_name = "training set";
    if (!test_data.empty()) {
      eval_set = slice_or_fail(data.load(test_data, "test-data"), window, stride, "test-data");
      eval_name = "test set";
    }
    const auto report = evaluate(stored, std::span<const MiniTrack>(eval_set));
    write_metrics(root, report);
    o << "model: " << (root / "model.bbw").string() << "\n"
      << eval_name << " (" << report.n_samples << " mini-tracks): ADE " << report.ade << " px, FDE "
      << report.fde << " px\n";
    return kOk;
  }

  int run_folds(const TrainConfig& cfg, const std::vector<Track>& tracks, const fs::path& root,
                const std::string& echo, std::ostream& o, std::ostream& err) {
    int current = 0;
    auto fold_dir = [&](int f) { return root / ("fold_" + std::to_string(f)); };
    std::unique_ptr<RunWriter> writer;
    auto start_fold = [&](int f) {
      make_dirs(fold_dir(f) / "checkpoints");
      writer = std::make_unique<RunWriter>(RunWriter{fold_dir(f), echo, keep_checkpoints, cfg.epochs, &err, {}});
      err << "fold " << f << "\n";
    };
    start_fold(0);
    const auto cv = cross_validate(
        cfg, tracks, folds, stride, split_seed,
        [&](int f, const TrainResult& r, const FoldResult& fr) {
          const fs::path dir = fold_dir(f);
          write_file(dir / "history.csv", [&](std::ostream& s) { write_history_csv(s, r.history); });
          save_model(r.params, echo, dir / "model.bbw");
          write_metrics(dir, fr.report);
          err << "fold " << f << ": " << fr.train_minitracks << " train / " << fr.test_minitracks
              << " test mini-tracks, ADE " << fr.report.ade << " FDE " << fr.report.fde << "\n";
          current = f + 1;
          if (current < folds) start_fold(current);
        },
        [&](const EpochStats& s, const ModelParams<double>& p) { writer->on_epoch(s, p); });
    write_file(root / "cv_summary.csv", [&](std::ostream& f) { write_cv_csv(f, cv); });
    o << folds << "-fold cross-validation: mean ADE " << cv.mean_ade << " px, mean FDE "
      << cv.mean_fde << " px (unweighted mean over folds)\n";
    return kOk;
  }
};

struct PredictCommand {
  CommandOptions opts;
  DataOptions data;
  std::string weights;
  std::string out;

  explicit PredictCommand(CLI::App* app) : opts(app) {
    opts.add("weights", weights, "Weight file from train");
    data.add(opts);
    opts.add("out", out, "Output CSV (track_id,step,cx,cy,w,h)");
  }

  int run(std::ostream& o, std::ostream& err) {
    if (weights.empty()) throw ConfigError("--weights is required");
    if (out.empty()) throw ConfigError("--out is required");
    const auto model = load_model(fs::path(weights));
    const auto& params = model.params;
    const int k = params.config.k;
    const auto tracks = data.load();
    std::size_t written = 0;
    write_file(fs::path(out), [&](std::ostream& f) {
      f << "track_id,step,cx,cy,w,h\n";
      for (const auto& t : tracks) {
        if (t.length() < static_cast<std::size_t>(k)) {
          err << "warning: track " << t.key() << " has " << t.length() << " frames, needs " << k
              << "; skipped\n";
          continue;
        }
        const std::span<const Box> all(t.boxes);
        const std::size_t start = t.length() - static_cast<std::size_t>(k);
        std::optional<Box> predecessor;
        if (start > 0) predecessor = all[start - 1];
        const auto pred = predict(params, all.subspan(start), predecessor);
        for (Eigen::Index i = 0; i < pred.length(); ++i) {
          f << t.key() << ',' << (i + 1);
          for (int j = 0; j < kBoxDim; ++j) f << ',' << shortest(pred.rows(i, j));
          f << '\n';
        }
        ++written;
      }
    });
    if (written == 0) {
      throw InputError("predict: no track has the " + std::to_string(k) + " frames the model needs");
    }
    o << "predicted " << written << " of " << tracks.size() << " tracks into " << out << "\n";
    return kOk;
  }
};

struct EvalCommand {
  CommandOptions opts;
  DataOptions data;
  std::string weights;
  std::string baseline;
  std::string out;
  std::string per_step;
  int k = 30;
  int p = 60;
  int stride = 30;

  explicit EvalCommand(CLI::App* app) : opts(app) {
    opts.add("weights", weights, "Weight file to evaluate");
    opts.add("baseline", baseline, "Evaluate a kinematic baseline instead: cv, ca or stationary");
    data.add(opts);
    opts.add("k", k, "Observed frames (baselines only; models use their own)");
    opts.add("p", p, "Predicted frames (baselines only; models use their own)");
    opts.add("stride", stride, "Sliding-window stride when cutting mini-tracks");
    opts.add("out", out, "Metrics CSV (ade,fde,n_samples,k,p,nonpositive_sizes)");
    opts.add("per-step", per_step, "Optional CSV of mean displacement per horizon step");
  }

  int run(std::ostream& o, std::ostream&) {
    if (weights.empty() == baseline.empty()) {
      throw ConfigError("eval needs exactly one of --weights or --baseline");
    }
    const auto tracks = data.load();
    MetricReport report;
    if (!weights.empty()) {
      const auto model = load_model(fs::path(weights));
      const auto& cfg = model.params.config;
      const auto mts = slice_or_fail(tracks, cfg.k + cfg.p, stride, "eval");
      report = evaluate(model.params, std::span<const MiniTrack>(mts));
    } else {
      if (k < 1 || p < 1) throw ConfigError("--k and --p must be >= 1");
      const auto kind = parse_baseline_kind(baseline);
      const auto mts = slice_or_fail(tracks, k + p, stride, "eval");
      report = evaluate(baseline_predictor(kind, p), mts, k);
    }
    if (!out.empty()) write_file(fs::path(out), [&](std::ostream& f) { write_metrics_csv(f, report); });
    if (!per_step.empty()) {
      write_file(fs::path(per_step), [&](std::ostream& f) { write_per_step_csv(f, report); });
    }
    write_metrics_csv(o, report);
    return kOk;
  }
};

struct BenchCommand {
  CommandOptions opts;
  std::string weights;
  ModelConfig model;
  std::string threads = "1";
  double duration = 5.0;
  std::uint64_t seed = 0;
  std::string out;

  explicit BenchCommand(CLI::App* app) : opts(app) {
    opts.add("weights", weights, "Weight file; without it a seeded random model is timed");
    opts.add("k", model.k, "Observed frames (random model)");
    opts.add("p", model.p, "Predicted frames (random model)");
    opts.add("hidden", model.hidden, "LSTM hidden width (random model)");
    opts.add("latent", model.latent, "Encoder summary width (random model)");
    opts.add("threads", threads, "Comma-separated thread counts, one CSV row each");
    opts.add("duration", duration, "Seconds per thread count");
    opts.add("seed", seed, "Seed for the random model and input windows");
    opts.add("out", out, "Benchmark CSV");
  }

  int run(std::ostream& o, std::ostream& err) {
    const auto counts = parse_int_list("threads", threads);
    ModelParams<float> params;
    if (!weights.empty()) {
      params = load_model(fs::path(weights)).params;
    } else {
      model.validate();
      params = ModelParams<double>::initialized(model, seed).cast<float>();
    }
    std::vector<BenchReport> reports;
    for (int n : counts) {
      reports.push_back(benchmark_tps(params, n, duration, seed));
      err << n << " thread(s): " << reports.back().trajectories_per_second << " trajectories/s\n";
    }
    if (!out.empty()) write_file(fs::path(out), [&](std::ostream& f) { write_bench_csv(f, reports); });
    write_bench_csv(o, reports);
    return kOk;
  }
};

struct AblateCommand {
  CommandOptions opts;
  DataOptions data;
  TrainOptions train;
  std::string test_data;
  std::string out;
  std::string horizons = "15,30,45,60";
  std::string modes = "traj-del,traj,traj+auto-enc";
  int stride = 30;
  std::uint64_t split_seed = 0;
  bool retrain = false;

  explicit AblateCommand(CLI::App* app) : opts(app) {
    data.add(opts);
    opts.add("test-data", test_data,
             "Held-out track CSV; without it one of three track-level folds is held out");
    train.add(opts);
    opts.add("horizons", horizons, "Comma-separated evaluation horizons");
    opts.add("modes", modes, "Comma-separated loss modes");
    opts.add("stride", stride, "Sliding-window stride when cutting mini-tracks");
    opts.add("split-seed", split_seed, "Seed of the held-out fold when --test-data is absent");
    opts.flag("retrain-per-horizon", retrain, "Train one model per horizon instead of truncating");
    opts.add("out", out, "Ablation CSV");
  }

  int run(std::ostream& o, std::ostream& err) {
    const TrainConfig cfg = train.resolve();
    AblationOptions options;
    options.horizons = parse_int_list("horizons", horizons);
    options.modes.clear();
    for (const auto& m : split_list(modes)) options.modes.push_back(parse_loss_mode(m));
    if (options.modes.empty()) throw ConfigError("--modes: empty list");
    options.retrain_per_horizon = retrain;

    const auto tracks = data.load();
    std::vector<Track> train_tracks = tracks, test_tracks;
    if (!test_data.empty()) {
      test_tracks = data.load(test_data, "test-data");
    } else {
      const auto split = split_folds(tracks, 3, split_seed);
      train_tracks = select_fold(tracks, split, 0, true);
      test_tracks = select_fold(tracks, split, 0, false);
    }
    const int window = cfg.model.k + cfg.model.p;
    const auto train_mt = slice_or_fail(train_tracks, window, stride, "ablate (train)");
    const auto test_mt = slice_or_fail(test_tracks, window, stride, "ablate (test)");
    err << "ablation: " << train_mt.size() << " train / " << test_mt.size() << " test mini-tracks\n";
    const auto table = ablation_run(cfg, train_mt, test_mt, options);
    if (!out.empty()) write_file(fs::path(out), [&](std::ostream& f) { write_ablation_csv(f, table); });
    write_ablation_csv(o, table);
    return kOk;
  }
};

/// Finds `--config <path>` (or `--config=<path>`) in the arguments after the
/// subcommand name.
std::optional<std::string> find_config(const std::vector<std::string>& args) {
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return std::nullopt;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Bounding-box trajectory forecasting with an LSTM encoder-decoder", "bbtraj");
  app.require_subcommand(1);
  app.set_version_flag("--version", "bbtraj 0.1.0");

  SynthCommand synth(app.add_subcommand("synth", "Generate synthetic tracks"));
  TrainCommand train(app.add_subcommand("train", "Train a model (optionally with k-fold cross-validation)"));
  PredictCommand predict_cmd(app.add_subcommand("predict", "Predict future boxes for each track"));
  EvalCommand eval(app.add_subcommand("eval", "Score a model or baseline with ADE/FDE"));
  BenchCommand bench(app.add_subcommand("bench", "Measure trajectories per second"));
  AblateCommand ablate(app.add_subcommand("ablate", "Compare the three loss modes"));

  std::map<std::string, CommandOptions*> by_name = {
      {"synth", &synth.opts}, {"train", &train.opts},  {"predict", &predict_cmd.opts},
      {"eval", &eval.opts},   {"bench", &bench.opts},  {"ablate", &ablate.opts}};

  try {
    if (!args.empty()) {
      if (auto it = by_name.find(args.front()); it != by_name.end()) {
        if (auto path = find_config(args)) it->second->apply_file(fs::path(*path));
      }
    }
    std::vector<const char*> argv = {"bbtraj"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? kOk : kConfigError;
    }

    if (app.got_subcommand("synth")) return synth.run(out, err);
    if (app.got_subcommand("train")) return train.run(out, err);
    if (app.got_subcommand("predict")) return predict_cmd.run(out, err);
    if (app.got_subcommand("eval")) return eval.run(out, err);
    if (app.got_subcommand("bench")) return bench.run(out, err);
    if (app.got_subcommand("ablate")) return ablate.run(out, err);
    return kConfigError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DimensionError& e) {
    err << "dimension error: " << e.what() << "\n";
    return kConfigError;
  } catch (const bbtraj::ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kIoError;
  } catch (const FormatError& e) {
    err << "weight file error: " << e.what() << "\n";
    return kIoError;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kIoError;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumericError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace bbtraj::cli
