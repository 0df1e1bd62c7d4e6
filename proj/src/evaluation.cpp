#include "bbtraj/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <latch>
#include <ostream>
#include <thread>

namespace bbtraj {

namespace {

void require_comparable(const BoxSequence& pred, const BoxSequence& gt) {
  if (pred.length() != gt.length() || pred.length() < 1 || pred.rows.cols() < 2 ||
      gt.rows.cols() < 2) {
    throw DimensionError("displacement metric: prediction " +
                         shape_string(pred.rows.rows(), pred.rows.cols()) + " vs ground truth " +
                         shape_string(gt.rows.rows(), gt.rows.cols()));
  }
}

double centroid_distance(const BoxSequence& a, const BoxSequence& b, Eigen::Index i) {
  const double dx = a.rows(i, 0) - b.rows(i, 0);
  const double dy = a.rows(i, 1) - b.rows(i, 1);
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

double ade(const BoxSequence& pred, const BoxSequence& gt) {
  require_comparable(pred, gt);
  double sum = 0;
  for (Eigen::Index i = 0; i < pred.length(); ++i) sum += centroid_distance(pred, gt, i);
  return sum / static_cast<double>(pred.length());
}

double fde_at(const BoxSequence& pred, const BoxSequence& gt, int t) {
  require_comparable(pred, gt);
  if (t < 1 || t > pred.length()) {
    throw std::out_of_range("fde_at: step " + std::to_string(t) + " outside [1, " +
                            std::to_string(pred.length()) + "]");
  }
  return centroid_distance(pred, gt, t - 1);
}

double fde(const BoxSequence& pred, const BoxSequence& gt) {
  return fde_at(pred, gt, static_cast<int>(pred.length()));
}

double MetricReport::fde_at(int t) const {
  if (t < 1 || t > static_cast<int>(per_step.size())) {
    throw std::out_of_range("MetricReport::fde_at: step " + std::to_string(t) + " outside [1, " +
                            std::to_string(per_step.size()) + "]");
  }
  return per_step[static_cast<std::size_t>(t - 1)];
}

double MetricReport::ade_upto(int h) const {
  if (h < 1 || h > static_cast<int>(per_step.size())) {
    throw std::out_of_range("MetricReport::ade_upto: horizon " + std::to_string(h));
  }
  double sum = 0;
  for (int t = 0; t < h; ++t) sum += per_step[static_cast<std::size_t>(t)];
  return sum / h;
}

MetricReport evaluate(const Predictor& predictor, std::span<const MiniTrack> minitracks, int k) {
  if (minitracks.empty()) throw ConfigError("evaluate: no mini-tracks");
  const std::size_t total = minitracks.front().boxes.size();
  if (k < 1 || total <= static_cast<std::size_t>(k)) {
    throw ConfigError("evaluate: mini-tracks of " + std::to_string(total) +
                      " boxes leave no horizon after k=" + std::to_string(k));
  }
  const int p = static_cast<int>(total) - k;
  MetricReport r;
  r.horizon = p;
  r.input_length = k;
  r.per_step.assign(static_cast<std::size_t>(p), 0.0);
  double ade_sum = 0;
  for (const auto& mt : minitracks) {
    if (mt.boxes.size() != total) {
      throw ConfigError("evaluate: mini-tracks must all have " + std::to_string(total) + " boxes");
    }
    std::span<const Box> all(mt.boxes);
    const BoxSequence pred = predictor(all.first(static_cast<std::size_t>(k)), mt.predecessor);
    BoxSequence gt{Matrix<double>(p, kBoxDim)};
    for (int i = 0; i < p; ++i) gt.rows.row(i) = all[static_cast<std::size_t>(k + i)].values().transpose();
    if (pred.length() != p) {
      throw DimensionError("evaluate: predictor returned " + std::to_string(pred.length()) +
                           " steps, expected " + std::to_string(p));
    }
    ade_sum += ade(pred, gt);
    for (int t = 1; t <= p; ++t) r.per_step[static_cast<std::size_t>(t - 1)] += fde_at(pred, gt, t);
    r.nonpositive_sizes += count_nonpositive_sizes(pred);
  }
  const double n = static_cast<double>(minitracks.size());
  r.n_samples = minitracks.size();
  r.ade = ade_sum / n;
  for (auto& v : r.per_step) v /= n;
  r.fde = r.per_step.back();
  return r;
}

template <typename T>
Predictor model_predictor(const ModelParams<T>& params) {
  return [&params](std::span<const Box> past, const std::optional<Box>& predecessor) {
    return predict(params, past, predecessor);
  };
}

template <typename T>
MetricReport evaluate(const ModelParams<T>& params, std::span<const MiniTrack> minitracks) {
  if (!minitracks.empty() &&
      minitracks.front().boxes.size() != static_cast<std::size_t>(params.config.k + params.config.p)) {
    throw ConfigError("evaluate: mini-tracks of " + std::to_string(minitracks.front().boxes.size()) +
                      " boxes, model expects " +
                      std::to_string(params.config.k + params.config.p));
  }
  return evaluate(model_predictor(params), minitracks, params.config.k);
}

template Predictor model_predictor(const ModelParams<float>&);
template Predictor model_predictor(const ModelParams<double>&);
template MetricReport evaluate(const ModelParams<float>&, std::span<const MiniTrack>);
template MetricReport evaluate(const ModelParams<double>&, std::span<const MiniTrack>);

void write_metrics_csv(std::ostream& out, const MetricReport& r) {
  out.precision(10);
  out << "ade,fde,n_samples,k,p,nonpositive_sizes\n"
      << r.ade << ',' << r.fde << ',' << r.n_samples << ',' << r.input_length << ',' << r.horizon
      << ',' << r.nonpositive_sizes << '\n';
}

void write_per_step_csv(std::ostream& out, const MetricReport& r) {
  out.precision(10);
  out << "step,mean_displacement\n";
  for (std::size_t i = 0; i < r.per_step.size(); ++i) out << i + 1 << ',' << r.per_step[i] << '\n';
}

// ---------------------------------------------------------------------------

std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::kConstantVelocity:
      return "constant-velocity";
    case BaselineKind::kConstantAcceleration:
      return "constant-acceleration";
    case BaselineKind::kStationary:
      return "stationary";
  }
  return "?";
}

BaselineKind parse_baseline_kind(const std::string& text) {
  if (text == "cv" || text == "constant-velocity") return BaselineKind::kConstantVelocity;
  if (text == "ca" || text == "constant-acceleration") return BaselineKind::kConstantAcceleration;
  if (text == "stationary") return BaselineKind::kStationary;
  throw ConfigError("unknown baseline '" + text + "' (expected cv, ca or stationary)");
}

BoxSequence baseline_predict(BaselineKind kind, std::span<const Box> past, int p) {
  const std::size_t need = kind == BaselineKind::kConstantAcceleration ? 3
                           : kind == BaselineKind::kConstantVelocity  ? 2
                                                                      : 1;
  if (past.size() < need) {
    throw InputError(to_string(kind) + " baseline needs at least " + std::to_string(need) +
                     " past boxes, got " + std::to_string(past.size()));
  }
  if (p < 1) throw InputError("baseline_predict: horizon must be >= 1");
  const std::size_t n = past.size();
  const Eigen::Vector4d last = past[n - 1].values();
  Eigen::Vector4d velocity = Eigen::Vector4d::Zero();
  Eigen::Vector4d accel = Eigen::Vector4d::Zero();
  if (kind != BaselineKind::kStationary) velocity = last - past[n - 2].values();
  if (kind == BaselineKind::kConstantAcceleration) {
    accel = last - 2.0 * past[n - 2].values() + past[n - 3].values();
  }
  BoxSequence out{Matrix<double>(p, kBoxDim)};
  for (int t = 1; t <= p; ++t) {
    const double td = t;
    out.rows.row(t - 1) = (last + velocity * td + accel * (0.5 * td * (td + 1.0))).transpose();
  }
  return out;
}

Predictor baseline_predictor(BaselineKind kind, int p) {
  return [kind, p](std::span<const Box> past, const std::optional<Box>&) {
    return baseline_predict(kind, past, p);
  };
}

// ---------------------------------------------------------------------------

BenchReport benchmark_tps(const ModelParams<float>& params, int threads, double duration_s,
                          std::uint64_t seed) {
  if (threads < 1) throw ConfigError("benchmark: threads must be >= 1");
  if (!(duration_s > 0)) throw ConfigError("benchmark: duration must be positive");
  const ModelConfig& cfg = params.config;

  SynthSpec spec;
  spec.kind = MotionKind::kSinusoidal;
  spec.start_cx = 640;
  spec.start_cy = 360;
  spec.start_jitter = 300;
  spec.velocity_jitter = 3;
  spec.noise_stddev = 1.0;
  spec.length = cfg.k;
  spec.seed = seed;
  std::vector<FeatureWindow> windows;
  for (const auto& t : synth_tracks(spec, 64)) windows.push_back(build_features(t.boxes));

  BenchReport report;
  report.threads = threads;
  report.config = cfg;
  report.per_thread.assign(static_cast<std::size_t>(threads), 0);
  std::latch ready(threads + 1);
  std::atomic<bool> go{false};
  std::chrono::steady_clock::time_point start;
  const auto budget = std::chrono::duration<double>(duration_s);
  std::atomic<double> sink{0.0};
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        ready.arrive_and_wait();
        while (!go.load(std::memory_order_acquire)) std::this_thread::yield();
        std::size_t done = 0;
        double checksum = 0;
        std::size_t idx = static_cast<std::size_t>(w);
        while (std::chrono::steady_clock::now() - start < budget) {
          const auto out = predict_window(params, windows[idx % windows.size()]);
          checksum += out.rows(out.length() - 1, 0);
          ++done;
          ++idx;
        }
        report.per_thread[static_cast<std::size_t>(w)] = done;
        double cur = sink.load();
        while (!sink.compare_exchange_weak(cur, cur + checksum)) {
        }
      });
    }
    ready.arrive_and_wait();
    start = std::chrono::steady_clock::now();
    go.store(true, std::memory_order_release);
  }
  const auto end = std::chrono::steady_clock::now();
  report.seconds = std::chrono::duration<double>(end - start).count();
  for (auto c : report.per_thread) report.predictions += c;
  report.trajectories_per_second = static_cast<double>(report.predictions) / report.seconds;
  report.equivalent_fps = report.trajectories_per_second * cfg.p;
  return report;
}

void write_bench_csv(std::ostream& out, std::span<const BenchReport> reports) {
  out.precision(8);
  out << "threads,tps,fps,seconds,predictions,k,p,hidden,latent,reference_tps\n";
  for (const auto& r : reports) {
    double ref = kReferenceTps[std::size(kReferenceTps) - 1].tps;
    for (const auto& pt : kReferenceTps) {
      if (r.threads <= pt.cores) {
        ref = pt.tps;
        break;
      }
    }
    out << r.threads << ',' << r.trajectories_per_second << ',' << r.equivalent_fps << ','
        << r.seconds << ',' << r.predictions << ',' << r.config.k << ',' << r.config.p << ','
        << r.config.hidden << ',' << r.config.latent << ',' << ref << '\n';
  }
}

// ---------------------------------------------------------------------------

const AblationCell& AblationTable::at(LossMode mode, int horizon) const {
  for (const auto& c : cells) {
    if (c.mode == mode && c.horizon == horizon) return c;
  }
  throw std::out_of_range("ablation table has no cell for mode " + std::string(to_string(mode)) +
                          " at horizon " + std::to_string(horizon));
}

namespace {

std::vector<MiniTrack> truncate_minitracks(std::span<const MiniTrack> in, std::size_t length) {
  std::vector<MiniTrack> out(in.begin(), in.end());
  for (auto& mt : out) {
    if (mt.boxes.size() < length) throw ConfigError("ablation: mini-track shorter than horizon");
    mt.boxes.resize(length);
  }
  return out;
}

}  // namespace

AblationTable ablation_run(const TrainConfig& base, std::span<const MiniTrack> train_set,
                           std::span<const MiniTrack> test_set, const AblationOptions& options) {
  base.validate();
  for (int h : options.horizons) {
    if (h < 1 || h > base.model.p) {
      throw ConfigError("ablation: horizon " + std::to_string(h) + " outside [1, " +
                        std::to_string(base.model.p) + "]");
    }
  }
  AblationTable table;
  table.input_length = base.model.k;
  table.modes = options.modes;
  table.horizons = options.horizons;
  for (LossMode mode : options.modes) {
    TrainConfig cfg = base;
    cfg.loss.mode = mode;
    if (!options.retrain_per_horizon) {
      const auto trained = train(cfg, train_set);
      const auto report = evaluate(trained.params, test_set);
      for (int h : options.horizons) {
        table.cells.push_back({mode, h, report.ade_upto(h), report.fde_at(h)});
      }
    } else {
      for (int h : options.horizons) {
        TrainConfig hcfg = cfg;
        hcfg.model.p = h;
        const auto len = static_cast<std::size_t>(base.model.k + h);
        const auto tr = truncate_minitracks(train_set, len);
        const auto te = truncate_minitracks(test_set, len);
        const auto trained = train(hcfg, std::span<const MiniTrack>(tr));
        const auto report = evaluate(trained.params, std::span<const MiniTrack>(te));
        table.cells.push_back({mode, h, report.ade, report.fde});
      }
    }
  }
  return table;
}

void write_ablation_csv(std::ostream& out, const AblationTable& table) {
  out.precision(8);
  out << "input,predicted";
  for (auto m : table.modes) out << ',' << to_string(m) << "_ade," << to_string(m) << "_fde";
  out << '\n';
  for (int h : table.horizons) {
    out << table.input_length << ',' << h;
    for (auto m : table.modes) {
      const auto& c = table.at(m, h);
      out << ',' << c.ade << ',' << c.fde;
    }
    out << '\n';
  }
}

CrossValidation cross_validate(const TrainConfig& cfg, std::span<const Track> tracks, int n_folds,
                               int stride, std::uint64_t split_seed, const FoldCallback& on_fold,
                               const EpochCallback& on_epoch) {
  cfg.validate();
  CrossValidation cv;
  cv.split = split_folds(tracks, n_folds, split_seed);
  const int window = cfg.model.k + cfg.model.p;
  for (int f = 0; f < n_folds; ++f) {
    const auto train_tracks = select_fold(tracks, cv.split, f, /*exclude=*/true);
    const auto test_tracks = select_fold(tracks, cv.split, f, /*exclude=*/false);
    const auto train_mt = slice_minitracks(std::span<const Track>(train_tracks), window, stride);
    const auto test_mt = slice_minitracks(std::span<const Track>(test_tracks), window, stride);
    if (train_mt.empty() || test_mt.empty()) {
      throw ConfigError("cross-validation fold " + std::to_string(f) +
                        " has no complete mini-tracks in its train or test part");
    }
    const auto trained = train(cfg, std::span<const MiniTrack>(train_mt), on_epoch);
    FoldResult fr;
    fr.fold = f;
    fr.train_minitracks = train_mt.size();
    fr.test_minitracks = test_mt.size();
    fr.report = evaluate(trained.params, std::span<const MiniTrack>(test_mt));
    if (on_fold) on_fold(f, trained, fr);
    cv.folds.push_back(std::move(fr));
  }
  for (const auto& fr : cv.folds) {
    cv.mean_ade += fr.report.ade;
    cv.mean_fde += fr.report.fde;
  }
  cv.mean_ade /= static_cast<double>(cv.folds.size());
  cv.mean_fde /= static_cast<double>(cv.folds.size());
  return cv;
}

void write_cv_csv(std::ostream& out, const CrossValidation& cv) {
  out.precision(10);
  out << "fold,train_minitracks,test_minitracks,ade,fde\n";
  for (const auto& f : cv.folds) {
    out << f.fold << ',' << f.train_minitracks << ',' << f.test_minitracks << ',' << f.report.ade
        << ',' << f.report.fde << '\n';
  }
  out << "mean,,," << cv.mean_ade << ',' << cv.mean_fde << '\n';
}

}  // namespace bbtraj
