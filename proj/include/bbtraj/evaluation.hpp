#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bbtraj/data.hpp"
#include "bbtraj/model.hpp"
#include "bbtraj/training.hpp"

namespace bbtraj {

// ---------------------------------------------------------------------------
// Displacement metrics (centroids only, pixels)

double ade(const BoxSequence& pred, const BoxSequence& gt);
double fde(const BoxSequence& pred, const BoxSequence& gt);
/// Centroid distance at 1-based step t.
double fde_at(const BoxSequence& pred, const BoxSequence& gt, int t);

struct MetricReport {
  double ade = 0;
  double fde = 0;
  std::vector<double> per_step;  // mean displacement at step t = index + 1
  std::size_t n_samples = 0;
  int horizon = 0;
  int input_length = 0;
  std::size_t nonpositive_sizes = 0;  // predicted boxes with w <= 0 or h <= 0

  double fde_at(int t) const;
  /// ADE over the first `h` steps; equals the ADE of truncated predictions.
  double ade_upto(int h) const;
};

/// Maps observed boxes (and the frame before them, if known) to p future boxes.
using Predictor =
    std::function<BoxSequence(std::span<const Box> past, const std::optional<Box>& predecessor)>;

/// Predicts from the first k boxes of each mini-track and scores the rest.
MetricReport evaluate(const Predictor& predictor, std::span<const MiniTrack> minitracks, int k);

template <typename T>
MetricReport evaluate(const ModelParams<T>& params, std::span<const MiniTrack> minitracks);

template <typename T>
Predictor model_predictor(const ModelParams<T>& params);

/// CSV: ade,fde,n_samples,k,p,nonpositive_sizes
void write_metrics_csv(std::ostream& out, const MetricReport& report);
/// CSV: step,mean_displacement
void write_per_step_csv(std::ostream& out, const MetricReport& report);

// ---------------------------------------------------------------------------
// Kinematic baselines

enum class BaselineKind { kConstantVelocity, kConstantAcceleration, kStationary };

std::string to_string(BaselineKind kind);
BaselineKind parse_baseline_kind(const std::string& text);

/// Constant velocity repeats the last per-frame change of (cx, cy, w, h);
/// constant acceleration fits the last three boxes; stationary repeats the
/// last box.
BoxSequence baseline_predict(BaselineKind kind, std::span<const Box> past, int p);

Predictor baseline_predictor(BaselineKind kind, int p);

// ---------------------------------------------------------------------------
// Throughput

struct BenchReport {
  int threads = 0;
  double trajectories_per_second = 0;
  double equivalent_fps = 0;  // TPS * p: every predicted frame counts once
  double seconds = 0;         // timed region, predictions only
  std::size_t predictions = 0;
  std::vector<std::size_t> per_thread;
  ModelConfig config;
};

/// Runs predict in a closed loop on `threads` threads over shared read-only
/// parameters for about `duration_s` seconds. Input windows are generated
/// before the clock starts.
BenchReport benchmark_tps(const ModelParams<float>& params, int threads, double duration_s,
                          std::uint64_t seed = 0);

/// Published single/2/4/>4-core reference TPS, for context in reports.
struct PaperTps {
  int cores;
  double tps;
};
inline constexpr PaperTps kReferenceTps[] = {{1, 38.91}, {2, 54.05}, {4, 65.87}, {5, 78.06}};

/// CSV: threads,tps,fps,seconds,predictions,k,p,hidden,latent,reference_tps
void write_bench_csv(std::ostream& out, std::span<const BenchReport> reports);

// ---------------------------------------------------------------------------
// Ablation and cross-validation

struct AblationCell {
  LossMode mode;
  int horizon;
  double ade;
  double fde;
};

struct AblationTable {
  int input_length = 0;
  std::vector<LossMode> modes;
  std::vector<int> horizons;
  std::vector<AblationCell> cells;  // modes x horizons

  const AblationCell& at(LossMode mode, int horizon) const;
};

struct AblationOptions {
  std::vector<LossMode> modes = {LossMode::kTrajDelta, LossMode::kTraj, LossMode::kTrajAutoEnc};
  std::vector<int> horizons = {15, 30, 45, 60};
  /// Train a separate model per horizon instead of truncating one p-step model.
  bool retrain_per_horizon = false;
};

/// Trains one model per mode (same seed) on `train_set` and scores `test_set`
/// at each horizon.
AblationTable ablation_run(const TrainConfig& base, std::span<const MiniTrack> train_set,
                           std::span<const MiniTrack> test_set, const AblationOptions& options = {});

/// Table-shaped CSV: one row per horizon, ADE/FDE columns per mode.
void write_ablation_csv(std::ostream& out, const AblationTable& table);

struct FoldResult {
  int fold = 0;
  std::size_t train_minitracks = 0;
  std::size_t test_minitracks = 0;
  MetricReport report;
};

struct CrossValidation {
  FoldSplit split;
  std::vector<FoldResult> folds;
  double mean_ade = 0;  // unweighted mean over folds
  double mean_fde = 0;
};

using FoldCallback = std::function<void(int fold, const TrainResult&, const FoldResult&)>;

/// Track-level fold split, stride-sliced mini-tracks, one model per held-out fold.
CrossValidation cross_validate(const TrainConfig& cfg, std::span<const Track> tracks, int n_folds,
                               int stride, std::uint64_t split_seed,
                               const FoldCallback& on_fold = {},
                               const EpochCallback& on_epoch = {});

/// CSV: fold,train_minitracks,test_minitracks,ade,fde plus a final "mean" row.
void write_cv_csv(std::ostream& out, const CrossValidation& cv);

}  // namespace bbtraj
