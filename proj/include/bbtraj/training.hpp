#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "bbtraj/adam.hpp"
#include "bbtraj/data.hpp"
#include "bbtraj/model.hpp"

namespace bbtraj {

/// Defaults are the published training setup: 30-in / 60-out windows,
/// 512-unit LSTMs with a 256-d latent, batches of 200 for 30 epochs, lr
/// 0.00141 halved every 5 epochs, alpha = 1, beta = 2.
struct TrainConfig {
  ModelConfig model;
  int batch_size = 200;
  int epochs = 30;
  double base_lr = 0.00141;
  int halve_every = 5;
  LossWeights loss;
  AdamConfig adam;
  double clip_norm = 0.0;  // global L2 gradient clipping; 0 disables
  int threads = 1;         // per-batch sample parallelism
  std::uint64_t seed = 0;

  void validate() const;
  std::map<std::string, std::string> to_key_values() const;
  std::string to_text() const;
};

/// base_lr * 0.5^floor(epoch / halve_every).
double lr_schedule(int epoch, const TrainConfig& cfg);

struct EpochStats {
  int epoch = 0;
  double loss = 0;           // mean weighted objective over the epoch's samples
  double loss_auto_enc = 0;  // mean unweighted reconstruction L1
  double loss_traj = 0;      // mean unweighted trajectory L1
  double loss_traj_delta = 0;
  double lr = 0;
  double seconds = 0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
};

/// CSV: epoch,loss,loss_auto_enc,loss_traj,lr,seconds
void write_history_csv(std::ostream& out, const TrainHistory& history);

struct TrainResult {
  ModelParams<double> params;
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochStats&, const ModelParams<double>&)>;

/// Mean objective over `batch` and the gradient of that mean, written into
/// `grads` (overwritten). Samples are split into `threads` contiguous chunks
/// whose partial sums are added in chunk order.
LossBreakdown batch_gradient(const ModelParams<double>& params, std::span<const Sample> samples,
                             std::span<const std::size_t> batch, const LossWeights& weights,
                             ModelParams<double>& grads, int threads = 1);

/// Seeded init, per-epoch seeded shuffle, mini-batches (the last one may be
/// short), Adam with the step schedule. Deterministic for a fixed seed and
/// thread count.
TrainResult train(const TrainConfig& cfg, std::span<const Sample> samples,
                  const EpochCallback& on_epoch = {});
TrainResult train(const TrainConfig& cfg, std::span<const MiniTrack> minitracks,
                  const EpochCallback& on_epoch = {});

/// Continues training from `init` instead of a fresh initialization.
TrainResult train_from(const TrainConfig& cfg, ModelParams<double> init,
                       std::span<const Sample> samples, const EpochCallback& on_epoch = {});

std::vector<Sample> make_samples(std::span<const MiniTrack> minitracks, int k);

}  // namespace bbtraj
