#include "bbtraj/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

namespace bbtraj {

void TrainConfig::validate() const {
  model.validate();
  loss.validate();
  if (batch_size < 1 || epochs < 0 || halve_every < 1 || threads < 1) {
    throw ConfigError("train config: batch_size, halve_every and threads must be >= 1, epochs >= 0");
  }
  if (!(base_lr > 0.0)) throw ConfigError("train config: base_lr must be positive");
  if (!(clip_norm >= 0.0)) throw ConfigError("train config: clip_norm must be >= 0");
}

std::map<std::string, std::string> TrainConfig::to_key_values() const {
  auto d = [](double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
  };
  return {{"k", std::to_string(model.k)},
          {"p", std::to_string(model.p)},
          {"hidden", std::to_string(model.hidden)},
          {"latent", std::to_string(model.latent)},
          {"decoder_init", model.decoder_init == DecoderInit::kFullState ? "full" : "hidden"},
          {"batch_size", std::to_string(batch_size)},
          {"epochs", std::to_string(epochs)},
          {"lr", d(base_lr)},
          {"halve_every", std::to_string(halve_every)},
          {"alpha", d(loss.alpha)},
          {"beta", d(loss.beta)},
          {"mode", std::string(to_string(loss.mode))},
          {"adam_beta1", d(adam.beta1)},
          {"adam_beta2", d(adam.beta2)},
          {"adam_epsilon", d(adam.epsilon)},
          {"clip_norm", d(clip_norm)},
          {"threads", std::to_string(threads)},
          {"seed", std::to_string(seed)}};
}

std::string TrainConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : to_key_values()) out += k + " = " + v + "\n";
  return out;
}

double lr_schedule(int epoch, const TrainConfig& cfg) {
  if (epoch < 0) throw ConfigError("lr_schedule: epoch must be >= 0");
  return cfg.base_lr * std::pow(0.5, epoch / cfg.halve_every);
}

void write_history_csv(std::ostream& out, const TrainHistory& history) {
  out << "epoch,loss,loss_auto_enc,loss_traj,lr,seconds\n";
  out.precision(10);
  for (const auto& e : history.epochs) {
    out << e.epoch << ',' << e.loss << ',' << e.loss_auto_enc << ',' << e.loss_traj << ',' << e.lr
        << ',' << e.seconds << '\n';
  }
}

std::vector<Sample> make_samples(std::span<const MiniTrack> minitracks, int k) {
  std::vector<Sample> out;
  out.reserve(minitracks.size());
  for (const auto& mt : minitracks) out.push_back(to_sample(mt, k));
  return out;
}

namespace {

void zero(ModelParams<double>& g) {
  g.for_each_tensor([](const std::string&, auto& t) { t.setZero(); });
}

void add_into(ModelParams<double>& dst, const ModelParams<double>& src) {
  std::vector<const double*> parts;
  src.for_each_tensor([&parts](const std::string&, const auto& t) { parts.push_back(t.data()); });
  std::size_t idx = 0;
  dst.for_each_tensor([&](const std::string&, auto& t) {
    t += Eigen::Map<const std::remove_reference_t<decltype(t)>>(parts[idx++], t.rows(), t.cols());
  });
}

void scale(ModelParams<double>& g, double s) {
  g.for_each_tensor([s](const std::string&, auto& t) { t *= s; });
}

LossBreakdown& operator+=(LossBreakdown& a, const LossBreakdown& b) {
  a.total += b.total;
  a.auto_enc += b.auto_enc;
  a.traj += b.traj;
  a.traj_delta += b.traj_delta;
  return a;
}

void clip_global_norm(ModelParams<double>& g, double max_norm) {
  double sq = 0;
  g.for_each_tensor([&sq](const std::string&, const auto& t) { sq += t.squaredNorm(); });
  const double norm = std::sqrt(sq);
  if (norm > max_norm) scale(g, max_norm / norm);
}

}  // namespace

LossBreakdown batch_gradient(const ModelParams<double>& params, std::span<const Sample> samples,
                             std::span<const std::size_t> batch, const LossWeights& weights,
                             ModelParams<double>& grads, int threads) {
  if (batch.empty()) throw ConfigError("batch_gradient: empty batch");
  zero(grads);
  const auto n = batch.size();
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);

  auto run_chunk = [&](std::size_t begin, std::size_t end, ModelParams<double>& acc,
                       LossBreakdown& sum) {
    for (std::size_t i = begin; i < end; ++i) {
      sum += loss_and_gradient(params, samples[batch[i]], weights, acc);
    }
  };

  LossBreakdown total;
  if (workers <= 1) {
    run_chunk(0, n, grads, total);
  } else {
    std::vector<ModelParams<double>> partial(workers, ModelParams<double>::zeros(params.config));
    std::vector<LossBreakdown> sums(workers);
    std::vector<std::exception_ptr> errors(workers);
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = n * w / workers, end = n * (w + 1) / workers;
        pool.emplace_back([&, w, begin, end] {
          try {
            run_chunk(begin, end, partial[w], sums[w]);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    for (std::size_t w = 0; w < workers; ++w) {
      add_into(grads, partial[w]);
      total += sums[w];
    }
  }
  const double inv = 1.0 / static_cast<double>(n);
  scale(grads, inv);
  total.total *= inv;
  total.auto_enc *= inv;
  total.traj *= inv;
  total.traj_delta *= inv;
  return total;
}

TrainResult train_from(const TrainConfig& cfg, ModelParams<double> init,
                       std::span<const Sample> samples, const EpochCallback& on_epoch) {
  cfg.validate();
  if (samples.empty()) throw ConfigError("train: empty dataset");
  if (init.config != cfg.model) throw ConfigError("train: initial parameters do not match config");
  for (const auto& s : samples) {
    if (s.input.length() != cfg.model.k || s.future.length() != cfg.model.p) {
      throw ConfigError("train: sample of " + std::to_string(s.input.length()) + "+" +
                        std::to_string(s.future.length()) + " frames, config expects " +
                        std::to_string(cfg.model.k) + "+" + std::to_string(cfg.model.p));
    }
  }

  TrainResult result{std::move(init), {}};
  ModelParams<double> grads = ModelParams<double>::zeros(cfg.model);
  AdamState adam{cfg.adam, 0, {}, {}};
  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng() % i)]);
    }
    const double lr = lr_schedule(epoch, cfg);
    LossBreakdown epoch_sum;
    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    for (std::size_t start = 0, b = 0; start < order.size(); start += bs, ++b) {
      const std::span<const std::size_t> batch(order.data() + start,
                                               std::min(bs, order.size() - start));
      LossBreakdown mean;
      try {
        mean = batch_gradient(result.params, samples, batch, cfg.loss, grads, cfg.threads);
        if (!std::isfinite(mean.total)) throw NumericError("non-finite loss");
        if (cfg.clip_norm > 0) clip_global_norm(grads, cfg.clip_norm);
        auto pv = param_views(result.params);
        auto gv = grad_views(grads);
        adam_step(adam, pv, gv, lr);
      } catch (const NumericError& e) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b) + ": " + e.what());
      }
      const double w = static_cast<double>(batch.size());
      epoch_sum.total += mean.total * w;
      epoch_sum.auto_enc += mean.auto_enc * w;
      epoch_sum.traj += mean.traj * w;
      epoch_sum.traj_delta += mean.traj_delta * w;
    }
    const double n = static_cast<double>(samples.size());
    EpochStats stats;
    stats.epoch = epoch;
    stats.loss = epoch_sum.total / n;
    stats.loss_auto_enc = epoch_sum.auto_enc / n;
    stats.loss_traj = epoch_sum.traj / n;
    stats.loss_traj_delta = epoch_sum.traj_delta / n;
    stats.lr = lr;
    stats.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.epochs.push_back(stats);
    if (on_epoch) on_epoch(stats, result.params);
  }
  return result;
}

TrainResult train(const TrainConfig& cfg, std::span<const Sample> samples,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  return train_from(cfg, ModelParams<double>::initialized(cfg.model, cfg.seed), samples, on_epoch);
}

TrainResult train(const TrainConfig& cfg, std::span<const MiniTrack> minitracks,
                  const EpochCallback& on_epoch) {
  const auto samples = make_samples(minitracks, cfg.model.k);
  return train(cfg, std::span<const Sample>(samples), on_epoch);
}

}  // namespace bbtraj
