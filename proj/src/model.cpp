#include "bbtraj/model.hpp"

#include <cmath>
#include <random>

namespace bbtraj {

Eigen::Vector4d FeatureWindow::anchor() const {
  if (rows.rows() == 0) {
    throw InputError("empty feature window has no anchor");
  }
  return rows.row(rows.rows() - 1).head<kBoxDim>().transpose();
}

void ModelConfig::validate() const {
  if (k < 1 || p < 1 || hidden < 1 || latent < 1) {
    throw ConfigError("model config: k, p, hidden and latent must be positive (k=" +
                      std::to_string(k) + " p=" + std::to_string(p) + " hidden=" +
                      std::to_string(hidden) + " latent=" + std::to_string(latent) + ")");
  }
}

std::size_t parameter_count(const ModelConfig& cfg) {
  const auto H = static_cast<std::size_t>(cfg.hidden);
  const auto Z = static_cast<std::size_t>(cfg.latent);
  auto lstm = [H](std::size_t in) { return 4 * H * in + 4 * H * H + 2 * 4 * H; };
  auto fc = [](std::size_t in, std::size_t out) { return out * in + out; };
  return lstm(kFeatureDim) + fc(H, Z) + lstm(Z) + fc(H, kFeatureDim) + lstm(Z) + fc(H, kBoxDim);
}

template <typename T>
ModelParams<T> ModelParams<T>::zeros(const ModelConfig& cfg) {
  cfg.validate();
  const Eigen::Index H = cfg.hidden, Z = cfg.latent;
  ModelParams m;
  m.config = cfg;
  m.encoder = LstmCellParams<T>::zeros(H, kFeatureDim);
  m.encoder_fc = Linear<T>::zeros(Z, H);
  m.auto_decoder = LstmCellParams<T>::zeros(H, Z);
  m.auto_decoder_fc = Linear<T>::zeros(kFeatureDim, H);
  m.future_decoder = LstmCellParams<T>::zeros(H, Z);
  m.future_decoder_fc = Linear<T>::zeros(kBoxDim, H);
  return m;
}

template <typename T>
ModelParams<T> ModelParams<T>::initialized(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams m = zeros(cfg);
  std::mt19937_64 rng(seed);
  auto fill = [&rng](Matrix<T>& w, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      w.data()[i] = static_cast<T>(dist(rng));
    }
  };
  const double lstm_bound = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
  for (auto* l : {&m.encoder, &m.auto_decoder, &m.future_decoder}) {
    fill(l->input_weights, lstm_bound);
    fill(l->recurrent_weights, lstm_bound);
  }
  for (auto* l : {&m.encoder_fc, &m.auto_decoder_fc, &m.future_decoder_fc}) {
    fill(l->weight, 1.0 / std::sqrt(static_cast<double>(l->in_features())));
  }
  return m;
}

template <typename T>
std::size_t ModelParams<T>::size() const {
  std::size_t n = 0;
  for_each_tensor([&n](const std::string&, const auto& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

template <typename T>
template <typename U>
ModelParams<U> ModelParams<T>::cast() const {
  ModelParams<U> out = ModelParams<U>::zeros(config);
  std::vector<const T*> src;
  for_each_tensor([&src](const std::string&, const auto& t) { src.push_back(t.data()); });
  std::size_t idx = 0;
  out.for_each_tensor([&](const std::string&, auto& t) {
    const T* s = src[idx++];
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      t.data()[i] = static_cast<U>(s[i]);
    }
  });
  return out;
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template ModelParams<float> ModelParams<double>::cast<float>() const;
template ModelParams<double> ModelParams<float>::cast<double>() const;
template ModelParams<double> ModelParams<double>::cast<double>() const;
template ModelParams<float> ModelParams<float>::cast<float>() const;

std::vector<ParamView> param_views(ModelParams<double>& params) {
  std::vector<ParamView> views;
  params.for_each_tensor([&views](const std::string& name, auto& t) {
    views.push_back({name, std::span<double>(t.data(), static_cast<std::size_t>(t.size()))});
  });
  return views;
}

std::vector<GradView> grad_views(const ModelParams<double>& grads) {
  std::vector<GradView> views;
  grads.for_each_tensor([&views](const std::string& name, const auto& t) {
    views.push_back({name, std::span<const double>(t.data(), static_cast<std::size_t>(t.size()))});
  });
  return views;
}

Vector<double> flatten(const ModelParams<double>& params) {
  Vector<double> flat(static_cast<Eigen::Index>(params.size()));
  Eigen::Index offset = 0;
  params.for_each_tensor([&](const std::string&, const auto& t) {
    flat.segment(offset, t.size()) = Eigen::Map<const Vector<double>>(t.data(), t.size());
    offset += t.size();
  });
  return flat;
}

void unflatten(const Vector<double>& flat, ModelParams<double>& params) {
  if (static_cast<std::size_t>(flat.size()) != params.size()) {
    throw DimensionError("unflatten: vector of length " + std::to_string(flat.size()) +
                         " for a model with " + std::to_string(params.size()) + " parameters");
  }
  Eigen::Index offset = 0;
  params.for_each_tensor([&](const std::string&, auto& t) {
    Eigen::Map<Vector<double>>(t.data(), t.size()) = flat.segment(offset, t.size());
    offset += t.size();
  });
}

// ---------------------------------------------------------------------------

FeatureWindow build_features(std::span<const Box> boxes, const std::optional<Box>& predecessor) {
  if (boxes.empty()) {
    throw InputError("build_features: need at least one box");
  }
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const Box& b = boxes[i];
    if (!(b.w > 0.0) || !(b.h > 0.0)) {
      throw InputError("build_features: box at frame " + std::to_string(b.frame) +
                       " has non-positive size");
    }
    if (i > 0 && b.frame != boxes[i - 1].frame + 1) {
      throw InputError("build_features: frame gap between " + std::to_string(boxes[i - 1].frame) +
                       " and " + std::to_string(b.frame));
    }
  }
  if (predecessor && predecessor->frame + 1 != boxes.front().frame) {
    throw InputError("build_features: predecessor frame " + std::to_string(predecessor->frame) +
                     " does not precede frame " + std::to_string(boxes.front().frame));
  }

  FeatureWindow window{Matrix<double>::Zero(static_cast<Eigen::Index>(boxes.size()), kFeatureDim)};
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const Eigen::Vector4d cur = boxes[i].values();
    window.rows.row(r).head<kBoxDim>() = cur.transpose();
    if (i > 0) {
      window.rows.row(r).tail<kBoxDim>() = (cur - boxes[i - 1].values()).transpose();
    } else if (predecessor) {
      window.rows.row(r).tail<kBoxDim>() = (cur - predecessor->values()).transpose();
    }
  }
  return window;
}

FeatureWindow reconstruction_target(const FeatureWindow& window) {
  const Eigen::Index k = window.length();
  FeatureWindow out{Matrix<double>(k, window.rows.cols())};
  for (Eigen::Index r = 0; r < k; ++r) {
    out.rows.row(r) = window.rows.row(k - 1 - r);
  }
  if (out.rows.cols() == kFeatureDim) {
    out.rows.rightCols<kBoxDim>() *= -1.0;
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void require_window(const ModelConfig& cfg, const FeatureWindow& window) {
  if (window.length() != cfg.k || window.rows.cols() != kFeatureDim) {
    throw DimensionError("feature window " + shape_string(window.rows.rows(), window.rows.cols()) +
                         " does not match model input " + shape_string(cfg.k, kFeatureDim));
  }
}

template <typename T>
void require_latent(const ModelConfig& cfg, const Vector<T>& latent) {
  if (latent.size() != cfg.latent) {
    throw DimensionError("latent vector of length " + std::to_string(latent.size()) +
                         ", model expects " + std::to_string(cfg.latent));
  }
}

template <typename T>
LstmCellState<T> future_initial_state(const ModelConfig& cfg, const LstmCellState<T>& enc_final) {
  if (cfg.decoder_init == DecoderInit::kHiddenOnly) {
    return {enc_final.h, Vector<T>::Zero(enc_final.c.size())};
  }
  return enc_final;
}

// Activations kept for the backward pass. Each block uses the same step
// functions as the public forward ops, so the outputs agree bitwise.
struct Trace {
  std::vector<LstmCache<double>> encoder;
  LstmCellState<double> encoder_final;
  Vector<double> encoder_relu;
  Vector<double> latent;
  std::vector<LstmCache<double>> auto_decoder;
  std::vector<LstmCache<double>> future_decoder;
  ForwardOutputs<double> outputs;
};

Trace forward_trace(const ModelParams<double>& params, const FeatureWindow& window,
                    bool with_auto_decoder) {
  const ModelConfig& cfg = params.config;
  require_window(cfg, window);
  Trace tr;

  LstmCellState<double> s = LstmCellState<double>::zeros(cfg.hidden);
  tr.encoder.resize(static_cast<std::size_t>(cfg.k));
  for (int t = 0; t < cfg.k; ++t) {
    Vector<double> x = window.rows.row(t).transpose();
    s = lstm_step(params.encoder, lstm_input_projection(params.encoder, x), s,
                  &tr.encoder[static_cast<std::size_t>(t)]);
    tr.encoder[static_cast<std::size_t>(t)].x = std::move(x);
  }
  tr.encoder_final = s;
  tr.encoder_relu = relu(s.h);
  tr.latent = params.encoder_fc.forward(tr.encoder_relu);

  if (with_auto_decoder) {
    const Vector<double> proj = lstm_input_projection(params.auto_decoder, tr.latent);
    LstmCellState<double> a = LstmCellState<double>::zeros(cfg.hidden);
    tr.auto_decoder.resize(static_cast<std::size_t>(cfg.k));
    tr.outputs.reconstruction.rows.resize(cfg.k, kFeatureDim);
    for (int t = 0; t < cfg.k; ++t) {
      a = lstm_step(params.auto_decoder, proj, a, &tr.auto_decoder[static_cast<std::size_t>(t)]);
      tr.outputs.reconstruction.rows.row(t) = params.auto_decoder_fc.forward(a.h).transpose();
    }
  }

  const Vector<double> proj = lstm_input_projection(params.future_decoder, tr.latent);
  LstmCellState<double> d = future_initial_state(cfg, s);
  tr.future_decoder.resize(static_cast<std::size_t>(cfg.p));
  tr.outputs.deltas.rows.resize(cfg.p, kBoxDim);
  for (int t = 0; t < cfg.p; ++t) {
    d = lstm_step(params.future_decoder, proj, d, &tr.future_decoder[static_cast<std::size_t>(t)]);
    tr.outputs.deltas.rows.row(t) = params.future_decoder_fc.forward(d.h).transpose();
  }
  tr.outputs.trajectory = concat_trajectory(tr.outputs.deltas, window.anchor());
  return tr;
}

// Backprop through a decoder run on a constant input. Returns d(latent) and
// leaves the gradient w.r.t. the initial state in `d_initial`.
Vector<double> decoder_backward(const LstmCellParams<double>& lstm, const Linear<double>& fc,
                                const std::vector<LstmCache<double>>& caches,
                                const Matrix<double>& d_out, const Vector<double>& latent,
                                LstmCellParams<double>& lstm_grad, Linear<double>& fc_grad,
                                LstmCellState<double>& d_initial) {
  const Eigen::Index H = lstm.hidden_size();
  Vector<double> dh_next = Vector<double>::Zero(H);
  Vector<double> dc_next = Vector<double>::Zero(H);
  Vector<double> gate_sum = Vector<double>::Zero(4 * H);
  for (auto t = static_cast<Eigen::Index>(caches.size()) - 1; t >= 0; --t) {
    const auto& cache = caches[static_cast<std::size_t>(t)];
    // h_t of this step is the next step's h_prev; for the last step read it from the cell.
    Vector<double> h_t = cache.o.cwiseProduct(cache.tanh_c);
    Vector<double> dh = fc.backward(h_t, d_out.row(t).transpose(), fc_grad);
    dh += dh_next;
    auto step = lstm_step_backward(lstm, cache, dh, dc_next, lstm_grad);
    gate_sum += step.gates;
    dh_next = std::move(step.d_state.h);
    dc_next = std::move(step.d_state.c);
  }
  d_initial = {std::move(dh_next), std::move(dc_next)};
  return lstm_input_backward(lstm, latent, gate_sum, lstm_grad);
}

}  // namespace

template <typename T>
Encoding<T> encode(const ModelParams<T>& params, const FeatureWindow& window) {
  const ModelConfig& cfg = params.config;
  require_window(cfg, window);
  LstmCellState<T> s = LstmCellState<T>::zeros(cfg.hidden);
  for (int t = 0; t < cfg.k; ++t) {
    const Vector<T> x = window.rows.row(t).transpose().template cast<T>();
    s = lstm_step(params.encoder, lstm_input_projection(params.encoder, x), s,
                  static_cast<LstmCache<T>*>(nullptr));
  }
  Vector<T> latent = params.encoder_fc.forward(relu(s.h));
  return {std::move(latent), std::move(s)};
}

template <typename T>
FeatureWindow reconstruct(const ModelParams<T>& params, const Vector<T>& latent) {
  const ModelConfig& cfg = params.config;
  require_latent(cfg, latent);
  const Vector<T> proj = lstm_input_projection(params.auto_decoder, latent);
  LstmCellState<T> s = LstmCellState<T>::zeros(cfg.hidden);
  FeatureWindow out{Matrix<double>(cfg.k, kFeatureDim)};
  for (int t = 0; t < cfg.k; ++t) {
    s = lstm_step(params.auto_decoder, proj, s, static_cast<LstmCache<T>*>(nullptr));
    out.rows.row(t) = params.auto_decoder_fc.forward(s.h).transpose().template cast<double>();
  }
  return out;
}

template <typename T>
DeltaSequence decode_future(const ModelParams<T>& params, const Vector<T>& latent,
                            const LstmCellState<T>& encoder_final) {
  const ModelConfig& cfg = params.config;
  require_latent(cfg, latent);
  const Vector<T> proj = lstm_input_projection(params.future_decoder, latent);
  LstmCellState<T> s = future_initial_state(cfg, encoder_final);
  DeltaSequence out{Matrix<double>(cfg.p, kBoxDim)};
  for (int t = 0; t < cfg.p; ++t) {
    s = lstm_step(params.future_decoder, proj, s, static_cast<LstmCache<T>*>(nullptr));
    out.rows.row(t) = params.future_decoder_fc.forward(s.h).transpose().template cast<double>();
  }
  return out;
}

BoxSequence concat_trajectory(const DeltaSequence& deltas, const Eigen::Vector4d& anchor) {
  if (deltas.length() == 0) {
    throw InputError("concat_trajectory: empty delta sequence");
  }
  if (deltas.rows.cols() != kBoxDim) {
    throw DimensionError("concat_trajectory: deltas must have 4 columns, got " +
                         std::to_string(deltas.rows.cols()));
  }
  BoxSequence out{Matrix<double>(deltas.length(), kBoxDim)};
  Eigen::RowVector4d cur = anchor.transpose();
  for (Eigen::Index i = 0; i < deltas.length(); ++i) {
    cur += deltas.rows.row(i);
    out.rows.row(i) = cur;
  }
  return out;
}

Matrix<double> concat_trajectory_backward(const Matrix<double>& d_boxes) {
  Matrix<double> d_deltas(d_boxes.rows(), d_boxes.cols());
  Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(d_boxes.cols());
  for (Eigen::Index i = d_boxes.rows() - 1; i >= 0; --i) {
    acc += d_boxes.row(i);
    d_deltas.row(i) = acc;
  }
  return d_deltas;
}

template <typename T>
ForwardOutputs<T> forward_train(const ModelParams<T>& params, const FeatureWindow& window) {
  auto enc = encode(params, window);
  ForwardOutputs<T> out;
  out.reconstruction = reconstruct(params, enc.latent);
  out.deltas = decode_future(params, enc.latent, enc.final_state);
  out.trajectory = concat_trajectory(out.deltas, window.anchor());
  return out;
}

template <typename T>
BoxSequence predict_window(const ModelParams<T>& params, const FeatureWindow& window) {
  auto enc = encode(params, window);
  return concat_trajectory(decode_future(params, enc.latent, enc.final_state), window.anchor());
}

template <typename T>
BoxSequence predict(const ModelParams<T>& params, std::span<const Box> past,
                    const std::optional<Box>& predecessor) {
  if (static_cast<int>(past.size()) != params.config.k) {
    throw InputError("predict: expected " + std::to_string(params.config.k) +
                     " past boxes, got " + std::to_string(past.size()));
  }
  return predict_window(params, build_features(past, predecessor));
}

std::size_t count_nonpositive_sizes(const BoxSequence& boxes) {
  std::size_t n = 0;
  for (Eigen::Index i = 0; i < boxes.length(); ++i) {
    if (!(boxes.rows(i, 2) > 0.0) || !(boxes.rows(i, 3) > 0.0)) {
      ++n;
    }
  }
  return n;
}

#define BBTRAJ_INSTANTIATE_MODEL(T)                                                            \
  template Encoding<T> encode(const ModelParams<T>&, const FeatureWindow&);                    \
  template FeatureWindow reconstruct(const ModelParams<T>&, const Vector<T>&);                 \
  template DeltaSequence decode_future(const ModelParams<T>&, const Vector<T>&,                \
                                       const LstmCellState<T>&);                               \
  template ForwardOutputs<T> forward_train(const ModelParams<T>&, const FeatureWindow&);       \
  template BoxSequence predict_window(const ModelParams<T>&, const FeatureWindow&);            \
  template BoxSequence predict(const ModelParams<T>&, std::span<const Box>,                    \
                               const std::optional<Box>&);

BBTRAJ_INSTANTIATE_MODEL(float)
BBTRAJ_INSTANTIATE_MODEL(double)

#undef BBTRAJ_INSTANTIATE_MODEL

// ---------------------------------------------------------------------------

std::string_view to_string(LossMode mode) {
  switch (mode) {
    case LossMode::kTrajDelta:
      return "traj-del";
    case LossMode::kTraj:
      return "traj";
    case LossMode::kTrajAutoEnc:
      return "traj+auto-enc";
  }
  return "?";
}

LossMode parse_loss_mode(std::string_view text) {
  for (auto m : {LossMode::kTrajDelta, LossMode::kTraj, LossMode::kTrajAutoEnc}) {
    if (text == to_string(m)) {
      return m;
    }
  }
  throw ConfigError("unknown loss mode '" + std::string(text) +
                    "' (expected traj-del, traj or traj+auto-enc)");
}

void LossWeights::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0)) {
    throw ConfigError("loss weights must be non-negative (alpha=" + std::to_string(alpha) +
                      ", beta=" + std::to_string(beta) + ")");
  }
}

Sample make_sample(std::span<const Box> past, std::span<const Box> future,
                   const std::optional<Box>& predecessor) {
  if (past.empty() || future.empty()) {
    throw InputError("make_sample: past and future must be non-empty");
  }
  if (future.front().frame != past.back().frame + 1) {
    throw InputError("make_sample: future does not continue the observed window");
  }
  Sample s;
  s.input = build_features(past, predecessor);
  const auto p = static_cast<Eigen::Index>(future.size());
  s.future.rows.resize(p, kBoxDim);
  s.future_deltas.rows.resize(p, kBoxDim);
  Eigen::Vector4d prev = past.back().values();
  for (Eigen::Index i = 0; i < p; ++i) {
    const Box& b = future[static_cast<std::size_t>(i)];
    if (i > 0 && b.frame != future[static_cast<std::size_t>(i - 1)].frame + 1) {
      throw InputError("make_sample: frame gap in future boxes at frame " +
                       std::to_string(b.frame));
    }
    s.future.rows.row(i) = b.values().transpose();
    s.future_deltas.rows.row(i) = (b.values() - prev).transpose();
    prev = b.values();
  }
  return s;
}

CompositeLoss composite_loss(const ForwardOutputs<double>& outputs, const Sample& sample,
                             const LossWeights& weights) {
  weights.validate();
  const Eigen::Index k = sample.input.length();
  const Eigen::Index p = sample.future.length();
  if (outputs.deltas.length() != p || outputs.trajectory.length() != p) {
    throw ConfigError("composite_loss: prediction horizon " +
                      std::to_string(outputs.deltas.length()) + " does not match target " +
                      std::to_string(p));
  }
  CompositeLoss out;
  out.d_reconstruction = Matrix<double>::Zero(k, kFeatureDim);
  switch (weights.mode) {
    case LossMode::kTrajAutoEnc: {
      if (outputs.reconstruction.length() != k) {
        throw ConfigError("composite_loss: traj+auto-enc mode needs the reconstruction head");
      }
      auto ae = l1_loss(outputs.reconstruction.rows, reconstruction_target(sample.input).rows);
      auto tr = l1_loss(outputs.trajectory.rows, sample.future.rows);
      out.terms.auto_enc = ae.loss;
      out.terms.traj = tr.loss;
      out.terms.total = weights.alpha * ae.loss + weights.beta * tr.loss;
      out.d_reconstruction = weights.alpha * ae.grad;
      out.d_deltas = concat_trajectory_backward(weights.beta * tr.grad);
      break;
    }
    case LossMode::kTraj: {
      auto tr = l1_loss(outputs.trajectory.rows, sample.future.rows);
      out.terms.traj = tr.loss;
      out.terms.total = weights.beta * tr.loss;
      out.d_deltas = concat_trajectory_backward(weights.beta * tr.grad);
      break;
    }
    case LossMode::kTrajDelta: {
      auto dl = l1_loss(outputs.deltas.rows, sample.future_deltas.rows);
      out.terms.traj_delta = dl.loss;
      // Reported for monitoring only; the concatenated boxes are unsupervised here.
      out.terms.traj = l1_loss(outputs.trajectory.rows, sample.future.rows).loss;
      out.terms.total = weights.beta * dl.loss;
      out.d_deltas = weights.beta * dl.grad;
      break;
    }
  }
  return out;
}

LossBreakdown loss_and_gradient(const ModelParams<double>& params, const Sample& sample,
                                const LossWeights& weights, ModelParams<double>& grads) {
  if (grads.config != params.config) {
    throw DimensionError("loss_and_gradient: gradient buffer has a different model config");
  }
  const bool with_ae = weights.mode == LossMode::kTrajAutoEnc;
  Trace tr = forward_trace(params, sample.input, with_ae);
  CompositeLoss loss = composite_loss(tr.outputs, sample, weights);
  if (!std::isfinite(loss.terms.total)) {
    throw NumericError("loss_and_gradient: non-finite loss");
  }

  const Eigen::Index H = params.config.hidden;
  LstmCellState<double> d_future_init;
  Vector<double> d_latent =
      decoder_backward(params.future_decoder, params.future_decoder_fc, tr.future_decoder,
                       loss.d_deltas, tr.latent, grads.future_decoder, grads.future_decoder_fc,
                       d_future_init);
  if (with_ae) {
    LstmCellState<double> unused;
    d_latent += decoder_backward(params.auto_decoder, params.auto_decoder_fc, tr.auto_decoder,
                                 loss.d_reconstruction, tr.latent, grads.auto_decoder,
                                 grads.auto_decoder_fc, unused);
  }

  Vector<double> d_relu = params.encoder_fc.backward(tr.encoder_relu, d_latent, grads.encoder_fc);
  Vector<double> dh = relu_backward(tr.encoder_final.h, d_relu);
  dh += d_future_init.h;
  Vector<double> dc = Vector<double>::Zero(H);
  if (params.config.decoder_init == DecoderInit::kFullState) {
    dc += d_future_init.c;
  }
  for (auto t = static_cast<Eigen::Index>(tr.encoder.size()) - 1; t >= 0; --t) {
    const auto& cache = tr.encoder[static_cast<std::size_t>(t)];
    auto step = lstm_step_backward(params.encoder, cache, dh, dc, grads.encoder);
    grads.encoder.input_weights.noalias() += step.gates * cache.x.transpose();
    dh = std::move(step.d_state.h);
    dc = std::move(step.d_state.c);
  }
  return loss.terms;
}

double loss_value(const ModelParams<double>& params, const Sample& sample,
                  const LossWeights& weights) {
  Trace tr = forward_trace(params, sample.input, weights.mode == LossMode::kTrajAutoEnc);
  return composite_loss(tr.outputs, sample, weights).terms.total;
}

}  // namespace bbtraj
