#pragma once

// The bounding-box forecaster: an LSTM auto-encoder over the observed window,
// an LSTM future decoder emitting per-frame box deltas, and a parameter-free
// cumulative-sum layer turning deltas into absolute future boxes.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bbtraj/adam.hpp"
#include "bbtraj/kernels.hpp"

namespace bbtraj {

inline constexpr int kFeatureDim = 8;  // cx, cy, w, h, dcx, dcy, dw, dh
inline constexpr int kBoxDim = 4;      // cx, cy, w, h

/// One detection in pixels.
struct Box {
  double cx = 0;
  double cy = 0;
  double w = 1;
  double h = 1;
  std::int64_t frame = 0;

  Eigen::Vector4d values() const { return {cx, cy, w, h}; }
};

/// k x 8 model input.
struct FeatureWindow {
  Matrix<double> rows;

  Eigen::Index length() const { return rows.rows(); }
  /// (cx, cy, w, h) of the last observed frame; the trajectory anchor.
  Eigen::Vector4d anchor() const;
};

/// p x 4 per-frame changes (dcx, dcy, dw, dh).
struct DeltaSequence {
  Matrix<double> rows;
  Eigen::Index length() const { return rows.rows(); }
};

/// p x 4 absolute boxes (cx, cy, w, h).
struct BoxSequence {
  Matrix<double> rows;
  Eigen::Index length() const { return rows.rows(); }
};

/// How the future decoder's initial state is taken from the encoder.
enum class DecoderInit : std::uint32_t {
  kFullState = 0,   // copy h and c
  kHiddenOnly = 1,  // copy h, zero c
};

struct ModelConfig {
  int k = 30;         // observed frames
  int p = 60;         // predicted frames
  int hidden = 512;   // LSTM width, shared by all three LSTMs
  int latent = 256;   // width of the encoder summary vector
  DecoderInit decoder_init = DecoderInit::kFullState;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Number of learnable scalars for a configuration (two bias vectors per LSTM).
std::size_t parameter_count(const ModelConfig& cfg);

template <typename T>
struct ModelParams {
  ModelConfig config;
  LstmCellParams<T> encoder;         // input 8
  Linear<T> encoder_fc;              // hidden -> latent, fed by ReLU(h_k)
  LstmCellParams<T> auto_decoder;    // input latent, reproduces the reversed window
  Linear<T> auto_decoder_fc;         // hidden -> 8
  LstmCellParams<T> future_decoder;  // input latent, starts from the encoder state
  Linear<T> future_decoder_fc;       // hidden -> 4

  static ModelParams zeros(const ModelConfig& cfg);
  /// LSTM tensors uniform on +-1/sqrt(hidden), FC weights uniform on
  /// +-1/sqrt(fan_in), all biases zero.
  static ModelParams initialized(const ModelConfig& cfg, std::uint64_t seed);

  /// Visits every tensor in the fixed serialization order with (name, tensor).
  template <typename F>
  void for_each_tensor(F&& f) {
    visit_lstm("encoder", encoder, f);
    visit_linear("encoder_fc", encoder_fc, f);
    visit_lstm("auto_decoder", auto_decoder, f);
    visit_linear("auto_decoder_fc", auto_decoder_fc, f);
    visit_lstm("future_decoder", future_decoder, f);
    visit_linear("future_decoder_fc", future_decoder_fc, f);
  }
  template <typename F>
  void for_each_tensor(F&& f) const {
    const_cast<ModelParams*>(this)->for_each_tensor(
        [&f](const std::string& name, const auto& t) { f(name, t); });
  }

  std::size_t size() const;

  template <typename U>
  ModelParams<U> cast() const;

 private:
  template <typename F>
  static void visit_lstm(const std::string& prefix, LstmCellParams<T>& l, F& f) {
    f(prefix + ".input_weights", l.input_weights);
    f(prefix + ".recurrent_weights", l.recurrent_weights);
    f(prefix + ".input_bias", l.input_bias);
    f(prefix + ".recurrent_bias", l.recurrent_bias);
  }
  template <typename F>
  static void visit_linear(const std::string& prefix, Linear<T>& l, F& f) {
    f(prefix + ".weight", l.weight);
    f(prefix + ".bias", l.bias);
  }
};

/// Flat views of all parameter tensors, for the optimizer.
std::vector<ParamView> param_views(ModelParams<double>& params);
std::vector<GradView> grad_views(const ModelParams<double>& grads);

/// Concatenation of all tensors in serialization order, and its inverse.
Vector<double> flatten(const ModelParams<double>& params);
void unflatten(const Vector<double>& flat, ModelParams<double>& params);

// ---------------------------------------------------------------------------
// Feature construction

/// Rows (cx, cy, w, h, dcx, dcy, dw, dh); the first row's deltas are taken
/// against `predecessor` when given, else zero. Frames must be consecutive.
FeatureWindow build_features(std::span<const Box> boxes,
                             const std::optional<Box>& predecessor = std::nullopt);

/// The auto-decoder's target: rows reversed in time, delta columns negated.
FeatureWindow reconstruction_target(const FeatureWindow& window);

// ---------------------------------------------------------------------------
// Network blocks

template <typename T>
struct Encoding {
  Vector<T> latent;               // FC(ReLU(h_k))
  LstmCellState<T> final_state;   // raw encoder state after k steps
};

template <typename T>
Encoding<T> encode(const ModelParams<T>& params, const FeatureWindow& window);

/// Runs the auto-decoder k steps from a zero state on the constant input `latent`.
template <typename T>
FeatureWindow reconstruct(const ModelParams<T>& params, const Vector<T>& latent);

/// Runs the future decoder p steps on the constant input `latent`, starting
/// from the encoder's final state (see DecoderInit).
template <typename T>
DeltaSequence decode_future(const ModelParams<T>& params, const Vector<T>& latent,
                            const LstmCellState<T>& encoder_final);

/// Cumulative sum of deltas starting at `anchor`: out_1 = anchor + d_1,
/// out_i = out_{i-1} + d_i.
BoxSequence concat_trajectory(const DeltaSequence& deltas, const Eigen::Vector4d& anchor);

/// Gradient of a loss w.r.t. the deltas given its gradient w.r.t. the
/// concatenated boxes: suffix sums over time.
Matrix<double> concat_trajectory_backward(const Matrix<double>& d_boxes);

template <typename T>
struct ForwardOutputs {
  FeatureWindow reconstruction;  // k x 8
  DeltaSequence deltas;          // p x 4
  BoxSequence trajectory;        // p x 4
};

/// Both heads; the reconstruction head is what inference skips.
template <typename T>
ForwardOutputs<T> forward_train(const ModelParams<T>& params, const FeatureWindow& window);

/// Inference path: features, encoder, future decoder, concatenation.
template <typename T>
BoxSequence predict_window(const ModelParams<T>& params, const FeatureWindow& window);

/// Predicts p future boxes from exactly k consecutive past boxes.
template <typename T>
BoxSequence predict(const ModelParams<T>& params, std::span<const Box> past,
                    const std::optional<Box>& predecessor = std::nullopt);

/// Number of predicted boxes with non-positive width or height.
std::size_t count_nonpositive_sizes(const BoxSequence& boxes);

// ---------------------------------------------------------------------------
// Objective

/// Supervision variants: delta-level only, trajectory only, trajectory plus
/// auto-encoder reconstruction.
enum class LossMode { kTrajDelta, kTraj, kTrajAutoEnc };

std::string_view to_string(LossMode mode);
LossMode parse_loss_mode(std::string_view text);

struct LossWeights {
  double alpha = 1.0;  // auto-encoder term
  double beta = 2.0;   // trajectory (or delta) term
  LossMode mode = LossMode::kTrajAutoEnc;

  void validate() const;
};

/// One supervised example cut from a (k + p)-frame mini-track.
struct Sample {
  FeatureWindow input;          // k x 8
  BoxSequence future;           // p x 4 ground-truth boxes
  DeltaSequence future_deltas;  // p x 4 ground-truth per-frame changes
};

/// `future_deltas` row 0 is relative to the last past box.
Sample make_sample(std::span<const Box> past, std::span<const Box> future,
                   const std::optional<Box>& predecessor = std::nullopt);

/// Unweighted per-term L1 values; inactive terms are zero.
struct LossBreakdown {
  double total = 0;
  double auto_enc = 0;
  double traj = 0;
  double traj_delta = 0;
};

struct CompositeLoss {
  LossBreakdown terms;
  Matrix<double> d_reconstruction;  // k x 8, zero when the auto-encoder term is off
  Matrix<double> d_deltas;          // p x 4, includes the path through concatenation
};

/// Weighted objective on the model heads plus its gradient w.r.t. the
/// reconstruction and delta heads.
CompositeLoss composite_loss(const ForwardOutputs<double>& outputs, const Sample& sample,
                             const LossWeights& weights);

/// Forward + backward through the whole network. Gradients are added to
/// `grads` (same layout as `params`).
LossBreakdown loss_and_gradient(const ModelParams<double>& params, const Sample& sample,
                                const LossWeights& weights, ModelParams<double>& grads);

/// Forward-only objective value.
double loss_value(const ModelParams<double>& params, const Sample& sample,
                  const LossWeights& weights);

}  // namespace bbtraj
