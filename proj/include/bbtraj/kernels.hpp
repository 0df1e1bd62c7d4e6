#pragma once

// Dense building blocks of the forecaster: fully connected layers, ReLU, L1
// loss and a single LSTM cell with hand-written backward passes.

#include <cstdint>
#include <utility>

#include "bbtraj/tensor.hpp"

namespace bbtraj {

/// Returns W x + b.
template <typename T>
Vector<T> linear_forward(const Matrix<T>& weight, const Vector<T>& bias, const Vector<T>& x);

template <typename T>
struct Linear {
  Matrix<T> weight;  // out x in
  Vector<T> bias;    // out

  static Linear zeros(Eigen::Index out, Eigen::Index in) {
    return {Matrix<T>::Zero(out, in), Vector<T>::Zero(out)};
  }
  Eigen::Index out_features() const { return weight.rows(); }
  Eigen::Index in_features() const { return weight.cols(); }

  Vector<T> forward(const Vector<T>& x) const { return linear_forward(weight, bias, x); }

  /// Accumulates dW += dy x^T, db += dy into `grad` and returns W^T dy.
  Vector<T> backward(const Vector<T>& x, const Vector<T>& dy, Linear& grad) const;
};

template <typename T>
Vector<T> relu(const Vector<T>& x);

/// Gradient of relu at x applied to dy; the derivative at exactly 0 is taken as 0.
template <typename T>
Vector<T> relu_backward(const Vector<T>& x, const Vector<T>& dy);

template <typename T>
struct L1Result {
  T loss;
  Matrix<T> grad;
};

/// Mean absolute error over all entries. grad = sign(pred - target) / count, sign(0) = 0.
template <typename T>
L1Result<T> l1_loss(const Matrix<T>& pred, const Matrix<T>& target);

// Packed gate layout for every 4H tensor: rows [0,H) input gate, [H,2H) forget
// gate, [2H,3H) cell candidate, [3H,4H) output gate. The weight file format
// depends on this order.
enum class Gate : int { kInput = 0, kForget = 1, kCell = 2, kOutput = 3 };

template <typename T>
struct LstmCellParams {
  Matrix<T> input_weights;      // 4H x D
  Matrix<T> recurrent_weights;  // 4H x H
  Vector<T> input_bias;         // 4H
  Vector<T> recurrent_bias;     // 4H

  static LstmCellParams zeros(Eigen::Index hidden, Eigen::Index input) {
    return {Matrix<T>::Zero(4 * hidden, input), Matrix<T>::Zero(4 * hidden, hidden),
            Vector<T>::Zero(4 * hidden), Vector<T>::Zero(4 * hidden)};
  }
  Eigen::Index hidden_size() const { return recurrent_weights.cols(); }
  Eigen::Index input_size() const { return input_weights.cols(); }

  /// Rows of the packed tensor belonging to one gate.
  auto gate_rows(Gate g) { return Eigen::seqN(static_cast<int>(g) * hidden_size(), hidden_size()); }
};

template <typename T>
struct LstmCellState {
  Vector<T> h;
  Vector<T> c;

  static LstmCellState zeros(Eigen::Index hidden) {
    return {Vector<T>::Zero(hidden), Vector<T>::Zero(hidden)};
  }
};

/// Everything the backward pass needs from one forward step. Gate values are
/// post-activation. `x` is left empty when the caller supplied a precomputed
/// input projection.
template <typename T>
struct LstmCache {
  Vector<T> x;
  Vector<T> h_prev, c_prev;
  Vector<T> i, f, g, o;
  Vector<T> c, tanh_c;
};

/// W_x x + b_x; the part of the gate pre-activation that depends only on the input.
template <typename T>
Vector<T> lstm_input_projection(const LstmCellParams<T>& p, const Vector<T>& x);

/// One recurrence step from a precomputed input projection. Writes the cache if non-null.
template <typename T>
LstmCellState<T> lstm_step(const LstmCellParams<T>& p, const Vector<T>& input_projection,
                           const LstmCellState<T>& s, LstmCache<T>* cache);

template <typename T>
std::pair<LstmCellState<T>, LstmCache<T>> lstm_cell_forward(const LstmCellParams<T>& p,
                                                              const Vector<T>& x,
                                                              const LstmCellState<T>& s);

/// Recurrent half of the backward step: accumulates the recurrent weight and
/// both bias gradients, returns the gate pre-activation gradient and the
/// gradient w.r.t. the incoming state. Input-weight gradients are left to the
/// caller, which lets constant-input decoders sum gate gradients over time
/// before touching W_x.
template <typename T>
struct LstmStepGrad {
  Vector<T> gates;           // dL/d(pre-activation), 4H
  LstmCellState<T> d_state;  // dL/dh_prev, dL/dc_prev
};

template <typename T>
LstmStepGrad<T> lstm_step_backward(const LstmCellParams<T>& p, const LstmCache<T>& cache,
                                   const Vector<T>& dh, const Vector<T>& dc,
                                   LstmCellParams<T>& grads);

/// Accumulates dW_x += d_gates x^T and returns W_x^T d_gates. Bias gradients
/// are handled by lstm_step_backward.
template <typename T>
Vector<T> lstm_input_backward(const LstmCellParams<T>& p, const Vector<T>& x,
                              const Vector<T>& d_gates, LstmCellParams<T>& grads);

template <typename T>
struct LstmBackward {
  Vector<T> dx;
  LstmCellState<T> d_state;
};

/// Full backward step for a cache produced by lstm_cell_forward; parameter
/// gradients are added to `grads`.
template <typename T>
LstmBackward<T> lstm_cell_backward(const LstmCellParams<T>& p, const LstmCache<T>& cache,
                                   const Vector<T>& dh, const Vector<T>& dc,
                                   LstmCellParams<T>& grads);

}  // namespace bbtraj
