#include "bbtraj/kernels.hpp"

#include <cmath>

namespace bbtraj {

namespace {

template <typename T>
void require_vector_length(const Vector<T>& v, Eigen::Index n, const char* what) {
  if (v.size() != n) {
    throw DimensionError(std::string(what) + ": expected length " + std::to_string(n) + ", got " +
                         std::to_string(v.size()));
  }
}

template <typename T>
T sigmoid(T x) {
  // Split on sign so exp never overflows.
  if (x >= T(0)) {
    return T(1) / (T(1) + std::exp(-x));
  }
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

template <typename T>
Vector<T> linear_forward(const Matrix<T>& weight, const Vector<T>& bias, const Vector<T>& x) {
  if (weight.cols() != x.size() || weight.rows() != bias.size()) {
    throw DimensionError("linear_forward: weight " + shape_string(weight.rows(), weight.cols()) +
                         " incompatible with bias " + shape_string(bias.size(), 1) + " and input " +
                         shape_string(x.size(), 1));
  }
  Vector<T> y = weight * x;
  y += bias;
  return y;
}

template <typename T>
Vector<T> Linear<T>::backward(const Vector<T>& x, const Vector<T>& dy, Linear& grad) const {
  require_vector_length(dy, out_features(), "Linear::backward dy");
  require_vector_length(x, in_features(), "Linear::backward x");
  grad.weight.noalias() += dy * x.transpose();
  grad.bias += dy;
  return weight.transpose() * dy;
}

template <typename T>
Vector<T> relu(const Vector<T>& x) {
  return x.cwiseMax(T(0));
}

template <typename T>
Vector<T> relu_backward(const Vector<T>& x, const Vector<T>& dy) {
  require_same_shape(x, dy, "relu_backward");
  return (x.array() > T(0)).select(dy, Vector<T>::Zero(x.size()));
}

template <typename T>
L1Result<T> l1_loss(const Matrix<T>& pred, const Matrix<T>& target) {
  require_same_shape(pred, target, "l1_loss");
  const auto count = static_cast<T>(pred.size());
  if (pred.size() == 0) {
    return {T(0), Matrix<T>(pred.rows(), pred.cols())};
  }
  Matrix<T> diff = pred - target;
  T sum = 0;
  for (Eigen::Index r = 0; r < diff.rows(); ++r) {
    for (Eigen::Index c = 0; c < diff.cols(); ++c) {
      sum += std::abs(diff(r, c));
    }
  }
  Matrix<T> grad = diff.unaryExpr([count](T d) {
    return d > T(0) ? T(1) / count : (d < T(0) ? T(-1) / count : T(0));
  });
  return {sum / count, std::move(grad)};
}

template <typename T>
Vector<T> lstm_input_projection(const LstmCellParams<T>& p, const Vector<T>& x) {
  if (x.size() != p.input_size()) {
    throw DimensionError("lstm input: expected length " + std::to_string(p.input_size()) +
                         ", got " + std::to_string(x.size()));
  }
  Vector<T> proj = p.input_weights * x;
  proj += p.input_bias;
  return proj;
}

template <typename T>
LstmCellState<T> lstm_step(const LstmCellParams<T>& p, const Vector<T>& input_projection,
                           const LstmCellState<T>& s, LstmCache<T>* cache) {
  const Eigen::Index H = p.hidden_size();
  if (s.h.size() != H || s.c.size() != H) {
    throw DimensionError("lstm state: expected hidden size " + std::to_string(H) + ", got h=" +
                         std::to_string(s.h.size()) + " c=" + std::to_string(s.c.size()));
  }
  require_vector_length(input_projection, 4 * H, "lstm input projection");

  Vector<T> a = p.recurrent_weights * s.h;
  a += input_projection;
  a += p.recurrent_bias;

  LstmCellState<T> next{Vector<T>(H), Vector<T>(H)};
  Vector<T> i(H), f(H), g(H), o(H), tanh_c(H);
  for (Eigen::Index j = 0; j < H; ++j) {
    i[j] = sigmoid(a[j]);
    f[j] = sigmoid(a[H + j]);
    g[j] = std::tanh(a[2 * H + j]);
    o[j] = sigmoid(a[3 * H + j]);
    next.c[j] = f[j] * s.c[j] + i[j] * g[j];
    tanh_c[j] = std::tanh(next.c[j]);
    next.h[j] = o[j] * tanh_c[j];
  }
  if (cache != nullptr) {
    cache->h_prev = s.h;
    cache->c_prev = s.c;
    cache->i = std::move(i);
    cache->f = std::move(f);
    cache->g = std::move(g);
    cache->o = std::move(o);
    cache->c = next.c;
    cache->tanh_c = std::move(tanh_c);
  }
  return next;
}

template <typename T>
std::pair<LstmCellState<T>, LstmCache<T>> lstm_cell_forward(const LstmCellParams<T>& p,
                                                              const Vector<T>& x,
                                                              const LstmCellState<T>& s) {
  LstmCache<T> cache;
  auto next = lstm_step(p, lstm_input_projection(p, x), s, &cache);
  cache.x = x;
  return {std::move(next), std::move(cache)};
}

template <typename T>
LstmStepGrad<T> lstm_step_backward(const LstmCellParams<T>& p, const LstmCache<T>& cache,
                                   const Vector<T>& dh, const Vector<T>& dc,
                                   LstmCellParams<T>& grads) {
  const Eigen::Index H = p.hidden_size();
  if (cache.i.size() != H || cache.h_prev.size() != H) {
    throw std::logic_error("lstm_step_backward: cache does not match parameters");
  }
  require_vector_length(dh, H, "lstm backward dh");
  require_vector_length(dc, H, "lstm backward dc");

  Vector<T> da(4 * H);
  Vector<T> dc_prev(H);
  for (Eigen::Index j = 0; j < H; ++j) {
    const T i = cache.i[j], f = cache.f[j], g = cache.g[j], o = cache.o[j];
    const T tc = cache.tanh_c[j];
    const T dc_total = dc[j] + dh[j] * o * (T(1) - tc * tc);
    da[j] = dc_total * g * i * (T(1) - i);
    da[H + j] = dc_total * cache.c_prev[j] * f * (T(1) - f);
    da[2 * H + j] = dc_total * i * (T(1) - g * g);
    da[3 * H + j] = dh[j] * tc * o * (T(1) - o);
    dc_prev[j] = dc_total * f;
  }
  grads.recurrent_weights.noalias() += da * cache.h_prev.transpose();
  grads.recurrent_bias += da;
  grads.input_bias += da;
  Vector<T> dh_prev = p.recurrent_weights.transpose() * da;
  return {std::move(da), {std::move(dh_prev), std::move(dc_prev)}};
}

template <typename T>
Vector<T> lstm_input_backward(const LstmCellParams<T>& p, const Vector<T>& x,
                              const Vector<T>& d_gates, LstmCellParams<T>& grads) {
  require_vector_length(x, p.input_size(), "lstm backward x");
  require_vector_length(d_gates, 4 * p.hidden_size(), "lstm backward gates");
  grads.input_weights.noalias() += d_gates * x.transpose();
  return p.input_weights.transpose() * d_gates;
}

template <typename T>
LstmBackward<T> lstm_cell_backward(const LstmCellParams<T>& p, const LstmCache<T>& cache,
                                   const Vector<T>& dh, const Vector<T>& dc,
                                   LstmCellParams<T>& grads) {
  if (cache.x.size() != p.input_size()) {
    throw std::logic_error("lstm_cell_backward: cache has no input (projected step?)");
  }
  auto step = lstm_step_backward(p, cache, dh, dc, grads);
  Vector<T> dx = lstm_input_backward(p, cache.x, step.gates, grads);
  return {std::move(dx), std::move(step.d_state)};
}

#define BBTRAJ_INSTANTIATE_KERNELS(T)                                                          \
  template Vector<T> linear_forward(const Matrix<T>&, const Vector<T>&, const Vector<T>&);     \
  template struct Linear<T>;                                                                   \
  template Vector<T> relu(const Vector<T>&);                                                   \
  template Vector<T> relu_backward(const Vector<T>&, const Vector<T>&);                        \
  template L1Result<T> l1_loss(const Matrix<T>&, const Matrix<T>&);                            \
  template Vector<T> lstm_input_projection(const LstmCellParams<T>&, const Vector<T>&);        \
  template LstmCellState<T> lstm_step(const LstmCellParams<T>&, const Vector<T>&,              \
                                      const LstmCellState<T>&, LstmCache<T>*);                 \
  template std::pair<LstmCellState<T>, LstmCache<T>> lstm_cell_forward(                        \
      const LstmCellParams<T>&, const Vector<T>&, const LstmCellState<T>&);                    \
  template LstmStepGrad<T> lstm_step_backward(const LstmCellParams<T>&, const LstmCache<T>&,   \
                                              const Vector<T>&, const Vector<T>&,              \
                                              LstmCellParams<T>&);                             \
  template Vector<T> lstm_input_backward(const LstmCellParams<T>&, const Vector<T>&,           \
                                         const Vector<T>&, LstmCellParams<T>&);                \
  template LstmBackward<T> lstm_cell_backward(const LstmCellParams<T>&, const LstmCache<T>&,   \
                                              const Vector<T>&, const Vector<T>&,              \
                                              LstmCellParams<T>&);

BBTRAJ_INSTANTIATE_KERNELS(float)
BBTRAJ_INSTANTIATE_KERNELS(double)

#undef BBTRAJ_INSTANTIATE_KERNELS

}  // namespace bbtraj
