#pragma once

#include <string>

#include <Eigen/Core>

#include "bbtraj/errors.hpp"

namespace bbtraj {

// Row-major dense storage throughout; weights are (out x in).
template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

inline std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

template <typename A, typename B>
void require_same_shape(const A& a, const B& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": shape " + shape_string(a.rows(), a.cols()) +
                         " does not match " + shape_string(b.rows(), b.cols()));
  }
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  return x.allFinite();
}

}  // namespace bbtraj
