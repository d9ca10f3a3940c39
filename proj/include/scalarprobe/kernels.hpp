#pragma once

// Data-parallel inner loops. Each kernel has an OpenMP version used by the
// library and a plain serial version under kernels::reference kept for
// tests and benchmarks.
//
// The parallel versions split rows into fixed blocks of kBlockRows, reduce
// each block independently and sum the block partials in block order, so
// results do not depend on the thread count.

#include "scalarprobe/embedding_store.hpp"
#include "scalarprobe/metrics.hpp"

namespace scalarprobe::kernels {

inline constexpr Eigen::Index kBlockRows = 64;

// J(W, b) = -(1/n) sum_i sum_c Y_ic log softmax(W x_i + b)_c + (lambda/2) ||W||_F^2
struct SoftmaxObjective {
  double value = 0.0;
  Matrix grad_w;  // classes x features
  Vector grad_b;  // classes
};

// x: n x d, y: n x classes, w: classes x d, b: classes.
SoftmaxObjective softmax_objective(const Matrix& x, const Matrix& y, const Matrix& w, const Vector& b,
                                   double lambda);

// Row-wise softmax(W x_i + b), max-subtracted.
Matrix softmax_predict(const Matrix& x, const Matrix& w, const Vector& b);

struct MetricSums {
  double correct = 0.0;
  double mse = 0.0;
  double emd = 0.0;
  Eigen::Index n = 0;
};

// Sums accuracy / MSE / unnormalized EMD over paired rows of n x 12 matrices.
MetricSums metric_sums(const Matrix& predicted, const Matrix& truth, MseVariant variant = MseVariant::kDensity);

namespace reference {

SoftmaxObjective softmax_objective(const Matrix& x, const Matrix& y, const Matrix& w, const Vector& b,
                                   double lambda);
Matrix softmax_predict(const Matrix& x, const Matrix& w, const Vector& b);
MetricSums metric_sums(const Matrix& predicted, const Matrix& truth, MseVariant variant = MseVariant::kDensity);

}  // namespace reference
}  // namespace scalarprobe::kernels
