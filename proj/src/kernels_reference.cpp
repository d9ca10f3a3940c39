#include "scalarprobe/error.hpp"
#include "scalarprobe/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace scalarprobe::kernels::reference {

SoftmaxObjective softmax_objective(const Matrix& x, const Matrix& y, const Matrix& w, const Vector& b,
                                   double lambda) {
  if (y.rows() != x.rows() || w.cols() != x.cols() || w.rows() != y.cols() || b.size() != w.rows()) {
    throw ValidationError("softmax_objective: shape mismatch");
  }
  const auto n = static_cast<double>(x.rows());
  Matrix z = x * w.transpose();
  z.rowwise() += b.transpose();
  Vector row_max = z.rowwise().maxCoeff();
  Matrix shifted = z.colwise() - row_max;
  Vector lse = row_max + shifted.array().exp().rowwise().sum().log().matrix();
  Matrix log_p = z.colwise() - lse;
  Matrix p = log_p.array().exp();

  SoftmaxObjective out;
  out.value = -(y.array() * log_p.array()).sum() / n + 0.5 * lambda * w.squaredNorm();
  Matrix r = p.array().colwise() * y.rowwise().sum().array();
  r -= y;
  out.grad_w = r.transpose() * x / n + lambda * w;
  out.grad_b = r.colwise().sum().transpose() / n;
  return out;
}

Matrix softmax_predict(const Matrix& x, const Matrix& w, const Vector& b) {
  Matrix z = x * w.transpose();
  z.rowwise() += b.transpose();
  Vector row_max = z.rowwise().maxCoeff();
  Matrix e = (z.colwise() - row_max).array().exp();
  Vector sums = e.rowwise().sum();
  return e.array().colwise() / sums.array();
}

MetricSums metric_sums(const Matrix& predicted, const Matrix& truth, MseVariant variant) {
  if (predicted.rows() != truth.rows() || predicted.cols() != kNumBuckets || truth.cols() != kNumBuckets) {
    throw ValidationError("metric_sums: expected paired n x 12 matrices");
  }
  MetricSums s;
  for (Eigen::Index i = 0; i < predicted.rows(); ++i) {
    const double* p = predicted.row(i).data();
    const double* q = truth.row(i).data();
    // std::max_element returns the first maximum, i.e. the lowest label.
    auto ap = std::max_element(p, p + kNumBuckets) - p;
    auto aq = std::max_element(q, q + kNumBuckets) - q;
    s.correct += ap == aq ? 1.0 : 0.0;

    double cdf_p[kNumBuckets];
    double cdf_q[kNumBuckets];
    std::partial_sum(p, p + kNumBuckets, cdf_p);
    std::partial_sum(q, q + kNumBuckets, cdf_q);
    double sq = 0.0;
    double moved = 0.0;
    for (int k = 0; k < kNumBuckets; ++k) {
      double diff = variant == MseVariant::kDensity ? p[k] - q[k] : cdf_p[k] - cdf_q[k];
      sq += diff * diff;
      if (k + 1 < kNumBuckets) moved += std::abs(cdf_p[k] - cdf_q[k]);
    }
    s.mse += sq / kNumBuckets;
    s.emd += moved;
    ++s.n;
  }
  return s;
}

}  // namespace scalarprobe::kernels::reference
