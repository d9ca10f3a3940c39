#include "scalarprobe/kernels.hpp"

#include "scalarprobe/error.hpp"

#include <omp.h>

#include <cmath>

namespace scalarprobe::kernels {
namespace {

Eigen::Index block_count(Eigen::Index n) { return (n + kBlockRows - 1) / kBlockRows; }

void check_shapes(const Matrix& x, const Matrix& y, const Matrix& w, const Vector& b) {
  if (y.rows() != x.rows() || w.cols() != x.cols() || w.rows() != y.cols() || b.size() != w.rows()) {
    throw ValidationError("softmax_objective: shape mismatch");
  }
}

// Max-subtracted log-softmax of z, in place; returns nothing, z becomes log p.
void log_softmax_inplace(Eigen::Ref<Vector> z) {
  const double m = z.maxCoeff();
  const double lse = m + std::log((z.array() - m).exp().sum());
  z.array() -= lse;
}

}  // namespace

SoftmaxObjective softmax_objective(const Matrix& x, const Matrix& y, const Matrix& w, const Vector& b,
                                   double lambda) {
  check_shapes(x, y, w, b);
  const Eigen::Index n = x.rows();
  const Eigen::Index classes = w.rows();
  const Eigen::Index d = x.cols();
  const Eigen::Index blocks = block_count(n);

  std::vector<double> loss(blocks, 0.0);
  std::vector<Matrix> gw(blocks);
  std::vector<Vector> gb(blocks);

#pragma omp parallel for schedule(static)
  for (Eigen::Index blk = 0; blk < blocks; ++blk) {
    Matrix local_w = Matrix::Zero(classes, d);
    Vector local_b = Vector::Zero(classes);
    Vector z(classes);
    double local_loss = 0.0;
    const Eigen::Index end = std::min(n, (blk + 1) * kBlockRows);
    for (Eigen::Index i = blk * kBlockRows; i < end; ++i) {
      z.noalias() = w * x.row(i).transpose();
      z += b;
      log_softmax_inplace(z);
      const auto yi = y.row(i).transpose();
      local_loss -= yi.dot(z);
      // d/dz of -sum_c y_c log p_c is p * sum(y) - y.
      Vector r = z.array().exp().matrix() * yi.sum() - yi;
      local_w.noalias() += r * x.row(i);
      local_b += r;
    }
    loss[blk] = local_loss;
    gw[blk] = std::move(local_w);
    gb[blk] = std::move(local_b);
  }

  SoftmaxObjective out;
  out.grad_w = Matrix::Zero(classes, d);
  out.grad_b = Vector::Zero(classes);
  double total = 0.0;
  for (Eigen::Index blk = 0; blk < blocks; ++blk) {
    total += loss[blk];
    out.grad_w += gw[blk];
    out.grad_b += gb[blk];
  }
  const double inv_n = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
  out.value = total * inv_n + 0.5 * lambda * w.squaredNorm();
  out.grad_w = out.grad_w * inv_n + lambda * w;
  out.grad_b *= inv_n;
  return out;
}

Matrix softmax_predict(const Matrix& x, const Matrix& w, const Vector& b) {
  if (w.cols() != x.cols() || b.size() != w.rows()) throw ValidationError("softmax_predict: shape mismatch");
  const Eigen::Index n = x.rows();
  Matrix out(n, w.rows());
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    Vector z = w * x.row(i).transpose() + b;
    log_softmax_inplace(z);
    out.row(i) = z.array().exp().matrix().transpose();
  }
  return out;
}

MetricSums metric_sums(const Matrix& predicted, const Matrix& truth, MseVariant variant) {
  if (predicted.rows() != truth.rows() || predicted.cols() != kNumBuckets || truth.cols() != kNumBuckets) {
    throw ValidationError("metric_sums: expected paired n x 12 matrices");
  }
  const Eigen::Index n = predicted.rows();
  const Eigen::Index blocks = block_count(n);
  std::vector<MetricSums> partial(blocks);

#pragma omp parallel for schedule(static)
  for (Eigen::Index blk = 0; blk < blocks; ++blk) {
    MetricSums s;
    const Eigen::Index end = std::min(n, (blk + 1) * kBlockRows);
    for (Eigen::Index i = blk * kBlockRows; i < end; ++i) {
      raw::Hist p(predicted.row(i).data(), kNumBuckets);
      raw::Hist q(truth.row(i).data(), kNumBuckets);
      s.correct += raw::argmax(p) == raw::argmax(q) ? 1.0 : 0.0;
      s.mse += variant == MseVariant::kDensity ? raw::density_mse(p, q) : raw::cdf_mse(p, q);
      s.emd += raw::emd(p, q);
      ++s.n;
    }
    partial[blk] = s;
  }
  MetricSums out;
  for (const auto& s : partial) {
    out.correct += s.correct;
    out.mse += s.mse;
    out.emd += s.emd;
    out.n += s.n;
  }
  return out;
}

}  // namespace scalarprobe::kernels
