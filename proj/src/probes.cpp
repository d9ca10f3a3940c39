#include "scalarprobe/probes.hpp"

#include "scalarprobe/error.hpp"
#include "scalarprobe/kernels.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <deque>

namespace scalarprobe {
namespace {

constexpr int kHistory = 10;
constexpr double kArmijo = 1e-4;
constexpr int kMaxConsecutiveIncreases = 10;

// Parameters are packed as [row-major W ; b].
struct Packing {
  Eigen::Index classes;
  Eigen::Index features;

  Eigen::Index size() const { return classes * features + classes; }
  Matrix weights(const Vector& theta) const {
    return Eigen::Map<const Matrix>(theta.data(), classes, features);
  }
  Vector intercepts(const Vector& theta) const { return theta.tail(classes); }
  Vector pack(const Matrix& w, const Vector& b) const {
    Vector theta(size());
    Eigen::Map<Matrix>(theta.data(), classes, features) = w;
    theta.tail(classes) = b;
    return theta;
  }
};

void require_finite(const Matrix& x, const char* what) {
  if (!x.allFinite()) throw ValidationError(std::string(what) + ": non-finite input");
}

nlohmann::json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector json_vec(const nlohmann::json& j) {
  auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

nlohmann::json mat_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec_json(m.row(r).transpose()));
  return rows;
}

Matrix json_mat(const nlohmann::json& j) {
  if (!j.is_array()) throw ValidationError("expected a matrix (array of rows)");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    Vector v = json_vec(j.at(r));
    if (v.size() != cols) throw ValidationError("ragged matrix in probe file");
    m.row(r) = v.transpose();
  }
  return m;
}

}  // namespace

RgrProbe train_rgr(const Matrix& x, const Vector& y, double lambda, bool fit_intercept) {
  if (x.rows() < 1 || x.rows() != y.size()) throw ValidationError("train_rgr: need n >= 1 rows matching y");
  require_finite(x, "train_rgr");
  if (!y.allFinite() || !std::isfinite(lambda) || lambda < 0) throw ValidationError("train_rgr: non-finite input");

  RgrProbe probe;
  probe.lambda = lambda;
  Vector x_mean = Vector::Zero(x.cols());
  double y_mean = 0.0;
  if (fit_intercept) {
    x_mean = x.colwise().mean().transpose();
    y_mean = y.mean();
  }
  Matrix xc = x.rowwise() - x_mean.transpose();
  Vector yc = y.array() - y_mean;

  Eigen::MatrixXd gram = xc.transpose() * xc;
  gram.diagonal().array() += lambda;
  probe.weights = gram.ldlt().solve(xc.transpose() * yc);
  probe.intercept = fit_intercept ? y_mean - x_mean.dot(probe.weights) : 0.0;
  if (!probe.weights.allFinite() || !std::isfinite(probe.intercept)) {
    throw ValidationError("train_rgr: singular system (lambda = 0 with rank-deficient features?)");
  }
  return probe;
}

double predict_rgr(const RgrProbe& probe, const Vector& x) {
  if (x.size() != probe.weights.size()) throw ValidationError("predict_rgr: length mismatch");
  return probe.weights.dot(x) + probe.intercept;
}

EmpiricalDistribution rgr_to_bucket(double estimate, const BucketScheme& scheme) {
  return EmpiricalDistribution::point_mass(scheme, scheme.label_for_log10(estimate));
}

MccProbe train_mcc(const Matrix& x, const Matrix& y, const BucketScheme& scheme, double lambda,
                   const TrainConfig& config, MccTrainInfo* info) {
  if (x.rows() < 1 || y.rows() != x.rows()) throw ValidationError("train_mcc: need n >= 1 rows matching y");
  if (y.cols() != scheme.count()) throw ValidationError("train_mcc: soft labels must have one column per bucket");
  require_finite(x, "train_mcc");
  require_finite(y, "train_mcc");
  if (!std::isfinite(lambda) || lambda < 0) throw ValidationError("train_mcc: lambda must be finite and >= 0");
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    if ((y.row(i).array() < 0).any() || std::abs(y.row(i).sum() - 1.0) > 1e-9) {
      throw ValidationError("train_mcc: soft-label row " + std::to_string(i) + " is not a distribution");
    }
  }

  const Packing pack{y.cols(), x.cols()};
  auto evaluate = [&](const Vector& theta, Vector& grad) {
    auto obj = kernels::softmax_objective(x, y, pack.weights(theta), pack.intercepts(theta), lambda);
    grad = pack.pack(obj.grad_w, obj.grad_b);
    return obj.value;
  };

  MccTrainInfo local;
  Vector theta = Vector::Zero(pack.size());
  Vector grad;
  double f = evaluate(theta, grad);
  local.objective_trace.push_back(f);

  std::deque<std::pair<Vector, Vector>> history;  // (s, y) pairs
  int increases = 0;
  Vector theta_new;
  Vector grad_new;
  for (local.iterations = 0; local.iterations < config.max_iters; ++local.iterations) {
    if (grad.lpNorm<Eigen::Infinity>() < config.grad_tolerance) break;

    // Two-loop recursion.
    Vector dir = -grad;
    std::vector<double> alpha(history.size());
    for (std::size_t k = history.size(); k-- > 0;) {
      const auto& [s, yk] = history[k];
      alpha[k] = s.dot(dir) / yk.dot(s);
      dir -= alpha[k] * yk;
    }
    if (!history.empty()) {
      const auto& [s, yk] = history.back();
      dir *= s.dot(yk) / yk.squaredNorm();
    } else {
      dir /= std::max(1.0, grad.norm());
    }
    for (std::size_t k = 0; k < history.size(); ++k) {
      const auto& [s, yk] = history[k];
      double beta = yk.dot(dir) / yk.dot(s);
      dir += (alpha[k] - beta) * s;
    }
    double slope = grad.dot(dir);
    if (!(slope < 0)) {
      history.clear();
      dir = -grad / std::max(1.0, grad.norm());
      slope = grad.dot(dir);
    }

    double step = 1.0;
    double f_new = 0.0;
    bool accepted = false;
    while (step > 1e-20) {
      theta_new = theta + step * dir;
      f_new = evaluate(theta_new, grad_new);
      if (std::isfinite(f_new) && f_new <= f + kArmijo * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no further decrease representable

    Vector s = theta_new - theta;
    Vector yk = grad_new - grad;
    if (s.dot(yk) > 1e-12 * s.norm() * yk.norm()) {
      history.emplace_back(std::move(s), std::move(yk));
      if (history.size() > kHistory) history.pop_front();
    }
    increases = f_new > f ? increases + 1 : 0;
    if (increases >= kMaxConsecutiveIncreases) throw TrainingError("train_mcc: objective diverged");
    theta.swap(theta_new);
    grad.swap(grad_new);
    f = f_new;
    local.objective_trace.push_back(f);
  }

  local.objective = f;
  local.grad_inf_norm = grad.lpNorm<Eigen::Infinity>();
  local.converged = local.grad_inf_norm < config.grad_tolerance;

  MccProbe probe;
  probe.scheme = scheme;
  probe.weights = pack.weights(theta);
  probe.intercepts = pack.intercepts(theta);
  probe.lambda = lambda;
  if (!probe.weights.allFinite() || !probe.intercepts.allFinite()) throw TrainingError("train_mcc: non-finite parameters");
  if (info != nullptr) *info = std::move(local);
  return probe;
}

EmpiricalDistribution predict_mcc(const MccProbe& probe, const Vector& x) {
  if (x.size() != probe.weights.cols()) throw ValidationError("predict_mcc: length mismatch");
  Vector z = probe.weights * x + probe.intercepts;
  z.array() -= z.maxCoeff();
  z = z.array().exp();
  z /= z.sum();
  Probs p{};
  for (int i = 0; i < kNumBuckets; ++i) p[i] = z[i];
  return {probe.scheme, p, 1};
}

Matrix predict_mcc(const MccProbe& probe, const Matrix& x) {
  if (x.cols() != probe.weights.cols()) throw ValidationError("predict_mcc: length mismatch");
  return kernels::softmax_predict(x, probe.weights, probe.intercepts);
}

std::string_view to_string(ProbeKind kind) { return kind == ProbeKind::kRgr ? "rgr" : "mcc"; }

ProbeKind parse_probe_kind(std::string_view s) {
  if (s == "rgr") return ProbeKind::kRgr;
  if (s == "mcc") return ProbeKind::kMcc;
  throw ValidationError("unknown probe kind '" + std::string(s) + "'");
}

FeaturePipeline FeaturePipeline::fit(const Matrix& train_x, const TrainConfig& config) {
  FeaturePipeline fp;
  Matrix z = train_x;
  if (config.standardize) {
    fp.standardizer = Standardizer::fit(train_x);
    z = fp.standardizer->apply(train_x);
  }
  if (train_x.rows() < config.pca_threshold && train_x.cols() > config.pca_k && train_x.rows() >= 2) {
    int k = std::min<int>(config.pca_k, static_cast<int>(train_x.rows()) - 1);
    fp.pca = fit_pca(z, k);
  }
  return fp;
}

Matrix FeaturePipeline::transform(const Matrix& x) const {
  Matrix z = standardizer ? standardizer->apply(x) : x;
  return pca ? apply_pca(*pca, z) : z;
}

Vector FeaturePipeline::transform(const Vector& x) const {
  Vector z = standardizer ? standardizer->apply(x) : x;
  return pca ? apply_pca(*pca, z) : z;
}

EmpiricalDistribution ProbeModel::predict(const Vector& raw) const {
  Vector z = features.transform(raw);
  if (kind == ProbeKind::kRgr) return rgr_to_bucket(predict_rgr(*rgr, z), scheme);
  return predict_mcc(*mcc, z);
}

Matrix ProbeModel::predict(const Matrix& raw) const {
  Matrix z = features.transform(raw);
  if (kind == ProbeKind::kMcc) return predict_mcc(*mcc, z);
  Matrix out = Matrix::Zero(z.rows(), kNumBuckets);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    out(i, scheme.index_of(scheme.label_for_log10(predict_rgr(*rgr, z.row(i).transpose())))) = 1.0;
  }
  return out;
}

double ProbeModel::predict_log10(const Vector& raw) const {
  if (kind != ProbeKind::kRgr) throw ValidationError("point estimates are only defined for rgr probes");
  return predict_rgr(*rgr, features.transform(raw));
}

ProbeModel fit_probe(ProbeKind kind, const TrainingSet& train, const BucketScheme& scheme, double lambda,
                     const TrainConfig& config) {
  if (train.x.rows() < 1) throw ValidationError("fit_probe: empty training set");
  ProbeModel model;
  model.kind = kind;
  model.scheme = scheme;
  model.lambda = lambda;
  model.features = FeaturePipeline::fit(train.x, config);
  Matrix z = model.features.transform(train.x);
  if (kind == ProbeKind::kRgr) {
    if (train.log_medians.size() != train.x.rows()) throw ValidationError("fit_probe: missing rgr targets");
    model.rgr = train_rgr(z, train.log_medians, lambda);
  } else {
    if (static_cast<Eigen::Index>(train.targets.size()) != train.x.rows()) {
      throw ValidationError("fit_probe: missing mcc targets");
    }
    Matrix y(z.rows(), kNumBuckets);
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const auto& d = train.targets[static_cast<std::size_t>(i)];
      if (!(d.scheme() == scheme)) throw ValidationError("fit_probe: target scheme differs from probe scheme");
      for (int c = 0; c < kNumBuckets; ++c) y(i, c) = d.probs()[c];
    }
    model.mcc = train_mcc(z, y, scheme, lambda, config, &model.mcc_info);
  }
  return model;
}

nlohmann::json to_json(const ProbeModel& model) {
  nlohmann::json j;
  j["kind"] = std::string(to_string(model.kind));
  j["lambda"] = model.lambda;
  j["scheme"] = {{"base", model.scheme.base()}, {"min_exp", model.scheme.min_exp()}, {"count", model.scheme.count()}};
  if (model.features.standardizer) {
    j["standardizer"] = {{"mean", vec_json(model.features.standardizer->mean)},
                         {"std", vec_json(model.features.standardizer->scale)}};
  } else {
    j["standardizer"] = nullptr;
  }
  if (model.features.pca) {
    j["pca"] = {{"k", model.features.pca->k()},
                {"mean", vec_json(model.features.pca->mean)},
                {"components", mat_json(model.features.pca->components)}};
  }
  if (model.kind == ProbeKind::kRgr) {
    j["weights"] = vec_json(model.rgr->weights);
    j["intercept"] = model.rgr->intercept;
  } else {
    j["weights"] = mat_json(model.mcc->weights);
    j["intercepts"] = vec_json(model.mcc->intercepts);
    j["training"] = {{"objective", model.mcc_info.objective},
                     {"grad_inf_norm", model.mcc_info.grad_inf_norm},
                     {"iterations", model.mcc_info.iterations},
                     {"converged", model.mcc_info.converged}};
  }
  return j;
}

ProbeModel probe_from_json(const nlohmann::json& j) {
  try {
    ProbeModel model;
    model.kind = parse_probe_kind(j.at("kind").get<std::string>());
    model.lambda = j.at("lambda").get<double>();
    const auto& s = j.at("scheme");
    model.scheme = BucketScheme(s.at("base").get<int>(), s.at("min_exp").get<int>(), s.at("count").get<int>());
    if (j.contains("standardizer") && !j["standardizer"].is_null()) {
      model.features.standardizer = Standardizer{json_vec(j["standardizer"].at("mean")),
                                                 json_vec(j["standardizer"].at("std"))};
    }
    if (j.contains("pca") && !j["pca"].is_null()) {
      model.features.pca = PcaProjection{json_vec(j["pca"].at("mean")), json_mat(j["pca"].at("components"))};
    }
    if (model.kind == ProbeKind::kRgr) {
      model.rgr = RgrProbe{json_vec(j.at("weights")), j.at("intercept").get<double>(), model.lambda};
    } else {
      MccProbe mcc;
      mcc.scheme = model.scheme;
      mcc.weights = json_mat(j.at("weights"));
      mcc.intercepts = json_vec(j.at("intercepts"));
      mcc.lambda = model.lambda;
      if (mcc.weights.rows() != kNumBuckets || mcc.intercepts.size() != kNumBuckets) {
        throw ValidationError("mcc probe needs 12 weight rows and 12 intercepts");
      }
      model.mcc = std::move(mcc);
      if (j.contains("training")) {
        const auto& t = j["training"];
        model.mcc_info.objective = t.value("objective", 0.0);
        model.mcc_info.grad_inf_norm = t.value("grad_inf_norm", 0.0);
        model.mcc_info.iterations = t.value("iterations", 0);
        model.mcc_info.converged = t.value("converged", false);
      }
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed probe file: ") + e.what());
  }
}

}  // namespace scalarprobe
