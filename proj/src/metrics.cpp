#include "shotdirector/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "shotdirector/errors.hpp"

namespace shotdirector {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double transition_confidence(std::span<const double> logits) {
  if (logits.empty()) throw DomainError("transition_confidence: empty logit sequence");
  double best = 0.0;
  for (double d : logits) {
    if (!std::isfinite(d)) throw DomainError("transition_confidence: non-finite logit");
    best = std::max(best, sigmoid(d));
  }
  return best;
}

const char* to_string(PredictedType t) {
  switch (t) {
    case PredictedType::ShotReverseShot: return "shot_reverse_shot";
    case PredictedType::CutIn: return "cut_in";
    case PredictedType::CutOut: return "cut_out";
    case PredictedType::MultiAngle: return "multi_angle";
    case PredictedType::NoTransition: return "no_transition";
  }
  return "?";
}

std::optional<PredictedType> parse_predicted_type(const std::string& s) {
  for (auto t : kPredictedTypes) {
    if (s == to_string(t)) return t;
  }
  return std::nullopt;
}

PredictedType as_predicted(TransitionType t) {
  switch (t) {
    case TransitionType::ShotReverseShot: return PredictedType::ShotReverseShot;
    case TransitionType::CutIn: return PredictedType::CutIn;
    case TransitionType::CutOut: return PredictedType::CutOut;
    case TransitionType::MultiAngle: return PredictedType::MultiAngle;
  }
  return PredictedType::NoTransition;
}

double type_accuracy(std::span<const TypedPrediction> preds) {
  if (preds.empty()) throw DomainError("type_accuracy: no predictions");
  std::size_t hits = 0;
  for (const auto& p : preds) hits += p.predicted == as_predicted(p.ground_truth) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

std::array<std::size_t, 5> type_distribution(std::span<const TypedPrediction> preds) {
  if (preds.empty()) throw DomainError("type_distribution: no predictions");
  std::array<std::size_t, 5> counts{};
  for (const auto& p : preds) ++counts[static_cast<std::size_t>(p.predicted)];
  return counts;
}

ConsistencyScores consistency_scores(std::span<const double> semantic_a, std::span<const double> semantic_b,
                                     std::span<const double> subject_sims, std::span<const double> background_sims) {
  if (semantic_a.size() != semantic_b.size() || semantic_a.empty()) {
    throw DomainError("consistency: semantic features must be nonempty and of equal dimension");
  }
  if (subject_sims.empty() || subject_sims.size() != background_sims.size()) {
    throw DomainError("consistency: subject and background similarity sequences must be nonempty and equal length");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < semantic_a.size(); ++i) {
    dot += semantic_a[i] * semantic_b[i];
    na += semantic_a[i] * semantic_a[i];
    nb += semantic_b[i] * semantic_b[i];
  }
  if (na == 0.0 || nb == 0.0) throw DomainError("consistency: zero-norm semantic feature vector");
  ConsistencyScores s;
  s.semantic = std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < subject_sims.size(); ++i) sum += (subject_sims[i] + background_sims[i]) / 2.0;
  s.visual = sum / static_cast<double>(subject_sims.size());
  return s;
}

Eigen::VectorXd sample_mean(const FeatureSet& x) {
  const auto n = x.rows(), dim = x.cols();
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) mu(j) += x(i, j);
  }
  return mu / static_cast<double>(n);
}

Eigen::MatrixXd sample_covariance(const FeatureSet& x) {
  const auto n = x.rows(), dim = x.cols();
  if (n < 2) throw DomainError("covariance needs at least two samples");
  const Eigen::VectorXd mu = sample_mean(x);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index a = 0; a < dim; ++a) {
      const double da = x(i, a) - mu(a);
      for (Eigen::Index b = a; b < dim; ++b) cov(a, b) += da * (x(i, b) - mu(b));
    }
  }
  for (Eigen::Index a = 0; a < dim; ++a) {
    for (Eigen::Index b = a; b < dim; ++b) {
      cov(a, b) /= static_cast<double>(n - 1);
      cov(b, a) = cov(a, b);
    }
  }
  return cov;
}

namespace {

Eigen::VectorXd clamped_eigenvalues(const Eigen::VectorXd& ev, const char* what) {
  const double scale = std::max(1.0, ev.maxCoeff());
  Eigen::VectorXd out = ev;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (out(i) < 0.0) {
      if (out(i) < -kPsdTolerance * scale) {
        throw std::runtime_error(std::string(what) + " is not positive semidefinite (eigenvalue " +
                                 std::to_string(out(i)) + ")");
      }
      out(i) = 0.0;
    }
  }
  return out;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& a) {
  const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  const Eigen::VectorXd ev = clamped_eigenvalues(es.eigenvalues(), "covariance");
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double trace_sqrt_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::MatrixXd root_a = psd_sqrt(a);
  Eigen::MatrixXd m = root_a * b * root_a;
  m = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  const Eigen::VectorXd ev = clamped_eigenvalues(es.eigenvalues(), "covariance product");
  double tr = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) tr += std::sqrt(ev(i));
  return tr;
}

double frechet_distance(const FeatureSet& a, const FeatureSet& b) {
  if (a.cols() != b.cols() || a.cols() == 0) {
    throw DomainError("frechet_distance: feature dimensions differ (" + std::to_string(a.cols()) + " vs " +
                      std::to_string(b.cols()) + ")");
  }
  if (a.rows() < 2 || b.rows() < 2) throw DomainError("frechet_distance: each set needs at least two samples");
  if (!a.allFinite() || !b.allFinite()) throw DomainError("frechet_distance: non-finite features");
  const Eigen::VectorXd mu_a = sample_mean(a), mu_b = sample_mean(b);
  const Eigen::MatrixXd cov_a = sample_covariance(a), cov_b = sample_covariance(b);
  const double mean_term = (mu_a - mu_b).squaredNorm();
  const double trace_term = cov_a.trace() + cov_b.trace() - 2.0 * trace_sqrt_product(cov_a, cov_b);
  return std::max(0.0, mean_term + trace_term);
}

}  // namespace shotdirector
