#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "shotdirector/curation.hpp"

namespace shotdirector {

double sigmoid(double x);

/// max over frames of sigmoid(logit). Throws DomainError on empty or
/// non-finite input.
double transition_confidence(std::span<const double> logits);

/// Prediction categories: the four transition types plus "no transition".
enum class PredictedType { ShotReverseShot, CutIn, CutOut, MultiAngle, NoTransition };

inline constexpr std::array<PredictedType, 5> kPredictedTypes = {
    PredictedType::ShotReverseShot, PredictedType::CutIn, PredictedType::CutOut, PredictedType::MultiAngle,
    PredictedType::NoTransition};

const char* to_string(PredictedType t);
std::optional<PredictedType> parse_predicted_type(const std::string& s);
PredictedType as_predicted(TransitionType t);

struct TypedPrediction {
  std::string clip_id;
  PredictedType predicted;
  TransitionType ground_truth;
};

double type_accuracy(std::span<const TypedPrediction> preds);

/// Counts per category in kPredictedTypes order; sums to preds.size().
std::array<std::size_t, 5> type_distribution(std::span<const TypedPrediction> preds);

struct ConsistencyScores {
  double semantic = 0.0;  // cosine of the two shot-level features
  double visual = 0.0;    // mean over adjacent pairs of (subject + background) / 2
};

ConsistencyScores consistency_scores(std::span<const double> semantic_a, std::span<const double> semantic_b,
                                     std::span<const double> subject_sims, std::span<const double> background_sims);

/// Rows are samples, columns are feature dimensions.
using FeatureSet = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Negative eigenvalues down to -kPsdTolerance * max(1, largest) are
/// treated as rounding and clamped to zero; anything below is an error.
inline constexpr double kPsdTolerance = 1e-8;

Eigen::VectorXd sample_mean(const FeatureSet& x);
/// Unbiased sample covariance.
Eigen::MatrixXd sample_covariance(const FeatureSet& x);

/// Trace of the principal square root of A*B for symmetric PSD A and B,
/// computed as sum sqrt(eig(sqrt(A) B sqrt(A))).
double trace_sqrt_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Fréchet distance between Gaussians fitted to two feature sets:
/// |mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a S_b)^(1/2)).
double frechet_distance(const FeatureSet& a, const FeatureSet& b);

}  // namespace shotdirector
