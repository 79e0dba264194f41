#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "dpfair/core.hpp"
#include "dpfair/mechanisms.hpp"

namespace dpfair {

/// Post-processing applied to each noisy release.
enum class PostProcessing {
  ProjectSum,        // pi_S
  ProjectSumNonneg,  // pi_{S+}
  ReluProjectSum,    // [pi_S]_+
  Relu,              // [x~]_+
};

std::string_view to_string(PostProcessing post) noexcept;

/// How per-entity bias is estimated from the trials.
///
/// Plain averages post(x~) - x. ControlVariate averages post(x~) - base(x~),
/// where base is pi_S(x~) (or x~ for Relu) whose expectation is known in
/// closed form, and adds that known offset back. Both are unbiased; the
/// control variate removes the O(scale) per-trial noise that does not come
/// from clamping.
enum class BiasEstimator { ControlVariate, Plain };

struct AuditOptions {
  unsigned threads = 0;  // 0 = hardware concurrency
  BiasEstimator estimator = BiasEstimator::ControlVariate;
};

/// Per-entity Monte-Carlo bias in user order.
struct BiasReport {
  std::vector<double> per_entity_bias{};
  std::vector<double> per_entity_stderr{};
  double alpha_fairness = 0.0;
  /// Standard error of the extremal-pair difference, measured per trial.
  double alpha_stderr = 0.0;
  std::size_t argmax = 0;
  std::size_t argmin = 0;
  std::uint64_t trials = 0;
  NoiseSpec mechanism;
  PostProcessing post = PostProcessing::ProjectSumNonneg;
  BiasEstimator estimator = BiasEstimator::ControlVariate;
  std::optional<double> lower_bound{};
  std::optional<double> upper_bound{};
};

enum class BoundsMethod { GaussianAnalytic, MonteCarloEmpirical };

std::string_view to_string(BoundsMethod method) noexcept;

/// Lower/upper bounds on the alpha-fairness of pi_{S+}. Entity "first" is
/// the smallest true count and "last" the largest.
struct BoundsReport {
  double lower = 0.0;
  double upper = 0.0;
  double relu_bias_first = 0.0;
  double relu_bias_last = 0.0;
  double expected_negparts = 0.0;
  double data_range = 0.0;
  BoundsMethod method = BoundsMethod::GaussianAnalytic;
  std::size_t first_entity = 0;
  std::size_t last_entity = 0;
  // Monte-Carlo only.
  double lower_stderr = 0.0;
  double upper_stderr = 0.0;
  std::uint64_t trials = 0;
  // Gaussian only: the integral lies in [bracket_low, bracket_high].
  std::optional<double> bracket_low;
  std::optional<double> bracket_high;
};

/// Monte-Carlo bias of `post` applied to releases of `dataset`. Requires
/// trials >= 100.
BiasReport estimate_bias(const TrueDataset& dataset, const NoiseSpec& spec,
                         PostProcessing post, std::uint64_t trials,
                         std::uint64_t master_seed, AuditOptions options = {});

/// Closed-form bounds under Gaussian noise with standard deviation sigma.
BoundsReport bounds_gaussian(const TrueDataset& dataset, double sigma);

/// Monte-Carlo bounds for any mechanism. Requires trials >= 10^4.
BoundsReport bounds_empirical(const TrueDataset& dataset, const NoiseSpec& spec,
                              std::uint64_t trials, std::uint64_t master_seed,
                              unsigned threads = 0);

/// One pair (i, j) with x_i <= x_j, indices in user order. Each margin is
/// the estimated slack of one inequality; it passes when
/// margin + 4 * stderr >= 0.
struct PairCheck {
  std::size_t i = 0;
  std::size_t j = 0;
  double projected_bias_diff = 0.0;  // B(pi_S+)_i - B(pi_S+)_j
  double relu_bias_diff = 0.0;       // B([pi_S]_+)_i - B([pi_S]_+)_j
  double data_gap = 0.0;             // x_j - x_i
  double lower_margin = 0.0;         // projected - relu
  double lower_stderr = 0.0;
  double upper_margin = 0.0;         // relu + E[T] - projected
  double upper_stderr = 0.0;
  double gap_margin = 0.0;           // data_gap - projected
  double gap_stderr = 0.0;
  bool lower_holds = false;
  bool upper_holds = false;
  bool gap_holds = false;
};

struct BiasDifferenceDiagnostics {
  std::vector<PairCheck> pairs;
  double expected_threshold = 0.0;
  double expected_threshold_stderr = 0.0;
  std::uint64_t trials = 0;
  bool all_hold = true;
};

/// Statistical checks of the pairwise bias-difference inequalities for
/// pi_{S+}. Requires trials >= 10^4 and n <= 256.
BiasDifferenceDiagnostics bias_difference_checks(const TrueDataset& dataset,
                                                 const NoiseSpec& spec,
                                                 std::uint64_t trials,
                                                 std::uint64_t master_seed,
                                                 unsigned threads = 0);

/// Significance multiplier for every statistical inequality check.
inline constexpr double kSignificanceSigmas = 4.0;

}  // namespace dpfair
