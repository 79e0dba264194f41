#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dpfair/core.hpp"
#include "dpfair/mechanisms.hpp"

namespace dpfair {

/// Proportional allotment of a single budget over the dataset's entities.
class AllocationProblem {
public:
  /// Throws DegenerateProblemError when every weighted count is zero and
  /// ArgumentError unless budget > 0.
  AllocationProblem(TrueDataset dataset, double budget);

  const TrueDataset& dataset() const noexcept { return dataset_; }
  double budget() const noexcept { return budget_; }

private:
  TrueDataset dataset_;
  double budget_;
};

enum class AllocationMechanism { Baseline, ProjectionOntoSimplex };

std::string_view to_string(AllocationMechanism m) noexcept;

/// Output of a simplex-valued mechanism for one noisy release. `degenerate`
/// marks the uniform fallback used when the normalising sum is zero.
struct MechanismOutput {
  std::vector<double> allocation;
  bool degenerate = false;
};

struct AllocationReport {
  std::vector<double> per_entity_bias;  // shares, E[pi(x~)] - P(x)
  std::vector<double> per_entity_stderr;
  double alpha_fairness = 0.0;
  double alpha_stderr = 0.0;
  double cost_of_privacy = 0.0;  // currency
  double cost_of_privacy_stderr = 0.0;
  std::vector<double> misallocated_funds;  // bias * budget
  std::vector<double> true_allocation;
  std::uint64_t trials = 0;
  std::uint64_t degenerate_trials = 0;
  AllocationMechanism mechanism = AllocationMechanism::Baseline;
};

/// a_i x_i / sum_j a_j x_j. Throws DegenerateProblemError when the weighted
/// sum is not positive.
std::vector<double> true_allocation(const AllocationProblem& problem);

/// The same formula on noisy counts; entries may be negative. Empty optional
/// when the weighted sum is exactly zero.
std::optional<std::vector<double>> noisy_allocation(std::span<const double> noisy,
                                                    std::span<const double> weights);

/// a_i [x~_i]_+ / sum_j a_j [x~_j]_+, uniform fallback on a zero denominator.
MechanismOutput mechanism_bl(std::span<const double> noisy,
                             std::span<const double> weights);

/// Euclidean projection of the noisy allocation onto the probability
/// simplex, uniform fallback on a zero denominator.
MechanismOutput mechanism_pos(std::span<const double> noisy,
                              std::span<const double> weights);

/// Monte-Carlo audit of one mechanism. Requires trials >= 100.
AllocationReport allocation_audit(const AllocationProblem& problem,
                                  const NoiseSpec& spec,
                                  AllocationMechanism mechanism,
                                  std::uint64_t trials,
                                  std::uint64_t master_seed,
                                  unsigned threads = 0);

/// (budget / 2) * || candidate - noisy_alloc ||_1.
double l1_objective_check(std::span<const double> noisy_alloc,
                          std::span<const double> candidate, double budget);

/// budget * sum of |negative biases|.
double cost_of_privacy(std::span<const double> bias, double budget);

/// Stand-in for an unpublished district table: log-normal counts
/// (log-mean `log_mean`, log-sd `log_sd`) and weights uniform in [1, 2],
/// deterministic in `seed`.
TrueDataset synthetic_districts(std::size_t n, std::uint64_t seed,
                                double log_mean = 7.0, double log_sd = 1.5);

}  // namespace dpfair
