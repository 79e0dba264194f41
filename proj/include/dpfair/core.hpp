#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dpfair {

// Error taxonomy. Everything derives from std::invalid_argument or
// std::runtime_error so callers can catch broadly.
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidBudgetError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct SingularConstraintError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DegenerateProblemError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// True per-entity counts with weights and the public invariant total.
///
/// Immutable after construction. The constructor enforces n >= 2,
/// non-negative counts, strictly positive weights and a positive total.
/// A dataset built with `require_consistent` additionally checks that the
/// counts sum to the total within 1e-9 * total.
class TrueDataset {
public:
  TrueDataset(std::vector<std::string> entity_ids, std::vector<double> counts,
              std::vector<double> weights, double total,
              bool require_consistent = false);

  /// Unit weights, total = sum of counts.
  static TrueDataset from_counts(std::vector<double> counts);

  std::size_t size() const noexcept { return counts_.size(); }
  const std::vector<std::string>& entity_ids() const noexcept { return ids_; }
  const std::vector<double>& counts() const noexcept { return counts_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  double total() const noexcept { return total_; }

  /// Same entities and weights with a different public total.
  TrueDataset with_total(double total) const;

private:
  std::vector<std::string> ids_;
  std::vector<double> counts_;
  std::vector<double> weights_;
  double total_;
};

/// max(v) - min(v) of the vector it was computed from.
class RangeNorm {
public:
  explicit RangeNorm(std::span<const double> v);
  double value() const noexcept { return value_; }
  operator double() const noexcept { return value_; }

private:
  double value_;
};

/// Identifies one Monte-Carlo trial's random stream.
struct StreamSeed {
  std::uint64_t master_seed = 0;
  std::uint64_t trial_index = 0;
};

/// max(v) - min(v). Throws ArgumentError on an empty vector.
double range_norm(std::span<const double> v);

std::vector<double> positive_part(std::span<const double> v);

/// Elementwise -min(v_i, 0).
std::vector<double> negative_part(std::span<const double> v);

/// Neumaier-compensated sum.
double stable_sum(std::span<const double> v) noexcept;

/// Indices of v ordered by ascending value; ties keep input order.
std::vector<std::size_t> ascending_order(std::span<const double> v);

}  // namespace dpfair
