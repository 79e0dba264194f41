#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dpfair/core.hpp"
#include "dpfair/random.hpp"

namespace dpfair {

enum class NoiseKind { Laplace, Gaussian };

std::string_view to_string(NoiseKind kind) noexcept;

/// Privacy budget a noise scale was derived from.
struct PrivacyBudget {
  double epsilon = 0.0;
  double delta = 0.0;
  double sensitivity = 1.0;
};

/// Noise mechanism and its scale (Laplace lambda or Gaussian sigma, in count
/// units). `budget` is set when the scale came from scale_from_budget.
class NoiseSpec {
public:
  /// Direct scale entry. Throws ArgumentError unless scale > 0.
  NoiseSpec(NoiseKind kind, double scale);

  NoiseKind kind() const noexcept { return kind_; }
  double scale() const noexcept { return scale_; }
  const std::optional<PrivacyBudget>& budget() const noexcept { return budget_; }

private:
  friend NoiseSpec scale_from_budget(NoiseKind, double, double, double);
  NoiseKind kind_;
  double scale_;
  std::optional<PrivacyBudget> budget_;
};

/// Laplace: scale = sensitivity / epsilon (delta must be 0).
/// Gaussian: scale = (1 + 1e-12) * sqrt(2 ln(1.25 / delta)) * sensitivity / epsilon,
/// which keeps c^2 > 2 ln(1.25/delta) strict.
NoiseSpec scale_from_budget(NoiseKind kind, double epsilon, double delta,
                            double sensitivity = 1.0);

/// Fills `out` with i.i.d. zero-mean noise drawn from `stream`.
void draw_noise(const NoiseSpec& spec, CounterStream& stream,
                std::span<double> out) noexcept;

/// counts + noise, deterministic in `seed`. May contain negative entries.
std::vector<double> sample_noisy(const TrueDataset& dataset,
                                 const NoiseSpec& spec, StreamSeed seed);

/// Allocation-free variant for hot loops; `out` must have dataset.size().
void sample_noisy_into(const TrueDataset& dataset, const NoiseSpec& spec,
                       StreamSeed seed, std::span<double> out);

}  // namespace dpfair
