#include "dpfair/mechanisms.hpp"

#include <cmath>

namespace dpfair {

std::string_view to_string(NoiseKind kind) noexcept {
  return kind == NoiseKind::Laplace ? "laplace" : "gaussian";
}

NoiseSpec::NoiseSpec(NoiseKind kind, double scale) : kind_(kind), scale_(scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw ArgumentError("noise scale must be positive and finite");
  }
}

NoiseSpec scale_from_budget(NoiseKind kind, double epsilon, double delta,
                            double sensitivity) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw ArgumentError("epsilon must be positive");
  }
  if (!(sensitivity > 0.0) || !std::isfinite(sensitivity)) {
    throw ArgumentError("sensitivity must be positive");
  }
  double scale = 0.0;
  if (kind == NoiseKind::Laplace) {
    if (delta != 0.0) {
      throw InvalidBudgetError("the Laplace mechanism takes delta = 0");
    }
    scale = sensitivity / epsilon;
  } else {
    if (!(delta > 0.0 && delta < 1.0)) {
      throw InvalidBudgetError("the Gaussian mechanism needs 0 < delta < 1");
    }
    const double c = std::sqrt(2.0 * std::log(1.25 / delta));
    scale = (1.0 + 1e-12) * c * sensitivity / epsilon;
  }
  NoiseSpec spec(kind, scale);
  spec.budget_ = PrivacyBudget{epsilon, delta, sensitivity};
  return spec;
}

void draw_noise(const NoiseSpec& spec, CounterStream& stream,
                std::span<double> out) noexcept {
  const double scale = spec.scale();
  if (spec.kind() == NoiseKind::Laplace) {
    // Inverse CDF with u uniform on (-1/2, 1/2).
    for (double& eta : out) {
      const double u = stream.uniform_open() - 0.5;
      const double mag = -scale * std::log1p(-2.0 * std::abs(u));
      eta = u < 0.0 ? -mag : mag;
    }
  } else {
    for (double& eta : out) eta = scale * stream.standard_normal();
  }
}

void sample_noisy_into(const TrueDataset& dataset, const NoiseSpec& spec,
                       StreamSeed seed, std::span<double> out) {
  if (out.size() != dataset.size()) {
    throw ArgumentError("output span does not match dataset size");
  }
  CounterStream stream(seed);
  draw_noise(spec, stream, out);
  const auto& x = dataset.counts();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += x[i];
}

std::vector<double> sample_noisy(const TrueDataset& dataset,
                                 const NoiseSpec& spec, StreamSeed seed) {
  std::vector<double> out(dataset.size());
  sample_noisy_into(dataset, spec, seed, out);
  return out;
}

}  // namespace dpfair
