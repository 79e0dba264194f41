#include "dpfair/allocation.hpp"

#include <algorithm>
#include <cmath>

#include "dpfair/projection.hpp"
#include "dpfair/random.hpp"
#include "dpfair/trials.hpp"

namespace dpfair {

namespace {

double weighted_sum(std::span<const double> counts,
                    std::span<const double> weights) {
  std::vector<double> terms(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) terms[i] = weights[i] * counts[i];
  return stable_sum(terms);
}

std::vector<double> uniform(std::size_t n) {
  return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

void check_lengths(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) {
    throw ArgumentError("counts and weights must be non-empty and equal length");
  }
}

}  // namespace

AllocationProblem::AllocationProblem(TrueDataset dataset, double budget)
    : dataset_(std::move(dataset)), budget_(budget) {
  if (!(budget_ > 0.0) || !std::isfinite(budget_)) {
    throw ArgumentError("budget must be positive");
  }
  if (!(weighted_sum(dataset_.counts(), dataset_.weights()) > 0.0)) {
    throw DegenerateProblemError("all weighted counts are zero");
  }
}

std::string_view to_string(AllocationMechanism m) noexcept {
  return m == AllocationMechanism::Baseline ? "BL" : "PoS";
}

std::vector<double> true_allocation(const AllocationProblem& problem) {
  const auto& x = problem.dataset().counts();
  const auto& a = problem.dataset().weights();
  const double denom = weighted_sum(x, a);
  if (!(denom > 0.0)) throw DegenerateProblemError("all weighted counts are zero");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = a[i] * x[i] / denom;
  return out;
}

std::optional<std::vector<double>> noisy_allocation(std::span<const double> noisy,
                                                    std::span<const double> weights) {
  check_lengths(noisy, weights);
  const double denom = weighted_sum(noisy, weights);
  if (denom == 0.0) return std::nullopt;
  std::vector<double> out(noisy.size());
  for (std::size_t i = 0; i < noisy.size(); ++i) out[i] = weights[i] * noisy[i] / denom;
  return out;
}

MechanismOutput mechanism_bl(std::span<const double> noisy,
                             std::span<const double> weights) {
  check_lengths(noisy, weights);
  const std::vector<double> clamped = positive_part(noisy);
  const double denom = weighted_sum(clamped, weights);
  if (!(denom > 0.0)) return {uniform(noisy.size()), true};
  std::vector<double> out(noisy.size());
  for (std::size_t i = 0; i < noisy.size(); ++i) out[i] = weights[i] * clamped[i] / denom;
  return {std::move(out), false};
}

MechanismOutput mechanism_pos(std::span<const double> noisy,
                              std::span<const double> weights) {
  auto shares = noisy_allocation(noisy, weights);
  if (!shares) return {uniform(noisy.size()), true};
  return {project_sum_nonneg(*shares, 1.0).projected, false};
}

double l1_objective_check(std::span<const double> noisy_alloc,
                          std::span<const double> candidate, double budget) {
  if (noisy_alloc.size() != candidate.size()) {
    throw ArgumentError("allocation vectors differ in length");
  }
  std::vector<double> diffs(candidate.size());
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    diffs[i] = std::abs(candidate[i] - noisy_alloc[i]);
  }
  return 0.5 * budget * stable_sum(diffs);
}

double cost_of_privacy(std::span<const double> bias, double budget) {
  std::vector<double> deficits;
  for (double b : bias) {
    if (b < 0.0) deficits.push_back(-b);
  }
  return budget * stable_sum(deficits);
}

AllocationReport allocation_audit(const AllocationProblem& problem,
                                  const NoiseSpec& spec,
                                  AllocationMechanism mechanism,
                                  std::uint64_t trials,
                                  std::uint64_t master_seed, unsigned threads) {
  if (trials < 100) {
    throw ArgumentError("at least 100 trials required, got " + std::to_string(trials));
  }
  const TrueDataset& dataset = problem.dataset();
  const std::size_t n = dataset.size();
  const std::vector<double> reference = true_allocation(problem);
  const auto& weights = dataset.weights();

  // Writes the per-entity bias into out[0..n) and the degenerate flag
  // into out[n].
  auto make_worker = [&] {
    return [&, noisy = std::vector<double>(n)](std::uint64_t t,
                                               std::span<double> out) mutable {
      sample_noisy_into(dataset, spec, {master_seed, t}, noisy);
      const MechanismOutput m = mechanism == AllocationMechanism::Baseline
                                    ? mechanism_bl(noisy, weights)
                                    : mechanism_pos(noisy, weights);
      for (std::size_t i = 0; i < n; ++i) out[i] = m.allocation[i] - reference[i];
      out[n] = m.degenerate ? 1.0 : 0.0;
    };
  };
  const TrialMoments moments = run_trials(trials, n + 1, threads, make_worker);

  AllocationReport r;
  r.mechanism = mechanism;
  r.trials = trials;
  r.true_allocation = reference;
  r.per_entity_bias.assign(moments.mean.begin(), moments.mean.begin() + n);
  r.per_entity_stderr.assign(moments.stderr_of_mean.begin(),
                             moments.stderr_of_mean.begin() + n);
  r.degenerate_trials =
      static_cast<std::uint64_t>(std::llround(moments.mean[n] * static_cast<double>(trials)));
  r.alpha_fairness = range_norm(r.per_entity_bias);
  r.cost_of_privacy = cost_of_privacy(r.per_entity_bias, problem.budget());
  r.misallocated_funds.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.misallocated_funds[i] = r.per_entity_bias[i] * problem.budget();
  }

  // Second pass over the same streams: per-trial extremal-pair difference
  // and the budget-weighted deficit of the entities with negative bias.
  const auto& bias = r.per_entity_bias;
  const std::size_t hi = static_cast<std::size_t>(
      std::max_element(bias.begin(), bias.end()) - bias.begin());
  const std::size_t lo = static_cast<std::size_t>(
      std::min_element(bias.begin(), bias.end()) - bias.begin());
  std::vector<std::size_t> deficit;
  for (std::size_t i = 0; i < n; ++i) {
    if (bias[i] < 0.0) deficit.push_back(i);
  }
  auto make_second = [&] {
    return [inner = make_worker(), buffer = std::vector<double>(n + 1), hi, lo,
            &deficit, budget = problem.budget()](std::uint64_t t,
                                                 std::span<double> out) mutable {
      inner(t, buffer);
      out[0] = buffer[hi] - buffer[lo];
      double s = 0.0;
      for (std::size_t i : deficit) s -= buffer[i];
      out[1] = budget * s;
    };
  };
  const TrialMoments second = run_trials(trials, 2, threads, make_second);
  r.alpha_stderr = hi == lo ? 0.0 : second.stderr_of_mean[0];
  r.cost_of_privacy_stderr = second.stderr_of_mean[1];
  return r;
}

TrueDataset synthetic_districts(std::size_t n, std::uint64_t seed,
                                double log_mean, double log_sd) {
  CounterStream stream({seed, 0});
  std::vector<std::string> ids;
  std::vector<double> counts(n);
  std::vector<double> weights(n);
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back("district-" + std::to_string(i));
    counts[i] = std::round(std::exp(log_mean + log_sd * stream.standard_normal()));
    weights[i] = 1.0 + stream.uniform_open();
  }
  const double total = stable_sum(counts);
  return TrueDataset(std::move(ids), std::move(counts), std::move(weights), total);
}

}  // namespace dpfair
