#include "dpfair/release_audit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dpfair/normal.hpp"
#include "dpfair/projection.hpp"
#include "dpfair/trials.hpp"

namespace dpfair {

std::string_view to_string(PostProcessing post) noexcept {
  switch (post) {
    case PostProcessing::ProjectSum: return "project_sum";
    case PostProcessing::ProjectSumNonneg: return "project_sum_nonneg";
    case PostProcessing::ReluProjectSum: return "relu_project_sum";
    case PostProcessing::Relu: return "relu";
  }
  return "unknown";
}

std::string_view to_string(BoundsMethod method) noexcept {
  return method == BoundsMethod::GaussianAnalytic ? "gaussian_analytic"
                                                  : "monte_carlo_empirical";
}

namespace {

// Expected uniform shift of pi_S when the declared total differs from the
// true sum; zero for consistent datasets.
double projection_offset(const TrueDataset& dataset) {
  return (dataset.total() - stable_sum(dataset.counts())) /
         static_cast<double>(dataset.size());
}

struct ExtremeEntities {
  std::size_t first;  // smallest count
  std::size_t last;   // largest count
};

ExtremeEntities extreme_entities(const TrueDataset& dataset) {
  const auto order = ascending_order(dataset.counts());
  return {order.front(), order.back()};
}

// Per-trial bias contributions of one post-processing, written to out[0..n).
class BiasWorker {
public:
  BiasWorker(const TrueDataset& dataset, const NoiseSpec& spec,
             PostProcessing post, BiasEstimator estimator,
             std::uint64_t master_seed)
      : dataset_(dataset),
        spec_(spec),
        post_(post),
        estimator_(estimator),
        seed_(master_seed),
        noisy_(dataset.size()) {}

  void operator()(std::uint64_t trial, std::span<double> out) {
    sample_noisy_into(dataset_, spec_, {seed_, trial}, noisy_);
    const auto& x = dataset_.counts();
    const std::size_t n = x.size();
    if (post_ == PostProcessing::Relu) {
      for (std::size_t i = 0; i < n; ++i) {
        const double post = std::max(noisy_[i], 0.0);
        out[i] = estimator_ == BiasEstimator::Plain ? post - x[i] : post - noisy_[i];
      }
      return;
    }
    const std::vector<double> base = project_sum(noisy_, dataset_.total());
    std::vector<double> post;
    switch (post_) {
      case PostProcessing::ProjectSum:
        post = base;
        break;
      case PostProcessing::ProjectSumNonneg:
        post = project_sum_nonneg(noisy_, dataset_.total()).projected;
        break;
      case PostProcessing::ReluProjectSum:
        post = positive_part(base);
        break;
      case PostProcessing::Relu:
        break;
    }
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = estimator_ == BiasEstimator::Plain ? post[i] - x[i] : post[i] - base[i];
    }
  }

private:
  const TrueDataset& dataset_;
  const NoiseSpec& spec_;
  PostProcessing post_;
  BiasEstimator estimator_;
  std::uint64_t seed_;
  std::vector<double> noisy_;
};

void require_trials(std::uint64_t trials, std::uint64_t minimum) {
  if (trials < minimum) {
    throw ArgumentError("at least " + std::to_string(minimum) +
                        " trials required, got " + std::to_string(trials));
  }
}

}  // namespace

BiasReport estimate_bias(const TrueDataset& dataset, const NoiseSpec& spec,
                         PostProcessing post, std::uint64_t trials,
                         std::uint64_t master_seed, AuditOptions options) {
  require_trials(trials, 100);
  const std::size_t n = dataset.size();
  auto make = [&] {
    return BiasWorker(dataset, spec, post, options.estimator, master_seed);
  };
  TrialMoments moments = run_trials(trials, n, options.threads, make);

  // Known expectation of the control-variate base.
  if (options.estimator == BiasEstimator::ControlVariate &&
      post != PostProcessing::Relu) {
    const double offset = projection_offset(dataset);
    for (double& b : moments.mean) b += offset;
  }

  BiasReport report{.mechanism = spec};
  report.per_entity_bias = std::move(moments.mean);
  report.per_entity_stderr = std::move(moments.stderr_of_mean);
  report.trials = trials;
  report.post = post;
  report.estimator = options.estimator;
  const auto& bias = report.per_entity_bias;
  report.argmax = static_cast<std::size_t>(
      std::max_element(bias.begin(), bias.end()) - bias.begin());
  report.argmin = static_cast<std::size_t>(
      std::min_element(bias.begin(), bias.end()) - bias.begin());
  report.alpha_fairness = range_norm(bias);

  // Second pass over the same streams for the extremal-pair difference.
  if (report.argmax != report.argmin) {
    const std::size_t hi = report.argmax;
    const std::size_t lo = report.argmin;
    auto make_pair = [&] {
      return [worker = make(), buffer = std::vector<double>(n), hi, lo](
                 std::uint64_t t, std::span<double> out) mutable {
        worker(t, buffer);
        out[0] = buffer[hi] - buffer[lo];
      };
    };
    report.alpha_stderr =
        run_trials(trials, 1, options.threads, make_pair).stderr_of_mean[0];
  }
  return report;
}

BoundsReport bounds_gaussian(const TrueDataset& dataset, double sigma) {
  if (!(sigma > 0.0)) throw ArgumentError("sigma must be positive");
  const std::size_t n = dataset.size();
  if (n < 2) throw ArgumentError("bounds need at least 2 entities");
  const auto& x = dataset.counts();
  const auto [first, last] = extreme_entities(dataset);
  const double nd = static_cast<double>(n);
  // Each pi_S coordinate is N(x_i + offset, 1/a^2).
  const double a = std::sqrt(nd / (nd - 1.0)) / sigma;
  const double offset = projection_offset(dataset);

  BoundsReport r;
  r.method = BoundsMethod::GaussianAnalytic;
  r.first_entity = first;
  r.last_entity = last;
  const double m1 = x[first] + offset;
  const double mn = x[last] + offset;
  r.relu_bias_first = offset + normal::cdf_antiderivative(-m1, a);
  r.relu_bias_last = offset + normal::cdf_antiderivative(-mn, a);
  r.lower = r.relu_bias_first - r.relu_bias_last;
  r.data_range = x[last] - x[first];

  double negparts = 0.0;
  for (double xi : x) negparts += normal::expected_negative_part(xi + offset, 1.0 / a);
  r.expected_negparts = negparts;
  r.upper = std::min(r.data_range, r.lower + r.expected_negparts);

  r.bracket_low = normal::cdf(-a * mn) * (mn - m1);
  r.bracket_high = normal::cdf(-a * m1) * (mn - m1);
  const double slack = 1e-12 * std::max(1.0, r.data_range);
  if (r.lower < *r.bracket_low - slack || r.lower > *r.bracket_high + slack) {
    throw std::logic_error("Gaussian bound integral escaped its bracket");
  }
  return r;
}

BoundsReport bounds_empirical(const TrueDataset& dataset, const NoiseSpec& spec,
                              std::uint64_t trials, std::uint64_t master_seed,
                              unsigned threads) {
  require_trials(trials, 10000);
  const auto [first, last] = extreme_entities(dataset);
  const double total = dataset.total();

  // Uses E[[v]_+] - E[v] = E[[v]_-] for v = pi_S(x~).
  // out: neg(first), neg(last), sum neg, neg(first)-neg(last), lower+sum neg
  auto make = [&] {
    return [&, noisy = std::vector<double>(dataset.size())](
               std::uint64_t t, std::span<double> out) mutable {
      sample_noisy_into(dataset, spec, {master_seed, t}, noisy);
      const auto v = project_sum(noisy, total);
      const double neg_first = v[first] < 0.0 ? -v[first] : 0.0;
      const double neg_last = v[last] < 0.0 ? -v[last] : 0.0;
      const double negparts = threshold_upper_bound(v);
      out[0] = neg_first;
      out[1] = neg_last;
      out[2] = negparts;
      out[3] = neg_first - neg_last;
      out[4] = neg_first - neg_last + negparts;
    };
  };
  const TrialMoments m = run_trials(trials, 5, threads, make);
  const double offset = projection_offset(dataset);
  const auto& x = dataset.counts();

  BoundsReport r;
  r.method = BoundsMethod::MonteCarloEmpirical;
  r.first_entity = first;
  r.last_entity = last;
  r.trials = trials;
  r.relu_bias_first = offset + m.mean[0];
  r.relu_bias_last = offset + m.mean[1];
  r.expected_negparts = m.mean[2];
  r.lower = m.mean[3];
  r.lower_stderr = m.stderr_of_mean[3];
  r.data_range = x[last] - x[first];
  if (r.data_range == 0.0) {
    // Identical counts are exchangeable: both relu terms share one law.
    r.lower = 0.0;
    r.lower_stderr = 0.0;
    r.upper = 0.0;
    r.upper_stderr = 0.0;
  } else if (r.data_range <= m.mean[4]) {
    r.upper = r.data_range;
    r.upper_stderr = 0.0;
  } else {
    r.upper = m.mean[4];
    r.upper_stderr = m.stderr_of_mean[4];
  }
  return r;
}

BiasDifferenceDiagnostics bias_difference_checks(const TrueDataset& dataset,
                                                 const NoiseSpec& spec,
                                                 std::uint64_t trials,
                                                 std::uint64_t master_seed,
                                                 unsigned threads) {
  require_trials(trials, 10000);
  const std::size_t n = dataset.size();
  if (n > 256) {
    throw ArgumentError("pairwise checks support at most 256 entities");
  }
  const auto& x = dataset.counts();
  const auto order = ascending_order(x);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) pairs.emplace_back(order[a], order[b]);
  }
  const double total = dataset.total();

  // Layout: [w_0..w_{n-1}] [r_0..r_{n-1}] [T] then per pair (q_lower,
  // q_upper, q_gap). w_k = pi_S+ - pi_S, r_k = [pi_S]_+ - pi_S.
  const std::size_t width = 2 * n + 1 + 3 * pairs.size();
  auto make = [&] {
    return [&, noisy = std::vector<double>(n)](std::uint64_t t,
                                               std::span<double> out) mutable {
      sample_noisy_into(dataset, spec, {master_seed, t}, noisy);
      const auto base = project_sum(noisy, total);
      const auto proj = project_sum_nonneg(noisy, total);
      for (std::size_t k = 0; k < n; ++k) {
        out[k] = proj.projected[k] - base[k];
        out[n + k] = base[k] < 0.0 ? -base[k] : 0.0;
      }
      out[2 * n] = proj.threshold;
      std::size_t slot = 2 * n + 1;
      for (const auto& [i, j] : pairs) {
        const double projected = out[i] - out[j];
        const double relu = out[n + i] - out[n + j];
        out[slot++] = projected - relu;
        out[slot++] = relu + proj.threshold - projected;
        out[slot++] = (x[j] - x[i]) - projected;
      }
    };
  };
  const TrialMoments m = run_trials(trials, width, threads, make);

  BiasDifferenceDiagnostics d;
  d.trials = trials;
  d.expected_threshold = m.mean[2 * n];
  d.expected_threshold_stderr = m.stderr_of_mean[2 * n];
  std::size_t slot = 2 * n + 1;
  auto holds = [](double margin, double se) {
    return margin + kSignificanceSigmas * se >= 0.0;
  };
  for (const auto& [i, j] : pairs) {
    PairCheck c;
    c.i = i;
    c.j = j;
    c.projected_bias_diff = m.mean[i] - m.mean[j];
    c.relu_bias_diff = m.mean[n + i] - m.mean[n + j];
    c.data_gap = x[j] - x[i];
    c.lower_margin = m.mean[slot];
    c.lower_stderr = m.stderr_of_mean[slot++];
    c.upper_margin = m.mean[slot];
    c.upper_stderr = m.stderr_of_mean[slot++];
    c.gap_margin = m.mean[slot];
    c.gap_stderr = m.stderr_of_mean[slot++];
    c.lower_holds = holds(c.lower_margin, c.lower_stderr);
    c.upper_holds = holds(c.upper_margin, c.upper_stderr);
    c.gap_holds = holds(c.gap_margin, c.gap_stderr);
    d.all_hold = d.all_hold && c.lower_holds && c.upper_holds && c.gap_holds;
    d.pairs.push_back(c);
  }
  return d;
}

}  // namespace dpfair
