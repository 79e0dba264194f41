#include "dpfair/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

namespace dpfair {

TrueDataset::TrueDataset(std::vector<std::string> entity_ids,
                         std::vector<double> counts,
                         std::vector<double> weights, double total,
                         bool require_consistent)
    : ids_(std::move(entity_ids)),
      counts_(std::move(counts)),
      weights_(std::move(weights)),
      total_(total) {
  const std::size_t n = counts_.size();
  if (n < 2) {
    throw ValidationError("dataset needs at least 2 entities, got " +
                          std::to_string(n));
  }
  if (ids_.empty()) {
    ids_.reserve(n);
    for (std::size_t i = 0; i < n; ++i) ids_.push_back(std::to_string(i));
  }
  if (weights_.empty()) weights_.assign(n, 1.0);
  if (ids_.size() != n || weights_.size() != n) {
    throw ValidationError("entity ids, counts and weights differ in length");
  }
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < n; ++i) {
    if (!seen.insert(ids_[i]).second) {
      throw ValidationError("duplicate entity id '" + ids_[i] + "'");
    }
    if (!std::isfinite(counts_[i]) || counts_[i] < 0.0) {
      throw ValidationError("entity '" + ids_[i] +
                            "' has a negative or non-finite count");
    }
    if (!std::isfinite(weights_[i]) || weights_[i] <= 0.0) {
      throw ValidationError("entity '" + ids_[i] +
                            "' has a non-positive weight");
    }
  }
  if (!std::isfinite(total_) || total_ <= 0.0) {
    throw ValidationError("total must be positive");
  }
  if (require_consistent) {
    const double sum = stable_sum(counts_);
    if (std::abs(sum - total_) > 1e-9 * total_) {
      throw ValidationError("counts sum to " + std::to_string(sum) +
                            " but the declared total is " +
                            std::to_string(total_));
    }
  }
}

TrueDataset TrueDataset::from_counts(std::vector<double> counts) {
  const double total = stable_sum(counts);
  return TrueDataset({}, std::move(counts), {}, total);
}

TrueDataset TrueDataset::with_total(double total) const {
  return TrueDataset(ids_, counts_, weights_, total);
}

RangeNorm::RangeNorm(std::span<const double> v) : value_(range_norm(v)) {}

double range_norm(std::span<const double> v) {
  if (v.empty()) throw ArgumentError("range_norm of an empty vector");
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi - *lo;
}

std::vector<double> positive_part(std::span<const double> v) {
  std::vector<double> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(),
                 [](double x) { return x > 0.0 ? x : 0.0; });
  return out;
}

std::vector<double> negative_part(std::span<const double> v) {
  std::vector<double> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(),
                 [](double x) { return x < 0.0 ? -x : 0.0; });
  return out;
}

double stable_sum(std::span<const double> v) noexcept {
  double sum = 0.0;
  double comp = 0.0;
  for (double x : v) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }
  return sum + comp;
}

std::vector<std::size_t> ascending_order(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  return idx;
}

}  // namespace dpfair
