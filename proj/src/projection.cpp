#include "dpfair/projection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "dpfair/core.hpp"

namespace dpfair {

namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMatrix> as_matrix(const AffineConstraint& c) {
  return {c.matrix().data(), static_cast<Eigen::Index>(c.rows()),
          static_cast<Eigen::Index>(c.cols())};
}

}  // namespace

AffineConstraint::AffineConstraint(std::size_t rows, std::size_t cols,
                                   std::vector<double> matrix,
                                   std::vector<double> rhs)
    : rows_(rows), cols_(cols), matrix_(std::move(matrix)), rhs_(std::move(rhs)) {
  if (rows_ == 0 || cols_ == 0 || matrix_.size() != rows_ * cols_ ||
      rhs_.size() != rows_) {
    throw ArgumentError("affine constraint has inconsistent shape");
  }
  if (rows_ > cols_) {
    throw SingularConstraintError("more constraints than unknowns");
  }
  const auto a = as_matrix(*this);
  Eigen::ColPivHouseholderQR<RowMatrix> qr(a);
  qr.setThreshold(1e-10);
  const double norm = a.norm();
  if (norm == 0.0 || qr.rank() < static_cast<Eigen::Index>(rows_)) {
    throw SingularConstraintError("constraint matrix is rank deficient");
  }
}

std::vector<double> project_sum(std::span<const double> noisy, double total) {
  if (noisy.empty()) throw ArgumentError("project_sum of an empty vector");
  const double shift =
      (total - stable_sum(noisy)) / static_cast<double>(noisy.size());
  std::vector<double> out(noisy.begin(), noisy.end());
  for (double& v : out) v += shift;
  return out;
}

double solve_threshold(std::span<const double> sorted_desc, double total) {
  // Nothing to clamp: T = 0 solves the equation exactly.
  if (sorted_desc.empty() || sorted_desc.back() >= 0.0) return 0.0;
  double prefix = 0.0;
  double best = 0.0;
  for (std::size_t k = 0; k < sorted_desc.size(); ++k) {
    prefix += sorted_desc[k];
    const double candidate = (prefix - total) / static_cast<double>(k + 1);
    // The condition holds on a prefix of k; keep the last one.
    if (candidate < sorted_desc[k]) best = candidate;
  }
  return std::max(0.0, best);
}

ProjectionResult project_sum_nonneg(std::span<const double> noisy,
                                    double total) {
  if (!(total > 0.0)) {
    throw ArgumentError("non-negative projection needs a positive total");
  }
  if (noisy.empty()) throw ArgumentError("projection of an empty vector");

  ProjectionResult result;
  // Already feasible: the projection is the input itself.
  if (*std::min_element(noisy.begin(), noisy.end()) >= 0.0 &&
      std::abs(stable_sum(noisy) - total) <= 1e-12 * std::max(1.0, total)) {
    result.projected.assign(noisy.begin(), noisy.end());
    return result;
  }

  result.projected = project_sum(noisy, total);
  auto& v = result.projected;
  if (*std::min_element(v.begin(), v.end()) >= 0.0) return result;

  std::vector<double> sorted(v);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const double t = solve_threshold(sorted, total);
  result.threshold = t;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double shifted = v[i] - t;
    if (shifted > 0.0) {
      v[i] = shifted;
    } else {
      v[i] = 0.0;
      result.active_zero_set.push_back(i);
    }
  }
  return result;
}

double threshold_upper_bound(std::span<const double> pi_s_output) {
  double sum = 0.0;
  for (double v : pi_s_output) {
    if (v < 0.0) sum -= v;
  }
  return sum;
}

std::vector<double> project_affine(std::span<const double> noisy,
                                   const AffineConstraint& constraint) {
  if (noisy.size() != constraint.cols()) {
    throw ArgumentError("vector length does not match constraint columns");
  }
  const auto a = as_matrix(constraint);
  const Eigen::Map<const Eigen::VectorXd> x(noisy.data(),
                                            static_cast<Eigen::Index>(noisy.size()));
  const Eigen::Map<const Eigen::VectorXd> b(
      constraint.rhs().data(), static_cast<Eigen::Index>(constraint.rows()));
  const Eigen::MatrixXd gram = a * a.transpose();
  const Eigen::VectorXd residual = a * x - b;
  const Eigen::VectorXd multipliers = gram.partialPivLu().solve(residual);
  const Eigen::VectorXd v = x - a.transpose() * multipliers;
  return {v.data(), v.data() + v.size()};
}

}  // namespace dpfair
