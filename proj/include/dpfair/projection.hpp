#pragma once

#include <span>
#include <vector>

#include <cstddef>

namespace dpfair {

/// Output of the non-negative, sum-constrained projection.
struct ProjectionResult {
  std::vector<double> projected;
  /// Shift subtracted from the sum-constrained projection before clamping;
  /// 0 when nothing was clamped.
  double threshold = 0.0;
  /// Entries clamped to zero, ascending.
  std::vector<std::size_t> active_zero_set;
};

/// Row-major m x n equality constraint A v = b with A of full row rank.
class AffineConstraint {
public:
  /// Throws SingularConstraintError if rank(A) < m (pivoted QR, tolerance
  /// 1e-10 * ||A||), ArgumentError on shape mismatch or m > n.
  AffineConstraint(std::size_t rows, std::size_t cols,
                   std::vector<double> matrix, std::vector<double> rhs);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double at(std::size_t r, std::size_t c) const noexcept {
    return matrix_[r * cols_ + c];
  }
  const std::vector<double>& matrix() const noexcept { return matrix_; }
  const std::vector<double>& rhs() const noexcept { return rhs_; }

private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> matrix_;
  std::vector<double> rhs_;
};

/// Closed-form projection onto {v : sum v = total}: uniform shift.
std::vector<double> project_sum(std::span<const double> noisy, double total);

/// Euclidean projection onto {v >= 0, sum v = total}.
/// Computed as [project_sum(noisy) - T]_+ with T from solve_threshold.
/// Throws ArgumentError if total <= 0.
ProjectionResult project_sum_nonneg(std::span<const double> noisy,
                                    double total);

/// Scalar T >= 0 with sum_i [v_i - T]_+ = total, for v sorted descending and
/// summing to total. Exact sort-and-scan.
double solve_threshold(std::span<const double> sorted_desc, double total);

/// Sum of negative parts; an upper bound on solve_threshold for the same
/// sum-constrained input.
double threshold_upper_bound(std::span<const double> pi_s_output);

/// Euclidean projection onto {v : A v = b}: x - A^T (A A^T)^{-1} (A x - b).
std::vector<double> project_affine(std::span<const double> noisy,
                                   const AffineConstraint& constraint);

}  // namespace dpfair
