#pragma once
// 4x4 symmetric linear algebra and the chi-square upper tail.

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>

#include "fairtree/core_model.hpp"

namespace fairtree::numerics {

using Mat4 = std::array<std::array<double, 4>, 4>;

/// Symmetric 4x4 matrix stored as its 10 upper-triangular entries.
class SymMatrix4 {
public:
    SymMatrix4() = default;

    static SymMatrix4 identity();
    static SymMatrix4 diagonal(const std::array<double, 4>& d);
    /// Symmetrizes `m` as (m + m^T) / 2.
    static SymMatrix4 from_dense(const Mat4& m);

    double operator()(std::size_t i, std::size_t j) const { return v_[index(i, j)]; }
    void set(std::size_t i, std::size_t j, double value) { v_[index(i, j)] = value; }
    void add(std::size_t i, std::size_t j, double value) { v_[index(i, j)] += value; }

    Mat4 dense() const;
    double max_abs() const;

private:
    static constexpr std::size_t index(std::size_t i, std::size_t j) {
        if (i > j) std::swap(i, j);
        return i * 4 - i * (i + 1) / 2 + j;
    }
    std::array<double, 10> v_{};
};

Mat4 multiply(const Mat4& a, const Mat4& b);

struct Eigen4 {
    std::array<double, 4> values{};  // ascending
    Mat4 vectors{};                  // column k is the eigenvector of values[k]
};

/// Cyclic Jacobi rotations until off-diagonal mass is negligible.
Eigen4 eigen_symmetric(const SymMatrix4& m);

/// (1/n) sum_i s_i s_i^T over the scores, summed in input order.
SymMatrix4 empirical_information(std::span<const ScoreVector> scores);

/// Weighted form: (1/sum w) sum_k w_k s_k s_k^T. Used with record-type counts.
SymMatrix4 empirical_information(std::span<const ScoreVector> scores, std::span<const double> weights);

class SingularInformation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct InvSqrtResult {
    SymMatrix4 matrix;
    std::size_t floored = 0;  // eigenvalues raised to the ridge
    double ridge = 0.0;
};

inline constexpr double kDefaultRelativeRidge = 1e-10;

/// Symmetric inverse square root. Eigenvalues below
/// relative_ridge * (largest eigenvalue) are floored at that ridge.
/// Throws SingularInformation when no eigenvalue is positive.
InvSqrtResult inv_sqrt(const SymMatrix4& m, double relative_ridge = kDefaultRelativeRidge);

/// Regularized upper incomplete gamma Q(a, x).
double gamma_q(double a, double x);

/// Upper tail of the chi-square distribution, P(X > t) for X ~ chi2(df).
/// Negative t is clamped to zero (returns 1).
double chisq_sf(double t, int df);

}  // namespace fairtree::numerics
