#include "fairtree/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace fairtree::numerics {

SymMatrix4 SymMatrix4::identity() { return diagonal({1.0, 1.0, 1.0, 1.0}); }

SymMatrix4 SymMatrix4::diagonal(const std::array<double, 4>& d) {
    SymMatrix4 m;
    for (std::size_t i = 0; i < 4; ++i) m.set(i, i, d[i]);
    return m;
}

SymMatrix4 SymMatrix4::from_dense(const Mat4& a) {
    SymMatrix4 m;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = i; j < 4; ++j) m.set(i, j, 0.5 * (a[i][j] + a[j][i]));
    return m;
}

Mat4 SymMatrix4::dense() const {
    Mat4 a{};
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) a[i][j] = (*this)(i, j);
    return a;
}

double SymMatrix4::max_abs() const {
    double m = 0.0;
    for (double x : v_) m = std::max(m, std::abs(x));
    return m;
}

Mat4 multiply(const Mat4& a, const Mat4& b) {
    Mat4 c{};
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t k = 0; k < 4; ++k)
            for (std::size_t j = 0; j < 4; ++j) c[i][j] += a[i][k] * b[k][j];
    return c;
}

Eigen4 eigen_symmetric(const SymMatrix4& m) {
    Mat4 a = m.dense();
    Mat4 v{};
    for (std::size_t i = 0; i < 4; ++i) v[i][i] = 1.0;

    const double scale = m.max_abs();
    if (scale > 0.0) {
        for (int sweep = 0; sweep < 100; ++sweep) {
            double off = 0.0;
            for (std::size_t p = 0; p < 4; ++p)
                for (std::size_t q = p + 1; q < 4; ++q) off += a[p][q] * a[p][q];
            if (std::sqrt(off) <= 1e-15 * scale) break;

            for (std::size_t p = 0; p < 4; ++p) {
                for (std::size_t q = p + 1; q < 4; ++q) {
                    if (a[p][q] == 0.0) continue;
                    // Rotation angle that annihilates a[p][q].
                    const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    const double t = (theta >= 0 ? 1.0 : -1.0) /
                                     (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                    const double c = 1.0 / std::sqrt(t * t + 1.0);
                    const double s = t * c;
                    for (std::size_t k = 0; k < 4; ++k) {
                        const double akp = a[k][p];
                        const double akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for (std::size_t k = 0; k < 4; ++k) {
                        const double apk = a[p][k];
                        const double aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                    for (std::size_t k = 0; k < 4; ++k) {
                        const double vkp = v[k][p];
                        const double vkq = v[k][q];
                        v[k][p] = c * vkp - s * vkq;
                        v[k][q] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }

    std::array<std::size_t, 4> order{0, 1, 2, 3};
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return a[i][i] < a[j][j]; });
    Eigen4 out;
    for (std::size_t k = 0; k < 4; ++k) {
        out.values[k] = a[order[k]][order[k]];
        for (std::size_t i = 0; i < 4; ++i) out.vectors[i][k] = v[i][order[k]];
    }
    return out;
}

SymMatrix4 empirical_information(std::span<const ScoreVector> scores) {
    SymMatrix4 m;
    if (scores.empty()) return m;
    for (const auto& s : scores)
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = i; j < 4; ++j) m.add(i, j, s[i] * s[j]);
    const double inv_n = 1.0 / static_cast<double>(scores.size());
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = i; j < 4; ++j) m.set(i, j, m(i, j) * inv_n);
    return m;
}

SymMatrix4 empirical_information(std::span<const ScoreVector> scores, std::span<const double> weights) {
    if (scores.size() != weights.size()) {
        throw std::invalid_argument("empirical_information: scores and weights differ in length");
    }
    SymMatrix4 m;
    double total = 0.0;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        const double w = weights[k];
        if (w == 0.0) continue;
        total += w;
        const auto& s = scores[k];
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = i; j < 4; ++j) m.add(i, j, w * s[i] * s[j]);
    }
    if (total <= 0.0) return m;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = i; j < 4; ++j) m.set(i, j, m(i, j) / total);
    return m;
}

InvSqrtResult inv_sqrt(const SymMatrix4& m, double relative_ridge) {
    const auto eig = eigen_symmetric(m);
    const double largest = eig.values[3];
    if (!(largest > 0.0) || !std::isfinite(largest)) {
        throw SingularInformation("information matrix has no positive eigenvalue");
    }
    InvSqrtResult out;
    out.ridge = relative_ridge * largest;
    std::array<double, 4> w{};
    for (std::size_t k = 0; k < 4; ++k) {
        double lambda = eig.values[k];
        if (lambda < out.ridge) {
            lambda = out.ridge;
            ++out.floored;
        }
        w[k] = 1.0 / std::sqrt(lambda);
    }
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = i; j < 4; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < 4; ++k) acc += eig.vectors[i][k] * w[k] * eig.vectors[j][k];
            out.matrix.set(i, j, acc);
        }
    }
    return out;
}

namespace {

constexpr double kEps = 1e-16;
constexpr int kMaxIter = 10000;

// P(a, x) by its power series; valid for x < a + 1.
double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < kMaxIter; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::abs(term) < std::abs(sum) * kEps) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Q(a, x) by the Legendre continued fraction (modified Lentz); valid for x >= a + 1.
double gamma_q_fraction(double a, double x) {
    constexpr double tiny = std::numeric_limits<double>::min() / kEps;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kMaxIter; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_q(double a, double x) {
    if (!(a > 0.0)) throw std::invalid_argument("gamma_q: shape must be positive");
    if (x <= 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_fraction(a, x);
}

double chisq_sf(double t, int df) {
    if (df < 1) throw std::invalid_argument("chisq_sf: degrees of freedom must be >= 1");
    if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
    if (t <= 0.0) return 1.0;
    if (std::isinf(t)) return 0.0;
    return gamma_q(0.5 * df, 0.5 * t);
}

}  // namespace fairtree::numerics
