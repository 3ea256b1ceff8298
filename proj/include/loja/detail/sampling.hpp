#pragma once

#include <cmath>
#include <vector>

#include "loja/poly.hpp"

namespace loja::detail {

/// Van der Corput radical inverse in the given base.
inline double radical_inverse(std::uint64_t n, int base) {
    double inv = 1.0 / base, value = 0.0, f = inv;
    while (n > 0) {
        value += static_cast<double>(n % base) * f;
        n /= base;
        f *= inv;
    }
    return value;
}

inline int nth_prime(int k) {
    static constexpr int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
    return primes[k % 12];
}

/// Acklam's rational approximation to the inverse normal CDF (relative error
/// below 1.2e-9 on (0,1)); plenty for direction generation.
inline double inverse_normal_cdf(double p) {
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1 - plow;
    if (p <= 0.0) return -1e100;
    if (p >= 1.0) return 1e100;
    if (p < plow) {
        const double q = std::sqrt(-2 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    if (p > phigh) {
        const double q = std::sqrt(-2 * std::log(1 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    const double q = p - 0.5, r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}

/// `count` unit vectors in R^dim from a Halton sequence pushed through the
/// inverse normal CDF. Deterministic; for dim == 1 alternates +1/-1.
inline std::vector<Vec> sphere_directions(int dim, int count) {
    std::vector<Vec> dirs;
    dirs.reserve(count);
    if (dim == 1) {
        for (int i = 0; i < count; ++i) {
            Vec v(1);
            v[0] = (i % 2 == 0) ? 1.0 : -1.0;
            dirs.push_back(v);
        }
        return dirs;
    }
    std::uint64_t n = 1;
    while (static_cast<int>(dirs.size()) < count) {
        Vec v(dim);
        for (int j = 0; j < dim; ++j)
            v[j] = inverse_normal_cdf(radical_inverse(n, nth_prime(j)));
        ++n;
        const double norm = v.norm();
        if (norm < 1e-8) continue;
        dirs.push_back(v / norm);
    }
    return dirs;
}

/// Deterministic points in the cube [lo, hi]^dim (Halton).
inline std::vector<Vec> cube_points(int dim, int count, double lo, double hi) {
    std::vector<Vec> pts;
    pts.reserve(count);
    for (std::uint64_t n = 1; static_cast<int>(pts.size()) < count; ++n) {
        Vec v(dim);
        for (int j = 0; j < dim; ++j)
            v[j] = lo + (hi - lo) * radical_inverse(n, nth_prime(j));
        pts.push_back(v);
    }
    return pts;
}

} // namespace loja::detail
