#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace sasr {

/// cos() over a contiguous array. Branch-free Cody-Waite reduction plus
/// minimax kernels so the compiler can vectorize; accurate to ~1 ulp for
/// |x| <= 1e6, with a scalar fallback pass above that.
inline void cos_array(const double* x, double* out, std::size_t n) {
    constexpr double kTwoOverPi = 0.63661977236758134308;
    constexpr double kPiOver2Hi = 1.57079632673412561417e+00;
    constexpr double kPiOver2Mid = 6.07710050650619224932e-11;
    constexpr double kPiOver2Lo = 2.02226624879595063154e-21;
    constexpr double kS1 = -1.66666666666666324348e-01, kS2 = 8.33333333332248946124e-03,
                     kS3 = -1.98412698298579493134e-04, kS4 = 2.75573137070700676789e-06,
                     kS5 = -2.50507602534068634195e-08, kS6 = 1.58969099521155010221e-10;
    constexpr double kC1 = 4.16666666666666019037e-02, kC2 = -1.38888888888741095749e-03,
                     kC3 = 2.48015872894767294178e-05, kC4 = -2.75573143513906633035e-07,
                     kC5 = 2.08757232129817482790e-09, kC6 = -1.13596475577881948265e-11;

#pragma omp simd
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = x[i];
        const double q = std::nearbyint(xi * kTwoOverPi);
        double r = xi - q * kPiOver2Hi;
        r -= q * kPiOver2Mid;
        r -= q * kPiOver2Lo;
        const long k = static_cast<long>(q) & 3;
        const double r2 = r * r;
        const double sinr =
            r + r * r2 * (kS1 + r2 * (kS2 + r2 * (kS3 + r2 * (kS4 + r2 * (kS5 + r2 * kS6)))));
        const double cosr =
            1.0 - 0.5 * r2 +
            r2 * r2 * (kC1 + r2 * (kC2 + r2 * (kC3 + r2 * (kC4 + r2 * (kC5 + r2 * kC6)))));
        const double use_sin = static_cast<double>(k & 1);
        const double sign = (k == 1 || k == 2) ? -1.0 : 1.0;
        out[i] = sign * (use_sin * sinr + (1.0 - use_sin) * cosr);
    }
    // Arguments outside the reduction range are rare; fix them up exactly.
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(x[i]) > 1.0e6) out[i] = std::cos(x[i]);
    }
}

/// Streaming mean/variance accumulator (Welford).
struct RunningStats {
    std::uint64_t count = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double v) {
        ++count;
        const double d = v - mean;
        mean += d / static_cast<double>(count);
        m2 += d * (v - mean);
    }

    void merge(const RunningStats& o) {
        if (o.count == 0) return;
        if (count == 0) {
            *this = o;
            return;
        }
        const double n1 = static_cast<double>(count);
        const double n2 = static_cast<double>(o.count);
        const double d = o.mean - mean;
        mean += d * n2 / (n1 + n2);
        m2 += o.m2 + d * d * n1 * n2 / (n1 + n2);
        count += o.count;
    }

    double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
};

inline double vector_mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

/// Standard error of the mean.
inline double vector_stderr(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = vector_mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

/// Least-squares slope of y against x.
inline double regression_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = std::min(x.size(), y.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

}  // namespace sasr
