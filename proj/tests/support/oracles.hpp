#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace featclean::testing {

/// I_x(a, b) by direct integration of the beta density.
inline double quadrature_inc_beta(double x, double a, double b) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double log_norm = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    // lo/hi are the integration limits; tc is the signed distance to the nearer one,
    // which keeps the endpoint singularities at 0 and 1 resolved
    auto density_on = [&](double lo, double hi) {
        return [=](double t, double tc) {
            double u = t, w = 1.0 - t;
            if (tc < 0.0 && lo == 0.0) u = -tc;
            if (tc > 0.0 && hi == 1.0) w = tc;
            if (u <= 0.0 || w <= 0.0) return 0.0;
            return std::exp((a - 1) * std::log(u) + (b - 1) * std::log(w) - log_norm);
        };
    };
    // integrate the smaller tail to keep absolute error small
    const double mode = a > 1 && b > 1 ? (a - 1) / (a + b - 2) : a / (a + b);
    boost::math::quadrature::tanh_sinh<double> ts(15);
    if (x <= mode) return ts.integrate(density_on(0.0, x), 0.0, x);
    return 1.0 - ts.integrate(density_on(x, 1.0), x, 1.0);
}

/// P(B1 - B2 < c) with B1 ~ Beta(n_minus, 1), B2 ~ Beta(alpha + 1, n_plus - alpha),
/// as the integral of F_B1(c + t) against the density of B2.
inline double quadrature_rank_probability(long n_minus, long n_plus, long alpha, double c) {
    auto cdf1 = [&](double u) { return u <= 0.0 ? 0.0 : u >= 1.0 ? 1.0 : std::pow(u, static_cast<double>(n_minus)); };
    if (alpha == n_plus) return cdf1(c + 1.0);
    const double a = static_cast<double>(alpha + 1), b = static_cast<double>(n_plus - alpha);
    const double log_norm = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    auto integrand = [&](double t) {
        if (t <= 0.0 || t >= 1.0) return 0.0;
        return cdf1(c + t) * std::exp((a - 1) * std::log(t) + (b - 1) * std::log1p(-t) - log_norm);
    };
    // split where cdf1 has kinks so each piece is smooth
    std::vector<double> cuts{0.0, 1.0};
    for (double k : {-c, 1.0 - c}) {
        if (k > 0.0 && k < 1.0) cuts.push_back(k);
    }
    std::sort(cuts.begin(), cuts.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, cuts[i], cuts[i + 1], 20,
                                                                               1e-13);
    }
    return std::clamp(total, 0.0, 1.0);
}

/// Plain Monte-Carlo of the same probability, both Beta variables drawn as
/// gamma ratios from a 32-bit Mersenne Twister.
inline double mc_rank_probability(long n_minus, long n_plus, long alpha, double c, std::uint64_t samples,
                                  std::uint32_t seed) {
    std::mt19937 rng(seed);
    std::gamma_distribution<double> g_nm(static_cast<double>(n_minus), 1.0), g_one(1.0, 1.0);
    std::gamma_distribution<double> g_a(static_cast<double>(alpha + 1), 1.0);
    std::gamma_distribution<double> g_b(std::max(1.0, static_cast<double>(n_plus - alpha)), 1.0);
    std::uint64_t hits = 0;
    for (std::uint64_t s = 0; s < samples; ++s) {
        const double x = g_nm(rng);
        const double b1 = x / (x + g_one(rng));
        double b2 = 1.0;
        if (alpha < n_plus) {
            const double y = g_a(rng);
            b2 = y / (y + g_b(rng));
        }
        hits += b1 - b2 < c;
    }
    return static_cast<double>(hits) / static_cast<double>(samples);
}

} // namespace featclean::testing
