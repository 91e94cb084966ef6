#include "featclean/bounds.hpp"

#include "featclean/common.hpp"
#include "featclean/parallel.hpp"
#include "featclean/random.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace featclean {

namespace {

constexpr double kTiny = 1e-300;
constexpr double kEps = 1e-16;
constexpr int kMaxTerms = 10000;

// Continued fraction for I_x(a, b), converging fast for x < (a + 1) / (a + b + 2).
double beta_fraction(double x, double a, double b) {
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxTerms; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) return h;
    }
    throw InternalError("incomplete beta continued fraction did not converge");
}

double wilson_half_width(double p, double n, double z, double& low, double& high) {
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double centre = (p + z2 / (2 * n)) / denom;
    const double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom;
    low = std::max(0.0, centre - half);
    high = std::min(1.0, centre + half);
    return half;
}

} // namespace

double reg_inc_beta(double x, double a, double b) {
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("reg_inc_beta: x must lie in [0, 1]");
    if (!(a > 0.0) || !(b > 0.0)) throw DomainError("reg_inc_beta: a and b must be positive");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_fraction(x, a, b) / a;
    return 1.0 - front * beta_fraction(1.0 - x, b, a) / b;
}

int vote_k_prime(int k) {
    if (k < 1) throw DomainError("k must be positive");
    return (k + 2) / 2 - 1;  // ceil((k + 1) / 2) - 1
}

double vote_majority_probability(int k, double e) {
    if (!(e >= 0.0 && e <= 1.0)) throw DomainError("noise rate bound e must lie in [0, 1]");
    const int kp = vote_k_prime(k);
    return reg_inc_beta(1.0 - e, k + 1 - kp, kp + 1);
}

double vote_lower_bound(const VoteBoundInput& input) {
    if (!(input.delta_k >= 0.0 && input.delta_k <= 1.0)) throw DomainError("delta_k must lie in [0, 1]");
    return (1.0 - input.delta_k) * vote_majority_probability(input.k, input.e);
}

double majority_probability_ratio(int k1, int k2, double e) {
    return vote_majority_probability(k2, e) / vote_majority_probability(k1, e);
}

double k_breakeven(int k1, int k2, double e, double delta_k1) {
    if (k1 >= k2) throw DomainError("k_breakeven needs k1 < k2");
    if (!(delta_k1 >= 0.0 && delta_k1 <= 1.0)) throw DomainError("delta_k1 must lie in [0, 1]");
    return 1.0 - (1.0 - delta_k1) / majority_probability_ratio(k1, k2, e);
}

double rank_f1_lower(const RankBoundInput& in) {
    if (in.n_minus <= 0) throw DomainError("N- must be positive");
    if (in.n_plus < 0 || in.alpha < 0) throw DomainError("N+ and alpha must be non-negative");
    if (in.alpha > in.n_plus) throw DomainError("alpha must not exceed N+");
    return 1.0 - (std::exp(-in.v) * static_cast<double>(std::max(in.n_minus, in.n_plus)) + in.alpha) / in.n_minus;
}

RankBound rank_f1_bound(const RankBoundInput& in, std::uint64_t mc_samples, std::uint64_t seed, unsigned threads) {
    RankBound out;
    out.f1_lower = rank_f1_lower(in);
    if (!(in.spread > 0.0)) throw DomainError("spread (Delta) must be positive");
    if (!(in.v > 0.0)) throw DomainError("tail decay v must be positive");
    if (in.mu_gap < -1.0 || in.mu_gap > 1.0) throw DomainError("mu_gap must lie in [-1, 1]");
    if (mc_samples < 10000) throw DomainError("mc_samples must be at least 10000");
    out.samples = mc_samples;

    const double cut = in.mu_gap - in.spread;
    // B1 - B2 lies in [-1, 1]
    if (cut >= 1.0 || cut <= -1.0) {
        out.prob_p = cut >= 1.0 ? 1.0 : 0.0;
        out.ci_low = out.ci_high = out.prob_p;
        return out;
    }

    constexpr std::uint64_t kChunk = 1 << 16;
    const std::uint64_t chunks = (mc_samples + kChunk - 1) / kChunk;
    std::vector<std::uint64_t> hits(chunks, 0);
    const double inv_n_minus = 1.0 / static_cast<double>(in.n_minus);
    const bool degenerate_b2 = in.alpha == in.n_plus;  // Beta(alpha + 1, 0) is a point mass at 1

    parallel_chunks(mc_samples, kChunk, threads, [&](std::size_t c, std::size_t begin, std::size_t end) {
        Rng rng = make_rng(seed, Stream::BoundMonteCarlo, {c});
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::gamma_distribution<double> ga(static_cast<double>(in.alpha + 1), 1.0);
        std::gamma_distribution<double> gb(degenerate_b2 ? 1.0 : static_cast<double>(in.n_plus - in.alpha), 1.0);
        std::uint64_t local = 0;
        for (std::size_t s = begin; s < end; ++s) {
            // max of N- uniforms via inverse CDF
            const double b1 = std::pow(unit(rng), inv_n_minus);
            double b2 = 1.0;
            if (!degenerate_b2) {
                const double x = ga(rng);
                const double y = gb(rng);
                b2 = x / (x + y);
            }
            local += (b1 - b2 < cut);
        }
        hits[c] = local;
    });

    std::uint64_t total = 0;
    for (auto h : hits) total += h;
    const double n = static_cast<double>(mc_samples);
    out.prob_p = static_cast<double>(total) / n;
    out.ci_half_width = wilson_half_width(out.prob_p, n, 1.959963984540054, out.ci_low, out.ci_high);
    return out;
}

} // namespace featclean
