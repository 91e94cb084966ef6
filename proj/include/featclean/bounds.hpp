#pragma once

#include <cstdint>

namespace featclean {

/// Regularized incomplete beta I_x(a, b), evaluated with the modified Lentz
/// continued fraction. Throws DomainError for x outside [0, 1] or a, b <= 0.
double reg_inc_beta(double x, double a, double b);

struct VoteBoundInput {
    int k = 10;
    double e = 0.0;        // upper bound on the flip rate, [0, 0.5)
    double delta_k = 0.0;  // clusterability violation rate
};

/// ceil((k + 1) / 2) - 1
int vote_k_prime(int k);

/// I_{1-e}(k + 1 - k', k' + 1): probability that a strict majority of the
/// k + 1 observed labels is clean.
double vote_majority_probability(int k, double e);

/// (1 - delta_k) * I_{1-e}(k + 1 - k', k' + 1)
double vote_lower_bound(const VoteBoundInput& input);

/// Ratio I(k2) / I(k1) of the majority probabilities.
double majority_probability_ratio(int k1, int k2, double e);

/// The delta_{k2} at which the vote bound at k2 equals the bound at k1;
/// above it, growing k from k1 to k2 cannot raise the bound.
double k_breakeven(int k1, int k2, double e, double delta_k1);

struct RankBoundInput {
    long n_minus = 0;   // corrupted instances in the class
    long n_plus = 0;    // clean instances in the class
    long alpha = 0;
    double mu_gap = 0;  // mu_true - mu_false
    double spread = 0;  // tail width Delta
    double v = 0;       // tail decay rate
};

struct RankBound {
    double f1_lower = 0;
    double prob_p = 0;
    double ci_half_width = 0;  // 95% Wilson interval
    double ci_low = 0;
    double ci_high = 0;
    std::uint64_t samples = 0;
};

/// F1 lower bound of rank detection in one class, plus a Monte-Carlo
/// estimate of the probability it holds:
/// P(B1 - B2 < mu_gap - spread), B1 ~ Beta(N-, 1), B2 ~ Beta(alpha + 1, N+ - alpha).
RankBound rank_f1_bound(const RankBoundInput& input, std::uint64_t mc_samples, std::uint64_t seed,
                        unsigned threads = 0);

/// 1 - (exp(-v) * max(N-, N+) + alpha) / N-
double rank_f1_lower(const RankBoundInput& input);

} // namespace featclean
