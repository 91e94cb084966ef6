#include "featclean/hoc.hpp"
#include "featclean/noise_sim.hpp"
#include "support/synthetic.hpp"

#include <doctest.h>

#include <random>

using namespace featclean;

namespace {

double linf(const RowMatrixXd& a, const RowMatrixXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

} // namespace

TEST_CASE("simplex projection") {
    SUBCASE("points already on the simplex are fixed") {
        Eigen::Vector3d v(0.2, 0.3, 0.5);
        CHECK((project_to_simplex(v) - v).norm() < 1e-15);
    }
    SUBCASE("known projection") {
        // (1, 1) -> (0.5, 0.5); (2, 0) -> (1, 0)
        CHECK((project_to_simplex(Eigen::Vector2d(1, 1)) - Eigen::Vector2d(0.5, 0.5)).norm() < 1e-15);
        CHECK((project_to_simplex(Eigen::Vector2d(2, 0)) - Eigen::Vector2d(1, 0)).norm() < 1e-15);
    }
    SUBCASE("output on simplex and order preserved") {
        std::mt19937_64 rng(7);
        std::normal_distribution<double> normal(0.0, 2.0);
        for (int trial = 0; trial < 500; ++trial) {
            Eigen::VectorXd v(6);
            for (int i = 0; i < 6; ++i) v(i) = normal(rng);
            const Eigen::VectorXd p = project_to_simplex(v);
            CHECK(std::abs(p.sum() - 1.0) < 1e-12);
            CHECK((p.array() >= 0).all());
            for (int i = 0; i < 6; ++i)
                for (int j = 0; j < 6; ++j)
                    if (v(i) > v(j)) CHECK(p(i) >= p(j));
        }
    }
}

TEST_CASE("consensus statistics count triples") {
    // index built by hand: 4 points, neighbors fixed
    KnnIndex index;
    index.k = 2;
    index.normalized_features = FeatureMatrix::Identity(4, 4);
    index.neighbor_ids.resize(4, 2);
    index.neighbor_ids << 1, 2, 0, 3, 3, 0, 2, 1;
    index.neighbor_sims = RowMatrixXd::Zero(4, 2);
    const LabelVector labels{0, 1, 1, 0};
    // triples: (0,1,1) (1,0,0) (1,0,0) (0,1,1)
    const ConsensusStats s = consensus_stats(index, labels, 2);
    CHECK(s.nu1(0) == doctest::Approx(0.5));
    CHECK(s.nu2(0, 1) == doctest::Approx(0.5));
    CHECK(s.nu2(1, 0) == doctest::Approx(0.5));
    CHECK(s.nu2(0, 0) == 0.0);
    CHECK(s.nu3(0, 1, 1) == doctest::Approx(0.5));
    CHECK(s.nu3(1, 0, 0) == doctest::Approx(0.5));
    CHECK(s.nu3.sum() == doctest::Approx(1.0));

    SUBCASE("identical labels concentrate on (j, j, j)") {
        const ConsensusStats same = consensus_stats(index, LabelVector{1, 1, 1, 1}, 3);
        CHECK(same.nu1(1) == 1.0);
        CHECK(same.nu2(1, 1) == 1.0);
        CHECK(same.nu3(1, 1, 1) == 1.0);
        CHECK(same.nu3.sum() == 1.0);
    }
    SUBCASE("k < 2 is a configuration error") {
        CHECK_THROWS_AS(consensus_stats(truncate_index(index, 1), labels, 2), ConfigError);
    }
}

TEST_CASE("consensus of random labels approaches independence") {
    // labels carry no geometry, so a random neighbor graph stands in for one
    constexpr int n = 100000;
    std::mt19937_64 rng(11);
    std::bernoulli_distribution coin(0.5);
    std::uniform_int_distribution<int> other(0, n - 2);
    KnnIndex index;
    index.k = 2;
    index.normalized_features = FeatureMatrix::Ones(n, 1);
    index.neighbor_ids.resize(n, 2);
    index.neighbor_sims = RowMatrixXd::Ones(n, 2);
    for (int i = 0; i < n; ++i) {
        for (int m = 0; m < 2; ++m) {
            const int j = other(rng);
            index.neighbor_ids(i, m) = j >= i ? j + 1 : j;
        }
    }
    LabelVector labels(n);
    for (int& y : labels) y = coin(rng);
    const ConsensusStats s = consensus_stats(index, labels, 2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) CHECK(std::abs(s.nu2(i, j) - 0.25) < 0.01);
}

TEST_CASE("noiseless consensus recovers the identity") {
    const Eigen::Vector3d prior(0.2, 0.5, 0.3);
    const ConsensusStats s = expected_consensus(prior, RowMatrixXd::Identity(3, 3));
    const HocFit fit = fit_noise_model(s);
    CHECK(linf(fit.model.transition, RowMatrixXd::Identity(3, 3)) < 1e-3);
    CHECK((fit.model.prior - prior).cwiseAbs().maxCoeff() < 1e-3);
    const Posterior post = posterior_clean(fit.model);
    CHECK((post.values.array() - 1.0).abs().maxCoeff() < 1e-3);
}

TEST_CASE("analytic moments recover a binary transition matrix") {
    RowMatrixXd t(2, 2);
    t << 0.8, 0.2, 0.3, 0.7;
    const Eigen::Vector2d prior(0.5, 0.5);
    const HocFit fit = fit_noise_model(expected_consensus(prior, t));
    MESSAGE("objective " << fit.objective << " iterations " << fit.iterations);
    CHECK(linf(fit.model.transition, t) < 0.02);
}

TEST_CASE("objective never increases along accepted steps") {
    std::mt19937_64 rng(5);
    const RowMatrixXd t = testing::random_transition(3, rng);
    const HocFit fit = fit_noise_model(expected_consensus(testing::random_simplex(3, rng), t));
    for (std::size_t i = 1; i < fit.objective_trace.size(); ++i) {
        CHECK(fit.objective_trace[i] <= fit.objective_trace[i - 1]);
    }
}

TEST_CASE("posterior by Bayes' rule") {
    NoiseModel model;
    model.prior = Eigen::Vector2d(0.5, 0.5);
    model.transition.resize(2, 2);
    model.transition << 0.8, 0.2, 0.3, 0.7;
    model.noisy_marginal = model.transition.transpose() * model.prior;
    CHECK(model.noisy_marginal(0) == doctest::Approx(0.55));
    CHECK(model.noisy_marginal(1) == doctest::Approx(0.45));
    const Posterior post = posterior_clean(model);
    CHECK(post.values(0) == doctest::Approx(0.4 / 0.55).epsilon(1e-12));
    CHECK(post.values(1) == doctest::Approx(0.35 / 0.45).epsilon(1e-12));
    CHECK(post.clipped_classes.empty());

    SUBCASE("identity transition gives posterior one") {
        model.transition = RowMatrixXd::Identity(2, 2);
        model.prior = Eigen::Vector2d(0.3, 0.7);
        model.noisy_marginal = model.prior;
        const Posterior p = posterior_clean(model);
        CHECK(p.values(0) == doctest::Approx(1.0));
        CHECK(p.values(1) == doctest::Approx(1.0));
    }
    SUBCASE("raw value above one is clipped and reported") {
        model.noisy_marginal = Eigen::Vector2d(0.3, 0.7);  // 0.4 / 0.3 > 1
        const Posterior p = posterior_clean(model);
        CHECK(p.values(0) == 1.0);
        REQUIRE(p.clipped_classes.size() == 1);
        CHECK(p.clipped_classes[0] == 0);
    }
    SUBCASE("zero marginal for a populated class is an internal error") {
        model.noisy_marginal = Eigen::Vector2d(0.0, 1.0);
        CHECK_THROWS_AS(posterior_clean(model, {0, 1}), InternalError);
        CHECK(posterior_clean(model, {1}).values(0) == 1.0);
    }
}
