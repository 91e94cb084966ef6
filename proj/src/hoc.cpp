#include "featclean/hoc.hpp"

#include "featclean/parallel.hpp"
#include "featclean/random.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace featclean {

namespace {

// Parameters packed as [prior (K) | transition row-major (K*K)]; residuals as
// [nu1 (K) | nu2 (K*K) | nu3 (K*K*K)], model minus data, scaled by sqrt(weight).
Eigen::VectorXd pack(const Eigen::VectorXd& p, const RowMatrixXd& t) {
    Eigen::VectorXd theta(p.size() + t.size());
    theta.head(p.size()) = p;
    theta.tail(t.size()) = t.reshaped<Eigen::RowMajor>();
    return theta;
}

void unpack(const Eigen::VectorXd& theta, int k, Eigen::VectorXd& p, RowMatrixXd& t) {
    p = theta.head(k);
    t = theta.tail(k * k).reshaped<Eigen::RowMajor>(k, k);
}

Eigen::VectorXd project(const Eigen::VectorXd& theta, int k) {
    Eigen::VectorXd out(theta.size());
    out.head(k) = project_to_simplex(theta.head(k));
    for (int c = 0; c < k; ++c) out.segment(k + c * k, k) = project_to_simplex(theta.segment(k + c * k, k));
    return out;
}

Eigen::VectorXd residual_vector(const ConsensusStats& stats, const Eigen::VectorXd& theta, const HocOptions& o) {
    const int k = stats.n_classes();
    Eigen::VectorXd p;
    RowMatrixXd t;
    unpack(theta, k, p, t);
    const ConsensusStats model = expected_consensus(p, t);
    Eigen::VectorXd r(k + k * k + k * k * k);
    r.head(k) = std::sqrt(o.weight1) * (model.nu1 - stats.nu1);
    r.segment(k, k * k) = std::sqrt(o.weight2) * (model.nu2 - stats.nu2).reshaped<Eigen::RowMajor>();
    for (std::size_t i = 0; i < model.nu3.data.size(); ++i) {
        r(k + k * k + static_cast<Eigen::Index>(i)) = std::sqrt(o.weight3) * (model.nu3.data[i] - stats.nu3.data[i]);
    }
    return r;
}

Eigen::MatrixXd residual_jacobian(const Eigen::VectorXd& theta, int k, const HocOptions& o) {
    Eigen::VectorXd p;
    RowMatrixXd t;
    unpack(theta, k, p, t);
    const int n1 = k, n2 = k * k;
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n1 + n2 + k * k * k, k + k * k);
    const double s1 = std::sqrt(o.weight1), s2 = std::sqrt(o.weight2), s3 = std::sqrt(o.weight3);
    auto tcol = [k](int c, int a) { return k + c * k + a; };
    for (int c = 0; c < k; ++c) {
        // nu1_i = sum_c p_c T_ci
        for (int i = 0; i < k; ++i) {
            jac(i, c) += s1 * t(c, i);
            jac(i, tcol(c, i)) += s1 * p(c);
        }
        // nu2_ij = sum_c p_c T_ci T_cj
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) {
                const int row = n1 + i * k + j;
                jac(row, c) += s2 * t(c, i) * t(c, j);
                jac(row, tcol(c, i)) += s2 * p(c) * t(c, j);
                jac(row, tcol(c, j)) += s2 * p(c) * t(c, i);
            }
        }
        // nu3_ijl = sum_c p_c T_ci T_cj T_cl
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) {
                for (int l = 0; l < k; ++l) {
                    const int row = n1 + n2 + (i * k + j) * k + l;
                    jac(row, c) += s3 * t(c, i) * t(c, j) * t(c, l);
                    jac(row, tcol(c, i)) += s3 * p(c) * t(c, j) * t(c, l);
                    jac(row, tcol(c, j)) += s3 * p(c) * t(c, i) * t(c, l);
                    jac(row, tcol(c, l)) += s3 * p(c) * t(c, i) * t(c, j);
                }
            }
        }
    }
    return jac;
}

struct RestartResult {
    Eigen::VectorXd prior;
    RowMatrixXd transition;
    double objective = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
    std::vector<double> trace;
};

// Projected Levenberg-Marquardt: damped Gauss-Newton step, projected back
// onto the simplices, accepted only if the objective does not increase.
RestartResult descend(const ConsensusStats& stats, Eigen::VectorXd theta, const HocOptions& o) {
    const int k = stats.n_classes();
    RestartResult out;
    Eigen::VectorXd r = residual_vector(stats, theta, o);
    double f = r.squaredNorm();
    out.trace.push_back(f);

    double damping = o.initial_damping;
    bool fresh = true;  // Jacobian valid for the current theta
    Eigen::MatrixXd jac, normal;
    Eigen::VectorXd grad;
    int it = 0;
    for (; it < o.max_iterations; ++it) {
        if (fresh) {
            jac = residual_jacobian(theta, k, o);
            normal = jac.transpose() * jac;
            grad = jac.transpose() * r;
            fresh = false;
        }
        Eigen::MatrixXd system = normal;
        system.diagonal().array() += damping * (normal.diagonal().array() + 1e-12);
        const Eigen::VectorXd step = system.ldlt().solve(-grad);
        const Eigen::VectorXd candidate = project(theta + step, k);
        Eigen::VectorXd r_next = residual_vector(stats, candidate, o);
        const double f_next = r_next.squaredNorm();
        if (!(f_next <= f)) {
            damping *= 4.0;
            if (damping > 1e16) {
                out.converged = true;
                break;
            }
            continue;
        }
        const double gain = f - f_next;
        damping = std::max(damping / 3.0, 1e-12);
        theta = candidate;
        r = std::move(r_next);
        f = f_next;
        fresh = true;
        out.trace.push_back(f);
        if (gain <= o.tolerance) {
            out.converged = true;
            ++it;
            break;
        }
    }
    unpack(theta, k, out.prior, out.transition);
    out.objective = f;
    out.iterations = it;
    return out;
}

// Relabel clean classes (rows of T with p) to maximize the trace; the moments are invariant.
void canonicalize(Eigen::VectorXd& prior, RowMatrixXd& transition) {
    const int k = static_cast<int>(prior.size());
    std::vector<int> perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<int> best = perm;
    if (k <= 8) {
        double best_trace = -1.0;
        do {
            double t = 0.0;
            for (int c = 0; c < k; ++c) t += transition(perm[c], c);
            if (t > best_trace + 1e-15) {
                best_trace = t;
                best = perm;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
    } else {
        std::vector<bool> used_row(k, false), used_col(k, false);
        for (int step = 0; step < k; ++step) {
            int br = -1, bc = -1;
            for (int r = 0; r < k; ++r) {
                if (used_row[r]) continue;
                for (int c = 0; c < k; ++c) {
                    if (!used_col[c] && (br < 0 || transition(r, c) > transition(br, bc))) {
                        br = r;
                        bc = c;
                    }
                }
            }
            used_row[br] = used_col[bc] = true;
            best[bc] = br;
        }
    }
    Eigen::VectorXd p(k);
    RowMatrixXd t(k, k);
    for (int c = 0; c < k; ++c) {
        p(c) = prior(best[c]);
        t.row(c) = transition.row(best[c]);
    }
    prior = std::move(p);
    transition = std::move(t);
}

} // namespace

Eigen::VectorXd label_frequencies(const LabelVector& labels, int n_classes) {
    Eigen::VectorXd q = Eigen::VectorXd::Zero(n_classes);
    if (labels.empty()) return q;
    std::vector<long> counts(static_cast<std::size_t>(n_classes), 0);
    for (int y : labels) {
        if (y < 0 || y >= n_classes) throw ValidationError("label " + std::to_string(y) + " out of range");
        ++counts[static_cast<std::size_t>(y)];
    }
    for (int j = 0; j < n_classes; ++j) q(j) = static_cast<double>(counts[static_cast<std::size_t>(j)]) / labels.size();
    return q;
}

ConsensusStats consensus_stats(const KnnIndex& index, const LabelVector& noisy_labels, int n_classes) {
    if (index.k < 2) throw ConfigError("consensus statistics need an index with k >= 2");
    const Eigen::Index n = index.size();
    if (static_cast<Eigen::Index>(noisy_labels.size()) != n) {
        throw ValidationError("label count does not match index size");
    }
    const auto k = static_cast<std::size_t>(n_classes);
    std::vector<long> c1(k, 0), c2(k * k, 0), c3(k * k * k, 0);
    auto label = [&](Eigen::Index i) {
        const int y = noisy_labels[static_cast<std::size_t>(i)];
        if (y < 0 || y >= n_classes) throw ValidationError("label " + std::to_string(y) + " out of range");
        return static_cast<std::size_t>(y);
    };
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::size_t a = label(i);
        const std::size_t b = label(index.neighbor_ids(i, 0));
        const std::size_t c = label(index.neighbor_ids(i, 1));
        ++c1[a];
        ++c2[a * k + b];
        ++c3[(a * k + b) * k + c];
    }

    ConsensusStats s;
    const double total = static_cast<double>(n);
    s.nu1.resize(n_classes);
    s.nu2.resize(n_classes, n_classes);
    s.nu3 = Tensor3(n_classes);
    for (std::size_t i = 0; i < k; ++i) {
        s.nu1(static_cast<Eigen::Index>(i)) = c1[i] / total;
        for (std::size_t j = 0; j < k; ++j) {
            s.nu2(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c2[i * k + j] / total;
        }
    }
    for (std::size_t i = 0; i < c3.size(); ++i) s.nu3.data[i] = c3[i] / total;
    return s;
}

ConsensusStats expected_consensus(const Eigen::VectorXd& prior, const RowMatrixXd& transition) {
    const int k = static_cast<int>(prior.size());
    ConsensusStats s;
    s.nu1 = transition.transpose() * prior;
    s.nu2 = RowMatrixXd::Zero(k, k);
    s.nu3 = Tensor3(k);
    for (int c = 0; c < k; ++c) {
        const auto tc = transition.row(c);
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) {
                const double pij = prior(c) * tc(i) * tc(j);
                s.nu2(i, j) += pij;
                for (int l = 0; l < k; ++l) s.nu3(i, j, l) += pij * tc(l);
            }
        }
    }
    return s;
}

double hoc_objective(const ConsensusStats& stats, const Eigen::VectorXd& prior, const RowMatrixXd& transition,
                     const HocOptions& options) {
    return residual_vector(stats, pack(prior, transition), options).squaredNorm();
}

Eigen::VectorXd hoc_gradient(const ConsensusStats& stats, const Eigen::VectorXd& prior, const RowMatrixXd& transition,
                             const HocOptions& options) {
    const Eigen::VectorXd theta = pack(prior, transition);
    return 2.0 * residual_jacobian(theta, stats.n_classes(), options).transpose() *
           residual_vector(stats, theta, options);
}

HocFit fit_noise_model(const ConsensusStats& stats, const HocOptions& options, const Eigen::VectorXd& noisy_marginal) {
    const int k = stats.n_classes();
    if (k < 1) throw ConfigError("consensus statistics are empty");
    if (options.restarts < 1) throw ConfigError("HOC needs at least one restart");
    if (noisy_marginal.size() != 0 && noisy_marginal.size() != k) {
        throw ConfigError("noisy marginal has the wrong number of classes");
    }

    const RowMatrixXd t0 = 0.7 * RowMatrixXd::Identity(k, k) + RowMatrixXd::Constant(k, k, 0.3 / k);
    std::vector<RestartResult> results(static_cast<std::size_t>(options.restarts));
    parallel_chunks(results.size(), 1, options.threads, [&](std::size_t r, std::size_t, std::size_t) {
        Rng rng = make_rng(options.seed, Stream::HocRestart, {r});
        std::gamma_distribution<double> unit_gamma(1.0, 1.0);
        Eigen::VectorXd p0(k);
        for (int i = 0; i < k; ++i) p0(i) = unit_gamma(rng);
        p0 /= p0.sum();
        results[r] = descend(stats, pack(p0, t0), options);
    });

    for (auto& r : results) canonicalize(r.prior, r.transition);

    // equally good fits differ only by non-identifiable relabelings; keep the most diagonal one
    double floor = results[0].objective;
    for (const auto& r : results) floor = std::min(floor, r.objective);
    const double slack = std::max(1e-12, 1e-6 * floor);
    std::size_t best = results.size();
    for (std::size_t r = 0; r < results.size(); ++r) {
        if (results[r].objective > floor + slack) continue;
        if (best == results.size() || results[r].transition.trace() > results[best].transition.trace() + 1e-12) best = r;
    }

    HocFit fit;
    fit.model.prior = results[best].prior;
    fit.model.transition = results[best].transition;
    fit.model.noisy_marginal = noisy_marginal.size() == 0 ? stats.nu1 : noisy_marginal;
    fit.objective = results[best].objective;
    fit.iterations = results[best].iterations;
    fit.converged = results[best].converged;
    fit.objective_trace = std::move(results[best].trace);
    return fit;
}

Posterior posterior_clean(const NoiseModel& model, const std::vector<int>& present_classes) {
    const int k = model.n_classes();
    if (model.transition.rows() != k || model.transition.cols() != k || model.noisy_marginal.size() != k) {
        throw ValidationError("noise model dimensions disagree");
    }
    Posterior out;
    out.values.resize(k);
    for (int j = 0; j < k; ++j) {
        const double q = model.noisy_marginal(j);
        if (!(q > 0)) {
            if (std::find(present_classes.begin(), present_classes.end(), j) != present_classes.end()) {
                throw InternalError("noisy marginal is zero for class " + std::to_string(j) +
                                    " which has members");
            }
            out.values(j) = 1.0;
            continue;
        }
        const double raw = model.prior(j) * model.transition(j, j) / q;
        if (raw > 1.0 || raw < 0.0) out.clipped_classes.push_back(j);
        out.values(j) = std::clamp(raw, 0.0, 1.0);
    }
    return out;
}

} // namespace featclean
