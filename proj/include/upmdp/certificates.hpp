#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "upmdp/game.hpp"
#include "upmdp/mdp.hpp"
#include "upmdp/model.hpp"
#include "upmdp/interval.hpp"
#include "upmdp/parallel.hpp"

namespace upmdp {

inline double log_choose(double n, double k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

namespace detail {

/// The scenario-risk polynomial in log space. Evaluating
///   xi_k(t) = C(N,k) t^(N-k) - beta/(2N) sum_{i=k}^{N-1} C(i,k) t^(i-k)
///                            - beta/(6N) sum_{i=N+1}^{4N} C(i,k) t^(i-k)
/// (positive part degenerates to the constant 1 when k = N) is reduced to the
/// difference g = log(positive) - log(sum of negatives), so sign(xi) = sign(g)
/// and the relative residual is 1 - exp(-|g|). Degrees reach 4N - k, far past
/// double range, hence the log-domain arithmetic.
class XiPolynomial {
  public:
    XiPolynomial(int n, int k, double beta) : n_(n), k_(k) {
        const double log_low = std::log(beta) - std::log(2.0 * n);
        const double log_high = std::log(beta) - std::log(6.0 * n);
        for (int i = k; i <= n - 1; ++i)
            neg_terms_.push_back({log_low + log_choose(i, k), static_cast<double>(i - k)});
        for (int i = n + 1; i <= 4 * n; ++i)
            neg_terms_.push_back({log_high + log_choose(i, k), static_cast<double>(i - k)});
        log_pos_coeff_ = k == n ? 0.0 : log_choose(n, k);
        pos_degree_ = static_cast<double>(n - k);
    }

    /// g(x) with x = ln t. Concave in x (a line minus a logsumexp).
    double log_gap(double x) const {
        double max_term = -std::numeric_limits<double>::infinity();
        for (const auto& [lc, deg] : neg_terms_) max_term = std::max(max_term, lc + deg * x);
        double acc = 0.0;
        for (const auto& [lc, deg] : neg_terms_) acc += std::exp(lc + deg * x - max_term);
        const double log_neg = max_term + std::log(acc);
        return log_pos_coeff_ + pos_degree_ * x - log_neg;
    }

    double relative_residual(double x) const { return -std::expm1(-std::abs(log_gap(x))); }

  private:
    int n_, k_;
    double log_pos_coeff_ = 0.0;
    double pos_degree_ = 0.0;
    std::vector<std::pair<double, double>> neg_terms_;  // (log coefficient, degree)
};

/// Bisects g to its sign change inside [lo, hi] (in x = ln t).
inline double bisect_log_gap(const XiPolynomial& xi, double lo, double hi, bool positive_at_hi) {
    for (int iter = 0; iter < 200 && hi - lo > 1e-15; ++iter) {
        const double mid = 0.5 * (lo + hi);
        const bool positive = xi.log_gap(mid) > 0.0;
        if (positive == positive_at_hi) hi = mid;
        else lo = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

struct XiRoots {
    double t_lo = 0.0, t_hi = 0.0;
    double residual_lo = 0.0, residual_hi = 0.0;  // |xi(root)| relative to the dominant part
};

/// Both nonnegative roots of the scenario-risk polynomial. For k = N the
/// polynomial has a single root, reported as t_hi with t_lo defined as 0.
inline XiRoots xi_roots(int n, int k, double beta) {
    if (n < 1 || k < 0 || k > n) throw InvalidInputError("xi_roots requires 0 <= k <= N, N >= 1");
    if (!(beta > 0.0 && beta < 1.0)) throw InvalidInputError("beta must lie in (0, 1)");
    const detail::XiPolynomial xi(n, k, beta);
    const double kLogCap = 41.0 * std::log(2.0);  // expansion cap at t = 2^41

    XiRoots out;
    if (k == n) {
        // Monotone decreasing: positive at t -> 0, negative for large t.
        double lo = std::log(1e-300);
        double hi = std::log(2.0);
        while (xi.log_gap(hi) > 0.0) {
            hi += std::log(2.0);
            if (hi > kLogCap) throw NoSignChangeError("xi_N stayed positive up to the bracketing cap");
        }
        const double x = detail::bisect_log_gap(xi, lo, hi, /*positive_at_hi=*/false);
        out.t_lo = 0.0;
        out.residual_lo = 0.0;
        out.t_hi = std::exp(x);
        out.residual_hi = xi.relative_residual(x);
        return out;
    }

    // Locate the concave maximum of g, expanding the upper end until g has
    // started decreasing.
    double a = std::log(1e-12);
    double b = std::log(2.0);
    while (xi.log_gap(b) >= xi.log_gap(b - 0.1) && b < kLogCap) b += std::log(2.0);
    for (int iter = 0; iter < 200 && b - a > 1e-12; ++iter) {
        const double m1 = a + (b - a) / 3.0;
        const double m2 = b - (b - a) / 3.0;
        if (xi.log_gap(m1) < xi.log_gap(m2)) a = m1;
        else b = m2;
    }
    const double peak = 0.5 * (a + b);
    if (xi.log_gap(peak) <= 0.0)
        throw NoSignChangeError("xi_k has no positive region; check (N, k, beta)");

    const double x_lo = detail::bisect_log_gap(xi, std::log(1e-300), peak, /*positive_at_hi=*/true);
    double upper = peak + std::log(2.0);
    while (xi.log_gap(upper) > 0.0) {
        upper += std::log(2.0);
        if (upper > kLogCap) throw NoSignChangeError("xi_k stayed positive up to the bracketing cap");
    }
    const double x_hi = detail::bisect_log_gap(xi, peak, upper, /*positive_at_hi=*/false);

    out.t_lo = std::exp(x_lo);
    out.t_hi = std::exp(x_hi);
    out.residual_lo = xi.relative_residual(x_lo);
    out.residual_hi = xi.relative_residual(x_hi);
    return out;
}

/// Risk interval of Theorem-2 type: eps_lo = max{0, 1 - t_hi},
/// eps_hi = 1 - t_lo. eps_hi(N) = 1 because t_lo(N) = 0.
inline std::pair<double, double> epsilon_bounds(int n, int k, double beta) {
    const XiRoots roots = xi_roots(n, k, beta);
    return {std::max(0.0, 1.0 - roots.t_hi), 1.0 - roots.t_lo};
}

/// Degenerate-problem risk bound: 1 - (beta / (N * C(N,k)))^(1/(N-k)),
/// with mu(N) defined as 1.
inline double mu_bound(int n, int k, double beta) {
    if (n < 1 || k < 0 || k > n) throw InvalidInputError("mu_bound requires 0 <= k <= N, N >= 1");
    if (!(beta > 0.0 && beta < 1.0)) throw InvalidInputError("beta must lie in (0, 1)");
    if (k == n) return 1.0;
    const double log_radicand = std::log(beta) - std::log(static_cast<double>(n)) -
                                log_choose(n, k);
    return -std::expm1(log_radicand / static_cast<double>(n - k));
}

/// Smallest eps with binomial tail sum_{i<d} C(N,i) eps^i (1-eps)^(N-i)
/// below beta: the classical convex scenario bound with d support
/// constraints (d = 1 gives 1 - beta^(1/N)).
inline double classical_convex_bound(int n, int d, double beta) {
    if (n < 1 || d < 1 || d > n) throw InvalidInputError("classical bound requires 1 <= d <= N");
    if (!(beta > 0.0 && beta < 1.0)) throw InvalidInputError("beta must lie in (0, 1)");
    auto log_cdf = [&](double eps) {
        double max_term = -std::numeric_limits<double>::infinity();
        std::vector<double> terms(d);
        for (int i = 0; i < d; ++i) {
            terms[i] = log_choose(n, i) + i * std::log(eps) + (n - i) * std::log1p(-eps);
            max_term = std::max(max_term, terms[i]);
        }
        double acc = 0.0;
        for (double term : terms) acc += std::exp(term - max_term);
        return max_term + std::log(acc);
    };
    const double log_beta = std::log(beta);
    double lo = 0.0, hi = 1.0;
    for (int iter = 0; iter < 200 && hi - lo > 1e-15; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (log_cdf(mid) <= log_beta) hi = mid;
        else lo = mid;
    }
    return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Support counting per policy class
// ---------------------------------------------------------------------------

/// Mixed policies: scenarios carrying weight in the adversary's equilibrium
/// strategy.
inline int support_count_mixed(const std::vector<double>& scenario_weights, double floor = 1e-9) {
    int count = 0;
    for (double w : scenario_weights)
        if (w > floor) ++count;
    return count;
}

/// Behavioural policies: scenarios where the robust value is tight.
inline int support_count_behavioural(const std::vector<double>& values, double lambda_star,
                                     double tol = 1e-4) {
    int count = 0;
    for (double v : values)
        if (std::abs(v - lambda_star) <= tol) ++count;
    return count;
}

/// Interval MDPs: scenarios attaining the lower or upper endpoint of at least
/// one parameterized transition interval. Parameter-free entries (absorbing
/// self-loops, constant rows) have sample-independent intervals, so no sample
/// defines them and they do not contribute.
inline int support_count_imdp(const UpMdpTemplate& t, const ScenarioSet& scenarios,
                              const IntervalMdp& imdp, double tol = 1e-12) {
    struct Watched {
        int state;
        std::size_t slot;
        int target;
    };
    std::vector<Watched> watched;
    for (int s = 0; s < t.num_states(); ++s)
        for (std::size_t slot = 0; slot < t.trans[s].size(); ++slot)
            for (const auto& entry : t.trans[s][slot])
                if (!expr_parameters(entry.expr).empty())
                    watched.push_back({s, slot, entry.target});

    int count = 0;
    for (std::size_t idx = 0; idx < scenarios.samples.size(); ++idx) {
        const Mdp m = instantiate(t, scenarios.samples[idx], static_cast<long>(idx));
        bool attains = false;
        for (const auto& w : watched) {
            const double p = m.trans[w.state][w.slot][w.target];
            if (std::abs(p - imdp.lo[w.state][w.slot][w.target]) <= tol ||
                std::abs(p - imdp.hi[w.state][w.slot][w.target]) <= tol) {
                attains = true;
                break;
            }
        }
        if (attains) ++count;
    }
    return count;
}

/// Deterministic MaxMin, coarse bound: policies whose value on the optimal
/// row's worst-case MDP is at least lambda*, each assumed blocked by its own
/// sample.
inline int support_bound_det_blocked(const RewardMatrix& r, std::size_t row_star, double lambda_star) {
    if (r.num_rows == 0 || r.num_cols == 0) throw EmptyInputError("empty reward matrix");
    std::size_t worst_col = 0;
    for (std::size_t j = 1; j < r.num_cols; ++j)
        if (r.at(row_star, j) < r.at(row_star, worst_col)) worst_col = j;
    int count = 0;
    for (std::size_t i = 0; i < r.num_rows; ++i)
        if (r.at(i, worst_col) >= lambda_star - 1e-9) ++count;
    return count;
}

enum class HittingMode { union_bound, greedy };

/// Deterministic MaxMin, refined bound via the hitting-set relaxation:
/// blocked policies contribute the samples that hold them at or below
/// lambda*. Union mode counts all such samples; greedy mode runs the standard
/// greedy hitting-set approximation. Both are feasible hitting sets, hence
/// valid upper bounds on the minimal support set.
inline int support_bound_det_hitting(const RewardMatrix& r, double lambda_star, HittingMode mode) {
    if (r.num_rows == 0 || r.num_cols == 0) throw EmptyInputError("empty reward matrix");
    const StackelbergResult stack = stackelberg_maxmin(r);
    const std::size_t u_star = stack.min_col_of_row[stack.best_row];

    std::vector<std::vector<std::size_t>> blocking_sets;
    for (std::size_t i = 0; i < r.num_rows; ++i) {
        if (r.at(i, u_star) < lambda_star - 1e-9) continue;  // not blocked
        std::vector<std::size_t> v;
        for (std::size_t j = 0; j < r.num_cols; ++j)
            if (r.at(i, j) <= lambda_star + 1e-9) v.push_back(j);
        if (!v.empty()) blocking_sets.push_back(std::move(v));
    }
    if (blocking_sets.empty()) return 0;

    if (mode == HittingMode::union_bound) {
        std::vector<char> in_union(r.num_cols, 0);
        for (const auto& v : blocking_sets)
            for (std::size_t j : v) in_union[j] = 1;
        return static_cast<int>(std::count(in_union.begin(), in_union.end(), 1));
    }

    // Greedy: repeatedly pick the sample hitting the most uncovered sets.
    std::vector<char> covered(blocking_sets.size(), 0);
    int picked = 0;
    std::size_t remaining = blocking_sets.size();
    while (remaining > 0) {
        std::vector<std::size_t> hits(r.num_cols, 0);
        for (std::size_t v = 0; v < blocking_sets.size(); ++v) {
            if (covered[v]) continue;
            for (std::size_t j : blocking_sets[v]) ++hits[j];
        }
        const std::size_t best = static_cast<std::size_t>(
            std::max_element(hits.begin(), hits.end()) - hits.begin());
        ++picked;
        for (std::size_t v = 0; v < blocking_sets.size(); ++v) {
            if (covered[v]) continue;
            if (std::find(blocking_sets[v].begin(), blocking_sets[v].end(), best) !=
                blocking_sets[v].end()) {
                covered[v] = 1;
                --remaining;
            }
        }
    }
    return picked;
}

// ---------------------------------------------------------------------------
// Certificates
// ---------------------------------------------------------------------------

struct RiskCertificate {
    std::string method;  // imdp | mixed | behavioural | deterministic-maxmin
    int n = 0;
    double beta = 0.0;
    int support_count = 0;
    double lambda_star = 0.0;
    std::optional<double> eps_lo, eps_hi;  // non-degenerate path
    std::optional<double> mu;              // degenerate path

    /// The single number quoted as "risk upper bound" in reports.
    double upper_bound() const { return mu ? *mu : *eps_hi; }
};

/// Attaches the PAC risk bound matching the synthesis method: mixed and
/// behavioural policies take the root-based risk interval, interval-MDP and
/// deterministic MaxMin policies the degenerate-case mu bound.
inline RiskCertificate make_certificate(const std::string& method, double lambda_star, int n,
                                        double beta, int support_count) {
    RiskCertificate cert;
    cert.method = method;
    cert.n = n;
    cert.beta = beta;
    cert.support_count = support_count;
    cert.lambda_star = lambda_star;
    if (method == "mixed" || method == "behavioural") {
        const auto [lo, hi] = epsilon_bounds(n, support_count, beta);
        cert.eps_lo = lo;
        cert.eps_hi = hi;
    } else if (method == "imdp" || method == "deterministic-maxmin") {
        cert.mu = mu_bound(n, support_count, beta);
    } else {
        throw InvalidInputError("unknown certificate method '" + method + "'");
    }
    return cert;
}

/// Fraction of M fresh scenario draws on which the policy falls below
/// lambda*. Draws come from the validation stream of `seed`, so they are
/// independent of same-seed synthesis scenarios.
inline double empirical_risk(const UpMdpTemplate& t, const PolicyVariant& policy, double lambda_star,
                             std::size_t m, std::uint64_t seed, double solve_tol = 1e-9,
                             int jobs = 1) {
    if (m == 0) throw EmptyInputError("empirical risk needs at least one validation draw");
    std::vector<char> violated(m, 0);
    parallel_for(m, jobs, [&](std::size_t i) {
        rng::Stream stream(seed, rng::Purpose::validation, i);
        const auto v = detail::draw_parameter_vector(t.distribution, stream);
        const Mdp mdp = instantiate(t, v, static_cast<long>(i));
        violated[i] = solution(mdp, policy, solve_tol) < lambda_star - 1e-9 ? 1 : 0;
    });
    return static_cast<double>(std::count(violated.begin(), violated.end(), 1)) /
           static_cast<double>(m);
}

}  // namespace upmdp
