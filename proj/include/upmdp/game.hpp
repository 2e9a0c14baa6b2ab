#pragma once

#include <cstdint>
#include <fstream>
#include <limits>
#include <vector>

#include "upmdp/mdp.hpp"
#include "upmdp/model.hpp"
#include "upmdp/parallel.hpp"

namespace upmdp {

inline constexpr std::uint64_t kDefaultPolicyCap = 1000000;

/// Number of deterministic policies: the product of enabled-action counts
/// over non-terminal states (terminal choices are irrelevant and fixed to 0).
inline std::uint64_t deterministic_policy_count(const UpMdpTemplate& t, std::uint64_t cap) {
    std::uint64_t count = 1;
    for (int s = 0; s < t.num_states(); ++s) {
        if (t.is_terminal(s)) continue;
        count *= static_cast<std::uint64_t>(t.enabled[s].size());
        if (count > cap) throw PolicySpaceTooLargeError(count, cap);
    }
    return count;
}

/// Lexicographic enumeration over non-terminal states (earlier states are
/// more significant digits).
inline std::vector<DeterministicPolicy> enumerate_deterministic_policies(
    const UpMdpTemplate& t, std::uint64_t cap = kDefaultPolicyCap) {
    const std::uint64_t count = deterministic_policy_count(t, cap);
    const int n = t.num_states();

    std::vector<int> free_states;
    for (int s = 0; s < n; ++s)
        if (!t.is_terminal(s)) free_states.push_back(s);

    std::vector<DeterministicPolicy> out;
    out.reserve(count);
    DeterministicPolicy current;
    current.choice.assign(n, 0);
    for (std::uint64_t i = 0; i < count; ++i) {
        out.push_back(current);
        for (auto it = free_states.rbegin(); it != free_states.rend(); ++it) {
            const int s = *it;
            if (++current.choice[s] < static_cast<int>(t.enabled[s].size())) break;
            current.choice[s] = 0;
        }
    }
    return out;
}

/// Payoff matrix of the policy-vs-sample game: rows are deterministic
/// policies, columns are scenarios, entries the satisfaction probability.
struct RewardMatrix {
    std::size_t num_rows = 0, num_cols = 0;
    std::vector<double> data;  // row-major

    double at(std::size_t i, std::size_t j) const { return data[i * num_cols + j]; }
    double& at(std::size_t i, std::size_t j) { return data[i * num_cols + j]; }
};

inline RewardMatrix reward_matrix(const UpMdpTemplate& t, const ScenarioSet& scenarios,
                                  const std::vector<DeterministicPolicy>& policies, double tol = 1e-9,
                                  int jobs = 1) {
    RewardMatrix r;
    r.num_rows = policies.size();
    r.num_cols = scenarios.size();
    r.data.assign(r.num_rows * r.num_cols, 0.0);
    // One instantiation per column, shared by all rows.
    parallel_for(scenarios.size(), jobs, [&](std::size_t j) {
        const Mdp m = instantiate(t, scenarios.samples[j], static_cast<long>(j));
        for (std::size_t i = 0; i < policies.size(); ++i)
            r.at(i, j) = solution(m, policies[i], tol);
    });
    return r;
}

inline void save_reward_matrix_csv(const std::string& path, const RewardMatrix& r) {
    std::ofstream out(path);
    if (!out) throw ModelError("cannot write " + path);
    char buf[64];
    for (std::size_t i = 0; i < r.num_rows; ++i) {
        for (std::size_t j = 0; j < r.num_cols; ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", r.at(i, j));
            out << buf << (j + 1 == r.num_cols ? "" : ",");
        }
        out << "\n";
    }
}

/// Empirical-average strategies of a fictitious-play run plus its
/// exploitability gap: best-response value against the column average minus
/// best-response value against the row average. The true game value lies
/// within `gap` of `value`.
struct MixedStrategyPair {
    std::vector<double> row_strategy;  // policy player
    std::vector<double> col_strategy;  // sample adversary
    double value = 0.0;                // row_strategy * R * col_strategy
    std::uint64_t iterations = 0;
    double gap = 0.0;
};

/// Simultaneous fictitious play on a zero-sum matrix (rows maximize). Both
/// players best-respond to the opponent's empirical average, ties to the
/// lowest index; the first round responds to a uniform opponent. Stops when
/// the gap reaches tol or after max_iters rounds, and always reports the
/// residual gap.
inline MixedStrategyPair fictitious_play(const RewardMatrix& r, std::uint64_t max_iters = 100000,
                                         double tol = 1e-3) {
    if (r.num_rows == 0 || r.num_cols == 0) throw EmptyInputError("fictitious play needs a non-empty matrix");
    const std::size_t rows = r.num_rows, cols = r.num_cols;

    auto argmax = [](const std::vector<double>& v) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < v.size(); ++i)
            if (v[i] > v[best]) best = i;
        return best;
    };
    auto argmin = [](const std::vector<double>& v) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < v.size(); ++i)
            if (v[i] < v[best]) best = i;
        return best;
    };

    // row_payoff[i] = sum over recorded rounds of R[i][j_t];
    // col_payoff[j] = sum over recorded rounds of R[i_t][j]. The first round
    // responds to a uniform opponent, computed separately so that the
    // recorded averages stay consistent with the returned strategies.
    std::vector<double> row_payoff(rows, 0.0), col_payoff(cols, 0.0);
    std::vector<std::uint64_t> row_count(rows, 0), col_count(cols, 0);
    {
        std::vector<double> vs_uniform_cols(rows, 0.0), vs_uniform_rows(cols, 0.0);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) {
                vs_uniform_cols[i] += r.at(i, j) / static_cast<double>(cols);
                vs_uniform_rows[j] += r.at(i, j) / static_cast<double>(rows);
            }
        const std::size_t bi = argmax(vs_uniform_cols);
        const std::size_t bj = argmin(vs_uniform_rows);
        ++row_count[bi];
        ++col_count[bj];
        for (std::size_t i = 0; i < rows; ++i) row_payoff[i] += r.at(i, bj);
        for (std::size_t j = 0; j < cols; ++j) col_payoff[j] += r.at(bi, j);
    }

    std::uint64_t iter = 1;
    double gap = (row_payoff[argmax(row_payoff)] - col_payoff[argmin(col_payoff)]);
    while (gap > tol && iter < max_iters) {
        const std::size_t bi = argmax(row_payoff);
        const std::size_t bj = argmin(col_payoff);
        ++row_count[bi];
        ++col_count[bj];
        ++iter;
        for (std::size_t i = 0; i < rows; ++i) row_payoff[i] += r.at(i, bj);
        for (std::size_t j = 0; j < cols; ++j) col_payoff[j] += r.at(bi, j);
        gap = (row_payoff[argmax(row_payoff)] - col_payoff[argmin(col_payoff)]) /
              static_cast<double>(iter);
    }

    MixedStrategyPair out;
    out.iterations = iter;
    out.gap = std::max(gap, 0.0);
    out.row_strategy.assign(rows, 0.0);
    out.col_strategy.assign(cols, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
        out.row_strategy[i] = static_cast<double>(row_count[i]) / static_cast<double>(iter);
    for (std::size_t j = 0; j < cols; ++j)
        out.col_strategy[j] = static_cast<double>(col_count[j]) / static_cast<double>(iter);

    std::vector<double> r_col(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) r_col[i] += r.at(i, j) * out.col_strategy[j];
    out.value = 0.0;
    for (std::size_t i = 0; i < rows; ++i) out.value += out.row_strategy[i] * r_col[i];
    return out;
}

/// Exploitability of a strategy pair, recomputed from scratch.
inline double exploitability_gap(const RewardMatrix& r, const std::vector<double>& row_strategy,
                                 const std::vector<double>& col_strategy) {
    double best_row = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < r.num_rows; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < r.num_cols; ++j) acc += r.at(i, j) * col_strategy[j];
        best_row = std::max(best_row, acc);
    }
    double best_col = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < r.num_cols; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < r.num_rows; ++i) acc += r.at(i, j) * row_strategy[i];
        best_col = std::min(best_col, acc);
    }
    return best_row - best_col;
}

struct StackelbergResult {
    std::size_t best_row = 0;
    double value = 0.0;                    // max over rows of the row minimum
    std::vector<std::size_t> min_col_of_row;
};

/// Exact deterministic MaxMin: the sample adversary leads by minimizing each
/// row, the policy player picks the best row. Ties go to the lowest index.
inline StackelbergResult stackelberg_maxmin(const RewardMatrix& r) {
    if (r.num_rows == 0 || r.num_cols == 0) throw EmptyInputError("empty reward matrix");
    StackelbergResult out;
    out.min_col_of_row.resize(r.num_rows);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < r.num_rows; ++i) {
        std::size_t mc = 0;
        for (std::size_t j = 1; j < r.num_cols; ++j)
            if (r.at(i, j) < r.at(i, mc)) mc = j;
        out.min_col_of_row[i] = mc;
        if (r.at(i, mc) > best) {
            best = r.at(i, mc);
            out.best_row = i;
        }
    }
    out.value = best;
    return out;
}

struct MneConfig {
    std::uint64_t max_iters = 100000;
    double tol = 1e-3;
    double weight_floor = 1e-9;   // row weights below this are pruned
    std::uint64_t enum_cap = kDefaultPolicyCap;
    double solve_tol = 1e-9;
    int jobs = 1;
};

struct MneResult {
    MixedPolicy policy;
    double lambda_star = 0.0;              // value - gap: certified lower bound
    std::vector<double> scenario_weights;  // adversary's mixed strategy
    MixedStrategyPair equilibrium;
    std::vector<DeterministicPolicy> policies;
    RewardMatrix matrix;
};

/// Full mixed-policy pipeline: enumerate, build the reward matrix, solve by
/// fictitious play. The reported lambda* subtracts the residual gap so the
/// certificate stays sound under the approximate equilibrium.
inline MneResult mne_policy(const UpMdpTemplate& t, const ScenarioSet& scenarios, const MneConfig& config) {
    MneResult out;
    out.policies = enumerate_deterministic_policies(t, config.enum_cap);
    out.matrix = reward_matrix(t, scenarios, out.policies, config.solve_tol, config.jobs);
    out.equilibrium = fictitious_play(out.matrix, config.max_iters, config.tol);
    out.scenario_weights = out.equilibrium.col_strategy;
    out.lambda_star = std::clamp(out.equilibrium.value - out.equilibrium.gap, 0.0, 1.0);

    double kept = 0.0;
    for (std::size_t i = 0; i < out.policies.size(); ++i)
        if (out.equilibrium.row_strategy[i] > config.weight_floor) {
            out.policy.atoms.push_back({out.policies[i], out.equilibrium.row_strategy[i]});
            kept += out.equilibrium.row_strategy[i];
        }
    for (auto& atom : out.policy.atoms) atom.weight /= kept;
    return out;
}

}  // namespace upmdp
