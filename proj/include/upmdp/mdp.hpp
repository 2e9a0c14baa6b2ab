#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include "upmdp/errors.hpp"

namespace upmdp {

inline constexpr double kRowSumTol = 1e-9;
inline constexpr std::uint64_t kIterationCap = 1000000;

/// Finite MDP with a reach-avoid labelling. Transition rows are dense over
/// states and indexed by (state, enabled-action slot); `enabled[s]` maps each
/// slot to an id in the global action catalogue.
///
/// States labelled goal or lying outside the safe set are terminal: goal
/// states carry value 1, the rest ("avoid" states) value 0, and both must be
/// absorbing.
struct Mdp {
    std::vector<std::string> state_names;
    std::vector<std::string> action_names;
    std::vector<std::vector<int>> enabled;                  // [s] -> global action ids
    std::vector<std::vector<std::vector<double>>> trans;    // [s][slot][s']
    std::vector<double> initial;                            // rho
    double gamma = 0.99;
    std::vector<char> goal;                                 // flag per state
    std::vector<char> safe;                                 // flag per state

    int num_states() const { return static_cast<int>(state_names.size()); }
    bool is_goal(int s) const { return goal[s] != 0; }
    bool is_avoid(int s) const { return !goal[s] && !safe[s]; }
    bool is_terminal(int s) const { return is_goal(s) || is_avoid(s); }
};

/// Stores the enabled-action *slot* chosen in each state (an index into
/// enabled[s], not a global action id).
struct DeterministicPolicy {
    std::vector<int> choice;

    bool operator==(const DeterministicPolicy&) const = default;
};

/// Per-state distribution over enabled-action slots, aligned with enabled[s].
struct BehaviouralPolicy {
    std::vector<std::vector<double>> rows;
};

struct MixedAtom {
    DeterministicPolicy policy;
    double weight;
};

/// Finite distribution over deterministic policies; one atom is drawn at the
/// start of a trajectory and followed throughout.
struct MixedPolicy {
    std::vector<MixedAtom> atoms;
};

using PolicyVariant = std::variant<DeterministicPolicy, BehaviouralPolicy, MixedPolicy>;

using ValueVector = std::vector<double>;
using QTable = std::vector<std::vector<double>>;
using OccupancyVector = std::vector<double>;

enum class Direction { maximize, minimize };

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Returns one human-readable message per broken invariant; empty means valid.
inline std::vector<std::string> validate_mdp(const Mdp& m) {
    std::vector<std::string> violations;
    const int n = m.num_states();
    auto sname = [&](int s) { return m.state_names[s]; };

    if (static_cast<int>(m.enabled.size()) != n || static_cast<int>(m.trans.size()) != n ||
        static_cast<int>(m.initial.size()) != n || static_cast<int>(m.goal.size()) != n ||
        static_cast<int>(m.safe.size()) != n) {
        violations.push_back("field sizes disagree with the number of states");
        return violations;
    }
    if (!(m.gamma > 0.0 && m.gamma <= 1.0))
        violations.push_back("discount factor " + std::to_string(m.gamma) + " outside (0, 1]");

    double rho_sum = 0.0;
    for (int s = 0; s < n; ++s) {
        if (m.initial[s] < 0.0)
            violations.push_back("initial probability of " + sname(s) + " is negative");
        rho_sum += m.initial[s];
    }
    if (std::abs(rho_sum - 1.0) > kRowSumTol)
        violations.push_back("initial distribution sums to " + std::to_string(rho_sum));

    for (int s = 0; s < n; ++s) {
        if (m.enabled[s].empty()) {
            violations.push_back("state " + sname(s) + " has no enabled action");
            continue;
        }
        if (m.trans[s].size() != m.enabled[s].size()) {
            violations.push_back("state " + sname(s) + " has mismatched transition rows");
            continue;
        }
        for (std::size_t slot = 0; slot < m.enabled[s].size(); ++slot) {
            const auto& row = m.trans[s][slot];
            const std::string aname = m.action_names[m.enabled[s][slot]];
            if (static_cast<int>(row.size()) != n) {
                violations.push_back("row (" + sname(s) + ", " + aname + ") has wrong length");
                continue;
            }
            double sum = 0.0;
            for (int t = 0; t < n; ++t) {
                if (row[t] < 0.0 || row[t] > 1.0)
                    violations.push_back("row (" + sname(s) + ", " + aname + ") entry to " + sname(t) +
                                         " outside [0,1]");
                sum += row[t];
            }
            if (std::abs(sum - 1.0) > kRowSumTol)
                violations.push_back("row (" + sname(s) + ", " + aname + ") sums to " + std::to_string(sum));
            if (m.is_terminal(s) && std::abs(row[s] - 1.0) > kRowSumTol)
                violations.push_back("terminal state " + sname(s) + " is not absorbing under action " + aname);
        }
    }
    return violations;
}

inline std::vector<std::string> validate_policy(const Mdp& m, const DeterministicPolicy& pol) {
    std::vector<std::string> violations;
    if (pol.choice.size() != m.enabled.size()) {
        violations.push_back("policy length disagrees with the number of states");
        return violations;
    }
    for (int s = 0; s < m.num_states(); ++s)
        if (pol.choice[s] < 0 || pol.choice[s] >= static_cast<int>(m.enabled[s].size()))
            violations.push_back("chosen action not enabled in state " + m.state_names[s]);
    return violations;
}

inline std::vector<std::string> validate_policy(const Mdp& m, const BehaviouralPolicy& pol) {
    std::vector<std::string> violations;
    if (pol.rows.size() != m.enabled.size()) {
        violations.push_back("policy length disagrees with the number of states");
        return violations;
    }
    for (int s = 0; s < m.num_states(); ++s) {
        const auto& row = pol.rows[s];
        if (row.size() != m.enabled[s].size()) {
            violations.push_back("policy row length mismatch in state " + m.state_names[s]);
            continue;
        }
        double sum = 0.0;
        for (double p : row) {
            if (p < 0.0) violations.push_back("negative action probability in state " + m.state_names[s]);
            sum += p;
        }
        if (std::abs(sum - 1.0) > kRowSumTol)
            violations.push_back("policy row in state " + m.state_names[s] + " sums to " + std::to_string(sum));
    }
    return violations;
}

inline std::vector<std::string> validate_policy(const Mdp& m, const MixedPolicy& pol) {
    std::vector<std::string> violations;
    double sum = 0.0;
    for (const auto& atom : pol.atoms) {
        if (atom.weight < 0.0) violations.push_back("negative atom weight");
        sum += atom.weight;
        auto sub = validate_policy(m, atom.policy);
        violations.insert(violations.end(), sub.begin(), sub.end());
    }
    if (std::abs(sum - 1.0) > kRowSumTol)
        violations.push_back("atom weights sum to " + std::to_string(sum));
    for (std::size_t i = 0; i < pol.atoms.size(); ++i)
        for (std::size_t j = i + 1; j < pol.atoms.size(); ++j)
            if (pol.atoms[i].policy == pol.atoms[j].policy) {
                violations.push_back("duplicate atom policies");
                break;
            }
    return violations;
}

// ---------------------------------------------------------------------------
// Policy helpers
// ---------------------------------------------------------------------------

inline BehaviouralPolicy as_behavioural(const Mdp& m, const DeterministicPolicy& pol) {
    BehaviouralPolicy out;
    out.rows.resize(m.enabled.size());
    for (int s = 0; s < m.num_states(); ++s) {
        out.rows[s].assign(m.enabled[s].size(), 0.0);
        out.rows[s][pol.choice[s]] = 1.0;
    }
    return out;
}

inline BehaviouralPolicy uniform_policy(const Mdp& m) {
    BehaviouralPolicy out;
    out.rows.resize(m.enabled.size());
    for (int s = 0; s < m.num_states(); ++s)
        out.rows[s].assign(m.enabled[s].size(), 1.0 / static_cast<double>(m.enabled[s].size()));
    return out;
}

/// Markov chain induced by a behavioural policy: rows[s][s'] = sum over
/// enabled actions of pi(a|s) P(s'|s,a).
inline std::vector<std::vector<double>> induced_chain(const Mdp& m, const BehaviouralPolicy& pol) {
    const int n = m.num_states();
    std::vector<std::vector<double>> chain(n, std::vector<double>(n, 0.0));
    for (int s = 0; s < n; ++s)
        for (std::size_t slot = 0; slot < m.enabled[s].size(); ++slot) {
            const double w = pol.rows[s][slot];
            if (w == 0.0) continue;
            const auto& row = m.trans[s][slot];
            for (int t = 0; t < n; ++t) chain[s][t] += w * row[t];
        }
    return chain;
}

// ---------------------------------------------------------------------------
// Reach-avoid model checking
// ---------------------------------------------------------------------------

/// Fixed point of the reach-avoid Bellman operator: value 1 on goal states,
/// 0 on avoid states, and gamma-discounted expectation elsewhere. Jacobi
/// sweeps run until the contraction bound q*delta/(1-q) drops below tol
/// (q = gamma * max row weight); with gamma = 1 the stop is a plain Cauchy
/// test capped at kIterationCap sweeps.
///
/// `warm` seeds the iteration, which speeds up repeated evaluation of slowly
/// changing policies; the stopping rule is valid from any starting point.
inline ValueVector bellman_value(const Mdp& m, const BehaviouralPolicy& pol, double tol,
                                 const ValueVector* warm = nullptr) {
    const int n = m.num_states();
    const auto chain = induced_chain(m, pol);

    double max_row_weight = 0.0;
    for (int s = 0; s < n; ++s) {
        if (m.is_terminal(s)) continue;
        max_row_weight = std::max(max_row_weight, std::accumulate(chain[s].begin(), chain[s].end(), 0.0));
    }
    const double q = m.gamma * std::max(1.0, max_row_weight);

    ValueVector value(n, 0.0);
    if (warm && static_cast<int>(warm->size()) == n) value = *warm;
    for (int s = 0; s < n; ++s) {
        if (m.is_goal(s)) value[s] = 1.0;
        else if (m.is_avoid(s)) value[s] = 0.0;
    }

    ValueVector next(n, 0.0);
    for (std::uint64_t iter = 0; iter < kIterationCap; ++iter) {
        double delta = 0.0;
        for (int s = 0; s < n; ++s) {
            if (m.is_terminal(s)) {
                next[s] = value[s];
                continue;
            }
            double acc = 0.0;
            const auto& row = chain[s];
            for (int t = 0; t < n; ++t) acc += row[t] * value[t];
            next[s] = m.gamma * acc;
            delta = std::max(delta, std::abs(next[s] - value[s]));
        }
        value.swap(next);
        if (q < 1.0) {
            if (q * delta / (1.0 - q) < tol) return value;
        } else if (delta < tol) {
            return value;
        }
    }
    throw NonConvergenceError(kIterationCap);
}

/// Initial-distribution-weighted satisfaction probability under a policy.
inline double solution(const Mdp& m, const BehaviouralPolicy& pol, double tol) {
    const ValueVector value = bellman_value(m, pol, tol);
    double acc = 0.0;
    for (int s = 0; s < m.num_states(); ++s) acc += m.initial[s] * value[s];
    return acc;
}

inline double solution(const Mdp& m, const DeterministicPolicy& pol, double tol) {
    return solution(m, as_behavioural(m, pol), tol);
}

/// Mixed policies satisfy the formula with the atom-weighted average of their
/// deterministic members' probabilities, by the semantics of sampling one
/// atom per trajectory.
inline double solution(const Mdp& m, const MixedPolicy& pol, double tol) {
    double acc = 0.0;
    for (const auto& atom : pol.atoms)
        if (atom.weight > 0.0) acc += atom.weight * solution(m, atom.policy, tol);
    return acc;
}

inline double solution(const Mdp& m, const PolicyVariant& pol, double tol) {
    return std::visit([&](const auto& p) { return solution(m, p, tol); }, pol);
}

/// q(s, a) = gamma * sum_s' P(s'|s,a) B(s'); terminal states carry their
/// fixed value in every slot.
inline QTable q_function_from_value(const Mdp& m, const ValueVector& value) {
    const int n = m.num_states();
    QTable q(n);
    for (int s = 0; s < n; ++s) {
        q[s].assign(m.enabled[s].size(), 0.0);
        for (std::size_t slot = 0; slot < m.enabled[s].size(); ++slot) {
            if (m.is_terminal(s)) {
                q[s][slot] = value[s];
                continue;
            }
            double acc = 0.0;
            const auto& row = m.trans[s][slot];
            for (int t = 0; t < n; ++t) acc += row[t] * value[t];
            q[s][slot] = m.gamma * acc;
        }
    }
    return q;
}

inline QTable q_function(const Mdp& m, const BehaviouralPolicy& pol, double tol) {
    return q_function_from_value(m, bellman_value(m, pol, tol));
}

/// Normalized discounted state-visitation frequencies
/// (1-gamma) * sum_k gamma^k P_k, truncated once the remaining geometric tail
/// is below tol. Requires gamma < 1.
inline OccupancyVector occupancy(const Mdp& m, const BehaviouralPolicy& pol, double tol) {
    if (m.gamma >= 1.0) throw InvalidDiscountError();
    const int n = m.num_states();
    const auto chain = induced_chain(m, pol);

    std::vector<double> dist = m.initial;
    std::vector<double> acc(n, 0.0);
    std::vector<double> next(n, 0.0);
    double weight = 1.0;  // gamma^k
    for (std::uint64_t k = 0; k < kIterationCap; ++k) {
        for (int s = 0; s < n; ++s) acc[s] += weight * dist[s];
        weight *= m.gamma;
        if (weight < tol) break;
        std::fill(next.begin(), next.end(), 0.0);
        for (int s = 0; s < n; ++s) {
            if (dist[s] == 0.0) continue;
            const auto& row = chain[s];
            for (int t = 0; t < n; ++t) next[t] += dist[s] * row[t];
        }
        dist.swap(next);
    }
    OccupancyVector eta(n, 0.0);
    for (int s = 0; s < n; ++s) eta[s] = (1.0 - m.gamma) * acc[s];
    return eta;
}

struct OptimalResult {
    DeterministicPolicy policy;
    double value;          // solution of `policy`, re-evaluated after extraction
    ValueVector state_values;
};

/// Optimal reach-avoid value iteration; ties between equally good actions go
/// to the lowest slot index.
inline OptimalResult optimal_value_and_policy(const Mdp& m, Direction direction, double tol) {
    const int n = m.num_states();
    const bool maximize = direction == Direction::maximize;
    const double q = m.gamma;

    ValueVector value(n, 0.0);
    for (int s = 0; s < n; ++s)
        if (m.is_goal(s)) value[s] = 1.0;

    ValueVector next(n, 0.0);
    bool converged = false;
    for (std::uint64_t iter = 0; iter < kIterationCap && !converged; ++iter) {
        double delta = 0.0;
        for (int s = 0; s < n; ++s) {
            if (m.is_terminal(s)) {
                next[s] = value[s];
                continue;
            }
            double best = maximize ? -1.0 : 2.0;
            for (const auto& row : m.trans[s]) {
                double acc = 0.0;
                for (int t = 0; t < n; ++t) acc += row[t] * value[t];
                acc *= m.gamma;
                best = maximize ? std::max(best, acc) : std::min(best, acc);
            }
            next[s] = best;
            delta = std::max(delta, std::abs(next[s] - value[s]));
        }
        value.swap(next);
        if (q < 1.0) converged = q * delta / (1.0 - q) < tol;
        else converged = delta < tol;
    }
    if (!converged) throw NonConvergenceError(kIterationCap);

    DeterministicPolicy policy;
    policy.choice.assign(n, 0);
    for (int s = 0; s < n; ++s) {
        if (m.is_terminal(s)) continue;
        double best = maximize ? -1.0 : 2.0;
        int best_slot = 0;
        for (std::size_t slot = 0; slot < m.trans[s].size(); ++slot) {
            double acc = 0.0;
            for (int t = 0; t < n; ++t) acc += m.trans[s][slot][t] * value[t];
            acc *= m.gamma;
            const bool better = maximize ? acc > best : acc < best;
            if (better) {
                best = acc;
                best_slot = static_cast<int>(slot);
            }
        }
        policy.choice[s] = best_slot;
    }

    const ValueVector eval = bellman_value(m, as_behavioural(m, policy), tol);
    double lambda = 0.0;
    for (int s = 0; s < n; ++s) lambda += m.initial[s] * eval[s];
    return {std::move(policy), lambda, std::move(eval)};
}

}  // namespace upmdp
