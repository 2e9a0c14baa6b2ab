#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include <json.hpp>

#include "upmdp/mdp.hpp"
#include "upmdp/model.hpp"

namespace upmdp {

/// MDP whose transition probabilities are only known up to per-(s,a,s')
/// intervals; solved against an adversary that may pick any distribution
/// inside the row's interval box (the (s,a)-rectangular worst case).
struct IntervalMdp {
    std::vector<std::string> state_names;
    std::vector<std::string> action_names;
    std::vector<std::vector<int>> enabled;
    std::vector<std::vector<std::vector<double>>> lo;   // [s][slot][s']
    std::vector<std::vector<std::vector<double>>> hi;
    std::vector<double> initial;
    double gamma = 0.99;
    std::vector<char> goal, safe;

    int num_states() const { return static_cast<int>(state_names.size()); }
    bool is_goal(int s) const { return goal[s] != 0; }
    bool is_terminal(int s) const { return goal[s] || !safe[s]; }
};

/// Per-transition envelope of the instantiated scenarios: lo/hi are the exact
/// minima/maxima over the sample set. Structural zeros stay [0, 0].
inline IntervalMdp build_interval_mdp(const UpMdpTemplate& t, const ScenarioSet& scenarios) {
    if (scenarios.samples.empty()) throw EmptyInputError("interval construction needs at least one scenario");
    IntervalMdp imdp;
    imdp.state_names = t.state_names;
    imdp.action_names = t.action_names;
    imdp.enabled = t.enabled;
    imdp.initial = t.initial;
    imdp.gamma = t.gamma;
    imdp.goal = t.goal;
    imdp.safe = t.safe;

    const int n = t.num_states();
    imdp.lo.resize(n);
    imdp.hi.resize(n);
    bool first = true;
    for (const auto& sample : scenarios.samples) {
        const Mdp m = instantiate(t, sample);
        for (int s = 0; s < n; ++s) {
            if (first) {
                imdp.lo[s] = m.trans[s];
                imdp.hi[s] = m.trans[s];
                continue;
            }
            for (std::size_t slot = 0; slot < m.trans[s].size(); ++slot)
                for (int u = 0; u < n; ++u) {
                    imdp.lo[s][slot][u] = std::min(imdp.lo[s][slot][u], m.trans[s][slot][u]);
                    imdp.hi[s][slot][u] = std::max(imdp.hi[s][slot][u], m.trans[s][slot][u]);
                }
        }
        first = false;
    }
    return imdp;
}

inline std::vector<std::string> validate_interval_mdp(const IntervalMdp& imdp) {
    std::vector<std::string> violations;
    for (int s = 0; s < imdp.num_states(); ++s)
        for (std::size_t slot = 0; slot < imdp.lo[s].size(); ++slot) {
            double lo_sum = 0.0, hi_sum = 0.0;
            for (int u = 0; u < imdp.num_states(); ++u) {
                const double lo = imdp.lo[s][slot][u], hi = imdp.hi[s][slot][u];
                if (!(0.0 <= lo && lo <= hi && hi <= 1.0))
                    violations.push_back("interval (" + imdp.state_names[s] + ", slot " +
                                         std::to_string(slot) + ") -> " + imdp.state_names[u] +
                                         " is not ordered within [0,1]");
                lo_sum += lo;
                hi_sum += hi;
            }
            if (lo_sum > 1.0 + kRowSumTol || hi_sum < 1.0 - kRowSumTol)
                violations.push_back("interval row (" + imdp.state_names[s] + ", slot " +
                                     std::to_string(slot) + ") admits no distribution");
        }
    return violations;
}

/// Extreme distribution inside the interval box: every successor gets its
/// lower bound, then the remaining mass pours into the worst-valued (or
/// best-valued) states first, ties broken by state index. Returns the chosen
/// distribution's expected value under `values`.
inline double interval_extreme_backup(const std::vector<double>& lo, const std::vector<double>& hi,
                                      const ValueVector& values, bool pick_minimum,
                                      std::vector<double>* chosen = nullptr, int state = -1,
                                      int action = -1) {
    const int n = static_cast<int>(lo.size());
    std::vector<double> dist = lo;
    double mass = 1.0 - std::accumulate(lo.begin(), lo.end(), 0.0);
    if (mass < -kRowSumTol) throw InfeasibleIntervalsError(state, action);

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return pick_minimum ? values[a] < values[b] : values[a] > values[b];
    });
    for (int idx : order) {
        if (mass <= 0.0) break;
        const double room = hi[idx] - lo[idx];
        const double add = std::min(room, mass);
        dist[idx] += add;
        mass -= add;
    }
    if (mass > kRowSumTol) throw InfeasibleIntervalsError(state, action);

    double acc = 0.0;
    for (int u = 0; u < n; ++u) acc += dist[u] * values[u];
    if (chosen) *chosen = std::move(dist);
    return acc;
}

struct RobustResult {
    DeterministicPolicy policy;
    double value;
    ValueVector state_values;
};

/// Value iteration where every backup lets the adversary choose the extreme
/// distribution working against the agent's direction. The returned policy is
/// the greedy one at the fixed point and `value` the robust satisfaction
/// probability from the initial distribution.
inline RobustResult robust_value_iteration(const IntervalMdp& imdp, Direction direction, double tol) {
    const int n = imdp.num_states();
    const bool maximize = direction == Direction::maximize;
    const double q = imdp.gamma;

    ValueVector value(n, 0.0);
    for (int s = 0; s < n; ++s)
        if (imdp.is_goal(s)) value[s] = 1.0;

    auto backup = [&](int s, std::size_t slot) {
        return imdp.gamma * interval_extreme_backup(imdp.lo[s][slot], imdp.hi[s][slot], value,
                                                    /*pick_minimum=*/maximize, nullptr, s,
                                                    static_cast<int>(slot));
    };

    ValueVector next(n, 0.0);
    bool converged = false;
    for (std::uint64_t iter = 0; iter < kIterationCap && !converged; ++iter) {
        double delta = 0.0;
        for (int s = 0; s < n; ++s) {
            if (imdp.is_terminal(s)) {
                next[s] = value[s];
                continue;
            }
            double best = maximize ? -1.0 : 2.0;
            for (std::size_t slot = 0; slot < imdp.lo[s].size(); ++slot) {
                const double v = backup(s, slot);
                best = maximize ? std::max(best, v) : std::min(best, v);
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
        if (imdp.is_terminal(s)) continue;
        double best = maximize ? -1.0 : 2.0;
        int best_slot = 0;
        for (std::size_t slot = 0; slot < imdp.lo[s].size(); ++slot) {
            const double v = backup(s, slot);
            const bool better = maximize ? v > best : v < best;
            if (better) {
                best = v;
                best_slot = static_cast<int>(slot);
            }
        }
        policy.choice[s] = best_slot;
    }

    double lambda = 0.0;
    for (int s = 0; s < n; ++s) lambda += imdp.initial[s] * value[s];
    return {std::move(policy), lambda, std::move(value)};
}

/// Mirrors the model file format with [lo, hi] pairs as transition entries.
inline nlohmann::json interval_mdp_to_json(const IntervalMdp& imdp) {
    nlohmann::json j;
    j["states"] = imdp.state_names;
    j["actions"] = imdp.action_names;
    j["gamma"] = imdp.gamma;
    nlohmann::json initial = nlohmann::json::object();
    for (int s = 0; s < imdp.num_states(); ++s)
        if (imdp.initial[s] != 0.0) initial[imdp.state_names[s]] = imdp.initial[s];
    j["initial"] = initial;
    nlohmann::json goal = nlohmann::json::array(), safe = nlohmann::json::array();
    for (int s = 0; s < imdp.num_states(); ++s) {
        if (imdp.goal[s]) goal.push_back(imdp.state_names[s]);
        if (imdp.safe[s]) safe.push_back(imdp.state_names[s]);
    }
    j["labels"] = {{"goal", goal}, {"safe", safe}};
    nlohmann::json transitions = nlohmann::json::array();
    for (int s = 0; s < imdp.num_states(); ++s)
        for (std::size_t slot = 0; slot < imdp.enabled[s].size(); ++slot) {
            nlohmann::json row;
            row["from"] = imdp.state_names[s];
            row["action"] = imdp.action_names[imdp.enabled[s][slot]];
            nlohmann::json to = nlohmann::json::object();
            for (int u = 0; u < imdp.num_states(); ++u)
                if (imdp.hi[s][slot][u] > 0.0)
                    to[imdp.state_names[u]] = {imdp.lo[s][slot][u], imdp.hi[s][slot][u]};
            row["to"] = to;
            transitions.push_back(row);
        }
    j["transitions"] = transitions;
    return j;
}

}  // namespace upmdp
