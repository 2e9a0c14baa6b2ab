#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <vector>

#include "upmdp/mdp.hpp"
#include "upmdp/model.hpp"
#include "upmdp/parallel.hpp"
#include "upmdp/rng.hpp"

namespace upmdp {

/// Euclidean projection onto the probability simplex (sort-based).
inline std::vector<double> project_simplex(const std::vector<double>& v) {
    if (v.empty()) throw EmptyInputError("cannot project an empty vector");
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    double running = 0.0, theta = 0.0;
    int support = 0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        running += sorted[i];
        const double candidate = (running - 1.0) / static_cast<double>(i + 1);
        if (sorted[i] - candidate > 0.0) {
            theta = candidate;
            support = static_cast<int>(i + 1);
        }
    }
    (void)support;
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(v[i] - theta, 0.0);
    return out;
}

/// Ascent direction for the satisfaction probability with occupancy and
/// Q-function frozen at the current policy: grad(s, a) = eta(s) * Q(s, a).
/// Since eta carries the (1-gamma) normalization, this equals
/// (1-gamma) * d sol / d pi(a|s).
inline QTable gradient(const Mdp& m, const BehaviouralPolicy& pol, double tol) {
    const OccupancyVector eta = occupancy(m, pol, tol);
    const QTable q = q_function(m, pol, tol);
    QTable grad(q.size());
    for (std::size_t s = 0; s < q.size(); ++s) {
        grad[s].resize(q[s].size());
        for (std::size_t slot = 0; slot < q[s].size(); ++slot) grad[s][slot] = eta[s] * q[s][slot];
    }
    return grad;
}

/// Uniform draw among the indices within tol of the minimum.
inline std::size_t worst_case_sample(const std::vector<double>& values, double tol,
                                     rng::Stream& tie_break) {
    if (values.empty()) throw EmptyInputError("no scenario values to minimize over");
    const double min_value = *std::min_element(values.begin(), values.end());
    std::vector<std::size_t> ties;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (values[i] <= min_value + tol) ties.push_back(i);
    if (ties.size() == 1) return ties.front();
    return ties[tie_break.next_index(ties.size())];
}

enum class StepSchedule { inverse_sqrt, harmonic };

struct SubgradientConfig {
    StepSchedule schedule = StepSchedule::inverse_sqrt;
    double step_c = 1.0;             // alpha_k = c/sqrt(k+1) or c/(k+1)
    std::uint64_t max_iters = 10000;
    std::uint64_t window = 200;      // convergence window on the record objective
    double window_tol = 1e-5;
    double value_tol = 1e-4;         // per-sample tolerance (worst-case ties)
    double solve_tol = 1e-9;         // model-checking tolerance
    std::uint64_t seed = 0;          // master seed; tie-break/init streams derive from it
    bool dirichlet_init = false;     // uniform over enabled actions when false
    int jobs = 1;
};

struct IterationRecord {
    std::uint64_t iter;
    std::size_t worst_index;
    double objective;         // f(pi_k) = min over scenarios
    double record_objective;  // f*_k
    double step_size;
};

struct SubgradientResult {
    BehaviouralPolicy policy;          // record-best iterate
    double lambda_star = 0.0;          // min over scenarios, re-evaluated
    std::vector<double> scenario_values;  // per-scenario solution of `policy`
    std::vector<IterationRecord> trace;
};

inline double step_size(const SubgradientConfig& config, std::uint64_t k) {
    switch (config.schedule) {
        case StepSchedule::inverse_sqrt: return config.step_c / std::sqrt(static_cast<double>(k + 1));
        case StepSchedule::harmonic: return config.step_c / static_cast<double>(k + 1);
    }
    return config.step_c;
}

/// Maximizes the worst-case satisfaction probability over the sampled MDPs by
/// projected subgradient ascent: evaluate all scenarios, pick a worst-case
/// sample (random among ties), step along eta*Q of that sample's MDP, project
/// each state row back onto the simplex. Keeps and returns the record-best
/// policy rather than the final iterate.
inline SubgradientResult subgradient_ascent(const UpMdpTemplate& t, const ScenarioSet& scenarios,
                                            const SubgradientConfig& config) {
    if (scenarios.samples.empty()) throw EmptyInputError("subgradient ascent needs at least one scenario");
    if (t.gamma >= 1.0) throw InvalidDiscountError();

    const std::size_t n = scenarios.size();
    std::vector<Mdp> mdps(n);
    parallel_for(n, config.jobs, [&](std::size_t i) {
        mdps[i] = instantiate(t, scenarios.samples[i], static_cast<long>(i));
    });

    BehaviouralPolicy pi;
    if (config.dirichlet_init) {
        rng::Stream init(config.seed, rng::Purpose::policy_init);
        pi.rows.resize(t.num_states());
        for (int s = 0; s < t.num_states(); ++s) {
            pi.rows[s].resize(t.enabled[s].size());
            double sum = 0.0;
            for (auto& p : pi.rows[s]) {
                p = -std::log(1.0 - init.next_unit());  // Exp(1) draws normalize to Dirichlet(1)
                sum += p;
            }
            for (auto& p : pi.rows[s]) p /= sum;
        }
    } else {
        pi = uniform_policy(mdps.front());
    }

    rng::Stream tie_break(config.seed, rng::Purpose::tie_break);

    SubgradientResult result;
    result.trace.reserve(std::min<std::uint64_t>(config.max_iters, 1 << 20));
    double record = -1.0;
    BehaviouralPolicy record_policy = pi;

    std::vector<ValueVector> warm(n);
    std::vector<double> values(n, 0.0);
    for (std::uint64_t k = 0; k < config.max_iters; ++k) {
        parallel_for(n, config.jobs, [&](std::size_t i) {
            warm[i] = bellman_value(mdps[i], pi, config.solve_tol, &warm[i]);
            double acc = 0.0;
            for (int s = 0; s < mdps[i].num_states(); ++s) acc += mdps[i].initial[s] * warm[i][s];
            values[i] = acc;
        });
        const double f = *std::min_element(values.begin(), values.end());
        if (f > record) {
            record = f;
            record_policy = pi;
        }
        const std::size_t worst = worst_case_sample(values, config.value_tol, tie_break);
        const double alpha = step_size(config, k);
        result.trace.push_back({k, worst, f, record, alpha});

        if (k >= config.window) {
            const double past = result.trace[k - config.window].record_objective;
            if (record - past < config.window_tol) break;
        }

        const QTable grad = gradient(mdps[worst], pi, config.solve_tol);
        for (int s = 0; s < t.num_states(); ++s) {
            if (t.is_terminal(s) || pi.rows[s].size() <= 1) continue;
            std::vector<double> moved = pi.rows[s];
            for (std::size_t slot = 0; slot < moved.size(); ++slot) moved[slot] += alpha * grad[s][slot];
            pi.rows[s] = project_simplex(moved);
        }
    }

    result.policy = std::move(record_policy);
    result.scenario_values.resize(n);
    parallel_for(n, config.jobs, [&](std::size_t i) {
        result.scenario_values[i] = solution(mdps[i], result.policy, config.solve_tol);
    });
    result.lambda_star =
        *std::min_element(result.scenario_values.begin(), result.scenario_values.end());
    return result;
}

inline void save_trace_csv(const std::string& path, const std::vector<IterationRecord>& trace) {
    std::ofstream out(path);
    if (!out) throw ModelError("cannot write " + path);
    out << "iter,worst_idx,f,f_star,alpha\n";
    char buf[160];
    for (const auto& rec : trace) {
        std::snprintf(buf, sizeof(buf), "%llu,%zu,%.9g,%.9g,%.9g\n",
                      static_cast<unsigned long long>(rec.iter), rec.worst_index, rec.objective,
                      rec.record_objective, rec.step_size);
        out << buf;
    }
}

}  // namespace upmdp
