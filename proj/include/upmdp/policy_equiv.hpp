#pragma once

#include <cmath>
#include <utility>

#include "upmdp/mdp.hpp"

namespace upmdp {

/// Mixes the optimal and pessimal deterministic policies so that the blend's
/// satisfaction probability matches the given behavioural policy's. The two
/// extremes sandwich every behavioural value, so a convex weight always
/// exists.
inline MixedPolicy equivalent_mixed(const Mdp& m, const BehaviouralPolicy& pol, double tol) {
    const double inner_tol = std::min(tol * 1e-2, 1e-10);
    const OptimalResult best = optimal_value_and_policy(m, Direction::maximize, inner_tol);
    const OptimalResult worst = optimal_value_and_policy(m, Direction::minimize, inner_tol);
    const double target = solution(m, pol, inner_tol);

    MixedPolicy out;
    if (best.value - worst.value < tol || best.policy == worst.policy) {
        out.atoms.push_back({best.policy, 1.0});
        return out;
    }
    double w = (target - worst.value) / (best.value - worst.value);
    w = std::clamp(w, 0.0, 1.0);
    if (w >= 1.0) {
        out.atoms.push_back({best.policy, 1.0});
    } else if (w <= 0.0) {
        out.atoms.push_back({worst.policy, 1.0});
    } else {
        out.atoms.push_back({best.policy, w});
        out.atoms.push_back({worst.policy, 1.0 - w});
    }
    return out;
}

struct BehaviouralWitness {
    BehaviouralPolicy policy;
    double achieved;      // solution of `policy`
    int bisection_steps;
};

namespace detail {
/// Straight-line interpolation between two deterministic policies, viewed as
/// behavioural point masses.
inline BehaviouralPolicy interpolate_policies(const Mdp& m, const DeterministicPolicy& hi,
                                              const DeterministicPolicy& lo, double t) {
    BehaviouralPolicy out;
    out.rows.resize(m.enabled.size());
    for (int s = 0; s < m.num_states(); ++s) {
        out.rows[s].assign(m.enabled[s].size(), 0.0);
        out.rows[s][hi.choice[s]] += t;
        out.rows[s][lo.choice[s]] += 1.0 - t;
    }
    return out;
}
}  // namespace detail

/// Recovers a behavioural policy whose satisfaction probability matches a
/// mixed policy's, by bisecting the continuous path between the pessimal and
/// optimal deterministic policies. Requires gamma < 1, which rules out the
/// value discontinuities that certain-probability loops can introduce.
inline BehaviouralWitness equivalent_behavioural(const Mdp& m, const MixedPolicy& pol, double tol) {
    if (m.gamma >= 1.0) throw InvalidDiscountError();
    const double inner_tol = std::min(tol * 1e-2, 1e-10);
    const OptimalResult best = optimal_value_and_policy(m, Direction::maximize, inner_tol);
    const OptimalResult worst = optimal_value_and_policy(m, Direction::minimize, inner_tol);
    const double target = solution(m, pol, inner_tol);

    if (target < worst.value - tol || target > best.value + tol)
        throw TargetOutOfRangeError(target, worst.value, best.value);

    auto value_at = [&](double t) {
        return solution(m, detail::interpolate_policies(m, best.policy, worst.policy, t), inner_tol);
    };

    // Endpoints first: point-mass mixed policies resolve without bisection.
    if (std::abs(best.value - target) <= tol)
        return {detail::interpolate_policies(m, best.policy, worst.policy, 1.0), best.value, 0};
    if (std::abs(worst.value - target) <= tol)
        return {detail::interpolate_policies(m, best.policy, worst.policy, 0.0), worst.value, 0};

    double lo = 0.0, hi = 1.0;
    double lo_val = worst.value;
    int steps = 0;
    for (; steps < 200; ) {
        const double mid = 0.5 * (lo + hi);
        const double mid_val = value_at(mid);
        ++steps;
        if (std::abs(mid_val - target) <= tol)
            return {detail::interpolate_policies(m, best.policy, worst.policy, mid), mid_val, steps};
        // Keep the sign change inside [lo, hi]; the path value is continuous
        // in t, so a crossing always survives.
        if ((lo_val - target) * (mid_val - target) < 0.0) {
            hi = mid;
        } else {
            lo = mid;
            lo_val = mid_val;
        }
    }
    throw NonConvergenceError(static_cast<std::uint64_t>(steps));
}

}  // namespace upmdp
