#include <catch2/catch_amalgamated.hpp>

#include "upmdp/policy_equiv.hpp"

#include "test_util.hpp"

using namespace upmdp;
using namespace testutil;

TEST_CASE("equivalent_mixed interpolates the extreme policies", "[equiv]") {
    // Values 0.2 and 0.6; a behavioural policy at 0.3 needs weight 0.25 on
    // the maximizer.
    const Mdp m = two_action_mdp(1.0, 0.6, 0.2);
    BehaviouralPolicy pol{{{0.25, 0.75}, {1.0}, {1.0}}};
    REQUIRE(solution(m, pol, 1e-12) == Catch::Approx(0.3).margin(1e-10));

    const MixedPolicy mix = equivalent_mixed(m, pol, 1e-9);
    REQUIRE(mix.atoms.size() == 2);
    double w_best = 0.0;
    for (const auto& atom : mix.atoms)
        if (atom.policy.choice[0] == 0) w_best = atom.weight;  // action a1 = 0.6 route
    CHECK(w_best == Catch::Approx(0.25).margin(1e-8));
    CHECK(solution(m, mix, 1e-12) == Catch::Approx(0.3).margin(1e-8));
}

TEST_CASE("equivalent_mixed of an optimal policy is a point mass", "[equiv]") {
    const Mdp m = two_action_mdp(0.9, 0.7, 0.2);
    BehaviouralPolicy pol{{{1.0, 0.0}, {1.0}, {1.0}}};  // already the maximizer
    const MixedPolicy mix = equivalent_mixed(m, pol, 1e-9);
    REQUIRE(mix.atoms.size() == 1);
    CHECK(mix.atoms.front().weight == 1.0);
    CHECK(mix.atoms.front().policy.choice[0] == 0);
}

TEST_CASE("equivalent_mixed value matches on random models", "[equiv]") {
    rng::Stream stream(43, rng::Purpose::testing, 0);
    for (int round = 0; round < 50; ++round) {
        const Mdp m = random_mdp(stream, 5, 3, 0.9);
        const BehaviouralPolicy pol = random_behavioural(stream, m);
        const MixedPolicy mix = equivalent_mixed(m, pol, 1e-6);
        CHECK(std::abs(solution(m, mix, 1e-11) - solution(m, pol, 1e-11)) <= 1e-6);
    }
}

TEST_CASE("equivalent_behavioural resolves point masses without bisection", "[equiv]") {
    const Mdp m = two_action_mdp(0.9, 0.7, 0.2);
    const auto best = optimal_value_and_policy(m, Direction::maximize, 1e-11);
    MixedPolicy mix;
    mix.atoms.push_back({best.policy, 1.0});
    const auto witness = equivalent_behavioural(m, mix, 1e-9);
    CHECK(witness.bisection_steps == 0);
    CHECK(witness.achieved == Catch::Approx(best.value).margin(1e-8));
    CHECK(witness.policy.rows[0][0] == 1.0);
}

TEST_CASE("equivalent_behavioural hits midway targets", "[equiv]") {
    const Mdp m = two_action_mdp(0.9, 1.0, 2.0 / 9.0);  // endpoint values 0.9 and 0.2
    MixedPolicy mix;
    mix.atoms.push_back({DeterministicPolicy{{0, 0, 0}}, 0.5});
    mix.atoms.push_back({DeterministicPolicy{{1, 0, 0}}, 0.5});
    const double target = solution(m, mix, 1e-12);
    const auto witness = equivalent_behavioural(m, mix, 1e-7);
    CHECK(std::abs(solution(m, witness.policy, 1e-11) - target) <= 1e-7);
}

TEST_CASE("equivalent_behavioural stays within the bisection budget", "[equiv]") {
    rng::Stream stream(47, rng::Purpose::testing, 0);
    for (int round = 0; round < 20; ++round) {
        const Mdp m = random_mdp(stream, 5, 3, 0.95);
        const double lo = optimal_value_and_policy(m, Direction::minimize, 1e-11).value;
        const double hi = optimal_value_and_policy(m, Direction::maximize, 1e-11).value;
        if (hi - lo < 1e-6) continue;
        const BehaviouralPolicy pol = random_behavioural(stream, m);
        const MixedPolicy mix = equivalent_mixed(m, pol, 1e-9);
        const auto witness = equivalent_behavioural(m, mix, 1e-6);
        CHECK(witness.bisection_steps <= 60);
        CHECK(std::abs(witness.achieved - solution(m, mix, 1e-11)) <= 1e-6);
    }
}

TEST_CASE("equivalent_behavioural rejects out-of-range targets", "[equiv]") {
    // Consistent inputs can never leave the sandwich, so an inconsistent
    // target is emulated with an over-weighted mixed policy.
    const Mdp m = two_action_mdp(0.9, 0.7, 0.2);
    MixedPolicy overweight;
    overweight.atoms.push_back({DeterministicPolicy{{0, 0, 0}}, 1.5});
    CHECK_THROWS_AS(equivalent_behavioural(m, overweight, 1e-9), TargetOutOfRangeError);
}

TEST_CASE("equivalent_behavioural requires gamma below one", "[equiv]") {
    const Mdp m = two_action_mdp(1.0, 0.7, 0.2);
    MixedPolicy mix;
    mix.atoms.push_back({DeterministicPolicy{{0, 0, 0}}, 1.0});
    CHECK_THROWS_AS(equivalent_behavioural(m, mix, 1e-9), InvalidDiscountError);
}
