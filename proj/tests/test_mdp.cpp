#include <catch2/catch_amalgamated.hpp>

#include "upmdp/builtin_models.hpp"
#include "upmdp/mdp.hpp"
#include "upmdp/model.hpp"

#include "test_util.hpp"

using namespace upmdp;
using namespace testutil;

TEST_CASE("validate_mdp accepts a well-formed chain", "[mdp]") {
    CHECK(validate_mdp(chain_mdp(0.9, 0.5, 0.5)).empty());
}

TEST_CASE("validate_mdp flags a row-sum violation", "[mdp]") {
    Mdp m = chain_mdp(0.9, 0.5, 0.5);
    m.trans[0][0] = {0.0, 0.5, 0.0, 0.6};
    const auto violations = validate_mdp(m);
    REQUIRE(violations.size() == 1);
    CHECK(violations.front().find("sums to") != std::string::npos);
    CHECK(violations.front().find("s0") != std::string::npos);
}

TEST_CASE("validate_mdp flags a non-absorbing goal state", "[mdp]") {
    Mdp m = chain_mdp(0.9, 0.5, 0.5);
    m.trans[2][0] = {0.3, 0.0, 0.7, 0.0};
    const auto violations = validate_mdp(m);
    REQUIRE_FALSE(violations.empty());
    bool found = false;
    for (const auto& v : violations) found = found || v.find("not absorbing") != std::string::npos;
    CHECK(found);
}

TEST_CASE("bellman value discounts a single backup", "[mdp]") {
    const Mdp m = two_action_mdp(0.9, 1.0, 0.0);
    BehaviouralPolicy pol{{{1.0, 0.0}, {1.0}, {1.0}}};
    const auto value = bellman_value(m, pol, 1e-12);
    CHECK(value[0] == Catch::Approx(0.9).margin(1e-10));
    CHECK(value[1] == 1.0);
    CHECK(value[2] == 0.0);
}

TEST_CASE("bellman value composes gamma over a two-step chain", "[mdp]") {
    const Mdp m = chain_mdp(0.9, 1.0, 1.0);
    const auto value = bellman_value(m, uniform_policy(m), 1e-12);
    CHECK(value[0] == Catch::Approx(0.81).margin(1e-10));
    CHECK(value[1] == Catch::Approx(0.9).margin(1e-10));
}

TEST_CASE("bellman value with gamma=1 is the reach probability", "[mdp]") {
    const Mdp m = two_action_mdp(1.0, 0.5, 0.5);
    const auto value = bellman_value(m, uniform_policy(m), 1e-12);
    CHECK(value[0] == Catch::Approx(0.5).margin(1e-9));
}

TEST_CASE("solution of a deterministic policy is its chain value", "[mdp]") {
    const Mdp m = two_action_mdp(0.9, 1.0, 0.0);
    DeterministicPolicy pol{{0, 0, 0}};
    CHECK(solution(m, pol, 1e-12) == Catch::Approx(0.9).margin(1e-10));
}

TEST_CASE("mixed solution is the weighted atom average", "[mdp]") {
    // Values 0.2 and 0.6 mixed 0.25/0.75 must give exactly 0.5 * 1 scale.
    const Mdp m = two_action_mdp(1.0, 0.2, 0.6);
    MixedPolicy mix;
    mix.atoms.push_back({DeterministicPolicy{{0, 0, 0}}, 0.25});
    mix.atoms.push_back({DeterministicPolicy{{1, 0, 0}}, 0.75});
    CHECK(solution(m, mix, 1e-12) == Catch::Approx(0.25 * 0.2 + 0.75 * 0.6).margin(1e-9));
}

TEST_CASE("behavioural solution matches a Monte-Carlo estimate", "[mdp][slow]") {
    rng::Stream model_stream(11, rng::Purpose::testing, 0);
    const Mdp m = random_mdp(model_stream, 4, 3, 0.9);
    REQUIRE(validate_mdp(m).empty());
    const BehaviouralPolicy pol = random_behavioural(model_stream, m);

    const double computed = solution(m, pol, 1e-11);
    rng::Stream sim_stream(11, rng::Purpose::testing, 1);
    const auto estimate = simulate_solution(m, pol, 1000000, sim_stream);
    CHECK(std::abs(computed - estimate.mean) <= 3.0 * estimate.std_error + 1e-6);
}

TEST_CASE("optimal policy picks the argmax and argmin action", "[mdp]") {
    const Mdp m = two_action_mdp(1.0, 0.3, 0.7);
    const auto best = optimal_value_and_policy(m, Direction::maximize, 1e-10);
    CHECK(best.policy.choice[0] == 1);
    CHECK(best.value == Catch::Approx(0.7).margin(1e-8));
    const auto worst = optimal_value_and_policy(m, Direction::minimize, 1e-10);
    CHECK(worst.policy.choice[0] == 0);
    CHECK(worst.value == Catch::Approx(0.3).margin(1e-8));
}

TEST_CASE("optimal value on the toy model equals exhaustive enumeration", "[mdp]") {
    const UpMdpTemplate toy = builtin_toy_model();
    const std::vector<double> params = {0.7, 0.4, 0.8, 0.3};
    const Mdp m = instantiate(toy, params);

    double brute_best = -1.0, brute_worst = 2.0;
    for (int c0 = 0; c0 < 2; ++c0)
        for (int c1 = 0; c1 < 2; ++c1) {
            DeterministicPolicy pol{{c0, c1, 0, 0}};
            const double v = solution_by_linear_solve(m, as_behavioural(m, pol));
            brute_best = std::max(brute_best, v);
            brute_worst = std::min(brute_worst, v);
        }
    CHECK(optimal_value_and_policy(m, Direction::maximize, 1e-11).value ==
          Catch::Approx(brute_best).margin(1e-8));
    CHECK(optimal_value_and_policy(m, Direction::minimize, 1e-11).value ==
          Catch::Approx(brute_worst).margin(1e-8));
}

TEST_CASE("q function on direct transitions", "[mdp]") {
    const Mdp m = two_action_mdp(0.9, 1.0, 0.0);
    const auto q = q_function(m, uniform_policy(m), 1e-12);
    CHECK(q[0][0] == Catch::Approx(0.9).margin(1e-9));   // straight to goal
    CHECK(q[0][1] == Catch::Approx(0.0).margin(1e-12));  // straight to avoid
}

TEST_CASE("q function satisfies the policy-mix identity", "[mdp]") {
    rng::Stream stream(17, rng::Purpose::testing, 0);
    for (int round = 0; round < 20; ++round) {
        const Mdp m = random_mdp(stream, 4, 3, 0.92);
        const BehaviouralPolicy pol = random_behavioural(stream, m);
        const auto value = bellman_value(m, pol, 1e-10);
        const auto q = q_function(m, pol, 1e-10);
        for (int s = 0; s < m.num_states(); ++s) {
            if (m.is_terminal(s)) continue;
            double mixed = 0.0;
            for (std::size_t slot = 0; slot < q[s].size(); ++slot)
                mixed += pol.rows[s][slot] * q[s][slot];
            CHECK(mixed == Catch::Approx(value[s]).margin(1e-8));
        }
    }
}

TEST_CASE("occupancy of an immediately absorbing start", "[mdp]") {
    Mdp m = chain_mdp(0.9, 1.0, 1.0);
    m.initial = {0.0, 0.0, 1.0, 0.0};
    const auto eta = occupancy(m, uniform_policy(m), 1e-12);
    CHECK(eta[2] == Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("occupancy splits geometrically on a one-step chain", "[mdp]") {
    const Mdp m = two_action_mdp(0.9, 1.0, 1.0);  // both actions leave s0 immediately
    const auto eta = occupancy(m, uniform_policy(m), 1e-13);
    CHECK(eta[0] == Catch::Approx(0.1).margin(1e-10));
    CHECK(eta[1] + eta[2] == Catch::Approx(0.9).margin(1e-10));
}

TEST_CASE("occupancy rejects gamma = 1", "[mdp]") {
    const Mdp m = two_action_mdp(1.0, 0.5, 0.5);
    CHECK_THROWS_AS(occupancy(m, uniform_policy(m), 1e-10), InvalidDiscountError);
}

TEST_CASE("occupancy matches the linear-system oracle", "[mdp]") {
    rng::Stream stream(23, rng::Purpose::testing, 0);
    for (int round = 0; round < 20; ++round) {
        const Mdp m = random_mdp(stream, 4, 3, 0.9);
        const BehaviouralPolicy pol = random_behavioural(stream, m);
        const auto eta = occupancy(m, pol, 1e-12);
        const auto oracle = occupancy_by_linear_solve(m, pol);
        double total = 0.0;
        for (int s = 0; s < m.num_states(); ++s) {
            CHECK(eta[s] == Catch::Approx(oracle[s]).margin(1e-8));
            total += eta[s];
        }
        CHECK(total == Catch::Approx(1.0).margin(1e-8));
    }
}

TEST_CASE("sandwich: deterministic extremes bound behavioural values", "[mdp]") {
    rng::Stream stream(29, rng::Purpose::testing, 0);
    for (int round = 0; round < 200; ++round) {
        const int states = 3 + static_cast<int>(stream.next_index(4));
        const Mdp m = random_mdp(stream, states, 3, 0.95);
        const BehaviouralPolicy pol = random_behavioural(stream, m);
        const double lo = optimal_value_and_policy(m, Direction::minimize, 1e-11).value;
        const double hi = optimal_value_and_policy(m, Direction::maximize, 1e-11).value;
        const double v = solution(m, pol, 1e-11);
        CHECK(v >= lo - 1e-8);
        CHECK(v <= hi + 1e-8);
    }
}

TEST_CASE("mixed solutions match per-atom chain evaluation", "[mdp]") {
    rng::Stream stream(31, rng::Purpose::testing, 0);
    for (int round = 0; round < 50; ++round) {
        const Mdp m = random_mdp(stream, 5, 3, 0.9);
        MixedPolicy mix;
        mix.atoms.push_back({random_deterministic(stream, m), 0.5});
        mix.atoms.push_back({random_deterministic(stream, m), 0.3});
        mix.atoms.push_back({random_deterministic(stream, m), 0.2});
        double oracle = 0.0;
        for (const auto& atom : mix.atoms)
            oracle += atom.weight * solution_by_linear_solve(m, as_behavioural(m, atom.policy));
        CHECK(solution(m, mix, 1e-12) == Catch::Approx(oracle).margin(1e-9));
    }
}

TEST_CASE("solution is continuous along policy interpolation", "[mdp]") {
    rng::Stream stream(37, rng::Purpose::testing, 0);
    for (int round = 0; round < 20; ++round) {
        const Mdp m = random_mdp(stream, 6, 3, 0.99);
        const BehaviouralPolicy a = random_behavioural(stream, m);
        const BehaviouralPolicy b = random_behavioural(stream, m);
        const double t = stream.next_unit();
        const double delta = 1e-6;
        auto blend = [&](double w) {
            BehaviouralPolicy out = a;
            for (std::size_t s = 0; s < out.rows.size(); ++s)
                for (std::size_t i = 0; i < out.rows[s].size(); ++i)
                    out.rows[s][i] = w * a.rows[s][i] + (1.0 - w) * b.rows[s][i];
            return out;
        };
        const double v1 = solution(m, blend(t), 1e-11);
        const double v2 = solution(m, blend(std::min(1.0, t + delta)), 1e-11);
        CHECK(std::abs(v1 - v2) < 1e-4);
    }
}

TEST_CASE("behavioural mixing is not value mixing", "[mdp]") {
    // Stay-or-go loop: blending the policies beats blending the values.
    Mdp m;
    m.state_names = {"s0", "goal"};
    m.action_names = {"stay", "go"};
    m.enabled = {{0, 1}, {0}};
    m.initial = {1.0, 0.0};
    m.gamma = 0.9;
    m.goal = {0, 1};
    m.safe = {1, 0};
    m.trans = {
        {{1.0, 0.0}, {0.0, 1.0}},
        {{0.0, 1.0}},
    };
    REQUIRE(validate_mdp(m).empty());

    BehaviouralPolicy stay{{{1.0, 0.0}, {1.0}}};
    BehaviouralPolicy go{{{0.0, 1.0}, {1.0}}};
    BehaviouralPolicy blend{{{0.5, 0.5}, {1.0}}};
    const double v_stay = solution(m, stay, 1e-12);
    const double v_go = solution(m, go, 1e-12);
    const double v_blend = solution(m, blend, 1e-12);
    CHECK(std::abs(v_blend - 0.5 * (v_stay + v_go)) > 1e-3);
}

TEST_CASE("bellman value is monotone in goal mass", "[mdp]") {
    rng::Stream stream(41, rng::Purpose::testing, 0);
    for (int round = 0; round < 50; ++round) {
        const Mdp m = random_mdp(stream, 5, 3, 0.9);
        const BehaviouralPolicy pol = random_behavioural(stream, m);
        const auto before = bellman_value(m, pol, 1e-11);

        // Move some avoid mass to the goal state on a random row.
        Mdp bumped = m;
        const int goal = 3, avoid = 4;
        int s = static_cast<int>(stream.next_index(3));
        auto& row = bumped.trans[s][stream.next_index(bumped.trans[s].size())];
        const double shift = row[avoid] * 0.5;
        row[avoid] -= shift;
        row[goal] += shift;

        const auto after = bellman_value(bumped, pol, 1e-11);
        for (int i = 0; i < m.num_states(); ++i) CHECK(after[i] >= before[i] - 1e-9);
    }
}
