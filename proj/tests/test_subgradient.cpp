#include <catch2/catch_amalgamated.hpp>

#include "upmdp/builtin_models.hpp"
#include "upmdp/subgradient.hpp"

#include "test_util.hpp"

using namespace upmdp;
using namespace testutil;

TEST_CASE("simplex projection is identity on feasible points", "[subgradient]") {
    const auto p = project_simplex({0.2, 0.8});
    CHECK(p[0] == Catch::Approx(0.2).margin(1e-12));
    CHECK(p[1] == Catch::Approx(0.8).margin(1e-12));
}

TEST_CASE("simplex projection splits symmetric excess", "[subgradient]") {
    const auto p = project_simplex({0.6, 0.6});
    CHECK(p[0] == Catch::Approx(0.5).margin(1e-12));
    CHECK(p[1] == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("simplex projection clips negative coordinates", "[subgradient]") {
    // KKT solution of the sort-based algorithm for (1.2, -0.2).
    const auto p = project_simplex({1.2, -0.2});
    CHECK(p[0] == Catch::Approx(1.0).margin(1e-12));
    CHECK(p[1] == Catch::Approx(0.0).margin(1e-12));
    CHECK_THROWS_AS(project_simplex({}), EmptyInputError);
}

TEST_CASE("simplex projection properties on random vectors", "[subgradient]") {
    rng::Stream stream(79, rng::Purpose::testing, 0);
    for (int round = 0; round < 200; ++round) {
        std::vector<double> v(2 + stream.next_index(5));
        for (auto& x : v) x = 4.0 * stream.next_unit() - 2.0;
        const auto p = project_simplex(v);
        double sum = 0.0;
        for (double x : p) {
            CHECK(x >= 0.0);
            sum += x;
        }
        CHECK(sum == Catch::Approx(1.0).margin(1e-12));
        // Projection property: the result is no farther from any simplex
        // point than v is (checked against the vertices).
        for (std::size_t k = 0; k < v.size(); ++k) {
            double d_p = 0.0, d_v = 0.0;
            for (std::size_t i = 0; i < v.size(); ++i) {
                const double e = i == k ? 1.0 : 0.0;
                d_p += (p[i] - e) * (p[i] - e);
                d_v += (v[i] - e) * (v[i] - e);
            }
            CHECK(d_p <= d_v + 1e-12);
        }
    }
}

TEST_CASE("gradient vanishes on unreachable states", "[subgradient]") {
    // s0 jumps straight to the goal, so s1 is never visited.
    Mdp m = chain_mdp(0.9, 0.0, 1.0);
    m.trans[0][0] = {0.0, 0.0, 1.0, 0.0};
    const auto grad = gradient(m, uniform_policy(m), 1e-12);
    CHECK(grad[1][0] == Catch::Approx(0.0).margin(1e-12));
    CHECK(grad[0][0] > 0.0);
}

TEST_CASE("gradient is occupancy times Q", "[subgradient]") {
    const Mdp m = two_action_mdp(0.9, 1.0, 0.2);
    const BehaviouralPolicy pol = uniform_policy(m);
    const auto eta = occupancy(m, pol, 1e-12);
    const auto q = q_function(m, pol, 1e-12);
    const auto grad = gradient(m, pol, 1e-12);
    for (std::size_t slot = 0; slot < grad[0].size(); ++slot)
        CHECK(grad[0][slot] == Catch::Approx(eta[0] * q[0][slot]).margin(1e-14));
}

TEST_CASE("gradient matches central finite differences of the solution", "[subgradient]") {
    // eta carries the (1-gamma) normalization, so grad = (1-gamma) dsol/dpi.
    // The finite-difference oracle perturbs one action weight (the Bellman
    // recursion extends smoothly to rows summing to 1 +- delta) and compares
    // after rescaling.
    rng::Stream stream(83, rng::Purpose::testing, 0);
    const double delta = 1e-5;
    for (int round = 0; round < 20; ++round) {
        const Mdp m = random_mdp(stream, 4, 3, 0.9);
        const BehaviouralPolicy pol = random_behavioural(stream, m);
        const auto grad = gradient(m, pol, 1e-12);
        for (int s = 0; s < m.num_states(); ++s) {
            if (m.is_terminal(s)) continue;
            for (std::size_t slot = 0; slot < pol.rows[s].size(); ++slot) {
                BehaviouralPolicy plus = pol, minus = pol;
                plus.rows[s][slot] += delta;
                minus.rows[s][slot] -= delta;
                const double fd =
                    (solution(m, plus, 1e-13) - solution(m, minus, 1e-13)) / (2.0 * delta);
                const double scaled_fd = (1.0 - m.gamma) * fd;
                const double denom = std::max({std::abs(grad[s][slot]), std::abs(scaled_fd), 1e-8});
                CHECK(std::abs(grad[s][slot] - scaled_fd) / denom <= 1e-4);
            }
        }
    }
}

TEST_CASE("worst case pick is the unique minimizer", "[subgradient]") {
    rng::Stream stream(0, rng::Purpose::tie_break);
    CHECK(worst_case_sample({0.3, 0.5, 0.4}, 1e-4, stream) == 0);
    CHECK(worst_case_sample({0.7}, 1e-4, stream) == 0);
    CHECK_THROWS_AS(worst_case_sample({}, 1e-4, stream), EmptyInputError);
}

TEST_CASE("worst case ties split evenly", "[subgradient]") {
    rng::Stream stream(5, rng::Purpose::tie_break);
    const std::vector<double> values = {0.3, 0.3 + 1e-9, 0.5};
    int first = 0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i)
        if (worst_case_sample(values, 1e-4, stream) == 0) ++first;
    // Chi-square with one degree of freedom at the 1% level.
    const double expected = draws / 2.0;
    const double chi2 = (first - expected) * (first - expected) / expected +
                        (draws - first - expected) * (draws - first - expected) / expected;
    CHECK(chi2 < 6.63);
}

TEST_CASE("record objective is nondecreasing and feasible", "[subgradient]") {
    const UpMdpTemplate toy = builtin_toy_model();
    const ScenarioSet set = sample_scenarios(toy, 30, 321);
    SubgradientConfig config;
    config.max_iters = 400;
    config.solve_tol = 1e-8;
    const SubgradientResult result = subgradient_ascent(toy, set, config);
    for (std::size_t k = 1; k < result.trace.size(); ++k)
        CHECK(result.trace[k].record_objective >= result.trace[k - 1].record_objective);
    for (const auto& row : result.policy.rows) {
        double sum = 0.0;
        for (double p : row) {
            CHECK(p >= 0.0);
            sum += p;
        }
        CHECK(sum == Catch::Approx(1.0).margin(1e-9));
    }
    // Lower-bound validity: lambda* is the minimum over scenarios.
    for (double v : result.scenario_values) CHECK(result.lambda_star <= v + 1e-6);
}

TEST_CASE("single-scenario ascent approaches the per-sample optimum", "[subgradient][slow]") {
    const UpMdpTemplate toy = builtin_toy_model();
    const ScenarioSet set = sample_scenarios(toy, 1, 8);
    SubgradientConfig config;
    config.max_iters = 2000;
    // The occupancy normalization scales gradients by (1 - gamma), so the
    // step constant has to compensate at gamma = 0.99.
    config.step_c = 50.0;
    config.window = 2000;  // run the full budget
    const SubgradientResult result = subgradient_ascent(toy, set, config);
    const Mdp m = instantiate(toy, set.samples[0]);
    const auto best = optimal_value_and_policy(m, Direction::maximize, 1e-11);
    CHECK(result.lambda_star >= best.value - 1e-3);
    CHECK(result.lambda_star <= best.value + 1e-9);
}

TEST_CASE("dirichlet initialization is reproducible per seed", "[subgradient]") {
    const UpMdpTemplate toy = builtin_toy_model();
    const ScenarioSet set = sample_scenarios(toy, 10, 9);
    SubgradientConfig config;
    config.max_iters = 50;
    config.dirichlet_init = true;
    config.seed = 123;
    const auto a = subgradient_ascent(toy, set, config);
    const auto b = subgradient_ascent(toy, set, config);
    CHECK(a.lambda_star == b.lambda_star);
    CHECK(a.policy.rows == b.policy.rows);
    config.seed = 124;
    const auto c = subgradient_ascent(toy, set, config);
    CHECK(a.policy.rows != c.policy.rows);
}

TEST_CASE("trace CSV uses the pinned header", "[subgradient]") {
    const UpMdpTemplate toy = builtin_toy_model();
    const ScenarioSet set = sample_scenarios(toy, 5, 3);
    SubgradientConfig config;
    config.max_iters = 10;
    const auto result = subgradient_ascent(toy, set, config);
    const auto path = std::filesystem::temp_directory_path() / "upmdp_trace.csv";
    save_trace_csv(path.string(), result.trace);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "iter,worst_idx,f,f_star,alpha");
    std::string first;
    std::getline(in, first);
    CHECK(first.rfind("0,", 0) == 0);
    std::filesystem::remove(path);
}
