#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "upmdp/builtin_models.hpp"
#include "upmdp/model.hpp"

using namespace upmdp;

namespace {

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("toy model round-trips through the file format", "[model]") {
    const UpMdpTemplate toy = builtin_toy_model();
    const auto path = temp_file("upmdp_toy_model.json");
    save_model(path.string(), toy);
    const UpMdpTemplate loaded = load_model(path.string());

    CHECK(loaded.num_states() == 4);
    CHECK(loaded.params.size() == 4);
    int transitions = 0;
    for (const auto& rows : loaded.trans)
        for (const auto& row : rows) transitions += static_cast<int>(row.size());
    CHECK(transitions == 10);

    // Instantiations agree entry by entry.
    const std::vector<double> v = {0.3, 0.6, 0.2, 0.9};
    const Mdp a = instantiate(toy, v);
    const Mdp b = instantiate(loaded, v);
    for (int s = 0; s < a.num_states(); ++s)
        for (std::size_t slot = 0; slot < a.trans[s].size(); ++slot)
            for (int u = 0; u < a.num_states(); ++u)
                CHECK(a.trans[s][slot][u] == Catch::Approx(b.trans[s][slot][u]).margin(1e-15));
    std::filesystem::remove(path);
}

TEST_CASE("load_model names a missing field", "[model]") {
    nlohmann::json j = model_to_json(builtin_toy_model());
    j.erase("gamma");
    try {
        model_from_json(j);
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(e.field == "gamma");
    }
}

TEST_CASE("misnormalized constant rows load but fail to instantiate", "[model]") {
    nlohmann::json j = model_to_json(builtin_toy_model());
    for (auto& row : j["transitions"])
        if (row["from"] == "s0" && row["action"] == "advance")
            row["to"] = {{"s1", "0.4"}, {"critical", "0.5"}};
    const UpMdpTemplate t = model_from_json(j);  // accepted: sums are sample-time checks
    CHECK_THROWS_AS(instantiate(t, std::vector<double>{0.5, 0.5, 0.5, 0.5}), NormalizationError);
}

TEST_CASE("unknown parameters in expressions are rejected at load", "[model]") {
    nlohmann::json j = model_to_json(builtin_toy_model());
    for (auto& row : j["transitions"])
        if (row["from"] == "s0" && row["action"] == "advance")
            row["to"] = {{"s1", "p99"}, {"critical", "1 - p99"}};
    CHECK_THROWS_AS(model_from_json(j), UnknownParameterError);
}

TEST_CASE("instantiate evaluates parameter rows", "[model]") {
    const UpMdpTemplate toy = builtin_toy_model();
    const Mdp m = instantiate(toy, std::vector<double>{0.3, 0.1, 0.2, 0.4});
    CHECK(m.trans[0][0][1] == Catch::Approx(0.3));   // advance success
    CHECK(m.trans[0][0][3] == Catch::Approx(0.7));   // remainder to critical
    CHECK(validate_mdp(m).empty());
}

TEST_CASE("instantiate at the extreme corners of the toy model", "[model]") {
    const UpMdpTemplate toy = builtin_toy_model();
    const Mdp sure = instantiate(toy, std::vector<double>{1.0, 1.0, 1.0, 1.0});
    const auto best = optimal_value_and_policy(sure, Direction::maximize, 1e-11);
    CHECK(best.value == Catch::Approx(sure.gamma).margin(1e-9));  // jump straight to goal
    CHECK(best.policy.choice[0] == 1);

    const Mdp doomed = instantiate(toy, std::vector<double>{0.0, 0.0, 0.0, 0.0});
    CHECK(optimal_value_and_policy(doomed, Direction::maximize, 1e-11).value ==
          Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("instantiation is affine along parameter interpolation", "[model]") {
    const UpMdpTemplate toy = builtin_toy_model();
    const std::vector<double> v1 = {0.2, 0.4, 0.6, 0.8};
    const std::vector<double> v2 = {0.9, 0.1, 0.3, 0.5};
    for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        std::vector<double> blend(4);
        for (int i = 0; i < 4; ++i) blend[i] = t * v1[i] + (1.0 - t) * v2[i];
        const Mdp a = instantiate(toy, v1);
        const Mdp b = instantiate(toy, v2);
        const Mdp c = instantiate(toy, blend);
        for (int s = 0; s < c.num_states(); ++s)
            for (std::size_t slot = 0; slot < c.trans[s].size(); ++slot)
                for (int u = 0; u < c.num_states(); ++u)
                    CHECK(c.trans[s][slot][u] ==
                          Catch::Approx(t * a.trans[s][slot][u] + (1.0 - t) * b.trans[s][slot][u])
                              .margin(1e-12));
    }
}

TEST_CASE("sampling is deterministic in the seed", "[model]") {
    const UpMdpTemplate toy = builtin_toy_model();
    const ScenarioSet a = sample_scenarios(toy, 50, 1234);
    const ScenarioSet b = sample_scenarios(toy, 50, 1234);
    const ScenarioSet c = sample_scenarios(toy, 50, 1235);
    CHECK(a.samples == b.samples);
    CHECK(a.samples != c.samples);
    CHECK(a.fingerprint == b.fingerprint);
}

TEST_CASE("sampling an empty set is allowed", "[model]") {
    CHECK(sample_scenarios(builtin_toy_model(), 0, 7).samples.empty());
}

TEST_CASE("box sampling has the right mean", "[model][slow]") {
    const UpMdpTemplate toy = builtin_toy_model();
    const ScenarioSet set = sample_scenarios(toy, 100000, 99);
    for (int coord = 0; coord < 4; ++coord) {
        double mean = 0.0;
        for (const auto& s : set.samples) mean += s[coord];
        mean /= static_cast<double>(set.samples.size());
        CHECK(std::abs(mean - 0.5) < 0.01);
    }
}

TEST_CASE("triangular and mixture distributions sample inside their support", "[model]") {
    UpMdpTemplate toy = builtin_toy_model();
    toy.distribution.kind = ParameterDistribution::Kind::triangular;
    toy.distribution.triangular.assign(4, {0.2, 0.5, 0.9});
    const ScenarioSet tri = sample_scenarios(toy, 2000, 5);
    double mean = 0.0;
    for (const auto& s : tri.samples)
        for (double x : s) {
            CHECK(x >= 0.2);
            CHECK(x <= 0.9);
            mean += x;
        }
    mean /= static_cast<double>(4 * tri.samples.size());
    CHECK(std::abs(mean - (0.2 + 0.5 + 0.9) / 3.0) < 0.02);  // triangular mean

    toy.distribution = ParameterDistribution{};
    toy.distribution.kind = ParameterDistribution::Kind::mixture;
    toy.distribution.mixture_weights = {0.75, 0.25};
    toy.distribution.mixture_boxes = {
        std::vector<std::array<double, 2>>(4, {0.0, 0.1}),
        std::vector<std::array<double, 2>>(4, {0.9, 1.0}),
    };
    const ScenarioSet mix = sample_scenarios(toy, 4000, 6);
    int low = 0;
    for (const auto& s : mix.samples) {
        const bool in_low = s[0] <= 0.1;
        for (double x : s) CHECK((x <= 0.1 || x >= 0.9));
        if (in_low) ++low;
    }
    CHECK(std::abs(low / 4000.0 - 0.75) < 0.03);
}

TEST_CASE("scenario files round-trip", "[model]") {
    const UpMdpTemplate toy = builtin_toy_model();
    const ScenarioSet set = sample_scenarios(toy, 25, 42);
    const auto path = temp_file("upmdp_scenarios.json");
    save_scenarios(path.string(), set);
    const ScenarioSet loaded = load_scenarios(path.string());
    CHECK(loaded.seed == 42);
    CHECK(loaded.samples == set.samples);
    std::filesystem::remove(path);
}

TEST_CASE("gridworld builds the advertised shape", "[model]") {
    const UpMdpTemplate grid = builtin_gridworld(3, 3);
    CHECK(grid.num_states() == 9);
    CHECK(grid.params.size() == 3);
    CHECK(validate_mdp(instantiate(grid, std::vector<double>{0.1, 0.2, 0.3})).empty());
}

TEST_CASE("gridworld without wind reaches the goal along the shortest path", "[model]") {
    GridWindParams calm;
    calm.zones = 1;
    calm.push_lo = 0.0;
    calm.push_hi = 0.0;
    const UpMdpTemplate grid = builtin_gridworld(3, 3, calm);
    const Mdp m = instantiate(grid, std::vector<double>{0.0});
    const auto best = optimal_value_and_policy(m, Direction::maximize, 1e-11);
    CHECK(best.value == Catch::Approx(std::pow(m.gamma, 4)).margin(1e-9));
}

TEST_CASE("gridworld wind toward the wall punishes hugging it", "[model]") {
    // Per-column zones, wind west with certainty only in the column just east
    // of the wall: crossing anywhere below the gap row crashes into the
    // obstacles, so routes must climb first.
    GridWindParams gale;
    gale.zones = 5;
    gale.push_lo = 1.0;
    gale.push_hi = 1.0;
    gale.direction = 3;  // west
    const UpMdpTemplate grid = builtin_gridworld(5, 3, gale);
    const Mdp m = instantiate(grid, std::vector<double>{0.0, 0.0, 0.0, 1.0, 0.0});

    auto slot_of = [&](int s, const char* name) {
        for (std::size_t slot = 0; slot < m.enabled[s].size(); ++slot)
            if (m.action_names[m.enabled[s][slot]] == name) return static_cast<int>(slot);
        FAIL("action not enabled");
        return 0;
    };
    auto cell = [&](int x, int y) { return y * 5 + x; };

    // Climb column 0, cross at the gap row, finish east.
    DeterministicPolicy careful;
    careful.choice.assign(m.num_states(), 0);
    for (int s = 0; s < m.num_states(); ++s) {
        if (m.is_terminal(s)) continue;
        const int x = s % 5, y = s / 5;
        careful.choice[s] = y < 2 && x == 0 ? slot_of(s, "north") : slot_of(s, "east");
    }
    // Hug the wall: head east along the bottom row.
    DeterministicPolicy eager = careful;
    for (int y = 0; y < 2; ++y) eager.choice[cell(0, y)] = slot_of(cell(0, y), "east");

    const double v_careful = solution(m, careful, 1e-11);
    const double v_eager = solution(m, eager, 1e-11);
    CHECK(v_careful == Catch::Approx(std::pow(m.gamma, 6)).margin(1e-9));
    CHECK(v_careful > v_eager + 1e-3);
}

TEST_CASE("gridworld rejects degenerate shapes", "[model]") {
    CHECK_THROWS_AS(builtin_gridworld(1, 5), InvalidGridError);
    GridWindParams bad;
    bad.zones = 99;
    CHECK_THROWS_AS(builtin_gridworld(3, 3, bad), InvalidGridError);
}
