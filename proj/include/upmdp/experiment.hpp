#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "upmdp/builtin_models.hpp"
#include "upmdp/certificates.hpp"
#include "upmdp/game.hpp"
#include "upmdp/interval.hpp"
#include "upmdp/subgradient.hpp"

namespace upmdp {

enum class Method { imdp, mne, stackelberg, subgradient, per_sample };

inline const char* method_name(Method m) {
    switch (m) {
        case Method::imdp: return "imdp";
        case Method::mne: return "mne";
        case Method::stackelberg: return "stackelberg";
        case Method::subgradient: return "subgradient";
        case Method::per_sample: return "per-sample";
    }
    return "?";
}

inline Method parse_method(const std::string& name) {
    if (name == "imdp") return Method::imdp;
    if (name == "mne") return Method::mne;
    if (name == "stackelberg") return Method::stackelberg;
    if (name == "subgradient") return Method::subgradient;
    if (name == "per-sample") return Method::per_sample;
    throw InvalidInputError("unknown method '" + name + "'");
}

/// Builtin model names resolve before file paths: "toy", "grid:WxH"; anything
/// else (or an explicit ./ prefix) is treated as a model file.
inline UpMdpTemplate resolve_model(const std::string& id) {
    if (id == "toy") return builtin_toy_model();
    if (id.rfind("grid:", 0) == 0) {
        const auto x = id.find('x', 5);
        if (x == std::string::npos) throw InvalidGridError("grid spec must look like grid:WxH");
        const int w = std::stoi(id.substr(5, x - 5));
        const int h = std::stoi(id.substr(x + 1));
        return builtin_gridworld(w, h);
    }
    return load_model(id);
}

// ---------------------------------------------------------------------------
// Policy serialization
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json action_map(const UpMdpTemplate& t, const DeterministicPolicy& pol) {
    nlohmann::json j = nlohmann::json::object();
    for (int s = 0; s < t.num_states(); ++s)
        j[t.state_names[s]] = t.action_names[t.enabled[s][pol.choice[s]]];
    return j;
}

inline DeterministicPolicy action_map_to_policy(const UpMdpTemplate& t, const nlohmann::json& j) {
    DeterministicPolicy pol;
    pol.choice.assign(t.num_states(), 0);
    for (int s = 0; s < t.num_states(); ++s) {
        const std::string& state = t.state_names[s];
        if (!j.contains(state)) throw SchemaError("policy", "missing state '" + state + "'");
        const std::string action = j[state].get<std::string>();
        bool found = false;
        for (std::size_t slot = 0; slot < t.enabled[s].size(); ++slot)
            if (t.action_names[t.enabled[s][slot]] == action) {
                pol.choice[s] = static_cast<int>(slot);
                found = true;
            }
        if (!found)
            throw SchemaError("policy", "action '" + action + "' not enabled in state " + state);
    }
    return pol;
}

}  // namespace detail

inline nlohmann::json policy_to_json(const UpMdpTemplate& t, const PolicyVariant& pol) {
    nlohmann::json j;
    if (const auto* det = std::get_if<DeterministicPolicy>(&pol)) {
        j["class"] = "deterministic";
        j["actions"] = detail::action_map(t, *det);
    } else if (const auto* beh = std::get_if<BehaviouralPolicy>(&pol)) {
        j["class"] = "behavioural";
        nlohmann::json rows = nlohmann::json::object();
        for (int s = 0; s < t.num_states(); ++s) {
            nlohmann::json row = nlohmann::json::object();
            for (std::size_t slot = 0; slot < t.enabled[s].size(); ++slot)
                row[t.action_names[t.enabled[s][slot]]] = beh->rows[s][slot];
            rows[t.state_names[s]] = row;
        }
        j["rows"] = rows;
    } else {
        const auto& mix = std::get<MixedPolicy>(pol);
        j["class"] = "mixed";
        j["atoms"] = nlohmann::json::array();
        for (const auto& atom : mix.atoms)
            j["atoms"].push_back(
                {{"weight", atom.weight}, {"actions", detail::action_map(t, atom.policy)}});
    }
    return j;
}

inline PolicyVariant policy_from_json(const UpMdpTemplate& t, const nlohmann::json& j) {
    if (!j.contains("class")) throw SchemaError("policy", "missing class tag");
    const std::string cls = j["class"].get<std::string>();
    if (cls == "deterministic") return detail::action_map_to_policy(t, j.at("actions"));
    if (cls == "behavioural") {
        BehaviouralPolicy pol;
        pol.rows.resize(t.num_states());
        for (int s = 0; s < t.num_states(); ++s) {
            pol.rows[s].assign(t.enabled[s].size(), 0.0);
            const std::string& state = t.state_names[s];
            if (!j.at("rows").contains(state))
                throw SchemaError("policy", "missing state '" + state + "'");
            for (std::size_t slot = 0; slot < t.enabled[s].size(); ++slot) {
                const std::string& action = t.action_names[t.enabled[s][slot]];
                if (j["rows"][state].contains(action))
                    pol.rows[s][slot] = j["rows"][state][action].get<double>();
            }
        }
        return pol;
    }
    if (cls == "mixed") {
        MixedPolicy pol;
        for (const auto& atom : j.at("atoms"))
            pol.atoms.push_back({detail::action_map_to_policy(t, atom.at("actions")),
                                 atom.at("weight").get<double>()});
        return pol;
    }
    throw SchemaError("policy", "unknown class '" + cls + "'");
}

// ---------------------------------------------------------------------------
// Baseline: a fresh optimal policy per sample
// ---------------------------------------------------------------------------

struct PerSampleBaseline {
    std::vector<DeterministicPolicy> policies;  // one per scenario
    std::vector<double> values;                 // the per-sample optima
    double lambda_star = 0.0;                   // min over scenarios
};

/// The comparison method: solve each sampled MDP to optimality. Its scenario
/// program has a single support constraint, certified by the classical convex
/// bound, but applying it to a fresh MDP requires knowing that MDP's
/// parameters.
inline PerSampleBaseline per_sample_baseline(const UpMdpTemplate& t, const ScenarioSet& scenarios,
                                             double solve_tol = 1e-9, int jobs = 1) {
    if (scenarios.samples.empty()) throw EmptyInputError("baseline needs at least one scenario");
    PerSampleBaseline out;
    out.policies.resize(scenarios.size());
    out.values.resize(scenarios.size());
    parallel_for(scenarios.size(), jobs, [&](std::size_t i) {
        const Mdp m = instantiate(t, scenarios.samples[i], static_cast<long>(i));
        auto best = optimal_value_and_policy(m, Direction::maximize, solve_tol);
        out.policies[i] = std::move(best.policy);
        out.values[i] = best.value;
    });
    out.lambda_star = *std::min_element(out.values.begin(), out.values.end());
    return out;
}

/// Existential risk of the per-sample approach: the fraction of fresh MDPs
/// whose *optimal* value falls below lambda*.
inline double empirical_risk_existential(const UpMdpTemplate& t, double lambda_star, std::size_t m,
                                         std::uint64_t seed, double solve_tol = 1e-9, int jobs = 1) {
    std::vector<char> violated(m, 0);
    parallel_for(m, jobs, [&](std::size_t i) {
        rng::Stream stream(seed, rng::Purpose::validation, i);
        const auto v = detail::draw_parameter_vector(t.distribution, stream);
        const Mdp mdp = instantiate(t, v, static_cast<long>(i));
        const double best = optimal_value_and_policy(mdp, Direction::maximize, solve_tol).value;
        violated[i] = best < lambda_star - 1e-9 ? 1 : 0;
    });
    return static_cast<double>(std::count(violated.begin(), violated.end(), 1)) /
           static_cast<double>(m);
}

/// Runtime risk without parameter access: synthesize the optimal policy for
/// one fresh sample, play it on a second fresh sample, and test against
/// lambda*. This is the quantity that blows past the per-sample certificate.
inline double empirical_risk_transplanted(const UpMdpTemplate& t, double lambda_star, std::size_t m,
                                          std::uint64_t seed, double solve_tol = 1e-9, int jobs = 1) {
    std::vector<char> violated(m, 0);
    parallel_for(m, jobs, [&](std::size_t i) {
        rng::Stream stream(seed, rng::Purpose::validation, i);
        const auto synth = detail::draw_parameter_vector(t.distribution, stream);
        const auto test = detail::draw_parameter_vector(t.distribution, stream);
        const Mdp synth_mdp = instantiate(t, synth, static_cast<long>(i));
        const auto policy = optimal_value_and_policy(synth_mdp, Direction::maximize, solve_tol).policy;
        const Mdp test_mdp = instantiate(t, test, static_cast<long>(i));
        violated[i] = solution(test_mdp, policy, solve_tol) < lambda_star - 1e-9 ? 1 : 0;
    });
    return static_cast<double>(std::count(violated.begin(), violated.end(), 1)) /
           static_cast<double>(m);
}

// ---------------------------------------------------------------------------
// Experiment runner
// ---------------------------------------------------------------------------

enum class DetSupportBound { blocked, union_bound, greedy };

struct ExperimentConfig {
    std::string model = "toy";
    Method method = Method::subgradient;
    std::size_t n = 200;
    double beta = 1e-5;
    std::uint64_t seed = 0;
    std::size_t validation_draws = 10000;
    double support_tol = 1e-4;   // tightness tolerance for behavioural support
    double solve_tol = 1e-9;
    int jobs = 1;
    std::string out_dir;         // artifacts are written when non-empty
    std::string invocation;      // recorded verbatim in JSON artifacts
    bool dump_matrix = false;    // mne/stackelberg: write the reward matrix CSV
    DetSupportBound det_bound = DetSupportBound::blocked;
    SubgradientConfig subgradient;
    MneConfig mne;
};

struct ExperimentRow {
    std::string model;
    std::string method;
    std::size_t n = 0;
    double beta = 0.0;
    double lambda_star = 0.0;
    std::string bound_kind;  // epsilon | mu | convex
    double bound = 0.0;
    int support_count = 0;
    double time_s = 0.0;
    double emp_risk = 0.0;
    double emp_risk_nopars = 0.0;
    std::uint64_t seed = 0;
};

inline constexpr const char* kRowCsvHeader =
    "model,method,n,beta,lambda_star,bound_kind,bound,k,time_s,emp_risk,emp_risk_nopars,seed";

inline std::string row_to_csv(const ExperimentRow& row) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), "%s,%s,%zu,%.6g,%.6g,%s,%.6g,%d,%.3f,%.6g,%.6g,%llu",
                  row.model.c_str(), row.method.c_str(), row.n, row.beta, row.lambda_star,
                  row.bound_kind.c_str(), row.bound, row.support_count, row.time_s, row.emp_risk,
                  row.emp_risk_nopars, static_cast<unsigned long long>(row.seed));
    return buf;
}

struct ExperimentResult {
    ExperimentRow row;
    PolicyVariant policy;
    RiskCertificate certificate;
    ScenarioSet scenarios;
    std::vector<IterationRecord> trace;  // subgradient only
};

namespace detail {

inline nlohmann::json certificate_to_json(const RiskCertificate& cert, const ExperimentConfig& config) {
    nlohmann::json j;
    j["method"] = cert.method;
    j["n"] = cert.n;
    j["beta"] = cert.beta;
    j["k"] = cert.support_count;
    if (cert.eps_lo) j["eps_lo"] = *cert.eps_lo;
    if (cert.eps_hi) j["eps_hi"] = *cert.eps_hi;
    if (cert.mu) j["mu"] = *cert.mu;
    j["lambda_star"] = cert.lambda_star;
    j["seed"] = config.seed;
    j["tolerances"] = {{"support_tol", config.support_tol},
                       {"solve_tol", config.solve_tol},
                       {"weight_floor", config.mne.weight_floor}};
    j["generator"] = rng::kGeneratorId;
    if (!config.invocation.empty()) j["invocation"] = config.invocation;
    return j;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw ModelError("cannot write " + path.string());
    out << text;
}

}  // namespace detail

/// Full pipeline for one table row: sample scenarios, synthesize with the
/// chosen method, attach the risk certificate, then estimate both empirical
/// risks on fresh draws. Wall time covers synthesis and certification.
inline ExperimentResult run_experiment(const ExperimentConfig& config) {
    const UpMdpTemplate t = resolve_model(config.model);
    if (!config.out_dir.empty()) std::filesystem::create_directories(config.out_dir);
    ExperimentResult result;
    result.scenarios = sample_scenarios(t, config.n, config.seed);

    const auto started = std::chrono::steady_clock::now();
    std::string bound_kind;
    double bound = 0.0;
    int support = 0;
    double lambda_star = 0.0;

    switch (config.method) {
        case Method::imdp: {
            const IntervalMdp imdp = build_interval_mdp(t, result.scenarios);
            const auto robust = robust_value_iteration(imdp, Direction::maximize, config.solve_tol);
            lambda_star = robust.value;
            support = support_count_imdp(t, result.scenarios, imdp);
            result.certificate = make_certificate("imdp", lambda_star, static_cast<int>(config.n),
                                                  config.beta, support);
            bound_kind = "mu";
            bound = result.certificate.upper_bound();
            result.policy = robust.policy;
            if (!config.out_dir.empty())
                detail::write_text(std::filesystem::path(config.out_dir) / "interval_model.json",
                                   interval_mdp_to_json(imdp).dump(2) + "\n");
            break;
        }
        case Method::mne: {
            MneConfig mne_config = config.mne;
            mne_config.solve_tol = config.solve_tol;
            mne_config.jobs = config.jobs;
            const MneResult mne = mne_policy(t, result.scenarios, mne_config);
            lambda_star = mne.lambda_star;
            support = support_count_mixed(mne.scenario_weights, mne_config.weight_floor);
            result.certificate = make_certificate("mixed", lambda_star, static_cast<int>(config.n),
                                                  config.beta, support);
            bound_kind = "epsilon";
            bound = result.certificate.upper_bound();
            result.policy = mne.policy;
            if (config.dump_matrix && !config.out_dir.empty())
                save_reward_matrix_csv((std::filesystem::path(config.out_dir) / "matrix.csv").string(),
                                       mne.matrix);
            break;
        }
        case Method::stackelberg: {
            const auto policies = enumerate_deterministic_policies(t, config.mne.enum_cap);
            const RewardMatrix r =
                reward_matrix(t, result.scenarios, policies, config.solve_tol, config.jobs);
            const StackelbergResult stack = stackelberg_maxmin(r);
            lambda_star = stack.value;
            switch (config.det_bound) {
                case DetSupportBound::blocked:
                    support = support_bound_det_blocked(r, stack.best_row, lambda_star);
                    break;
                case DetSupportBound::union_bound:
                    support = support_bound_det_hitting(r, lambda_star, HittingMode::union_bound);
                    break;
                case DetSupportBound::greedy:
                    support = support_bound_det_hitting(r, lambda_star, HittingMode::greedy);
                    break;
            }
            support = std::min<int>(support, static_cast<int>(config.n));
            result.certificate = make_certificate("deterministic-maxmin", lambda_star,
                                                  static_cast<int>(config.n), config.beta, support);
            bound_kind = "mu";
            bound = result.certificate.upper_bound();
            result.policy = policies[stack.best_row];
            if (config.dump_matrix && !config.out_dir.empty())
                save_reward_matrix_csv((std::filesystem::path(config.out_dir) / "matrix.csv").string(),
                                       r);
            break;
        }
        case Method::subgradient: {
            SubgradientConfig sub = config.subgradient;
            sub.seed = config.seed;
            sub.solve_tol = config.solve_tol;
            sub.value_tol = config.support_tol;
            sub.jobs = config.jobs;
            SubgradientResult ascent = subgradient_ascent(t, result.scenarios, sub);
            lambda_star = ascent.lambda_star;
            support = support_count_behavioural(ascent.scenario_values, lambda_star, config.support_tol);
            result.certificate = make_certificate("behavioural", lambda_star,
                                                  static_cast<int>(config.n), config.beta, support);
            bound_kind = "epsilon";
            bound = result.certificate.upper_bound();
            result.policy = std::move(ascent.policy);
            result.trace = std::move(ascent.trace);
            break;
        }
        case Method::per_sample: {
            const PerSampleBaseline baseline =
                per_sample_baseline(t, result.scenarios, config.solve_tol, config.jobs);
            lambda_star = baseline.lambda_star;
            support = 1;
            bound_kind = "convex";
            bound = classical_convex_bound(static_cast<int>(config.n), 1, config.beta);
            result.certificate.method = "per-sample";
            result.certificate.n = static_cast<int>(config.n);
            result.certificate.beta = config.beta;
            result.certificate.support_count = 1;
            result.certificate.lambda_star = lambda_star;
            result.certificate.eps_hi = bound;
            result.certificate.eps_lo = 0.0;
            // The per-scenario policy list is the artifact; the row's policy
            // slot holds the policy of the binding (worst) scenario.
            std::size_t worst = 0;
            for (std::size_t i = 1; i < baseline.values.size(); ++i)
                if (baseline.values[i] < baseline.values[worst]) worst = i;
            result.policy = baseline.policies[worst];
            if (!config.out_dir.empty()) {
                nlohmann::json list = nlohmann::json::array();
                for (std::size_t i = 0; i < baseline.policies.size(); ++i)
                    list.push_back({{"scenario", i},
                                    {"lambda", baseline.values[i]},
                                    {"policy", policy_to_json(t, baseline.policies[i])}});
                detail::write_text(std::filesystem::path(config.out_dir) / "per_sample_policies.json",
                                   list.dump(2) + "\n");
            }
            break;
        }
    }
    const auto finished = std::chrono::steady_clock::now();

    ExperimentRow row;
    row.model = config.model;
    row.method = method_name(config.method);
    row.n = config.n;
    row.beta = config.beta;
    row.lambda_star = lambda_star;
    row.bound_kind = bound_kind;
    row.bound = bound;
    row.support_count = support;
    row.time_s = std::chrono::duration<double>(finished - started).count();
    row.seed = config.seed;

    if (config.method == Method::per_sample) {
        row.emp_risk = empirical_risk_existential(t, lambda_star, config.validation_draws,
                                                  config.seed, config.solve_tol, config.jobs);
    } else {
        row.emp_risk = empirical_risk(t, result.policy, lambda_star, config.validation_draws,
                                      config.seed, config.solve_tol, config.jobs);
    }
    row.emp_risk_nopars = empirical_risk_transplanted(t, lambda_star, config.validation_draws,
                                                      config.seed, config.solve_tol, config.jobs);
    result.row = row;

    if (!config.out_dir.empty()) {
        const std::filesystem::path dir(config.out_dir);
        save_scenarios((dir / "scenarios.json").string(), result.scenarios);
        nlohmann::json policy_json = policy_to_json(t, result.policy);
        if (!config.invocation.empty()) policy_json["invocation"] = config.invocation;
        policy_json["seed"] = config.seed;
        detail::write_text(dir / "policy.json", policy_json.dump(2) + "\n");
        detail::write_text(dir / "certificate.json",
                           detail::certificate_to_json(result.certificate, config).dump(2) + "\n");
        detail::write_text(dir / "row.csv", std::string(kRowCsvHeader) + "\n" + row_to_csv(row) + "\n");
        if (!result.trace.empty()) save_trace_csv((dir / "trace.csv").string(), result.trace);
        nlohmann::json manifest;
        manifest["invocation"] = config.invocation;
        manifest["model"] = config.model;
        manifest["method"] = method_name(config.method);
        manifest["seed"] = config.seed;
        manifest["n"] = config.n;
        manifest["beta"] = config.beta;
        manifest["validation_draws"] = config.validation_draws;
        manifest["generator"] = rng::kGeneratorId;
        detail::write_text(dir / "run.json", manifest.dump(2) + "\n");
    }
    return result;
}

}  // namespace upmdp
