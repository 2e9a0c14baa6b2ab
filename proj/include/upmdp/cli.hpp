#pragma once

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "upmdp/experiment.hpp"
#include "upmdp/policy_equiv.hpp"

namespace upmdp::cli {

// Exit codes: 0 success, 1 usage, 2 model/validation error, 3 numerical
// failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitModel = 2;
inline constexpr int kExitNumeric = 3;

namespace detail {

inline std::string format_probability(double p) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", p);
    return buf;
}

inline std::string join_args(const std::vector<std::string>& args) {
    std::string out = "upmdp";
    for (const auto& a : args) {
        out.push_back(' ');
        out += a;
    }
    return out;
}

struct CommonFlags {
    std::string model = "toy";
    std::string method = "subgradient";
    std::size_t n = 200;
    double beta = 1e-5;
    std::uint64_t seed = 0;
    int jobs = 0;
    std::string out_dir;
    std::uint64_t max_iters = 0;
    double tol = 0.0;
    double step_c = 1.0;
    std::size_t trials = 10000;
    bool dump_matrix = false;
    std::string det_bound = "blocked";
};

inline ExperimentConfig to_experiment_config(const CommonFlags& flags,
                                             const std::vector<std::string>& args) {
    ExperimentConfig config;
    config.model = flags.model;
    config.method = parse_method(flags.method);
    config.n = flags.n;
    config.beta = flags.beta;
    config.seed = flags.seed;
    config.jobs = flags.jobs;
    config.out_dir = flags.out_dir;
    config.validation_draws = flags.trials;
    config.invocation = join_args(args);
    config.dump_matrix = flags.dump_matrix;
    if (flags.det_bound == "blocked") config.det_bound = DetSupportBound::blocked;
    else if (flags.det_bound == "union") config.det_bound = DetSupportBound::union_bound;
    else if (flags.det_bound == "greedy") config.det_bound = DetSupportBound::greedy;
    else throw InvalidInputError("unknown deterministic support bound '" + flags.det_bound + "'");
    if (flags.max_iters > 0) {
        config.subgradient.max_iters = flags.max_iters;
        config.mne.max_iters = flags.max_iters;
    }
    if (flags.tol > 0.0) {
        config.subgradient.window_tol = flags.tol;
        config.mne.tol = flags.tol;
    }
    config.subgradient.step_c = flags.step_c;
    return config;
}

}  // namespace detail

/// Parses and runs one invocation; writes human output to `out` and
/// diagnostics to `err`. Artifacts land under --out when given.
inline int dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
    CLI::App app{"robust policy synthesis for uncertain parametric MDPs"};
    app.require_subcommand(1);

    detail::CommonFlags flags;

    auto* synth = app.add_subcommand("synth", "synthesize a robust policy with a risk certificate");
    synth->add_option("--model", flags.model, "builtin name (toy, grid:WxH) or model file");
    synth->add_option("--method", flags.method, "imdp|mne|stackelberg|subgradient|per-sample");
    synth->add_option("--n", flags.n, "number of sampled scenarios");
    synth->add_option("--beta", flags.beta, "confidence parameter in (0,1)");
    synth->add_option("--seed", flags.seed, "master seed for all randomness");
    synth->add_option("--jobs", flags.jobs, "worker threads (0 = auto)");
    synth->add_option("--out", flags.out_dir, "artifact directory");
    synth->add_option("--max-iters", flags.max_iters, "iteration cap for iterative methods");
    synth->add_option("--tol", flags.tol, "convergence tolerance for iterative methods");
    synth->add_option("--step-c", flags.step_c, "subgradient step-size constant");
    synth->add_option("--trials", flags.trials, "validation draws for the empirical risks");
    synth->add_flag("--dump-matrix", flags.dump_matrix, "write the reward matrix CSV (mne/stackelberg)");
    synth->add_option("--det-bound", flags.det_bound, "stackelberg support bound: blocked|union|greedy");

    std::string family = "garatti";
    int bound_k = 0, bound_d = 1;
    std::size_t bound_n = 200;
    double bound_beta = 1e-5;
    auto* bound = app.add_subcommand("bound", "evaluate a risk bound directly");
    bound->add_option("--family", family, "garatti|mu|convex");
    bound->add_option("--n", bound_n, "sample count");
    bound->add_option("--k", bound_k, "support count (garatti, mu)");
    bound->add_option("--d", bound_d, "support dimension (convex)");
    bound->add_option("--beta", bound_beta, "confidence parameter in (0,1)");

    std::string policy_path;
    double lambda_star_flag = 0.0;
    auto* validate = app.add_subcommand("validate", "estimate the empirical risk of a stored policy");
    validate->add_option("--model", flags.model, "builtin name or model file");
    validate->add_option("--policy", policy_path, "policy JSON written by synth")->required();
    validate->add_option("--lambda", lambda_star_flag, "satisfaction threshold lambda*")->required();
    validate->add_option("--trials", flags.trials, "number of fresh validation draws");
    validate->add_option("--seed", flags.seed, "master seed");
    validate->add_option("--jobs", flags.jobs, "worker threads (0 = auto)");

    std::string methods_csv = "imdp,mne,stackelberg,subgradient,per-sample";
    auto* bench = app.add_subcommand("bench", "run a table of methods on one model");
    bench->add_option("--model", flags.model, "builtin name or model file");
    bench->add_option("--methods", methods_csv, "comma-separated method list");
    bench->add_option("--n", flags.n, "number of sampled scenarios");
    bench->add_option("--beta", flags.beta, "confidence parameter");
    bench->add_option("--seed", flags.seed, "master seed");
    bench->add_option("--trials", flags.trials, "validation draws");
    bench->add_option("--jobs", flags.jobs, "worker threads (0 = auto)");
    bench->add_option("--out", flags.out_dir, "artifact directory");
    bench->add_option("--max-iters", flags.max_iters, "iteration cap for iterative methods");

    auto* check = app.add_subcommand("check", "load a model and probe seeded instantiations");
    check->add_option("--model", flags.model, "builtin name or model file")->required();
    check->add_option("--seed", flags.seed, "probe seed");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return kExitOk;
        }
        err << e.what() << "\n" << app.help();
        return kExitUsage;
    }

    try {
        if (synth->parsed()) {
            const ExperimentConfig config = detail::to_experiment_config(flags, args);
            const ExperimentResult result = run_experiment(config);
            out << "method=" << result.row.method
                << " lambda_star=" << detail::format_probability(result.row.lambda_star) << " "
                << result.row.bound_kind << "=" << detail::format_probability(result.row.bound)
                << " k=" << result.row.support_count << " emp_risk="
                << detail::format_probability(result.row.emp_risk)
                << " time_s=" << result.row.time_s << "\n";
            return kExitOk;
        }
        if (bound->parsed()) {
            if (family == "garatti") {
                const auto [lo, hi] = epsilon_bounds(static_cast<int>(bound_n), bound_k, bound_beta);
                out << detail::format_probability(lo) << " " << detail::format_probability(hi) << "\n";
            } else if (family == "mu") {
                out << detail::format_probability(mu_bound(static_cast<int>(bound_n), bound_k, bound_beta))
                    << "\n";
            } else if (family == "convex") {
                out << detail::format_probability(
                           classical_convex_bound(static_cast<int>(bound_n), bound_d, bound_beta))
                    << "\n";
            } else {
                err << "unknown bound family '" << family << "'\n";
                return kExitUsage;
            }
            return kExitOk;
        }
        if (validate->parsed()) {
            const UpMdpTemplate t = resolve_model(flags.model);
            std::ifstream in(policy_path);
            if (!in) throw ModelError("cannot read " + policy_path);
            nlohmann::json j;
            in >> j;
            const PolicyVariant policy = policy_from_json(t, j);
            const double risk = empirical_risk(t, policy, lambda_star_flag, flags.trials, flags.seed,
                                               1e-9, flags.jobs);
            out << detail::format_probability(risk) << "\n";
            return kExitOk;
        }
        if (bench->parsed()) {
            std::vector<std::string> methods;
            std::stringstream ss(methods_csv);
            std::string token;
            while (std::getline(ss, token, ',')) methods.push_back(token);
            out << kRowCsvHeader << "\n";
            std::string rows;
            for (const auto& name : methods) {
                detail::CommonFlags row_flags = flags;
                row_flags.method = name;
                if (!flags.out_dir.empty())
                    row_flags.out_dir = (std::filesystem::path(flags.out_dir) / name).string();
                const ExperimentConfig config = detail::to_experiment_config(row_flags, args);
                const ExperimentResult result = run_experiment(config);
                const std::string line = row_to_csv(result.row);
                out << line << "\n" << std::flush;
                rows += line + "\n";
            }
            if (!flags.out_dir.empty())
                upmdp::detail::write_text(std::filesystem::path(flags.out_dir) / "rows.csv",
                                          std::string(kRowCsvHeader) + "\n" + rows);
            return kExitOk;
        }
        if (check->parsed()) {
            const UpMdpTemplate t = resolve_model(flags.model);
            for (std::size_t probe = 0; probe < 100; ++probe) {
                rng::Stream stream(flags.seed, rng::Purpose::testing, probe);
                const auto v = upmdp::detail::draw_parameter_vector(t.distribution, stream);
                const Mdp m = instantiate(t, v, static_cast<long>(probe));
                const auto violations = validate_mdp(m);
                if (!violations.empty()) {
                    err << "probe " << probe << ": " << violations.front() << "\n";
                    return kExitModel;
                }
            }
            out << "ok\n";
            return kExitOk;
        }
    } catch (const ModelError& e) {
        err << "model error: " << e.what() << "\n";
        return kExitModel;
    } catch (const NumericError& e) {
        err << "numerical error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    err << app.help();
    return kExitUsage;
}

}  // namespace upmdp::cli
